#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "otprobe/opcua/binary.hpp"

namespace otprobe::opcua {

inline constexpr std::string_view policy_none_uri = "http://opcfoundation.org/UA/SecurityPolicy#None";
inline constexpr std::string_view policy_basic256sha256_uri = "http://opcfoundation.org/UA/SecurityPolicy#Basic256Sha256";
inline constexpr std::string_view uatcp_transport_uri = "http://opcfoundation.org/UA-Profile/Transport/uatcp-uasc-uabinary";

// ---- transport layer (UACP / UASC framing) ----

inline constexpr std::size_t message_header_size = 8;
inline constexpr std::uint32_t default_buffer_size = 65536;
/// Upper bound for any message this implementation will accept.
inline constexpr std::uint32_t max_message_size = 16u << 20;

struct MessageHeader {
    std::array<char, 3> type{};
    char chunk{'F'};
    std::uint32_t size{0};

    std::string_view type_view() const noexcept { return {type.data(), type.size()}; }
};

/// Throws DecodeError for short input or a size outside [8, max_message_size].
MessageHeader decode_message_header(std::span<const std::uint8_t> bytes);
/// Prepends the 8-byte header to `body`.
Bytes frame_message(std::string_view type, std::span<const std::uint8_t> body, char chunk = 'F');

struct Hello {
    std::uint32_t protocol_version{0};
    std::uint32_t receive_buffer_size{default_buffer_size};
    std::uint32_t send_buffer_size{default_buffer_size};
    std::uint32_t max_message_size{0};
    std::uint32_t max_chunk_count{0};
    std::string endpoint_url;

    void encode(Writer& w) const;
    static Hello decode(Reader& r);
};

struct Acknowledge {
    std::uint32_t protocol_version{0};
    std::uint32_t receive_buffer_size{default_buffer_size};
    std::uint32_t send_buffer_size{default_buffer_size};
    std::uint32_t max_message_size{0};
    std::uint32_t max_chunk_count{0};

    void encode(Writer& w) const;
    static Acknowledge decode(Reader& r);
};

struct ErrorMessage {
    std::uint32_t error{0};
    std::string reason;

    void encode(Writer& w) const;
    static ErrorMessage decode(Reader& r);
};

/// OPN prefix: channel id, asymmetric security header, sequence header.
struct AsymmetricHeader {
    std::uint32_t channel_id{0};
    std::string policy_uri{policy_none_uri};
    std::uint32_t sequence_number{0};
    std::uint32_t request_id{0};

    void encode(Writer& w) const;
    static AsymmetricHeader decode(Reader& r);
};

/// MSG/CLO prefix: channel id, token id, sequence header.
struct SymmetricHeader {
    std::uint32_t channel_id{0};
    std::uint32_t token_id{0};
    std::uint32_t sequence_number{0};
    std::uint32_t request_id{0};

    void encode(Writer& w) const;
    static SymmetricHeader decode(Reader& r);
};

// ---- service layer ----

namespace encoding {
inline constexpr std::uint32_t AnonymousIdentityToken = 321;
inline constexpr std::uint32_t UserNameIdentityToken = 324;
inline constexpr std::uint32_t ServiceFault = 397;
inline constexpr std::uint32_t GetEndpointsRequest = 428;
inline constexpr std::uint32_t GetEndpointsResponse = 431;
inline constexpr std::uint32_t OpenSecureChannelRequest = 446;
inline constexpr std::uint32_t OpenSecureChannelResponse = 449;
inline constexpr std::uint32_t CloseSecureChannelRequest = 452;
inline constexpr std::uint32_t CreateSessionRequest = 461;
inline constexpr std::uint32_t CreateSessionResponse = 464;
inline constexpr std::uint32_t ActivateSessionRequest = 467;
inline constexpr std::uint32_t ActivateSessionResponse = 470;
inline constexpr std::uint32_t CloseSessionRequest = 473;
inline constexpr std::uint32_t CloseSessionResponse = 476;
inline constexpr std::uint32_t BrowseRequest = 527;
inline constexpr std::uint32_t BrowseResponse = 530;
inline constexpr std::uint32_t ReadRequest = 631;
inline constexpr std::uint32_t ReadResponse = 634;
inline constexpr std::uint32_t WriteRequest = 673;
inline constexpr std::uint32_t WriteResponse = 676;
}  // namespace encoding

enum class MessageSecurityMode : std::uint32_t {
    Invalid = 0,
    None = 1,
    Sign = 2,
    SignAndEncrypt = 3,
};

enum class UserTokenType : std::uint32_t {
    Anonymous = 0,
    UserName = 1,
    Certificate = 2,
    IssuedToken = 3,
};

struct RequestHeader {
    NodeId authentication_token;
    DateTime timestamp;
    std::uint32_t request_handle{0};
    std::uint32_t return_diagnostics{0};
    std::string audit_entry_id;
    std::uint32_t timeout_hint{0};

    void encode(Writer& w) const;
    static RequestHeader decode(Reader& r);
};

struct ResponseHeader {
    DateTime timestamp;
    std::uint32_t request_handle{0};
    std::uint32_t service_result{status::Good};

    void encode(Writer& w) const;
    static ResponseHeader decode(Reader& r);
};

struct ServiceFault {
    static constexpr std::uint32_t encoding_id = encoding::ServiceFault;
    ResponseHeader header;
    void encode(Writer& w) const { header.encode(w); }
    static ServiceFault decode(Reader& r) { return {ResponseHeader::decode(r)}; }
};

struct OpenSecureChannelRequest {
    static constexpr std::uint32_t encoding_id = encoding::OpenSecureChannelRequest;
    RequestHeader header;
    std::uint32_t client_protocol_version{0};
    std::uint32_t request_type{0};  // 0 issue, 1 renew
    MessageSecurityMode security_mode{MessageSecurityMode::None};
    Bytes client_nonce;
    std::uint32_t requested_lifetime{3'600'000};

    void encode(Writer& w) const;
    static OpenSecureChannelRequest decode(Reader& r);
};

struct OpenSecureChannelResponse {
    static constexpr std::uint32_t encoding_id = encoding::OpenSecureChannelResponse;
    ResponseHeader header;
    std::uint32_t server_protocol_version{0};
    std::uint32_t channel_id{0};
    std::uint32_t token_id{0};
    DateTime created_at;
    std::uint32_t revised_lifetime{0};
    Bytes server_nonce;

    void encode(Writer& w) const;
    static OpenSecureChannelResponse decode(Reader& r);
};

struct CloseSecureChannelRequest {
    static constexpr std::uint32_t encoding_id = encoding::CloseSecureChannelRequest;
    RequestHeader header;
    void encode(Writer& w) const { header.encode(w); }
    static CloseSecureChannelRequest decode(Reader& r) { return {RequestHeader::decode(r)}; }
};

struct ApplicationDescription {
    std::string application_uri;
    std::string product_uri;
    LocalizedText application_name;
    std::uint32_t application_type{0};  // 0 server, 1 client
    std::string gateway_server_uri;
    std::string discovery_profile_uri;
    std::vector<std::string> discovery_urls;

    void encode(Writer& w) const;
    static ApplicationDescription decode(Reader& r);
};

struct UserTokenPolicy {
    std::string policy_id;
    UserTokenType token_type{UserTokenType::Anonymous};
    std::string issued_token_type;
    std::string issuer_endpoint_url;
    std::string security_policy_uri;

    void encode(Writer& w) const;
    static UserTokenPolicy decode(Reader& r);
};

struct EndpointDescription {
    std::string endpoint_url;
    ApplicationDescription server;
    Bytes server_certificate;
    MessageSecurityMode security_mode{MessageSecurityMode::None};
    std::string security_policy_uri{policy_none_uri};
    std::vector<UserTokenPolicy> user_identity_tokens;
    std::string transport_profile_uri{uatcp_transport_uri};
    std::uint8_t security_level{0};

    void encode(Writer& w) const;
    static EndpointDescription decode(Reader& r);
};

struct GetEndpointsRequest {
    static constexpr std::uint32_t encoding_id = encoding::GetEndpointsRequest;
    RequestHeader header;
    std::string endpoint_url;
    std::vector<std::string> locale_ids;
    std::vector<std::string> profile_uris;

    void encode(Writer& w) const;
    static GetEndpointsRequest decode(Reader& r);
};

struct GetEndpointsResponse {
    static constexpr std::uint32_t encoding_id = encoding::GetEndpointsResponse;
    ResponseHeader header;
    std::vector<EndpointDescription> endpoints;

    void encode(Writer& w) const;
    static GetEndpointsResponse decode(Reader& r);
};

struct CreateSessionRequest {
    static constexpr std::uint32_t encoding_id = encoding::CreateSessionRequest;
    RequestHeader header;
    ApplicationDescription client_description;
    std::string server_uri;
    std::string endpoint_url;
    std::string session_name;
    Bytes client_nonce;
    double requested_session_timeout{60'000.0};
    std::uint32_t max_response_message_size{0};

    void encode(Writer& w) const;
    static CreateSessionRequest decode(Reader& r);
};

struct CreateSessionResponse {
    static constexpr std::uint32_t encoding_id = encoding::CreateSessionResponse;
    ResponseHeader header;
    NodeId session_id;
    NodeId authentication_token;
    double revised_session_timeout{0};
    Bytes server_nonce;
    std::vector<EndpointDescription> server_endpoints;
    std::uint32_t max_request_message_size{0};

    void encode(Writer& w) const;
    static CreateSessionResponse decode(Reader& r);
};

struct AnonymousIdentityToken {
    static constexpr std::uint32_t encoding_id = encoding::AnonymousIdentityToken;
    std::string policy_id;
};

struct UserNameIdentityToken {
    static constexpr std::uint32_t encoding_id = encoding::UserNameIdentityToken;
    std::string policy_id;
    std::string user_name;
    Bytes password;
    std::string encryption_algorithm;
};

ExtensionObject wrap(const AnonymousIdentityToken& t);
ExtensionObject wrap(const UserNameIdentityToken& t);
AnonymousIdentityToken unwrap_anonymous(const ExtensionObject& e);
UserNameIdentityToken unwrap_user_name(const ExtensionObject& e);

struct ActivateSessionRequest {
    static constexpr std::uint32_t encoding_id = encoding::ActivateSessionRequest;
    RequestHeader header;
    std::vector<std::string> locale_ids;
    ExtensionObject user_identity_token;

    void encode(Writer& w) const;
    static ActivateSessionRequest decode(Reader& r);
};

struct ActivateSessionResponse {
    static constexpr std::uint32_t encoding_id = encoding::ActivateSessionResponse;
    ResponseHeader header;
    Bytes server_nonce;
    std::vector<std::uint32_t> results;

    void encode(Writer& w) const;
    static ActivateSessionResponse decode(Reader& r);
};

struct CloseSessionRequest {
    static constexpr std::uint32_t encoding_id = encoding::CloseSessionRequest;
    RequestHeader header;
    bool delete_subscriptions{true};

    void encode(Writer& w) const;
    static CloseSessionRequest decode(Reader& r);
};

struct CloseSessionResponse {
    static constexpr std::uint32_t encoding_id = encoding::CloseSessionResponse;
    ResponseHeader header;
    void encode(Writer& w) const { header.encode(w); }
    static CloseSessionResponse decode(Reader& r) { return {ResponseHeader::decode(r)}; }
};

enum class BrowseDirection : std::uint32_t {
    Forward = 0,
    Inverse = 1,
    Both = 2,
};

struct BrowseDescription {
    NodeId node_id;
    BrowseDirection direction{BrowseDirection::Forward};
    NodeId reference_type_id{0, ids::HierarchicalReferences};
    bool include_subtypes{true};
    std::uint32_t node_class_mask{0};
    std::uint32_t result_mask{0x3F};

    void encode(Writer& w) const;
    static BrowseDescription decode(Reader& r);
};

struct ReferenceDescription {
    NodeId reference_type_id;
    bool is_forward{true};
    NodeId node_id;
    QualifiedName browse_name;
    LocalizedText display_name;
    NodeClass node_class{NodeClass::Unspecified};
    NodeId type_definition;

    void encode(Writer& w) const;
    static ReferenceDescription decode(Reader& r);
};

struct BrowseResult {
    std::uint32_t status_code{status::Good};
    Bytes continuation_point;
    std::vector<ReferenceDescription> references;

    void encode(Writer& w) const;
    static BrowseResult decode(Reader& r);
};

struct BrowseRequest {
    static constexpr std::uint32_t encoding_id = encoding::BrowseRequest;
    RequestHeader header;
    std::uint32_t requested_max_references_per_node{0};
    std::vector<BrowseDescription> nodes_to_browse;

    void encode(Writer& w) const;
    static BrowseRequest decode(Reader& r);
};

struct BrowseResponse {
    static constexpr std::uint32_t encoding_id = encoding::BrowseResponse;
    ResponseHeader header;
    std::vector<BrowseResult> results;

    void encode(Writer& w) const;
    static BrowseResponse decode(Reader& r);
};

struct ReadValueId {
    NodeId node_id;
    AttributeId attribute_id{AttributeId::Value};

    void encode(Writer& w) const;
    static ReadValueId decode(Reader& r);
};

struct ReadRequest {
    static constexpr std::uint32_t encoding_id = encoding::ReadRequest;
    RequestHeader header;
    double max_age{0};
    std::uint32_t timestamps_to_return{3};  // neither
    std::vector<ReadValueId> nodes_to_read;

    void encode(Writer& w) const;
    static ReadRequest decode(Reader& r);
};

struct ReadResponse {
    static constexpr std::uint32_t encoding_id = encoding::ReadResponse;
    ResponseHeader header;
    std::vector<DataValue> results;

    void encode(Writer& w) const;
    static ReadResponse decode(Reader& r);
};

struct WriteValue {
    NodeId node_id;
    AttributeId attribute_id{AttributeId::Value};
    DataValue value;

    void encode(Writer& w) const;
    static WriteValue decode(Reader& r);
};

struct WriteRequest {
    static constexpr std::uint32_t encoding_id = encoding::WriteRequest;
    RequestHeader header;
    std::vector<WriteValue> nodes_to_write;

    void encode(Writer& w) const;
    static WriteRequest decode(Reader& r);
};

struct WriteResponse {
    static constexpr std::uint32_t encoding_id = encoding::WriteResponse;
    ResponseHeader header;
    std::vector<std::uint32_t> results;

    void encode(Writer& w) const;
    static WriteResponse decode(Reader& r);
};

/// Encoding node id followed by the message body.
template <typename T>
void encode_service(Writer& w, const T& msg) {
    w.node_id(NodeId(0, T::encoding_id));
    msg.encode(w);
}

}  // namespace otprobe::opcua
