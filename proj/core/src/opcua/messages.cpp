#include "otprobe/opcua/messages.hpp"

#include <algorithm>

namespace otprobe::opcua {

namespace {

void write_opt_string(Writer& w, const std::string& s) {
    if (s.empty()) {
        w.null_string();
    } else {
        w.string(s);
    }
}

void write_null_extension(Writer& w) { w.extension_object(ExtensionObject{}); }

void write_empty_signature(Writer& w) {
    w.null_string();
    w.null_byte_string();
}

void skip_signature(Reader& r) {
    r.string();
    r.byte_string();
}

void skip_software_certificates(Reader& r) {
    const std::size_t n = r.array_length(8);
    for (std::size_t i = 0; i < n; ++i) {
        r.byte_string();
        r.byte_string();
    }
}

void skip_diagnostic_array(Reader& r) {
    const std::size_t n = r.array_length();
    for (std::size_t i = 0; i < n; ++i) r.skip_diagnostics();
}

void write_status_array(Writer& w, const std::vector<std::uint32_t>& codes) {
    w.array(codes, [](Writer& ww, std::uint32_t c) { ww.u32(c); });
}

std::vector<std::uint32_t> read_status_array(Reader& r) {
    const std::size_t n = r.array_length(4);
    std::vector<std::uint32_t> out(n);
    for (auto& c : out) c = r.u32();
    return out;
}

}  // namespace

MessageHeader decode_message_header(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < message_header_size) throw DecodeError("message header shorter than 8 bytes");
    MessageHeader h;
    std::copy_n(bytes.begin(), 3, h.type.begin());
    h.chunk = static_cast<char>(bytes[3]);
    Reader r(bytes.subspan(4, 4));
    h.size = r.u32();
    if (h.size < message_header_size || h.size > max_message_size)
        throw DecodeError("message size " + std::to_string(h.size) + " out of range");
    return h;
}

Bytes frame_message(std::string_view type, std::span<const std::uint8_t> body, char chunk) {
    Writer w;
    for (char c : type.substr(0, 3)) w.u8(static_cast<std::uint8_t>(c));
    w.u8(static_cast<std::uint8_t>(chunk));
    w.u32(static_cast<std::uint32_t>(message_header_size + body.size()));
    w.raw(body);
    return w.take();
}

void Hello::encode(Writer& w) const {
    w.u32(protocol_version);
    w.u32(receive_buffer_size);
    w.u32(send_buffer_size);
    w.u32(max_message_size);
    w.u32(max_chunk_count);
    w.string(endpoint_url);
}

Hello Hello::decode(Reader& r) {
    Hello h;
    h.protocol_version = r.u32();
    h.receive_buffer_size = r.u32();
    h.send_buffer_size = r.u32();
    h.max_message_size = r.u32();
    h.max_chunk_count = r.u32();
    h.endpoint_url = r.string();
    return h;
}

void Acknowledge::encode(Writer& w) const {
    w.u32(protocol_version);
    w.u32(receive_buffer_size);
    w.u32(send_buffer_size);
    w.u32(max_message_size);
    w.u32(max_chunk_count);
}

Acknowledge Acknowledge::decode(Reader& r) {
    Acknowledge a;
    a.protocol_version = r.u32();
    a.receive_buffer_size = r.u32();
    a.send_buffer_size = r.u32();
    a.max_message_size = r.u32();
    a.max_chunk_count = r.u32();
    return a;
}

void ErrorMessage::encode(Writer& w) const {
    w.u32(error);
    w.string(reason);
}

ErrorMessage ErrorMessage::decode(Reader& r) {
    ErrorMessage e;
    e.error = r.u32();
    e.reason = r.string();
    return e;
}

void AsymmetricHeader::encode(Writer& w) const {
    w.u32(channel_id);
    w.string(policy_uri);
    w.null_byte_string();
    w.null_byte_string();
    w.u32(sequence_number);
    w.u32(request_id);
}

AsymmetricHeader AsymmetricHeader::decode(Reader& r) {
    AsymmetricHeader h;
    h.channel_id = r.u32();
    h.policy_uri = r.string();
    r.byte_string();
    r.byte_string();
    h.sequence_number = r.u32();
    h.request_id = r.u32();
    return h;
}

void SymmetricHeader::encode(Writer& w) const {
    w.u32(channel_id);
    w.u32(token_id);
    w.u32(sequence_number);
    w.u32(request_id);
}

SymmetricHeader SymmetricHeader::decode(Reader& r) {
    SymmetricHeader h;
    h.channel_id = r.u32();
    h.token_id = r.u32();
    h.sequence_number = r.u32();
    h.request_id = r.u32();
    return h;
}

void RequestHeader::encode(Writer& w) const {
    w.node_id(authentication_token);
    w.date_time(timestamp);
    w.u32(request_handle);
    w.u32(return_diagnostics);
    write_opt_string(w, audit_entry_id);
    w.u32(timeout_hint);
    write_null_extension(w);
}

RequestHeader RequestHeader::decode(Reader& r) {
    RequestHeader h;
    h.authentication_token = r.node_id();
    h.timestamp = r.date_time();
    h.request_handle = r.u32();
    h.return_diagnostics = r.u32();
    h.audit_entry_id = r.string();
    h.timeout_hint = r.u32();
    r.extension_object();
    return h;
}

void ResponseHeader::encode(Writer& w) const {
    w.date_time(timestamp);
    w.u32(request_handle);
    w.u32(service_result);
    w.empty_diagnostics();
    w.string_array({});
    write_null_extension(w);
}

ResponseHeader ResponseHeader::decode(Reader& r) {
    ResponseHeader h;
    h.timestamp = r.date_time();
    h.request_handle = r.u32();
    h.service_result = r.u32();
    r.skip_diagnostics();
    r.string_array();
    r.extension_object();
    return h;
}

void OpenSecureChannelRequest::encode(Writer& w) const {
    header.encode(w);
    w.u32(client_protocol_version);
    w.u32(request_type);
    w.u32(static_cast<std::uint32_t>(security_mode));
    w.byte_string(client_nonce);
    w.u32(requested_lifetime);
}

OpenSecureChannelRequest OpenSecureChannelRequest::decode(Reader& r) {
    OpenSecureChannelRequest m;
    m.header = RequestHeader::decode(r);
    m.client_protocol_version = r.u32();
    m.request_type = r.u32();
    m.security_mode = static_cast<MessageSecurityMode>(r.u32());
    m.client_nonce = r.byte_string();
    m.requested_lifetime = r.u32();
    return m;
}

void OpenSecureChannelResponse::encode(Writer& w) const {
    header.encode(w);
    w.u32(server_protocol_version);
    w.u32(channel_id);
    w.u32(token_id);
    w.date_time(created_at);
    w.u32(revised_lifetime);
    w.byte_string(server_nonce);
}

OpenSecureChannelResponse OpenSecureChannelResponse::decode(Reader& r) {
    OpenSecureChannelResponse m;
    m.header = ResponseHeader::decode(r);
    m.server_protocol_version = r.u32();
    m.channel_id = r.u32();
    m.token_id = r.u32();
    m.created_at = r.date_time();
    m.revised_lifetime = r.u32();
    m.server_nonce = r.byte_string();
    return m;
}

void ApplicationDescription::encode(Writer& w) const {
    w.string(application_uri);
    w.string(product_uri);
    w.localized_text(application_name);
    w.u32(application_type);
    write_opt_string(w, gateway_server_uri);
    write_opt_string(w, discovery_profile_uri);
    w.string_array(discovery_urls);
}

ApplicationDescription ApplicationDescription::decode(Reader& r) {
    ApplicationDescription a;
    a.application_uri = r.string();
    a.product_uri = r.string();
    a.application_name = r.localized_text();
    a.application_type = r.u32();
    a.gateway_server_uri = r.string();
    a.discovery_profile_uri = r.string();
    a.discovery_urls = r.string_array();
    return a;
}

void UserTokenPolicy::encode(Writer& w) const {
    w.string(policy_id);
    w.u32(static_cast<std::uint32_t>(token_type));
    write_opt_string(w, issued_token_type);
    write_opt_string(w, issuer_endpoint_url);
    write_opt_string(w, security_policy_uri);
}

UserTokenPolicy UserTokenPolicy::decode(Reader& r) {
    UserTokenPolicy p;
    p.policy_id = r.string();
    p.token_type = static_cast<UserTokenType>(r.u32());
    p.issued_token_type = r.string();
    p.issuer_endpoint_url = r.string();
    p.security_policy_uri = r.string();
    return p;
}

void EndpointDescription::encode(Writer& w) const {
    w.string(endpoint_url);
    server.encode(w);
    if (server_certificate.empty()) {
        w.null_byte_string();
    } else {
        w.byte_string(server_certificate);
    }
    w.u32(static_cast<std::uint32_t>(security_mode));
    w.string(security_policy_uri);
    w.array(user_identity_tokens, [](Writer& ww, const UserTokenPolicy& p) { p.encode(ww); });
    w.string(transport_profile_uri);
    w.u8(security_level);
}

EndpointDescription EndpointDescription::decode(Reader& r) {
    EndpointDescription e;
    e.endpoint_url = r.string();
    e.server = ApplicationDescription::decode(r);
    e.server_certificate = r.byte_string();
    e.security_mode = static_cast<MessageSecurityMode>(r.u32());
    e.security_policy_uri = r.string();
    e.user_identity_tokens = r.array([](Reader& rr) { return UserTokenPolicy::decode(rr); });
    e.transport_profile_uri = r.string();
    e.security_level = r.u8();
    return e;
}

void GetEndpointsRequest::encode(Writer& w) const {
    header.encode(w);
    w.string(endpoint_url);
    w.string_array(locale_ids);
    w.string_array(profile_uris);
}

GetEndpointsRequest GetEndpointsRequest::decode(Reader& r) {
    GetEndpointsRequest m;
    m.header = RequestHeader::decode(r);
    m.endpoint_url = r.string();
    m.locale_ids = r.string_array();
    m.profile_uris = r.string_array();
    return m;
}

void GetEndpointsResponse::encode(Writer& w) const {
    header.encode(w);
    w.array(endpoints, [](Writer& ww, const EndpointDescription& e) { e.encode(ww); });
}

GetEndpointsResponse GetEndpointsResponse::decode(Reader& r) {
    GetEndpointsResponse m;
    m.header = ResponseHeader::decode(r);
    m.endpoints = r.array([](Reader& rr) { return EndpointDescription::decode(rr); });
    return m;
}

void CreateSessionRequest::encode(Writer& w) const {
    header.encode(w);
    client_description.encode(w);
    write_opt_string(w, server_uri);
    w.string(endpoint_url);
    w.string(session_name);
    w.byte_string(client_nonce);
    w.null_byte_string();
    w.f64(requested_session_timeout);
    w.u32(max_response_message_size);
}

CreateSessionRequest CreateSessionRequest::decode(Reader& r) {
    CreateSessionRequest m;
    m.header = RequestHeader::decode(r);
    m.client_description = ApplicationDescription::decode(r);
    m.server_uri = r.string();
    m.endpoint_url = r.string();
    m.session_name = r.string();
    m.client_nonce = r.byte_string();
    r.byte_string();
    m.requested_session_timeout = r.f64();
    m.max_response_message_size = r.u32();
    return m;
}

void CreateSessionResponse::encode(Writer& w) const {
    header.encode(w);
    w.node_id(session_id);
    w.node_id(authentication_token);
    w.f64(revised_session_timeout);
    w.byte_string(server_nonce);
    w.null_byte_string();
    w.array(server_endpoints, [](Writer& ww, const EndpointDescription& e) { e.encode(ww); });
    w.i32(0);
    write_empty_signature(w);
    w.u32(max_request_message_size);
}

CreateSessionResponse CreateSessionResponse::decode(Reader& r) {
    CreateSessionResponse m;
    m.header = ResponseHeader::decode(r);
    m.session_id = r.node_id();
    m.authentication_token = r.node_id();
    m.revised_session_timeout = r.f64();
    m.server_nonce = r.byte_string();
    r.byte_string();
    m.server_endpoints = r.array([](Reader& rr) { return EndpointDescription::decode(rr); });
    skip_software_certificates(r);
    skip_signature(r);
    m.max_request_message_size = r.u32();
    return m;
}

ExtensionObject wrap(const AnonymousIdentityToken& t) {
    Writer w;
    w.string(t.policy_id);
    return ExtensionObject{NodeId(0, t.encoding_id), w.take()};
}

ExtensionObject wrap(const UserNameIdentityToken& t) {
    Writer w;
    w.string(t.policy_id);
    w.string(t.user_name);
    w.byte_string(t.password);
    write_opt_string(w, t.encryption_algorithm);
    return ExtensionObject{NodeId(0, t.encoding_id), w.take()};
}

AnonymousIdentityToken unwrap_anonymous(const ExtensionObject& e) {
    AnonymousIdentityToken t;
    if (e.body) {
        Reader r(*e.body);
        t.policy_id = r.string();
    }
    return t;
}

UserNameIdentityToken unwrap_user_name(const ExtensionObject& e) {
    if (!e.body) throw DecodeError("user name token without body");
    Reader r(*e.body);
    UserNameIdentityToken t;
    t.policy_id = r.string();
    t.user_name = r.string();
    t.password = r.byte_string();
    t.encryption_algorithm = r.string();
    return t;
}

void ActivateSessionRequest::encode(Writer& w) const {
    header.encode(w);
    write_empty_signature(w);
    w.i32(0);
    w.string_array(locale_ids);
    w.extension_object(user_identity_token);
    write_empty_signature(w);
}

ActivateSessionRequest ActivateSessionRequest::decode(Reader& r) {
    ActivateSessionRequest m;
    m.header = RequestHeader::decode(r);
    skip_signature(r);
    skip_software_certificates(r);
    m.locale_ids = r.string_array();
    m.user_identity_token = r.extension_object();
    skip_signature(r);
    return m;
}

void ActivateSessionResponse::encode(Writer& w) const {
    header.encode(w);
    w.byte_string(server_nonce);
    write_status_array(w, results);
    w.i32(0);
}

ActivateSessionResponse ActivateSessionResponse::decode(Reader& r) {
    ActivateSessionResponse m;
    m.header = ResponseHeader::decode(r);
    m.server_nonce = r.byte_string();
    m.results = read_status_array(r);
    skip_diagnostic_array(r);
    return m;
}

void CloseSessionRequest::encode(Writer& w) const {
    header.encode(w);
    w.boolean(delete_subscriptions);
}

CloseSessionRequest CloseSessionRequest::decode(Reader& r) {
    CloseSessionRequest m;
    m.header = RequestHeader::decode(r);
    m.delete_subscriptions = r.boolean();
    return m;
}

void BrowseDescription::encode(Writer& w) const {
    w.node_id(node_id);
    w.u32(static_cast<std::uint32_t>(direction));
    w.node_id(reference_type_id);
    w.boolean(include_subtypes);
    w.u32(node_class_mask);
    w.u32(result_mask);
}

BrowseDescription BrowseDescription::decode(Reader& r) {
    BrowseDescription d;
    d.node_id = r.node_id();
    d.direction = static_cast<BrowseDirection>(r.u32());
    d.reference_type_id = r.node_id();
    d.include_subtypes = r.boolean();
    d.node_class_mask = r.u32();
    d.result_mask = r.u32();
    return d;
}

void ReferenceDescription::encode(Writer& w) const {
    w.node_id(reference_type_id);
    w.boolean(is_forward);
    w.expanded_node_id(node_id);
    w.qualified_name(browse_name);
    w.localized_text(display_name);
    w.u32(static_cast<std::uint32_t>(node_class));
    w.expanded_node_id(type_definition);
}

ReferenceDescription ReferenceDescription::decode(Reader& r) {
    ReferenceDescription d;
    d.reference_type_id = r.node_id();
    d.is_forward = r.boolean();
    d.node_id = r.expanded_node_id();
    d.browse_name = r.qualified_name();
    d.display_name = r.localized_text();
    d.node_class = static_cast<NodeClass>(r.u32());
    d.type_definition = r.expanded_node_id();
    return d;
}

void BrowseResult::encode(Writer& w) const {
    w.u32(status_code);
    if (continuation_point.empty()) {
        w.null_byte_string();
    } else {
        w.byte_string(continuation_point);
    }
    w.array(references, [](Writer& ww, const ReferenceDescription& d) { d.encode(ww); });
}

BrowseResult BrowseResult::decode(Reader& r) {
    BrowseResult b;
    b.status_code = r.u32();
    b.continuation_point = r.byte_string();
    b.references = r.array([](Reader& rr) { return ReferenceDescription::decode(rr); });
    return b;
}

void BrowseRequest::encode(Writer& w) const {
    header.encode(w);
    w.node_id(NodeId{});
    w.date_time(DateTime{});
    w.u32(0);
    w.u32(requested_max_references_per_node);
    w.array(nodes_to_browse, [](Writer& ww, const BrowseDescription& d) { d.encode(ww); });
}

BrowseRequest BrowseRequest::decode(Reader& r) {
    BrowseRequest m;
    m.header = RequestHeader::decode(r);
    r.node_id();
    r.date_time();
    r.u32();
    m.requested_max_references_per_node = r.u32();
    m.nodes_to_browse = r.array([](Reader& rr) { return BrowseDescription::decode(rr); });
    return m;
}

void BrowseResponse::encode(Writer& w) const {
    header.encode(w);
    w.array(results, [](Writer& ww, const BrowseResult& b) { b.encode(ww); });
    w.i32(0);
}

BrowseResponse BrowseResponse::decode(Reader& r) {
    BrowseResponse m;
    m.header = ResponseHeader::decode(r);
    m.results = r.array([](Reader& rr) { return BrowseResult::decode(rr); });
    skip_diagnostic_array(r);
    return m;
}

void ReadValueId::encode(Writer& w) const {
    w.node_id(node_id);
    w.u32(static_cast<std::uint32_t>(attribute_id));
    w.null_string();
    w.u16(0);
    w.null_string();
}

ReadValueId ReadValueId::decode(Reader& r) {
    ReadValueId v;
    v.node_id = r.node_id();
    v.attribute_id = static_cast<AttributeId>(r.u32());
    r.string();
    r.qualified_name();
    return v;
}

void ReadRequest::encode(Writer& w) const {
    header.encode(w);
    w.f64(max_age);
    w.u32(timestamps_to_return);
    w.array(nodes_to_read, [](Writer& ww, const ReadValueId& v) { v.encode(ww); });
}

ReadRequest ReadRequest::decode(Reader& r) {
    ReadRequest m;
    m.header = RequestHeader::decode(r);
    m.max_age = r.f64();
    m.timestamps_to_return = r.u32();
    m.nodes_to_read = r.array([](Reader& rr) { return ReadValueId::decode(rr); });
    return m;
}

void ReadResponse::encode(Writer& w) const {
    header.encode(w);
    w.array(results, [](Writer& ww, const DataValue& v) { ww.data_value(v); });
    w.i32(0);
}

ReadResponse ReadResponse::decode(Reader& r) {
    ReadResponse m;
    m.header = ResponseHeader::decode(r);
    m.results = r.array([](Reader& rr) { return rr.data_value(); });
    skip_diagnostic_array(r);
    return m;
}

void WriteValue::encode(Writer& w) const {
    w.node_id(node_id);
    w.u32(static_cast<std::uint32_t>(attribute_id));
    w.null_string();
    w.data_value(value);
}

WriteValue WriteValue::decode(Reader& r) {
    WriteValue v;
    v.node_id = r.node_id();
    v.attribute_id = static_cast<AttributeId>(r.u32());
    r.string();
    v.value = r.data_value();
    return v;
}

void WriteRequest::encode(Writer& w) const {
    header.encode(w);
    w.array(nodes_to_write, [](Writer& ww, const WriteValue& v) { v.encode(ww); });
}

WriteRequest WriteRequest::decode(Reader& r) {
    WriteRequest m;
    m.header = RequestHeader::decode(r);
    m.nodes_to_write = r.array([](Reader& rr) { return WriteValue::decode(rr); });
    return m;
}

void WriteResponse::encode(Writer& w) const {
    header.encode(w);
    write_status_array(w, results);
    w.i32(0);
}

WriteResponse WriteResponse::decode(Reader& r) {
    WriteResponse m;
    m.header = ResponseHeader::decode(r);
    m.results = read_status_array(r);
    skip_diagnostic_array(r);
    return m;
}

}  // namespace otprobe::opcua
