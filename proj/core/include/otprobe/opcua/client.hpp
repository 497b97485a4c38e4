#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "otprobe/net/socket.hpp"
#include "otprobe/opcua/messages.hpp"
#include "otprobe/opcua/types.hpp"

namespace otprobe::opcua {

enum class ErrorKind {
    InvalidUrl,
    ConnectionRefused,
    Timeout,
    HandshakeRejected,
    AuthRejected,
    SessionClosed,
    ServiceFault,
    NodeUnknown,
    AccessDenied,
    TypeMismatch,
    Unsupported,
    InvalidArgument,
    Network,
};

const char* to_string(ErrorKind kind) noexcept;

class OpcUaError : public std::runtime_error {
public:
    OpcUaError(ErrorKind kind, const std::string& what, std::uint32_t status = 0)
        : std::runtime_error(what), kind_(kind), status_(status) {}
    ErrorKind kind() const noexcept { return kind_; }
    /// Wire status code when the server supplied one, else 0.
    std::uint32_t status() const noexcept { return status_; }

private:
    ErrorKind kind_;
    std::uint32_t status_;
};

/// opc.tcp://host[:port][/path]
struct EndpointUrl {
    std::string host;
    std::uint16_t port{4840};
    std::string path;

    /// Throws OpcUaError(InvalidUrl).
    static EndpointUrl parse(const std::string& url);
    std::string to_string() const;
};

struct Credentials {
    std::string username;
    std::string password;
};

enum class SecurityPolicy {
    None,
    Basic256Sha256,
};

struct ClientOptions {
    std::chrono::milliseconds timeout{3000};
    /// Anonymous when empty.
    std::optional<Credentials> credentials;
    /// Anything other than None fails with Unsupported before any I/O.
    SecurityPolicy security_policy{SecurityPolicy::None};
    std::string session_name{"otprobe"};
};

struct EndpointInfo {
    std::string url;
    /// Fragment of the policy URI: "None", "Basic256Sha256", ...
    std::string security_policy;
    MessageSecurityMode security_mode{MessageSecurityMode::None};
    /// Sorted, without duplicates.
    std::vector<UserTokenType> token_types;
};

const char* to_string(MessageSecurityMode m) noexcept;
const char* to_string(UserTokenType t) noexcept;

/// Lists every endpoint the server advertises (no session needed).
std::vector<EndpointInfo> get_endpoints(const std::string& endpoint_url,
                                        std::chrono::milliseconds timeout = std::chrono::milliseconds(3000));

/// An activated session over one secure channel. Calls are serialised; the
/// handle may be moved between threads.
class Session {
public:
    Session(Session&&) noexcept;
    Session& operator=(Session&&) noexcept;
    ~Session();

    /// Hello/Acknowledge, OpenSecureChannel (None), CreateSession, ActivateSession.
    static Session establish(const std::string& endpoint_url, const ClientOptions& options = {});

    bool is_open() const;
    /// "anonymous" or the user name.
    const std::string& identity() const noexcept { return identity_; }
    const std::string& endpoint_url() const noexcept { return url_; }
    /// CloseSession + CloseSecureChannel; idempotent.
    void close();

    // Raw service calls. Throw SessionClosed once closed, ServiceFault for faults.
    std::vector<BrowseResult> browse(const std::vector<BrowseDescription>& nodes);
    std::vector<DataValue> read(const std::vector<ReadValueId>& nodes);
    std::vector<std::uint32_t> write(const std::vector<WriteValue>& nodes);

private:
    struct Channel;
    Session() = default;

    std::unique_ptr<Channel> channel_;
    std::unique_ptr<std::mutex> mutex_;
    NodeId auth_token_;
    std::string identity_;
    std::string url_;
};

Session establish_session(const std::string& endpoint_url, const ClientOptions& options = {});

struct NodeDescriptor {
    NodeId node_id;
    std::string browse_name;
    std::uint16_t namespace_index{0};
    std::string display_name;
    NodeClass node_class{NodeClass::Unspecified};
    std::vector<NodeDescriptor> children;
};

struct BrowseTree {
    NodeDescriptor root;
    /// Descriptors discovered below the root.
    std::size_t node_count{0};
    /// True when max_nodes stopped the traversal before it was exhausted.
    bool truncated{false};
};

inline constexpr int default_browse_depth = 5;
inline constexpr std::size_t default_browse_max_nodes = 500;

/// Breadth-first browse over forward hierarchical references.
BrowseTree browse_nodes(Session& session, const NodeId& root = NodeId(0, ids::Objects), int depth = default_browse_depth,
                        std::size_t max_nodes = default_browse_max_nodes);

struct VariableProfile {
    NodeId node_id;
    std::string browse_name;
    std::string display_name;
    /// Nullopt when the variable uses a type outside the supported five.
    std::optional<ValueType> data_type;
    NodeId data_type_id;
    bool readable{false};
    bool writable{false};
    std::optional<Value> current_value;
    std::uint32_t value_status{status::Good};
};

/// Every Variable reachable from Objects whose namespace index is `ns`.
std::vector<VariableProfile> enumerate_variables(Session& session, std::uint16_t ns);

Value read_node(Session& session, const NodeId& node);
/// Throws on any non-Good status (AccessDenied, TypeMismatch, NodeUnknown, ...).
void write_node(Session& session, const NodeId& node, const Value& value);

/// Maps a Bad status from Read/Write to the matching error kind.
ErrorKind error_kind_for_status(std::uint32_t status) noexcept;

}  // namespace otprobe::opcua
