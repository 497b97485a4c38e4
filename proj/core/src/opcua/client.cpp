#include "otprobe/opcua/client.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <random>
#include <set>

namespace otprobe::opcua {

namespace {

constexpr std::size_t browse_batch = 100;
constexpr std::size_t read_batch = 50;
constexpr int enumerate_depth = 64;
constexpr std::size_t enumerate_max_nodes = 100000;

Bytes client_nonce() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    Bytes out(32);
    for (auto& b : out) b = static_cast<std::uint8_t>(rng());
    return out;
}

bool is_session_status(std::uint32_t s) {
    return s == status::BadSessionIdInvalid || s == status::BadSessionClosed || s == status::BadSessionNotActivated;
}

bool is_auth_status(std::uint32_t s) {
    return s == status::BadIdentityTokenRejected || s == status::BadIdentityTokenInvalid || s == status::BadUserAccessDenied;
}

[[noreturn]] void rethrow_net(const net::NetError& e, bool in_session) {
    switch (e.kind()) {
        case net::NetErrorKind::Refused: throw OpcUaError(ErrorKind::ConnectionRefused, e.what());
        case net::NetErrorKind::Timeout: throw OpcUaError(ErrorKind::Timeout, e.what());
        case net::NetErrorKind::Closed:
            if (in_session) throw OpcUaError(ErrorKind::SessionClosed, std::string("server closed the connection: ") + e.what());
            throw OpcUaError(ErrorKind::HandshakeRejected, std::string("server closed the connection: ") + e.what());
        default: throw OpcUaError(ErrorKind::Network, e.what());
    }
}

std::string policy_name(const std::string& uri) {
    const auto hash = uri.rfind('#');
    return hash == std::string::npos ? uri : uri.substr(hash + 1);
}

/// One UACP connection with a SecurityPolicy None secure channel.
class SecureChannel {
public:
    SecureChannel(const std::string& url, std::chrono::milliseconds timeout) : url_(url), timeout_(timeout) {
        const auto parsed = EndpointUrl::parse(url);
        try {
            sock_ = net::connect_tcp(parsed.host, parsed.port, timeout_);
            hello();
            open();
        } catch (const net::NetError& e) {
            rethrow_net(e, false);
        } catch (const DecodeError& e) {
            throw OpcUaError(ErrorKind::HandshakeRejected, std::string("malformed handshake reply: ") + e.what());
        }
    }

    ~SecureChannel() { close(); }

    bool is_open() const noexcept { return sock_.valid(); }

    /// Sends one service request and decodes the matching response.
    template <typename Resp, typename Req>
    Resp call(Req req, const NodeId& auth_token) {
        if (!sock_.valid()) throw OpcUaError(ErrorKind::SessionClosed, "session is closed");
        req.header.authentication_token = auth_token;
        req.header.timestamp = DateTime::now();
        req.header.request_handle = ++handle_;
        req.header.timeout_hint = static_cast<std::uint32_t>(timeout_.count());
        const std::uint32_t request_id = ++request_id_;
        Writer w;
        SymmetricHeader{channel_id_, token_id_, ++sequence_, request_id}.encode(w);
        encode_service(w, req);
        try {
            sock_.send_all(frame_message("MSG", w.bytes()), timeout_);
            while (true) {
                auto [type, body] = receive();
                if (type != "MSG") throw OpcUaError(ErrorKind::ServiceFault, "unexpected " + type + " message");
                Reader r(body);
                const auto sym = SymmetricHeader::decode(r);
                if (sym.request_id != request_id) continue;
                const NodeId enc = r.node_id();
                if (enc == NodeId(0, encoding::ServiceFault)) {
                    const auto fault = ServiceFault::decode(r);
                    const auto code = fault.header.service_result;
                    throw OpcUaError(is_session_status(code) ? ErrorKind::SessionClosed : ErrorKind::ServiceFault,
                                     "service fault " + status::name(code), code);
                }
                if (enc != NodeId(0, Resp::encoding_id))
                    throw OpcUaError(ErrorKind::ServiceFault, "unexpected response type " + enc.to_string());
                Resp resp = Resp::decode(r);
                if (status::is_bad(resp.header.service_result)) {
                    const auto code = resp.header.service_result;
                    throw OpcUaError(is_session_status(code) ? ErrorKind::SessionClosed : ErrorKind::ServiceFault,
                                     "service result " + status::name(code), code);
                }
                return resp;
            }
        } catch (const net::NetError& e) {
            if (e.kind() != net::NetErrorKind::Timeout) sock_.close();
            rethrow_net(e, true);
        } catch (const DecodeError& e) {
            throw OpcUaError(ErrorKind::ServiceFault, std::string("malformed response: ") + e.what());
        }
    }

    void close() noexcept {
        if (!sock_.valid()) return;
        try {
            Writer w;
            SymmetricHeader{channel_id_, token_id_, ++sequence_, ++request_id_}.encode(w);
            CloseSecureChannelRequest req;
            req.header.timestamp = DateTime::now();
            encode_service(w, req);
            sock_.send_all(frame_message("CLO", w.bytes()), timeout_);
        } catch (...) {
        }
        sock_.shutdown();
        sock_.close();
    }

private:
    std::pair<std::string, Bytes> receive() {
        std::array<std::uint8_t, message_header_size> head{};
        sock_.recv_exact(head, timeout_);
        const auto h = decode_message_header(head);
        Bytes body(h.size - message_header_size);
        sock_.recv_exact(body, timeout_);
        std::string type(h.type_view());
        if (type == "ERR") {
            Reader r(body);
            const auto err = ErrorMessage::decode(r);
            throw OpcUaError(ErrorKind::HandshakeRejected,
                             "server error " + status::name(err.error) + (err.reason.empty() ? "" : ": " + err.reason), err.error);
        }
        if (h.chunk == 'C') throw OpcUaError(ErrorKind::Unsupported, "multi-chunk responses are not supported");
        if (h.chunk == 'A') throw OpcUaError(ErrorKind::ServiceFault, "server aborted the message");
        return {type, std::move(body)};
    }

    void hello() {
        Writer w;
        Hello h;
        h.receive_buffer_size = max_message_size;
        h.send_buffer_size = max_message_size;
        h.max_message_size = max_message_size;
        h.endpoint_url = url_;
        h.encode(w);
        sock_.send_all(frame_message("HEL", w.bytes()), timeout_);
        auto [type, body] = receive();
        if (type != "ACK") throw OpcUaError(ErrorKind::HandshakeRejected, "expected Acknowledge, got " + type);
        Reader r(body);
        Acknowledge::decode(r);
    }

    void open() {
        Writer w;
        const std::uint32_t request_id = ++request_id_;
        AsymmetricHeader{0, std::string(policy_none_uri), ++sequence_, request_id}.encode(w);
        OpenSecureChannelRequest req;
        req.header.timestamp = DateTime::now();
        req.header.request_handle = ++handle_;
        encode_service(w, req);
        sock_.send_all(frame_message("OPN", w.bytes()), timeout_);
        auto [type, body] = receive();
        if (type != "OPN") throw OpcUaError(ErrorKind::HandshakeRejected, "expected OpenSecureChannel reply, got " + type);
        Reader r(body);
        AsymmetricHeader::decode(r);
        const NodeId enc = r.node_id();
        if (enc != NodeId(0, encoding::OpenSecureChannelResponse))
            throw OpcUaError(ErrorKind::HandshakeRejected, "secure channel refused (" + enc.to_string() + ")");
        const auto resp = OpenSecureChannelResponse::decode(r);
        if (status::is_bad(resp.header.service_result))
            throw OpcUaError(ErrorKind::HandshakeRejected, "secure channel refused: " + status::name(resp.header.service_result),
                             resp.header.service_result);
        channel_id_ = resp.channel_id;
        token_id_ = resp.token_id;
    }

    std::string url_;
    std::chrono::milliseconds timeout_;
    net::Socket sock_;
    std::uint32_t channel_id_{0};
    std::uint32_t token_id_{0};
    std::uint32_t sequence_{0};
    std::uint32_t request_id_{0};
    std::uint32_t handle_{0};
};

}  // namespace

struct Session::Channel {
    Channel(const std::string& url, std::chrono::milliseconds timeout) : channel(url, timeout) {}
    SecureChannel channel;
};

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidUrl: return "InvalidUrl";
        case ErrorKind::ConnectionRefused: return "ConnectionRefused";
        case ErrorKind::Timeout: return "Timeout";
        case ErrorKind::HandshakeRejected: return "HandshakeRejected";
        case ErrorKind::AuthRejected: return "AuthRejected";
        case ErrorKind::SessionClosed: return "SessionClosed";
        case ErrorKind::ServiceFault: return "ServiceFault";
        case ErrorKind::NodeUnknown: return "NodeUnknown";
        case ErrorKind::AccessDenied: return "AccessDenied";
        case ErrorKind::TypeMismatch: return "TypeMismatch";
        case ErrorKind::Unsupported: return "Unsupported";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::Network: return "Network";
    }
    return "Unknown";
}

const char* to_string(MessageSecurityMode m) noexcept {
    switch (m) {
        case MessageSecurityMode::None: return "None";
        case MessageSecurityMode::Sign: return "Sign";
        case MessageSecurityMode::SignAndEncrypt: return "SignAndEncrypt";
        case MessageSecurityMode::Invalid: break;
    }
    return "Invalid";
}

const char* to_string(UserTokenType t) noexcept {
    switch (t) {
        case UserTokenType::Anonymous: return "Anonymous";
        case UserTokenType::UserName: return "UsernamePassword";
        case UserTokenType::Certificate: return "Certificate";
        case UserTokenType::IssuedToken: return "IssuedToken";
    }
    return "Unknown";
}

EndpointUrl EndpointUrl::parse(const std::string& url) {
    constexpr std::string_view scheme = "opc.tcp://";
    if (url.rfind(scheme, 0) != 0) throw OpcUaError(ErrorKind::InvalidUrl, "endpoint url must start with opc.tcp://: '" + url + "'");
    std::string_view rest(url);
    rest.remove_prefix(scheme.size());
    EndpointUrl out;
    const auto slash = rest.find('/');
    std::string_view authority = rest.substr(0, slash);
    out.path = slash == std::string_view::npos ? std::string() : std::string(rest.substr(slash));
    std::string_view port_text;
    if (!authority.empty() && authority.front() == '[') {
        const auto close = authority.find(']');
        if (close == std::string_view::npos) throw OpcUaError(ErrorKind::InvalidUrl, "unterminated IPv6 literal in '" + url + "'");
        out.host = std::string(authority.substr(1, close - 1));
        authority.remove_prefix(close + 1);
        if (!authority.empty()) {
            if (authority.front() != ':') throw OpcUaError(ErrorKind::InvalidUrl, "malformed authority in '" + url + "'");
            port_text = authority.substr(1);
        }
    } else {
        const auto colon = authority.rfind(':');
        out.host = std::string(authority.substr(0, colon));
        if (colon != std::string_view::npos) port_text = authority.substr(colon + 1);
    }
    if (out.host.empty()) throw OpcUaError(ErrorKind::InvalidUrl, "endpoint url has no host: '" + url + "'");
    if (out.host.find_first_of(" \t") != std::string::npos) throw OpcUaError(ErrorKind::InvalidUrl, "host contains whitespace");
    if (!port_text.empty() || (authority.find(':') != std::string_view::npos && port_text.empty() && authority.back() == ':')) {
        unsigned port = 0;
        auto [p, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
        if (ec != std::errc{} || p != port_text.data() + port_text.size() || port == 0 || port > 65535)
            throw OpcUaError(ErrorKind::InvalidUrl, "invalid port in '" + url + "'");
        out.port = static_cast<std::uint16_t>(port);
    }
    return out;
}

std::string EndpointUrl::to_string() const {
    const bool v6 = host.find(':') != std::string::npos;
    return "opc.tcp://" + (v6 ? "[" + host + "]" : host) + ":" + std::to_string(port) + path;
}

std::vector<EndpointInfo> get_endpoints(const std::string& endpoint_url, std::chrono::milliseconds timeout) {
    SecureChannel channel(endpoint_url, timeout);
    GetEndpointsRequest req;
    req.endpoint_url = endpoint_url;
    const auto resp = channel.call<GetEndpointsResponse>(req, NodeId{});
    std::vector<EndpointInfo> out;
    for (const auto& e : resp.endpoints) {
        EndpointInfo info;
        info.url = e.endpoint_url;
        info.security_policy = policy_name(e.security_policy_uri);
        info.security_mode = e.security_mode;
        std::set<UserTokenType> types;
        for (const auto& t : e.user_identity_tokens) types.insert(t.token_type);
        info.token_types.assign(types.begin(), types.end());
        out.push_back(std::move(info));
    }
    return out;
}

Session::Session(Session&&) noexcept = default;
Session& Session::operator=(Session&& other) noexcept {
    if (this != &other) {
        close();
        channel_ = std::move(other.channel_);
        mutex_ = std::move(other.mutex_);
        auth_token_ = std::move(other.auth_token_);
        identity_ = std::move(other.identity_);
        url_ = std::move(other.url_);
    }
    return *this;
}

Session::~Session() { close(); }

Session Session::establish(const std::string& endpoint_url, const ClientOptions& options) {
    if (options.security_policy != SecurityPolicy::None)
        throw OpcUaError(ErrorKind::Unsupported, "only SecurityPolicy None is implemented");
    EndpointUrl::parse(endpoint_url);
    if (options.timeout.count() <= 0) throw OpcUaError(ErrorKind::InvalidArgument, "timeout must be positive");

    Session s;
    s.url_ = endpoint_url;
    s.mutex_ = std::make_unique<std::mutex>();
    s.channel_ = std::make_unique<Channel>(endpoint_url, options.timeout);
    auto& ch = s.channel_->channel;

    CreateSessionRequest create;
    create.client_description.application_uri = "urn:otprobe:client";
    create.client_description.product_uri = "urn:otprobe";
    create.client_description.application_name = {"en", "otprobe"};
    create.client_description.application_type = 1;
    create.endpoint_url = endpoint_url;
    create.session_name = options.session_name;
    create.client_nonce = client_nonce();
    CreateSessionResponse created;
    try {
        created = ch.call<CreateSessionResponse>(create, NodeId{});
    } catch (const OpcUaError& e) {
        throw OpcUaError(ErrorKind::HandshakeRejected, std::string("CreateSession failed: ") + e.what(), e.status());
    }
    s.auth_token_ = created.authentication_token;

    const UserTokenType wanted = options.credentials ? UserTokenType::UserName : UserTokenType::Anonymous;
    std::string policy_id = options.credentials ? "username" : "anonymous";
    for (const auto& e : created.server_endpoints) {
        if (e.security_policy_uri != policy_none_uri) continue;
        for (const auto& t : e.user_identity_tokens) {
            if (t.token_type == wanted) policy_id = t.policy_id;
        }
    }

    ActivateSessionRequest activate;
    if (options.credentials) {
        const auto& c = *options.credentials;
        activate.user_identity_token =
            wrap(UserNameIdentityToken{policy_id, c.username, Bytes(c.password.begin(), c.password.end()), ""});
        s.identity_ = c.username;
    } else {
        activate.user_identity_token = wrap(AnonymousIdentityToken{policy_id});
        s.identity_ = "anonymous";
    }
    try {
        ch.call<ActivateSessionResponse>(activate, s.auth_token_);
    } catch (const OpcUaError& e) {
        if (is_auth_status(e.status()))
            throw OpcUaError(ErrorKind::AuthRejected, "identity rejected: " + status::name(e.status()), e.status());
        throw OpcUaError(ErrorKind::HandshakeRejected, std::string("ActivateSession failed: ") + e.what(), e.status());
    }
    return s;
}

bool Session::is_open() const { return channel_ && channel_->channel.is_open(); }

void Session::close() {
    if (!channel_) return;
    std::lock_guard lock(*mutex_);
    if (channel_->channel.is_open()) {
        try {
            channel_->channel.call<CloseSessionResponse>(CloseSessionRequest{}, auth_token_);
        } catch (const OpcUaError&) {
        }
    }
    channel_.reset();
}

std::vector<BrowseResult> Session::browse(const std::vector<BrowseDescription>& nodes) {
    if (!channel_) throw OpcUaError(ErrorKind::SessionClosed, "session is closed");
    std::lock_guard lock(*mutex_);
    BrowseRequest req;
    req.nodes_to_browse = nodes;
    auto resp = channel_->channel.call<BrowseResponse>(req, auth_token_);
    if (resp.results.size() != nodes.size()) throw OpcUaError(ErrorKind::ServiceFault, "browse result count mismatch");
    return std::move(resp.results);
}

std::vector<DataValue> Session::read(const std::vector<ReadValueId>& nodes) {
    if (!channel_) throw OpcUaError(ErrorKind::SessionClosed, "session is closed");
    std::lock_guard lock(*mutex_);
    ReadRequest req;
    req.nodes_to_read = nodes;
    auto resp = channel_->channel.call<ReadResponse>(req, auth_token_);
    if (resp.results.size() != nodes.size()) throw OpcUaError(ErrorKind::ServiceFault, "read result count mismatch");
    return std::move(resp.results);
}

std::vector<std::uint32_t> Session::write(const std::vector<WriteValue>& nodes) {
    if (!channel_) throw OpcUaError(ErrorKind::SessionClosed, "session is closed");
    std::lock_guard lock(*mutex_);
    WriteRequest req;
    req.nodes_to_write = nodes;
    auto resp = channel_->channel.call<WriteResponse>(req, auth_token_);
    if (resp.results.size() != nodes.size()) throw OpcUaError(ErrorKind::ServiceFault, "write result count mismatch");
    return std::move(resp.results);
}

Session establish_session(const std::string& endpoint_url, const ClientOptions& options) {
    return Session::establish(endpoint_url, options);
}

ErrorKind error_kind_for_status(std::uint32_t code) noexcept {
    switch (code) {
        case status::BadNodeIdUnknown: return ErrorKind::NodeUnknown;
        case status::BadNotWritable:
        case status::BadNotReadable:
        case status::BadUserAccessDenied: return ErrorKind::AccessDenied;
        case status::BadTypeMismatch: return ErrorKind::TypeMismatch;
        case status::BadSessionIdInvalid:
        case status::BadSessionClosed:
        case status::BadSessionNotActivated: return ErrorKind::SessionClosed;
        default: return ErrorKind::ServiceFault;
    }
}

BrowseTree browse_nodes(Session& session, const NodeId& root, int depth, std::size_t max_nodes) {
    if (depth < 1) throw OpcUaError(ErrorKind::InvalidArgument, "browse depth must be positive");
    if (max_nodes < 1) throw OpcUaError(ErrorKind::InvalidArgument, "browse max_nodes must be positive");

    struct Entry {
        NodeDescriptor desc;
        std::size_t parent;
        std::vector<std::size_t> children;
    };
    std::vector<Entry> entries;

    const auto attrs = session.read({{root, AttributeId::BrowseName}, {root, AttributeId::DisplayName}, {root, AttributeId::NodeClass}});
    if (attrs[0].status_or_good() == status::BadNodeIdUnknown)
        throw OpcUaError(ErrorKind::NodeUnknown, "browse root " + root.to_string() + " does not exist", status::BadNodeIdUnknown);
    NodeDescriptor root_desc;
    root_desc.node_id = root;
    root_desc.namespace_index = root.ns;
    if (attrs[0].value) {
        if (auto* q = std::get_if<QualifiedName>(&*attrs[0].value)) {
            root_desc.browse_name = q->name;
            root_desc.namespace_index = q->ns;
        }
    }
    if (attrs[1].value) {
        if (auto* t = std::get_if<LocalizedText>(&*attrs[1].value)) root_desc.display_name = t->text;
    }
    if (attrs[2].value) {
        if (auto* c = std::get_if<std::int32_t>(&*attrs[2].value)) root_desc.node_class = static_cast<NodeClass>(*c);
    }
    entries.push_back(Entry{root_desc, 0, {}});

    BrowseTree tree;
    std::set<NodeId> visited{root};
    std::vector<std::size_t> frontier{0};
    for (int level = 0; level < depth && !frontier.empty() && !tree.truncated; ++level) {
        std::vector<std::size_t> next;
        for (std::size_t start = 0; start < frontier.size() && !tree.truncated; start += browse_batch) {
            const std::size_t end = std::min(frontier.size(), start + browse_batch);
            std::vector<BrowseDescription> batch;
            for (std::size_t i = start; i < end; ++i) {
                BrowseDescription d;
                d.node_id = entries[frontier[i]].desc.node_id;
                batch.push_back(d);
            }
            const auto results = session.browse(batch);
            for (std::size_t i = 0; i < results.size() && !tree.truncated; ++i) {
                if (status::is_bad(results[i].status_code)) continue;
                const std::size_t parent = frontier[start + i];
                for (const auto& ref : results[i].references) {
                    if (!ref.is_forward || visited.count(ref.node_id)) continue;
                    if (tree.node_count == max_nodes) {
                        tree.truncated = true;
                        break;
                    }
                    visited.insert(ref.node_id);
                    NodeDescriptor d;
                    d.node_id = ref.node_id;
                    d.browse_name = ref.browse_name.name;
                    d.namespace_index = ref.browse_name.ns;
                    d.display_name = ref.display_name.text;
                    d.node_class = ref.node_class;
                    entries.push_back(Entry{std::move(d), parent, {}});
                    entries[parent].children.push_back(entries.size() - 1);
                    next.push_back(entries.size() - 1);
                    ++tree.node_count;
                }
            }
        }
        frontier = std::move(next);
    }

    auto build = [&](auto&& self, std::size_t i) -> NodeDescriptor {
        NodeDescriptor d = entries[i].desc;
        for (std::size_t c : entries[i].children) d.children.push_back(self(self, c));
        return d;
    };
    tree.root = build(build, 0);
    return tree;
}

std::vector<VariableProfile> enumerate_variables(Session& session, std::uint16_t ns) {
    const auto tree = browse_nodes(session, NodeId(0, ids::Objects), enumerate_depth, enumerate_max_nodes);
    std::vector<VariableProfile> vars;
    auto collect = [&](auto&& self, const NodeDescriptor& d) -> void {
        if (d.node_class == NodeClass::Variable && d.node_id.ns == ns) {
            VariableProfile p;
            p.node_id = d.node_id;
            p.browse_name = d.browse_name;
            p.display_name = d.display_name;
            vars.push_back(std::move(p));
        }
        for (const auto& c : d.children) self(self, c);
    };
    collect(collect, tree.root);

    static constexpr AttributeId attrs[] = {AttributeId::DisplayName, AttributeId::DataType, AttributeId::AccessLevel,
                                            AttributeId::UserAccessLevel, AttributeId::Value};
    constexpr std::size_t per = std::size(attrs);
    for (std::size_t start = 0; start < vars.size(); start += read_batch) {
        const std::size_t end = std::min(vars.size(), start + read_batch);
        std::vector<ReadValueId> ids;
        for (std::size_t i = start; i < end; ++i) {
            for (auto a : attrs) ids.push_back({vars[i].node_id, a});
        }
        const auto values = session.read(ids);
        for (std::size_t i = start; i < end; ++i) {
            auto& p = vars[i];
            const DataValue* v = &values[(i - start) * per];
            if (v[0].value) {
                if (auto* t = std::get_if<LocalizedText>(&*v[0].value)) p.display_name = t->text;
            }
            if (v[1].value) {
                if (auto* id = std::get_if<NodeId>(&*v[1].value)) {
                    p.data_type_id = *id;
                    p.data_type = value_type_from_data_type(*id);
                }
            }
            std::uint8_t access = 0;
            if (v[2].value) {
                if (auto* b = std::get_if<std::uint8_t>(&*v[2].value)) access = *b;
            }
            std::uint8_t user_access = access;
            if (v[3].value) {
                if (auto* b = std::get_if<std::uint8_t>(&*v[3].value)) user_access = *b;
            }
            p.readable = (access & user_access & access_read) != 0;
            p.writable = (access & user_access & access_write) != 0;
            p.value_status = v[4].status_or_good();
            if (!status::is_bad(p.value_status) && v[4].value) p.current_value = from_wire(*v[4].value);
        }
    }
    return vars;
}

Value read_node(Session& session, const NodeId& node) {
    const auto result = session.read({{node, AttributeId::Value}}).front();
    const auto code = result.status_or_good();
    if (status::is_bad(code))
        throw OpcUaError(error_kind_for_status(code), "read " + node.to_string() + ": " + status::name(code), code);
    if (!result.value) throw OpcUaError(ErrorKind::Unsupported, "read " + node.to_string() + ": no value returned");
    auto v = from_wire(*result.value);
    if (!v) throw OpcUaError(ErrorKind::Unsupported, "read " + node.to_string() + ": value type is not supported");
    return *v;
}

void write_node(Session& session, const NodeId& node, const Value& value) {
    WriteValue wv;
    wv.node_id = node;
    wv.value.value = to_wire(value);
    const auto code = session.write({wv}).front();
    if (status::is_bad(code))
        throw OpcUaError(error_kind_for_status(code), "write " + node.to_string() + ": " + status::name(code), code);
}

}  // namespace otprobe::opcua
