#include "otprobe/opcua/server.hpp"

#include <array>
#include <fstream>
#include <random>

namespace otprobe::opcua {

namespace {

constexpr net::Millis idle_poll{200};
constexpr net::Millis frame_timeout{5000};
constexpr std::uint32_t server_buffer_size = 1u << 20;
constexpr double max_session_timeout_ms = 3'600'000.0;

Bytes random_nonce(std::size_t n) {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    Bytes out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(rng());
    return out;
}

ResponseHeader respond_to(const RequestHeader& req, std::uint32_t result = status::Good) {
    return ResponseHeader{DateTime::now(), req.request_handle, result};
}

}  // namespace

ServerConfig server_config_from_json(const nlohmann::json& doc) {
    ServerConfig cfg;
    if (!doc.is_object()) throw std::invalid_argument("opcua server config: root must be an object");
    nlohmann::json model_doc = doc;
    if (!doc.contains("preset") && !doc.contains("nodes")) model_doc["preset"] = "production-line";
    cfg.model = model_from_json(model_doc);
    try {
        if (doc.contains("auth")) {
            const auto& a = doc.at("auth");
            cfg.options.auth.anonymous = a.value("anonymous", true);
            if (a.contains("users")) {
                for (const auto& u : a.at("users"))
                    cfg.options.auth.users[u.at("username").get<std::string>()] = u.at("password").get<std::string>();
            }
        }
        cfg.options.endpoint_path = doc.value("endpoint_path", std::string(default_endpoint_path));
        cfg.options.advertise_basic256sha256 = doc.value("advertise_basic256sha256", false);
        if (doc.contains("port")) cfg.options.port = doc.at("port").get<std::uint16_t>();
        if (doc.contains("host")) cfg.options.host = doc.at("host").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("opcua server config: ") + e.what());
    }
    if (!cfg.options.auth.anonymous && cfg.options.auth.users.empty())
        throw std::invalid_argument("opcua server config: auth disables anonymous access but defines no users");
    return cfg;
}

ServerConfig load_server_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open opcua server config " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("opcua server config " + path.string() + " is not valid JSON: " + e.what());
    }
    return server_config_from_json(doc);
}

/// Per-connection protocol state: one secure channel, at most one session.
class Server::Connection {
public:
    Connection(Server& server, net::Socket& sock) : server_(server), sock_(sock) {}

    void run(const std::atomic<bool>& stopping) {
        bool hello_done = false;
        while (!stopping.load()) {
            std::array<std::uint8_t, message_header_size> head{};
            std::size_t have = 0;
            try {
                have = sock_.recv_some(std::span(head.data(), 1), idle_poll);
            } catch (const net::NetError& e) {
                if (e.kind() == net::NetErrorKind::Timeout) continue;
                return;
            }
            sock_.recv_exact(std::span(head.data() + have, head.size() - have), frame_timeout);

            MessageHeader h;
            try {
                h = decode_message_header(head);
            } catch (const DecodeError& e) {
                send_error(status::BadTcpMessageTooLarge, e.what());
                return;
            }
            Bytes body(h.size - message_header_size);
            sock_.recv_exact(body, frame_timeout);

            const auto type = h.type_view();
            if (!hello_done) {
                if (type != "HEL") {
                    send_error(status::BadTcpMessageTypeInvalid, "expected Hello");
                    return;
                }
                if (!on_hello(body)) return;
                hello_done = true;
                continue;
            }
            if (h.chunk != 'F') {
                send_error(status::BadTcpMessageTooLarge, "multi-chunk messages are not supported");
                return;
            }
            try {
                if (type == "OPN") {
                    if (!on_open(body)) return;
                } else if (type == "MSG") {
                    on_message(body);
                } else if (type == "CLO") {
                    return;
                } else {
                    send_error(status::BadTcpMessageTypeInvalid, "unexpected message type");
                    return;
                }
            } catch (const DecodeError& e) {
                send_error(status::BadDecodingError, e.what());
                return;
            }
        }
    }

private:
    enum class SessionState { None, Created, Activated, Closed };

    void send_error(std::uint32_t code, const std::string& reason) {
        Writer w;
        ErrorMessage{code, reason}.encode(w);
        try {
            sock_.send_all(frame_message("ERR", w.bytes()), frame_timeout);
        } catch (const net::NetError&) {
        }
    }

    bool on_hello(const Bytes& body) {
        Reader r(body);
        const Hello hello = Hello::decode(r);
        if (hello.endpoint_url.rfind("opc.tcp://", 0) != 0 || hello.endpoint_url.size() > 4096) {
            send_error(status::BadTcpEndpointUrlInvalid, "endpoint url must use opc.tcp://");
            return false;
        }
        Acknowledge ack;
        ack.receive_buffer_size = std::min(hello.send_buffer_size, server_buffer_size);
        ack.send_buffer_size = std::min(hello.receive_buffer_size, server_buffer_size);
        ack.max_message_size = max_message_size;
        ack.max_chunk_count = 1;
        Writer w;
        ack.encode(w);
        sock_.send_all(frame_message("ACK", w.bytes()), frame_timeout);
        return true;
    }

    bool on_open(const Bytes& body) {
        Reader r(body);
        const auto asym = AsymmetricHeader::decode(r);
        if (asym.policy_uri != policy_none_uri) {
            send_error(status::BadSecurityPolicyRejected, "only SecurityPolicy None is supported");
            return false;
        }
        const NodeId type = r.node_id();
        if (type != NodeId(0, encoding::OpenSecureChannelRequest)) {
            send_error(status::BadTcpMessageTypeInvalid, "OPN must carry OpenSecureChannelRequest");
            return false;
        }
        const auto req = OpenSecureChannelRequest::decode(r);
        if (req.security_mode != MessageSecurityMode::None) {
            send_error(status::BadSecurityPolicyRejected, "only MessageSecurityMode None is supported");
            return false;
        }
        if (channel_id_ == 0) channel_id_ = server_.next_channel_.fetch_add(1);
        ++token_id_;

        OpenSecureChannelResponse resp;
        resp.header = respond_to(req.header);
        resp.channel_id = channel_id_;
        resp.token_id = token_id_;
        resp.created_at = DateTime::now();
        resp.revised_lifetime = req.requested_lifetime;

        Writer w;
        AsymmetricHeader out{channel_id_, std::string(policy_none_uri), ++sequence_, asym.request_id};
        out.encode(w);
        encode_service(w, resp);
        sock_.send_all(frame_message("OPN", w.bytes()), frame_timeout);
        return true;
    }

    template <typename T>
    void reply(std::uint32_t request_id, const T& msg) {
        Writer w;
        SymmetricHeader{channel_id_, token_id_, ++sequence_, request_id}.encode(w);
        encode_service(w, msg);
        sock_.send_all(frame_message("MSG", w.bytes()), frame_timeout);
    }

    void fault(std::uint32_t request_id, const RequestHeader& req, std::uint32_t code) {
        reply(request_id, ServiceFault{respond_to(req, code)});
    }

    /// Status for a session-bound request; Good when the session may proceed.
    std::uint32_t check_session(const RequestHeader& req) const {
        if (state_ == SessionState::None) return status::BadSessionIdInvalid;
        if (state_ == SessionState::Closed) return status::BadSessionClosed;
        if (req.authentication_token != auth_token_) return status::BadSessionIdInvalid;
        if (state_ != SessionState::Activated) return status::BadSessionNotActivated;
        return status::Good;
    }

    void on_message(const Bytes& body) {
        Reader r(body);
        const auto sym = SymmetricHeader::decode(r);
        if (sym.channel_id != channel_id_) {
            send_error(status::BadSecureChannelIdInvalid, "unknown secure channel");
            throw DecodeError("secure channel mismatch");
        }
        const NodeId type = r.node_id();
        const std::uint32_t id = type.ns == 0 && type.is_numeric() ? type.numeric() : 0;
        switch (id) {
            case encoding::GetEndpointsRequest: {
                const auto req = GetEndpointsRequest::decode(r);
                reply(sym.request_id, GetEndpointsResponse{respond_to(req.header), server_.endpoints()});
                return;
            }
            case encoding::CreateSessionRequest: {
                const auto req = CreateSessionRequest::decode(r);
                CreateSessionResponse resp;
                resp.header = respond_to(req.header);
                resp.session_id = NodeId(1, server_.next_session_.fetch_add(1));
                std::uint32_t token = 0;
                for (auto b : random_nonce(4)) token = (token << 8) | b;
                auth_token_ = NodeId(1, token | 0x80000000u);
                resp.authentication_token = auth_token_;
                resp.revised_session_timeout = std::min(std::max(req.requested_session_timeout, 1000.0), max_session_timeout_ms);
                resp.server_nonce = random_nonce(32);
                resp.server_endpoints = server_.endpoints();
                state_ = SessionState::Created;
                identity_.clear();
                reply(sym.request_id, resp);
                return;
            }
            case encoding::ActivateSessionRequest: {
                const auto req = ActivateSessionRequest::decode(r);
                if (state_ == SessionState::None || state_ == SessionState::Closed ||
                    req.header.authentication_token != auth_token_) {
                    fault(sym.request_id, req.header, status::BadSessionIdInvalid);
                    return;
                }
                const std::uint32_t verdict = authenticate(req.user_identity_token);
                if (status::is_bad(verdict)) {
                    fault(sym.request_id, req.header, verdict);
                    return;
                }
                state_ = SessionState::Activated;
                reply(sym.request_id, ActivateSessionResponse{respond_to(req.header), random_nonce(32), {}});
                return;
            }
            case encoding::CloseSessionRequest: {
                const auto req = CloseSessionRequest::decode(r);
                if (state_ == SessionState::None || req.header.authentication_token != auth_token_) {
                    fault(sym.request_id, req.header, status::BadSessionIdInvalid);
                    return;
                }
                state_ = SessionState::Closed;
                reply(sym.request_id, CloseSessionResponse{respond_to(req.header)});
                return;
            }
            case encoding::BrowseRequest: {
                const auto req = BrowseRequest::decode(r);
                if (auto s = check_session(req.header); status::is_bad(s)) return fault(sym.request_id, req.header, s);
                BrowseResponse resp{respond_to(req.header), {}};
                for (const auto& d : req.nodes_to_browse) resp.results.push_back(server_.space_->browse(d));
                reply(sym.request_id, resp);
                return;
            }
            case encoding::ReadRequest: {
                const auto req = ReadRequest::decode(r);
                if (auto s = check_session(req.header); status::is_bad(s)) return fault(sym.request_id, req.header, s);
                ReadResponse resp{respond_to(req.header), {}};
                for (const auto& n : req.nodes_to_read) resp.results.push_back(server_.space_->read(n));
                reply(sym.request_id, resp);
                return;
            }
            case encoding::WriteRequest: {
                const auto req = WriteRequest::decode(r);
                if (auto s = check_session(req.header); status::is_bad(s)) return fault(sym.request_id, req.header, s);
                WriteResponse resp{respond_to(req.header), {}};
                for (const auto& v : req.nodes_to_write) resp.results.push_back(server_.space_->write(v));
                reply(sym.request_id, resp);
                return;
            }
            default: {
                // Only the request header is common to every service request.
                RequestHeader header;
                try {
                    header = RequestHeader::decode(r);
                } catch (const DecodeError&) {
                }
                fault(sym.request_id, header, status::BadServiceUnsupported);
                return;
            }
        }
    }

    std::uint32_t authenticate(const ExtensionObject& token) {
        const auto& auth = server_.options_.auth;
        const bool anonymous_token = token.type_id.is_null() || token.type_id == NodeId(0, encoding::AnonymousIdentityToken);
        if (anonymous_token) {
            if (!auth.anonymous) return status::BadIdentityTokenRejected;
            identity_ = "anonymous";
            return status::Good;
        }
        if (token.type_id == NodeId(0, encoding::UserNameIdentityToken)) {
            const auto t = unwrap_user_name(token);
            auto it = auth.users.find(t.user_name);
            if (it == auth.users.end() || !t.encryption_algorithm.empty() ||
                std::string(t.password.begin(), t.password.end()) != it->second)
                return status::BadUserAccessDenied;
            identity_ = t.user_name;
            return status::Good;
        }
        return status::BadIdentityTokenInvalid;
    }

    Server& server_;
    net::Socket& sock_;
    std::uint32_t channel_id_{0};
    std::uint32_t token_id_{0};
    std::uint32_t sequence_{0};
    SessionState state_{SessionState::None};
    NodeId auth_token_;
    std::string identity_;
};

Server::Server(const ServerModel& model, ServerOptions options)
    : options_(std::move(options)), space_(std::make_unique<AddressSpace>(model)) {
    if (!options_.auth.anonymous && options_.auth.users.empty())
        throw std::invalid_argument("opcua server needs anonymous access or at least one user");
    tcp_ = std::make_unique<net::TcpServer>(options_.host, options_.port,
                                            [this](net::Socket& s, const std::atomic<bool>& stopping) { serve(s, stopping); });
    if (model.update_period.count() > 0) {
        const auto period = model.update_period;
        updater_ = std::thread([this, period] {
            auto next = std::chrono::steady_clock::now() + period;
            while (updating_.load()) {
                std::this_thread::sleep_for(std::min<std::chrono::milliseconds>(period, std::chrono::milliseconds(50)));
                if (std::chrono::steady_clock::now() >= next) {
                    space_->step();
                    next += period;
                }
            }
        });
    }
}

Server::~Server() { stop(); }

void Server::stop() {
    updating_.store(false);
    if (updater_.joinable()) updater_.join();
    if (tcp_) tcp_->stop();
}

void Server::serve(net::Socket& sock, const std::atomic<bool>& stopping) { Connection(*this, sock).run(stopping); }

std::string Server::endpoint_url() const {
    const bool local = options_.host == "127.0.0.1" || options_.host == "0.0.0.0" || options_.host == "::" ||
                       options_.host == "::1" || options_.host.empty();
    return "opc.tcp://" + (local ? std::string("localhost") : options_.host) + ":" + std::to_string(port()) +
           options_.endpoint_path;
}

std::vector<EndpointDescription> Server::endpoints() const {
    std::vector<UserTokenPolicy> tokens;
    if (options_.auth.anonymous) tokens.push_back(UserTokenPolicy{"anonymous", UserTokenType::Anonymous, "", "", ""});
    if (!options_.auth.users.empty())
        tokens.push_back(UserTokenPolicy{"username", UserTokenType::UserName, "", "", std::string(policy_none_uri)});

    EndpointDescription none;
    none.endpoint_url = endpoint_url();
    none.server.application_uri = options_.application_uri;
    none.server.product_uri = "urn:otprobe";
    none.server.application_name = {"en", options_.application_name};
    none.server.discovery_urls = {none.endpoint_url};
    none.security_mode = MessageSecurityMode::None;
    none.security_policy_uri = policy_none_uri;
    none.user_identity_tokens = tokens;
    std::vector<EndpointDescription> out{none};
    if (options_.advertise_basic256sha256) {
        EndpointDescription secure = none;
        secure.security_mode = MessageSecurityMode::SignAndEncrypt;
        secure.security_policy_uri = policy_basic256sha256_uri;
        secure.security_level = 3;
        out.push_back(std::move(secure));
    }
    return out;
}

std::unique_ptr<Server> serve_opcua(const ServerModel& model, ServerOptions options) {
    return std::make_unique<Server>(model, std::move(options));
}

}  // namespace otprobe::opcua
