#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "otprobe/net/tcp_server.hpp"
#include "otprobe/opcua/address_space.hpp"

namespace otprobe::opcua {

inline constexpr std::uint16_t default_port = 4840;
inline constexpr std::string_view default_endpoint_path = "/freeopcua/server/";

struct AuthConfig {
    bool anonymous{true};
    /// user name -> password
    std::map<std::string, std::string> users;
};

struct ServerOptions {
    std::string host{"127.0.0.1"};
    std::uint16_t port{default_port};
    std::string endpoint_path{default_endpoint_path};
    AuthConfig auth;
    /// Lists an extra Basic256Sha256/SignAndEncrypt endpoint. Channels using it
    /// are refused: only SecurityPolicy None is implemented on the wire.
    bool advertise_basic256sha256{false};
    std::string application_uri{"urn:otprobe:server"};
    std::string application_name{"otprobe OPC UA simulator"};
};

/// Model plus server options from one JSON document: model_from_json() keys
/// together with
///   "auth": { "anonymous": true, "users": [ { "username": "...", "password": "..." } ] },
///   "endpoint_path": "/freeopcua/server/", "advertise_basic256sha256": false
struct ServerConfig {
    ServerModel model;
    ServerOptions options;
};

ServerConfig server_config_from_json(const nlohmann::json& doc);
ServerConfig load_server_config(const std::filesystem::path& path);

/// Running OPC UA server (binary protocol, SecurityPolicy None). Stops on destruction.
class Server {
public:
    /// Throws net::NetError(Bind) when the port is unavailable and
    /// std::invalid_argument when no identity token type is enabled.
    Server(const ServerModel& model, ServerOptions options);
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    std::uint16_t port() const noexcept { return tcp_->port(); }
    /// opc.tcp://<host>:<port><path>, with loopback/any hosts shown as localhost.
    std::string endpoint_url() const;
    AddressSpace& address_space() noexcept { return *space_; }
    std::vector<EndpointDescription> endpoints() const;
    void stop();

private:
    class Connection;
    void serve(net::Socket& sock, const std::atomic<bool>& stopping);

    ServerOptions options_;
    std::unique_ptr<AddressSpace> space_;
    std::unique_ptr<net::TcpServer> tcp_;
    std::atomic<std::uint32_t> next_channel_{1};
    std::atomic<std::uint32_t> next_session_{1};
    std::atomic<bool> updating_{true};
    std::thread updater_;
};

std::unique_ptr<Server> serve_opcua(const ServerModel& model, ServerOptions options);

}  // namespace otprobe::opcua
