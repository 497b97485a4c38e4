#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "otprobe/net/tcp_server.hpp"
#include "otprobe/sim/profile.hpp"
#include "otprobe/sim/store.hpp"

namespace otprobe::sim {

inline constexpr std::uint16_t testbed_port = 5002;
inline constexpr std::uint16_t water_plant_port = 5020;

struct ModbusServerOptions {
    std::string host{"127.0.0.1"};
    std::uint16_t port{testbed_port};
    UnknownUnitPolicy unknown_unit{UnknownUnitPolicy::GatewayException};
    /// Period of the dynamics update; zero disables the ticker.
    std::chrono::milliseconds tick_period{1000};
};

/// Running Modbus TCP simulator. Stops on destruction.
class ModbusServer {
public:
    /// Throws net::NetError(Bind) when the port is unavailable.
    ModbusServer(std::vector<DeviceProfile> profiles, ModbusServerOptions options);
    ~ModbusServer();

    ModbusServer(const ModbusServer&) = delete;
    ModbusServer& operator=(const ModbusServer&) = delete;

    std::uint16_t port() const noexcept { return server_->port(); }
    const std::string& host() const noexcept { return options_.host; }
    RegisterStore& store() noexcept { return *store_; }
    void stop();

private:
    void serve_connection(net::Socket& sock, const std::atomic<bool>& stopping);

    ModbusServerOptions options_;
    std::unique_ptr<RegisterStore> store_;
    std::unique_ptr<net::TcpServer> server_;
    std::atomic<bool> ticking_{true};
    std::thread ticker_;
};

/// Convenience wrapper matching the bundled CLI command.
std::unique_ptr<ModbusServer> serve_modbus(const std::string& host, std::uint16_t port,
                                           std::vector<DeviceProfile> profiles,
                                           UnknownUnitPolicy unknown = UnknownUnitPolicy::GatewayException);

}  // namespace otprobe::sim
