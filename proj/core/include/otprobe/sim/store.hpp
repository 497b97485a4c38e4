#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "otprobe/modbus/frame.hpp"
#include "otprobe/sim/profile.hpp"

namespace otprobe::sim {

enum class UnknownUnitPolicy {
    GatewayException,
    Silent,
};

/// Shared register image for every simulated device behind one endpoint.
///
/// All access goes through one mutex, so a request observes and mutates a
/// consistent snapshot.
class RegisterStore {
public:
    explicit RegisterStore(std::vector<DeviceProfile> profiles);

    RegisterStore(const RegisterStore&) = delete;
    RegisterStore& operator=(const RegisterStore&) = delete;

    bool has_unit(std::uint8_t unit) const;
    std::vector<std::uint8_t> units() const;
    const DeviceProfile* profile(std::uint8_t unit) const;

    /// Nullopt when any address is outside the device's spans.
    std::optional<std::vector<std::uint16_t>> read(std::uint8_t unit, DataType type, std::uint16_t address,
                                                   std::size_t count) const;

    enum class WriteResult { Ok, UnknownUnit, ReadOnly, OutOfSpan };

    /// Applies scaling rules to holding registers. Discrete inputs and input
    /// registers are never written through this path.
    WriteResult write(std::uint8_t unit, DataType type, std::uint16_t address, std::span<const std::uint16_t> values);

    /// Advances device dynamics by `seconds`.
    void tick(double seconds);

    /// Builds the response to one request frame, echoing transaction and unit
    /// ids. Nullopt means "stay silent" (unknown unit under the Silent policy).
    std::optional<modbus::Frame> handle_request(const modbus::Frame& request,
                                                UnknownUnitPolicy unknown = UnknownUnitPolicy::GatewayException);

private:
    struct Table {
        std::vector<std::uint16_t> values;
        std::vector<bool> present;
        bool empty() const noexcept { return values.empty(); }
    };
    struct Device {
        DeviceProfile profile;
        std::array<Table, 4> tables;
        double level{0.0};
    };

    Device* find(std::uint8_t unit);
    const Device* find(std::uint8_t unit) const;
    static bool spans_cover(const Table& t, std::uint16_t address, std::size_t count);
    void publish_dynamics(Device& d);

    modbus::Pdu handle_pdu(Device& device, const modbus::Pdu& request);

    mutable std::mutex mutex_;
    std::map<std::uint8_t, Device> devices_;
};

}  // namespace otprobe::sim
