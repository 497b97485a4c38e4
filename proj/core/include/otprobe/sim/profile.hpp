#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "otprobe/modbus/pdu.hpp"

namespace otprobe::sim {

using modbus::DataType;

enum class InitPolicy {
    Constant,
    SeededRandom,
    LinearOffset,
};

const char* to_string(InitPolicy p) noexcept;
std::optional<InitPolicy> parse_init_policy(const std::string& text) noexcept;

/// A contiguous block of one data table and how it is initialised.
///
/// Constant: every element holds `value`.
/// SeededRandom: element bits drawn from mt19937_64 seeded with the device
///   seed mixed with the table and span start (bits take the low bit only).
/// LinearOffset: element a holds `value + a`, or `value + (a % modulus)`
///   when modulus is non-zero; truncated to 16 bits.
struct Span {
    std::uint16_t start{0};
    std::uint32_t count{0};
    InitPolicy policy{InitPolicy::Constant};
    std::int64_t value{0};
    std::uint32_t modulus{0};
};

/// stored = clamp(round(written / divisor), clamp_min, clamp_max), applied to
/// holding-register writes inside [start, start + count).
struct ScaledRegisterRule {
    std::uint16_t start{0};
    std::uint32_t count{1};
    std::uint32_t divisor{100};
    std::int32_t clamp_min{0};
    std::int32_t clamp_max{10};

    bool covers(std::uint16_t address) const noexcept {
        return address >= start && address < start + count;
    }
    std::uint16_t apply(std::uint16_t written) const noexcept;
};

/// Mass-balance tank: level += gain * (fill - discharge) per second.
///
/// Analog layout reads the valve openings from holding registers and
/// publishes flow/level to input registers. Digital layout reads valve coils
/// and publishes "flow present" / "level high" discrete inputs.
struct WaterTankDynamics {
    bool digital{false};
    std::uint16_t fill_valve{0};
    std::uint16_t discharge_valve{1};
    std::uint16_t flow_meter{0};
    std::uint16_t level_meter{1};
    double gain{5.0};
    double capacity{1000.0};
    double initial_level{500.0};
    double high_threshold{800.0};
};

struct DeviceProfile {
    std::uint8_t unit_id{1};
    std::string name;
    std::uint64_t seed{0};
    /// Indexed by DataType.
    std::array<std::vector<Span>, 4> spans{};
    std::vector<ScaledRegisterRule> scaling;
    std::optional<WaterTankDynamics> dynamics;

    std::vector<Span>& table(DataType t) { return spans[static_cast<std::size_t>(t)]; }
    const std::vector<Span>& table(DataType t) const { return spans[static_cast<std::size_t>(t)]; }
    /// Throws std::invalid_argument when a span leaves 0..65535 or a rule is degenerate.
    void validate() const;
};

inline constexpr std::uint32_t testbed_addresses_per_type = 1000;
inline constexpr std::uint16_t actuator_register_base = 10000;
inline constexpr std::uint16_t sensor_register_base = 200;
inline constexpr std::uint32_t sensor_register_period = 800;

/// Three-device Modbus testbed: unit 1 PLC (seeded random, 1000 addresses per
/// type), unit 5 sensor (discrete inputs on, coils off, analog holding
/// registers), unit 10 actuator (coils 0-499 on / 500-999 off, holding
/// registers 10000 + address).
std::vector<DeviceProfile> build_default_testbed(std::uint64_t seed);

enum class WaterPlantSignals {
    Analog,
    Digital,
};

namespace water_plant {
inline constexpr std::uint16_t fill_valve = 0;
inline constexpr std::uint16_t discharge_valve = 1;
inline constexpr std::uint16_t flow_meter = 0;
inline constexpr std::uint16_t level_meter = 1;
}  // namespace water_plant

/// Water-tank plant with two valves and two meters; analog valves carry the
/// 100:1 scaled 0..10 opening rule.
DeviceProfile build_water_plant_profile(WaterPlantSignals signals = WaterPlantSignals::Analog, std::uint8_t unit_id = 1);

}  // namespace otprobe::sim
