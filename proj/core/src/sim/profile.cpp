#include "otprobe/sim/profile.hpp"

#include <algorithm>
#include <stdexcept>

namespace otprobe::sim {

const char* to_string(InitPolicy p) noexcept {
    switch (p) {
        case InitPolicy::Constant: return "constant";
        case InitPolicy::SeededRandom: return "seeded-random";
        case InitPolicy::LinearOffset: return "linear-offset";
    }
    return "constant";
}

std::optional<InitPolicy> parse_init_policy(const std::string& text) noexcept {
    if (text == "constant") return InitPolicy::Constant;
    if (text == "seeded-random" || text == "random") return InitPolicy::SeededRandom;
    if (text == "linear-offset" || text == "linear") return InitPolicy::LinearOffset;
    return std::nullopt;
}

std::uint16_t ScaledRegisterRule::apply(std::uint16_t written) const noexcept {
    const std::int64_t rounded = (static_cast<std::int64_t>(written) + divisor / 2) / divisor;
    return static_cast<std::uint16_t>(std::clamp<std::int64_t>(rounded, clamp_min, clamp_max));
}

void DeviceProfile::validate() const {
    for (const auto& table : spans) {
        for (const auto& s : table) {
            if (s.count == 0 || s.start + s.count > 65536u)
                throw std::invalid_argument("unit " + std::to_string(unit_id) + ": span " + std::to_string(s.start) + "+" +
                                            std::to_string(s.count) + " leaves the 0..65535 address space");
        }
    }
    for (const auto& r : scaling) {
        if (r.divisor == 0) throw std::invalid_argument("scaling divisor must be positive");
        if (r.clamp_min > r.clamp_max) throw std::invalid_argument("scaling clamp_min exceeds clamp_max");
        if (r.clamp_min < 0 || r.clamp_max > 65535) throw std::invalid_argument("scaling clamp outside 16-bit range");
    }
}

std::vector<DeviceProfile> build_default_testbed(std::uint64_t seed) {
    const std::uint32_t n = testbed_addresses_per_type;

    DeviceProfile plc;
    plc.unit_id = 1;
    plc.name = "plc";
    plc.seed = seed;
    for (DataType t : modbus::all_data_types) plc.table(t).push_back(Span{0, n, InitPolicy::SeededRandom, 0, 0});

    DeviceProfile sensor;
    sensor.unit_id = 5;
    sensor.name = "sensor";
    sensor.seed = seed;
    sensor.table(DataType::DiscreteInput).push_back(Span{0, n, InitPolicy::Constant, 1, 0});
    sensor.table(DataType::Coil).push_back(Span{0, n, InitPolicy::Constant, 0, 0});
    sensor.table(DataType::HoldingRegister)
        .push_back(Span{0, n, InitPolicy::LinearOffset, sensor_register_base, sensor_register_period});

    DeviceProfile actuator;
    actuator.unit_id = 10;
    actuator.name = "actuator";
    actuator.seed = seed;
    actuator.table(DataType::Coil).push_back(Span{0, n / 2, InitPolicy::Constant, 1, 0});
    actuator.table(DataType::Coil).push_back(Span{static_cast<std::uint16_t>(n / 2), n / 2, InitPolicy::Constant, 0, 0});
    actuator.table(DataType::HoldingRegister).push_back(Span{0, n, InitPolicy::LinearOffset, actuator_register_base, 0});

    return {plc, sensor, actuator};
}

DeviceProfile build_water_plant_profile(WaterPlantSignals signals, std::uint8_t unit_id) {
    DeviceProfile p;
    p.unit_id = unit_id;
    p.seed = 0;
    WaterTankDynamics dyn;
    dyn.fill_valve = water_plant::fill_valve;
    dyn.discharge_valve = water_plant::discharge_valve;
    dyn.flow_meter = water_plant::flow_meter;
    dyn.level_meter = water_plant::level_meter;
    if (signals == WaterPlantSignals::Analog) {
        p.name = "water-plant";
        p.table(DataType::InputRegister).push_back(Span{0, 2, InitPolicy::Constant, 0, 0});
        p.table(DataType::HoldingRegister).push_back(Span{0, 2, InitPolicy::Constant, 0, 0});
        p.scaling.push_back(ScaledRegisterRule{water_plant::fill_valve, 2, 100, 0, 10});
    } else {
        p.name = "water-plant-digital";
        dyn.digital = true;
        p.table(DataType::DiscreteInput).push_back(Span{0, 2, InitPolicy::Constant, 0, 0});
        p.table(DataType::Coil).push_back(Span{0, 2, InitPolicy::Constant, 0, 0});
    }
    p.dynamics = dyn;
    return p;
}

}  // namespace otprobe::sim
