#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "otprobe/sim/profile.hpp"
#include "otprobe/sim/store.hpp"

namespace otprobe::sim {

/// Declarative simulator definition.
///
/// {
///   "unknown_unit": "gateway-exception" | "silent",
///   "preset": "testbed" | "water-plant" | "water-plant-digital",   (optional)
///   "seed": 42,
///   "devices": [
///     { "unit_id": 1, "name": "plc", "seed": 7,
///       "coils" | "discrete_inputs" | "holding_registers" | "input_registers":
///         [ { "start": 0, "count": 1000, "init": "seeded-random" | "constant" | "linear-offset",
///             "value": 0, "modulus": 0 } ],
///       "scaling": [ { "start": 0, "count": 2, "divisor": 100, "clamp_min": 0, "clamp_max": 10 } ],
///       "dynamics": { "type": "water-tank", "digital": false, "fill_valve": 0, "discharge_valve": 1,
///                     "flow_meter": 0, "level_meter": 1, "gain": 5.0, "capacity": 1000,
///                     "initial_level": 500, "high_threshold": 800 } } ]
/// }
///
/// A preset supplies its devices first; "devices" entries are appended.
struct SimulatorConfig {
    UnknownUnitPolicy unknown_unit{UnknownUnitPolicy::GatewayException};
    std::vector<DeviceProfile> devices;
};

/// Throws std::invalid_argument with the offending path on schema errors.
SimulatorConfig simulator_config_from_json(const nlohmann::json& doc);
SimulatorConfig load_simulator_config(const std::filesystem::path& path);

nlohmann::json to_json(const DeviceProfile& profile);

}  // namespace otprobe::sim
