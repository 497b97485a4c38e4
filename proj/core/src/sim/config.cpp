#include "otprobe/sim/config.hpp"

#include <array>
#include <fstream>
#include <stdexcept>

namespace otprobe::sim {

namespace {

using nlohmann::json;

constexpr std::array<const char*, 4> table_keys{"coils", "discrete_inputs", "holding_registers", "input_registers"};

[[noreturn]] void bad(const std::string& where, const std::string& what) {
    throw std::invalid_argument("simulator config " + where + ": " + what);
}

template <typename T>
T field(const json& obj, const char* key, T fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        bad(where + "." + key, e.what());
    }
}

Span span_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) bad(where, "span must be an object");
    Span s;
    const auto start = field<std::int64_t>(j, "start", 0, where);
    const auto count = field<std::int64_t>(j, "count", -1, where);
    if (start < 0 || start > 65535) bad(where + ".start", "must be in 0..65535");
    if (count <= 0 || start + count > 65536) bad(where + ".count", "must be positive and stay within 0..65535");
    s.start = static_cast<std::uint16_t>(start);
    s.count = static_cast<std::uint32_t>(count);
    const auto init = field<std::string>(j, "init", "constant", where);
    auto policy = parse_init_policy(init);
    if (!policy) bad(where + ".init", "unknown policy '" + init + "'");
    s.policy = *policy;
    s.value = field<std::int64_t>(j, "value", 0, where);
    s.modulus = field<std::uint32_t>(j, "modulus", 0, where);
    return s;
}

DeviceProfile device_from_json(const json& j, std::uint64_t default_seed, const std::string& where) {
    if (!j.is_object()) bad(where, "device must be an object");
    DeviceProfile p;
    const auto unit = field<std::int64_t>(j, "unit_id", -1, where);
    if (unit < 0 || unit > 255) bad(where + ".unit_id", "must be in 0..255");
    p.unit_id = static_cast<std::uint8_t>(unit);
    p.name = field<std::string>(j, "name", "", where);
    p.seed = field<std::uint64_t>(j, "seed", default_seed, where);
    for (std::size_t ti = 0; ti < table_keys.size(); ++ti) {
        if (!j.contains(table_keys[ti])) continue;
        const auto& arr = j.at(table_keys[ti]);
        if (!arr.is_array()) bad(where + "." + table_keys[ti], "must be an array");
        for (std::size_t i = 0; i < arr.size(); ++i)
            p.spans[ti].push_back(span_from_json(arr[i], where + "." + table_keys[ti] + "[" + std::to_string(i) + "]"));
    }
    if (j.contains("scaling")) {
        const auto& arr = j.at("scaling");
        if (!arr.is_array()) bad(where + ".scaling", "must be an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string w = where + ".scaling[" + std::to_string(i) + "]";
            ScaledRegisterRule r;
            r.start = field<std::uint16_t>(arr[i], "start", 0, w);
            r.count = field<std::uint32_t>(arr[i], "count", 1, w);
            r.divisor = field<std::uint32_t>(arr[i], "divisor", 100, w);
            r.clamp_min = field<std::int32_t>(arr[i], "clamp_min", 0, w);
            r.clamp_max = field<std::int32_t>(arr[i], "clamp_max", 10, w);
            p.scaling.push_back(r);
        }
    }
    if (j.contains("dynamics")) {
        const auto& d = j.at("dynamics");
        const std::string w = where + ".dynamics";
        if (field<std::string>(d, "type", "water-tank", w) != "water-tank") bad(w + ".type", "only water-tank is supported");
        WaterTankDynamics dyn;
        dyn.digital = field<bool>(d, "digital", false, w);
        dyn.fill_valve = field<std::uint16_t>(d, "fill_valve", dyn.fill_valve, w);
        dyn.discharge_valve = field<std::uint16_t>(d, "discharge_valve", dyn.discharge_valve, w);
        dyn.flow_meter = field<std::uint16_t>(d, "flow_meter", dyn.flow_meter, w);
        dyn.level_meter = field<std::uint16_t>(d, "level_meter", dyn.level_meter, w);
        dyn.gain = field<double>(d, "gain", dyn.gain, w);
        dyn.capacity = field<double>(d, "capacity", dyn.capacity, w);
        dyn.initial_level = field<double>(d, "initial_level", dyn.initial_level, w);
        dyn.high_threshold = field<double>(d, "high_threshold", dyn.high_threshold, w);
        p.dynamics = dyn;
    }
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        bad(where, e.what());
    }
    return p;
}

}  // namespace

SimulatorConfig simulator_config_from_json(const json& doc) {
    if (!doc.is_object()) bad("root", "must be an object");
    SimulatorConfig cfg;
    const auto policy = field<std::string>(doc, "unknown_unit", "gateway-exception", "root");
    if (policy == "gateway-exception") {
        cfg.unknown_unit = UnknownUnitPolicy::GatewayException;
    } else if (policy == "silent") {
        cfg.unknown_unit = UnknownUnitPolicy::Silent;
    } else {
        bad("unknown_unit", "expected gateway-exception or silent");
    }
    const auto seed = field<std::uint64_t>(doc, "seed", 42, "root");
    if (doc.contains("preset")) {
        const auto preset = field<std::string>(doc, "preset", "", "root");
        if (preset == "testbed") {
            cfg.devices = build_default_testbed(seed);
        } else if (preset == "water-plant") {
            cfg.devices.push_back(build_water_plant_profile(WaterPlantSignals::Analog));
        } else if (preset == "water-plant-digital") {
            cfg.devices.push_back(build_water_plant_profile(WaterPlantSignals::Digital));
        } else {
            bad("preset", "unknown preset '" + preset + "'");
        }
    }
    if (doc.contains("devices")) {
        const auto& arr = doc.at("devices");
        if (!arr.is_array()) bad("devices", "must be an array");
        for (std::size_t i = 0; i < arr.size(); ++i)
            cfg.devices.push_back(device_from_json(arr[i], seed, "devices[" + std::to_string(i) + "]"));
    }
    if (cfg.devices.empty()) bad("root", "no devices defined");
    return cfg;
}

SimulatorConfig load_simulator_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open simulator config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("simulator config " + path.string() + " is not valid JSON: " + e.what());
    }
    return simulator_config_from_json(doc);
}

json to_json(const DeviceProfile& profile) {
    json j{{"unit_id", profile.unit_id}, {"name", profile.name}, {"seed", profile.seed}};
    for (std::size_t ti = 0; ti < table_keys.size(); ++ti) {
        if (profile.spans[ti].empty()) continue;
        json arr = json::array();
        for (const auto& s : profile.spans[ti]) {
            arr.push_back({{"start", s.start}, {"count", s.count}, {"init", to_string(s.policy)},
                           {"value", s.value}, {"modulus", s.modulus}});
        }
        j[table_keys[ti]] = arr;
    }
    if (!profile.scaling.empty()) {
        json arr = json::array();
        for (const auto& r : profile.scaling) {
            arr.push_back({{"start", r.start}, {"count", r.count}, {"divisor", r.divisor},
                           {"clamp_min", r.clamp_min}, {"clamp_max", r.clamp_max}});
        }
        j["scaling"] = arr;
    }
    if (profile.dynamics) {
        const auto& d = *profile.dynamics;
        j["dynamics"] = {{"type", "water-tank"},       {"digital", d.digital},       {"fill_valve", d.fill_valve},
                         {"discharge_valve", d.discharge_valve}, {"flow_meter", d.flow_meter},
                         {"level_meter", d.level_meter}, {"gain", d.gain},           {"capacity", d.capacity},
                         {"initial_level", d.initial_level}, {"high_threshold", d.high_threshold}};
    }
    return j;
}

}  // namespace otprobe::sim
