#include <gtest/gtest.h>

#include <random>

#include "otprobe/sim/config.hpp"
#include "otprobe/sim/profile.hpp"
#include "otprobe/sim/store.hpp"

namespace otprobe::sim {
namespace {

const ScaledRegisterRule kValveRule{0, 2, 100, 0, 10};

TEST(ScaledRegisterRule, ReferencePoints) {
    EXPECT_EQ(kValveRule.apply(500), 5);
    EXPECT_EQ(kValveRule.apply(0), 0);
    EXPECT_EQ(kValveRule.apply(5000), 10);
    EXPECT_EQ(kValveRule.apply(49), 0);
    EXPECT_EQ(kValveRule.apply(50), 1);
    EXPECT_EQ(kValveRule.apply(65535), 10);
}

TEST(ScaledRegisterRule, MatchesFloatingPointOracle) {
    for (std::uint32_t w = 0; w <= 65535; ++w) {
        // Half-up rounding of w / 100, clamped to the valve range.
        const double q = std::floor(w / 100.0 + 0.5);
        const auto expected = static_cast<std::uint16_t>(std::clamp(q, 0.0, 10.0));
        ASSERT_EQ(kValveRule.apply(static_cast<std::uint16_t>(w)), expected) << w;
    }
}

TEST(ScaledRegisterRule, OutputAlwaysWithinClamp) {
    const ScaledRegisterRule odd{0, 1, 7, 3, 9};
    for (std::uint32_t w = 0; w <= 65535; w += 13) {
        const auto v = odd.apply(static_cast<std::uint16_t>(w));
        ASSERT_GE(v, 3);
        ASSERT_LE(v, 9);
    }
}

TEST(DefaultTestbed, Shape) {
    const auto profiles = build_default_testbed(1);
    ASSERT_EQ(profiles.size(), 3u);
    EXPECT_EQ(profiles[0].unit_id, 1);
    EXPECT_EQ(profiles[1].unit_id, 5);
    EXPECT_EQ(profiles[2].unit_id, 10);
    for (const auto& p : profiles) EXPECT_NO_THROW(p.validate());
    EXPECT_TRUE(profiles[1].table(DataType::InputRegister).empty());
    EXPECT_TRUE(profiles[2].table(DataType::DiscreteInput).empty());
    EXPECT_TRUE(profiles[2].table(DataType::InputRegister).empty());
}

TEST(DefaultTestbed, SeededContentIsReproducible) {
    RegisterStore a(build_default_testbed(99));
    RegisterStore b(build_default_testbed(99));
    RegisterStore c(build_default_testbed(100));
    for (DataType t : modbus::all_data_types) {
        EXPECT_EQ(a.read(1, t, 0, 1000), b.read(1, t, 0, 1000));
    }
    EXPECT_NE(a.read(1, DataType::HoldingRegister, 0, 1000), c.read(1, DataType::HoldingRegister, 0, 1000));
    auto bits = *a.read(1, DataType::Coil, 0, 1000);
    for (auto v : bits) ASSERT_LE(v, 1);
}

TEST(DefaultTestbed, SensorRegistersFollowPeriodicOffset) {
    RegisterStore store(build_default_testbed(1));
    auto hr = *store.read(5, DataType::HoldingRegister, 0, 1000);
    for (std::uint16_t a = 0; a < 1000; ++a) ASSERT_EQ(hr[a], sensor_register_base + a % sensor_register_period);
}

TEST(DeviceProfile, ValidateRejectsOverflowAndDegenerateRules) {
    DeviceProfile p;
    p.table(DataType::Coil).push_back(Span{65000, 1000, InitPolicy::Constant, 0, 0});
    EXPECT_THROW(p.validate(), std::invalid_argument);

    DeviceProfile q;
    q.scaling.push_back(ScaledRegisterRule{0, 1, 0, 0, 10});
    EXPECT_THROW(q.validate(), std::invalid_argument);
}

TEST(SimulatorConfig, PresetAndExtraDevices) {
    auto doc = nlohmann::json::parse(R"({
        "preset": "testbed", "seed": 7, "unknown_unit": "silent",
        "devices": [ { "unit_id": 20, "holding_registers": [ { "start": 100, "count": 10, "init": "linear-offset", "value": 5 } ] } ]
    })");
    auto cfg = simulator_config_from_json(doc);
    EXPECT_EQ(cfg.unknown_unit, UnknownUnitPolicy::Silent);
    ASSERT_EQ(cfg.devices.size(), 4u);
    RegisterStore store(cfg.devices);
    EXPECT_EQ(store.read(20, DataType::HoldingRegister, 100, 2), (std::vector<std::uint16_t>{105, 106}));
    EXPECT_FALSE(store.read(20, DataType::HoldingRegister, 99, 1).has_value());
}

TEST(SimulatorConfig, RoundTripsThroughJson) {
    for (const auto& p : build_default_testbed(3)) {
        nlohmann::json doc{{"devices", nlohmann::json::array({to_json(p)})}};
        auto back = simulator_config_from_json(doc).devices.at(0);
        EXPECT_EQ(to_json(back), to_json(p));
    }
    const auto plant = build_water_plant_profile();
    auto back = simulator_config_from_json({{"devices", nlohmann::json::array({to_json(plant)})}}).devices.at(0);
    EXPECT_EQ(to_json(back), to_json(plant));
}

TEST(SimulatorConfig, ErrorsNameTheOffendingField) {
    auto expect_error = [](const char* text, const char* fragment) {
        try {
            simulator_config_from_json(nlohmann::json::parse(text));
            ADD_FAILURE() << text;
        } catch (const std::invalid_argument& e) {
            EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
        }
    };
    expect_error(R"({})", "no devices");
    expect_error(R"({"preset": "refinery"})", "preset");
    expect_error(R"({"devices": [ { "unit_id": 300 } ]})", "unit_id");
    expect_error(R"({"devices": [ { "unit_id": 1, "coils": [ { "count": 0 } ] } ]})", "coils[0].count");
    expect_error(R"({"devices": [ { "unit_id": 1, "coils": [ { "count": 1, "init": "noise" } ] } ]})", "init");
    expect_error(R"({"unknown_unit": "ignore", "preset": "testbed"})", "unknown_unit");
}

}  // namespace
}  // namespace otprobe::sim
