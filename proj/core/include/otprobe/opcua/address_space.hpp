#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "otprobe/opcua/messages.hpp"
#include "otprobe/opcua/types.hpp"

namespace otprobe::opcua {

enum class ValueSource {
    Stored,
    /// Seconds since the address space was created (Double).
    Uptime,
    /// Wall clock (DateTime).
    CurrentTime,
};

/// Each update step moves the value by a uniform draw in [-step, step],
/// clamped to [min, max].
struct RandomWalk {
    double min{0};
    double max{0};
    double step{0};
};

struct NodeDefinition {
    NodeId id;
    NodeClass node_class{NodeClass::Object};
    std::string browse_name;
    std::string display_name;  // defaults to browse_name
    NodeId parent{0, ids::Objects};
    NodeId reference_type{0, ids::HasComponent};

    // Variables only.
    ValueType data_type{ValueType::Double};
    Value initial{0.0};
    bool readable{true};
    bool writable{false};
    ValueSource source{ValueSource::Stored};
    std::optional<RandomWalk> random_walk;
};

struct ServerModel {
    /// Index 0 is always the OPC UA base namespace; index 1 is the server's own.
    std::vector<std::string> namespaces{"http://opcfoundation.org/UA/", "urn:otprobe:server"};
    std::vector<NodeDefinition> nodes;
    std::uint64_t seed{7};
    std::chrono::milliseconds update_period{1000};

    /// Throws std::invalid_argument for duplicate ids, dangling parents, or
    /// initial values whose type differs from the declared data type.
    void validate() const;
};

namespace production_line {
inline const NodeId factory{2, 1};
inline const NodeId line{2, 2};
inline const NodeId temperature_sensors{2, 3};
inline const NodeId motors{2, 4};
inline const NodeId temperature[3] = {{2, 10}, {2, 11}, {2, 12}};
inline const NodeId motor1_speed{2, 20};
inline const NodeId motor1_status{2, 21};
inline const NodeId motor2_speed{2, 22};
inline const NodeId motor2_status{2, 23};
inline const NodeId uptime{2, 30};
inline constexpr double temperature_min = 15.0;
inline constexpr double temperature_max = 35.0;
}  // namespace production_line

/// Factory (ns=2;i=1) > ProductionLine1 (i=2) > TemperatureSensors (i=3,
/// Double i=10..12, writable, random walk) and Motors (i=4: speed Int32 i=20/22,
/// status Boolean i=21/23); Factory > Uptime (i=30, read-only Double seconds).
ServerModel build_production_line_model(std::uint64_t seed = 7);

/// {
///   "preset": "production-line",            (optional; nodes are appended)
///   "seed": 7, "update_period_ms": 1000,
///   "namespaces": ["urn:..."],               (appended after index 1)
///   "nodes": [ { "id": "ns=2;i=10", "name": "Temperature1", "display_name": "...",
///                "parent": "ns=2;i=3", "reference": "HasComponent" | "Organizes" | "HasProperty",
///                "class": "object" | "variable",
///                "type": "Double", "value": 21.5, "access": "rw" | "r" | "w" | "none",
///                "source": "stored" | "uptime" | "current-time",
///                "random_walk": { "min": 15, "max": 35, "step": 0.5 } } ]
/// }
ServerModel model_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ServerModel& model);

/// Live node store shared by every session of one server.
class AddressSpace {
public:
    struct Reference {
        NodeId type;
        NodeId target;
        bool forward{true};
    };

    struct Node {
        NodeId id;
        NodeClass node_class{NodeClass::Object};
        QualifiedName browse_name;
        LocalizedText display_name;
        NodeId type_definition;
        std::vector<Reference> references;
        ValueType data_type{ValueType::Double};
        Value value{0.0};
        std::uint8_t access{0};
        ValueSource source{ValueSource::Stored};
        std::optional<RandomWalk> random_walk;
    };

    /// Adds the standard Objects/Server/CurrentTime nodes, then the model.
    explicit AddressSpace(const ServerModel& model);

    AddressSpace(const AddressSpace&) = delete;
    AddressSpace& operator=(const AddressSpace&) = delete;

    BrowseResult browse(const BrowseDescription& d) const;
    DataValue read(const ReadValueId& id) const;
    std::uint32_t write(const WriteValue& v);

    /// Direct value access for tests and tooling; bypasses access levels.
    std::optional<Value> value(const NodeId& id) const;
    std::optional<Node> node(const NodeId& id) const;
    std::size_t node_count() const;
    std::size_t node_count(std::uint16_t ns) const;
    const std::vector<std::string>& namespaces() const noexcept { return namespaces_; }

    /// Advances every random-walk variable by one step.
    void step();

private:
    void add(Node node, const NodeId& parent, const NodeId& reference_type);
    Value current_value(const Node& n) const;

    mutable std::mutex mutex_;
    std::map<NodeId, Node> nodes_;
    std::vector<std::string> namespaces_;
    std::mt19937_64 rng_;
    std::chrono::steady_clock::time_point started_;
};

}  // namespace otprobe::opcua
