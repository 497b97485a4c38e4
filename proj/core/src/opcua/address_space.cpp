#include "otprobe/opcua/address_space.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace otprobe::opcua {

namespace {

using nlohmann::json;

NodeId ref(std::uint32_t id) { return NodeId(0, id); }

bool is_hierarchical(const NodeId& type) {
    return type == ref(ids::Organizes) || type == ref(ids::HasComponent) || type == ref(ids::HasProperty) ||
           type == ref(ids::HierarchicalReferences);
}

bool reference_matches(const NodeId& filter, bool include_subtypes, const NodeId& type) {
    if (filter.is_null()) return true;
    if (filter == type) return true;
    return include_subtypes && filter == ref(ids::HierarchicalReferences) && is_hierarchical(type);
}

NodeDefinition variable(NodeId id, std::string name, NodeId parent, Value initial, bool writable) {
    NodeDefinition d;
    d.id = std::move(id);
    d.node_class = NodeClass::Variable;
    d.browse_name = std::move(name);
    d.parent = std::move(parent);
    d.data_type = type_of(initial);
    d.initial = std::move(initial);
    d.writable = writable;
    return d;
}

NodeDefinition object(NodeId id, std::string name, NodeId parent, NodeId reference = ref(ids::HasComponent)) {
    NodeDefinition d;
    d.id = std::move(id);
    d.browse_name = std::move(name);
    d.parent = std::move(parent);
    d.reference_type = std::move(reference);
    return d;
}

[[noreturn]] void bad(const std::string& where, const std::string& what) {
    throw std::invalid_argument("opcua model " + where + ": " + what);
}

NodeId parse_node(const json& j, const std::string& where) {
    if (!j.is_string()) bad(where, "node id must be a string like \"ns=2;i=10\"");
    auto id = NodeId::parse(j.get<std::string>());
    if (!id) bad(where, "malformed node id '" + j.get<std::string>() + "'");
    return *id;
}

Value value_from_json(ValueType t, const json& j, const std::string& where) {
    try {
        switch (t) {
            case ValueType::Boolean: return Value{j.get<bool>()};
            case ValueType::Int32: return Value{j.get<std::int32_t>()};
            case ValueType::Double: return Value{j.get<double>()};
            case ValueType::String: return Value{j.get<std::string>()};
            case ValueType::DateTime: {
                auto dt = DateTime::parse_iso8601(j.get<std::string>());
                if (!dt) bad(where, "expected ISO-8601 UTC timestamp");
                return Value{*dt};
            }
        }
    } catch (const json::exception& e) {
        bad(where, e.what());
    }
    bad(where, "unsupported type");
}

json value_to_json(const Value& v) {
    struct Visitor {
        json operator()(bool b) const { return b; }
        json operator()(std::int32_t i) const { return i; }
        json operator()(double d) const { return d; }
        json operator()(const std::string& s) const { return s; }
        json operator()(const DateTime& t) const { return t.to_iso8601(); }
    };
    return std::visit(Visitor{}, v);
}

std::optional<NodeId> parse_reference_name(const std::string& s) {
    if (s == "HasComponent") return ref(ids::HasComponent);
    if (s == "Organizes") return ref(ids::Organizes);
    if (s == "HasProperty") return ref(ids::HasProperty);
    return std::nullopt;
}

std::string reference_name(const NodeId& id) {
    if (id == ref(ids::Organizes)) return "Organizes";
    if (id == ref(ids::HasProperty)) return "HasProperty";
    return "HasComponent";
}

const char* source_name(ValueSource s) {
    switch (s) {
        case ValueSource::Uptime: return "uptime";
        case ValueSource::CurrentTime: return "current-time";
        case ValueSource::Stored: break;
    }
    return "stored";
}

}  // namespace

void ServerModel::validate() const {
    std::set<NodeId> known{ref(ids::Objects), ref(ids::Server), ref(ids::CurrentTime)};
    for (const auto& n : nodes) {
        if (!known.insert(n.id).second) throw std::invalid_argument("duplicate node id " + n.id.to_string());
        if (n.id.ns >= namespaces.size())
            throw std::invalid_argument("node " + n.id.to_string() + " uses an undeclared namespace");
        if (n.browse_name.empty()) throw std::invalid_argument("node " + n.id.to_string() + " has no browse name");
        if (n.node_class != NodeClass::Object && n.node_class != NodeClass::Variable)
            throw std::invalid_argument("node " + n.id.to_string() + ": only objects and variables are supported");
        if (n.node_class == NodeClass::Variable) {
            const ValueType expected = n.source == ValueSource::Uptime        ? ValueType::Double
                                       : n.source == ValueSource::CurrentTime ? ValueType::DateTime
                                                                              : type_of(n.initial);
            if (expected != n.data_type)
                throw std::invalid_argument("node " + n.id.to_string() + ": value type does not match data type " +
                                            to_string(n.data_type));
            if (n.random_walk && (n.data_type != ValueType::Double || n.random_walk->min > n.random_walk->max ||
                                  n.random_walk->step < 0))
                throw std::invalid_argument("node " + n.id.to_string() + ": random walk needs a Double and min <= max");
        }
    }
    for (const auto& n : nodes) {
        if (!known.count(n.parent))
            throw std::invalid_argument("node " + n.id.to_string() + " has unknown parent " + n.parent.to_string());
    }
}

ServerModel build_production_line_model(std::uint64_t seed) {
    namespace pl = production_line;
    ServerModel m;
    m.namespaces.push_back("urn:otprobe:production-line");
    m.seed = seed;
    m.nodes.push_back(object(pl::factory, "Factory", ref(ids::Objects), ref(ids::Organizes)));
    m.nodes.push_back(object(pl::line, "ProductionLine1", pl::factory));
    m.nodes.push_back(object(pl::temperature_sensors, "TemperatureSensors", pl::line));
    m.nodes.push_back(object(pl::motors, "Motors", pl::line));
    const double initial[3] = {21.5, 22.0, 23.5};
    for (int i = 0; i < 3; ++i) {
        auto t = variable(pl::temperature[i], "Temperature" + std::to_string(i + 1), pl::temperature_sensors, initial[i], true);
        t.random_walk = RandomWalk{pl::temperature_min, pl::temperature_max, 0.5};
        m.nodes.push_back(t);
    }
    m.nodes.push_back(variable(pl::motor1_speed, "Motor1Speed", pl::motors, std::int32_t{1500}, true));
    m.nodes.push_back(variable(pl::motor1_status, "Motor1Status", pl::motors, true, true));
    m.nodes.push_back(variable(pl::motor2_speed, "Motor2Speed", pl::motors, std::int32_t{1000}, true));
    m.nodes.push_back(variable(pl::motor2_status, "Motor2Status", pl::motors, false, true));
    auto up = variable(pl::uptime, "Uptime", pl::factory, 0.0, false);
    up.source = ValueSource::Uptime;
    m.nodes.push_back(up);
    return m;
}

ServerModel model_from_json(const json& doc) {
    if (!doc.is_object()) bad("root", "must be an object");
    ServerModel m;
    if (doc.contains("preset")) {
        const auto preset = doc.at("preset");
        if (preset != "production-line") bad("preset", "unknown preset " + preset.dump());
        m = build_production_line_model();
    }
    try {
        if (doc.contains("seed")) m.seed = doc.at("seed").get<std::uint64_t>();
        if (doc.contains("update_period_ms")) m.update_period = std::chrono::milliseconds(doc.at("update_period_ms").get<std::int64_t>());
        if (doc.contains("namespaces")) {
            m.namespaces.resize(2);
            for (const auto& ns : doc.at("namespaces")) m.namespaces.push_back(ns.get<std::string>());
        }
    } catch (const json::exception& e) {
        bad("root", e.what());
    }
    if (m.update_period.count() < 0) bad("update_period_ms", "must not be negative");
    if (doc.contains("nodes")) {
        const auto& arr = doc.at("nodes");
        if (!arr.is_array()) bad("nodes", "must be an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const auto& j = arr[i];
            const std::string where = "nodes[" + std::to_string(i) + "]";
            if (!j.is_object()) bad(where, "must be an object");
            NodeDefinition d;
            if (!j.contains("id")) bad(where, "missing id");
            d.id = parse_node(j.at("id"), where + ".id");
            d.browse_name = j.value("name", std::string{});
            d.display_name = j.value("display_name", std::string{});
            if (j.contains("parent")) d.parent = parse_node(j.at("parent"), where + ".parent");
            if (j.contains("reference")) {
                auto r = parse_reference_name(j.value("reference", std::string{}));
                if (!r) bad(where + ".reference", "expected HasComponent, Organizes or HasProperty");
                d.reference_type = *r;
            } else if (d.parent == ref(ids::Objects)) {
                d.reference_type = ref(ids::Organizes);
            }
            const auto cls = j.value("class", std::string{"object"});
            if (cls == "object") {
                d.node_class = NodeClass::Object;
            } else if (cls == "variable") {
                d.node_class = NodeClass::Variable;
                const auto src = j.value("source", std::string{"stored"});
                if (src == "uptime") {
                    d.source = ValueSource::Uptime;
                    d.data_type = ValueType::Double;
                    d.initial = 0.0;
                } else if (src == "current-time") {
                    d.source = ValueSource::CurrentTime;
                    d.data_type = ValueType::DateTime;
                    d.initial = DateTime{};
                } else if (src == "stored") {
                    auto t = parse_value_type(j.value("type", std::string{}));
                    if (!t) bad(where + ".type", "expected Boolean, Int32, Double, String or DateTime");
                    d.data_type = *t;
                    if (!j.contains("value")) bad(where + ".value", "stored variables need an initial value");
                    d.initial = value_from_json(*t, j.at("value"), where + ".value");
                } else {
                    bad(where + ".source", "expected stored, uptime or current-time");
                }
                const auto access = j.value("access", std::string{"r"});
                if (access != "r" && access != "rw" && access != "w" && access != "none")
                    bad(where + ".access", "expected r, rw, w or none");
                d.readable = access == "r" || access == "rw";
                d.writable = access == "w" || access == "rw";
                if (j.contains("random_walk")) {
                    const auto& w = j.at("random_walk");
                    try {
                        d.random_walk = RandomWalk{w.at("min").get<double>(), w.at("max").get<double>(), w.value("step", 0.5)};
                    } catch (const json::exception& e) {
                        bad(where + ".random_walk", e.what());
                    }
                }
            } else {
                bad(where + ".class", "expected object or variable");
            }
            m.nodes.push_back(std::move(d));
        }
    }
    try {
        m.validate();
    } catch (const std::invalid_argument& e) {
        bad("nodes", e.what());
    }
    return m;
}

json to_json(const ServerModel& model) {
    json doc{{"seed", model.seed}, {"update_period_ms", model.update_period.count()}};
    doc["namespaces"] = json(std::vector<std::string>(model.namespaces.begin() + std::min<std::size_t>(2, model.namespaces.size()),
                                                      model.namespaces.end()));
    json nodes = json::array();
    for (const auto& n : model.nodes) {
        json j{{"id", n.id.to_string()}, {"name", n.browse_name}, {"parent", n.parent.to_string()},
               {"reference", reference_name(n.reference_type)}};
        if (!n.display_name.empty()) j["display_name"] = n.display_name;
        if (n.node_class == NodeClass::Variable) {
            j["class"] = "variable";
            j["source"] = source_name(n.source);
            j["type"] = to_string(n.data_type);
            if (n.source == ValueSource::Stored) j["value"] = value_to_json(n.initial);
            j["access"] = n.readable && n.writable ? "rw" : n.readable ? "r" : n.writable ? "w" : "none";
            if (n.random_walk)
                j["random_walk"] = {{"min", n.random_walk->min}, {"max", n.random_walk->max}, {"step", n.random_walk->step}};
        } else {
            j["class"] = "object";
        }
        nodes.push_back(std::move(j));
    }
    doc["nodes"] = std::move(nodes);
    return doc;
}

AddressSpace::AddressSpace(const ServerModel& model)
    : namespaces_(model.namespaces), rng_(model.seed), started_(std::chrono::steady_clock::now()) {
    model.validate();

    Node objects;
    objects.id = ref(ids::Objects);
    objects.browse_name = {0, "Objects"};
    objects.display_name = {"", "Objects"};
    objects.type_definition = ref(ids::FolderType);
    nodes_.emplace(objects.id, objects);

    Node server;
    server.id = ref(ids::Server);
    server.browse_name = {0, "Server"};
    server.display_name = {"", "Server"};
    server.type_definition = ref(ids::BaseObjectType);
    add(server, objects.id, ref(ids::Organizes));

    Node now;
    now.id = ref(ids::CurrentTime);
    now.node_class = NodeClass::Variable;
    now.browse_name = {0, "CurrentTime"};
    now.display_name = {"", "CurrentTime"};
    now.type_definition = ref(ids::BaseDataVariableType);
    now.data_type = ValueType::DateTime;
    now.value = DateTime{};
    now.access = access_read;
    now.source = ValueSource::CurrentTime;
    add(now, server.id, ref(ids::HasComponent));

    for (const auto& d : model.nodes) {
        Node n;
        n.id = d.id;
        n.node_class = d.node_class;
        n.browse_name = {d.id.ns, d.browse_name};
        n.display_name = {"", d.display_name.empty() ? d.browse_name : d.display_name};
        if (d.node_class == NodeClass::Variable) {
            n.type_definition = ref(ids::BaseDataVariableType);
            n.data_type = d.data_type;
            n.value = d.initial;
            n.access = static_cast<std::uint8_t>((d.readable ? access_read : 0) | (d.writable ? access_write : 0));
            n.source = d.source;
            n.random_walk = d.random_walk;
        } else {
            n.type_definition = ref(ids::BaseObjectType);
        }
        add(std::move(n), d.parent, d.reference_type);
    }
}

void AddressSpace::add(Node node, const NodeId& parent, const NodeId& reference_type) {
    node.references.push_back(Reference{reference_type, parent, false});
    nodes_.at(parent).references.push_back(Reference{reference_type, node.id, true});
    const NodeId id = node.id;
    nodes_.emplace(id, std::move(node));
}

Value AddressSpace::current_value(const Node& n) const {
    switch (n.source) {
        case ValueSource::Uptime:
            return std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
        case ValueSource::CurrentTime: return DateTime::now();
        case ValueSource::Stored: break;
    }
    return n.value;
}

BrowseResult AddressSpace::browse(const BrowseDescription& d) const {
    std::lock_guard lock(mutex_);
    BrowseResult result;
    auto it = nodes_.find(d.node_id);
    if (it == nodes_.end()) {
        result.status_code = status::BadNodeIdUnknown;
        return result;
    }
    for (const auto& r : it->second.references) {
        if (d.direction == BrowseDirection::Forward && !r.forward) continue;
        if (d.direction == BrowseDirection::Inverse && r.forward) continue;
        if (!reference_matches(d.reference_type_id, d.include_subtypes, r.type)) continue;
        const Node& target = nodes_.at(r.target);
        if (d.node_class_mask != 0 && (d.node_class_mask & static_cast<std::uint32_t>(target.node_class)) == 0) continue;
        ReferenceDescription rd;
        rd.reference_type_id = r.type;
        rd.is_forward = r.forward;
        rd.node_id = target.id;
        rd.browse_name = target.browse_name;
        rd.display_name = target.display_name;
        rd.node_class = target.node_class;
        rd.type_definition = target.type_definition;
        result.references.push_back(std::move(rd));
    }
    return result;
}

DataValue AddressSpace::read(const ReadValueId& id) const {
    std::lock_guard lock(mutex_);
    DataValue out;
    auto it = nodes_.find(id.node_id);
    if (it == nodes_.end()) {
        out.status = status::BadNodeIdUnknown;
        return out;
    }
    const Node& n = it->second;
    const bool is_var = n.node_class == NodeClass::Variable;
    switch (id.attribute_id) {
        case AttributeId::NodeId: out.value = n.id; break;
        case AttributeId::NodeClass: out.value = static_cast<std::int32_t>(n.node_class); break;
        case AttributeId::BrowseName: out.value = n.browse_name; break;
        case AttributeId::DisplayName: out.value = n.display_name; break;
        case AttributeId::Value:
            if (!is_var) {
                out.status = status::BadAttributeIdInvalid;
            } else if (!(n.access & access_read)) {
                out.status = status::BadNotReadable;
            } else {
                out.value = to_wire(current_value(n));
                out.server_timestamp = DateTime::now();
            }
            break;
        case AttributeId::DataType:
            if (is_var) {
                out.value = data_type_node(n.data_type);
            } else {
                out.status = status::BadAttributeIdInvalid;
            }
            break;
        case AttributeId::AccessLevel:
        case AttributeId::UserAccessLevel:
            if (is_var) {
                out.value = n.access;
            } else {
                out.status = status::BadAttributeIdInvalid;
            }
            break;
        default: out.status = status::BadAttributeIdInvalid; break;
    }
    return out;
}

std::uint32_t AddressSpace::write(const WriteValue& v) {
    std::lock_guard lock(mutex_);
    auto it = nodes_.find(v.node_id);
    if (it == nodes_.end()) return status::BadNodeIdUnknown;
    Node& n = it->second;
    if (v.attribute_id != AttributeId::Value) return status::BadNotWritable;
    if (n.node_class != NodeClass::Variable || !(n.access & access_write) || n.source != ValueSource::Stored)
        return status::BadNotWritable;
    if (!v.value.value) return status::BadTypeMismatch;
    auto value = from_wire(*v.value.value);
    if (!value || type_of(*value) != n.data_type) return status::BadTypeMismatch;
    n.value = std::move(*value);
    return status::Good;
}

std::optional<Value> AddressSpace::value(const NodeId& id) const {
    std::lock_guard lock(mutex_);
    auto it = nodes_.find(id);
    if (it == nodes_.end() || it->second.node_class != NodeClass::Variable) return std::nullopt;
    return current_value(it->second);
}

std::optional<AddressSpace::Node> AddressSpace::node(const NodeId& id) const {
    std::lock_guard lock(mutex_);
    auto it = nodes_.find(id);
    if (it == nodes_.end()) return std::nullopt;
    return it->second;
}

std::size_t AddressSpace::node_count() const {
    std::lock_guard lock(mutex_);
    return nodes_.size();
}

std::size_t AddressSpace::node_count(std::uint16_t ns) const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [ns](const auto& kv) { return kv.first.ns == ns; }));
}

void AddressSpace::step() {
    std::lock_guard lock(mutex_);
    for (auto& [_, n] : nodes_) {
        if (!n.random_walk) continue;
        const auto& w = *n.random_walk;
        std::uniform_real_distribution<double> delta(-w.step, w.step);
        const double next = std::get<double>(n.value) + delta(rng_);
        n.value = std::clamp(next, w.min, w.max);
    }
}

}  // namespace otprobe::opcua
