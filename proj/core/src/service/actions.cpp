#include "otprobe/service/actions.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <sstream>

#include "otprobe/modbus/client.hpp"
#include "otprobe/modbus/scanner.hpp"
#include "otprobe/netscan/scanner.hpp"
#include "otprobe/opcua/client.hpp"

namespace otprobe::service {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

// "ConnectionRefused" / "connection_refused" -> "connection-refused"
std::string kebab(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c == '_' || c == ' ') {
            out.push_back('-');
        } else if (std::isupper(static_cast<unsigned char>(c))) {
            if (i > 0 && out.back() != '-') out.push_back('-');
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            out.push_back(c);
        }
    }
    return out;
}

Outcome outcome_for_kind(const std::string& kind) {
    static const std::vector<std::string> unreachable = {"timeout",           "connection-refused", "network",
                                                         "frame-error",       "handshake-rejected", "session-closed"};
    return std::find(unreachable.begin(), unreachable.end(), kind) != unreachable.end() ? Outcome::Unreachable
                                                                                      : Outcome::TargetError;
}

json error_output(const std::string& kind, const std::string& message, json extra = json::object()) {
    json err = {{"kind", kind}, {"message", message}};
    for (auto& [k, v] : extra.items()) err[k] = v;
    return {{"ok", false}, {"error", err}};
}

// Schema reader that collects every field problem before failing.
class Params {
public:
    explicit Params(const json& j) : j_(j.is_null() ? empty_ : j) {
        if (!j_.is_object()) fail("params", "must be a JSON object");
    }

    bool has(const char* key) const { return j_.is_object() && j_.contains(key) && !j_[key].is_null(); }
    const json& raw(const char* key) const { return j_[key]; }

    std::string text(const char* key, std::optional<std::string> def = std::nullopt) {
        if (!has(key)) {
            if (def) return *def;
            fail(key, "is required");
            return {};
        }
        const auto& v = j_[key];
        if (!v.is_string()) {
            fail(key, "must be a string");
            return {};
        }
        auto s = v.get<std::string>();
        const auto b = s.find_first_not_of(" \t\r\n");
        const auto e = s.find_last_not_of(" \t\r\n");
        s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
        if (s.empty() && !def) fail(key, "must not be empty");
        return s;
    }

    std::int64_t integer(const char* key, std::int64_t lo, std::int64_t hi, std::optional<std::int64_t> def = std::nullopt) {
        if (!has(key)) {
            if (def) return *def;
            fail(key, "is required");
            return lo;
        }
        const auto parsed = as_integer(j_[key]);
        if (!parsed || *parsed < lo || *parsed > hi) {
            fail(key, "must be an integer between " + std::to_string(lo) + " and " + std::to_string(hi));
            return lo;
        }
        return *parsed;
    }

    bool flag(const char* key, bool def) {
        if (!has(key)) return def;
        const auto& v = j_[key];
        if (v.is_boolean()) return v.get<bool>();
        if (v.is_string() && (v == "true" || v == "false")) return v == "true";
        fail(key, "must be a boolean");
        return def;
    }

    static std::optional<std::int64_t> as_integer(const json& v) {
        if (v.is_number_integer()) return v.get<std::int64_t>();
        if (v.is_number_float()) {
            const double d = v.get<double>();
            if (d == static_cast<double>(static_cast<std::int64_t>(d))) return static_cast<std::int64_t>(d);
            return std::nullopt;
        }
        if (v.is_boolean()) return v.get<bool>() ? 1 : 0;
        if (v.is_string()) {
            const auto s = v.get<std::string>();
            if (s.empty() || s.size() > 18) return std::nullopt;
            std::size_t i = s[0] == '-' ? 1 : 0;
            if (i == s.size()) return std::nullopt;
            for (std::size_t k = i; k < s.size(); ++k) {
                if (!std::isdigit(static_cast<unsigned char>(s[k]))) return std::nullopt;
            }
            return std::stoll(s);
        }
        return std::nullopt;
    }

    void fail(const std::string& field, const std::string& message) { errors_.push_back({field, message}); }
    void check(const std::string& kind = "validation") const {
        if (!errors_.empty()) throw ValidationError(errors_, kind);
    }
    bool ok() const { return errors_.empty(); }

private:
    static inline const json empty_ = json::object();
    const json& j_;
    std::vector<FieldError> errors_;
};

// ---------------------------------------------------------------- Modbus

struct ModbusTarget {
    modbus::ConnectionParams conn;
    json params;
};

ModbusTarget modbus_target(Params& p, const std::string& action) {
    ModbusTarget t;
    t.conn.host = p.text("host");
    t.conn.port = static_cast<std::uint16_t>(p.integer("port", 1, 65535, modbus::default_port));
    t.conn.unit_id = static_cast<std::uint8_t>(p.integer("unit", 0, 255, 1));
    t.conn.timeout = std::chrono::milliseconds(p.integer("timeout_ms", 1, 60000, 1000));
    t.conn.retries = static_cast<unsigned>(p.integer("retries", 0, 10, 1));
    t.params = {{"action", action},
                {"host", t.conn.host},
                {"port", t.conn.port},
                {"unit", t.conn.unit_id},
                {"timeout_ms", t.conn.timeout.count()},
                {"retries", t.conn.retries}};
    return t;
}

modbus::DataType data_type(Params& p) {
    const auto text = p.text("type");
    const auto t = modbus::parse_data_type(text);
    if (!t && !text.empty()) p.fail("type", "must be one of coil, discrete-input, holding-register, input-register");
    return t.value_or(modbus::DataType::HoldingRegister);
}

std::uint16_t address(Params& p, const char* key = "address", std::optional<std::int64_t> def = std::nullopt) {
    if (std::string_view(key) == "address" && !p.has("address") && p.has("addr"))
        return static_cast<std::uint16_t>(p.integer("addr", 0, 65535));
    return static_cast<std::uint16_t>(p.integer(key, 0, 65535, def));
}

json optional_values(const std::vector<std::optional<std::uint16_t>>& values) {
    auto out = json::array();
    for (const auto& v : values) out.push_back(v ? json(*v) : json());
    return out;
}

std::string type_name(modbus::DataType t) {
    return std::string(modbus::to_string(t));
}

void modbus_failure(ActionResult& r, const modbus::ModbusError& e) {
    const auto kind = kebab(modbus::to_string(e.kind()));
    json extra = json::object();
    if (e.kind() == modbus::ErrorKind::ExceptionResponse) extra["exception_code"] = e.exception_code();
    auto out = error_output(kind, e.what(), extra);
    for (auto& [k, v] : r.output.items()) out[k] = v;  // keep partial data such as "before"
    out["ok"] = false;
    r.output = out;
    r.outcome = outcome_for_kind(kind);
    r.text = "error (" + kind + "): " + e.what();
}

void modbus_action(ActionResult& r, const std::string& action, const json& raw) {
    Params p(raw);
    auto target = modbus_target(p, action);
    auto& params = target.params;
    const auto& conn = target.conn;

    if (action == "read") {
        const auto type = data_type(p);
        const auto addr = address(p);
        const auto count = p.integer("count", 1, 2000, 1);
        if (p.ok() && addr + count - 1 > 65535) p.fail("count", "address + count exceeds 65536");
        p.check();
        params["type"] = type_name(type);
        params["address"] = addr;
        params["count"] = count;
        r.params = params;
        try {
            const auto values = modbus::read_values(conn, type, addr, static_cast<std::size_t>(count));
            r.output = {{"ok", true}, {"values", values}};
            std::ostringstream text;
            for (std::size_t i = 0; i < values.size(); ++i)
                text << (i ? "\n" : "") << type_name(type) << "[" << addr + i << "] = " << values[i];
            r.text = text.str();
        } catch (const modbus::ModbusError& e) {
            modbus_failure(r, e);
        }
        return;
    }

    if (action == "write") {
        const auto type = data_type(p);
        const auto addr = address(p);
        std::vector<std::uint16_t> values;
        const bool coil = type == modbus::DataType::Coil;
        auto take = [&](const json& v, const std::string& field) {
            const auto n = Params::as_integer(v);
            if (!n || *n < 0 || *n > (coil ? 1 : 65535)) {
                p.fail(field, coil ? "coil values must be 0/1 or true/false" : "register values must be integers 0-65535");
                return;
            }
            values.push_back(static_cast<std::uint16_t>(*n));
        };
        if (p.has("values")) {
            const auto& arr = p.raw("values");
            if (!arr.is_array() || arr.empty() || arr.size() > 1968) p.fail("values", "must be a non-empty array");
            else
                for (std::size_t i = 0; i < arr.size(); ++i) take(arr[i], "values[" + std::to_string(i) + "]");
        } else if (p.has("value")) {
            take(p.raw("value"), "value");
        } else {
            p.fail("value", "is required");
        }
        if (type == modbus::DataType::DiscreteInput || type == modbus::DataType::InputRegister)
            p.fail("type", "discrete inputs and input registers are read-only");
        if (!coil && values.size() > 123) p.fail("values", "at most 123 registers per write");
        if (p.ok() && addr + values.size() - 1 > 65535) p.fail("values", "address + count exceeds 65536");
        const bool readback = p.flag("readback", true);
        p.check();
        params["type"] = type_name(type);
        params["address"] = addr;
        params["values"] = values;
        params["readback"] = readback;
        r.params = params;
        r.output = json::object();
        try {
            modbus::Client client(conn);
            if (readback) {
                try {
                    r.output["before"] = client.read(type, addr, values.size());
                } catch (const modbus::ModbusError&) {
                    // "before" stays unknown; the write itself decides the outcome.
                }
            }
            const auto ack = client.write(type, addr, values);
            r.output["ok"] = true;
            r.output["written"] = ack.count;
            std::ostringstream text;
            text << "wrote " << ack.count << " value(s) to unit " << int(conn.unit_id) << " " << type_name(type) << " " << addr;
            if (readback) {
                const auto after = client.read(type, addr, values.size());
                r.output["after"] = after;
                text << "; readback:";
                for (auto v : after) text << " " << v;
            }
            r.text = text.str();
        } catch (const modbus::ModbusError& e) {
            modbus_failure(r, e);
        }
        return;
    }

    if (action == "enumerate") {
        const auto type = data_type(p);
        const auto start = address(p, "start", 0);
        std::int64_t end = start;
        if (p.has("end")) end = p.integer("end", 0, 65535);
        else end = start + p.integer("count", 1, 65536, 100) - 1;
        if (p.ok() && (end < start || end > 65535)) p.fail("end", "must be >= start and <= 65535");
        p.check();
        params["type"] = type_name(type);
        params["start"] = start;
        params["end"] = end;
        params["count"] = end - start + 1;
        r.params = params;
        try {
            const auto map = modbus::enumerate_addresses(conn, type, start, static_cast<std::uint16_t>(end));
            auto entries = json::array();
            std::size_t readable = 0;
            for (const auto& [a, v] : map) {
                entries.push_back({{"address", a}, {"value", v ? json(*v) : json()}});
                if (v) ++readable;
            }
            r.output = {{"ok", true}, {"entries", entries}, {"readable", readable}};
            r.text = std::to_string(readable) + " of " + std::to_string(map.size()) + " " + type_name(type) +
                     " address(es) readable in " + std::to_string(start) + "-" + std::to_string(end);
        } catch (const modbus::ModbusError& e) {
            modbus_failure(r, e);
        }
        return;
    }

    if (action == "scan-units") {
        std::int64_t first = 1, last = 247;
        if (p.has("range")) {
            const auto spec = p.text("range");
            const auto dash = spec.find('-');
            const auto lo = Params::as_integer(json(spec.substr(0, dash)));
            const auto hi = dash == std::string::npos ? lo : Params::as_integer(json(spec.substr(dash + 1)));
            if (!lo || !hi || *lo < 0 || *hi > 255 || *lo > *hi) p.fail("range", "must look like 1-15 within 0-255");
            else first = *lo, last = *hi;
        } else {
            first = p.integer("first", 0, 255, 1);
            last = p.integer("last", 0, 255, 247);
            if (p.ok() && first > last) p.fail("last", "must be >= first");
        }
        const auto concurrency = p.integer("concurrency", 1, 64, modbus::default_scan_concurrency);
        p.check();
        params.erase("unit");
        params["first"] = first;
        params["last"] = last;
        params["concurrency"] = concurrency;
        r.params = params;
        const auto report = modbus::scan_unit_ids(conn, static_cast<std::uint8_t>(first), static_cast<std::uint8_t>(last),
                                                  static_cast<unsigned>(concurrency));
        auto units = json::array();
        bool all_failed = !report.units.empty();
        std::string first_error;
        for (const auto& u : report.units) {
            json types = json::array();
            for (auto t : u.data_types) types.push_back(type_name(t));
            json offsets = json::object();
            for (const auto& [t, offs] : u.responding_offsets) offsets[type_name(t)] = offs;
            json entry = {{"unit", u.unit_id},
                          {"active", u.active},
                          {"answered_exception", u.answered_exception},
                          {"data_types", types},
                          {"responding_offsets", offsets}};
            if (!u.error.empty()) entry["error"] = u.error;
            units.push_back(std::move(entry));
            if (u.active || u.error.empty()) all_failed = false;
            else if (first_error.empty()) first_error = u.error;
        }
        const auto active = report.active_units();
        if (all_failed) {
            const bool refused = first_error.find("refused") != std::string::npos;
            r.output = error_output(refused ? "connection-refused" : "timeout", first_error);
            r.output["units"] = units;
            r.outcome = Outcome::Unreachable;
            r.text = "error: " + first_error;
            return;
        }
        r.output = {{"ok", true}, {"active_units", active}, {"units", units}, {"probes", report.probes.size()}};
        std::ostringstream text;
        text << "active units:";
        if (active.empty()) text << " none";
        for (auto u : active) {
            text << "\n  unit " << int(u) << ":";
            for (auto t : report.find(u)->data_types) text << " " << type_name(t);
        }
        r.text = text.str();
        return;
    }

    if (action == "scan-range") {
        const auto type = data_type(p);
        const auto start = address(p, "start", 0);
        const auto end = p.integer("end", 0, 65535);
        const auto chunk = p.integer("chunk", 1, 65536, modbus::default_chunk_size);
        if (p.ok() && end < start) p.fail("end", "must be >= start");
        p.check();
        params["type"] = type_name(type);
        params["start"] = start;
        params["end"] = end;
        params["chunk"] = chunk;
        r.params = params;
        try {
            const auto report = modbus::scan_register_range(conn, type, start, static_cast<std::uint16_t>(end),
                                                            static_cast<std::uint32_t>(chunk));
            auto chunks = json::array();
            std::size_t accessible = 0;
            std::ostringstream text;
            for (const auto& c : report.chunks) {
                chunks.push_back({{"start", c.start_address},
                                  {"count", c.requested_count},
                                  {"status", modbus::to_string(c.status)},
                                  {"values", optional_values(c.values)}});
                if (c.status != modbus::ChunkStatus::Inaccessible) ++accessible;
                text << (text.tellp() > 0 ? "\n" : "") << type_name(type) << " " << c.start_address << "-"
                     << c.start_address + c.requested_count - 1 << ": " << modbus::to_string(c.status);
            }
            r.output = {{"ok", true}, {"type", type_name(type)}, {"chunk_size", report.chunk_size}, {"chunks", chunks},
                        {"accessible_chunks", accessible}};
            r.text = text.str();
        } catch (const modbus::ModbusError& e) {
            modbus_failure(r, e);
        }
        return;
    }
}

// ---------------------------------------------------------------- OPC UA

json value_json(const opcua::Value& v) {
    return std::visit(
        [](const auto& x) -> json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, opcua::DateTime>) return x.to_iso8601();
            else return x;
        },
        v);
}

std::optional<opcua::Value> value_from_json(opcua::ValueType type, const json& v) {
    using opcua::ValueType;
    if (v.is_string()) return opcua::parse_value(type, v.get<std::string>());
    switch (type) {
        case ValueType::Boolean:
            if (v.is_boolean()) return opcua::Value(v.get<bool>());
            if (v.is_number_integer() && (v == 0 || v == 1)) return opcua::Value(v.get<int>() == 1);
            return std::nullopt;
        case ValueType::Int32: {
            const auto n = Params::as_integer(v);
            if (!n || v.is_boolean() || *n < INT32_MIN || *n > INT32_MAX) return std::nullopt;
            return opcua::Value(static_cast<std::int32_t>(*n));
        }
        case ValueType::Double:
            if (v.is_number()) return opcua::Value(v.get<double>());
            return std::nullopt;
        case ValueType::String: return opcua::Value(v.dump());
        case ValueType::DateTime: return std::nullopt;
    }
    return std::nullopt;
}

void opcua_failure(ActionResult& r, const opcua::OpcUaError& e) {
    if (e.kind() == opcua::ErrorKind::InvalidUrl) throw ValidationError(std::vector<FieldError>{{"url", e.what()}});
    if (e.kind() == opcua::ErrorKind::InvalidArgument) throw ValidationError(std::vector<FieldError>{{"params", e.what()}});
    const auto kind = kebab(opcua::to_string(e.kind()));
    json extra = json::object();
    if (e.status() != 0) extra["status"] = opcua::status::name(e.status());
    auto out = error_output(kind, e.what(), extra);
    for (auto& [k, v] : r.output.items()) out[k] = v;
    out["ok"] = false;
    r.output = out;
    r.outcome = outcome_for_kind(kind);
    r.text = "error (" + kind + "): " + e.what();
}

json tree_json(const opcua::NodeDescriptor& n) {
    json j = {{"node_id", n.node_id.to_string()},
              {"browse_name", n.browse_name},
              {"display_name", n.display_name},
              {"namespace", n.namespace_index},
              {"node_class", opcua::to_string(n.node_class)}};
    auto children = json::array();
    for (const auto& c : n.children) children.push_back(tree_json(c));
    j["children"] = children;
    return j;
}

void tree_text(std::ostringstream& out, const opcua::NodeDescriptor& n, int indent) {
    for (const auto& c : n.children) {
        out << "\n" << std::string(static_cast<std::size_t>(indent) * 2, ' ') << c.display_name << " (" << c.node_id.to_string()
            << ", " << opcua::to_string(c.node_class) << ")";
        tree_text(out, c, indent + 1);
    }
}

opcua::NodeId node_id(Params& p, const char* key, std::optional<std::string> def = std::nullopt) {
    const auto text = p.text(key, def);
    if (text.empty()) return {};
    const auto id = opcua::NodeId::parse(text);
    if (!id) {
        p.fail(key, "must be a NodeId such as ns=2;i=20");
        return {};
    }
    return *id;
}

void opcua_action(ActionResult& r, const std::string& action, const json& raw) {
    Params p(raw);
    const auto url = p.text("url");
    if (!url.empty()) {
        try {
            opcua::EndpointUrl::parse(url);
        } catch (const opcua::OpcUaError& e) {
            p.fail("url", e.what());
        }
    }
    opcua::ClientOptions options;
    options.timeout = std::chrono::milliseconds(p.integer("timeout_ms", 1, 60000, 3000));
    json params = {{"action", action}, {"url", url}, {"timeout_ms", options.timeout.count()}};
    if (action != "endpoints" && (p.has("username") || p.has("password"))) {
        opcua::Credentials c;
        c.username = p.text("username");
        c.password = p.text("password", std::string());
        options.credentials = c;
        params["username"] = c.username;
    }

    if (action == "endpoints") {
        p.check();
        r.params = params;
        try {
            const auto eps = opcua::get_endpoints(url, options.timeout);
            auto list = json::array();
            std::ostringstream text;
            for (const auto& ep : eps) {
                json tokens = json::array();
                for (auto t : ep.token_types) tokens.push_back(opcua::to_string(t));
                list.push_back({{"url", ep.url},
                                {"security_policy", ep.security_policy},
                                {"security_mode", opcua::to_string(ep.security_mode)},
                                {"token_types", tokens}});
                text << (text.tellp() > 0 ? "\n" : "") << ep.url << "  policy=" << ep.security_policy
                     << " mode=" << opcua::to_string(ep.security_mode) << " tokens=";
                for (std::size_t i = 0; i < tokens.size(); ++i) text << (i ? "," : "") << tokens[i].get<std::string>();
            }
            r.output = {{"ok", true}, {"endpoints", list}};
            r.text = text.str();
        } catch (const opcua::OpcUaError& e) {
            opcua_failure(r, e);
        }
        return;
    }

    if (action == "browse") {
        const auto root = node_id(p, "node_id", std::string("i=85"));
        const auto depth = p.integer("depth", 0, 64, opcua::default_browse_depth);
        const auto max_nodes = p.integer("max_nodes", 1, 100000, static_cast<std::int64_t>(opcua::default_browse_max_nodes));
        p.check();
        params["node_id"] = root.to_string();
        params["depth"] = depth;
        params["max_nodes"] = max_nodes;
        r.params = params;
        try {
            auto session = opcua::Session::establish(url, options);
            const auto tree = opcua::browse_nodes(session, root, static_cast<int>(depth), static_cast<std::size_t>(max_nodes));
            r.output = {{"ok", true},
                        {"identity", session.identity()},
                        {"node_count", tree.node_count},
                        {"truncated", tree.truncated},
                        {"tree", tree_json(tree.root)}};
            std::ostringstream text;
            text << tree.root.display_name << " (" << tree.root.node_id.to_string() << ")";
            tree_text(text, tree.root, 1);
            text << "\n" << tree.node_count << " node(s)" << (tree.truncated ? ", truncated" : "");
            r.text = text.str();
            session.close();
        } catch (const opcua::OpcUaError& e) {
            opcua_failure(r, e);
        }
        return;
    }

    if (action == "enumerate") {
        const auto ns = p.integer("namespace", 0, 65535, 2);
        p.check();
        params["namespace"] = ns;
        r.params = params;
        try {
            auto session = opcua::Session::establish(url, options);
            const auto vars = opcua::enumerate_variables(session, static_cast<std::uint16_t>(ns));
            auto list = json::array();
            std::ostringstream text;
            for (const auto& v : vars) {
                const std::string type = v.data_type ? opcua::to_string(*v.data_type) : v.data_type_id.to_string();
                list.push_back({{"node_id", v.node_id.to_string()},
                                {"browse_name", v.browse_name},
                                {"display_name", v.display_name},
                                {"data_type", type},
                                {"readable", v.readable},
                                {"writable", v.writable},
                                {"value", v.current_value ? value_json(*v.current_value) : json()},
                                {"status", opcua::status::name(v.value_status)}});
                text << (text.tellp() > 0 ? "\n" : "") << v.node_id.to_string() << "  " << v.display_name << "  " << type << "  "
                     << (v.readable ? "r" : "-") << (v.writable ? "w" : "-") << "  "
                     << (v.current_value ? opcua::render(*v.current_value) : "");
            }
            r.output = {{"ok", true}, {"identity", session.identity()}, {"variables", list}};
            r.text = text.str();
            session.close();
        } catch (const opcua::OpcUaError& e) {
            opcua_failure(r, e);
        }
        return;
    }

    if (action == "read") {
        const auto node = node_id(p, "node_id");
        p.check();
        params["node_id"] = node.to_string();
        r.params = params;
        try {
            auto session = opcua::Session::establish(url, options);
            const auto value = opcua::read_node(session, node);
            r.output = {{"ok", true},
                        {"identity", session.identity()},
                        {"value", value_json(value)},
                        {"data_type", opcua::to_string(opcua::type_of(value))}};
            r.text = node.to_string() + " = " + opcua::render(value) + " (" + opcua::to_string(opcua::type_of(value)) + ")";
            session.close();
        } catch (const opcua::OpcUaError& e) {
            opcua_failure(r, e);
        }
        return;
    }

    if (action == "write") {
        const auto node = node_id(p, "node_id");
        if (!p.has("value")) p.fail("value", "is required");
        std::optional<opcua::ValueType> type;
        if (p.has("type")) {
            type = opcua::parse_value_type(p.text("type"));
            if (!type) p.fail("type", "must be one of Boolean, Int32, Double, String, DateTime");
        }
        const bool readback = p.flag("readback", true);
        std::optional<opcua::Value> value;
        if (type && p.has("value")) {
            value = value_from_json(*type, p.raw("value"));
            if (!value) p.fail("value", std::string("does not fit ") + opcua::to_string(*type));
        }
        p.check();
        params["node_id"] = node.to_string();
        params["value"] = p.raw("value");
        if (type) params["type"] = opcua::to_string(*type);
        params["readback"] = readback;
        r.params = params;
        r.output = json::object();
        try {
            auto session = opcua::Session::establish(url, options);
            if (!value || readback) {
                // The current value supplies the type when none was given.
                const auto before = opcua::read_node(session, node);
                r.output["before"] = value_json(before);
                if (!value) {
                    type = opcua::type_of(before);
                    value = value_from_json(*type, p.raw("value"));
                    if (!value) throw ValidationError(std::vector<FieldError>{{"value", std::string("does not fit ") + opcua::to_string(*type)}});
                    r.params["type"] = opcua::to_string(*type);
                }
            }
            opcua::write_node(session, node, *value);
            r.output["ok"] = true;
            r.output["identity"] = session.identity();
            r.output["written"] = value_json(*value);
            r.text = "wrote " + opcua::render(*value) + " to " + node.to_string();
            if (readback) {
                const auto after = opcua::read_node(session, node);
                r.output["readback"] = value_json(after);
                r.text += "; readback: " + opcua::render(after);
            }
            session.close();
        } catch (const opcua::OpcUaError& e) {
            opcua_failure(r, e);
        }
        return;
    }
}

// ---------------------------------------------------------------- scan

std::string spec_text(Params& p, const char* key) {
    if (!p.has(key)) {
        p.fail(key, "is required");
        return {};
    }
    const auto& v = p.raw(key);
    if (v.is_string()) return p.text(key);
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_array()) {
        std::string out;
        for (const auto& x : v) {
            if (!x.is_string() && !x.is_number_integer()) {
                p.fail(key, "array entries must be strings or integers");
                return {};
            }
            out += (out.empty() ? "" : ",") + (x.is_string() ? x.get<std::string>() : std::to_string(x.get<std::int64_t>()));
        }
        return out;
    }
    p.fail(key, "must be a string");
    return {};
}

void scan_action(ActionResult& r, const json& raw, const ExecutorLimits& limits) {
    Params p(raw);
    const auto hosts = spec_text(p, "hosts");
    const auto ports = spec_text(p, "ports");
    netscan::ScanConfig cfg;
    cfg.timeout = std::chrono::milliseconds(p.integer("timeout_ms", 1, 60000, 500));
    cfg.concurrency = static_cast<std::size_t>(p.integer("concurrency", 1, 4096, 256));
    cfg.retries = static_cast<unsigned>(p.integer("retries", 0, 5, 0));
    cfg.classify = p.flag("classify", true);
    std::chrono::milliseconds deadline = limits.scan_cap;
    if (p.has("deadline_ms")) deadline = std::min(deadline, std::chrono::milliseconds(p.integer("deadline_ms", 1, 86400000)));
    cfg.deadline = deadline;
    p.check();

    netscan::ScanTarget target;
    try {
        target = netscan::parse_targets(hosts, ports);
    } catch (const netscan::ScanError& e) {
        const bool port_problem = e.kind() == netscan::ErrorKind::InvalidPortSpec;
        throw ValidationError(std::vector<FieldError>{{port_problem ? "ports" : "hosts", e.what()}}, netscan::to_string(e.kind()));
    }
    r.params = {{"hosts", hosts},
                {"ports", ports},
                {"timeout_ms", cfg.timeout.count()},
                {"concurrency", cfg.concurrency},
                {"retries", cfg.retries},
                {"classify", cfg.classify},
                {"deadline_ms", deadline.count()}};
    auto report = netscan::run_scan(target, cfg);
    report.host_spec = hosts;
    report.port_spec = ports;
    r.output = netscan::to_json(report);
    r.output["ok"] = true;
    std::ostringstream text;
    for (const auto& f : report.findings) text << f.host << ":" << f.port << "  open  " << netscan::to_string(f.service) << "\n";
    text << report.findings.size() << " open of " << report.probed << " probed";
    if (report.deadline_hit) text << " (scan cap reached)";
    r.text = text.str();
}

}  // namespace

ValidationError::ValidationError(std::vector<FieldError> fields, const std::string& kind)
    : std::invalid_argument([&] {
          std::string msg = "invalid parameters";
          for (const auto& f : fields) msg += "; " + f.field + ": " + f.message;
          return msg;
      }()),
      fields_(std::move(fields)),
      kind_(kind) {}

const char* to_string(Tool t) noexcept {
    switch (t) {
        case Tool::Scan: return "scan";
        case Tool::Modbus: return "modbus";
        case Tool::OpcUa: return "opcua";
    }
    return "scan";
}

std::optional<Tool> parse_tool(std::string_view text) noexcept {
    for (auto t : {Tool::Scan, Tool::Modbus, Tool::OpcUa}) {
        if (text == to_string(t)) return t;
    }
    return std::nullopt;
}

evidence::Category category_of(Tool t) noexcept {
    switch (t) {
        case Tool::Scan: return evidence::Category::Scan;
        case Tool::Modbus: return evidence::Category::Modbus;
        case Tool::OpcUa: return evidence::Category::OpcUa;
    }
    return evidence::Category::Scan;
}

const std::vector<std::string>& actions_for(Tool t) {
    static const std::vector<std::string> scan = {"run"};
    static const std::vector<std::string> modbus = {"read", "write", "enumerate", "scan-units", "scan-range"};
    static const std::vector<std::string> opcua = {"endpoints", "browse", "enumerate", "read", "write"};
    switch (t) {
        case Tool::Scan: return scan;
        case Tool::Modbus: return modbus;
        case Tool::OpcUa: return opcua;
    }
    return scan;
}

const char* to_string(Outcome o) noexcept {
    switch (o) {
        case Outcome::Ok: return "ok";
        case Outcome::TargetError: return "target-error";
        case Outcome::Unreachable: return "unreachable";
    }
    return "ok";
}

ActionResult execute(Tool tool, const std::string& action, const json& params, const ExecutorLimits& limits) {
    const auto& verbs = actions_for(tool);
    if (std::find(verbs.begin(), verbs.end(), action) == verbs.end())
        throw ValidationError(std::vector<FieldError>{{"action", "unknown " + std::string(to_string(tool)) + " action '" + action + "'"}});
    ActionResult r;
    r.tool = tool;
    r.action = action;
    const auto started = Clock::now();
    try {
        switch (tool) {
            case Tool::Scan: scan_action(r, params, limits); break;
            case Tool::Modbus: modbus_action(r, action, params); break;
            case Tool::OpcUa: opcua_action(r, action, params); break;
        }
    } catch (const modbus::ModbusError& e) {
        if (e.kind() != modbus::ErrorKind::InvalidArgument) throw;
        // Module precondition hit after schema validation passed: a schema gap.
        throw ValidationError(std::vector<FieldError>{{"params", e.what()}}, "schema-gap");
    } catch (const netscan::ScanError& e) {
        throw ValidationError(std::vector<FieldError>{{"params", e.what()}}, netscan::to_string(e.kind()));
    }
    r.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started);
    return r;
}

json response_record(const ActionResult& result, const std::optional<std::string>& evidence_id) {
    return {{"ok", result.output.value("ok", false)},
            {"status", to_string(result.outcome)},
            {"tool", to_string(result.tool)},
            {"action", result.action},
            {"params", result.params},
            {"result", result.output},
            {"text", result.text},
            {"elapsed_ms", result.elapsed.count()},
            {"evidence_id", evidence_id ? json(*evidence_id) : json()}};
}

json response_record(const evidence::EvidenceItem& item) {
    const bool ok = item.output.value("ok", false);
    Outcome outcome = Outcome::Ok;
    if (!ok) {
        const auto& err = item.output.contains("error") ? item.output["error"] : json();
        outcome = outcome_for_kind(err.is_object() ? err.value("kind", std::string()) : std::string());
    }
    return {{"ok", ok},
            {"status", to_string(outcome)},
            {"tool", evidence::to_string(item.category)},
            {"action", item.params.value("action", std::string("run"))},
            {"params", item.params},
            {"result", item.output},
            {"text", "replayed from evidence " + item.id},
            {"elapsed_ms", 0},
            {"evidence_id", item.id}};
}

json validation_body(const ValidationError& e) {
    auto fields = json::array();
    for (const auto& f : e.fields()) fields.push_back({{"field", f.field}, {"message", f.message}});
    return {{"ok", false}, {"error", {{"kind", e.kind()}, {"message", e.what()}, {"fields", fields}}}};
}

ToolResponse run_tool(const ToolCall& call, evidence::EvidenceStore* inbox, const ExecutorLimits& limits) {
    ToolResponse resp;
    if (inbox && !call.idempotency_key.empty()) {
        if (auto existing = inbox->find_by_key(call.idempotency_key)) {
            resp.record = response_record(*existing);
            resp.outcome = existing->output.value("ok", false) ? Outcome::Ok : Outcome::TargetError;
            if (resp.record["status"] == "unreachable") resp.outcome = Outcome::Unreachable;
            resp.replayed = true;
            return resp;
        }
    }
    const auto result = execute(call.tool, call.action, call.params, limits);
    std::optional<std::string> id;
    if (call.store_evidence && inbox) {
        const auto item = inbox->append(category_of(call.tool), result.params, result.output, call.idempotency_key);
        id = item.id;
    }
    resp.record = response_record(result, id);
    resp.outcome = result.outcome;
    return resp;
}

}  // namespace otprobe::service
