#include "otprobe/evidence/facts.hpp"

#include <algorithm>

namespace otprobe::evidence {

namespace {

using nlohmann::json;

void add_unique(std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

bool output_ok(const json& output) {
    if (output.contains("ok") && output["ok"].is_boolean()) return output["ok"].get<bool>();
    return !output.contains("error");
}

std::string error_message(const json& output) {
    if (!output.contains("error")) return "failed";
    const auto& e = output["error"];
    if (e.is_string()) return e.get<std::string>();
    if (e.is_object()) return e.value("message", e.value("kind", std::string("failed")));
    return "failed";
}

template <typename T>
std::optional<T> opt_number(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer()) return std::nullopt;
    const auto v = j[key].get<std::int64_t>();
    if (v < 0 || v > static_cast<std::int64_t>(std::numeric_limits<T>::max())) return std::nullopt;
    return static_cast<T>(v);
}

std::string join_units(const std::set<std::uint8_t>& units) {
    std::string out;
    for (auto u : units) out += (out.empty() ? "" : ", ") + std::to_string(u);
    return out;
}

template <typename Summary>
Summary& summary_for(std::vector<Summary>& list, const std::string& target) {
    for (auto& s : list) {
        if (s.target == target) return s;
    }
    list.push_back(Summary{});
    list.back().target = target;
    return list.back();
}

struct Catalog {
    const char* id;
    const char* name;
};

constexpr Catalog catalog[] = {
    {"M0800", "Authorization Enforcement"},
    {"M0801", "Access Management"},
    {"M0802", "Communication Authenticity"},
    {"M0804", "Human User Authentication"},
    {"M0807", "Network Allowlists"},
    {"M0808", "Encrypt Network Traffic"},
    {"M0812", "Safety Instrumented Systems"},
    {"M0813", "Software Process and Device Authentication"},
    {"M0930", "Network Segmentation"},
    {"M0937", "Filter Network Traffic"},
    {"M0942", "Disable or Remove Feature or Program"},
};

}  // namespace

std::size_t ModbusSummary::successful(const std::string& action) const {
    return static_cast<std::size_t>(
        std::count_if(actions.begin(), actions.end(), [&](const ModbusAction& a) { return a.ok && a.action == action; }));
}

std::size_t OpcUaSummary::successful(const std::string& action) const {
    return static_cast<std::size_t>(
        std::count_if(actions.begin(), actions.end(), [&](const OpcUaAction& a) { return a.ok && a.action == action; }));
}

std::vector<TargetFacts> extract_scan_facts(const std::vector<EvidenceItem>& items, std::size_t* skipped) {
    std::vector<TargetFacts> out;
    std::size_t bad = 0;
    for (const auto& item : items) {
        if (item.category != Category::Scan) continue;
        const auto& findings = item.output.contains("findings") ? item.output["findings"] : json();
        if (!findings.is_array()) {
            ++bad;
            continue;
        }
        for (const auto& f : findings) {
            if (!f.is_object() || !f.contains("host") || !f["host"].is_string() || !opt_number<std::uint16_t>(f, "port")) {
                ++bad;
                continue;
            }
            const auto host = f["host"].get<std::string>();
            auto it = std::find_if(out.begin(), out.end(), [&](const TargetFacts& t) { return t.host == host; });
            if (it == out.end()) {
                out.push_back(TargetFacts{host, {}, {}, {}});
                it = out.end() - 1;
            }
            const PortFact pf{*opt_number<std::uint16_t>(f, "port"), f.value("service", std::string("unknown"))};
            auto existing = std::find_if(it->ports.begin(), it->ports.end(), [&](const PortFact& p) { return p.port == pf.port; });
            if (existing == it->ports.end()) it->ports.push_back(pf);
            else if (existing->service == "unknown") existing->service = pf.service;
            add_unique(it->evidence_ids, item.id);
        }
    }
    for (auto& t : out) {
        std::sort(t.ports.begin(), t.ports.end());
        for (const auto& p : t.ports) {
            if (p.service != "unknown") t.protocols.insert(p.service);
        }
    }
    if (skipped) *skipped += bad;
    return out;
}

std::vector<ModbusSummary> extract_modbus_summary(const std::vector<EvidenceItem>& items, std::size_t* skipped) {
    std::vector<ModbusSummary> out;
    std::size_t bad = 0;
    for (const auto& item : items) {
        if (item.category != Category::Modbus) continue;
        const auto& p = item.params;
        const auto& o = item.output;
        const auto port = opt_number<std::uint16_t>(p, "port");
        if (!p.is_object() || !o.is_object() || !p.contains("action") || !p["action"].is_string() || !p.contains("host") ||
            !p["host"].is_string() || !port) {
            ++bad;
            continue;
        }
        auto& s = summary_for(out, p["host"].get<std::string>() + ":" + std::to_string(*port));
        add_unique(s.evidence_ids, item.id);

        ModbusAction a;
        a.evidence_id = item.id;
        a.timestamp = item.timestamp;
        a.action = p["action"].get<std::string>();
        a.unit = opt_number<std::uint8_t>(p, "unit").value_or(1);
        a.type = p.value("type", std::string());
        a.address = opt_number<std::uint16_t>(p, "address");
        a.count = opt_number<std::uint32_t>(p, "count");
        a.ok = output_ok(o);
        if (!a.ok) a.detail = error_message(o);

        if (a.action == "scan-units") {
            if (!a.address) a.address = opt_number<std::uint16_t>(p, "first");
            if (a.ok) {
                std::set<std::uint8_t> active;
                for (const auto& u : o.value("active_units", json::array())) {
                    if (u.is_number_integer()) active.insert(u.get<std::uint8_t>());
                }
                for (const auto& u : o.value("units", json::array())) {
                    if (!u.is_object() || !u.value("active", false)) continue;
                    const auto id = opt_number<std::uint8_t>(u, "unit");
                    if (!id) continue;
                    for (const auto& t : u.value("data_types", json::array())) {
                        if (t.is_string()) s.unit_types[*id].insert(t.get<std::string>());
                    }
                }
                s.unit_ids.insert(active.begin(), active.end());
                a.values = json(std::vector<int>(active.begin(), active.end()));
                a.detail = active.empty() ? "no active units" : "active units: " + join_units(active);
            }
        } else if (a.action == "read") {
            if (a.ok) {
                a.values = o.value("values", json::array());
                a.detail = "read " + std::to_string(a.values.size()) + " value(s)";
                if (a.address) s.accessed.insert({a.unit, a.type, *a.address, *a.address + std::max<std::uint32_t>(1, a.count.value_or(1)) - 1});
            }
        } else if (a.action == "write") {
            a.values = p.value("values", json::array());
            a.count = static_cast<std::uint32_t>(a.values.size());
            if (o.contains("before")) a.before = o["before"];
            if (o.contains("after")) a.after = o["after"];
            if (a.ok) {
                a.detail = "wrote " + std::to_string(a.values.size()) + " value(s)";
                if (a.address && !a.values.empty())
                    s.accessed.insert({a.unit, a.type, *a.address, *a.address + static_cast<std::uint32_t>(a.values.size()) - 1});
            }
        } else if (a.action == "enumerate") {
            if (!a.address) a.address = opt_number<std::uint16_t>(p, "start");
            if (a.ok) {
                std::size_t readable = 0;
                std::optional<std::uint32_t> lo, hi;
                for (const auto& e : o.value("entries", json::array())) {
                    const auto addr = opt_number<std::uint16_t>(e, "address");
                    if (!addr || !e.contains("value") || e["value"].is_null()) continue;
                    ++readable;
                    lo = std::min<std::uint32_t>(lo.value_or(*addr), *addr);
                    hi = std::max<std::uint32_t>(hi.value_or(*addr), *addr);
                }
                a.detail = std::to_string(readable) + " readable address(es)";
                if (lo) s.accessed.insert({a.unit, a.type, *lo, *hi});
            }
        } else if (a.action == "scan-range") {
            if (!a.address) a.address = opt_number<std::uint16_t>(p, "start");
            if (a.ok) {
                std::size_t accessible = 0, total = 0;
                for (const auto& c : o.value("chunks", json::array())) {
                    ++total;
                    const auto start = opt_number<std::uint16_t>(c, "start");
                    const auto count = opt_number<std::uint32_t>(c, "count");
                    const auto status = c.value("status", std::string());
                    if (!start || !count || *count == 0 || status == "inaccessible") continue;
                    ++accessible;
                    s.accessed.insert({a.unit, a.type, *start, *start + *count - 1});
                }
                a.detail = std::to_string(accessible) + " of " + std::to_string(total) + " chunk(s) readable";
            }
        } else {
            ++bad;
            continue;
        }
        if (a.ok && a.action != "scan-units") s.unit_ids.insert(a.unit);
        if (a.ok && !a.type.empty() && a.action != "scan-units") s.unit_types[a.unit].insert(a.type);
        s.actions.push_back(std::move(a));
    }
    if (skipped) *skipped += bad;
    return out;
}

std::vector<OpcUaSummary> extract_opcua_summary(const std::vector<EvidenceItem>& items, std::size_t* skipped) {
    std::vector<OpcUaSummary> out;
    std::size_t bad = 0;
    for (const auto& item : items) {
        if (item.category != Category::OpcUa) continue;
        const auto& p = item.params;
        const auto& o = item.output;
        if (!p.is_object() || !o.is_object() || !p.contains("action") || !p["action"].is_string() || !p.contains("url") ||
            !p["url"].is_string()) {
            ++bad;
            continue;
        }
        const auto action = p["action"].get<std::string>();
        if (action != "endpoints" && action != "browse" && action != "enumerate" && action != "read" && action != "write") {
            ++bad;
            continue;
        }
        auto& s = summary_for(out, p["url"].get<std::string>());
        add_unique(s.evidence_ids, item.id);

        OpcUaAction a;
        a.evidence_id = item.id;
        a.timestamp = item.timestamp;
        a.action = action;
        a.node_id = p.value("node_id", std::string());
        a.ok = output_ok(o);
        if (!a.ok) a.detail = error_message(o);
        if (a.ok && o.contains("identity") && o["identity"].is_string()) {
            const auto id = o["identity"].get<std::string>();
            s.identities.insert(id);
            if (id == "anonymous") s.anonymous_access = true;
        }
        if (a.ok && action == "endpoints") {
            std::size_t n = 0;
            for (const auto& e : o.value("endpoints", json::array())) {
                if (!e.is_object()) continue;
                ++n;
                s.security_policies.insert(e.value("security_policy", std::string("unknown")));
                for (const auto& t : e.value("token_types", json::array())) {
                    if (!t.is_string()) continue;
                    s.token_types.insert(t.get<std::string>());
                    if (t.get<std::string>() == "Anonymous") s.anonymous_access = true;
                }
            }
            a.detail = std::to_string(n) + " endpoint(s)";
        } else if (a.ok && action == "browse") {
            const auto n = o.value("node_count", std::size_t{0});
            s.browsed_nodes = std::max(s.browsed_nodes.value_or(0), n);
            a.detail = std::to_string(n) + " node(s) browsed" + (o.value("truncated", false) ? " (truncated)" : "");
        } else if (a.ok && action == "enumerate") {
            const auto vars = o.value("variables", json::array());
            std::size_t writable = 0;
            for (const auto& v : vars) {
                if (v.is_object() && v.value("writable", false)) ++writable;
            }
            s.variables = std::max(s.variables.value_or(0), vars.size());
            s.writable_variables = std::max(s.writable_variables, writable);
            a.detail = std::to_string(vars.size()) + " variable(s), " + std::to_string(writable) + " writable";
        } else if (a.ok && action == "read") {
            a.value = o.value("value", json());
            a.detail = "read " + (a.value.is_string() ? a.value.get<std::string>() : a.value.dump());
        } else if (a.ok && action == "write") {
            a.value = p.value("value", json());
            a.detail = "wrote " + (a.value.is_string() ? a.value.get<std::string>() : a.value.dump());
        } else if (action == "write") {
            a.value = p.value("value", json());
        }
        s.actions.push_back(std::move(a));
    }
    if (skipped) *skipped += bad;
    return out;
}

Extraction extract_all(const std::vector<EvidenceItem>& items) {
    Extraction e;
    e.targets = extract_scan_facts(items, &e.skipped);
    e.modbus = extract_modbus_summary(items, &e.skipped);
    e.opcua = extract_opcua_summary(items, &e.skipped);
    return e;
}

const std::vector<MitigationRule>& mitigation_rules() {
    static const std::vector<MitigationRule> rules = {
        {"exposed-modbus", {"M0930", "M0807", "M0937"},
         "Modbus/TCP carries no authentication, so any host that can reach the port can issue commands"},
        {"exposed-opcua", {"M0930", "M0807"}, "OPC UA servers reachable from the assessment network widen the attack surface"},
        {"modbus-unauthenticated-read", {"M0800", "M0808"},
         "Process data was read over Modbus without any authorization check"},
        {"modbus-unauthenticated-write", {"M0802", "M0800", "M0812"},
         "Process values were changed over Modbus without authentication"},
        {"opcua-anonymous-session", {"M0801", "M0804"}, "The OPC UA server accepted sessions without user identity"},
        {"opcua-security-none", {"M0802", "M0808"},
         "OPC UA traffic on a SecurityPolicy None endpoint is neither signed nor encrypted"},
        {"opcua-write", {"M0800", "M0802"}, "Process variables were changed through OPC UA writes"},
        {"non-ics-open-port", {"M0942", "M0937"}, "Services without an industrial role were listening on control-network hosts"},
    };
    return rules;
}

std::string mitigation_name(const std::string& id) {
    for (const auto& c : catalog) {
        if (id == c.id) return c.name;
    }
    return {};
}

std::vector<MitigationEntry> map_mitigations(const std::vector<TargetFacts>& facts, const std::vector<ModbusSummary>& modbus,
                                             const std::vector<OpcUaSummary>& opcua) {
    struct Hit {
        std::string finding;
        std::vector<std::string> evidence;
    };
    std::map<std::string, std::vector<Hit>> hits;  // pattern -> findings, in discovery order
    auto hit = [&](const std::string& pattern, std::string finding, std::vector<std::string> evidence) {
        hits[pattern].push_back({std::move(finding), std::move(evidence)});
    };

    for (const auto& t : facts) {
        for (const auto& p : t.ports) {
            const auto where = t.host + ":" + std::to_string(p.port);
            if (p.service == "modbus") hit("exposed-modbus", "Modbus/TCP service exposed at " + where, t.evidence_ids);
            else if (p.service == "opcua") hit("exposed-opcua", "OPC UA service exposed at " + where, t.evidence_ids);
            else hit("non-ics-open-port", "Open port without an identified industrial service at " + where, t.evidence_ids);
        }
    }
    for (const auto& s : modbus) {
        std::vector<std::string> ok_ids, read_ids;
        for (const auto& a : s.actions) {
            if (!a.ok) continue;
            ok_ids.push_back(a.evidence_id);
            if (a.action == "read" || a.action == "enumerate" || a.action == "scan-range") read_ids.push_back(a.evidence_id);
            if (a.action == "write") {
                std::string what = "Unauthenticated Modbus write to unit " + std::to_string(a.unit);
                if (!a.type.empty()) what += " " + a.type;
                if (a.address) what += " address " + std::to_string(*a.address);
                hit("modbus-unauthenticated-write", what + " at " + s.target + " succeeded", {a.evidence_id});
            }
        }
        if (!ok_ids.empty()) hit("exposed-modbus", "Modbus/TCP service answered requests at " + s.target, ok_ids);
        if (!read_ids.empty())
            hit("modbus-unauthenticated-read",
                std::to_string(read_ids.size()) + " unauthenticated Modbus read operation(s) succeeded at " + s.target, read_ids);
    }
    for (const auto& s : opcua) {
        std::vector<std::string> ok_ids;
        for (const auto& a : s.actions) {
            if (!a.ok) continue;
            ok_ids.push_back(a.evidence_id);
            if (a.action == "write")
                hit("opcua-write", "OPC UA write to " + a.node_id + " at " + s.target + " succeeded", {a.evidence_id});
        }
        if (!ok_ids.empty()) hit("exposed-opcua", "OPC UA server answered requests at " + s.target, ok_ids);
        if (s.anonymous_access) hit("opcua-anonymous-session", "Anonymous OPC UA access accepted at " + s.target, s.evidence_ids);
        if (s.security_policies.count("None"))
            hit("opcua-security-none", "OPC UA endpoint " + s.target + " offers SecurityPolicy None", s.evidence_ids);
    }

    std::map<std::string, MitigationEntry> merged;
    for (const auto& rule : mitigation_rules()) {
        const auto it = hits.find(rule.pattern);
        if (it == hits.end()) continue;
        for (const auto& id : rule.ids) {
            auto& m = merged[id];
            if (m.id.empty()) {
                m.id = id;
                m.name = mitigation_name(id);
                m.rationale = rule.why + " (" + it->second.front().finding + ").";
            }
            for (const auto& h : it->second) {
                add_unique(m.findings, h.finding);
                for (const auto& e : h.evidence) add_unique(m.evidence_ids, e);
            }
        }
    }
    std::vector<MitigationEntry> out;
    for (auto& [id, m] : merged) out.push_back(std::move(m));
    return out;
}

json to_json(const TargetFacts& f) {
    auto ports = json::array();
    for (const auto& p : f.ports) ports.push_back({{"port", p.port}, {"service", p.service}});
    return {{"host", f.host}, {"ports", ports}, {"protocols", f.protocols}, {"evidence_ids", f.evidence_ids}};
}

json to_json(const ModbusSummary& s, bool include_actions) {
    auto types = json::object();
    for (const auto& [unit, t] : s.unit_types) types[std::to_string(unit)] = t;
    auto ranges = json::array();
    for (const auto& r : s.accessed) ranges.push_back({{"unit", r.unit}, {"type", r.type}, {"start", r.start}, {"end", r.end}});
    json j = {{"target", s.target},
              {"unit_ids", s.unit_ids},
              {"unit_types", types},
              {"accessed_ranges", ranges},
              {"evidence_ids", s.evidence_ids}};
    json counts = json::object();
    for (const auto& a : s.actions) {
        auto& c = counts[a.action];
        if (c.is_null()) c = {{"succeeded", 0}, {"failed", 0}};
        c[a.ok ? "succeeded" : "failed"] = c[a.ok ? "succeeded" : "failed"].get<int>() + 1;
    }
    j["action_counts"] = counts;
    if (include_actions) {
        auto actions = json::array();
        for (const auto& a : s.actions) {
            json x = {{"evidence_id", a.evidence_id}, {"timestamp", a.timestamp}, {"action", a.action},
                      {"unit", a.unit},               {"ok", a.ok},               {"detail", a.detail}};
            if (!a.type.empty()) x["type"] = a.type;
            if (a.address) x["address"] = *a.address;
            if (a.count) x["count"] = *a.count;
            if (!a.values.is_null()) x["values"] = a.values;
            if (!a.before.is_null()) x["before"] = a.before;
            if (!a.after.is_null()) x["after"] = a.after;
            actions.push_back(std::move(x));
        }
        j["traces"] = actions;
    }
    return j;
}

json to_json(const OpcUaSummary& s, bool include_actions) {
    json j = {{"target", s.target},
              {"security_policies", s.security_policies},
              {"token_types", s.token_types},
              {"identities", s.identities},
              {"anonymous_access", s.anonymous_access},
              {"writable_variables", s.writable_variables},
              {"evidence_ids", s.evidence_ids}};
    j["browsed_nodes"] = s.browsed_nodes ? json(*s.browsed_nodes) : json();
    j["variables"] = s.variables ? json(*s.variables) : json();
    json counts = json::object();
    for (const auto& a : s.actions) {
        auto& c = counts[a.action];
        if (c.is_null()) c = {{"succeeded", 0}, {"failed", 0}};
        c[a.ok ? "succeeded" : "failed"] = c[a.ok ? "succeeded" : "failed"].get<int>() + 1;
    }
    j["action_counts"] = counts;
    if (include_actions) {
        auto actions = json::array();
        for (const auto& a : s.actions) {
            json x = {{"evidence_id", a.evidence_id}, {"timestamp", a.timestamp}, {"action", a.action},
                      {"ok", a.ok},                   {"detail", a.detail}};
            if (!a.node_id.empty()) x["node_id"] = a.node_id;
            if (!a.value.is_null()) x["value"] = a.value;
            actions.push_back(std::move(x));
        }
        j["traces"] = actions;
    }
    return j;
}

json to_json(const MitigationEntry& m) {
    return {{"id", m.id}, {"name", m.name}, {"rationale", m.rationale}, {"findings", m.findings}, {"evidence_ids", m.evidence_ids}};
}

}  // namespace otprobe::evidence
