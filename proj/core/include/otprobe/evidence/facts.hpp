#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <string>
#include <vector>

#include <json.hpp>

#include "otprobe/evidence/store.hpp"

namespace otprobe::evidence {

// Evidence item shapes consumed here. Every tool output carries "ok" and, on
// failure, "error": {"kind", "message", ...}.
//
//   scan    params {hosts, ports, ...}
//           output {findings: [{host, port, state, service, evidence, timestamp}], ...}
//   modbus  params {action, host, port, unit, type?, address?, count?, values?, start?, end?, first?, last?}
//           read        output {values}
//           write       output {written, before?, after?}
//           enumerate   output {entries: [{address, value|null}]}
//           scan-units  output {active_units, units: [{unit, active, data_types}]}
//           scan-range  output {chunks: [{start, count, status}]}
//   opcua   params {action, url, node_id?, value?, type?, depth?, namespace?}
//           endpoints   output {endpoints: [{url, security_policy, security_mode, token_types}]}
//           browse      output {identity, node_count, truncated}
//           enumerate   output {identity, variables: [{node_id, data_type, readable, writable}]}
//           read        output {identity, value}
//           write       output {identity, readback?}

struct PortFact {
    std::uint16_t port{0};
    std::string service;  // modbus | opcua | unknown
    bool operator<(const PortFact& o) const { return port < o.port; }
};

struct TargetFacts {
    std::string host;
    std::vector<PortFact> ports;
    std::set<std::string> protocols;
    std::vector<std::string> evidence_ids;
};

struct ModbusAction {
    std::string evidence_id;
    std::string timestamp;
    std::string action;
    std::uint8_t unit{0};
    std::string type;
    std::optional<std::uint16_t> address;
    std::optional<std::uint32_t> count;
    bool ok{false};
    std::string detail;
    nlohmann::json values;  // written or read values when known
    nlohmann::json before;
    nlohmann::json after;
};

struct RegisterRange {
    std::uint8_t unit{0};
    std::string type;
    std::uint32_t start{0};
    std::uint32_t end{0};
    bool operator<(const RegisterRange& o) const {
        return std::tie(unit, type, start, end) < std::tie(o.unit, o.type, o.start, o.end);
    }
};

struct ModbusSummary {
    std::string target;  // host:port
    std::set<std::uint8_t> unit_ids;
    std::map<std::uint8_t, std::set<std::string>> unit_types;
    std::set<RegisterRange> accessed;
    std::vector<ModbusAction> actions;
    std::vector<std::string> evidence_ids;

    std::size_t successful(const std::string& action) const;
};

struct OpcUaAction {
    std::string evidence_id;
    std::string timestamp;
    std::string action;
    std::string node_id;
    bool ok{false};
    std::string detail;
    nlohmann::json value;
};

struct OpcUaSummary {
    std::string target;  // endpoint url
    std::set<std::string> security_policies;
    std::set<std::string> token_types;
    std::set<std::string> identities;
    bool anonymous_access{false};
    std::optional<std::size_t> browsed_nodes;
    std::optional<std::size_t> variables;
    std::size_t writable_variables{0};
    std::vector<OpcUaAction> actions;
    std::vector<std::string> evidence_ids;

    std::size_t successful(const std::string& action) const;
};

/// Items of the wrong shape are skipped and counted in `skipped`.
struct Extraction {
    std::vector<TargetFacts> targets;
    std::vector<ModbusSummary> modbus;
    std::vector<OpcUaSummary> opcua;
    std::size_t skipped{0};
};

std::vector<TargetFacts> extract_scan_facts(const std::vector<EvidenceItem>& items, std::size_t* skipped = nullptr);
std::vector<ModbusSummary> extract_modbus_summary(const std::vector<EvidenceItem>& items, std::size_t* skipped = nullptr);
std::vector<OpcUaSummary> extract_opcua_summary(const std::vector<EvidenceItem>& items, std::size_t* skipped = nullptr);
Extraction extract_all(const std::vector<EvidenceItem>& items);

struct MitigationEntry {
    std::string id;
    std::string name;
    std::string rationale;
    /// Observed findings that triggered the entry.
    std::vector<std::string> findings;
    std::vector<std::string> evidence_ids;
};

/// Finding pattern -> ATT&CK for ICS mitigation ids. Each rule lists 1-3 ids.
struct MitigationRule {
    std::string pattern;
    std::vector<std::string> ids;
    /// Why the pattern matters; combined with the concrete finding.
    std::string why;
};

const std::vector<MitigationRule>& mitigation_rules();
/// Catalog name for a mitigation id, or empty when unknown.
std::string mitigation_name(const std::string& id);

/// Unique by id, ordered by id.
std::vector<MitigationEntry> map_mitigations(const std::vector<TargetFacts>& facts, const std::vector<ModbusSummary>& modbus,
                                             const std::vector<OpcUaSummary>& opcua = {});

nlohmann::json to_json(const TargetFacts& f);
/// include_traces adds the per-action "traces" array.
nlohmann::json to_json(const ModbusSummary& s, bool include_traces);
nlohmann::json to_json(const OpcUaSummary& s, bool include_traces);
nlohmann::json to_json(const MitigationEntry& m);

}  // namespace otprobe::evidence
