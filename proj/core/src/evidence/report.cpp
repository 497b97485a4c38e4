#include "otprobe/evidence/report.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "otprobe/util/time.hpp"

namespace otprobe::evidence {

namespace {

using nlohmann::json;

constexpr const char* offline_model = "offline-template";

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (const auto& p : parts) out += (out.empty() ? "" : sep) + p;
    return out;
}

std::vector<std::string> strings_of(const json& arr) {
    std::vector<std::string> out;
    if (!arr.is_array()) return out;
    for (const auto& v : arr) out.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    return out;
}

std::string text_of(const json& v) {
    if (v.is_null()) return "";
    return v.is_string() ? v.get<std::string>() : v.dump();
}

// Markdown table cells must not contain pipes or newlines.
std::string cell(std::string s) {
    for (auto& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    std::string out;
    for (char c : s) {
        if (c == '|') out += "\\|";
        else out.push_back(c);
    }
    return out;
}

std::string one_line(std::string s) {
    for (auto& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    std::size_t pos;
    while ((pos = s.find("-->")) != std::string::npos) s.replace(pos, 3, "--");
    return s;
}

std::string random_id(const char* prefix) {
    static std::mutex m;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(m);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out = prefix;
    std::uint64_t v = rng();
    for (int i = 0; i < 16; ++i, v >>= 4) out.push_back(hex[v & 0xF]);
    return out;
}

json executive_modbus(const ModbusSummary& s) {
    std::size_t ok = 0, failed = 0;
    for (const auto& a : s.actions) (a.ok ? ok : failed)++;
    return {{"target", s.target},
            {"unit_ids", s.unit_ids},
            {"accessed_ranges", s.accessed.size()},
            {"successful_reads", s.successful("read") + s.successful("enumerate") + s.successful("scan-range")},
            {"successful_writes", s.successful("write")},
            {"successful_actions", ok},
            {"failed_actions", failed},
            {"evidence_ids", s.evidence_ids}};
}

json executive_opcua(const OpcUaSummary& s) {
    std::size_t ok = 0, failed = 0;
    for (const auto& a : s.actions) (a.ok ? ok : failed)++;
    json j = {{"target", s.target},
              {"security_policies", s.security_policies},
              {"anonymous_access", s.anonymous_access},
              {"writable_variables", s.writable_variables},
              {"successful_writes", s.successful("write")},
              {"successful_actions", ok},
              {"failed_actions", failed},
              {"evidence_ids", s.evidence_ids}};
    j["browsed_nodes"] = s.browsed_nodes ? json(*s.browsed_nodes) : json();
    j["variables"] = s.variables ? json(*s.variables) : json();
    return j;
}

json statistics(const Extraction& facts, const std::vector<MitigationEntry>& mitigations) {
    std::size_t open_ports = 0;
    json services = {{"modbus", 0}, {"opcua", 0}, {"unknown", 0}};
    for (const auto& t : facts.targets) {
        open_ports += t.ports.size();
        for (const auto& p : t.ports) {
            const auto key = services.contains(p.service) ? p.service : "unknown";
            services[key] = services[key].get<std::size_t>() + 1;
        }
    }
    std::size_t ok = 0, failed = 0, writes = 0;
    for (const auto& s : facts.modbus) {
        for (const auto& a : s.actions) {
            (a.ok ? ok : failed)++;
            if (a.ok && a.action == "write") ++writes;
        }
    }
    for (const auto& s : facts.opcua) {
        for (const auto& a : s.actions) {
            (a.ok ? ok : failed)++;
            if (a.ok && a.action == "write") ++writes;
        }
    }
    return {{"hosts", facts.targets.size()},
            {"open_ports", open_ports},
            {"services", services},
            {"modbus_targets", facts.modbus.size()},
            {"opcua_targets", facts.opcua.size()},
            {"actions_succeeded", ok},
            {"actions_failed", failed},
            {"writes_succeeded", writes},
            {"mitigations", mitigations.size()},
            {"skipped_items", facts.skipped}};
}

struct BaseUrl {
    std::string scheme_host_port;
    std::string prefix;
};

BaseUrl split_base_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos || url.size() == scheme + 3)
        throw ReportError(ReportErrorKind::InvalidRequest, "LLM base URL '" + url + "' must look like http://host:port/path", false);
    const auto path = url.find('/', scheme + 3);
    BaseUrl out;
    out.scheme_host_port = url.substr(0, path);
    out.prefix = path == std::string::npos ? "" : url.substr(path);
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
    return out;
}

std::string query_llm(const std::string& prompt, const std::string& model, const LlmConfig& config) {
    if (config.base_url.empty())
        throw ReportError(ReportErrorKind::InvalidRequest, "online mode needs an LLM base URL", false);
    const auto base = split_base_url(config.base_url);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (base.scheme_host_port.rfind("https://", 0) == 0)
        throw ReportError(ReportErrorKind::EndpointUnreachable, "https endpoints need a build with OpenSSL", false);
#endif
    httplib::Client client(base.scheme_host_port);
    if (!client.is_valid())
        throw ReportError(ReportErrorKind::InvalidRequest, "unsupported LLM base URL '" + config.base_url + "'", false);
    client.set_connection_timeout(config.timeout);
    client.set_read_timeout(config.timeout);
    client.set_write_timeout(config.timeout);
    if (!config.api_key.empty()) client.set_bearer_token_auth(config.api_key);

    const json body = {{"model", model}, {"temperature", 0}, {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
    const auto res = client.Post(base.prefix + "/chat/completions", body.dump(), "application/json");
    if (!res)
        throw ReportError(ReportErrorKind::EndpointUnreachable,
                          "LLM endpoint " + config.base_url + " unreachable: " + httplib::to_string(res.error()), true);
    const int status = res->status;
    if (status == 401 || status == 403)
        throw ReportError(ReportErrorKind::AuthFailure, "LLM endpoint rejected the credentials (HTTP " + std::to_string(status) + ")",
                          false, status);
    if (status < 200 || status >= 300) {
        const bool retryable = status == 408 || status == 429 || status >= 500;
        throw ReportError(ReportErrorKind::EndpointUnreachable, "LLM endpoint returned HTTP " + std::to_string(status), retryable,
                          status);
    }
    json reply;
    try {
        reply = json::parse(res->body);
        const auto& content = reply.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw std::invalid_argument("content is not a string");
        return content.get<std::string>();
    } catch (const std::exception& e) {
        throw ReportError(ReportErrorKind::MalformedCompletion, std::string("malformed chat completion: ") + e.what(), true, status);
    }
}

void render_targets(std::ostringstream& md, const json& data, bool technical) {
    md << "## Targets\n\n";
    const auto& targets = data["targets"];
    const auto& modbus = data["modbus"];
    const auto& opcua = data["opcua"];
    if (targets.empty() && modbus.empty() && opcua.empty()) {
        md << "No targets in the selected evidence.\n\n";
        return;
    }
    for (const auto& t : targets) {
        md << "### Host " << t["host"].get<std::string>() << "\n\n";
        if (technical) {
            md << "| Port | Service |\n|---|---|\n";
            for (const auto& p : t["ports"]) md << "| " << p["port"].get<int>() << " | " << p["service"].get<std::string>() << " |\n";
            md << "\n";
        } else {
            md << "- Open ports: " << t["open_ports"].get<std::size_t>() << "\n";
        }
        const auto protocols = strings_of(t["protocols"]);
        md << "- Industrial protocols: " << (protocols.empty() ? "none identified" : join(protocols, ", ")) << "\n";
        md << "- Evidence: " << join(strings_of(t["evidence_ids"]), ", ") << "\n\n";
    }
    for (const auto& s : modbus) {
        md << "### Modbus " << s["target"].get<std::string>() << "\n\n";
        const auto units = strings_of(s["unit_ids"]);
        md << "- Unit IDs: " << (units.empty() ? "none confirmed" : join(units, ", ")) << "\n";
        if (technical) {
            for (const auto& r : s["accessed_ranges"]) {
                md << "- Accessed: unit " << r["unit"].get<int>() << " " << r["type"].get<std::string>() << " "
                   << r["start"].get<std::uint32_t>() << "-" << r["end"].get<std::uint32_t>() << "\n";
            }
            for (const auto& [name, c] : s["action_counts"].items()) {
                md << "- " << name << ": " << c["succeeded"].get<int>() << " succeeded, " << c["failed"].get<int>() << " failed\n";
            }
            md << "- Evidence: " << join(strings_of(s["evidence_ids"]), ", ") << "\n\n";
            md << "#### Modbus trace\n\n| Time | Action | Unit | Type | Address | Result | Detail | Evidence |\n|---|---|---|---|---|---|---|---|\n";
            for (const auto& a : s["traces"]) {
                std::string detail = a.value("detail", "");
                if (a.contains("before") || a.contains("after"))
                    detail += " (before " + text_of(a.value("before", json())) + ", after " + text_of(a.value("after", json())) + ")";
                md << "| " << a["timestamp"].get<std::string>() << " | " << a["action"].get<std::string>() << " | "
                   << a["unit"].get<int>() << " | " << cell(a.value("type", "")) << " | "
                   << (a.contains("address") ? std::to_string(a["address"].get<int>()) : "") << " | "
                   << (a["ok"].get<bool>() ? "ok" : "failed") << " | " << cell(detail) << " | "
                   << a["evidence_id"].get<std::string>() << " |\n";
            }
            md << "\n";
        } else {
            md << "- Register ranges accessed: " << s["accessed_ranges"].get<std::size_t>() << "\n";
            md << "- Successful reads: " << s["successful_reads"].get<std::size_t>()
               << ", successful writes: " << s["successful_writes"].get<std::size_t>()
               << ", failed actions: " << s["failed_actions"].get<std::size_t>() << "\n";
            md << "- Evidence: " << join(strings_of(s["evidence_ids"]), ", ") << "\n\n";
        }
    }
    for (const auto& s : opcua) {
        md << "### OPC UA " << s["target"].get<std::string>() << "\n\n";
        const auto policies = strings_of(s["security_policies"]);
        md << "- Security policies: " << (policies.empty() ? "not listed" : join(policies, ", ")) << "\n";
        md << "- Anonymous access: " << (s["anonymous_access"].get<bool>() ? "yes" : "no") << "\n";
        if (!s["variables"].is_null())
            md << "- Variables: " << s["variables"].get<std::size_t>() << " (" << s["writable_variables"].get<std::size_t>()
               << " writable)\n";
        if (!s["browsed_nodes"].is_null()) md << "- Nodes browsed: " << s["browsed_nodes"].get<std::size_t>() << "\n";
        if (technical) {
            const auto tokens = strings_of(s["token_types"]);
            if (!tokens.empty()) md << "- Token types: " << join(tokens, ", ") << "\n";
            md << "- Evidence: " << join(strings_of(s["evidence_ids"]), ", ") << "\n\n";
            md << "#### OPC UA trace\n\n| Time | Action | Node | Result | Detail | Evidence |\n|---|---|---|---|---|---|\n";
            for (const auto& a : s["traces"]) {
                md << "| " << a["timestamp"].get<std::string>() << " | " << a["action"].get<std::string>() << " | "
                   << cell(a.value("node_id", "")) << " | " << (a["ok"].get<bool>() ? "ok" : "failed") << " | "
                   << cell(a.value("detail", "")) << " | " << a["evidence_id"].get<std::string>() << " |\n";
            }
            md << "\n";
        } else {
            md << "- Successful writes: " << s["successful_writes"].get<std::size_t>()
               << ", failed actions: " << s["failed_actions"].get<std::size_t>() << "\n";
            md << "- Evidence: " << join(strings_of(s["evidence_ids"]), ", ") << "\n\n";
        }
    }
}

}  // namespace

const char* to_string(Audience a) noexcept {
    return a == Audience::Executive ? "executive" : "technical";
}

std::optional<Audience> parse_audience(std::string_view text) noexcept {
    if (text == "executive") return Audience::Executive;
    if (text == "technical") return Audience::Technical;
    return std::nullopt;
}

void ReportRequest::validate() const {
    if (title.find_first_not_of(" \t\r\n") == std::string::npos) throw std::invalid_argument("title must not be empty");
    if (max_items == 0) throw std::invalid_argument("max_items must be positive");
}

SelectionInfo describe_selection(const std::vector<EvidenceItem>& selected) {
    SelectionInfo info;
    info.item_count = selected.size();
    for (const auto& item : selected) {
        if (info.first_timestamp.empty() || item.timestamp < info.first_timestamp) info.first_timestamp = item.timestamp;
        if (item.timestamp > info.last_timestamp) info.last_timestamp = item.timestamp;
        info.evidence_ids.push_back(item.id);
    }
    return info;
}

ReportDataset build_dataset(const ReportRequest& request, const Extraction& facts,
                            const std::vector<MitigationEntry>& mitigations, const SelectionInfo& selection) {
    request.validate();
    const bool technical = request.audience == Audience::Technical;
    ReportDataset ds;
    ds.audience = request.audience;
    auto& d = ds.data;
    d["title"] = request.title;
    d["audience"] = to_string(request.audience);
    // Timestamps come from the evidence so identical inboxes give identical datasets.
    d["generation"] = {{"generated_at", selection.last_timestamp},
                       {"first_item_at", selection.first_timestamp},
                       {"item_count", selection.item_count},
                       {"evidence_ids", selection.evidence_ids}};
    d["statistics"] = statistics(facts, mitigations);

    d["targets"] = json::array();
    for (const auto& t : facts.targets) {
        if (technical) {
            d["targets"].push_back(to_json(t));
        } else {
            d["targets"].push_back(
                {{"host", t.host}, {"open_ports", t.ports.size()}, {"protocols", t.protocols}, {"evidence_ids", t.evidence_ids}});
        }
    }
    d["modbus"] = json::array();
    for (const auto& s : facts.modbus) d["modbus"].push_back(technical ? to_json(s, true) : executive_modbus(s));
    d["opcua"] = json::array();
    for (const auto& s : facts.opcua) d["opcua"].push_back(technical ? to_json(s, true) : executive_opcua(s));

    d["mitigations"] = json::array();
    for (const auto& m : mitigations) d["mitigations"].push_back(to_json(m));
    return ds;
}

ReportDataset prepare_dataset(const ReportRequest& request, const std::vector<EvidenceItem>& inbox) {
    request.validate();
    const auto selected = select_items(inbox, request.max_items);
    const auto facts = extract_all(selected);
    const auto mitigations = map_mitigations(facts.targets, facts.modbus, facts.opcua);
    return build_dataset(request, facts, mitigations, describe_selection(selected));
}

std::string serialize(const ReportDataset& dataset) {
    return dataset.data.dump(2);
}

const char* instruction_for(Audience a) noexcept {
    return a == Audience::Executive ? "Write an executive ICS/OT security report."
                                    : "Write a structured technical ICS/OT report.";
}

std::string build_prompt(const std::string& title, Audience audience, const ReportDataset& dataset) {
    std::string p;
    p += instruction_for(audience);
    p += "\nReport title: " + title + "\n";
    p += "Use only the data supplied below. Do not add hosts, ports, values, findings or mitigations that are not in it; "
         "if something is unknown, say so.\n";
    p += "Format the report in Markdown. Cite evidence ids for findings. Present every mitigation from the "
         "\"mitigations\" list once, in a single Mitigations section, keeping the given ATT&CK ICS ids.\n";
    if (audience == Audience::Executive)
        p += "Keep the report at the level of business risk and overall exposure.\n";
    else
        p += "Give one section per target with the observed interactions and their outcomes.\n";
    p += "\nDATA:\n";
    p += serialize(dataset);
    p += "\n";
    return p;
}

std::string render_offline(const std::string& title, const ReportDataset& dataset) {
    const auto& d = dataset.data;
    const bool technical = dataset.audience == Audience::Technical;
    const auto& stats = d["statistics"];
    const auto& gen = d["generation"];
    std::ostringstream md;

    md << "# " << one_line(title) << "\n\n";
    md << "- Audience: " << to_string(dataset.audience) << "\n";
    md << "- Evidence items: " << gen["item_count"].get<std::size_t>();
    if (gen["item_count"].get<std::size_t>() > 0)
        md << " (" << gen["first_item_at"].get<std::string>() << " to " << gen["generated_at"].get<std::string>() << ")";
    md << "\n- Generator: " << offline_model << "\n\n";

    md << "## Summary\n\n";
    md << "- " << stats["hosts"].get<std::size_t>() << " host(s) with " << stats["open_ports"].get<std::size_t>()
       << " open port(s).\n";
    md << "- Services: modbus " << stats["services"]["modbus"].get<std::size_t>() << ", opcua "
       << stats["services"]["opcua"].get<std::size_t>() << ", unknown " << stats["services"]["unknown"].get<std::size_t>()
       << ".\n";
    md << "- Protocol interactions: " << stats["actions_succeeded"].get<std::size_t>() << " succeeded, "
       << stats["actions_failed"].get<std::size_t>() << " failed, including " << stats["writes_succeeded"].get<std::size_t>()
       << " successful write(s).\n";
    md << "- " << stats["mitigations"].get<std::size_t>() << " ATT&CK ICS mitigation(s) recommended.\n\n";

    md << "## Findings\n\n";
    std::vector<std::string> findings;
    for (const auto& m : d["mitigations"]) {
        for (const auto& f : strings_of(m["findings"])) {
            if (std::find(findings.begin(), findings.end(), f) == findings.end()) findings.push_back(f);
        }
    }
    if (findings.empty()) md << "No findings were derived from the selected evidence.\n";
    for (const auto& f : findings) md << "- " << f << "\n";
    md << "\n";

    render_targets(md, d, technical);

    md << "## Mitigations\n\n";
    if (d["mitigations"].empty()) md << "No mitigations apply to the selected evidence.\n";
    for (const auto& m : d["mitigations"]) {
        md << "### " << m["id"].get<std::string>() << " " << m["name"].get<std::string>() << "\n\n";
        md << m["rationale"].get<std::string>() << "\n\n";
        md << "- Evidence: " << join(strings_of(m["evidence_ids"]), ", ") << "\n\n";
    }
    auto out = md.str();
    while (out.size() >= 2 && out[out.size() - 1] == '\n' && out[out.size() - 2] == '\n') out.pop_back();
    return out;
}

const char* to_string(LlmMode m) noexcept {
    return m == LlmMode::Online ? "online" : "offline";
}

LlmConfig llm_config_from_env(LlmConfig base) {
    auto env = [](const char* name) -> std::optional<std::string> {
        const char* v = std::getenv(name);
        if (!v || !*v) return std::nullopt;
        return std::string(v);
    };
    const auto mode = env("OTPROBE_LLM_MODE");
    if (auto v = env("OTPROBE_LLM_BASE_URL")) {
        base.base_url = *v;
        if (!mode) base.mode = LlmMode::Online;
    }
    if (auto v = env("OTPROBE_LLM_API_KEY")) base.api_key = *v;
    if (auto v = env("OTPROBE_LLM_MODEL")) base.model = *v;
    if (auto v = env("OTPROBE_LLM_TIMEOUT_MS")) {
        try {
            base.timeout = std::chrono::milliseconds(std::stol(*v));
        } catch (const std::exception&) {
            throw std::invalid_argument("OTPROBE_LLM_TIMEOUT_MS must be an integer");
        }
    }
    if (mode) {
        if (*mode == "online") base.mode = LlmMode::Online;
        else if (*mode == "offline") base.mode = LlmMode::Offline;
        else throw std::invalid_argument("OTPROBE_LLM_MODE must be online or offline");
    }
    return base;
}

const char* to_string(ReportErrorKind k) noexcept {
    switch (k) {
        case ReportErrorKind::InvalidRequest: return "invalid-request";
        case ReportErrorKind::EndpointUnreachable: return "endpoint-unreachable";
        case ReportErrorKind::AuthFailure: return "auth-failure";
        case ReportErrorKind::MalformedCompletion: return "malformed-completion";
        case ReportErrorKind::StorageFailure: return "storage-failure";
    }
    return "invalid-request";
}

GeneratedReport generate_report(const ReportRequest& request, const ReportDataset& dataset, const LlmConfig& config) {
    try {
        request.validate();
    } catch (const std::invalid_argument& e) {
        throw ReportError(ReportErrorKind::InvalidRequest, e.what(), false);
    }
    GeneratedReport out;
    out.prompt = build_prompt(request.title, request.audience, dataset);
    if (config.mode == LlmMode::Offline) {
        out.model = offline_model;
        out.markdown = render_offline(request.title, dataset);
        return out;
    }
    out.model = request.model.empty() ? config.model : request.model;
    out.markdown = query_llm(out.prompt, out.model, config);
    return out;
}

nlohmann::json to_json(const ReportMeta& m) {
    return {{"id", m.id}, {"title", m.title}, {"audience", m.audience}, {"generated", m.generated}, {"items", m.items}, {"model", m.model}};
}

std::string metadata_header(const ReportMeta& meta) {
    return "<!--\ntitle: " + one_line(meta.title) + "\naudience: " + meta.audience + "\ngenerated: " + meta.generated +
           "\nitems: " + std::to_string(meta.items) + "\nmodel: " + one_line(meta.model) + "\n-->\n\n";
}

namespace {

std::optional<ReportMeta> parse_header(const std::string& id, const std::string& text) {
    if (text.rfind("<!--\n", 0) != 0) return std::nullopt;
    const auto end = text.find("\n-->\n");
    if (end == std::string::npos) return std::nullopt;
    ReportMeta m;
    m.id = id;
    std::istringstream in(text.substr(5, end - 5));
    std::string line;
    while (std::getline(in, line)) {
        const auto colon = line.find(": ");
        if (colon == std::string::npos) continue;
        const auto key = line.substr(0, colon);
        const auto value = line.substr(colon + 2);
        if (key == "title") m.title = value;
        else if (key == "audience") m.audience = value;
        else if (key == "generated") m.generated = value;
        else if (key == "model") m.model = value;
        else if (key == "items") m.items = std::strtoul(value.c_str(), nullptr, 10);
    }
    return m;
}

bool valid_report_id(const std::string& id) {
    return !id.empty() && id.size() <= 64 &&
           std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-'; });
}

}  // namespace

ReportStore::ReportStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (dir_.empty()) return;
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ReportError(ReportErrorKind::StorageFailure, "cannot create report directory " + dir_.string(), false);
}

ReportMeta ReportStore::save(const ReportMeta& meta, const std::string& markdown) {
    ReportMeta m = meta;
    if (m.id.empty()) m.id = random_id("rp-");
    if (m.generated.empty()) m.generated = util::iso8601_now();
    const auto bytes = metadata_header(m) + markdown;
    std::lock_guard lock(mutex_);
    if (dir_.empty()) {
        memory_.emplace_back(m, bytes);
        return m;
    }
    const auto final_path = dir_ / (m.id + ".md");
    const auto tmp_path = dir_ / (m.id + ".md.tmp");
    {
        std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
        out << bytes;
        out.flush();
        if (!out) throw ReportError(ReportErrorKind::StorageFailure, "cannot write report " + tmp_path.string(), false);
    }
    std::error_code ec;
    std::filesystem::rename(tmp_path, final_path, ec);
    if (ec) {
        std::filesystem::remove(tmp_path, ec);
        throw ReportError(ReportErrorKind::StorageFailure, "cannot store report " + final_path.string(), false);
    }
    return m;
}

std::optional<std::string> ReportStore::load(const std::string& id) const {
    if (!valid_report_id(id)) return std::nullopt;
    std::lock_guard lock(mutex_);
    if (dir_.empty()) {
        for (const auto& [m, bytes] : memory_) {
            if (m.id == id) return bytes;
        }
        return std::nullopt;
    }
    std::ifstream in(dir_ / (id + ".md"), std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<ReportMeta> ReportStore::list() const {
    std::lock_guard lock(mutex_);
    std::vector<ReportMeta> out;
    if (dir_.empty()) {
        for (const auto& [m, bytes] : memory_) out.push_back(m);
        return out;
    }
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(dir_, ec)) {
        if (entry.path().extension() != ".md") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        if (auto m = parse_header(entry.path().stem().string(), ss.str())) out.push_back(*m);
    }
    std::sort(out.begin(), out.end(), [](const ReportMeta& a, const ReportMeta& b) {
        return std::tie(a.generated, a.id) < std::tie(b.generated, b.id);
    });
    return out;
}

std::size_t ReportStore::size() const {
    return list().size();
}

ReportResult run_report_pipeline(const ReportRequest& request, const EvidenceStore& inbox, const LlmConfig& config,
                                 ReportStore& reports) {
    try {
        request.validate();
    } catch (const std::invalid_argument& e) {
        throw ReportError(ReportErrorKind::InvalidRequest, e.what(), false);
    }
    const auto snapshot = inbox.items();
    const auto dataset = prepare_dataset(request, snapshot);
    auto generated = generate_report(request, dataset, config);

    ReportMeta meta;
    meta.title = request.title;
    meta.audience = to_string(request.audience);
    meta.items = dataset.data["generation"]["item_count"].get<std::size_t>();
    meta.model = generated.model;
    ReportResult result;
    result.meta = reports.save(meta, generated.markdown);
    result.markdown = std::move(generated.markdown);
    result.stored = metadata_header(result.meta) + result.markdown;
    return result;
}

}  // namespace otprobe::evidence
