#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <thread>

#include <json.hpp>

#include "otprobe/evidence/report.hpp"
#include "otprobe/evidence/store.hpp"
#include "otprobe/service/actions.hpp"

namespace httplib {
class Server;
}

namespace otprobe::service {

/// Service settings. Sources, lowest precedence first: defaults, the JSON
/// config file, OTPROBE_* environment variables.
///
/// {
///   "bind": "127.0.0.1", "port": 8080,
///   "evidence_path": "otprobe-data/evidence.jsonl",
///   "reports_dir": "otprobe-data/reports",
///   "static_dir": "webui/dist",
///   "scan_cap_s": 120,
///   "llm": { "mode": "offline", "base_url": "", "api_key": "", "model": "gpt-4o-mini", "timeout_ms": 60000 }
/// }
struct ServiceConfig {
    std::string bind{"127.0.0.1"};
    std::uint16_t port{8080};
    /// Empty keeps the inbox in memory.
    std::filesystem::path evidence_path{"otprobe-data/evidence.jsonl"};
    /// Empty keeps reports in memory.
    std::filesystem::path reports_dir{"otprobe-data/reports"};
    /// UI bundle served at "/"; ignored when empty or missing.
    std::filesystem::path static_dir;
    std::chrono::seconds scan_cap{120};
    evidence::LlmConfig llm;
};

/// Throws std::invalid_argument naming the offending key.
ServiceConfig config_from_json(const nlohmann::json& doc, ServiceConfig base = {});
ServiceConfig load_config_file(const std::filesystem::path& path, ServiceConfig base = {});
/// OTPROBE_BIND, OTPROBE_PORT, OTPROBE_EVIDENCE_PATH, OTPROBE_REPORTS_DIR,
/// OTPROBE_STATIC_DIR, OTPROBE_SCAN_CAP_S and the OTPROBE_LLM_* variables.
ServiceConfig config_from_env(ServiceConfig base);
/// Defaults, then `config_file` (when non-empty or OTPROBE_CONFIG is set), then environment.
ServiceConfig resolve_config(const std::filesystem::path& config_file = {});

/// Routes:
///   POST   /api/scan
///   POST   /api/modbus/{read,write,enumerate,scan-units,scan-range}
///   POST   /api/opcua/{endpoints,browse,enumerate,read,write}
///   GET    /api/inbox[?category=scan|modbus|opcua]   DELETE /api/inbox
///   GET    /api/inbox/{id}
///   POST   /api/report   GET /api/report   GET /api/report/{id}   GET /api/report/{id}/download
///   GET    /healthz
/// Tool bodies are the action parameters plus optional "store_evidence" and
/// "idempotency_key" (or an Idempotency-Key header).
class ApiServer {
public:
    /// Port 0 binds an ephemeral port. Throws std::runtime_error when binding fails.
    explicit ApiServer(ServiceConfig config);
    ~ApiServer();

    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    std::uint16_t port() const noexcept { return port_; }
    std::string base_url() const;
    void stop();
    /// Blocks until stop() is called from another thread.
    void wait();

    evidence::EvidenceStore& inbox() noexcept { return *inbox_; }
    evidence::ReportStore& reports() noexcept { return *reports_; }
    const ServiceConfig& config() const noexcept { return config_; }

private:
    void install_routes();

    ServiceConfig config_;
    std::unique_ptr<evidence::EvidenceStore> inbox_;
    std::unique_ptr<evidence::ReportStore> reports_;
    std::unique_ptr<httplib::Server> http_;
    std::uint16_t port_{0};
    std::thread thread_;
};

nlohmann::json health(const ServiceConfig& config);

}  // namespace otprobe::service
