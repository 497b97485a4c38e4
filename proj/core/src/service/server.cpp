#include "otprobe/service/server.hpp"

#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace otprobe::service {

namespace {

using nlohmann::json;

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

long to_long(const std::string& text, const std::string& what) {
    try {
        std::size_t used = 0;
        const long v = std::stol(text, &used);
        if (used != text.size()) throw std::invalid_argument(what);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument(what + " must be an integer");
    }
}

std::uint16_t to_port(long v, const std::string& what) {
    if (v < 0 || v > 65535) throw std::invalid_argument(what + " must be within 0-65535");
    return static_cast<std::uint16_t>(v);
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

json error_body(const std::string& kind, const std::string& message) {
    return {{"ok", false}, {"error", {{"kind", kind}, {"message", message}}}};
}

int http_status(Outcome o) {
    // A target that answered with a refusal is a successful tool run.
    return o == Outcome::Unreachable ? 502 : 200;
}

}  // namespace

ServiceConfig config_from_json(const json& doc, ServiceConfig base) {
    if (!doc.is_object()) throw std::invalid_argument("service config must be a JSON object");
    auto str = [&](const json& j, const char* key, const std::string& where) -> std::optional<std::string> {
        if (!j.contains(key)) return std::nullopt;
        if (!j[key].is_string()) throw std::invalid_argument(where + key + " must be a string");
        return j[key].get<std::string>();
    };
    auto num = [&](const json& j, const char* key, const std::string& where) -> std::optional<long> {
        if (!j.contains(key)) return std::nullopt;
        if (!j[key].is_number_integer()) throw std::invalid_argument(where + key + " must be an integer");
        return j[key].get<long>();
    };
    if (auto v = str(doc, "bind", "")) base.bind = *v;
    if (auto v = num(doc, "port", "")) base.port = to_port(*v, "port");
    if (auto v = str(doc, "evidence_path", "")) base.evidence_path = *v;
    if (auto v = str(doc, "reports_dir", "")) base.reports_dir = *v;
    if (auto v = str(doc, "static_dir", "")) base.static_dir = *v;
    if (auto v = num(doc, "scan_cap_s", "")) {
        if (*v <= 0) throw std::invalid_argument("scan_cap_s must be positive");
        base.scan_cap = std::chrono::seconds(*v);
    }
    if (doc.contains("llm")) {
        const auto& llm = doc["llm"];
        if (!llm.is_object()) throw std::invalid_argument("llm must be an object");
        if (auto v = str(llm, "mode", "llm.")) {
            if (*v == "online") base.llm.mode = evidence::LlmMode::Online;
            else if (*v == "offline") base.llm.mode = evidence::LlmMode::Offline;
            else throw std::invalid_argument("llm.mode must be online or offline");
        }
        if (auto v = str(llm, "base_url", "llm.")) base.llm.base_url = *v;
        if (auto v = str(llm, "api_key", "llm.")) base.llm.api_key = *v;
        if (auto v = str(llm, "model", "llm.")) base.llm.model = *v;
        if (auto v = num(llm, "timeout_ms", "llm.")) base.llm.timeout = std::chrono::milliseconds(*v);
    }
    return base;
}

ServiceConfig load_config_file(const std::filesystem::path& path, ServiceConfig base) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw std::invalid_argument("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(doc, std::move(base));
}

ServiceConfig config_from_env(ServiceConfig base) {
    if (auto v = env("OTPROBE_BIND")) base.bind = *v;
    if (auto v = env("OTPROBE_PORT")) base.port = to_port(to_long(*v, "OTPROBE_PORT"), "OTPROBE_PORT");
    if (auto v = env("OTPROBE_EVIDENCE_PATH")) base.evidence_path = *v;
    if (auto v = env("OTPROBE_REPORTS_DIR")) base.reports_dir = *v;
    if (auto v = env("OTPROBE_STATIC_DIR")) base.static_dir = *v;
    if (auto v = env("OTPROBE_SCAN_CAP_S")) {
        const auto s = to_long(*v, "OTPROBE_SCAN_CAP_S");
        if (s <= 0) throw std::invalid_argument("OTPROBE_SCAN_CAP_S must be positive");
        base.scan_cap = std::chrono::seconds(s);
    }
    base.llm = evidence::llm_config_from_env(base.llm);
    return base;
}

ServiceConfig resolve_config(const std::filesystem::path& config_file) {
    ServiceConfig cfg;
    auto file = config_file;
    if (file.empty()) {
        if (auto v = env("OTPROBE_CONFIG")) file = *v;
    }
    if (!file.empty()) cfg = load_config_file(file, cfg);
    return config_from_env(cfg);
}

json health(const ServiceConfig& config) {
    return {{"status", "ok"}, {"version", OTPROBE_VERSION}, {"llm_mode", evidence::to_string(config.llm.mode)}};
}

ApiServer::ApiServer(ServiceConfig config)
    : config_(std::move(config)),
      inbox_(std::make_unique<evidence::EvidenceStore>(config_.evidence_path)),
      reports_(std::make_unique<evidence::ReportStore>(config_.reports_dir)),
      http_(std::make_unique<httplib::Server>()) {
    install_routes();
    if (config_.port == 0) {
        const int p = http_->bind_to_any_port(config_.bind);
        if (p <= 0) throw std::runtime_error("cannot bind " + config_.bind);
        port_ = static_cast<std::uint16_t>(p);
    } else {
        if (!http_->bind_to_port(config_.bind, config_.port))
            throw std::runtime_error("cannot bind " + config_.bind + ":" + std::to_string(config_.port));
        port_ = config_.port;
    }
    thread_ = std::thread([this] { http_->listen_after_bind(); });
    http_->wait_until_ready();
}

ApiServer::~ApiServer() {
    stop();
}

std::string ApiServer::base_url() const {
    const auto host = config_.bind == "0.0.0.0" ? std::string("127.0.0.1") : config_.bind;
    return "http://" + host + ":" + std::to_string(port_);
}

void ApiServer::stop() {
    if (http_) http_->stop();
    if (thread_.joinable()) thread_.join();
}

void ApiServer::wait() {
    if (thread_.joinable()) thread_.join();
}

void ApiServer::install_routes() {
    auto& http = *http_;
    const ExecutorLimits limits{std::chrono::duration_cast<std::chrono::milliseconds>(config_.scan_cap)};

    auto tool_route = [this, limits](Tool tool, std::string action) {
        return [this, limits, tool, action](const httplib::Request& req, httplib::Response& res) {
            json body;
            if (!req.body.empty()) {
                try {
                    body = json::parse(req.body);
                } catch (const json::exception&) {
                    send_json(res, 400, error_body("validation", "request body is not valid JSON"));
                    return;
                }
            } else {
                body = json::object();
            }
            if (!body.is_object()) {
                send_json(res, 400, error_body("validation", "request body must be a JSON object"));
                return;
            }
            ToolCall call;
            call.tool = tool;
            call.action = action;
            if (body.contains("store_evidence")) {
                if (!body["store_evidence"].is_boolean()) {
                    ValidationError e(std::vector<FieldError>{{"store_evidence", "must be a boolean"}});
                    send_json(res, 400, validation_body(e));
                    return;
                }
                call.store_evidence = body["store_evidence"].get<bool>();
                body.erase("store_evidence");
            }
            if (body.contains("idempotency_key")) {
                if (body["idempotency_key"].is_string()) call.idempotency_key = body["idempotency_key"].get<std::string>();
                body.erase("idempotency_key");
            }
            if (req.has_header("Idempotency-Key")) call.idempotency_key = req.get_header_value("Idempotency-Key");
            call.params = std::move(body);
            try {
                const auto resp = run_tool(call, inbox_.get(), limits);
                send_json(res, http_status(resp.outcome), resp.record);
            } catch (const ValidationError& e) {
                if (e.kind() == "schema-gap")
                    std::cerr << "otprobe: validation schema gap on " << to_string(tool) << "/" << action << ": " << e.what() << "\n";
                send_json(res, 400, validation_body(e));
            } catch (const evidence::StorageError& e) {
                send_json(res, 500, error_body("storage-failure", e.what()));
            }
        };
    };

    http.Post("/api/scan", tool_route(Tool::Scan, "run"));
    for (const auto& a : actions_for(Tool::Modbus)) http.Post("/api/modbus/" + a, tool_route(Tool::Modbus, a));
    for (const auto& a : actions_for(Tool::OpcUa)) http.Post("/api/opcua/" + a, tool_route(Tool::OpcUa, a));

    http.Get("/api/inbox", [this](const httplib::Request& req, httplib::Response& res) {
        std::vector<evidence::EvidenceItem> items;
        if (req.has_param("category")) {
            const auto cat = evidence::parse_category(req.get_param_value("category"));
            if (!cat) {
                ValidationError e(std::vector<FieldError>{{"category", "must be scan, modbus or opcua"}});
                send_json(res, 400, validation_body(e));
                return;
            }
            items = inbox_->items(*cat);
        } else {
            items = inbox_->items();
        }
        auto list = json::array();
        for (const auto& i : items) list.push_back(evidence::to_json(i));
        send_json(res, 200, {{"count", list.size()}, {"items", list}});
    });
    http.Get(R"(/api/inbox/([A-Za-z0-9-]+))", [this](const httplib::Request& req, httplib::Response& res) {
        const auto item = inbox_->get(req.matches[1]);
        if (!item) {
            send_json(res, 404, error_body("not-found", "no evidence item " + std::string(req.matches[1])));
            return;
        }
        send_json(res, 200, evidence::to_json(*item));
    });
    http.Delete("/api/inbox", [this](const httplib::Request&, httplib::Response& res) {
        const auto n = inbox_->size();
        try {
            inbox_->clear();
        } catch (const evidence::StorageError& e) {
            send_json(res, 500, error_body("storage-failure", e.what()));
            return;
        }
        send_json(res, 200, {{"ok", true}, {"cleared", n}});
    });

    http.Post("/api/report", [this](const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = req.body.empty() ? json::object() : json::parse(req.body);
        } catch (const json::exception&) {
            send_json(res, 400, error_body("validation", "request body is not valid JSON"));
            return;
        }
        std::vector<FieldError> errors;
        evidence::ReportRequest request;
        if (!body.is_object()) {
            errors.push_back({"body", "must be a JSON object"});
        } else {
            const auto audience = body.value("audience", json("technical"));
            const auto parsed = audience.is_string() ? evidence::parse_audience(audience.get<std::string>()) : std::nullopt;
            if (!parsed) errors.push_back({"audience", "must be executive or technical"});
            else request.audience = *parsed;
            if (body.contains("title")) {
                if (!body["title"].is_string() || body["title"].get<std::string>().empty())
                    errors.push_back({"title", "must be a non-empty string"});
                else request.title = body["title"].get<std::string>();
            }
            if (body.contains("model")) {
                if (!body["model"].is_string()) errors.push_back({"model", "must be a string"});
                else request.model = body["model"].get<std::string>();
            }
            if (body.contains("max_items")) {
                if (!body["max_items"].is_number_integer() || body["max_items"].get<long>() <= 0)
                    errors.push_back({"max_items", "must be a positive integer"});
                else request.max_items = body["max_items"].get<std::size_t>();
            }
        }
        if (!errors.empty()) {
            send_json(res, 400, validation_body(ValidationError(errors)));
            return;
        }
        try {
            const auto result = evidence::run_report_pipeline(request, *inbox_, config_.llm, *reports_);
            auto out = evidence::to_json(result.meta);
            out["ok"] = true;
            out["markdown"] = result.markdown;
            out["download_url"] = "/api/report/" + result.meta.id + "/download";
            send_json(res, 200, out);
        } catch (const evidence::ReportError& e) {
            const int status = e.kind() == evidence::ReportErrorKind::InvalidRequest   ? 400
                               : e.kind() == evidence::ReportErrorKind::StorageFailure ? 500
                                                                                        : 502;
            auto out = error_body(evidence::to_string(e.kind()), e.what());
            out["error"]["retryable"] = e.retryable();
            if (e.http_status()) out["error"]["upstream_status"] = e.http_status();
            send_json(res, status, out);
        }
    });
    http.Get("/api/report", [this](const httplib::Request&, httplib::Response& res) {
        auto list = json::array();
        for (const auto& m : reports_->list()) list.push_back(evidence::to_json(m));
        send_json(res, 200, {{"count", list.size()}, {"reports", list}});
    });
    http.Get(R"(/api/report/([A-Za-z0-9-]+))", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        const auto stored = reports_->load(id);
        if (!stored) {
            send_json(res, 404, error_body("not-found", "no report " + id));
            return;
        }
        for (const auto& m : reports_->list()) {
            if (m.id != id) continue;
            auto out = evidence::to_json(m);
            out["content"] = *stored;
            out["download_url"] = "/api/report/" + id + "/download";
            send_json(res, 200, out);
            return;
        }
        send_json(res, 404, error_body("not-found", "no report " + id));
    });
    http.Get(R"(/api/report/([A-Za-z0-9-]+)/download)", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        const auto stored = reports_->load(id);
        if (!stored) {
            send_json(res, 404, error_body("not-found", "no report " + id));
            return;
        }
        res.set_header("Content-Disposition", "attachment; filename=\"" + id + ".md\"");
        res.set_content(*stored, "text/markdown; charset=utf-8");
    });

    http.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) { send_json(res, 200, health(config_)); });

    if (!config_.static_dir.empty() && std::filesystem::is_directory(config_.static_dir))
        http.set_mount_point("/", config_.static_dir.string());

    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
            if (ep) std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        std::cerr << "otprobe: internal error: " << what << "\n";
        send_json(res, 500, error_body("internal", what));
    });
    http.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return;
        if (res.status == 404) send_json(res, 404, error_body("not-found", "no route for " + req.method + " " + req.path));
        else if (res.status == 405) send_json(res, 405, error_body("method-not-allowed", req.method + " " + req.path));
    });
}

}  // namespace otprobe::service
