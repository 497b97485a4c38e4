#include "cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <thread>

#include "otprobe/evidence/report.hpp"
#include "otprobe/evidence/store.hpp"
#include "otprobe/net/socket.hpp"
#include "otprobe/opcua/server.hpp"
#include "otprobe/service/actions.hpp"
#include "otprobe/service/server.hpp"
#include "otprobe/sim/config.hpp"
#include "otprobe/sim/modbus_server.hpp"

namespace otprobe::cli {

namespace {

using nlohmann::json;
using namespace std::chrono_literals;

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) {
    g_stop.store(true);
}

/// Installs SIGINT/SIGTERM handlers for the lifetime of a serve command.
class SignalScope {
public:
    SignalScope() {
        g_stop.store(false);
        prev_int_ = std::signal(SIGINT, on_signal);
        prev_term_ = std::signal(SIGTERM, on_signal);
    }
    ~SignalScope() {
        std::signal(SIGINT, prev_int_);
        std::signal(SIGTERM, prev_term_);
    }
    SignalScope(const SignalScope&) = delete;
    SignalScope& operator=(const SignalScope&) = delete;

    void wait() const {
        while (!g_stop.load()) std::this_thread::sleep_for(50ms);
    }

private:
    void (*prev_int_)(int){SIG_DFL};
    void (*prev_term_)(int){SIG_DFL};
};

struct Globals {
    bool json_output{false};
    std::string config_file;
    std::string store;
    bool evidence{false};
    std::string idempotency_key;
};

struct Context {
    Globals globals;
    std::ostream& out;
    std::ostream& err;

    service::ServiceConfig config() const {
        auto cfg = service::resolve_config(globals.config_file);
        if (!globals.store.empty()) cfg.evidence_path = globals.store;
        return cfg;
    }
};

/// Registers an option that writes into `params[key]` only when given.
template <typename T>
CLI::Option* param(CLI::App* app, json& params, const std::string& flags, const std::string& key, const std::string& help) {
    return app->add_option_function<T>(flags, [&params, key](const T& v) { params[key] = v; }, help);
}

CLI::Option* switch_off(CLI::App* app, json& params, const std::string& flag, const std::string& key, const std::string& help) {
    return app->add_flag_callback(flag, [&params, key] { params[key] = false; }, help);
}

void print_error(std::ostream& err, const json& error) {
    err << "error: " << error.value("kind", std::string("error")) << ": " << error.value("message", std::string()) << "\n";
}

int run_tool_command(Context& ctx, service::Tool tool, const std::string& action, const json& params) {
    service::ToolCall call;
    call.tool = tool;
    call.action = action;
    call.params = params;
    call.store_evidence = ctx.globals.evidence;
    call.idempotency_key = ctx.globals.idempotency_key;

    std::unique_ptr<evidence::EvidenceStore> inbox;
    service::ExecutorLimits limits;
    try {
        const auto cfg = ctx.config();
        limits.scan_cap = std::chrono::duration_cast<std::chrono::milliseconds>(cfg.scan_cap);
        if (call.store_evidence || !call.idempotency_key.empty())
            inbox = std::make_unique<evidence::EvidenceStore>(cfg.evidence_path);
    } catch (const std::exception& e) {
        ctx.err << "error: " << e.what() << "\n";
        return exit_usage;
    }

    service::ToolResponse resp;
    try {
        resp = service::run_tool(call, inbox.get(), limits);
    } catch (const service::ValidationError& e) {
        if (ctx.globals.json_output) {
            ctx.out << service::validation_body(e).dump() << "\n";
        } else {
            ctx.err << "error: " << e.kind() << "\n";
            for (const auto& f : e.fields()) ctx.err << "  " << f.field << ": " << f.message << "\n";
        }
        return exit_usage;
    } catch (const evidence::StorageError& e) {
        ctx.err << "error: storage-failure: " << e.what() << "\n";
        return exit_tool_error;
    }

    const auto& rec = resp.record;
    if (ctx.globals.json_output) {
        ctx.out << rec.dump() << "\n";
    } else {
        const bool failed = !rec.value("ok", false) && rec["result"].contains("error");
        const auto text = rec.value("text", std::string());
        if (failed) print_error(ctx.err, rec["result"]["error"]);
        else if (!text.empty()) ctx.out << text << "\n";
        if (rec["evidence_id"].is_string()) ctx.out << "evidence: " << rec["evidence_id"].get<std::string>() << "\n";
    }
    return resp.outcome == service::Outcome::Ok ? exit_ok : exit_tool_error;
}

std::string cell(const std::string& s, std::size_t width) {
    if (s.size() <= width) return s + std::string(width - s.size(), ' ');
    return s.substr(0, width - 1) + "~";
}

std::string summarize(const evidence::EvidenceItem& item) {
    const auto& p = item.params;
    std::string target;
    if (p.contains("url")) target = p["url"].get<std::string>();
    else if (p.contains("host")) target = p["host"].get<std::string>() + ":" + p.value("port", json(502)).dump();
    else if (p.contains("hosts")) target = p["hosts"].is_string() ? p["hosts"].get<std::string>() : p["hosts"].dump();
    const bool ok = item.output.value("ok", false);
    return target + (ok ? "" : " (failed)");
}

int inbox_list(Context& ctx, const std::string& category) {
    std::optional<evidence::Category> cat;
    if (!category.empty()) {
        cat = evidence::parse_category(category);
        if (!cat) {
            ctx.err << "error: --category must be scan, modbus or opcua\n";
            return exit_usage;
        }
    }
    const evidence::EvidenceStore inbox(ctx.config().evidence_path);
    const auto items = cat ? inbox.items(*cat) : inbox.items();
    if (ctx.globals.json_output) {
        for (const auto& i : items) ctx.out << evidence::to_json(i).dump() << "\n";
        return exit_ok;
    }
    ctx.out << cell("ID", 20) << "  " << cell("TIMESTAMP", 24) << "  " << cell("CATEGORY", 8) << "  " << cell("ACTION", 10)
            << "  TARGET\n";
    for (const auto& i : items) {
        ctx.out << cell(i.id, 20) << "  " << cell(i.timestamp, 24) << "  " << cell(evidence::to_string(i.category), 8) << "  "
                << cell(i.params.value("action", std::string("run")), 10) << "  " << summarize(i) << "\n";
    }
    ctx.out << items.size() << " item(s)\n";
    return exit_ok;
}

int inbox_clear(Context& ctx) {
    evidence::EvidenceStore inbox(ctx.config().evidence_path);
    const auto n = inbox.size();
    inbox.clear();
    if (ctx.globals.json_output) ctx.out << json{{"ok", true}, {"cleared", n}}.dump() << "\n";
    else ctx.out << "cleared " << n << " item(s)\n";
    return exit_ok;
}

struct ReportOptions {
    std::string audience{"technical"};
    std::string title{"ICS/OT assessment"};
    std::string model;
    std::size_t max_items{evidence::default_max_items};
    std::string output;
};

int report(Context& ctx, const ReportOptions& o) {
    evidence::ReportRequest req;
    const auto audience = evidence::parse_audience(o.audience);
    if (!audience) {
        ctx.err << "error: --audience must be executive or technical\n";
        return exit_usage;
    }
    req.audience = *audience;
    req.title = o.title;
    req.model = o.model;
    req.max_items = o.max_items;
    const auto cfg = ctx.config();
    const evidence::EvidenceStore inbox(cfg.evidence_path);
    evidence::ReportStore reports(cfg.reports_dir);
    evidence::ReportResult result;
    try {
        result = evidence::run_report_pipeline(req, inbox, cfg.llm, reports);
    } catch (const evidence::ReportError& e) {
        if (ctx.globals.json_output) {
            json body = {{"ok", false},
                         {"error", {{"kind", evidence::to_string(e.kind())}, {"message", e.what()}, {"retryable", e.retryable()}}}};
            ctx.out << body.dump() << "\n";
        } else {
            ctx.err << "error: " << evidence::to_string(e.kind()) << ": " << e.what() << (e.retryable() ? " (retryable)" : "") << "\n";
        }
        return e.kind() == evidence::ReportErrorKind::InvalidRequest ? exit_usage : exit_tool_error;
    }
    if (!o.output.empty()) {
        std::ofstream f(o.output, std::ios::binary | std::ios::trunc);
        f << result.stored;
        if (!f) {
            ctx.err << "error: cannot write " << o.output << "\n";
            return exit_tool_error;
        }
    }
    if (ctx.globals.json_output) {
        auto body = evidence::to_json(result.meta);
        body["ok"] = true;
        body["markdown"] = result.markdown;
        if (!o.output.empty()) body["output"] = o.output;
        ctx.out << body.dump() << "\n";
    } else if (o.output.empty()) {
        ctx.out << result.markdown;
        if (!result.markdown.empty() && result.markdown.back() != '\n') ctx.out << "\n";
    } else {
        ctx.out << "report " << result.meta.id << " (" << result.meta.audience << ", " << result.meta.items
                << " item(s)) written to " << o.output << "\n";
    }
    return exit_ok;
}

struct SimModbusOptions {
    std::string preset{"testbed"};
    std::string config_file;
    std::string host{"127.0.0.1"};
    std::optional<std::uint16_t> port;
    std::uint64_t seed{42};
    std::string unknown_unit;
    long tick_ms{1000};
};

int sim_modbus(Context& ctx, const SimModbusOptions& o) {
    sim::SimulatorConfig cfg;
    try {
        if (!o.config_file.empty()) {
            cfg = sim::load_simulator_config(o.config_file);
        } else {
            cfg = sim::simulator_config_from_json(json{{"preset", o.preset}, {"seed", o.seed}});
        }
        if (o.unknown_unit == "silent") cfg.unknown_unit = sim::UnknownUnitPolicy::Silent;
        else if (o.unknown_unit == "gateway-exception") cfg.unknown_unit = sim::UnknownUnitPolicy::GatewayException;
        else if (!o.unknown_unit.empty()) throw std::invalid_argument("--unknown-unit must be gateway-exception or silent");
    } catch (const std::invalid_argument& e) {
        ctx.err << "error: " << e.what() << "\n";
        return exit_usage;
    }
    sim::ModbusServerOptions opts;
    opts.host = o.host;
    opts.port = o.port.value_or(o.preset.rfind("water-plant", 0) == 0 && o.config_file.empty() ? sim::water_plant_port
                                                                                                  : sim::testbed_port);
    opts.unknown_unit = cfg.unknown_unit;
    opts.tick_period = std::chrono::milliseconds(o.tick_ms);

    SignalScope signals;
    try {
        const auto units = cfg.devices.size();
        sim::ModbusServer server(std::move(cfg.devices), opts);
        ctx.out << "modbus simulator listening on " << opts.host << ":" << server.port() << " (" << units << " unit(s))"
                << std::endl;
        signals.wait();
        server.stop();
    } catch (const net::NetError& e) {
        ctx.err << "error: " << e.what() << "\n";
        return exit_tool_error;
    }
    ctx.out << "modbus simulator stopped" << std::endl;
    return exit_ok;
}

struct SimOpcUaOptions {
    std::string config_file;
    std::string host{"127.0.0.1"};
    std::optional<std::uint16_t> port;
    std::vector<std::string> users;
    bool no_anonymous{false};
    std::uint64_t seed{7};
};

int sim_opcua(Context& ctx, const SimOpcUaOptions& o) {
    opcua::ServerConfig cfg;
    try {
        if (!o.config_file.empty()) cfg = opcua::load_server_config(o.config_file);
        else cfg.model = opcua::build_production_line_model(o.seed);
        for (const auto& u : o.users) {
            const auto colon = u.find(':');
            if (colon == std::string::npos || colon == 0) throw std::invalid_argument("--user expects name:password");
            cfg.options.auth.users[u.substr(0, colon)] = u.substr(colon + 1);
        }
        if (o.no_anonymous) cfg.options.auth.anonymous = false;
    } catch (const std::invalid_argument& e) {
        ctx.err << "error: " << e.what() << "\n";
        return exit_usage;
    }
    cfg.options.host = o.host;
    if (o.port) cfg.options.port = *o.port;

    SignalScope signals;
    try {
        auto server = opcua::serve_opcua(cfg.model, cfg.options);
        ctx.out << "opcua simulator listening on " << server->endpoint_url() << std::endl;
        signals.wait();
        server->stop();
    } catch (const net::NetError& e) {
        ctx.err << "error: " << e.what() << "\n";
        return exit_tool_error;
    } catch (const std::invalid_argument& e) {
        ctx.err << "error: " << e.what() << "\n";
        return exit_usage;
    }
    ctx.out << "opcua simulator stopped" << std::endl;
    return exit_ok;
}

struct ServeOptions {
    std::string bind;
    std::optional<std::uint16_t> port;
    std::string static_dir;
};

int serve(Context& ctx, const ServeOptions& o) {
    service::ServiceConfig cfg;
    try {
        cfg = ctx.config();
    } catch (const std::exception& e) {
        ctx.err << "error: " << e.what() << "\n";
        return exit_usage;
    }
    if (!o.bind.empty()) cfg.bind = o.bind;
    if (o.port) cfg.port = *o.port;
    if (!o.static_dir.empty()) cfg.static_dir = o.static_dir;

    SignalScope signals;
    try {
        service::ApiServer api(cfg);
        ctx.out << "otprobe service listening on " << api.base_url() << " (llm " << evidence::to_string(cfg.llm.mode) << ")"
                << std::endl;
        signals.wait();
        api.stop();
    } catch (const std::exception& e) {
        ctx.err << "error: " << e.what() << "\n";
        return exit_tool_error;
    }
    ctx.out << "otprobe service stopped" << std::endl;
    return exit_ok;
}

void modbus_common(CLI::App* app, json& p) {
    param<std::string>(app, p, "--host", "host", "Target host (default 127.0.0.1)");
    param<long>(app, p, "--port", "port", "TCP port (default 502)");
    param<long>(app, p, "--unit", "unit", "Unit identifier (default 1)");
    param<long>(app, p, "--timeout-ms", "timeout_ms", "Per-request timeout (default 1000)");
    param<long>(app, p, "--retries", "retries", "Retries after a timeout (default 1)");
}

void opcua_common(CLI::App* app, json& p) {
    param<std::string>(app, p, "--url", "url", "Endpoint URL (default opc.tcp://127.0.0.1:4840/freeopcua/server/)");
    param<long>(app, p, "--timeout-ms", "timeout_ms", "Request timeout (default 3000)");
    param<std::string>(app, p, "--username", "username", "UserName identity token");
    param<std::string>(app, p, "--password", "password", "Password for --username; never stored");
}

/// Modbus, OPC UA and the two lab simulator ports.
const std::string default_scan_ports = "502,4840,5002,5020";
const std::string default_opcua_url = "opc.tcp://127.0.0.1:4840/freeopcua/server/";

/// Help for the deepest subcommand that was parsed, with its full command path.
std::string usage(const CLI::App* app) {
    std::string path;
    while (!app->get_subcommands().empty()) {
        path += (path.empty() ? "" : " ") + app->get_name();
        app = app->get_subcommands().front();
    }
    return app->help(path);
}

}  // namespace

void request_stop() noexcept {
    g_stop.store(true);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"ICS/OT assessment driver: Modbus TCP and OPC UA probing, evidence inbox, reports, simulators", "otprobe"};
    app.require_subcommand(1);
    app.set_version_flag("--version", OTPROBE_VERSION);

    Context ctx{{}, out, err};
    auto& g = ctx.globals;
    app.add_flag("--json", g.json_output, "Emit line-delimited JSON records");
    app.add_option("--config", g.config_file, "Service config file (JSON)");
    app.add_option("--store", g.store, "Evidence inbox path (overrides config)");
    app.add_flag("--evidence", g.evidence, "Store the action result in the evidence inbox");
    app.add_option("--idempotency-key", g.idempotency_key, "Replay the stored result when this key was already used");

    std::function<int()> action;
    // Parameter objects outlive parsing; the option callbacks write into them.
    json params = json::object();

    auto tool = [&](CLI::App* sub, service::Tool t, const std::string& verb) {
        sub->callback([&, t, verb] { action = [&, t, verb] { return run_tool_command(ctx, t, verb, params); }; });
    };

    auto* scan = app.add_subcommand("scan", "TCP connect scan with service classification");
    param<std::string>(scan, params, "hosts,--hosts", "hosts", "IP, range (a-b) or CIDR; comma separated")->required();
    param<std::string>(scan, params, "-p,--ports", "ports", "Ports, e.g. 502,4840,5000-5020 (default 502,4840,5002,5020)");
    param<long>(scan, params, "--timeout-ms", "timeout_ms", "Connect timeout");
    param<long>(scan, params, "--concurrency", "concurrency", "Parallel connects");
    param<long>(scan, params, "--retries", "retries", "Retries per filtered port");
    param<long>(scan, params, "--deadline-ms", "deadline_ms", "Overall scan deadline");
    switch_off(scan, params, "--no-classify", "classify", "Skip protocol classification");
    tool(scan, service::Tool::Scan, "run");

    auto* modbus = app.add_subcommand("modbus", "Modbus TCP actions");
    modbus->require_subcommand(1);
    {
        auto* read = modbus->add_subcommand("read", "Read coils or registers");
        modbus_common(read, params);
        param<std::string>(read, params, "--type", "type", "coil | discrete-input | holding-register | input-register")->required();
        param<long>(read, params, "--address", "address", "Start address")->required();
        param<long>(read, params, "--count", "count", "Number of elements (default 1)");
        tool(read, service::Tool::Modbus, "read");

        auto* write = modbus->add_subcommand("write", "Write coils or holding registers");
        modbus_common(write, params);
        param<std::string>(write, params, "--type", "type", "coil | holding-register")->required();
        param<long>(write, params, "--address", "address", "Start address")->required();
        param<std::vector<long>>(write, params, "--value", "values", "Value(s) to write; repeat or comma separate")
            ->required()
            ->delimiter(',');
        switch_off(write, params, "--no-readback", "readback", "Skip the before/after reads");
        tool(write, service::Tool::Modbus, "write");

        auto* enumerate = modbus->add_subcommand("enum", "Read an address range element by element");
        enumerate->alias("enumerate");
        modbus_common(enumerate, params);
        param<std::string>(enumerate, params, "--type", "type", "Data type")->required();
        param<long>(enumerate, params, "--start", "start", "First address")->required();
        param<long>(enumerate, params, "--end", "end", "Last address (inclusive)");
        param<long>(enumerate, params, "--count", "count", "Number of addresses");
        tool(enumerate, service::Tool::Modbus, "enumerate");

        auto* units = modbus->add_subcommand("scan-units", "Discover active unit identifiers");
        modbus_common(units, params);
        param<std::string>(units, params, "--range", "range", "Unit range, e.g. 1-15 (default 1-247)");
        param<long>(units, params, "--concurrency", "concurrency", "Parallel probes (default 16)");
        tool(units, service::Tool::Modbus, "scan-units");

        auto* range = modbus->add_subcommand("scan-range", "Map readable address ranges in chunks");
        modbus_common(range, params);
        param<std::string>(range, params, "--type", "type", "Data type")->required();
        param<long>(range, params, "--start", "start", "First address (default 0)");
        param<long>(range, params, "--end", "end", "Last address (default 65535)");
        param<long>(range, params, "--chunk", "chunk", "Chunk size (default 1000)");
        tool(range, service::Tool::Modbus, "scan-range");
    }

    auto* ua = app.add_subcommand("opcua", "OPC UA actions");
    ua->require_subcommand(1);
    std::optional<std::pair<std::string, std::string>> typed_value;
    {
        auto* endpoints = ua->add_subcommand("endpoints", "List endpoints and identity token types");
        opcua_common(endpoints, params);
        tool(endpoints, service::Tool::OpcUa, "endpoints");

        auto* browse = ua->add_subcommand("browse", "Browse the address space");
        opcua_common(browse, params);
        param<std::string>(browse, params, "--node", "node_id", "Root node (default i=85)");
        param<long>(browse, params, "--depth", "depth", "Maximum depth (default 5)");
        param<long>(browse, params, "--max-nodes", "max_nodes", "Node budget (default 500)");
        tool(browse, service::Tool::OpcUa, "browse");

        auto* enumerate = ua->add_subcommand("enum", "Profile variables: type, access, current value");
        enumerate->alias("enumerate");
        opcua_common(enumerate, params);
        param<long>(enumerate, params, "--namespace", "namespace", "Namespace index (default 2)");
        tool(enumerate, service::Tool::OpcUa, "enumerate");

        auto* read = ua->add_subcommand("read", "Read a variable");
        opcua_common(read, params);
        param<std::string>(read, params, "--node", "node_id", "Node id, e.g. ns=2;i=10")->required();
        tool(read, service::Tool::OpcUa, "read");

        auto* write = ua->add_subcommand("write", "Write a variable");
        opcua_common(write, params);
        param<std::string>(write, params, "--node", "node_id", "Node id, e.g. ns=2;i=20")->required();
        auto* group = write->add_option_group("value", "Value to write; the typed forms skip type inference");
        for (const auto& [flag, type] : std::vector<std::pair<std::string, std::string>>{
                 {"--value", ""}, {"--int32", "Int32"}, {"--double", "Double"}, {"--bool", "Boolean"}, {"--string", "String"}}) {
            group->add_option_function<std::string>(
                flag, [&typed_value, type = type](const std::string& v) { typed_value = {type, v}; }, "Value");
        }
        group->require_option(1);
        switch_off(write, params, "--no-readback", "readback", "Skip the readback");
        write->callback([&] {
            params["value"] = typed_value->second;
            if (!typed_value->first.empty()) params["type"] = typed_value->first;
            action = [&] { return run_tool_command(ctx, service::Tool::OpcUa, "write", params); };
        });
    }

    auto* inbox = app.add_subcommand("inbox", "Evidence inbox");
    inbox->require_subcommand(1);
    std::string category;
    auto* list = inbox->add_subcommand("list", "List stored evidence");
    list->add_option("--category", category, "scan | modbus | opcua");
    list->callback([&] { action = [&] { return inbox_list(ctx, category); }; });
    auto* clear = inbox->add_subcommand("clear", "Delete all stored evidence");
    clear->callback([&] { action = [&] { return inbox_clear(ctx); }; });

    ReportOptions report_opts;
    auto* rep = app.add_subcommand("report", "Generate a report from the evidence inbox");
    rep->add_option("--audience", report_opts.audience, "executive | technical")->capture_default_str();
    rep->add_option("--title", report_opts.title, "Report title")->capture_default_str();
    rep->add_option("--model", report_opts.model, "Model override for online mode");
    rep->add_option("--max-items", report_opts.max_items, "Most recent items to include")->capture_default_str();
    rep->add_option("-o,--output", report_opts.output, "Write the report to this file");
    rep->callback([&] { action = [&] { return report(ctx, report_opts); }; });

    auto* simc = app.add_subcommand("sim", "Lab simulators");
    simc->require_subcommand(1);
    SimModbusOptions sm;
    auto* smod = simc->add_subcommand("modbus", "Modbus TCP simulator");
    smod->require_subcommand(1);
    auto* smod_serve = smod->add_subcommand("serve", "Serve until interrupted");
    smod_serve->add_option("--preset", sm.preset, "testbed | water-plant | water-plant-digital")->capture_default_str();
    smod_serve->add_option("--sim-config", sm.config_file, "Simulator definition (JSON); replaces --preset");
    smod_serve->add_option("--host", sm.host, "Bind address")->capture_default_str();
    smod_serve->add_option("--port", sm.port, "Port (testbed 5002, water plant 5020)");
    smod_serve->add_option("--seed", sm.seed, "Seed for randomised tables")->capture_default_str();
    smod_serve->add_option("--unknown-unit", sm.unknown_unit, "gateway-exception | silent");
    smod_serve->add_option("--tick-ms", sm.tick_ms, "Dynamics period; 0 disables")->capture_default_str();
    smod_serve->callback([&] { action = [&] { return sim_modbus(ctx, sm); }; });

    SimOpcUaOptions so;
    auto* sua = simc->add_subcommand("opcua", "OPC UA simulator");
    sua->require_subcommand(1);
    auto* sua_serve = sua->add_subcommand("serve", "Serve until interrupted");
    sua_serve->add_option("--sim-config", so.config_file, "Server definition (JSON)");
    sua_serve->add_option("--host", so.host, "Bind address")->capture_default_str();
    sua_serve->add_option("--port", so.port, "Port (default 4840)");
    sua_serve->add_option("--user", so.users, "Accept name:password; repeatable");
    sua_serve->add_flag("--no-anonymous", so.no_anonymous, "Refuse anonymous sessions");
    sua_serve->add_option("--seed", so.seed, "Model seed")->capture_default_str();
    sua_serve->callback([&] { action = [&] { return sim_opcua(ctx, so); }; });

    ServeOptions sv;
    auto* srv = app.add_subcommand("serve", "Run the HTTP API (and UI bundle when configured)");
    srv->add_option("--bind", sv.bind, "Bind address");
    srv->add_option("--port", sv.port, "Port");
    srv->add_option("--static-dir", sv.static_dir, "UI bundle directory");
    srv->callback([&] { action = [&] { return serve(ctx, sv); }; });

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << usage(&app);
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::CallForVersion& e) {
        out << e.what() << "\n";
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << usage(&app);
        return exit_usage;
    }

    // The API requires an explicit target; the CLI defaults to the local lab.
    if (modbus->parsed() && !params.contains("host")) params["host"] = "127.0.0.1";
    if (scan->parsed() && !params.contains("ports")) params["ports"] = default_scan_ports;
    if (ua->parsed() && !params.contains("url")) params["url"] = default_opcua_url;

    try {
        return action ? action() : exit_usage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_tool_error;
    }
}

}  // namespace otprobe::cli
