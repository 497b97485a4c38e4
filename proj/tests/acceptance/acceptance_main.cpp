// Acceptance gate: one PASS/FAIL line per primary criterion. Exit status is
// the number of failed criteria.

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "otprobe/evidence/report.hpp"
#include "otprobe/modbus/client.hpp"
#include "otprobe/modbus/frame.hpp"
#include "otprobe/modbus/scanner.hpp"
#include "otprobe/netscan/scanner.hpp"
#include "otprobe/opcua/client.hpp"
#include "otprobe/opcua/server.hpp"
#include "otprobe/sim/modbus_server.hpp"
#include "otprobe/sim/profile.hpp"
#include "support/test_support.hpp"

using namespace otprobe;
using nlohmann::json;
using Clock = std::chrono::steady_clock;
using namespace std::chrono_literals;

namespace {

struct Verdict {
    bool pass{false};
    std::string detail;
};

/// Collects mismatches; the verdict passes only when none were recorded.
class Check {
public:
    void expect(bool cond, const std::string& what) {
        if (!cond) failures_.push_back(what);
    }
    Verdict verdict(const std::string& ok_detail) const {
        if (failures_.empty()) return {true, ok_detail};
        std::ostringstream s;
        for (std::size_t i = 0; i < failures_.size(); ++i) s << (i ? "; " : "") << failures_[i];
        return {false, s.str()};
    }

private:
    std::vector<std::string> failures_;
};

double seconds_since(Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt_seconds(double s) {
    std::ostringstream o;
    o.precision(2);
    o << std::fixed << s << " s";
    return o.str();
}

std::unique_ptr<sim::ModbusServer> testbed(std::uint16_t port = 0) {
    sim::ModbusServerOptions o;
    o.port = port;
    o.tick_period = 0ms;
    return std::make_unique<sim::ModbusServer>(sim::build_default_testbed(otprobe::testing::testbed_seed), o);
}

std::unique_ptr<opcua::Server> production_line(std::uint16_t port = 0) {
    opcua::ServerOptions o;
    o.port = port;
    return opcua::serve_opcua(opcua::build_production_line_model(), o);
}

Verdict unit_id_discovery() {
    auto bed = testbed();
    const auto started = Clock::now();
    const auto report = modbus::scan_unit_ids(otprobe::testing::loopback(bed->port()), 1, 15);
    const double elapsed = seconds_since(started);
    Check c;
    const auto active = report.active_units();
    c.expect(active == std::vector<std::uint8_t>{1, 5, 10}, "active units differ from {1,5,10}");
    const auto* u10 = report.find(10);
    c.expect(u10 && u10->data_types == std::vector<modbus::DataType>{modbus::DataType::Coil, modbus::DataType::HoldingRegister},
             "unit 10 data types are not {Coil, HoldingRegister}");
    c.expect(elapsed < 30.0, "runtime " + fmt_seconds(elapsed) + " >= 30 s");
    return c.verdict("active {1,5,10}; unit 10 coil+holding-register; " + fmt_seconds(elapsed));
}

Verdict actuator_state_map() {
    auto bed = testbed();
    const auto map = modbus::enumerate_addresses(otprobe::testing::loopback(bed->port(), 10), modbus::DataType::Coil, 0, 999);
    Check c;
    c.expect(map.size() == 1000, "expected 1000 addresses, got " + std::to_string(map.size()));
    std::size_t on = 0, off = 0, wrong = 0;
    for (const auto& [addr, value] : map) {
        const std::uint16_t want = addr < 500 ? 1 : 0;
        if (!value || *value != want) ++wrong;
        else if (want) ++on;
        else ++off;
    }
    c.expect(wrong == 0, std::to_string(wrong) + " coil(s) deviate from 500 on / 500 off");
    return c.verdict(std::to_string(on) + " true then " + std::to_string(off) + " false");
}

Verdict scaled_write() {
    sim::ModbusServerOptions o;
    o.port = 0;
    o.tick_period = 0ms;
    sim::ModbusServer plant({sim::build_water_plant_profile()}, o);
    modbus::Client client(otprobe::testing::loopback(plant.port()));
    Check c;
    std::ostringstream detail;
    for (auto [written, expected] : {std::pair<std::uint16_t, std::uint16_t>{500, 5}, {0, 0}, {5000, 10}}) {
        const std::vector<std::uint16_t> v{written};
        client.write(modbus::DataType::HoldingRegister, sim::water_plant::fill_valve, std::span<const std::uint16_t>(v));
        const auto back = client.read(modbus::DataType::HoldingRegister, sim::water_plant::fill_valve, 1);
        c.expect(back.size() == 1 && back[0] == expected,
                 std::to_string(written) + " read back " + (back.empty() ? std::string("nothing") : std::to_string(back[0])));
        detail << (written == 500 ? "" : ", ") << written << "->" << (back.empty() ? -1 : back[0]);
    }
    return c.verdict(detail.str());
}

Verdict chunked_range_scan() {
    auto bed = testbed();
    const auto report = modbus::scan_register_range(otprobe::testing::loopback(bed->port(), 10), modbus::DataType::HoldingRegister, 0,
                                                    999, 1000);
    const auto dump = bed->store().read(10, modbus::DataType::HoldingRegister, 0, 1000);
    Check c;
    c.expect(dump.has_value(), "store has no holding registers 0-999 on unit 10");
    c.expect(report.chunks.size() == 1, "expected one chunk, got " + std::to_string(report.chunks.size()));
    if (report.chunks.size() == 1 && dump) {
        const auto& chunk = report.chunks[0];
        c.expect(chunk.status == modbus::ChunkStatus::Accessible, std::string("chunk is ") + modbus::to_string(chunk.status));
        std::size_t mismatches = chunk.values.size() == dump->size() ? 0 : dump->size();
        for (std::size_t i = 0; i < chunk.values.size() && i < dump->size(); ++i)
            if (!chunk.values[i] || *chunk.values[i] != (*dump)[i]) ++mismatches;
        c.expect(mismatches == 0, std::to_string(mismatches) + " value(s) differ from the store dump");
    }
    return c.verdict("1 accessible chunk of 1000, equal to store dump");
}

modbus::Pdu random_valid_pdu(std::mt19937_64& rng) {
    static constexpr std::uint8_t codes[] = {1, 2, 3, 4, 5, 6, 15, 16};
    modbus::Pdu pdu;
    pdu.function_code = codes[rng() % 8];
    if (rng() % 4 == 0) {
        pdu.function_code |= modbus::exception_flag;
        pdu.payload = {static_cast<std::uint8_t>(rng())};
    } else {
        pdu.payload = otprobe::testing::random_bytes(rng, 2 + rng() % (modbus::max_pdu_size - 2));
    }
    return pdu;
}

Verdict codec_properties() {
    const auto started = Clock::now();
    std::mt19937_64 rng(20240501);
    std::size_t round_trip_failures = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto pdu = random_valid_pdu(rng);
        const auto h = modbus::make_header(static_cast<std::uint16_t>(rng()), static_cast<std::uint8_t>(rng()), pdu);
        try {
            const auto back = modbus::decode_frame(modbus::encode_frame(h, pdu));
            if (!(back.header == h) || !(back.pdu == pdu)) ++round_trip_failures;
        } catch (const modbus::FrameError&) {
            ++round_trip_failures;
        }
    }
    std::size_t unexpected = 0;
    for (int i = 0; i < 100000; ++i) {
        auto bytes = otprobe::testing::random_bytes(rng, rng() % 300);
        if (bytes.size() > 4 && rng() % 2) bytes[2] = bytes[3] = 0;
        try {
            modbus::decode_frame(bytes);
        } catch (const modbus::FrameError&) {
        } catch (...) {
            ++unexpected;
        }
    }
    const double elapsed = seconds_since(started);
    Check c;
    c.expect(round_trip_failures == 0, std::to_string(round_trip_failures) + " round-trip failure(s)");
    c.expect(unexpected == 0, std::to_string(unexpected) + " fuzz input(s) raised a non-frame error");
    c.expect(elapsed < 60.0, "runtime " + fmt_seconds(elapsed) + " >= 60 s");
    return c.verdict("10000 round trips, 100000 fuzz inputs, " + fmt_seconds(elapsed));
}

Verdict service_classification() {
    std::unique_ptr<sim::ModbusServer> bed;
    std::unique_ptr<opcua::Server> ua;
    try {
        bed = testbed(sim::testbed_port);
        ua = production_line(4840);
    } catch (const std::exception& e) {
        return {false, std::string("cannot bind lab ports 5002/4840: ") + e.what()};
    }
    netscan::ScanConfig cfg;
    cfg.timeout = 1000ms;
    const auto report = netscan::run_scan("127.0.0.1", "5002,4840", cfg);
    Check c;
    std::map<std::uint16_t, netscan::ServiceTag> tags;
    for (const auto& f : report.findings) tags[f.port] = f.service;
    c.expect(tags.count(5002) && tags[5002] == netscan::ServiceTag::Modbus, "5002 not tagged modbus");
    c.expect(tags.count(4840) && tags[4840] == netscan::ServiceTag::OpcUa, "4840 not tagged opcua");
    return c.verdict("5002 modbus, 4840 opcua");
}

const opcua::NodeDescriptor* child(const opcua::NodeDescriptor& n, const opcua::NodeId& id) {
    for (const auto& c : n.children)
        if (c.node_id == id) return &c;
    return nullptr;
}

Verdict opcua_five_mode() {
    namespace pl = opcua::production_line;
    auto server = production_line();
    const auto url = server->endpoint_url();
    Check c;

    const auto endpoints = opcua::get_endpoints(url);
    bool none_anonymous = false;
    for (const auto& e : endpoints) {
        const bool anon = std::find(e.token_types.begin(), e.token_types.end(), opcua::UserTokenType::Anonymous) != e.token_types.end();
        none_anonymous = none_anonymous || (e.security_policy == "None" && anon);
    }
    c.expect(none_anonymous, "no endpoint with policy None and Anonymous token");

    auto session = opcua::Session::establish(url);
    const auto tree = opcua::browse_nodes(session, opcua::NodeId(0, opcua::ids::Objects), 3);
    const auto* factory = child(tree.root, pl::factory);
    const auto* line = factory ? child(*factory, pl::line) : nullptr;
    c.expect(line && child(*line, pl::temperature_sensors) && child(*line, pl::motors),
             "browse depth 3 lacks Factory > ProductionLine1 > {TemperatureSensors, Motors}");

    const auto vars = opcua::enumerate_variables(session, 2);
    std::map<opcua::NodeId, const opcua::VariableProfile*> by_id;
    for (const auto& v : vars) by_id[v.node_id] = &v;
    auto type_is = [&](const opcua::NodeId& id, opcua::ValueType t) {
        auto it = by_id.find(id);
        return it != by_id.end() && it->second->data_type == t;
    };
    for (const auto& t : pl::temperature) c.expect(type_is(t, opcua::ValueType::Double), t.to_string() + " not Double");
    for (const auto& s : {pl::motor1_speed, pl::motor2_speed}) c.expect(type_is(s, opcua::ValueType::Int32), s.to_string() + " not Int32");
    for (const auto& s : {pl::motor1_status, pl::motor2_status})
        c.expect(type_is(s, opcua::ValueType::Boolean), s.to_string() + " not Boolean");
    c.expect(by_id.count(pl::uptime) && !by_id[pl::uptime]->writable && by_id[pl::uptime]->readable, "Uptime not read-only");

    opcua::write_node(session, pl::motor1_speed, opcua::Value{std::int32_t{1200}});
    const auto back = opcua::read_node(session, pl::motor1_speed);
    c.expect(back == opcua::Value{std::int32_t{1200}}, "motor speed readback is " + opcua::render(back));

    opcua::ErrorKind denied = opcua::ErrorKind::Network;
    bool threw = false;
    try {
        opcua::write_node(session, pl::uptime, opcua::Value{1.0});
    } catch (const opcua::OpcUaError& e) {
        threw = true;
        denied = e.kind();
    }
    c.expect(threw && denied == opcua::ErrorKind::AccessDenied, "Uptime write did not fail with AccessDenied");
    session.close();
    return c.verdict("endpoints, browse, enumerate (" + std::to_string(vars.size()) + " vars), write/read 1200, AccessDenied");
}

bool contains_key(const json& j, const std::string& key) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items())
            if (k == key || contains_key(v, key)) return true;
    } else if (j.is_array()) {
        for (const auto& v : j)
            if (contains_key(v, key)) return true;
    }
    return false;
}

Verdict report_pipeline_offline() {
    using namespace evidence;
    const auto session = otprobe::testing::scripted_session();
    ReportRequest tech_req, exec_req;
    tech_req.audience = Audience::Technical;
    exec_req.audience = Audience::Executive;
    const auto tech = prepare_dataset(tech_req, session);
    const auto exec = prepare_dataset(exec_req, session);
    Check c;
    c.expect(contains_key(tech.data["targets"], "ports"), "technical dataset lacks per-target port details");
    c.expect(contains_key(tech.data["modbus"], "traces"), "technical dataset lacks Modbus traces");
    c.expect(!contains_key(exec.data, "traces"), "executive dataset carries traces");
    c.expect(!contains_key(exec.data["targets"], "ports"), "executive dataset carries per-target port details");
    c.expect(!tech.data["mitigations"].empty() && tech.data["mitigations"] == exec.data["mitigations"],
             "mitigation lists differ or are empty");
    std::set<std::string> ids;
    for (const auto& m : tech.data["mitigations"]) ids.insert(m["id"].get<std::string>());
    c.expect(ids.size() == tech.data["mitigations"].size(), "mitigation list has duplicates");

    const auto pe = build_prompt(exec_req.title, Audience::Executive, exec);
    const auto pt = build_prompt(tech_req.title, Audience::Technical, tech);
    c.expect(pe.find("Write an executive ICS/OT security report.") != std::string::npos, "executive instruction missing");
    c.expect(pt.find("Write a structured technical ICS/OT report.") != std::string::npos, "technical instruction missing");

    for (const auto* ds : {&tech, &exec}) {
        const auto a = generate_report(tech_req, *ds, LlmConfig{}).markdown;
        const auto b = generate_report(tech_req, prepare_dataset(ds == &tech ? tech_req : exec_req, session), LlmConfig{}).markdown;
        c.expect(!a.empty() && a == b, "offline render is not byte-identical across runs");
    }
    return c.verdict(std::to_string(ids.size()) + " shared mitigations; instructions verbatim; deterministic render");
}

/// Minimal chat-completions endpoint on an ephemeral port.
class StubLlm {
public:
    explicit StubLlm(int status, std::string body) {
        server_.Post("/v1/chat/completions", [this, status, body](const httplib::Request& req, httplib::Response& res) {
            {
                std::lock_guard lock(m_);
                requests_.push_back(req.body);
            }
            res.status = status;
            res.set_content(body, "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubLlm() {
        server_.stop();
        thread_.join();
    }
    evidence::LlmConfig config() const {
        evidence::LlmConfig c;
        c.mode = evidence::LlmMode::Online;
        c.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
        c.api_key = "stub";
        c.timeout = 5000ms;
        return c;
    }
    std::vector<std::string> requests() {
        std::lock_guard lock(m_);
        return requests_;
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_{0};
    std::mutex m_;
    std::vector<std::string> requests_;
};

Verdict llm_transport() {
    using namespace evidence;
    const std::string canned = "# Stub report\n\nVerbatim | table *text*\n";
    Check c;
    ReportRequest req;
    const auto ds = prepare_dataset(req, otprobe::testing::scripted_session());
    {
        StubLlm stub(200, json{{"choices", {{{"message", {{"role", "assistant"}, {"content", canned}}}}}}}.dump());
        const auto out = generate_report(req, ds, stub.config());
        c.expect(out.markdown == canned, "completion not returned verbatim");
        const auto sent = stub.requests();
        c.expect(sent.size() == 1, "expected one request to the stub");
        if (sent.size() == 1) {
            const auto prompt = json::parse(sent[0])["messages"].back()["content"].get<std::string>();
            c.expect(prompt.find(serialize(ds)) != std::string::npos, "request does not embed the serialized dataset");
        }
    }
    {
        StubLlm stub(503, R"({"error":"overloaded"})");
        EvidenceStore inbox;
        for (const auto& i : otprobe::testing::scripted_session()) inbox.append(i);
        ReportStore reports("");
        bool retryable = false;
        try {
            run_report_pipeline(req, inbox, stub.config(), reports);
        } catch (const ReportError& e) {
            retryable = e.retryable();
        }
        c.expect(retryable, "endpoint failure did not surface a retryable ReportError");
        c.expect(reports.size() == 0, "a report was persisted after the failure");
    }
    return c.verdict("completion verbatim; 503 retryable, nothing persisted");
}

}  // namespace

int main() {
    struct Criterion {
        std::string name;
        std::function<Verdict()> run;
    };
    const std::vector<Criterion> criteria = {
        {"unit-id-discovery", unit_id_discovery},
        {"actuator-state-map", actuator_state_map},
        {"scaled-write", scaled_write},
        {"chunked-range-scan", chunked_range_scan},
        {"codec-properties", codec_properties},
        {"service-classification", service_classification},
        {"opcua-five-mode", opcua_five_mode},
        {"report-pipeline-offline", report_pipeline_offline},
        {"llm-transport", llm_transport},
    };
    int failed = 0;
    for (const auto& cr : criteria) {
        Verdict v;
        try {
            v = cr.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        if (!v.pass) ++failed;
        std::cout << (v.pass ? "PASS " : "FAIL ") << cr.name << ": " << v.detail << std::endl;
    }
    // The qualitative outcomes have no numeric targets; this gate holds when
    // every exact-match criterion above holds, with only the core library linked.
    const bool reproduced = failed == 0;
    if (!reproduced) ++failed;
    std::cout << (reproduced ? "PASS " : "FAIL ") << "reproducibility-note: "
              << (reproduced ? "all qualitative outcomes reproduced without the UI component"
                             : "depends on the failed criteria above")
              << std::endl;
    return failed;
}
