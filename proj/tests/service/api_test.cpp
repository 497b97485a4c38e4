#include <gtest/gtest.h>

#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "otprobe/evidence/facts.hpp"
#include "otprobe/opcua/server.hpp"
#include "otprobe/service/server.hpp"
#include "support/test_support.hpp"

using namespace otprobe;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

service::ServiceConfig memory_config() {
    service::ServiceConfig c;
    c.port = 0;
    c.evidence_path.clear();
    c.reports_dir.clear();
    return c;
}

class ApiTest : public ::testing::Test {
protected:
    void SetUp() override {
        api_ = std::make_unique<service::ApiServer>(memory_config());
        client_ = std::make_unique<httplib::Client>(api_->base_url());
        client_->set_read_timeout(30, 0);
    }

    httplib::Result post(const std::string& path, const json& body, const httplib::Headers& headers = {}) {
        return client_->Post(path, headers, body.dump(), "application/json");
    }

    static json body(const httplib::Result& r) { return json::parse(r->body); }

    std::unique_ptr<service::ApiServer> api_;
    std::unique_ptr<httplib::Client> client_;
};

std::unique_ptr<opcua::Server> start_opcua() {
    opcua::ServerOptions o;
    o.port = 0;
    auto model = opcua::build_production_line_model();
    model.update_period = 20ms;
    return opcua::serve_opcua(model, o);
}

}  // namespace

TEST_F(ApiTest, HealthzReportsVersionAndLlmMode) {
    auto r = client_->Get("/healthz");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    const auto j = body(r);
    EXPECT_EQ(j["status"], "ok");
    EXPECT_EQ(j["version"], OTPROBE_VERSION);
    EXPECT_EQ(j["llm_mode"], "offline");
}

TEST_F(ApiTest, ModbusWriteToWaterPlantReadsBackScaledValue) {
    auto plant = otprobe::testing::start_water_plant();
    auto r = post("/api/modbus/write", {{"host", "127.0.0.1"},
                                        {"port", plant->port()},
                                        {"unit", 1},
                                        {"type", "holding-register"},
                                        {"address", 0},
                                        {"value", 500},
                                        {"store_evidence", true}});
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 200) << r->body;
    const auto j = body(r);
    EXPECT_TRUE(j["ok"].get<bool>());
    EXPECT_EQ(j["status"], "ok");
    EXPECT_EQ(j["result"]["after"], json::array({5}));
    ASSERT_TRUE(j["evidence_id"].is_string());
    EXPECT_EQ(api_->inbox().size(), 1u);
}

TEST_F(ApiTest, ModbusExceptionIsTargetErrorNotHttpFailure) {
    auto plant = otprobe::testing::start_water_plant();
    auto r = post("/api/modbus/read", {{"host", "127.0.0.1"},
                                       {"port", plant->port()},
                                       {"type", "holding-register"},
                                       {"address", 60000},
                                       {"count", 10}});
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    const auto j = body(r);
    EXPECT_FALSE(j["ok"].get<bool>());
    EXPECT_EQ(j["status"], "target-error");
    EXPECT_EQ(j["result"]["error"]["kind"], "exception-response");
}

TEST_F(ApiTest, UnreachableTargetIs502) {
    const auto port = otprobe::testing::closed_port();
    auto r = post("/api/modbus/read", {{"host", "127.0.0.1"}, {"port", port}, {"type", "hr"}, {"address", 0}, {"count", 1}});
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 502);
    const auto j = body(r);
    EXPECT_EQ(j["status"], "unreachable");
    EXPECT_EQ(j["result"]["error"]["kind"], "connection-refused");
}

TEST_F(ApiTest, ValidationErrorsNameEveryField) {
    auto r = post("/api/modbus/read", {{"host", ""}, {"type", "bogus"}, {"count", 5000}});
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 400);
    const auto j = body(r);
    EXPECT_EQ(j["error"]["kind"], "validation");
    std::set<std::string> fields;
    for (const auto& f : j["error"]["fields"]) fields.insert(f["field"].get<std::string>());
    EXPECT_TRUE(fields.count("host"));
    EXPECT_TRUE(fields.count("type"));
    EXPECT_TRUE(fields.count("count"));
}

TEST_F(ApiTest, MalformedJsonIs400) {
    auto r = client_->Post("/api/modbus/read", "{not json", "application/json");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 400);
}

TEST_F(ApiTest, MalformedCidrIs400WithInvalidHostSpec) {
    auto r = post("/api/scan", {{"hosts", "10.0.0.0/33"}, {"ports", "502"}});
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 400);
    const auto j = body(r);
    EXPECT_EQ(j["error"]["kind"], "InvalidHostSpec");
    EXPECT_EQ(api_->inbox().size(), 0u);
}

TEST_F(ApiTest, ScanClassifiesLoopbackServices) {
    auto plant = otprobe::testing::start_water_plant();
    auto ua = start_opcua();
    const auto closed = otprobe::testing::closed_port();
    auto r = post("/api/scan", {{"hosts", "127.0.0.1"},
                                {"ports", json::array({plant->port(), ua->port(), closed})},
                                {"timeout_ms", 1000},
                                {"store_evidence", true}});
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 200) << r->body;
    const auto items = api_->inbox().items();
    ASSERT_EQ(items.size(), 1u);
    const auto facts = evidence::extract_scan_facts(items);
    ASSERT_EQ(facts.size(), 1u);
    std::map<int, std::string> services;
    for (const auto& p : facts[0].ports) services[p.port] = p.service;
    EXPECT_EQ(services[plant->port()], "modbus");
    EXPECT_EQ(services[ua->port()], "opcua");
    EXPECT_EQ(services.count(closed), 0u);
}

TEST_F(ApiTest, OpcUaBrowseReturnsTree) {
    auto ua = start_opcua();
    auto r = post("/api/opcua/browse", {{"url", ua->endpoint_url()}, {"depth", 3}});
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 200) << r->body;
    const auto j = body(r);
    EXPECT_TRUE(j["ok"].get<bool>());
    EXPECT_EQ(j["result"]["tree"]["node_id"], "ns=0;i=85");
    EXPECT_GT(j["result"]["node_count"].get<int>(), 3);
    EXPECT_FALSE(j["result"]["tree"]["children"].empty());
}

TEST_F(ApiTest, OpcUaBadUrlIsValidation) {
    auto r = post("/api/opcua/endpoints", {{"url", "http://example"}});
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 400);
}

TEST_F(ApiTest, IdempotencyKeyPreventsDuplicateEvidence) {
    auto plant = otprobe::testing::start_water_plant();
    const json req = {{"host", "127.0.0.1"},
                      {"port", plant->port()},
                      {"type", "hr"},
                      {"address", 0},
                      {"count", 2},
                      {"store_evidence", true}};
    auto a = post("/api/modbus/read", req, {{"Idempotency-Key", "retry-1"}});
    auto b = post("/api/modbus/read", req, {{"Idempotency-Key", "retry-1"}});
    ASSERT_TRUE(a && b);
    EXPECT_EQ(a->status, 200);
    EXPECT_EQ(b->status, 200);
    EXPECT_EQ(body(a)["evidence_id"], body(b)["evidence_id"]);
    EXPECT_EQ(api_->inbox().size(), 1u);

    auto body_key = req;
    body_key["idempotency_key"] = "retry-2";
    post("/api/modbus/read", body_key);
    post("/api/modbus/read", body_key);
    EXPECT_EQ(api_->inbox().size(), 2u);
}

TEST_F(ApiTest, InboxListFilterGetAndClear) {
    auto plant = otprobe::testing::start_water_plant();
    post("/api/modbus/read", {{"host", "127.0.0.1"}, {"port", plant->port()}, {"type", "hr"}, {"address", 0}, {"store_evidence", true}});
    post("/api/scan", {{"hosts", "127.0.0.1"}, {"ports", plant->port()}, {"store_evidence", true}});

    auto all = client_->Get("/api/inbox");
    ASSERT_TRUE(all);
    EXPECT_EQ(body(all)["count"], 2);
    auto modbus = client_->Get("/api/inbox?category=modbus");
    ASSERT_TRUE(modbus);
    const auto mj = body(modbus);
    ASSERT_EQ(mj["count"], 1);
    EXPECT_EQ(mj["items"][0]["category"], "modbus");

    const auto id = mj["items"][0]["id"].get<std::string>();
    auto one = client_->Get("/api/inbox/" + id);
    ASSERT_TRUE(one);
    EXPECT_EQ(one->status, 200);
    EXPECT_EQ(body(one)["id"], id);
    EXPECT_EQ(client_->Get("/api/inbox/ev-doesnotexist")->status, 404);
    EXPECT_EQ(client_->Get("/api/inbox?category=printer")->status, 400);

    auto cleared = client_->Delete("/api/inbox");
    ASSERT_TRUE(cleared);
    EXPECT_EQ(body(cleared)["cleared"], 2);
    EXPECT_EQ(body(client_->Get("/api/inbox"))["count"], 0);
}

TEST_F(ApiTest, StoreEvidenceOffLeavesInboxEmpty) {
    auto plant = otprobe::testing::start_water_plant();
    auto r = post("/api/modbus/read", {{"host", "127.0.0.1"}, {"port", plant->port()}, {"type", "hr"}, {"address", 0}});
    ASSERT_TRUE(r);
    EXPECT_TRUE(body(r)["evidence_id"].is_null());
    EXPECT_EQ(api_->inbox().size(), 0u);
}

TEST_F(ApiTest, OfflineExecutiveReportRoundTrip) {
    for (const auto& item : otprobe::testing::scripted_session()) api_->inbox().append(item.category, item.params, item.output);
    auto r = post("/api/report", {{"audience", "executive"}, {"title", "Plant review"}});
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 200) << r->body;
    const auto j = body(r);
    EXPECT_EQ(j["audience"], "executive");
    EXPECT_EQ(j["model"], "offline-template");
    const auto md = j["markdown"].get<std::string>();
    EXPECT_NE(md.find("# Plant review"), std::string::npos);
    EXPECT_NE(md.find("M0802"), std::string::npos);

    auto dl = client_->Get(j["download_url"].get<std::string>());
    ASSERT_TRUE(dl);
    EXPECT_EQ(dl->status, 200);
    EXPECT_NE(dl->get_header_value("Content-Type").find("text/markdown"), std::string::npos);
    EXPECT_NE(dl->get_header_value("Content-Disposition").find(j["id"].get<std::string>()), std::string::npos);
    EXPECT_EQ(*api_->reports().load(j["id"].get<std::string>()), dl->body);

    auto list = client_->Get("/api/report");
    ASSERT_TRUE(list);
    EXPECT_EQ(body(list)["count"], 1);
    auto meta = client_->Get("/api/report/" + j["id"].get<std::string>());
    ASSERT_TRUE(meta);
    EXPECT_EQ(meta->status, 200);
    EXPECT_EQ(body(meta)["content"], dl->body);
}

TEST_F(ApiTest, ReportRejectsUnknownAudience) {
    auto r = post("/api/report", {{"audience", "manager"}});
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 400);
    EXPECT_EQ(body(r)["error"]["fields"][0]["field"], "audience");
    EXPECT_EQ(api_->reports().size(), 0u);
}

TEST_F(ApiTest, UnknownReportDownloadIs404) {
    auto r = client_->Get("/api/report/rp-0000000000000000/download");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 404);
}

TEST_F(ApiTest, UnknownApiRouteIsJson404) {
    auto r = client_->Get("/api/nothing-here");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 404);
    EXPECT_EQ(body(r)["error"]["kind"], "not-found");
}

TEST_F(ApiTest, OnlineReportWithDeadEndpointIs502AndNothingStored) {
    auto cfg = memory_config();
    cfg.llm.mode = evidence::LlmMode::Online;
    cfg.llm.base_url = "http://127.0.0.1:" + std::to_string(otprobe::testing::closed_port()) + "/v1";
    cfg.llm.timeout = 2s;
    service::ApiServer online(cfg);
    for (const auto& item : otprobe::testing::scripted_session()) online.inbox().append(item.category, item.params, item.output);
    httplib::Client c(online.base_url());
    auto r = c.Post("/api/report", R"({"audience":"technical"})", "application/json");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 502);
    const auto j = json::parse(r->body);
    EXPECT_TRUE(j["error"]["retryable"].get<bool>());
    EXPECT_EQ(online.reports().size(), 0u);
}

TEST(ServiceConfigTest, FileThenEnvironmentPrecedence) {
    const auto path = std::filesystem::temp_directory_path() / "otprobe-config-test.json";
    {
        std::ofstream out(path);
        out << R"({"port": 9100, "bind": "0.0.0.0", "scan_cap_s": 30, "llm": {"mode": "online", "model": "m1"}})";
    }
    auto c = service::load_config_file(path);
    EXPECT_EQ(c.port, 9100);
    EXPECT_EQ(c.bind, "0.0.0.0");
    EXPECT_EQ(c.scan_cap, 30s);
    EXPECT_EQ(c.llm.mode, evidence::LlmMode::Online);
    EXPECT_EQ(c.llm.model, "m1");

    setenv("OTPROBE_PORT", "9200", 1);
    auto resolved = service::resolve_config(path);
    unsetenv("OTPROBE_PORT");
    EXPECT_EQ(resolved.port, 9200);
    EXPECT_EQ(resolved.bind, "0.0.0.0");
    std::filesystem::remove(path);

    EXPECT_THROW(service::config_from_json(json{{"port", "eighty"}}), std::invalid_argument);
    EXPECT_THROW(service::config_from_json(json{{"port", 70000}}), std::invalid_argument);
    EXPECT_THROW(service::config_from_json(json{{"llm", {{"mode", "sometimes"}}}}), std::invalid_argument);
}

TEST(ServiceConfigTest, PersistentInboxSurvivesRestart) {
    const auto dir = std::filesystem::temp_directory_path() / "otprobe-service-persist";
    std::filesystem::remove_all(dir);
    auto cfg = memory_config();
    cfg.evidence_path = dir / "evidence.jsonl";
    cfg.reports_dir = dir / "reports";
    std::string report_id;
    {
        service::ApiServer api(cfg);
        for (const auto& item : otprobe::testing::scripted_session()) api.inbox().append(item.category, item.params, item.output);
        httplib::Client c(api.base_url());
        auto r = c.Post("/api/report", R"({"audience":"technical"})", "application/json");
        ASSERT_TRUE(r);
        ASSERT_EQ(r->status, 200);
        report_id = json::parse(r->body)["id"];
    }
    service::ApiServer again(cfg);
    EXPECT_EQ(again.inbox().size(), otprobe::testing::scripted_session().size());
    httplib::Client c(again.base_url());
    EXPECT_EQ(c.Get("/api/report/" + report_id + "/download")->status, 200);
    std::filesystem::remove_all(dir);
}
