#include <gtest/gtest.h>

#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <future>
#include <span>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "cli.hpp"
#include "otprobe/modbus/client.hpp"
#include "otprobe/opcua/server.hpp"
#include "otprobe/service/server.hpp"
#include "support/test_support.hpp"

using namespace otprobe;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string port_arg(std::uint16_t p) {
    return std::to_string(p);
}

class TempDir {
public:
    TempDir() : path_(std::filesystem::temp_directory_path() / ("otprobe-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter_++))) {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    static inline int counter_ = 0;
    std::filesystem::path path_;
};

std::unique_ptr<opcua::Server> start_opcua() {
    opcua::ServerOptions o;
    o.port = 0;
    return opcua::serve_opcua(opcua::build_production_line_model(), o);
}

}  // namespace

TEST(CliTest, ScanUnitsFindsTestbedUnits) {
    auto bed = otprobe::testing::start_testbed();
    const auto r = run({"modbus", "scan-units", "--host", "127.0.0.1", "--port", port_arg(bed->port()), "--range", "1-15"});
    EXPECT_EQ(r.code, cli::exit_ok) << r.err;
    EXPECT_NE(r.out.find("unit 1:"), std::string::npos);
    EXPECT_NE(r.out.find("unit 5:"), std::string::npos);
    EXPECT_NE(r.out.find("unit 10:"), std::string::npos);
    EXPECT_EQ(r.out.find("unit 2:"), std::string::npos);
}

TEST(CliTest, UnknownUnitSurfacesGatewayExceptionExit1) {
    auto bed = otprobe::testing::start_testbed();
    const auto r = run({"modbus", "read", "--port", port_arg(bed->port()), "--unit", "99", "--type", "hr", "--address", "0"});
    EXPECT_EQ(r.code, cli::exit_tool_error);
    EXPECT_NE(r.err.find("exception-response"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("gateway"), std::string::npos) << r.err;
}

TEST(CliTest, UnreachableIsExit1) {
    const auto r = run({"modbus", "read", "--port", port_arg(otprobe::testing::closed_port()), "--type", "hr", "--address", "0"});
    EXPECT_EQ(r.code, cli::exit_tool_error);
    EXPECT_NE(r.err.find("connection-refused"), std::string::npos);
}

TEST(CliTest, UsageErrorsExit2WithSynopsis) {
    auto r = run({"modbus", "read", "--type", "hr"});
    EXPECT_EQ(r.code, cli::exit_usage);
    EXPECT_NE(r.err.find("--address"), std::string::npos);
    EXPECT_NE(r.err.find("Usage: otprobe modbus read"), std::string::npos);

    r = run({"modbus", "read", "--type", "hr", "--address", "ten"});
    EXPECT_EQ(r.code, cli::exit_usage);
    r = run({"frobnicate"});
    EXPECT_EQ(r.code, cli::exit_usage);
    r = run({});
    EXPECT_EQ(r.code, cli::exit_usage);
}

TEST(CliTest, ValidationFailuresExit2) {
    const auto r = run({"modbus", "read", "--type", "bogus", "--address", "0", "--count", "5000"});
    EXPECT_EQ(r.code, cli::exit_usage);
    EXPECT_NE(r.err.find("type:"), std::string::npos);
    EXPECT_NE(r.err.find("count:"), std::string::npos);

    const auto cidr = run({"scan", "10.0.0.0/33"});
    EXPECT_EQ(cidr.code, cli::exit_usage);
    EXPECT_NE(cidr.err.find("InvalidHostSpec"), std::string::npos);
}

TEST(CliTest, HelpAndVersionExit0) {
    EXPECT_EQ(run({"--help"}).code, cli::exit_ok);
    const auto v = run({"--version"});
    EXPECT_EQ(v.code, cli::exit_ok);
    EXPECT_NE(v.out.find(OTPROBE_VERSION), std::string::npos);
}

TEST(CliTest, OpcUaTypedWriteThenRead) {
    auto server = start_opcua();
    const auto url = server->endpoint_url();
    auto w = run({"opcua", "write", "--url", url, "--node", "ns=2;i=20", "--int32", "1200"});
    ASSERT_EQ(w.code, cli::exit_ok) << w.err;
    auto r = run({"--json", "opcua", "read", "--url", url, "--node", "ns=2;i=20"});
    ASSERT_EQ(r.code, cli::exit_ok) << r.err;
    const auto rec = json::parse(r.out);
    EXPECT_EQ(rec["result"]["value"], 1200);

    auto denied = run({"opcua", "write", "--url", url, "--node", "ns=2;i=30", "--int32", "5"});
    EXPECT_EQ(denied.code, cli::exit_tool_error);
    auto two = run({"opcua", "write", "--url", url, "--node", "ns=2;i=20", "--int32", "1", "--double", "2"});
    EXPECT_EQ(two.code, cli::exit_usage);
}

TEST(CliTest, JsonRecordMatchesApiResponse) {
    auto bed = otprobe::testing::start_testbed();
    service::ServiceConfig cfg;
    cfg.port = 0;
    cfg.evidence_path.clear();
    cfg.reports_dir.clear();
    service::ApiServer api(cfg);
    httplib::Client client(api.base_url());

    const json params = {{"host", "127.0.0.1"}, {"port", bed->port()}, {"unit", 1}, {"type", "holding-register"}, {"address", 3}, {"count", 4}};
    auto http = client.Post("/api/modbus/read", params.dump(), "application/json");
    ASSERT_TRUE(http);
    auto api_rec = json::parse(http->body);

    auto r = run({"--json", "modbus", "read", "--host", "127.0.0.1", "--port", port_arg(bed->port()), "--unit", "1", "--type",
                  "holding-register", "--address", "3", "--count", "4"});
    ASSERT_EQ(r.code, cli::exit_ok) << r.err;
    auto cli_rec = json::parse(r.out);
    api_rec.erase("elapsed_ms");
    cli_rec.erase("elapsed_ms");
    EXPECT_EQ(api_rec, cli_rec);
}

TEST(CliTest, EvidenceInboxAndIdempotency) {
    TempDir dir;
    const auto store = dir.file("evidence.jsonl");
    auto plant = otprobe::testing::start_water_plant();
    const std::vector<std::string> write = {"--store", store, "--evidence", "--idempotency-key", "fill-1", "modbus", "write",
                                            "--port", port_arg(plant->port()), "--type", "hr", "--address", "0", "--value", "500"};
    auto first = run(write);
    ASSERT_EQ(first.code, cli::exit_ok) << first.err;
    EXPECT_NE(first.out.find("readback"), std::string::npos);
    auto again = run(write);
    EXPECT_EQ(again.code, cli::exit_ok);

    auto list = run({"--store", store, "--json", "inbox", "list"});
    ASSERT_EQ(list.code, cli::exit_ok);
    std::istringstream lines(list.out);
    std::string line;
    std::vector<json> items;
    while (std::getline(lines, line)) items.push_back(json::parse(line));
    ASSERT_EQ(items.size(), 1u);
    EXPECT_EQ(items[0]["output"]["after"], json::array({5}));

    EXPECT_EQ(run({"--store", store, "inbox", "list", "--category", "opcua"}).out.find("ev-"), std::string::npos);
    EXPECT_EQ(run({"--store", store, "inbox", "list", "--category", "hvac"}).code, cli::exit_usage);

    auto cleared = run({"--store", store, "inbox", "clear"});
    EXPECT_EQ(cleared.code, cli::exit_ok);
    EXPECT_NE(cleared.out.find("cleared 1"), std::string::npos);
    EXPECT_NE(run({"--store", store, "inbox", "list"}).out.find("0 item(s)"), std::string::npos);
}

TEST(CliTest, ReportWritesStoredBytes) {
    TempDir dir;
    const auto store = dir.file("evidence.jsonl");
    {
        evidence::EvidenceStore inbox(store);
        for (const auto& item : otprobe::testing::scripted_session()) inbox.append(item.category, item.params, item.output);
    }
    const auto config = dir.file("config.json");
    {
        std::ofstream f(config);
        f << json{{"reports_dir", dir.file("reports")}, {"llm", {{"mode", "offline"}}}}.dump();
    }
    const auto out = dir.file("report.md");
    auto r = run({"--config", config, "--store", store, "report", "--audience", "technical", "--title", "Line 1", "-o", out});
    ASSERT_EQ(r.code, cli::exit_ok) << r.err;
    std::ifstream f(out, std::ios::binary);
    const std::string written((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    EXPECT_NE(written.find("# Line 1"), std::string::npos);
    EXPECT_NE(written.find("#### Modbus trace"), std::string::npos);

    evidence::ReportStore reports(dir.file("reports"));
    const auto listed = reports.list();
    ASSERT_EQ(listed.size(), 1u);
    EXPECT_EQ(*reports.load(listed[0].id), written);

    EXPECT_EQ(run({"--config", config, "--store", store, "report", "--audience", "manager"}).code, cli::exit_usage);
}

TEST(CliTest, SimModbusServeStopsOnRequest) {
    const auto port = otprobe::testing::closed_port();
    std::ostringstream out, err;
    auto done = std::async(std::launch::async, [&] {
        return cli::run_cli({"sim", "modbus", "serve", "--preset", "water-plant", "--port", port_arg(port), "--tick-ms", "0"}, out, err);
    });
    modbus::Client client(otprobe::testing::loopback(port));
    bool connected = false;
    for (int i = 0; i < 100 && !connected; ++i) {
        try {
            const std::vector<std::uint16_t> v{500};
            client.write(modbus::DataType::HoldingRegister, 0, std::span<const std::uint16_t>(v));
            connected = true;
        } catch (const modbus::ModbusError&) {
            std::this_thread::sleep_for(20ms);
        }
    }
    ASSERT_TRUE(connected);
    EXPECT_EQ(client.read(modbus::DataType::HoldingRegister, 0, 1), std::vector<std::uint16_t>{5});
    client.close();
    cli::request_stop();
    ASSERT_EQ(done.wait_for(5s), std::future_status::ready);
    EXPECT_EQ(done.get(), cli::exit_ok);
}

TEST(CliTest, SimServeReportsBindFailure) {
    auto bed = otprobe::testing::start_testbed();
    const auto r = run({"sim", "modbus", "serve", "--port", port_arg(bed->port())});
    EXPECT_EQ(r.code, cli::exit_tool_error);
    EXPECT_FALSE(r.err.empty());
}
