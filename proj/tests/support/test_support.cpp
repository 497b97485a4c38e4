#include "support/test_support.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdio>
#include <stdexcept>

#include "otprobe/net/socket.hpp"

namespace otprobe::testing {

std::unique_ptr<sim::ModbusServer> start_testbed(sim::UnknownUnitPolicy unknown) {
    sim::ModbusServerOptions opts;
    opts.port = 0;
    opts.unknown_unit = unknown;
    opts.tick_period = std::chrono::milliseconds(0);
    return std::make_unique<sim::ModbusServer>(sim::build_default_testbed(testbed_seed), opts);
}

std::unique_ptr<sim::ModbusServer> start_water_plant(sim::WaterPlantSignals signals) {
    sim::ModbusServerOptions opts;
    opts.port = 0;
    opts.tick_period = std::chrono::milliseconds(0);
    return std::make_unique<sim::ModbusServer>(std::vector{sim::build_water_plant_profile(signals)}, opts);
}

modbus::ConnectionParams loopback(std::uint16_t port, std::uint8_t unit) {
    modbus::ConnectionParams p;
    p.host = "127.0.0.1";
    p.port = port;
    p.unit_id = unit;
    p.timeout = std::chrono::milliseconds(1000);
    p.retries = 1;
    return p;
}

std::uint16_t closed_port() {
    // Bind then release: the kernel will not hand this port out again soon.
    net::Listener l("127.0.0.1", 0);
    const auto port = l.port();
    l.close();
    return port;
}

BlackholePort::BlackholePort() {
    listener_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    socklen_t len = sizeof addr;
    if (listener_ < 0 || ::bind(listener_, reinterpret_cast<sockaddr*>(&addr), len) != 0 || ::listen(listener_, 0) != 0 ||
        ::getsockname(listener_, reinterpret_cast<sockaddr*>(&addr), &len) != 0)
        throw std::runtime_error("blackhole listener setup failed");
    port_ = ntohs(addr.sin_port);
    filler_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (::connect(filler_, reinterpret_cast<sockaddr*>(&addr), len) != 0) throw std::runtime_error("blackhole fill failed");
}

BlackholePort::~BlackholePort() {
    if (filler_ >= 0) ::close(filler_);
    if (listener_ >= 0) ::close(listener_);
}

std::vector<std::uint8_t> random_bytes(std::mt19937_64& rng, std::size_t n) {
    std::vector<std::uint8_t> out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(rng());
    return out;
}

}  // namespace otprobe::testing

namespace otprobe::testing {

namespace {

using nlohmann::json;

evidence::EvidenceItem scripted(std::size_t n, evidence::Category c, json params, json output) {
    evidence::EvidenceItem item;
    char id[32];
    std::snprintf(id, sizeof id, "ev-%016zx", n);
    item.id = id;
    char ts[64];
    std::snprintf(ts, sizeof ts, "2025-06-02T09:%02zu:%02zu.000Z", (n / 60) % 60, n % 60);
    item.timestamp = ts;
    item.category = c;
    item.params = std::move(params);
    item.output = std::move(output);
    return item;
}

}  // namespace

std::vector<evidence::EvidenceItem> scripted_session() {
    using evidence::Category;
    const std::string url = "opc.tcp://127.0.0.1:4840/freeopcua/server/";
    std::vector<evidence::EvidenceItem> v;
    std::size_t n = 0;
    auto add = [&](Category c, json p, json o) { v.push_back(scripted(++n, c, std::move(p), std::move(o))); };

    add(Category::Scan, {{"hosts", "127.0.0.1"}, {"ports", "502,4840,5002,8080"}},
        {{"ok", true},
         {"probed", 4},
         {"findings",
          {{{"host", "127.0.0.1"}, {"port", 502}, {"state", "open"}, {"service", "modbus"}, {"evidence", "FC3 response"}},
           {{"host", "127.0.0.1"}, {"port", 4840}, {"state", "open"}, {"service", "opcua"}, {"evidence", "ACK"}},
           {{"host", "127.0.0.1"}, {"port", 5002}, {"state", "open"}, {"service", "modbus"}, {"evidence", "FC3 response"}},
           {{"host", "127.0.0.1"}, {"port", 8080}, {"state", "open"}, {"service", "unknown"}, {"evidence", "no OPC UA or Modbus reply"}}}}});
    add(Category::Modbus, {{"action", "scan-units"}, {"host", "127.0.0.1"}, {"port", 5002}, {"first", 1}, {"last", 15}},
        {{"ok", true},
         {"active_units", {1, 5, 10}},
         {"units",
          {{{"unit", 1}, {"active", true}, {"data_types", {"coil", "discrete-input", "holding-register", "input-register"}}},
           {{"unit", 5}, {"active", true}, {"data_types", {"discrete-input", "holding-register", "input-register"}}},
           {{"unit", 10}, {"active", true}, {"data_types", {"coil", "holding-register"}}}}}});
    add(Category::Modbus,
        {{"action", "enumerate"}, {"host", "127.0.0.1"}, {"port", 5002}, {"unit", 1}, {"type", "holding-register"}, {"start", 0}, {"count", 4}},
        {{"ok", true},
         {"entries", {{{"address", 0}, {"value", 17}}, {{"address", 1}, {"value", 902}}, {{"address", 2}, {"value", 4411}}, {{"address", 3}, {"value", 65}}}}});
    add(Category::Modbus,
        {{"action", "scan-range"}, {"host", "127.0.0.1"}, {"port", 5002}, {"unit", 10}, {"type", "holding-register"}, {"start", 0}, {"end", 1999}, {"chunk", 1000}},
        {{"ok", true},
         {"chunks", {{{"start", 0}, {"count", 1000}, {"status", "accessible"}}, {{"start", 1000}, {"count", 1000}, {"status", "inaccessible"}}}}});
    add(Category::Modbus,
        {{"action", "read"}, {"host", "127.0.0.1"}, {"port", 502}, {"unit", 1}, {"type", "input-register"}, {"address", 0}, {"count", 2}},
        {{"ok", true}, {"values", {0, 500}}});
    add(Category::Modbus,
        {{"action", "write"}, {"host", "127.0.0.1"}, {"port", 502}, {"unit", 1}, {"type", "holding-register"}, {"address", 0}, {"values", {500}}},
        {{"ok", true}, {"written", 1}, {"before", {0}}, {"after", {5}}});
    add(Category::Modbus,
        {{"action", "write"}, {"host", "127.0.0.1"}, {"port", 502}, {"unit", 1}, {"type", "holding-register"}, {"address", 9000}, {"values", {1}}},
        {{"ok", false}, {"error", {{"kind", "exception-response"}, {"message", "illegal data address (0x02)"}, {"exception_code", 2}}}});
    add(Category::OpcUa, {{"action", "endpoints"}, {"url", url}},
        {{"ok", true},
         {"endpoints", {{{"url", url}, {"security_policy", "None"}, {"security_mode", "None"}, {"token_types", {"Anonymous"}}}}}});
    add(Category::OpcUa, {{"action", "browse"}, {"url", url}, {"depth", 3}},
        {{"ok", true}, {"identity", "anonymous"}, {"node_count", 13}, {"truncated", false}});
    add(Category::OpcUa, {{"action", "enumerate"}, {"url", url}, {"namespace", 2}},
        {{"ok", true},
         {"identity", "anonymous"},
         {"variables",
          {{{"node_id", "ns=2;i=10"}, {"data_type", "Double"}, {"readable", true}, {"writable", true}},
           {{"node_id", "ns=2;i=11"}, {"data_type", "Double"}, {"readable", true}, {"writable", true}},
           {{"node_id", "ns=2;i=12"}, {"data_type", "Double"}, {"readable", true}, {"writable", true}},
           {{"node_id", "ns=2;i=20"}, {"data_type", "Int32"}, {"readable", true}, {"writable", true}},
           {{"node_id", "ns=2;i=21"}, {"data_type", "Boolean"}, {"readable", true}, {"writable", true}},
           {{"node_id", "ns=2;i=22"}, {"data_type", "Int32"}, {"readable", true}, {"writable", true}},
           {{"node_id", "ns=2;i=23"}, {"data_type", "Boolean"}, {"readable", true}, {"writable", true}},
           {{"node_id", "ns=2;i=30"}, {"data_type", "Double"}, {"readable", true}, {"writable", false}}}}});
    add(Category::OpcUa, {{"action", "read"}, {"url", url}, {"node_id", "ns=2;i=10"}},
        {{"ok", true}, {"identity", "anonymous"}, {"value", 21.5}, {"data_type", "Double"}});
    add(Category::OpcUa, {{"action", "write"}, {"url", url}, {"node_id", "ns=2;i=20"}, {"value", 1200}, {"type", "Int32"}},
        {{"ok", true}, {"identity", "anonymous"}, {"readback", 1200}});
    add(Category::OpcUa, {{"action", "write"}, {"url", url}, {"node_id", "ns=2;i=30"}, {"value", 1.0}, {"type", "Double"}},
        {{"ok", false}, {"error", {{"kind", "access-denied"}, {"message", "BadUserAccessDenied"}}}});
    return v;
}

}  // namespace otprobe::testing
