#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <mutex>
#include <sstream>

#include "otprobe/modbus/frame.hpp"
#include "otprobe/net/tcp_server.hpp"
#include "otprobe/netscan/scanner.hpp"
#include "otprobe/opcua/server.hpp"
#include "otprobe/sim/store.hpp"
#include "support/test_support.hpp"

using namespace otprobe;
using namespace otprobe::netscan;
using namespace std::chrono_literals;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const ScanError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no ScanError thrown";
    return ErrorKind::InvalidConfig;
}

/// Echoes every byte back; neither an OPC UA nor a Modbus peer.
std::unique_ptr<net::TcpServer> start_echo() {
    return std::make_unique<net::TcpServer>("127.0.0.1", 0, [](net::Socket& sock, const std::atomic<bool>& stopping) {
        std::array<std::uint8_t, 512> buf{};
        while (!stopping) {
            try {
                const auto n = sock.recv_some(buf, 200ms);
                sock.send_all(std::span(buf.data(), n), 200ms);
            } catch (const net::NetError& e) {
                if (e.kind() != net::NetErrorKind::Timeout) return;
            }
        }
    });
}

std::unique_ptr<opcua::Server> start_opcua() {
    opcua::ServerOptions o;
    o.port = 0;
    return opcua::serve_opcua(opcua::build_production_line_model(), o);
}

}  // namespace

TEST(ParseTargets, CidrAndRange) {
    const auto t = parse_targets("192.168.1.0/30", "500-505");
    EXPECT_EQ(t.hosts, (std::vector<std::string>{"192.168.1.0", "192.168.1.1", "192.168.1.2", "192.168.1.3"}));
    EXPECT_EQ(t.ports.size(), 6u);
    EXPECT_EQ(t.size(), 24u);
}

TEST(ParseTargets, HostnameAndPortList) {
    const auto t = parse_targets("localhost", "502,4840,5002");
    EXPECT_EQ(t.hosts, std::vector<std::string>{"localhost"});
    EXPECT_EQ(t.ports, (std::vector<std::uint16_t>{502, 4840, 5002}));
    EXPECT_EQ(t.size(), 3u);
}

TEST(ParseTargets, Deduplicates) {
    const auto t = parse_targets("10.0.0.1, 10.0.0.0/31 10.0.0.1", "5002, 5000-5003,5002");
    EXPECT_EQ(t.hosts, (std::vector<std::string>{"10.0.0.1", "10.0.0.0"}));
    EXPECT_EQ(t.ports, (std::vector<std::uint16_t>{5000, 5001, 5002, 5003}));
}

TEST(ParseTargets, CidrAlignsToNetwork) {
    const auto t = parse_targets("10.1.2.77/29", "1");
    ASSERT_EQ(t.hosts.size(), 8u);
    EXPECT_EQ(t.hosts.front(), "10.1.2.72");
    EXPECT_EQ(t.hosts.back(), "10.1.2.79");
    EXPECT_EQ(parse_targets("10.1.2.77/32", "1").hosts, std::vector<std::string>{"10.1.2.77"});
}

TEST(ParseTargets, Ipv6AndBrackets) {
    EXPECT_EQ(parse_targets("::1", "1").hosts, std::vector<std::string>{"::1"});
    EXPECT_EQ(parse_targets("[fe80::1]", "1").hosts, std::vector<std::string>{"fe80::1"});
}

TEST(ParseTargets, RejectsMalformedHosts) {
    for (const char* bad : {"10.0.0.1/33", "10.0.0.1/", "10.0.0/24", "host/24", "256.1.1.1", "10.0.0", "bad_host!", "-lead.example",
                            "a..b", "::zz", "10.0.0.0/8"}) {
        EXPECT_EQ(kind_of([&] { parse_targets(bad, "502"); }), ErrorKind::InvalidHostSpec) << bad;
    }
}

TEST(ParseTargets, RejectsMalformedPorts) {
    for (const char* bad : {"0", "65536", "10-5", "abc", "5-", "-5", "1-70000", "502;503"}) {
        EXPECT_EQ(kind_of([&] { parse_targets("127.0.0.1", bad); }), ErrorKind::InvalidPortSpec) << bad;
    }
}

TEST(ParseTargets, EmptySpecs) {
    EXPECT_EQ(kind_of([&] { parse_targets("", "502"); }), ErrorKind::EmptyExpansion);
    EXPECT_EQ(kind_of([&] { parse_targets(" , ", "502"); }), ErrorKind::EmptyExpansion);
    EXPECT_EQ(kind_of([&] { parse_targets("127.0.0.1", " "); }), ErrorKind::EmptyExpansion);
}

TEST(ParseTargets, ExpansionCountProperty) {
    for (unsigned prefix = 16; prefix <= 32; ++prefix) {
        const auto t = parse_targets("172.16.9.9/" + std::to_string(prefix), "1-3");
        EXPECT_EQ(t.hosts.size(), std::size_t{1} << (32 - prefix));
        EXPECT_EQ(t.size(), t.hosts.size() * 3);
    }
}

TEST(ScanConfigTest, Validate) {
    ScanConfig c;
    EXPECT_EQ(c.timeout, 500ms);
    EXPECT_EQ(c.concurrency, 256u);
    c.concurrency = 0;
    EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::InvalidConfig);
    c.concurrency = 1;
    c.timeout = 0ms;
    EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::InvalidConfig);
}

TEST(Classify, BundledSimulators) {
    auto modbus = otprobe::testing::start_testbed();
    auto ua = start_opcua();
    const auto m = classify_service("127.0.0.1", modbus->port());
    EXPECT_EQ(m.tag, ServiceTag::Modbus) << m.evidence;
    EXPECT_NE(m.evidence.find("exception 11"), std::string::npos) << m.evidence;
    const auto u = classify_service("127.0.0.1", ua->port());
    EXPECT_EQ(u.tag, ServiceTag::OpcUa) << u.evidence;
    EXPECT_NE(u.evidence.find("Acknowledge"), std::string::npos);
}

TEST(Classify, EchoServerIsUnknown) {
    auto echo = start_echo();
    EXPECT_EQ(classify_service("127.0.0.1", echo->port(), 300ms).tag, ServiceTag::Unknown);
}

TEST(Classify, ClosedPortIsUnknown) {
    EXPECT_EQ(classify_service("127.0.0.1", otprobe::testing::closed_port(), 300ms).tag, ServiceTag::Unknown);
}

TEST(Classify, ProbesDoNotWrite) {
    // Records every function code the classifier sends to a Modbus peer.
    sim::RegisterStore store(sim::build_default_testbed(otprobe::testing::testbed_seed));
    std::mutex m;
    std::vector<std::uint8_t> codes;
    net::TcpServer spy("127.0.0.1", 0, [&](net::Socket& sock, const std::atomic<bool>&) {
        try {
            while (true) {
                std::array<std::uint8_t, modbus::mbap_header_size> head{};
                sock.recv_exact(head, 1s);
                const auto h = modbus::decode_header(head);
                std::vector<std::uint8_t> frame(head.begin(), head.end());
                frame.resize(modbus::mbap_header_size - 1 + h.length);
                sock.recv_exact(std::span(frame).subspan(modbus::mbap_header_size), 1s);
                const auto req = modbus::decode_frame(frame);
                {
                    std::lock_guard lock(m);
                    codes.push_back(req.pdu.function_code);
                }
                if (auto resp = store.handle_request(req)) sock.send_all(modbus::encode_frame(*resp), 1s);
            }
        } catch (const std::exception&) {
        }
    });
    for (int i = 0; i < 3; ++i) EXPECT_EQ(classify_service("127.0.0.1", spy.port()).tag, ServiceTag::Modbus);
    spy.stop();
    std::lock_guard lock(m);
    ASSERT_EQ(codes.size(), 3u);
    for (auto fc : codes) EXPECT_EQ(fc, 0x03);
}

TEST(RunScan, FindsAndClassifiesSimulators) {
    auto modbus = otprobe::testing::start_testbed();
    auto plant = otprobe::testing::start_water_plant();
    auto ua = start_opcua();
    auto echo = start_echo();
    const auto closed = otprobe::testing::closed_port();
    std::vector<std::uint16_t> ports{modbus->port(), plant->port(), ua->port(), echo->port(), closed};
    std::string spec;
    for (auto p : ports) spec += std::to_string(p) + ",";
    const auto report = run_scan("127.0.0.1", spec);
    ASSERT_EQ(report.findings.size(), 4u);
    std::map<std::uint16_t, ServiceTag> tags;
    for (const auto& f : report.findings) {
        EXPECT_EQ(f.state, "open");
        EXPECT_FALSE(f.timestamp.empty());
        tags[f.port] = f.service;
    }
    EXPECT_EQ(tags.at(modbus->port()), ServiceTag::Modbus);
    EXPECT_EQ(tags.at(plant->port()), ServiceTag::Modbus);
    EXPECT_EQ(tags.at(ua->port()), ServiceTag::OpcUa);
    EXPECT_EQ(tags.at(echo->port()), ServiceTag::Unknown);
    EXPECT_FALSE(tags.count(closed));
    EXPECT_TRUE(std::is_sorted(report.findings.begin(), report.findings.end(),
                               [](const ScanFinding& a, const ScanFinding& b) { return a.port < b.port; }));
    EXPECT_EQ(report.probed, 5u);
    EXPECT_EQ(report.host_spec, "127.0.0.1");
}

TEST(RunScan, DeterministicAcrossRuns) {
    auto modbus = otprobe::testing::start_testbed();
    auto ua = start_opcua();
    const auto target = parse_targets("127.0.0.1", std::to_string(modbus->port()) + "," + std::to_string(ua->port()));
    auto strip = [](const ScanReport& r) {
        std::vector<std::tuple<std::string, std::uint16_t, ServiceTag, std::string>> out;
        for (const auto& f : r.findings) out.emplace_back(f.host, f.port, f.service, f.evidence);
        return out;
    };
    const auto first = strip(run_scan(target));
    for (int i = 0; i < 3; ++i) EXPECT_EQ(strip(run_scan(target)), first);
}

TEST(RunScan, ClosedPortsGiveNoFindings) {
    ScanConfig c;
    c.classify = false;
    const auto report = run_scan("127.0.0.1", std::to_string(otprobe::testing::closed_port()), c);
    EXPECT_TRUE(report.findings.empty());
    EXPECT_EQ(run_scan(ScanTarget{{"127.0.0.1"}, {}}, c).findings.size(), 0u);
}

TEST(RunScan, ConcurrencyBoundHolds) {
    auto modbus = otprobe::testing::start_testbed();
    otprobe::testing::BlackholePort filtered;
    for (std::size_t bound : {1u, 3u, 16u}) {
        std::mutex m;
        std::size_t max_pending = 0;
        ScanConfig c;
        c.classify = false;
        c.concurrency = bound;
        c.timeout = 60ms;
        c.hooks.connect_started = [&](const std::string&, std::uint16_t, std::size_t pending) {
            std::lock_guard lock(m);
            max_pending = std::max(max_pending, pending);
        };
        // The filtered listener is on 127.0.0.1 only; other loopback aliases refuse.
        const auto report =
            run_scan("127.0.0.0/28", std::to_string(filtered.port()) + "," + std::to_string(modbus->port()), c);
        EXPECT_LE(max_pending, bound);
        EXPECT_EQ(max_pending, bound);
        EXPECT_EQ(report.probed, 32u);
        ASSERT_EQ(report.findings.size(), 1u);
        EXPECT_EQ(report.findings[0].host, "127.0.0.1");
    }
}

TEST(RunScan, FilteredPortRetries) {
    otprobe::testing::BlackholePort filtered;
    std::size_t attempts = 0;
    ScanConfig c;
    c.classify = false;
    c.timeout = 50ms;
    c.retries = 2;
    c.hooks.connect_started = [&](const std::string&, std::uint16_t, std::size_t) { ++attempts; };
    const auto report = run_scan("127.0.0.1", std::to_string(filtered.port()), c);
    EXPECT_TRUE(report.findings.empty());
    EXPECT_EQ(attempts, 3u);
}

TEST(RunScan, DeadlineStopsScan) {
    otprobe::testing::BlackholePort filtered;
    ScanConfig c;
    c.classify = false;
    c.concurrency = 1;
    c.timeout = 300ms;
    c.deadline = 100ms;
    const auto t0 = std::chrono::steady_clock::now();
    const auto report = run_scan("127.0.0.0/28", std::to_string(filtered.port()), c);
    EXPECT_LT(std::chrono::steady_clock::now() - t0, 1s);
    EXPECT_TRUE(report.deadline_hit);
    EXPECT_TRUE(report.findings.empty());
}

TEST(RunScan, UnresolvedHostsReported) {
    ScanConfig c;
    c.classify = false;
    const auto report = run_scan("no-such-host.invalid", "502", c);
    EXPECT_EQ(report.unresolved, std::vector<std::string>{"no-such-host.invalid"});
    EXPECT_TRUE(report.findings.empty());
}

TEST(Jsonl, RoundTrip) {
    std::vector<ScanFinding> in = {
        {"127.0.0.1", 5002, "open", ServiceTag::Modbus, "Modbus exception 11", "2024-01-02T03:04:05.000Z"},
        {"10.0.0.5", 4840, "open", ServiceTag::OpcUa, "OPC UA Acknowledge", "2024-01-02T03:04:06.000Z"},
        {"plc", 80, "open", ServiceTag::Unknown, "no reply", ""},
    };
    std::stringstream ss;
    write_jsonl(ss, in);
    const std::string text = ss.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
    const auto out = read_jsonl(ss);
    ASSERT_EQ(out.size(), 3u);
    for (std::size_t i = 0; i < in.size(); ++i) {
        EXPECT_EQ(out[i].host, in[i].host);
        EXPECT_EQ(out[i].port, in[i].port);
        EXPECT_EQ(out[i].service, in[i].service);
        EXPECT_EQ(out[i].evidence, in[i].evidence);
    }
    EXPECT_EQ(to_json(in[0])["service"], "modbus");
    EXPECT_EQ(to_json(in[1])["service"], "opcua");
}
