#include <gtest/gtest.h>

#include <future>
#include <thread>

#include "otprobe/opcua/client.hpp"
#include "otprobe/opcua/server.hpp"
#include "support/test_support.hpp"

using namespace otprobe::opcua;
namespace pl = otprobe::opcua::production_line;
using namespace std::chrono_literals;

namespace {

std::unique_ptr<Server> start(AuthConfig auth = {}, bool advertise = false) {
    ServerOptions o;
    o.port = 0;
    o.auth = std::move(auth);
    o.advertise_basic256sha256 = advertise;
    auto model = build_production_line_model();
    model.update_period = 20ms;
    return serve_opcua(model, o);
}

AuthConfig users_only() {
    AuthConfig a;
    a.anonymous = false;
    a.users = {{"operator", "s3cret"}};
    return a;
}

template <typename F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const OpcUaError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no OpcUaError thrown";
    return ErrorKind::Network;
}

const NodeDescriptor* find(const NodeDescriptor& d, const NodeId& id) {
    if (d.node_id == id) return &d;
    for (const auto& c : d.children) {
        if (auto* hit = find(c, id)) return hit;
    }
    return nullptr;
}

std::size_t count(const NodeDescriptor& d) {
    std::size_t n = d.children.size();
    for (const auto& c : d.children) n += count(c);
    return n;
}

class OpcUaClientTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() { server_ = start().release(); }
    static void TearDownTestSuite() {
        delete server_;
        server_ = nullptr;
    }
    static std::string url() { return server_->endpoint_url(); }

    static Server* server_;
};

Server* OpcUaClientTest::server_ = nullptr;

}  // namespace

TEST(EndpointUrlTest, Parse) {
    const auto u = EndpointUrl::parse("opc.tcp://localhost:4841/freeopcua/server/");
    EXPECT_EQ(u.host, "localhost");
    EXPECT_EQ(u.port, 4841);
    EXPECT_EQ(u.path, "/freeopcua/server/");
    EXPECT_EQ(EndpointUrl::parse("opc.tcp://10.0.0.5").port, 4840);
    EXPECT_EQ(EndpointUrl::parse("opc.tcp://[::1]:4850/x").host, "::1");
    EXPECT_EQ(EndpointUrl::parse("opc.tcp://plc:1/a").to_string(), "opc.tcp://plc:1/a");
    for (const char* bad : {"http://localhost:4840", "localhost:4840", "opc.tcp://", "opc.tcp://:4840", "opc.tcp://h:0",
                            "opc.tcp://h:70000", "opc.tcp://h:12ab", "opc.tcp://h:"}) {
        EXPECT_EQ(kind_of([&] { EndpointUrl::parse(bad); }), ErrorKind::InvalidUrl) << bad;
    }
}

TEST_F(OpcUaClientTest, EndpointsAnonymousNone) {
    const auto eps = get_endpoints(url());
    ASSERT_EQ(eps.size(), 1u);
    EXPECT_EQ(eps[0].security_policy, "None");
    EXPECT_EQ(eps[0].security_mode, MessageSecurityMode::None);
    EXPECT_EQ(eps[0].token_types, std::vector<UserTokenType>{UserTokenType::Anonymous});
    EXPECT_EQ(eps[0].url, url());
}

TEST(OpcUaEndpoints, UserNameAndAdvertisedPolicy) {
    auto server = start(users_only(), true);
    const auto eps = get_endpoints(server->endpoint_url());
    ASSERT_EQ(eps.size(), 2u);
    EXPECT_EQ(eps[0].token_types, std::vector<UserTokenType>{UserTokenType::UserName});
    EXPECT_EQ(eps[1].security_policy, "Basic256Sha256");
    EXPECT_EQ(eps[1].security_mode, MessageSecurityMode::SignAndEncrypt);
}

TEST_F(OpcUaClientTest, BrowseDepthThreeFindsHierarchy) {
    auto s = Session::establish(url());
    const auto tree = browse_nodes(s, NodeId(0, ids::Objects), 3, 500);
    EXPECT_FALSE(tree.truncated);
    EXPECT_EQ(tree.root.browse_name, "Objects");
    EXPECT_EQ(tree.node_count, count(tree.root));
    const auto* factory = find(tree.root, pl::factory);
    ASSERT_NE(factory, nullptr);
    EXPECT_EQ(factory->browse_name, "Factory");
    EXPECT_EQ(factory->namespace_index, 2);
    const auto* sensors = find(tree.root, pl::temperature_sensors);
    ASSERT_NE(sensors, nullptr);
    EXPECT_TRUE(sensors->children.empty());
    EXPECT_NE(find(tree.root, pl::uptime), nullptr);
    EXPECT_EQ(find(tree.root, pl::temperature[0]), nullptr);
}

TEST_F(OpcUaClientTest, BrowseFullDepthReachesLeaves) {
    auto s = Session::establish(url());
    const auto tree = browse_nodes(s, pl::factory);
    EXPECT_EQ(tree.node_count, 11u);
    const auto* t1 = find(tree.root, pl::temperature[0]);
    ASSERT_NE(t1, nullptr);
    EXPECT_EQ(t1->node_class, NodeClass::Variable);
    EXPECT_EQ(t1->display_name, "Temperature1");
}

TEST_F(OpcUaClientTest, BrowseDepthOneGivesDirectChildren) {
    auto s = Session::establish(url());
    const auto tree = browse_nodes(s, pl::line, 1);
    ASSERT_EQ(tree.root.children.size(), 2u);
    for (const auto& c : tree.root.children) EXPECT_TRUE(c.children.empty());
}

TEST_F(OpcUaClientTest, BrowseBudgetTruncates) {
    auto s = Session::establish(url());
    const auto tree = browse_nodes(s, NodeId(0, ids::Objects), 5, 2);
    EXPECT_EQ(tree.node_count, 2u);
    EXPECT_EQ(count(tree.root), 2u);
    EXPECT_TRUE(tree.truncated);
}

TEST_F(OpcUaClientTest, BrowseBudgetMonotoneProperty) {
    auto s = Session::establish(url());
    const auto full = browse_nodes(s, NodeId(0, ids::Objects), 10, 1000);
    for (std::size_t budget = 1; budget <= full.node_count + 2; ++budget) {
        const auto t = browse_nodes(s, NodeId(0, ids::Objects), 10, budget);
        EXPECT_EQ(t.node_count, std::min(budget, full.node_count));
        EXPECT_EQ(t.truncated, budget < full.node_count);
    }
}

TEST_F(OpcUaClientTest, BrowseRejectsBadArguments) {
    auto s = Session::establish(url());
    EXPECT_EQ(kind_of([&] { browse_nodes(s, NodeId(0, ids::Objects), 0, 10); }), ErrorKind::InvalidArgument);
    EXPECT_EQ(kind_of([&] { browse_nodes(s, NodeId(0, ids::Objects), 2, 0); }), ErrorKind::InvalidArgument);
    EXPECT_EQ(kind_of([&] { browse_nodes(s, NodeId(9, 999)); }), ErrorKind::NodeUnknown);
}

TEST_F(OpcUaClientTest, EnumerateVariablesProfile) {
    auto s = Session::establish(url());
    const auto vars = enumerate_variables(s, 2);
    ASSERT_EQ(vars.size(), 8u);
    std::map<NodeId, VariableProfile> by_id;
    for (const auto& v : vars) by_id[v.node_id] = v;
    for (const auto& t : pl::temperature) {
        EXPECT_EQ(by_id.at(t).data_type, ValueType::Double);
        EXPECT_TRUE(by_id.at(t).writable);
    }
    EXPECT_EQ(by_id.at(pl::motor1_speed).data_type, ValueType::Int32);
    EXPECT_EQ(by_id.at(pl::motor1_status).data_type, ValueType::Boolean);
    EXPECT_EQ(by_id.at(pl::motor2_status).current_value, Value{false});
    const auto& up = by_id.at(pl::uptime);
    EXPECT_EQ(up.data_type, ValueType::Double);
    EXPECT_TRUE(up.readable);
    EXPECT_FALSE(up.writable);
    EXPECT_TRUE(enumerate_variables(s, 7).empty());
    const auto ns0 = enumerate_variables(s, 0);
    ASSERT_EQ(ns0.size(), 1u);
    EXPECT_EQ(ns0[0].data_type, ValueType::DateTime);
}

TEST(OpcUaWrite, WriteThenRead) {
    auto server = start();
    auto s = Session::establish(server->endpoint_url());
    write_node(s, pl::motor1_speed, std::int32_t{1200});
    EXPECT_EQ(read_node(s, pl::motor1_speed), Value{std::int32_t{1200}});
    auto other = Session::establish(server->endpoint_url());
    EXPECT_EQ(read_node(other, pl::motor1_speed), Value{std::int32_t{1200}});
    write_node(s, pl::motor2_status, true);
    EXPECT_EQ(read_node(s, pl::motor2_status), Value{true});
}

TEST_F(OpcUaClientTest, WriteFailures) {
    auto s = Session::establish(url());
    EXPECT_EQ(kind_of([&] { write_node(s, pl::uptime, 1.0); }), ErrorKind::AccessDenied);
    EXPECT_EQ(kind_of([&] { write_node(s, pl::motor1_speed, 12.5); }), ErrorKind::TypeMismatch);
    EXPECT_EQ(kind_of([&] { write_node(s, NodeId(9, 999), 1.0); }), ErrorKind::NodeUnknown);
    EXPECT_EQ(kind_of([&] { read_node(s, NodeId(9, 999)); }), ErrorKind::NodeUnknown);
    EXPECT_EQ(read_node(s, pl::motor1_speed).index(), Value{std::int32_t{0}}.index());
}

TEST_F(OpcUaClientTest, UptimeIsMonotone) {
    auto s = Session::establish(url());
    double last = -1;
    for (int i = 0; i < 5; ++i) {
        const double v = std::get<double>(read_node(s, pl::uptime));
        EXPECT_GE(v, last);
        last = v;
        std::this_thread::sleep_for(15ms);
    }
    EXPECT_GT(last, 0.0);
}

TEST_F(OpcUaClientTest, TemperaturesDriftWithinRange) {
    auto s = Session::establish(url());
    for (int i = 0; i < 5; ++i) {
        for (const auto& t : pl::temperature) {
            const double v = std::get<double>(read_node(s, t));
            EXPECT_GE(v, pl::temperature_min);
            EXPECT_LE(v, pl::temperature_max);
        }
        std::this_thread::sleep_for(25ms);
    }
}

TEST_F(OpcUaClientTest, ConcurrentSessions) {
    std::vector<std::future<std::size_t>> jobs;
    for (int i = 0; i < 6; ++i) {
        jobs.push_back(std::async(std::launch::async, [] {
            auto s = Session::establish(url());
            std::size_t n = 0;
            for (int k = 0; k < 10; ++k) n += enumerate_variables(s, 2).size();
            return n;
        }));
    }
    for (auto& j : jobs) EXPECT_EQ(j.get(), 80u);
}

TEST_F(OpcUaClientTest, OperationsAfterCloseFail) {
    auto s = Session::establish(url());
    EXPECT_TRUE(s.is_open());
    s.close();
    s.close();
    EXPECT_FALSE(s.is_open());
    EXPECT_EQ(kind_of([&] { read_node(s, pl::uptime); }), ErrorKind::SessionClosed);
    EXPECT_EQ(kind_of([&] { browse_nodes(s); }), ErrorKind::SessionClosed);
}

TEST_F(OpcUaClientTest, SessionIdentity) {
    auto s = Session::establish(url());
    EXPECT_EQ(s.identity(), "anonymous");
    Session moved = std::move(s);
    EXPECT_TRUE(moved.is_open());
    EXPECT_EQ(read_node(moved, pl::motor2_speed).index(), Value{std::int32_t{0}}.index());
}

TEST(OpcUaAuth, UserNameAccepted) {
    auto server = start(users_only());
    ClientOptions o;
    o.credentials = Credentials{"operator", "s3cret"};
    auto s = Session::establish(server->endpoint_url(), o);
    EXPECT_EQ(s.identity(), "operator");
    EXPECT_EQ(enumerate_variables(s, 2).size(), 8u);
}

TEST(OpcUaAuth, RejectedIdentities) {
    auto server = start(users_only());
    EXPECT_EQ(kind_of([&] { Session::establish(server->endpoint_url()); }), ErrorKind::AuthRejected);
    ClientOptions o;
    o.credentials = Credentials{"operator", "wrong"};
    EXPECT_EQ(kind_of([&] { Session::establish(server->endpoint_url(), o); }), ErrorKind::AuthRejected);
    o.credentials = Credentials{"nobody", "s3cret"};
    EXPECT_EQ(kind_of([&] { Session::establish(server->endpoint_url(), o); }), ErrorKind::AuthRejected);
}

TEST(OpcUaErrors, ConnectionFailures) {
    const auto port = otprobe::testing::closed_port();
    const auto url = "opc.tcp://127.0.0.1:" + std::to_string(port) + "/";
    EXPECT_EQ(kind_of([&] { Session::establish(url); }), ErrorKind::ConnectionRefused);
    EXPECT_EQ(kind_of([&] { get_endpoints(url); }), ErrorKind::ConnectionRefused);
    EXPECT_EQ(kind_of([&] { Session::establish("tcp://127.0.0.1:4840"); }), ErrorKind::InvalidUrl);
    ClientOptions o;
    o.security_policy = SecurityPolicy::Basic256Sha256;
    EXPECT_EQ(kind_of([&] { Session::establish(url, o); }), ErrorKind::Unsupported);
}

TEST(OpcUaErrors, ModbusPeerIsHandshakeRejectedOrTimeout) {
    auto modbus = otprobe::testing::start_testbed();
    ClientOptions o;
    o.timeout = 300ms;
    const auto kind = kind_of([&] {
        Session::establish("opc.tcp://127.0.0.1:" + std::to_string(modbus->port()) + "/", o);
    });
    EXPECT_TRUE(kind == ErrorKind::HandshakeRejected || kind == ErrorKind::Timeout) << to_string(kind);
}

TEST(OpcUaErrors, ServerStopClosesSessions) {
    auto server = start();
    auto s = Session::establish(server->endpoint_url());
    server->stop();
    const auto kind = kind_of([&] { read_node(s, pl::uptime); });
    EXPECT_TRUE(kind == ErrorKind::SessionClosed || kind == ErrorKind::Network) << to_string(kind);
}

TEST(OpcUaStatus, ErrorKindMapping) {
    EXPECT_EQ(error_kind_for_status(status::BadNodeIdUnknown), ErrorKind::NodeUnknown);
    EXPECT_EQ(error_kind_for_status(status::BadNotWritable), ErrorKind::AccessDenied);
    EXPECT_EQ(error_kind_for_status(status::BadUserAccessDenied), ErrorKind::AccessDenied);
    EXPECT_EQ(error_kind_for_status(status::BadTypeMismatch), ErrorKind::TypeMismatch);
    EXPECT_EQ(error_kind_for_status(status::BadSessionClosed), ErrorKind::SessionClosed);
    EXPECT_EQ(error_kind_for_status(status::BadServiceUnsupported), ErrorKind::ServiceFault);
}
