#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace otprobe::netscan {

enum class ErrorKind {
    InvalidHostSpec,
    InvalidPortSpec,
    EmptyExpansion,
    InvalidConfig,
};

const char* to_string(ErrorKind kind) noexcept;

class ScanError : public std::invalid_argument {
public:
    ScanError(ErrorKind kind, const std::string& what) : std::invalid_argument(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Expanded, deduplicated host and port sets. Hosts keep first-seen order,
/// ports are ascending.
struct ScanTarget {
    std::vector<std::string> hosts;
    std::vector<std::uint16_t> ports;

    std::size_t size() const noexcept { return hosts.size() * ports.size(); }
};

/// Largest CIDR block accepted (/16).
inline constexpr std::size_t max_expanded_hosts = 65536;

/// host_spec: comma/space separated IPv4 or IPv6 literals, IPv4 CIDR blocks
/// ("192.168.1.0/30" includes network and broadcast addresses) and host names.
/// port_spec: comma separated ports and inclusive ranges ("502,4840,5000-5010").
ScanTarget parse_targets(const std::string& host_spec, const std::string& port_spec);

enum class ServiceTag {
    Modbus,
    OpcUa,
    Unknown,
};

const char* to_string(ServiceTag tag) noexcept;
std::optional<ServiceTag> parse_service_tag(std::string_view text) noexcept;

struct Classification {
    ServiceTag tag{ServiceTag::Unknown};
    std::string evidence;
};

/// OPC UA Hello first, then a Modbus read of one holding register at address 0
/// on unit 0. Neither probe writes anything. Failures fall through to Unknown.
Classification classify_service(const std::string& host, std::uint16_t port,
                                std::chrono::milliseconds timeout = std::chrono::milliseconds(500));

struct ScanFinding {
    std::string host;
    std::uint16_t port{0};
    std::string state{"open"};
    ServiceTag service{ServiceTag::Unknown};
    std::string evidence;
    std::string timestamp;
};

/// Called from the scanning thread; must not block for long.
struct ScanHooks {
    std::function<void(const std::string& host, std::uint16_t port, std::size_t pending)> connect_started;
    std::function<void(const std::string& host, std::uint16_t port, bool open, std::size_t pending)> connect_finished;
};

struct ScanConfig {
    std::chrono::milliseconds timeout{500};
    std::size_t concurrency{256};
    /// Extra attempts after a timeout or transient error; refusals are final.
    unsigned retries{0};
    bool classify{true};
    /// Whole-scan cap; unfinished probes are abandoned when it expires.
    std::optional<std::chrono::milliseconds> deadline;
    ScanHooks hooks;

    /// Throws ScanError(InvalidConfig).
    void validate() const;
};

struct ScanReport {
    std::vector<ScanFinding> findings;
    std::string host_spec;
    std::string port_spec;
    std::size_t probed{0};
    /// Host names that did not resolve; their ports count as probed and closed.
    std::vector<std::string> unresolved;
    bool deadline_hit{false};
    std::string started;
    std::string finished;
};

/// Connect scan over every (host, port) pair, findings sorted by host order then port.
ScanReport run_scan(const ScanTarget& target, const ScanConfig& config = {});
ScanReport run_scan(const std::string& host_spec, const std::string& port_spec, const ScanConfig& config = {});

nlohmann::json to_json(const ScanFinding& f);
ScanFinding finding_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScanReport& r);

/// One JSON object per line.
void write_jsonl(std::ostream& out, const std::vector<ScanFinding>& findings);
std::vector<ScanFinding> read_jsonl(std::istream& in);

}  // namespace otprobe::netscan
