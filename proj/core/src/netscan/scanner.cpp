#include "otprobe/netscan/scanner.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <deque>
#include <istream>
#include <ostream>
#include <set>
#include <thread>

#include "otprobe/modbus/frame.hpp"
#include "otprobe/modbus/pdu.hpp"
#include "otprobe/net/socket.hpp"
#include "otprobe/opcua/messages.hpp"
#include "otprobe/util/time.hpp"

namespace otprobe::netscan {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint16_t modbus_probe_transaction = 0x4F50;
constexpr std::size_t max_classify_workers = 32;
constexpr std::uint32_t max_probe_reply = 65536;

std::vector<std::string_view> split(std::string_view text, std::string_view separators) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto next = text.find_first_of(separators, pos);
        const auto piece = text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
        if (!piece.empty()) out.push_back(piece);
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

template <typename T>
std::optional<T> parse_uint(std::string_view s) {
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<std::uint32_t> parse_ipv4(std::string_view s) {
    in_addr a{};
    if (inet_pton(AF_INET, std::string(s).c_str(), &a) != 1) return std::nullopt;
    return ntohl(a.s_addr);
}

std::string format_ipv4(std::uint32_t host_order) {
    in_addr a{};
    a.s_addr = htonl(host_order);
    char buf[INET_ADDRSTRLEN]{};
    inet_ntop(AF_INET, &a, buf, sizeof buf);
    return buf;
}

bool valid_hostname(std::string_view s) {
    if (s.empty() || s.size() > 253) return false;
    if (s.back() == '.') s.remove_suffix(1);
    for (auto label : split(s, ".")) {
        if (label.size() > 63 || label.front() == '-' || label.back() == '-') return false;
        for (char c : label) {
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
        }
    }
    // Empty labels ("a..b") are dropped by split; reject them explicitly.
    return s.find("..") == std::string_view::npos && s.front() != '.';
}

void expand_host(std::string_view token, std::vector<std::string>& out) {
    const std::string tok(token);
    if (const auto slash = token.find('/'); slash != std::string_view::npos) {
        const auto base = parse_ipv4(token.substr(0, slash));
        const auto prefix = parse_uint<unsigned>(token.substr(slash + 1));
        if (!base) throw ScanError(ErrorKind::InvalidHostSpec, "CIDR block '" + tok + "' needs an IPv4 base address");
        if (!prefix || *prefix > 32) throw ScanError(ErrorKind::InvalidHostSpec, "CIDR prefix in '" + tok + "' must be 0-32");
        const std::uint64_t count = std::uint64_t{1} << (32 - *prefix);
        if (count > max_expanded_hosts)
            throw ScanError(ErrorKind::InvalidHostSpec,
                            "CIDR block '" + tok + "' expands to " + std::to_string(count) + " hosts (limit /16)");
        const std::uint32_t mask = *prefix == 0 ? 0 : ~std::uint32_t{0} << (32 - *prefix);
        const std::uint32_t network = *base & mask;
        for (std::uint64_t i = 0; i < count; ++i) out.push_back(format_ipv4(network + static_cast<std::uint32_t>(i)));
        return;
    }
    if (parse_ipv4(token)) {
        out.push_back(tok);
        return;
    }
    if (token.find(':') != std::string_view::npos) {
        std::string v6 = tok;
        if (v6.size() > 2 && v6.front() == '[' && v6.back() == ']') v6 = v6.substr(1, v6.size() - 2);
        in6_addr a{};
        if (inet_pton(AF_INET6, v6.c_str(), &a) != 1) throw ScanError(ErrorKind::InvalidHostSpec, "invalid IPv6 address '" + tok + "'");
        out.push_back(v6);
        return;
    }
    if (token.find_first_not_of("0123456789.") == std::string_view::npos)
        throw ScanError(ErrorKind::InvalidHostSpec, "invalid IPv4 address '" + tok + "'");
    if (!valid_hostname(token)) throw ScanError(ErrorKind::InvalidHostSpec, "invalid host name '" + tok + "'");
    out.push_back(tok);
}

struct Resolved {
    sockaddr_storage addr{};
    socklen_t len{0};
};

std::optional<Resolved> resolve(const std::string& host) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res) return std::nullopt;
    Resolved r;
    // Prefer IPv4 so "localhost" matches simulators bound to 127.0.0.1.
    const addrinfo* pick = res;
    for (auto* p = res; p; p = p->ai_next) {
        if (p->ai_family == AF_INET) {
            pick = p;
            break;
        }
    }
    std::memcpy(&r.addr, pick->ai_addr, pick->ai_addrlen);
    r.len = static_cast<socklen_t>(pick->ai_addrlen);
    freeaddrinfo(res);
    return r;
}

void set_port(Resolved& r, std::uint16_t port) {
    if (r.addr.ss_family == AF_INET) reinterpret_cast<sockaddr_in*>(&r.addr)->sin_port = htons(port);
    else reinterpret_cast<sockaddr_in6*>(&r.addr)->sin6_port = htons(port);
}

std::optional<Classification> probe_opcua(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout) {
    try {
        auto sock = net::connect_tcp(host, port, timeout);
        opcua::Writer w;
        opcua::Hello hello;
        hello.endpoint_url = "opc.tcp://" + host + ":" + std::to_string(port) + "/";
        hello.encode(w);
        sock.send_all(opcua::frame_message("HEL", w.bytes()), timeout);
        std::array<std::uint8_t, opcua::message_header_size> head{};
        sock.recv_exact(head, timeout);
        const auto h = opcua::decode_message_header(head);
        if (h.chunk != 'F' || h.size > max_probe_reply) return std::nullopt;
        opcua::Bytes body(h.size - opcua::message_header_size);
        sock.recv_exact(body, timeout);
        opcua::Reader r(body);
        if (h.type_view() == "ACK") {
            const auto ack = opcua::Acknowledge::decode(r);
            return Classification{ServiceTag::OpcUa, "OPC UA Acknowledge to Hello (protocol version " +
                                                         std::to_string(ack.protocol_version) + ", receive buffer " +
                                                         std::to_string(ack.receive_buffer_size) + ")"};
        }
        if (h.type_view() == "ERR") {
            const auto err = opcua::ErrorMessage::decode(r);
            return Classification{ServiceTag::OpcUa, "OPC UA Error reply to Hello (" + opcua::status::name(err.error) + ")"};
        }
    } catch (const std::exception&) {
    }
    return std::nullopt;
}

std::optional<Classification> probe_modbus(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout) {
    try {
        auto sock = net::connect_tcp(host, port, timeout);
        const auto pdu = modbus::make_read_request(modbus::DataType::HoldingRegister, 0, 1);
        sock.send_all(modbus::encode_frame(modbus::make_header(modbus_probe_transaction, 0, pdu), pdu), timeout);
        std::array<std::uint8_t, modbus::mbap_header_size> head{};
        sock.recv_exact(head, timeout);
        const auto h = modbus::decode_header(head);
        if (h.transaction_id != modbus_probe_transaction || h.unit_id != 0) return std::nullopt;
        std::vector<std::uint8_t> rest(h.length - 1u);
        sock.recv_exact(rest, timeout);
        if (rest.empty()) return std::nullopt;
        const std::uint8_t fc = rest[0];
        if (fc == 0x03 && rest.size() >= 2 && rest[1] == rest.size() - 2 && rest[1] % 2 == 0 && rest[1] > 0)
            return Classification{ServiceTag::Modbus, "Modbus read holding register response (" + std::to_string(rest[1]) +
                                                          " data bytes, unit 0)"};
        if (fc == (0x03 | modbus::exception_flag) && rest.size() == 2)
            return Classification{ServiceTag::Modbus, "Modbus exception " + std::to_string(rest[1]) + " (" +
                                                          modbus::describe_exception(rest[1]) + ") to read on unit 0"};
    } catch (const std::exception&) {
    }
    return std::nullopt;
}

struct Job {
    std::size_t host;
    std::uint16_t port;
    Resolved addr;
    unsigned attempts{0};
};

struct Pending {
    int fd;
    std::size_t job;
    Clock::time_point expires;
};

}  // namespace

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidHostSpec: return "InvalidHostSpec";
        case ErrorKind::InvalidPortSpec: return "InvalidPortSpec";
        case ErrorKind::EmptyExpansion: return "EmptyExpansion";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
    }
    return "Unknown";
}

const char* to_string(ServiceTag tag) noexcept {
    switch (tag) {
        case ServiceTag::Modbus: return "modbus";
        case ServiceTag::OpcUa: return "opcua";
        case ServiceTag::Unknown: return "unknown";
    }
    return "unknown";
}

std::optional<ServiceTag> parse_service_tag(std::string_view text) noexcept {
    for (auto t : {ServiceTag::Modbus, ServiceTag::OpcUa, ServiceTag::Unknown}) {
        if (text == to_string(t)) return t;
    }
    return std::nullopt;
}

ScanTarget parse_targets(const std::string& host_spec, const std::string& port_spec) {
    ScanTarget t;
    std::vector<std::string> expanded;
    for (auto token : split(host_spec, ", \t\n")) expand_host(token, expanded);
    if (expanded.empty()) throw ScanError(ErrorKind::EmptyExpansion, "host specification is empty");
    if (expanded.size() > max_expanded_hosts)
        throw ScanError(ErrorKind::InvalidHostSpec, "host specification expands to more than " + std::to_string(max_expanded_hosts) + " hosts");
    std::set<std::string> seen;
    for (auto& h : expanded) {
        if (seen.insert(h).second) t.hosts.push_back(std::move(h));
    }

    std::set<std::uint16_t> ports;
    for (auto raw : split(port_spec, ",")) {
        const auto token = trim(raw);
        if (token.empty()) continue;
        const std::string tok(token);
        const auto dash = token.find('-');
        const auto lo = parse_uint<unsigned>(trim(token.substr(0, dash)));
        const auto hi = dash == std::string_view::npos ? lo : parse_uint<unsigned>(trim(token.substr(dash + 1)));
        if (!lo || !hi) throw ScanError(ErrorKind::InvalidPortSpec, "invalid port '" + tok + "'");
        if (*lo < 1 || *hi > 65535 || *lo > 65535 || *hi < 1)
            throw ScanError(ErrorKind::InvalidPortSpec, "port '" + tok + "' is outside 1-65535");
        if (*lo > *hi) throw ScanError(ErrorKind::InvalidPortSpec, "port range '" + tok + "' is reversed");
        for (unsigned p = *lo; p <= *hi; ++p) ports.insert(static_cast<std::uint16_t>(p));
    }
    if (ports.empty()) throw ScanError(ErrorKind::EmptyExpansion, "port specification is empty");
    t.ports.assign(ports.begin(), ports.end());
    return t;
}

void ScanConfig::validate() const {
    if (concurrency < 1) throw ScanError(ErrorKind::InvalidConfig, "concurrency must be at least 1");
    if (timeout.count() <= 0) throw ScanError(ErrorKind::InvalidConfig, "timeout must be positive");
    if (deadline && deadline->count() <= 0) throw ScanError(ErrorKind::InvalidConfig, "deadline must be positive");
}

Classification classify_service(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout) {
    if (auto c = probe_opcua(host, port, timeout)) return *c;
    if (auto c = probe_modbus(host, port, timeout)) return *c;
    return {ServiceTag::Unknown, "no OPC UA or Modbus reply"};
}

ScanReport run_scan(const ScanTarget& target, const ScanConfig& config) {
    config.validate();
    ScanReport report;
    report.started = util::iso8601_now();
    const auto start = Clock::now();
    const auto deadline = config.deadline ? std::optional(start + *config.deadline) : std::nullopt;
    auto expired = [&] { return deadline && Clock::now() >= *deadline; };

    std::vector<Job> jobs;
    for (std::size_t h = 0; h < target.hosts.size(); ++h) {
        auto addr = resolve(target.hosts[h]);
        if (!addr) {
            report.unresolved.push_back(target.hosts[h]);
            report.probed += target.ports.size();
            continue;
        }
        for (auto port : target.ports) {
            Job j{h, port, *addr, 0};
            set_port(j.addr, port);
            jobs.push_back(j);
        }
    }
    report.probed += jobs.size();

    std::deque<std::size_t> ready;
    for (std::size_t i = 0; i < jobs.size(); ++i) ready.push_back(i);
    std::vector<bool> open(jobs.size(), false);
    std::vector<Pending> pending;

    auto finish = [&](std::size_t job, bool is_open) {
        open[job] = is_open;
        if (config.hooks.connect_finished)
            config.hooks.connect_finished(target.hosts[jobs[job].host], jobs[job].port, is_open, pending.size());
    };
    auto retry_or_close = [&](std::size_t job) {
        if (++jobs[job].attempts <= config.retries) ready.push_back(job);
        else finish(job, false);
    };

    while (!ready.empty() || !pending.empty()) {
        if (expired()) {
            report.deadline_hit = true;
            break;
        }
        while (!ready.empty() && pending.size() < config.concurrency) {
            const std::size_t job = ready.front();
            ready.pop_front();
            const auto& addr = jobs[job].addr;
            const int fd = ::socket(addr.addr.ss_family, SOCK_STREAM | SOCK_NONBLOCK | SOCK_CLOEXEC, 0);
            if (fd < 0) {
                retry_or_close(job);
                continue;
            }
            const int rc = ::connect(fd, reinterpret_cast<const sockaddr*>(&addr.addr), addr.len);
            if (rc == 0) {
                ::close(fd);
                finish(job, true);
                continue;
            }
            if (errno != EINPROGRESS) {
                const int err = errno;
                ::close(fd);
                if (err == ECONNREFUSED) finish(job, false);
                else retry_or_close(job);
                continue;
            }
            pending.push_back({fd, job, Clock::now() + config.timeout});
            if (config.hooks.connect_started)
                config.hooks.connect_started(target.hosts[jobs[job].host], jobs[job].port, pending.size());
        }
        if (pending.empty()) continue;

        auto wake = std::min_element(pending.begin(), pending.end(),
                                     [](const Pending& a, const Pending& b) { return a.expires < b.expires; })->expires;
        if (deadline) wake = std::min(wake, *deadline);
        const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(wake - Clock::now()).count();
        std::vector<pollfd> fds;
        fds.reserve(pending.size());
        for (const auto& p : pending) fds.push_back({p.fd, POLLOUT, 0});
        ::poll(fds.data(), fds.size(), static_cast<int>(std::max<long long>(0, wait) + 1));

        const auto now = Clock::now();
        std::vector<Pending> still;
        std::vector<std::pair<std::size_t, int>> done;  // job, SO_ERROR (-1 for timeout)
        for (std::size_t i = 0; i < pending.size(); ++i) {
            const auto& p = pending[i];
            if (fds[i].revents != 0) {
                int err = 0;
                socklen_t len = sizeof err;
                ::getsockopt(p.fd, SOL_SOCKET, SO_ERROR, &err, &len);
                ::close(p.fd);
                done.emplace_back(p.job, err);
            } else if (now >= p.expires) {
                ::close(p.fd);
                done.emplace_back(p.job, -1);
            } else {
                still.push_back(p);
            }
        }
        pending = std::move(still);
        for (auto [job, err] : done) {
            if (err == 0) finish(job, true);
            else if (err == ECONNREFUSED) finish(job, false);
            else retry_or_close(job);
        }
    }
    for (const auto& p : pending) ::close(p.fd);

    std::vector<std::size_t> open_jobs;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (open[i]) open_jobs.push_back(i);
    }
    std::vector<ScanFinding> findings(open_jobs.size());
    for (std::size_t i = 0; i < open_jobs.size(); ++i) {
        const auto& j = jobs[open_jobs[i]];
        findings[i].host = target.hosts[j.host];
        findings[i].port = j.port;
        findings[i].evidence = "tcp connect succeeded";
        findings[i].timestamp = util::iso8601_now();
    }
    if (config.classify && !findings.empty()) {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next++; i < findings.size(); i = next++) {
                if (expired()) {
                    findings[i].evidence = "tcp connect succeeded; classification skipped (deadline)";
                    continue;
                }
                const auto c = classify_service(findings[i].host, findings[i].port, config.timeout);
                findings[i].service = c.tag;
                findings[i].evidence = c.evidence;
                findings[i].timestamp = util::iso8601_now();
            }
        };
        const std::size_t workers = std::min({findings.size(), config.concurrency, max_classify_workers});
        std::vector<std::thread> threads;
        for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(worker);
        worker();
        for (auto& t : threads) t.join();
        if (expired()) report.deadline_hit = true;
    }
    report.findings = std::move(findings);
    report.finished = util::iso8601_now();
    return report;
}

ScanReport run_scan(const std::string& host_spec, const std::string& port_spec, const ScanConfig& config) {
    auto report = run_scan(parse_targets(host_spec, port_spec), config);
    report.host_spec = host_spec;
    report.port_spec = port_spec;
    return report;
}

nlohmann::json to_json(const ScanFinding& f) {
    return {{"host", f.host},       {"port", f.port},         {"state", f.state},
            {"service", to_string(f.service)}, {"evidence", f.evidence}, {"timestamp", f.timestamp}};
}

ScanFinding finding_from_json(const nlohmann::json& j) {
    ScanFinding f;
    f.host = j.at("host").get<std::string>();
    f.port = j.at("port").get<std::uint16_t>();
    f.state = j.value("state", "open");
    const auto tag = parse_service_tag(j.value("service", "unknown"));
    if (!tag) throw std::invalid_argument("unknown service tag '" + j.value("service", "") + "'");
    f.service = *tag;
    f.evidence = j.value("evidence", "");
    f.timestamp = j.value("timestamp", "");
    return f;
}

nlohmann::json to_json(const ScanReport& r) {
    auto findings = nlohmann::json::array();
    for (const auto& f : r.findings) findings.push_back(to_json(f));
    return {{"hosts", r.host_spec},         {"ports", r.port_spec},     {"probed", r.probed},
            {"unresolved", r.unresolved},   {"deadline_hit", r.deadline_hit},
            {"started", r.started},         {"finished", r.finished},   {"findings", findings}};
}

void write_jsonl(std::ostream& out, const std::vector<ScanFinding>& findings) {
    for (const auto& f : findings) out << to_json(f).dump() << '\n';
}

std::vector<ScanFinding> read_jsonl(std::istream& in) {
    std::vector<ScanFinding> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        out.push_back(finding_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

}  // namespace otprobe::netscan
