#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace otprobe::net {

enum class NetErrorKind {
    Resolve,
    Refused,
    Timeout,
    Closed,
    Io,
    Bind,
};

const char* to_string(NetErrorKind kind) noexcept;

class NetError : public std::runtime_error {
public:
    NetError(NetErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    NetErrorKind kind() const noexcept { return kind_; }

private:
    NetErrorKind kind_;
};

using Millis = std::chrono::milliseconds;

/// Owning wrapper around a connected stream socket descriptor.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) noexcept : fd_(fd) {}
    ~Socket();

    Socket(Socket&& other) noexcept;
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    bool valid() const noexcept { return fd_ >= 0; }
    int fd() const noexcept { return fd_; }
    void close() noexcept;
    /// Half-closes both directions; unblocks a reader in another thread.
    void shutdown() noexcept;

    void send_all(std::span<const std::uint8_t> bytes, Millis timeout);
    /// Reads exactly out.size() bytes or throws (Timeout / Closed / Io).
    void recv_exact(std::span<std::uint8_t> out, Millis timeout);
    /// Reads whatever arrives within the timeout (at least one byte).
    std::size_t recv_some(std::span<std::uint8_t> out, Millis timeout);

    std::string peer_address() const;

private:
    int fd_{-1};
};

/// Resolves host (name or literal) to IPv4/IPv6 and connects with a deadline.
Socket connect_tcp(const std::string& host, std::uint16_t port, Millis timeout);

/// Listening socket; port 0 picks an ephemeral port.
class Listener {
public:
    Listener(const std::string& host, std::uint16_t port);
    ~Listener() = default;

    Listener(Listener&&) noexcept = default;
    Listener& operator=(Listener&&) noexcept = default;

    std::uint16_t port() const noexcept { return port_; }
    /// Waits up to `poll` for a connection; returns an invalid Socket on timeout.
    Socket accept(Millis poll);
    void close() noexcept { sock_.close(); }

private:
    Socket sock_;
    std::uint16_t port_{0};
};

}  // namespace otprobe::net
