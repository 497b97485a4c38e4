#include "otprobe/net/socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <memory>

namespace otprobe::net {

namespace {

using Clock = std::chrono::steady_clock;

int remaining_ms(Clock::time_point deadline) {
    auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now()).count();
    return left < 0 ? 0 : static_cast<int>(left);
}

// Returns false on timeout.
bool wait_for(int fd, short events, Clock::time_point deadline) {
    for (;;) {
        pollfd pfd{fd, events, 0};
        int rc = ::poll(&pfd, 1, remaining_ms(deadline));
        if (rc > 0) return true;
        if (rc == 0) return false;
        if (errno != EINTR) throw NetError(NetErrorKind::Io, std::string("poll: ") + std::strerror(errno));
    }
}

void set_nonblocking(int fd, bool on) {
    int flags = ::fcntl(fd, F_GETFL, 0);
    if (flags < 0) return;
    ::fcntl(fd, F_SETFL, on ? (flags | O_NONBLOCK) : (flags & ~O_NONBLOCK));
}

struct AddrInfoDeleter {
    void operator()(addrinfo* p) const noexcept { ::freeaddrinfo(p); }
};

}  // namespace

const char* to_string(NetErrorKind kind) noexcept {
    switch (kind) {
        case NetErrorKind::Resolve: return "resolve";
        case NetErrorKind::Refused: return "connection_refused";
        case NetErrorKind::Timeout: return "timeout";
        case NetErrorKind::Closed: return "closed";
        case NetErrorKind::Io: return "io";
        case NetErrorKind::Bind: return "bind";
    }
    return "io";
}

Socket::~Socket() { close(); }

Socket::Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

void Socket::close() noexcept {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void Socket::shutdown() noexcept {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::send_all(std::span<const std::uint8_t> bytes, Millis timeout) {
    auto deadline = Clock::now() + timeout;
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL | MSG_DONTWAIT);
        if (n > 0) {
            sent += static_cast<std::size_t>(n);
            continue;
        }
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
            if (!wait_for(fd_, POLLOUT, deadline)) throw NetError(NetErrorKind::Timeout, "send timed out");
            continue;
        }
        if (n < 0 && errno == EINTR) continue;
        if (n < 0 && (errno == EPIPE || errno == ECONNRESET))
            throw NetError(NetErrorKind::Closed, "peer closed connection");
        throw NetError(NetErrorKind::Io, std::string("send: ") + std::strerror(errno));
    }
}

std::size_t Socket::recv_some(std::span<std::uint8_t> out, Millis timeout) {
    auto deadline = Clock::now() + timeout;
    for (;;) {
        if (!wait_for(fd_, POLLIN, deadline)) throw NetError(NetErrorKind::Timeout, "receive timed out");
        ssize_t n = ::recv(fd_, out.data(), out.size(), MSG_DONTWAIT);
        if (n > 0) return static_cast<std::size_t>(n);
        if (n == 0) throw NetError(NetErrorKind::Closed, "peer closed connection");
        if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) continue;
        if (errno == ECONNRESET) throw NetError(NetErrorKind::Closed, "connection reset by peer");
        throw NetError(NetErrorKind::Io, std::string("recv: ") + std::strerror(errno));
    }
}

void Socket::recv_exact(std::span<std::uint8_t> out, Millis timeout) {
    auto deadline = Clock::now() + timeout;
    std::size_t got = 0;
    while (got < out.size()) {
        auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now());
        if (left.count() <= 0) throw NetError(NetErrorKind::Timeout, "receive timed out");
        got += recv_some(out.subspan(got), left);
    }
}

std::string Socket::peer_address() const {
    sockaddr_storage ss{};
    socklen_t len = sizeof(ss);
    if (::getpeername(fd_, reinterpret_cast<sockaddr*>(&ss), &len) != 0) return {};
    char buf[INET6_ADDRSTRLEN] = {};
    if (ss.ss_family == AF_INET) {
        auto* in = reinterpret_cast<sockaddr_in*>(&ss);
        ::inet_ntop(AF_INET, &in->sin_addr, buf, sizeof(buf));
    } else if (ss.ss_family == AF_INET6) {
        auto* in6 = reinterpret_cast<sockaddr_in6*>(&ss);
        ::inet_ntop(AF_INET6, &in6->sin6_addr, buf, sizeof(buf));
    }
    return buf;
}

Socket connect_tcp(const std::string& host, std::uint16_t port, Millis timeout) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* raw = nullptr;
    const std::string service = std::to_string(port);
    int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &raw);
    if (rc != 0) throw NetError(NetErrorKind::Resolve, "cannot resolve '" + host + "': " + ::gai_strerror(rc));
    std::unique_ptr<addrinfo, AddrInfoDeleter> list(raw);

    auto deadline = Clock::now() + timeout;
    NetError last(NetErrorKind::Refused, "connection refused by " + host + ":" + service);
    for (addrinfo* ai = list.get(); ai != nullptr; ai = ai->ai_next) {
        Socket sock(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
        if (!sock.valid()) continue;
        set_nonblocking(sock.fd(), true);
        int crc = ::connect(sock.fd(), ai->ai_addr, ai->ai_addrlen);
        if (crc != 0 && errno != EINPROGRESS) {
            last = NetError(errno == ECONNREFUSED ? NetErrorKind::Refused : NetErrorKind::Io,
                            "connect " + host + ":" + service + ": " + std::strerror(errno));
            continue;
        }
        if (crc != 0) {
            if (!wait_for(sock.fd(), POLLOUT, deadline)) {
                last = NetError(NetErrorKind::Timeout, "connect " + host + ":" + service + " timed out");
                continue;
            }
            int err = 0;
            socklen_t len = sizeof(err);
            ::getsockopt(sock.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
            if (err != 0) {
                last = NetError(err == ECONNREFUSED ? NetErrorKind::Refused : NetErrorKind::Io,
                                "connect " + host + ":" + service + ": " + std::strerror(err));
                continue;
            }
        }
        int one = 1;
        ::setsockopt(sock.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        return sock;
    }
    throw last;
}

Listener::Listener(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* raw = nullptr;
    const std::string service = std::to_string(port);
    const char* node = host.empty() ? nullptr : host.c_str();
    if (int rc = ::getaddrinfo(node, service.c_str(), &hints, &raw); rc != 0)
        throw NetError(NetErrorKind::Bind, "cannot resolve bind address '" + host + "': " + ::gai_strerror(rc));
    std::unique_ptr<addrinfo, AddrInfoDeleter> list(raw);

    std::string reason = "no usable address";
    for (addrinfo* ai = list.get(); ai != nullptr; ai = ai->ai_next) {
        Socket sock(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
        if (!sock.valid()) continue;
        int one = 1;
        ::setsockopt(sock.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        if (::bind(sock.fd(), ai->ai_addr, ai->ai_addrlen) != 0 || ::listen(sock.fd(), 128) != 0) {
            reason = std::strerror(errno);
            continue;
        }
        sockaddr_storage ss{};
        socklen_t len = sizeof(ss);
        ::getsockname(sock.fd(), reinterpret_cast<sockaddr*>(&ss), &len);
        port_ = ss.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&ss)->sin6_port)
                                         : ntohs(reinterpret_cast<sockaddr_in*>(&ss)->sin_port);
        sock_ = std::move(sock);
        return;
    }
    throw NetError(NetErrorKind::Bind, "cannot bind " + host + ":" + service + ": " + reason);
}

Socket Listener::accept(Millis poll) {
    if (!sock_.valid()) return {};
    pollfd pfd{sock_.fd(), POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(poll.count()));
    if (rc <= 0) return {};
    int fd = ::accept4(sock_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) return {};
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return Socket(fd);
}

}  // namespace otprobe::net
