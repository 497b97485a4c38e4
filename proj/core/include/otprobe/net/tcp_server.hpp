#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "otprobe/net/socket.hpp"

namespace otprobe::net {

/// Thread-per-connection acceptor shared by the protocol simulators.
///
/// The handler runs on its own thread and should return when the peer
/// disconnects or `stopping()` becomes true. stop() shuts down every live
/// socket so blocked reads return promptly.
class TcpServer {
public:
    using Handler = std::function<void(Socket&, const std::atomic<bool>& stopping)>;

    TcpServer(const std::string& host, std::uint16_t port, Handler handler);
    ~TcpServer();

    TcpServer(const TcpServer&) = delete;
    TcpServer& operator=(const TcpServer&) = delete;

    std::uint16_t port() const noexcept { return listener_.port(); }
    void stop();

private:
    struct Connection {
        Socket socket;
        std::thread worker;
        std::atomic<bool> done{false};
    };

    void accept_loop();
    void reap_finished();

    Listener listener_;
    Handler handler_;
    std::atomic<bool> stopping_{false};
    std::mutex mutex_;
    std::list<std::unique_ptr<Connection>> connections_;
    std::thread acceptor_;
};

}  // namespace otprobe::net
