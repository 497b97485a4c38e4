#include "otprobe/net/tcp_server.hpp"

#include <vector>

namespace otprobe::net {

TcpServer::TcpServer(const std::string& host, std::uint16_t port, Handler handler)
    : listener_(host, port), handler_(std::move(handler)) {
    acceptor_ = std::thread([this] { accept_loop(); });
}

TcpServer::~TcpServer() { stop(); }

void TcpServer::accept_loop() {
    while (!stopping_.load()) {
        Socket sock = listener_.accept(Millis(100));
        reap_finished();
        if (!sock.valid()) continue;
        std::lock_guard lock(mutex_);
        if (stopping_.load()) break;
        auto conn = std::make_unique<Connection>();
        conn->socket = std::move(sock);
        Connection* raw = conn.get();
        connections_.push_back(std::move(conn));
        raw->worker = std::thread([this, raw] {
            try {
                handler_(raw->socket, stopping_);
            } catch (...) {
                // A misbehaving peer must not take the server down.
            }
            raw->socket.shutdown();
            raw->done.store(true);
        });
    }
}

void TcpServer::reap_finished() {
    std::list<std::unique_ptr<Connection>> finished;
    {
        std::lock_guard lock(mutex_);
        for (auto it = connections_.begin(); it != connections_.end();) {
            if ((*it)->done.load()) {
                finished.push_back(std::move(*it));
                it = connections_.erase(it);
            } else {
                ++it;
            }
        }
    }
    for (auto& c : finished) {
        if (c->worker.joinable()) c->worker.join();
    }
}

void TcpServer::stop() {
    if (stopping_.exchange(true)) {
        if (acceptor_.joinable()) acceptor_.join();
        return;
    }
    if (acceptor_.joinable()) acceptor_.join();
    listener_.close();
    std::list<std::unique_ptr<Connection>> all;
    {
        std::lock_guard lock(mutex_);
        for (auto& c : connections_) c->socket.shutdown();
        all.swap(connections_);
    }
    for (auto& c : all) {
        if (c->worker.joinable()) c->worker.join();
    }
}

}  // namespace otprobe::net
