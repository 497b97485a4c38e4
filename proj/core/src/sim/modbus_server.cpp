#include "otprobe/sim/modbus_server.hpp"

#include <array>

#include "otprobe/modbus/frame.hpp"
#include "otprobe/modbus/pdu.hpp"

namespace otprobe::sim {

namespace {

constexpr net::Millis idle_poll{200};
constexpr net::Millis frame_timeout{5000};

}  // namespace

ModbusServer::ModbusServer(std::vector<DeviceProfile> profiles, ModbusServerOptions options)
    : options_(std::move(options)), store_(std::make_unique<RegisterStore>(std::move(profiles))) {
    server_ = std::make_unique<net::TcpServer>(
        options_.host, options_.port,
        [this](net::Socket& s, const std::atomic<bool>& stopping) { serve_connection(s, stopping); });
    if (options_.tick_period.count() > 0) {
        ticker_ = std::thread([this] {
            auto next = std::chrono::steady_clock::now() + options_.tick_period;
            const double seconds = std::chrono::duration<double>(options_.tick_period).count();
            while (ticking_.load()) {
                std::this_thread::sleep_for(std::chrono::milliseconds(50));
                if (std::chrono::steady_clock::now() >= next) {
                    store_->tick(seconds);
                    next += options_.tick_period;
                }
            }
        });
    }
}

ModbusServer::~ModbusServer() { stop(); }

void ModbusServer::stop() {
    ticking_.store(false);
    if (ticker_.joinable()) ticker_.join();
    if (server_) server_->stop();
}

void ModbusServer::serve_connection(net::Socket& sock, const std::atomic<bool>& stopping) {
    std::array<std::uint8_t, modbus::mbap_header_size + modbus::max_pdu_size> buf{};
    while (!stopping.load()) {
        std::size_t have = 0;
        try {
            have = sock.recv_some(std::span(buf.data(), 1), idle_poll);
        } catch (const net::NetError& e) {
            if (e.kind() == net::NetErrorKind::Timeout) continue;
            return;
        }
        sock.recv_exact(std::span(buf.data() + have, modbus::mbap_header_size - have), frame_timeout);

        modbus::MbapHeader header;
        try {
            header = modbus::decode_header(std::span(buf.data(), modbus::mbap_header_size));
        } catch (const modbus::FrameError&) {
            return;  // not Modbus; drop the connection
        }
        const std::size_t total = modbus::mbap_header_size - 1 + header.length;
        sock.recv_exact(std::span(buf.data() + modbus::mbap_header_size, total - modbus::mbap_header_size), frame_timeout);

        modbus::Frame response;
        try {
            auto request = modbus::decode_frame(std::span(buf.data(), total));
            auto answer = store_->handle_request(request, options_.unknown_unit);
            if (!answer) continue;
            response = std::move(*answer);
        } catch (const modbus::FrameError& e) {
            const std::uint8_t fc = buf[modbus::mbap_header_size] & 0x7F;
            if (!store_->has_unit(header.unit_id) && options_.unknown_unit == UnknownUnitPolicy::Silent) continue;
            const auto code = e.kind() == modbus::FrameErrorKind::UnknownFunctionCode
                                  ? modbus::ExceptionCode::IllegalFunction
                                  : modbus::ExceptionCode::IllegalDataValue;
            response.pdu = modbus::make_exception(fc, code);
            response.header = modbus::make_header(header.transaction_id, header.unit_id, response.pdu);
        }
        sock.send_all(modbus::encode_frame(response), frame_timeout);
    }
}

std::unique_ptr<ModbusServer> serve_modbus(const std::string& host, std::uint16_t port,
                                           std::vector<DeviceProfile> profiles, UnknownUnitPolicy unknown) {
    ModbusServerOptions opts;
    opts.host = host;
    opts.port = port;
    opts.unknown_unit = unknown;
    return std::make_unique<ModbusServer>(std::move(profiles), opts);
}

}  // namespace otprobe::sim
