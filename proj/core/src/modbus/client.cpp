#include "otprobe/modbus/client.hpp"

#include <algorithm>
#include <array>

namespace otprobe::modbus {

namespace {

using Clock = std::chrono::steady_clock;

ModbusError from_net(const net::NetError& e) {
    switch (e.kind()) {
        case net::NetErrorKind::Timeout: return ModbusError(ErrorKind::Timeout, e.what());
        case net::NetErrorKind::Refused: return ModbusError(ErrorKind::ConnectionRefused, e.what());
        default: return ModbusError(ErrorKind::Network, e.what());
    }
}

void check_range(std::uint16_t address, std::size_t count) {
    if (count == 0) throw ModbusError(ErrorKind::InvalidArgument, "count must be positive");
    if (address + count > 65536u)
        throw ModbusError(ErrorKind::InvalidArgument,
                          "address " + std::to_string(address) + " + count " + std::to_string(count) + " exceeds 65536");
}

}  // namespace

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Timeout: return "timeout";
        case ErrorKind::ConnectionRefused: return "connection_refused";
        case ErrorKind::ExceptionResponse: return "exception_response";
        case ErrorKind::FrameError: return "frame_error";
        case ErrorKind::NotWritable: return "not_writable";
        case ErrorKind::InvalidArgument: return "invalid_argument";
        case ErrorKind::Network: return "network";
    }
    return "network";
}

void ConnectionParams::validate() const {
    if (port == 0) throw ModbusError(ErrorKind::InvalidArgument, "port must be in [1, 65535]");
    if (timeout.count() <= 0) throw ModbusError(ErrorKind::InvalidArgument, "timeout must be positive");
    if (host.empty()) throw ModbusError(ErrorKind::InvalidArgument, "host must not be empty");
}

Client::Client(ConnectionParams params) : params_(std::move(params)) { params_.validate(); }

void Client::ensure_connected() {
    if (socket_.valid()) {
        reused_ = true;
        return;
    }
    try {
        socket_ = net::connect_tcp(params_.host, params_.port, params_.timeout);
        reused_ = false;
    } catch (const net::NetError& e) {
        throw from_net(e);
    }
}

Pdu Client::exchange_once(const Pdu& request, std::uint8_t unit) {
    const std::uint16_t txid = next_transaction_++;
    const auto frame = encode_frame(make_header(txid, unit, request), request);
    const auto deadline = Clock::now() + params_.timeout;
    auto left = [&] {
        auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
        if (ms.count() <= 0) throw net::NetError(net::NetErrorKind::Timeout, "no response within timeout");
        return ms;
    };

    socket_.send_all(frame, left());
    ++requests_sent_;
    std::array<std::uint8_t, mbap_header_size + max_pdu_size> buf{};
    for (;;) {
        socket_.recv_exact(std::span(buf.data(), mbap_header_size), left());
        MbapHeader header;
        try {
            header = decode_header(std::span(buf.data(), mbap_header_size));
        } catch (const FrameError& e) {
            socket_.close();
            throw ModbusError(ErrorKind::FrameError, e.what());
        }
        const std::size_t total = mbap_header_size - 1 + header.length;
        socket_.recv_exact(std::span(buf.data() + mbap_header_size, total - mbap_header_size), left());
        Frame response;
        try {
            response = decode_frame(std::span(buf.data(), total));
        } catch (const FrameError& e) {
            socket_.close();
            throw ModbusError(ErrorKind::FrameError, e.what());
        }
        // Stale replies to an earlier, timed-out request are skipped.
        if (response.header.transaction_id != txid || response.header.unit_id != unit) continue;
        return response.pdu;
    }
}

Pdu Client::transact(const Pdu& request, std::optional<std::uint8_t> unit) {
    const std::uint8_t target = unit.value_or(params_.unit_id);
    unsigned attempt = 0;
    bool reconnected = false;
    for (;;) {
        try {
            ensure_connected();
            return exchange_once(request, target);
        } catch (const net::NetError& e) {
            socket_.close();
            if (e.kind() == net::NetErrorKind::Closed && reused_ && !reconnected) {
                // Idle connection dropped by the server; a fresh one gets one free try.
                reconnected = true;
                continue;
            }
            if (e.kind() == net::NetErrorKind::Timeout && attempt < params_.retries) {
                ++attempt;
                continue;
            }
            throw from_net(e);
        } catch (const ModbusError& e) {
            if (e.kind() == ErrorKind::Timeout && attempt < params_.retries) {
                socket_.close();
                ++attempt;
                continue;
            }
            throw;
        }
    }
}

std::vector<std::uint16_t> Client::read(DataType type, std::uint16_t address, std::size_t count,
                                        std::optional<std::uint8_t> unit) {
    check_range(address, count);
    std::vector<std::uint16_t> out;
    out.reserve(count);
    std::size_t done = 0;
    while (done < count) {
        const auto n = static_cast<std::uint16_t>(std::min<std::size_t>(count - done, max_read_count(type)));
        const auto at = static_cast<std::uint16_t>(address + done);
        const Pdu request = make_read_request(type, at, n);
        const Pdu response = transact(request, unit);
        if (response.is_exception()) {
            throw ModbusError(ErrorKind::ExceptionResponse,
                              "exception " + std::to_string(response.exception_code()) + " (" +
                                  describe_exception(response.exception_code()) + ") reading " +
                                  std::string(to_string(type)) + " " + std::to_string(at) + "+" + std::to_string(n),
                              response.exception_code());
        }
        try {
            auto values = parse_read_response(response, type, n);
            out.insert(out.end(), values.begin(), values.end());
        } catch (const FrameError& e) {
            throw ModbusError(ErrorKind::FrameError, e.what());
        }
        done += n;
    }
    return out;
}

WriteAck Client::write(DataType type, std::uint16_t address, std::span<const std::uint16_t> values,
                       std::optional<std::uint8_t> unit) {
    if (!is_writable(type))
        throw ModbusError(ErrorKind::NotWritable, std::string(to_string(type)) + " is a read-only data type");
    check_range(address, values.size());
    std::size_t done = 0;
    while (done < values.size()) {
        const auto at = static_cast<std::uint16_t>(address + done);
        Pdu request;
        std::size_t n = 1;
        if (values.size() == 1) {
            request = make_write_single_request(type, at, values[0]);
        } else {
            n = std::min<std::size_t>(values.size() - done, max_write_count(type));
            request = make_write_multiple_request(type, at, values.subspan(done, n));
        }
        const Pdu response = transact(request, unit);
        if (response.is_exception()) {
            throw ModbusError(ErrorKind::ExceptionResponse,
                              "exception " + std::to_string(response.exception_code()) + " (" +
                                  describe_exception(response.exception_code()) + ") writing " +
                                  std::string(to_string(type)) + " " + std::to_string(at),
                              response.exception_code());
        }
        try {
            check_write_echo(request, response);
        } catch (const FrameError& e) {
            throw ModbusError(ErrorKind::FrameError, e.what());
        }
        done += n;
    }
    return WriteAck{address, values.size()};
}

std::vector<std::uint16_t> read_values(const ConnectionParams& conn, DataType type, std::uint16_t address,
                                       std::size_t count) {
    Client client(conn);
    return client.read(type, address, count);
}

WriteAck write_values(const ConnectionParams& conn, DataType type, std::uint16_t address,
                      std::span<const std::uint16_t> values) {
    if (!is_writable(type))
        throw ModbusError(ErrorKind::NotWritable, std::string(to_string(type)) + " is a read-only data type");
    Client client(conn);
    return client.write(type, address, values);
}

}  // namespace otprobe::modbus
