#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "otprobe/modbus/frame.hpp"
#include "otprobe/modbus/pdu.hpp"
#include "otprobe/net/socket.hpp"

namespace otprobe::modbus {

inline constexpr std::uint16_t default_port = 502;

struct ConnectionParams {
    std::string host{"127.0.0.1"};
    std::uint16_t port{default_port};
    std::uint8_t unit_id{1};
    std::chrono::milliseconds timeout{1000};
    unsigned retries{1};

    /// Throws ModbusError(InvalidArgument) on port 0 or a non-positive timeout.
    void validate() const;
};

enum class ErrorKind {
    Timeout,
    ConnectionRefused,
    ExceptionResponse,
    FrameError,
    NotWritable,
    InvalidArgument,
    Network,
};

const char* to_string(ErrorKind kind) noexcept;

class ModbusError : public std::runtime_error {
public:
    ModbusError(ErrorKind kind, const std::string& what, std::uint8_t exception_code = 0)
        : std::runtime_error(what), kind_(kind), exception_code_(exception_code) {}

    ErrorKind kind() const noexcept { return kind_; }
    /// Non-zero only for ExceptionResponse.
    std::uint8_t exception_code() const noexcept { return exception_code_; }

private:
    ErrorKind kind_;
    std::uint8_t exception_code_;
};

struct WriteAck {
    std::uint16_t address{0};
    std::size_t count{0};
};

/// One request/response channel to a Modbus TCP endpoint.
///
/// Not safe for concurrent use; open one client per thread. The connection
/// is opened lazily and re-opened after a timeout, since a late response
/// would otherwise desynchronise the stream.
class Client {
public:
    explicit Client(ConnectionParams params);

    Client(Client&&) noexcept = default;
    Client& operator=(Client&&) noexcept = default;

    const ConnectionParams& params() const noexcept { return params_; }

    /// Sends one PDU and returns the matching response, which may be an
    /// exception PDU. Timeouts are retried `retries` times; nothing else is.
    Pdu transact(const Pdu& request, std::optional<std::uint8_t> unit = std::nullopt);

    /// Reads `count` elements, splitting into protocol-sized requests.
    std::vector<std::uint16_t> read(DataType type, std::uint16_t address, std::size_t count,
                                    std::optional<std::uint8_t> unit = std::nullopt);

    /// One value uses FC 5/6, several use FC 15/16 (split if needed).
    WriteAck write(DataType type, std::uint16_t address, std::span<const std::uint16_t> values,
                   std::optional<std::uint8_t> unit = std::nullopt);

    void close() noexcept { socket_.close(); }
    std::uint64_t requests_sent() const noexcept { return requests_sent_; }

private:
    void ensure_connected();
    Pdu exchange_once(const Pdu& request, std::uint8_t unit);

    ConnectionParams params_;
    net::Socket socket_;
    bool reused_{false};
    std::uint16_t next_transaction_{1};
    std::uint64_t requests_sent_{0};
};

std::vector<std::uint16_t> read_values(const ConnectionParams& conn, DataType type, std::uint16_t address,
                                       std::size_t count);

WriteAck write_values(const ConnectionParams& conn, DataType type, std::uint16_t address,
                      std::span<const std::uint16_t> values);

}  // namespace otprobe::modbus
