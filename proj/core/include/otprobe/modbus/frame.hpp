#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace otprobe::modbus {

inline constexpr std::size_t mbap_header_size = 7;
inline constexpr std::size_t max_pdu_size = 253;
inline constexpr std::uint16_t min_length_field = 2;
inline constexpr std::uint16_t max_length_field = max_pdu_size + 1;

inline constexpr std::uint16_t max_read_bits = 2000;
inline constexpr std::uint16_t max_read_words = 125;
inline constexpr std::uint16_t max_write_bits = 1968;
inline constexpr std::uint16_t max_write_words = 123;

inline constexpr std::uint8_t exception_flag = 0x80;

enum class FunctionCode : std::uint8_t {
    ReadCoils = 0x01,
    ReadDiscreteInputs = 0x02,
    ReadHoldingRegisters = 0x03,
    ReadInputRegisters = 0x04,
    WriteSingleCoil = 0x05,
    WriteSingleRegister = 0x06,
    WriteMultipleCoils = 0x0F,
    WriteMultipleRegisters = 0x10,
};

bool is_supported_function(std::uint8_t code) noexcept;

enum class ExceptionCode : std::uint8_t {
    IllegalFunction = 0x01,
    IllegalDataAddress = 0x02,
    IllegalDataValue = 0x03,
    ServerDeviceFailure = 0x04,
    GatewayPathUnavailable = 0x0A,
    GatewayTargetFailedToRespond = 0x0B,
};

std::string describe_exception(std::uint8_t code);

struct MbapHeader {
    std::uint16_t transaction_id{0};
    std::uint16_t protocol_id{0};
    std::uint16_t length{0};  // unit id + PDU bytes
    std::uint8_t unit_id{0};

    friend bool operator==(const MbapHeader&, const MbapHeader&) = default;
};

struct Pdu {
    std::uint8_t function_code{0};
    std::vector<std::uint8_t> payload;

    bool is_exception() const noexcept { return (function_code & exception_flag) != 0; }
    std::uint8_t base_function() const noexcept { return function_code & 0x7F; }
    std::size_t size() const noexcept { return 1 + payload.size(); }
    /// Only meaningful when is_exception().
    std::uint8_t exception_code() const noexcept { return payload.empty() ? 0 : payload.front(); }

    friend bool operator==(const Pdu&, const Pdu&) = default;
};

struct Frame {
    MbapHeader header;
    Pdu pdu;

    friend bool operator==(const Frame&, const Frame&) = default;
};

enum class FrameErrorKind {
    Truncated,
    ProtocolIdNonZero,
    LengthMismatch,
    UnknownFunctionCode,
    InvalidFrame,
};

const char* to_string(FrameErrorKind kind) noexcept;

class FrameError : public std::runtime_error {
public:
    FrameError(FrameErrorKind kind, const std::string& what, std::uint8_t function_code = 0)
        : std::runtime_error(what), kind_(kind), function_code_(function_code) {}

    FrameErrorKind kind() const noexcept { return kind_; }
    /// Set for UnknownFunctionCode so servers can answer with exception 1.
    std::uint8_t function_code() const noexcept { return function_code_; }

private:
    FrameErrorKind kind_;
    std::uint8_t function_code_;
};

/// Header whose length field matches `pdu`.
MbapHeader make_header(std::uint16_t transaction_id, std::uint8_t unit_id, const Pdu& pdu);

std::vector<std::uint8_t> encode_frame(const MbapHeader& header, const Pdu& pdu);
inline std::vector<std::uint8_t> encode_frame(const Frame& f) { return encode_frame(f.header, f.pdu); }

/// Parses only the 7-byte MBAP prefix. Validates protocol id and the length range.
MbapHeader decode_header(std::span<const std::uint8_t> bytes);

/// Parses exactly one frame; `bytes` must hold nothing else.
Frame decode_frame(std::span<const std::uint8_t> bytes);

/// Structural PDU check shared by encoder and decoder.
void validate_pdu(const Pdu& pdu);

}  // namespace otprobe::modbus
