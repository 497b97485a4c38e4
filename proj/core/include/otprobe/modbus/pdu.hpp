#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "otprobe/modbus/frame.hpp"

namespace otprobe::modbus {

enum class DataType : std::uint8_t {
    Coil,
    DiscreteInput,
    HoldingRegister,
    InputRegister,
};

inline constexpr std::array<DataType, 4> all_data_types{
    DataType::Coil, DataType::DiscreteInput, DataType::HoldingRegister, DataType::InputRegister};

constexpr bool is_bit(DataType t) noexcept { return t == DataType::Coil || t == DataType::DiscreteInput; }
constexpr bool is_writable(DataType t) noexcept { return t == DataType::Coil || t == DataType::HoldingRegister; }

constexpr FunctionCode read_function(DataType t) noexcept {
    switch (t) {
        case DataType::Coil: return FunctionCode::ReadCoils;
        case DataType::DiscreteInput: return FunctionCode::ReadDiscreteInputs;
        case DataType::HoldingRegister: return FunctionCode::ReadHoldingRegisters;
        case DataType::InputRegister: return FunctionCode::ReadInputRegisters;
    }
    return FunctionCode::ReadHoldingRegisters;
}

/// Largest element count a single read of `t` may request.
constexpr std::uint16_t max_read_count(DataType t) noexcept { return is_bit(t) ? max_read_bits : max_read_words; }
constexpr std::uint16_t max_write_count(DataType t) noexcept { return is_bit(t) ? max_write_bits : max_write_words; }

/// Canonical names: coil, discrete-input, holding-register, input-register.
std::string_view to_string(DataType t) noexcept;
/// Also accepts common short forms (co, di, hr, ir, coils, holding, input, ...).
std::optional<DataType> parse_data_type(std::string_view text) noexcept;

inline constexpr std::uint16_t coil_on = 0xFF00;
inline constexpr std::uint16_t coil_off = 0x0000;

std::vector<std::uint8_t> pack_bits(std::span<const std::uint16_t> bits);
std::vector<std::uint16_t> unpack_bits(std::span<const std::uint8_t> packed, std::size_t count);

Pdu make_read_request(DataType type, std::uint16_t address, std::uint16_t count);
/// FC 5 / FC 6. Bit values are normalised (non-zero -> on).
Pdu make_write_single_request(DataType type, std::uint16_t address, std::uint16_t value);
/// FC 15 / FC 16.
Pdu make_write_multiple_request(DataType type, std::uint16_t address, std::span<const std::uint16_t> values);
Pdu make_exception(std::uint8_t function_code, ExceptionCode code);

struct AddressCount {
    std::uint16_t address{0};
    std::uint16_t count{0};
};

/// Address/count from a read (FC 1-4) or FC 15/16 request header. Nullopt on short payload.
std::optional<AddressCount> peek_address_count(const Pdu& request) noexcept;

/// Decodes a read response for a request of `count` elements of `type`.
/// Throws FrameError(InvalidFrame) when the byte count or function does not match.
std::vector<std::uint16_t> parse_read_response(const Pdu& response, DataType type, std::uint16_t count);

/// Verifies a write response echoes the request (address + value or address + count).
void check_write_echo(const Pdu& request, const Pdu& response);

}  // namespace otprobe::modbus
