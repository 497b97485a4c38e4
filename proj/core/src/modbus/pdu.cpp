#include "otprobe/modbus/pdu.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace otprobe::modbus {

namespace {

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

std::uint16_t be16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

FunctionCode write_single_function(DataType t) {
    return t == DataType::Coil ? FunctionCode::WriteSingleCoil : FunctionCode::WriteSingleRegister;
}

FunctionCode write_multiple_function(DataType t) {
    return t == DataType::Coil ? FunctionCode::WriteMultipleCoils : FunctionCode::WriteMultipleRegisters;
}

[[noreturn]] void malformed(const std::string& what) { throw FrameError(FrameErrorKind::InvalidFrame, what); }

}  // namespace

std::string_view to_string(DataType t) noexcept {
    switch (t) {
        case DataType::Coil: return "coil";
        case DataType::DiscreteInput: return "discrete-input";
        case DataType::HoldingRegister: return "holding-register";
        case DataType::InputRegister: return "input-register";
    }
    return "holding-register";
}

std::optional<DataType> parse_data_type(std::string_view text) noexcept {
    std::string s;
    for (char c : text) s.push_back(c == '_' || c == ' ' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (s == "coil" || s == "coils" || s == "co") return DataType::Coil;
    if (s == "discrete-input" || s == "discrete-inputs" || s == "discrete" || s == "di") return DataType::DiscreteInput;
    if (s == "holding-register" || s == "holding-registers" || s == "holding" || s == "hr") return DataType::HoldingRegister;
    if (s == "input-register" || s == "input-registers" || s == "input" || s == "ir") return DataType::InputRegister;
    return std::nullopt;
}

std::vector<std::uint8_t> pack_bits(std::span<const std::uint16_t> bits) {
    std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] != 0) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
    return out;
}

std::vector<std::uint16_t> unpack_bits(std::span<const std::uint8_t> packed, std::size_t count) {
    std::vector<std::uint16_t> out(count, 0);
    for (std::size_t i = 0; i < count && i / 8 < packed.size(); ++i) out[i] = (packed[i / 8] >> (i % 8)) & 1u;
    return out;
}

Pdu make_read_request(DataType type, std::uint16_t address, std::uint16_t count) {
    Pdu pdu{static_cast<std::uint8_t>(read_function(type)), {}};
    put16(pdu.payload, address);
    put16(pdu.payload, count);
    return pdu;
}

Pdu make_write_single_request(DataType type, std::uint16_t address, std::uint16_t value) {
    Pdu pdu{static_cast<std::uint8_t>(write_single_function(type)), {}};
    put16(pdu.payload, address);
    if (type == DataType::Coil) value = value != 0 ? coil_on : coil_off;
    put16(pdu.payload, value);
    return pdu;
}

Pdu make_write_multiple_request(DataType type, std::uint16_t address, std::span<const std::uint16_t> values) {
    Pdu pdu{static_cast<std::uint8_t>(write_multiple_function(type)), {}};
    put16(pdu.payload, address);
    put16(pdu.payload, static_cast<std::uint16_t>(values.size()));
    if (type == DataType::Coil) {
        auto packed = pack_bits(values);
        pdu.payload.push_back(static_cast<std::uint8_t>(packed.size()));
        pdu.payload.insert(pdu.payload.end(), packed.begin(), packed.end());
    } else {
        pdu.payload.push_back(static_cast<std::uint8_t>(values.size() * 2));
        for (auto v : values) put16(pdu.payload, v);
    }
    return pdu;
}

Pdu make_exception(std::uint8_t function_code, ExceptionCode code) {
    return Pdu{static_cast<std::uint8_t>(function_code | exception_flag), {static_cast<std::uint8_t>(code)}};
}

std::optional<AddressCount> peek_address_count(const Pdu& request) noexcept {
    if (request.payload.size() < 4) return std::nullopt;
    return AddressCount{be16(request.payload, 0), be16(request.payload, 2)};
}

std::vector<std::uint16_t> parse_read_response(const Pdu& response, DataType type, std::uint16_t count) {
    const auto fc = static_cast<std::uint8_t>(read_function(type));
    if (response.function_code != fc)
        malformed("response function " + std::to_string(response.function_code) + " does not answer " + std::to_string(fc));
    if (response.payload.empty()) malformed("read response without byte count");
    const std::size_t byte_count = response.payload[0];
    const std::size_t expected = is_bit(type) ? (count + 7u) / 8u : count * 2u;
    if (byte_count != expected || response.payload.size() != byte_count + 1)
        malformed("read response carries " + std::to_string(response.payload.size() - 1) + " data bytes, expected " +
                  std::to_string(expected));
    std::span<const std::uint8_t> data(response.payload.data() + 1, byte_count);
    if (is_bit(type)) return unpack_bits(data, count);
    std::vector<std::uint16_t> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = be16(data, 2 * i);
    return out;
}

void check_write_echo(const Pdu& request, const Pdu& response) {
    if (response.function_code != request.function_code) malformed("write response function mismatch");
    if (response.payload.size() != 4 || request.payload.size() < 4 ||
        !std::equal(response.payload.begin(), response.payload.end(), request.payload.begin()))
        malformed("write response does not echo the request");
}

}  // namespace otprobe::modbus
