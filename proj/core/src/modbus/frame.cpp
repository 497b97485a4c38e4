#include "otprobe/modbus/frame.hpp"

namespace otprobe::modbus {

namespace {

std::uint16_t be16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

}  // namespace

bool is_supported_function(std::uint8_t code) noexcept {
    switch (code) {
        case 0x01: case 0x02: case 0x03: case 0x04:
        case 0x05: case 0x06: case 0x0F: case 0x10:
            return true;
        default:
            return false;
    }
}

std::string describe_exception(std::uint8_t code) {
    switch (code) {
        case 0x01: return "illegal function";
        case 0x02: return "illegal data address";
        case 0x03: return "illegal data value";
        case 0x04: return "server device failure";
        case 0x05: return "acknowledge";
        case 0x06: return "server device busy";
        case 0x0A: return "gateway path unavailable";
        case 0x0B: return "gateway target device failed to respond";
        default: return "exception code " + std::to_string(code);
    }
}

const char* to_string(FrameErrorKind kind) noexcept {
    switch (kind) {
        case FrameErrorKind::Truncated: return "truncated";
        case FrameErrorKind::ProtocolIdNonZero: return "protocol_id_non_zero";
        case FrameErrorKind::LengthMismatch: return "length_mismatch";
        case FrameErrorKind::UnknownFunctionCode: return "unknown_function_code";
        case FrameErrorKind::InvalidFrame: return "invalid_frame";
    }
    return "invalid_frame";
}

void validate_pdu(const Pdu& pdu) {
    if (pdu.size() > max_pdu_size)
        throw FrameError(FrameErrorKind::InvalidFrame, "PDU of " + std::to_string(pdu.size()) + " bytes exceeds 253");
    // Exception replies are legal for any request code, including ones we do not implement.
    if (!pdu.is_exception() && !is_supported_function(pdu.base_function()))
        throw FrameError(FrameErrorKind::UnknownFunctionCode,
                         "unknown function code " + std::to_string(pdu.base_function()), pdu.function_code);
    if (pdu.is_exception()) {
        if (pdu.payload.size() != 1)
            throw FrameError(FrameErrorKind::InvalidFrame, "exception PDU must carry exactly one exception code byte");
    } else if (pdu.payload.size() < 2) {
        throw FrameError(FrameErrorKind::InvalidFrame, "non-exception PDU payload shorter than two bytes");
    }
}

MbapHeader make_header(std::uint16_t transaction_id, std::uint8_t unit_id, const Pdu& pdu) {
    return MbapHeader{transaction_id, 0, static_cast<std::uint16_t>(pdu.size() + 1), unit_id};
}

std::vector<std::uint8_t> encode_frame(const MbapHeader& header, const Pdu& pdu) {
    validate_pdu(pdu);
    if (header.protocol_id != 0)
        throw FrameError(FrameErrorKind::InvalidFrame, "protocol id must be 0");
    if (header.length != pdu.size() + 1)
        throw FrameError(FrameErrorKind::InvalidFrame, "length field " + std::to_string(header.length) +
                                                           " inconsistent with PDU size " + std::to_string(pdu.size()));
    std::vector<std::uint8_t> out;
    out.reserve(mbap_header_size + pdu.size());
    put16(out, header.transaction_id);
    put16(out, header.protocol_id);
    put16(out, header.length);
    out.push_back(header.unit_id);
    out.push_back(pdu.function_code);
    out.insert(out.end(), pdu.payload.begin(), pdu.payload.end());
    return out;
}

MbapHeader decode_header(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < mbap_header_size)
        throw FrameError(FrameErrorKind::Truncated, "frame shorter than the 7-byte MBAP header");
    MbapHeader h{be16(bytes, 0), be16(bytes, 2), be16(bytes, 4), bytes[6]};
    if (h.protocol_id != 0)
        throw FrameError(FrameErrorKind::ProtocolIdNonZero, "protocol id " + std::to_string(h.protocol_id) + " is not Modbus");
    if (h.length < min_length_field || h.length > max_length_field)
        throw FrameError(FrameErrorKind::LengthMismatch, "length field " + std::to_string(h.length) + " outside [2, 254]");
    return h;
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
    Frame f;
    f.header = decode_header(bytes);
    const std::size_t expected = mbap_header_size - 1 + f.header.length;
    if (bytes.size() < expected)
        throw FrameError(FrameErrorKind::Truncated, "frame holds " + std::to_string(bytes.size()) + " bytes, header announces " +
                                                        std::to_string(expected));
    if (bytes.size() > expected)
        throw FrameError(FrameErrorKind::LengthMismatch, "frame holds " + std::to_string(bytes.size() - expected) +
                                                             " bytes beyond the announced length");
    f.pdu.function_code = bytes[mbap_header_size];
    f.pdu.payload.assign(bytes.begin() + mbap_header_size + 1, bytes.end());
    validate_pdu(f.pdu);
    return f;
}

}  // namespace otprobe::modbus
