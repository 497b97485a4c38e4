#include <gtest/gtest.h>

#include <random>

#include "otprobe/modbus/frame.hpp"
#include "otprobe/modbus/pdu.hpp"
#include "support/test_support.hpp"

namespace otprobe::modbus {
namespace {

using Bytes = std::vector<std::uint8_t>;

// Reference frames produced by pymodbus 3.x (tests/oracles/modbus_frames.py).
const Bytes kReadHoldingTx1Unit1 = {0x00, 0x01, 0x00, 0x00, 0x00, 0x06, 0x01, 0x03, 0x00, 0x00, 0x00, 0x02};
const Bytes kReadCoilsTx0Unit0 = {0x00, 0x00, 0x00, 0x00, 0x00, 0x06, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01};
const Bytes kWriteSingleRegister500 = {0x00, 0x07, 0x00, 0x00, 0x00, 0x06, 0x01, 0x06, 0x00, 0x00, 0x01, 0xf4};
const Bytes kWriteSingleCoilOff = {0x00, 0x02, 0x00, 0x00, 0x00, 0x06, 0x0a, 0x05, 0x00, 0x00, 0x00, 0x00};
const Bytes kWriteMultipleRegisters = {0x00, 0x03, 0x00, 0x00, 0x00, 0x0b, 0x01, 0x10, 0x00,
                                       0x0a, 0x00, 0x02, 0x04, 0x00, 0x01, 0x12, 0x34};
const Bytes kWriteMultipleCoils = {0x00, 0x04, 0x00, 0x00, 0x00, 0x09, 0x0a, 0x0f,
                                   0x00, 0x03, 0x00, 0x09, 0x02, 0x0d, 0x01};
const Bytes kExceptionFc3Code2 = {0x00, 0x01, 0x00, 0x00, 0x00, 0x03, 0x01, 0x83, 0x02};

Bytes encode(std::uint16_t txid, std::uint8_t unit, const Pdu& pdu) { return encode_frame(make_header(txid, unit, pdu), pdu); }

TEST(FrameCodec, MatchesReferenceRequestLayouts) {
    EXPECT_EQ(encode(1, 1, make_read_request(DataType::HoldingRegister, 0, 2)), kReadHoldingTx1Unit1);
    EXPECT_EQ(encode(0, 0, make_read_request(DataType::Coil, 0, 1)), kReadCoilsTx0Unit0);
    EXPECT_EQ(encode(7, 1, make_write_single_request(DataType::HoldingRegister, 0, 500)), kWriteSingleRegister500);
    EXPECT_EQ(encode(2, 10, make_write_single_request(DataType::Coil, 0, 0)), kWriteSingleCoilOff);
    const std::vector<std::uint16_t> regs{1, 0x1234};
    EXPECT_EQ(encode(3, 1, make_write_multiple_request(DataType::HoldingRegister, 10, regs)), kWriteMultipleRegisters);
    const std::vector<std::uint16_t> bits{1, 0, 1, 1, 0, 0, 0, 0, 1};
    EXPECT_EQ(encode(4, 10, make_write_multiple_request(DataType::Coil, 3, bits)), kWriteMultipleCoils);
    EXPECT_EQ(encode(1, 1, make_exception(3, ExceptionCode::IllegalDataAddress)), kExceptionFc3Code2);
}

TEST(FrameCodec, MinimalRequestHasLengthSix) {
    const auto bytes = encode(0, 0, make_read_request(DataType::Coil, 0, 1));
    ASSERT_EQ(bytes.size(), 12u);
    EXPECT_EQ(decode_header(bytes).length, 6);
}

TEST(FrameCodec, DecodesExceptionResponse) {
    const Frame f = decode_frame(kExceptionFc3Code2);
    EXPECT_EQ(f.header.transaction_id, 1);
    EXPECT_EQ(f.header.unit_id, 1);
    EXPECT_TRUE(f.pdu.is_exception());
    EXPECT_EQ(f.pdu.base_function(), 3);
    EXPECT_EQ(f.pdu.exception_code(), 2);
}

FrameErrorKind decode_error(const Bytes& bytes) {
    try {
        decode_frame(bytes);
    } catch (const FrameError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "decode unexpectedly succeeded";
    return FrameErrorKind::InvalidFrame;
}

TEST(FrameCodec, StructuredDecodeErrors) {
    EXPECT_EQ(decode_error({}), FrameErrorKind::Truncated);
    EXPECT_EQ(decode_error({0x00, 0x01, 0x00}), FrameErrorKind::Truncated);

    Bytes proto = kReadHoldingTx1Unit1;
    proto[3] = 0x01;
    EXPECT_EQ(decode_error(proto), FrameErrorKind::ProtocolIdNonZero);

    Bytes shortened(kReadHoldingTx1Unit1.begin(), kReadHoldingTx1Unit1.end() - 1);
    EXPECT_EQ(decode_error(shortened), FrameErrorKind::Truncated);

    Bytes longer = kReadHoldingTx1Unit1;
    longer.push_back(0);
    EXPECT_EQ(decode_error(longer), FrameErrorKind::LengthMismatch);

    Bytes oversize = kReadHoldingTx1Unit1;
    oversize[4] = 0x01;  // length 262
    EXPECT_EQ(decode_error(oversize), FrameErrorKind::LengthMismatch);

    Bytes fc43 = kReadHoldingTx1Unit1;
    fc43[7] = 0x2B;
    try {
        decode_frame(fc43);
        FAIL();
    } catch (const FrameError& e) {
        EXPECT_EQ(e.kind(), FrameErrorKind::UnknownFunctionCode);
        EXPECT_EQ(e.function_code(), 0x2B);
    }

    // An exception PDU with two payload bytes breaks the exception encoding rule.
    EXPECT_EQ(decode_error({0x00, 0x01, 0x00, 0x00, 0x00, 0x04, 0x01, 0x83, 0x02, 0x00}), FrameErrorKind::InvalidFrame);
}

TEST(FrameCodec, EncodeRejectsInconsistentHeaders) {
    const Pdu pdu = make_read_request(DataType::HoldingRegister, 0, 1);
    MbapHeader h = make_header(1, 1, pdu);
    h.length = 9;
    EXPECT_THROW(encode_frame(h, pdu), FrameError);

    Pdu big{0x10, Bytes(253, 0)};
    EXPECT_THROW(encode_frame(make_header(1, 1, big), big), FrameError);
}

Pdu random_valid_pdu(std::mt19937_64& rng) {
    static constexpr std::uint8_t codes[] = {1, 2, 3, 4, 5, 6, 15, 16};
    Pdu pdu;
    pdu.function_code = codes[rng() % 8];
    if (rng() % 4 == 0) {
        pdu.function_code |= exception_flag;
        pdu.payload = {static_cast<std::uint8_t>(rng())};
    } else {
        pdu.payload = testing::random_bytes(rng, 2 + rng() % (max_pdu_size - 2));
    }
    return pdu;
}

TEST(FrameCodec, RoundTripProperty) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        const Pdu pdu = random_valid_pdu(rng);
        const MbapHeader h = make_header(static_cast<std::uint16_t>(rng()), static_cast<std::uint8_t>(rng()), pdu);
        const Frame back = decode_frame(encode_frame(h, pdu));
        ASSERT_EQ(back.header, h);
        ASSERT_EQ(back.pdu, pdu);
    }
}

TEST(FrameCodec, ExceptionBitIffSingleCodeByte) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 5000; ++i) {
        auto bytes = testing::random_bytes(rng, 7 + rng() % 20);
        bytes[2] = bytes[3] = 0;
        bytes[4] = 0;
        bytes[5] = static_cast<std::uint8_t>(bytes.size() - 6);
        try {
            const Frame f = decode_frame(bytes);
            ASSERT_EQ(f.pdu.is_exception(), f.pdu.payload.size() == 1);
        } catch (const FrameError&) {
        }
    }
}

TEST(FrameCodec, FuzzNeverCrashes) {
    std::mt19937_64 rng(99);
    const auto huge = testing::random_bytes(rng, 1 << 20);
    EXPECT_THROW(decode_frame(huge), FrameError);
    for (int i = 0; i < 20000; ++i) {
        Bytes b = testing::random_bytes(rng, rng() % 300);
        if (b.size() > 4 && rng() % 2) b[2] = b[3] = 0;  // reach past the protocol id check
        try {
            decode_frame(b);
        } catch (const FrameError&) {
        }
    }
}

TEST(Pdu, ReadResponseValidation) {
    Pdu ok{3, {0x04, 0x27, 0x10, 0x27, 0x11}};
    EXPECT_EQ(parse_read_response(ok, DataType::HoldingRegister, 2), (std::vector<std::uint16_t>{10000, 10001}));
    EXPECT_THROW(parse_read_response(ok, DataType::HoldingRegister, 3), FrameError);
    EXPECT_THROW(parse_read_response(ok, DataType::InputRegister, 2), FrameError);

    Pdu bits{1, {0x01, 0b0000'0101}};
    EXPECT_EQ(parse_read_response(bits, DataType::Coil, 3), (std::vector<std::uint16_t>{1, 0, 1}));
}

TEST(Pdu, BitPackingRoundTrip) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        std::vector<std::uint16_t> bits(1 + rng() % 100);
        for (auto& b : bits) b = rng() & 1;
        EXPECT_EQ(unpack_bits(pack_bits(bits), bits.size()), bits);
    }
}

TEST(Pdu, DataTypeTraits) {
    EXPECT_TRUE(is_writable(DataType::Coil));
    EXPECT_TRUE(is_writable(DataType::HoldingRegister));
    EXPECT_FALSE(is_writable(DataType::DiscreteInput));
    EXPECT_FALSE(is_writable(DataType::InputRegister));
    EXPECT_TRUE(is_bit(DataType::DiscreteInput));
    EXPECT_FALSE(is_bit(DataType::InputRegister));
    EXPECT_EQ(parse_data_type("HR"), DataType::HoldingRegister);
    EXPECT_EQ(parse_data_type("discrete_input"), DataType::DiscreteInput);
    EXPECT_EQ(parse_data_type("bogus"), std::nullopt);
}

}  // namespace
}  // namespace otprobe::modbus
