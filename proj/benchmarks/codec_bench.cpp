#include <benchmark/benchmark.h>

#include <random>

#include "otprobe/modbus/frame.hpp"
#include "otprobe/modbus/pdu.hpp"
#include "otprobe/sim/profile.hpp"
#include "otprobe/sim/store.hpp"

using namespace otprobe;

namespace {

modbus::Pdu read_response(std::uint16_t words) {
    modbus::Pdu pdu{static_cast<std::uint8_t>(modbus::FunctionCode::ReadHoldingRegisters), {}};
    pdu.payload.push_back(static_cast<std::uint8_t>(words * 2));
    for (std::uint16_t i = 0; i < words; ++i) {
        pdu.payload.push_back(static_cast<std::uint8_t>(i >> 8));
        pdu.payload.push_back(static_cast<std::uint8_t>(i));
    }
    return pdu;
}

void BM_EncodeFrame(benchmark::State& state) {
    const auto pdu = read_response(static_cast<std::uint16_t>(state.range(0)));
    const auto header = modbus::make_header(1, 1, pdu);
    for (auto _ : state) benchmark::DoNotOptimize(modbus::encode_frame(header, pdu));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EncodeFrame)->Arg(1)->Arg(125);

void BM_DecodeFrame(benchmark::State& state) {
    const auto pdu = read_response(static_cast<std::uint16_t>(state.range(0)));
    const auto bytes = modbus::encode_frame(modbus::make_header(1, 1, pdu), pdu);
    for (auto _ : state) benchmark::DoNotOptimize(modbus::decode_frame(bytes));
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * bytes.size()));
}
BENCHMARK(BM_DecodeFrame)->Arg(1)->Arg(125);

void BM_DecodeGarbage(benchmark::State& state) {
    std::mt19937_64 rng(3);
    std::vector<std::vector<std::uint8_t>> inputs(1024);
    for (auto& in : inputs) {
        in.resize(rng() % 300);
        for (auto& b : in) b = static_cast<std::uint8_t>(rng());
    }
    std::size_t i = 0;
    for (auto _ : state) {
        try {
            benchmark::DoNotOptimize(modbus::decode_frame(inputs[i++ % inputs.size()]));
        } catch (const modbus::FrameError&) {
        }
    }
}
BENCHMARK(BM_DecodeGarbage);

void BM_PackBits(benchmark::State& state) {
    std::vector<std::uint16_t> bits(2000);
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = i % 3 == 0;
    for (auto _ : state) benchmark::DoNotOptimize(modbus::unpack_bits(modbus::pack_bits(bits), bits.size()));
}
BENCHMARK(BM_PackBits);

// Simulator request path without sockets: decode, dispatch, encode.
void BM_SimulatorHandleRequest(benchmark::State& state) {
    sim::RegisterStore store(sim::build_default_testbed(42));
    const auto req = modbus::make_read_request(modbus::DataType::HoldingRegister, 0, static_cast<std::uint16_t>(state.range(0)));
    const modbus::Frame frame{modbus::make_header(7, 1, req), req};
    for (auto _ : state) benchmark::DoNotOptimize(store.handle_request(frame));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SimulatorHandleRequest)->Arg(1)->Arg(125);

}  // namespace
