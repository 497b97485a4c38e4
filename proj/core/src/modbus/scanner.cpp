#include "otprobe/modbus/scanner.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

namespace otprobe::modbus {

namespace {

bool is_gateway_exception(std::uint8_t code) {
    return code == static_cast<std::uint8_t>(ExceptionCode::GatewayPathUnavailable) ||
           code == static_cast<std::uint8_t>(ExceptionCode::GatewayTargetFailedToRespond);
}

void enumerate_segment(Client& client, DataType type, std::uint32_t lo, std::uint32_t count, AddressMap& out) {
    try {
        auto values = client.read(type, static_cast<std::uint16_t>(lo), count);
        for (std::uint32_t i = 0; i < count; ++i) out[static_cast<std::uint16_t>(lo + i)] = values[i];
    } catch (const ModbusError& e) {
        if (e.kind() != ErrorKind::ExceptionResponse) throw;
        if (count == 1) {
            out[static_cast<std::uint16_t>(lo)] = std::nullopt;
            return;
        }
        const std::uint32_t half = count / 2;
        enumerate_segment(client, type, lo, half, out);
        enumerate_segment(client, type, lo + half, count - half, out);
    }
}

constexpr unsigned max_consecutive_timeouts = 3;

UnitResult probe_unit(Client& client, std::uint8_t unit, std::vector<ProbeRecord>& log) {
    UnitResult result;
    result.unit_id = unit;
    unsigned timeouts = 0;
    for (DataType type : all_data_types) {
        for (std::uint16_t address : ProbeOffsets::for_type(type)) {
            ProbeRecord rec{unit, type, address, ProbeOutcome::Value, 0};
            try {
                const Pdu response = client.transact(make_read_request(type, address, 1), unit);
                timeouts = 0;
                if (response.is_exception()) {
                    rec.outcome = ProbeOutcome::Exception;
                    rec.exception_code = response.exception_code();
                    if (!is_gateway_exception(rec.exception_code)) result.answered_exception = true;
                } else {
                    parse_read_response(response, type, 1);
                    result.active = true;
                    result.responding_offsets[type].push_back(address);
                }
            } catch (const FrameError&) {
                rec.outcome = ProbeOutcome::FrameError;
            } catch (const ModbusError& e) {
                if (e.kind() == ErrorKind::Timeout) {
                    rec.outcome = ProbeOutcome::Timeout;
                    log.push_back(rec);
                    if (++timeouts >= max_consecutive_timeouts) {
                        result.error = "unit stopped responding (timeouts)";
                        return result;
                    }
                    continue;
                }
                rec.outcome = e.kind() == ErrorKind::FrameError ? ProbeOutcome::FrameError : ProbeOutcome::NetworkError;
                if (rec.outcome == ProbeOutcome::NetworkError) {
                    log.push_back(rec);
                    result.error = e.what();
                    return result;
                }
            }
            log.push_back(rec);
        }
    }
    for (DataType type : all_data_types) {
        if (result.responding_offsets.count(type)) result.data_types.push_back(type);
    }
    return result;
}

}  // namespace

std::vector<std::uint16_t> ProbeOffsets::for_type(DataType type) {
    std::vector<std::uint16_t> out(offsets.begin(), offsets.end());
    if (type == DataType::HoldingRegister) out.push_back(modicon_holding);
    if (type == DataType::InputRegister) out.push_back(modicon_input);
    return out;
}

AddressMap enumerate_addresses(Client& client, DataType type, std::uint16_t start, std::uint16_t end) {
    if (start > end) throw ModbusError(ErrorKind::InvalidArgument, "start must not exceed end");
    AddressMap out;
    const std::uint32_t step = max_read_count(type);
    for (std::uint32_t lo = start; lo <= end; lo += step) {
        const std::uint32_t count = std::min<std::uint32_t>(step, static_cast<std::uint32_t>(end) - lo + 1);
        enumerate_segment(client, type, lo, count, out);
    }
    return out;
}

AddressMap enumerate_addresses(const ConnectionParams& conn, DataType type, std::uint16_t start, std::uint16_t end) {
    Client client(conn);
    return enumerate_addresses(client, type, start, end);
}

const char* to_string(ProbeOutcome o) noexcept {
    switch (o) {
        case ProbeOutcome::Value: return "value";
        case ProbeOutcome::Exception: return "exception";
        case ProbeOutcome::Timeout: return "timeout";
        case ProbeOutcome::NetworkError: return "network_error";
        case ProbeOutcome::FrameError: return "frame_error";
    }
    return "network_error";
}

std::vector<std::uint8_t> UnitScanReport::active_units() const {
    std::vector<std::uint8_t> out;
    for (const auto& u : units) {
        if (u.active) out.push_back(u.unit_id);
    }
    return out;
}

const UnitResult* UnitScanReport::find(std::uint8_t unit) const {
    for (const auto& u : units) {
        if (u.unit_id == unit) return &u;
    }
    return nullptr;
}

UnitScanReport scan_unit_ids(const ConnectionParams& base, std::uint8_t first, std::uint8_t last, unsigned concurrency) {
    if (first > last) throw ModbusError(ErrorKind::InvalidArgument, "unit id range is empty");
    base.validate();
    const unsigned total = static_cast<unsigned>(last) - first + 1;
    const unsigned workers = std::max(1u, std::min(concurrency, total));

    std::vector<UnitResult> results(total);
    std::vector<std::vector<ProbeRecord>> logs(total);
    std::atomic<unsigned> next{0};

    auto work = [&] {
        Client client(base);
        for (unsigned i = next.fetch_add(1); i < total; i = next.fetch_add(1)) {
            const auto unit = static_cast<std::uint8_t>(first + i);
            try {
                results[i] = probe_unit(client, unit, logs[i]);
            } catch (const std::exception& e) {
                results[i] = UnitResult{};
                results[i].unit_id = unit;
                results[i].error = e.what();
            }
        }
    };

    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) threads.emplace_back(work);
    for (auto& t : threads) t.join();

    UnitScanReport report;
    report.units = std::move(results);
    for (auto& l : logs) report.probes.insert(report.probes.end(), l.begin(), l.end());
    return report;
}

const char* to_string(ChunkStatus s) noexcept {
    switch (s) {
        case ChunkStatus::Accessible: return "accessible";
        case ChunkStatus::Partial: return "partial";
        case ChunkStatus::Inaccessible: return "inaccessible";
    }
    return "inaccessible";
}

RangeScanReport scan_register_range(Client& client, DataType type, std::uint16_t start, std::uint16_t end,
                                    std::uint32_t chunk_size) {
    if (chunk_size == 0) throw ModbusError(ErrorKind::InvalidArgument, "chunk size must be at least 1");
    if (start > end) throw ModbusError(ErrorKind::InvalidArgument, "start must not exceed end");

    RangeScanReport report{type, start, end, chunk_size, {}};
    const std::uint32_t wire_max = max_read_count(type);
    for (std::uint32_t chunk_lo = start; chunk_lo <= end; chunk_lo += chunk_size) {
        const std::uint32_t chunk_count = std::min<std::uint32_t>(chunk_size, static_cast<std::uint32_t>(end) - chunk_lo + 1);
        ChunkRecord chunk{static_cast<std::uint16_t>(chunk_lo), chunk_count, ChunkStatus::Inaccessible, {}};
        std::vector<std::optional<std::uint16_t>> values;
        values.reserve(chunk_count);
        std::size_t ok = 0, failed = 0;
        for (std::uint32_t lo = chunk_lo; lo < chunk_lo + chunk_count; lo += wire_max) {
            const std::uint32_t n = std::min<std::uint32_t>(wire_max, chunk_lo + chunk_count - lo);
            try {
                auto got = client.read(type, static_cast<std::uint16_t>(lo), n);
                values.insert(values.end(), got.begin(), got.end());
                ++ok;
            } catch (const ModbusError& e) {
                if (e.kind() != ErrorKind::ExceptionResponse) throw;
                values.insert(values.end(), n, std::nullopt);
                ++failed;
            }
        }
        if (ok > 0) {
            chunk.status = failed == 0 ? ChunkStatus::Accessible : ChunkStatus::Partial;
            chunk.values = std::move(values);
        }
        report.chunks.push_back(std::move(chunk));
    }
    return report;
}

RangeScanReport scan_register_range(const ConnectionParams& conn, DataType type, std::uint16_t start,
                                    std::uint16_t end, std::uint32_t chunk_size) {
    Client client(conn);
    return scan_register_range(client, type, start, end, chunk_size);
}

}  // namespace otprobe::modbus
