#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "otprobe/modbus/client.hpp"

namespace otprobe::modbus {

/// Addresses tried for each data type during unit discovery.
struct ProbeOffsets {
    static constexpr std::array<std::uint16_t, 4> offsets{0, 1, 100, 1000};
    static constexpr std::uint16_t modicon_holding = 40001;
    static constexpr std::uint16_t modicon_input = 30001;

    /// The common offsets plus the Modicon base for holding/input registers,
    /// probed as raw protocol addresses.
    static std::vector<std::uint16_t> for_type(DataType type);
};

/// address -> value, or nullopt where the device answered with an exception.
using AddressMap = std::map<std::uint16_t, std::optional<std::uint16_t>>;

/// Walks [start, end] with protocol-limited reads. Segments that raise an
/// exception are bisected down to single addresses so readable neighbours
/// are kept. Timeouts and refused connections abort the walk.
AddressMap enumerate_addresses(Client& client, DataType type, std::uint16_t start, std::uint16_t end);
AddressMap enumerate_addresses(const ConnectionParams& conn, DataType type, std::uint16_t start, std::uint16_t end);

enum class ProbeOutcome {
    Value,
    Exception,
    Timeout,
    NetworkError,
    FrameError,
};

const char* to_string(ProbeOutcome o) noexcept;

struct ProbeRecord {
    std::uint8_t unit_id{0};
    DataType type{DataType::Coil};
    std::uint16_t address{0};
    ProbeOutcome outcome{ProbeOutcome::Value};
    std::uint8_t exception_code{0};
};

struct UnitResult {
    std::uint8_t unit_id{0};
    /// True iff some probe returned a well-formed, non-exception response.
    bool active{false};
    /// Some probe returned an exception other than the gateway codes 10/11.
    bool answered_exception{false};
    std::vector<DataType> data_types;
    std::map<DataType, std::vector<std::uint16_t>> responding_offsets;
    std::string error;
};

struct UnitScanReport {
    std::vector<UnitResult> units;
    /// Every probe sent, in per-unit order; the audit trail for `active`.
    std::vector<ProbeRecord> probes;

    std::vector<std::uint8_t> active_units() const;
    const UnitResult* find(std::uint8_t unit) const;
};

inline constexpr unsigned default_scan_concurrency = 16;

/// Probes every unit id in [first, last] with one-element reads of all four
/// data types at ProbeOffsets. Units are fanned out across up to
/// `concurrency` connections; per-unit network failures mark the unit
/// inactive instead of failing the scan.
UnitScanReport scan_unit_ids(const ConnectionParams& base, std::uint8_t first, std::uint8_t last,
                             unsigned concurrency = default_scan_concurrency);

enum class ChunkStatus {
    Accessible,
    Partial,
    Inaccessible,
};

const char* to_string(ChunkStatus s) noexcept;

struct ChunkRecord {
    std::uint16_t start_address{0};
    std::uint32_t requested_count{0};
    ChunkStatus status{ChunkStatus::Inaccessible};
    /// requested_count entries unless Inaccessible (then empty); nullopt marks
    /// elements of a failed sub-read inside a Partial chunk.
    std::vector<std::optional<std::uint16_t>> values;
};

struct RangeScanReport {
    DataType type{DataType::HoldingRegister};
    std::uint16_t start{0};
    std::uint16_t end{0};
    std::uint32_t chunk_size{0};
    std::vector<ChunkRecord> chunks;
};

inline constexpr std::uint32_t default_chunk_size = 1000;

RangeScanReport scan_register_range(Client& client, DataType type, std::uint16_t start, std::uint16_t end,
                                    std::uint32_t chunk_size = default_chunk_size);
RangeScanReport scan_register_range(const ConnectionParams& conn, DataType type, std::uint16_t start,
                                    std::uint16_t end, std::uint32_t chunk_size = default_chunk_size);

}  // namespace otprobe::modbus
