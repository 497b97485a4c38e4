#include "otprobe/sim/store.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "otprobe/modbus/pdu.hpp"

namespace otprobe::sim {

namespace {

using modbus::ExceptionCode;
using modbus::FunctionCode;
using modbus::Pdu;

std::uint64_t span_seed(std::uint64_t seed, std::size_t table, std::uint16_t start) {
    return seed ^ (0x9E3779B97F4A7C15ull * (table + 1)) ^ (static_cast<std::uint64_t>(start) << 32);
}

std::uint16_t be16(const std::vector<std::uint8_t>& b, std::size_t at) {
    return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

Pdu read_response(std::uint8_t fc, DataType type, const std::vector<std::uint16_t>& values) {
    Pdu out{fc, {}};
    if (modbus::is_bit(type)) {
        auto packed = modbus::pack_bits(values);
        out.payload.push_back(static_cast<std::uint8_t>(packed.size()));
        out.payload.insert(out.payload.end(), packed.begin(), packed.end());
    } else {
        out.payload.push_back(static_cast<std::uint8_t>(values.size() * 2));
        for (auto v : values) {
            out.payload.push_back(static_cast<std::uint8_t>(v >> 8));
            out.payload.push_back(static_cast<std::uint8_t>(v & 0xFF));
        }
    }
    return out;
}

}  // namespace

RegisterStore::RegisterStore(std::vector<DeviceProfile> profiles) {
    for (auto& p : profiles) {
        p.validate();
        if (devices_.count(p.unit_id)) throw std::invalid_argument("duplicate unit id " + std::to_string(p.unit_id));
        Device d;
        for (std::size_t ti = 0; ti < 4; ++ti) {
            const auto type = static_cast<DataType>(ti);
            const auto& spans = p.table(type);
            if (spans.empty()) continue;
            Table& t = d.tables[ti];
            t.values.assign(65536, 0);
            t.present.assign(65536, false);
            for (const auto& s : spans) {
                std::mt19937_64 rng(span_seed(p.seed, ti, s.start));
                for (std::uint32_t i = 0; i < s.count; ++i) {
                    const std::uint32_t a = s.start + i;
                    std::uint16_t v = 0;
                    switch (s.policy) {
                        case InitPolicy::Constant: v = static_cast<std::uint16_t>(s.value); break;
                        case InitPolicy::SeededRandom: v = static_cast<std::uint16_t>(rng() & 0xFFFF); break;
                        case InitPolicy::LinearOffset:
                            v = static_cast<std::uint16_t>(s.value + (s.modulus ? a % s.modulus : a));
                            break;
                    }
                    if (modbus::is_bit(type)) v = v & 1u;
                    t.values[a] = v;
                    t.present[a] = true;
                }
            }
        }
        if (p.dynamics) d.level = p.dynamics->initial_level;
        d.profile = std::move(p);
        const auto unit = d.profile.unit_id;
        auto [it, _] = devices_.emplace(unit, std::move(d));
        publish_dynamics(it->second);
    }
}

RegisterStore::Device* RegisterStore::find(std::uint8_t unit) {
    auto it = devices_.find(unit);
    return it == devices_.end() ? nullptr : &it->second;
}

const RegisterStore::Device* RegisterStore::find(std::uint8_t unit) const {
    auto it = devices_.find(unit);
    return it == devices_.end() ? nullptr : &it->second;
}

bool RegisterStore::has_unit(std::uint8_t unit) const {
    std::lock_guard lock(mutex_);
    return find(unit) != nullptr;
}

std::vector<std::uint8_t> RegisterStore::units() const {
    std::lock_guard lock(mutex_);
    std::vector<std::uint8_t> out;
    for (const auto& [id, _] : devices_) out.push_back(id);
    return out;
}

const DeviceProfile* RegisterStore::profile(std::uint8_t unit) const {
    std::lock_guard lock(mutex_);
    const Device* d = find(unit);
    return d ? &d->profile : nullptr;
}

bool RegisterStore::spans_cover(const Table& t, std::uint16_t address, std::size_t count) {
    if (t.empty() || count == 0 || address + count > 65536u) return false;
    for (std::size_t i = 0; i < count; ++i) {
        if (!t.present[address + i]) return false;
    }
    return true;
}

std::optional<std::vector<std::uint16_t>> RegisterStore::read(std::uint8_t unit, DataType type, std::uint16_t address,
                                                              std::size_t count) const {
    std::lock_guard lock(mutex_);
    const Device* d = find(unit);
    if (!d) return std::nullopt;
    const Table& t = d->tables[static_cast<std::size_t>(type)];
    if (!spans_cover(t, address, count)) return std::nullopt;
    return std::vector<std::uint16_t>(t.values.begin() + address, t.values.begin() + address + count);
}

RegisterStore::WriteResult RegisterStore::write(std::uint8_t unit, DataType type, std::uint16_t address,
                                                std::span<const std::uint16_t> values) {
    std::lock_guard lock(mutex_);
    Device* d = find(unit);
    if (!d) return WriteResult::UnknownUnit;
    if (!modbus::is_writable(type)) return WriteResult::ReadOnly;
    Table& t = d->tables[static_cast<std::size_t>(type)];
    if (!spans_cover(t, address, values.size())) return WriteResult::OutOfSpan;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto a = static_cast<std::uint16_t>(address + i);
        std::uint16_t v = values[i];
        if (type == DataType::Coil) {
            v = v != 0 ? 1 : 0;
        } else {
            for (const auto& rule : d->profile.scaling) {
                if (rule.covers(a)) {
                    v = rule.apply(v);
                    break;
                }
            }
        }
        t.values[a] = v;
    }
    publish_dynamics(*d);
    return WriteResult::Ok;
}

void RegisterStore::publish_dynamics(Device& d) {
    if (!d.profile.dynamics) return;
    const auto& dyn = *d.profile.dynamics;
    if (dyn.digital) {
        Table& coils = d.tables[static_cast<std::size_t>(DataType::Coil)];
        Table& di = d.tables[static_cast<std::size_t>(DataType::DiscreteInput)];
        if (coils.empty() || di.empty()) return;
        di.values[dyn.flow_meter] = coils.values[dyn.fill_valve] != 0 ? 1 : 0;
        di.values[dyn.level_meter] = d.level >= dyn.high_threshold ? 1 : 0;
    } else {
        Table& hr = d.tables[static_cast<std::size_t>(DataType::HoldingRegister)];
        Table& ir = d.tables[static_cast<std::size_t>(DataType::InputRegister)];
        if (hr.empty() || ir.empty()) return;
        ir.values[dyn.flow_meter] = static_cast<std::uint16_t>(hr.values[dyn.fill_valve] * dyn.gain);
        ir.values[dyn.level_meter] = static_cast<std::uint16_t>(d.level);
    }
}

void RegisterStore::tick(double seconds) {
    std::lock_guard lock(mutex_);
    for (auto& [_, d] : devices_) {
        if (!d.profile.dynamics) continue;
        const auto& dyn = *d.profile.dynamics;
        double fill = 0, discharge = 0;
        if (dyn.digital) {
            const Table& coils = d.tables[static_cast<std::size_t>(DataType::Coil)];
            if (coils.empty()) continue;
            fill = coils.values[dyn.fill_valve] != 0 ? 10.0 : 0.0;
            discharge = coils.values[dyn.discharge_valve] != 0 ? 10.0 : 0.0;
        } else {
            const Table& hr = d.tables[static_cast<std::size_t>(DataType::HoldingRegister)];
            if (hr.empty()) continue;
            fill = hr.values[dyn.fill_valve];
            discharge = hr.values[dyn.discharge_valve];
        }
        d.level = std::clamp(d.level + dyn.gain * (fill - discharge) * seconds, 0.0, dyn.capacity);
        publish_dynamics(d);
    }
}

std::optional<modbus::Frame> RegisterStore::handle_request(const modbus::Frame& request, UnknownUnitPolicy unknown) {
    modbus::Frame response;
    {
        std::lock_guard lock(mutex_);
        Device* d = find(request.header.unit_id);
        if (!d) {
            if (unknown == UnknownUnitPolicy::Silent) return std::nullopt;
            response.pdu = modbus::make_exception(request.pdu.base_function(), ExceptionCode::GatewayTargetFailedToRespond);
        } else {
            response.pdu = handle_pdu(*d, request.pdu);
        }
    }
    response.header = modbus::make_header(request.header.transaction_id, request.header.unit_id, response.pdu);
    return response;
}

// Caller holds mutex_.
Pdu RegisterStore::handle_pdu(Device& d, const Pdu& req) {
    const std::uint8_t fc = req.base_function();
    auto fail = [&](ExceptionCode c) { return modbus::make_exception(fc, c); };
    if (req.is_exception() || !modbus::is_supported_function(fc)) return fail(ExceptionCode::IllegalFunction);

    auto table_for = [&](DataType t) -> Table& { return d.tables[static_cast<std::size_t>(t)]; };

    switch (static_cast<FunctionCode>(fc)) {
        case FunctionCode::ReadCoils:
        case FunctionCode::ReadDiscreteInputs:
        case FunctionCode::ReadHoldingRegisters:
        case FunctionCode::ReadInputRegisters: {
            const DataType type = fc == 1 ? DataType::Coil
                                  : fc == 2 ? DataType::DiscreteInput
                                  : fc == 3 ? DataType::HoldingRegister
                                            : DataType::InputRegister;
            if (req.payload.size() != 4) return fail(ExceptionCode::IllegalDataValue);
            const std::uint16_t address = be16(req.payload, 0);
            const std::uint16_t count = be16(req.payload, 2);
            if (count == 0 || count > modbus::max_read_count(type)) return fail(ExceptionCode::IllegalDataValue);
            const Table& t = table_for(type);
            if (!spans_cover(t, address, count)) return fail(ExceptionCode::IllegalDataAddress);
            std::vector<std::uint16_t> values(t.values.begin() + address, t.values.begin() + address + count);
            return read_response(fc, type, values);
        }
        case FunctionCode::WriteSingleCoil:
        case FunctionCode::WriteSingleRegister: {
            const DataType type = fc == 5 ? DataType::Coil : DataType::HoldingRegister;
            if (req.payload.size() != 4) return fail(ExceptionCode::IllegalDataValue);
            const std::uint16_t address = be16(req.payload, 0);
            std::uint16_t value = be16(req.payload, 2);
            if (type == DataType::Coil) {
                if (value != modbus::coil_on && value != modbus::coil_off) return fail(ExceptionCode::IllegalDataValue);
                value = value == modbus::coil_on ? 1 : 0;
            }
            Table& t = table_for(type);
            if (!spans_cover(t, address, 1)) return fail(ExceptionCode::IllegalDataAddress);
            if (type == DataType::HoldingRegister) {
                for (const auto& rule : d.profile.scaling) {
                    if (rule.covers(address)) {
                        value = rule.apply(value);
                        break;
                    }
                }
            }
            t.values[address] = value;
            publish_dynamics(d);
            return req;
        }
        case FunctionCode::WriteMultipleCoils:
        case FunctionCode::WriteMultipleRegisters: {
            const DataType type = fc == 15 ? DataType::Coil : DataType::HoldingRegister;
            if (req.payload.size() < 5) return fail(ExceptionCode::IllegalDataValue);
            const std::uint16_t address = be16(req.payload, 0);
            const std::uint16_t count = be16(req.payload, 2);
            const std::size_t byte_count = req.payload[4];
            const std::size_t expected = type == DataType::Coil ? (count + 7u) / 8u : count * 2u;
            if (count == 0 || count > modbus::max_write_count(type) || byte_count != expected ||
                req.payload.size() != 5 + byte_count)
                return fail(ExceptionCode::IllegalDataValue);
            Table& t = table_for(type);
            if (!spans_cover(t, address, count)) return fail(ExceptionCode::IllegalDataAddress);
            std::span<const std::uint8_t> data(req.payload.data() + 5, byte_count);
            for (std::uint16_t i = 0; i < count; ++i) {
                const auto a = static_cast<std::uint16_t>(address + i);
                std::uint16_t v;
                if (type == DataType::Coil) {
                    v = (data[i / 8] >> (i % 8)) & 1u;
                } else {
                    v = static_cast<std::uint16_t>((data[2 * i] << 8) | data[2 * i + 1]);
                    for (const auto& rule : d.profile.scaling) {
                        if (rule.covers(a)) {
                            v = rule.apply(v);
                            break;
                        }
                    }
                }
                t.values[a] = v;
            }
            publish_dynamics(d);
            Pdu echo{fc, {req.payload.begin(), req.payload.begin() + 4}};
            return echo;
        }
    }
    return fail(ExceptionCode::IllegalFunction);
}

}  // namespace otprobe::sim
