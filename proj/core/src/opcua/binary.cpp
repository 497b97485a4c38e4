#include "otprobe/opcua/binary.hpp"

#include <bit>
#include <cstring>

namespace otprobe::opcua {

namespace {

enum VariantTypeId : std::uint8_t {
    VtNull = 0,
    VtBoolean = 1,
    VtByte = 3,
    VtInt32 = 6,
    VtUInt32 = 7,
    VtDouble = 11,
    VtString = 12,
    VtDateTime = 13,
    VtNodeId = 17,
    VtStatusCode = 19,
    VtQualifiedName = 20,
    VtLocalizedText = 21,
};

constexpr std::uint8_t variant_array_flag = 0x80;
constexpr std::uint8_t variant_dimensions_flag = 0x40;
constexpr int max_diagnostic_depth = 8;

}  // namespace

WireVariant to_wire(const Value& v) {
    return std::visit([](const auto& x) -> WireVariant { return x; }, v);
}

std::optional<Value> from_wire(const WireVariant& v) {
    if (auto* b = std::get_if<bool>(&v)) return Value{*b};
    if (auto* i = std::get_if<std::int32_t>(&v)) return Value{*i};
    if (auto* d = std::get_if<double>(&v)) return Value{*d};
    if (auto* s = std::get_if<std::string>(&v)) return Value{*s};
    if (auto* t = std::get_if<DateTime>(&v)) return Value{*t};
    return std::nullopt;
}

void Writer::u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v));
    u8(static_cast<std::uint8_t>(v >> 8));
}

void Writer::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Writer::i64(std::int64_t v) {
    const auto u = static_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(u >> (8 * i)));
}

void Writer::f64(double v) { i64(static_cast<std::int64_t>(std::bit_cast<std::uint64_t>(v))); }

void Writer::string(std::string_view s) {
    i32(static_cast<std::int32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
}

void Writer::byte_string(std::span<const std::uint8_t> b) {
    i32(static_cast<std::int32_t>(b.size()));
    raw(b);
}

void Writer::node_id(const NodeId& id) {
    if (id.is_numeric()) {
        const std::uint32_t n = id.numeric();
        if (id.ns == 0 && n <= 0xFF) {
            u8(0x00);
            u8(static_cast<std::uint8_t>(n));
        } else if (id.ns <= 0xFF && n <= 0xFFFF) {
            u8(0x01);
            u8(static_cast<std::uint8_t>(id.ns));
            u16(static_cast<std::uint16_t>(n));
        } else {
            u8(0x02);
            u16(id.ns);
            u32(n);
        }
        return;
    }
    u8(0x03);
    u16(id.ns);
    string(id.text());
}

void Writer::qualified_name(const QualifiedName& q) {
    u16(q.ns);
    string(q.name);
}

void Writer::localized_text(const LocalizedText& t) {
    std::uint8_t mask = 0;
    if (!t.locale.empty()) mask |= 0x01;
    if (!t.text.empty()) mask |= 0x02;
    u8(mask);
    if (mask & 0x01) string(t.locale);
    if (mask & 0x02) string(t.text);
}

void Writer::variant(const WireVariant& v) {
    struct Visitor {
        Writer& w;
        void operator()(std::monostate) const { w.u8(VtNull); }
        void operator()(bool b) const { w.u8(VtBoolean), w.boolean(b); }
        void operator()(std::uint8_t b) const { w.u8(VtByte), w.u8(b); }
        void operator()(std::int32_t i) const { w.u8(VtInt32), w.i32(i); }
        void operator()(std::uint32_t u) const { w.u8(VtUInt32), w.u32(u); }
        void operator()(double d) const { w.u8(VtDouble), w.f64(d); }
        void operator()(const std::string& s) const { w.u8(VtString), w.string(s); }
        void operator()(const DateTime& t) const { w.u8(VtDateTime), w.date_time(t); }
        void operator()(const NodeId& n) const { w.u8(VtNodeId), w.node_id(n); }
        void operator()(const QualifiedName& q) const { w.u8(VtQualifiedName), w.qualified_name(q); }
        void operator()(const LocalizedText& t) const { w.u8(VtLocalizedText), w.localized_text(t); }
    };
    std::visit(Visitor{*this}, v);
}

void Writer::data_value(const DataValue& v) {
    std::uint8_t mask = 0;
    if (v.value) mask |= 0x01;
    if (v.status) mask |= 0x02;
    if (v.source_timestamp) mask |= 0x04;
    if (v.server_timestamp) mask |= 0x08;
    u8(mask);
    if (v.value) variant(*v.value);
    if (v.status) u32(*v.status);
    if (v.source_timestamp) date_time(*v.source_timestamp);
    if (v.server_timestamp) date_time(*v.server_timestamp);
}

void Writer::extension_object(const ExtensionObject& e) {
    node_id(e.type_id);
    if (!e.body) {
        u8(0x00);
        return;
    }
    u8(0x01);
    byte_string(*e.body);
}

void Writer::string_array(const std::vector<std::string>& items) {
    array(items, [](Writer& w, const std::string& s) { w.string(s); });
}

void Reader::need(std::size_t n) const {
    if (remaining() < n)
        throw DecodeError("truncated message: need " + std::to_string(n) + " bytes at offset " + std::to_string(pos_) +
                          ", have " + std::to_string(remaining()));
}

std::uint8_t Reader::u8() {
    need(1);
    return data_[pos_++];
}

std::uint16_t Reader::u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
}

std::uint32_t Reader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | data_[pos_ + i];
    pos_ += 4;
    return v;
}

std::int64_t Reader::i64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | data_[pos_ + i];
    pos_ += 8;
    return static_cast<std::int64_t>(v);
}

double Reader::f64() { return std::bit_cast<double>(static_cast<std::uint64_t>(i64())); }

std::span<const std::uint8_t> Reader::raw(std::size_t n) {
    need(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
}

std::string Reader::string() {
    const std::int32_t len = i32();
    if (len < 0) {
        if (len != -1) throw DecodeError("negative string length " + std::to_string(len));
        return {};
    }
    auto b = raw(static_cast<std::size_t>(len));
    return std::string(b.begin(), b.end());
}

Bytes Reader::byte_string() {
    const std::int32_t len = i32();
    if (len < 0) {
        if (len != -1) throw DecodeError("negative byte string length " + std::to_string(len));
        return {};
    }
    auto b = raw(static_cast<std::size_t>(len));
    return Bytes(b.begin(), b.end());
}

NodeId Reader::node_id() {
    const std::uint8_t enc = u8();
    switch (enc & 0x3F) {
        case 0x00: return NodeId(0, u8());
        case 0x01: {
            const std::uint8_t ns = u8();
            return NodeId(ns, u16());
        }
        case 0x02: {
            const std::uint16_t ns = u16();
            return NodeId(ns, u32());
        }
        case 0x03: {
            const std::uint16_t ns = u16();
            return NodeId(ns, string());
        }
        default:
            throw DecodeError("unsupported NodeId encoding 0x" + std::to_string(enc & 0x3F) + " (GUID/opaque identifiers)");
    }
}

NodeId Reader::expanded_node_id() {
    need(1);
    const std::uint8_t flags = data_[pos_];
    NodeId id = node_id();
    if (flags & 0x80) string();
    if (flags & 0x40) u32();
    return id;
}

QualifiedName Reader::qualified_name() {
    QualifiedName q;
    q.ns = u16();
    q.name = string();
    return q;
}

LocalizedText Reader::localized_text() {
    LocalizedText t;
    const std::uint8_t mask = u8();
    if (mask & 0x01) t.locale = string();
    if (mask & 0x02) t.text = string();
    return t;
}

WireVariant Reader::variant() {
    const std::uint8_t enc = u8();
    if (enc & (variant_array_flag | variant_dimensions_flag)) throw DecodeError("array variants are not supported");
    switch (enc) {
        case VtNull: return std::monostate{};
        case VtBoolean: return boolean();
        case VtByte: return u8();
        case VtInt32: return i32();
        case VtUInt32:
        case VtStatusCode: return u32();
        case VtDouble: return f64();
        case VtString: return string();
        case VtDateTime: return date_time();
        case VtNodeId: return node_id();
        case VtQualifiedName: return qualified_name();
        case VtLocalizedText: return localized_text();
        default: throw DecodeError("unsupported variant type " + std::to_string(enc));
    }
}

DataValue Reader::data_value() {
    DataValue v;
    const std::uint8_t mask = u8();
    if (mask & 0x01) v.value = variant();
    if (mask & 0x02) v.status = u32();
    if (mask & 0x04) v.source_timestamp = date_time();
    if (mask & 0x10) u16();
    if (mask & 0x08) v.server_timestamp = date_time();
    if (mask & 0x20) u16();
    return v;
}

ExtensionObject Reader::extension_object() {
    ExtensionObject e;
    e.type_id = node_id();
    const std::uint8_t enc = u8();
    if (enc == 0x00) return e;
    if (enc != 0x01) throw DecodeError("unsupported extension object encoding " + std::to_string(enc));
    e.body = byte_string();
    return e;
}

std::vector<std::string> Reader::string_array() {
    return array([](Reader& r) { return r.string(); });
}

void Reader::skip_diagnostics() {
    if (++depth_ > max_diagnostic_depth) throw DecodeError("diagnostic info nested too deeply");
    const std::uint8_t mask = u8();
    for (std::uint8_t bit : {0x01, 0x02, 0x04, 0x08}) {
        if (mask & bit) i32();
    }
    if (mask & 0x10) string();
    if (mask & 0x20) u32();
    if (mask & 0x40) skip_diagnostics();
    --depth_;
}

std::size_t Reader::array_length(std::size_t min_element_size) {
    const std::int32_t n = i32();
    if (n < 0) {
        if (n != -1) throw DecodeError("negative array length " + std::to_string(n));
        return 0;
    }
    if (static_cast<std::size_t>(n) > remaining() / std::max<std::size_t>(min_element_size, 1))
        throw DecodeError("array length " + std::to_string(n) + " exceeds remaining input");
    return static_cast<std::size_t>(n);
}

}  // namespace otprobe::opcua
