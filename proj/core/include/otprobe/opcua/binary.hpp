#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "otprobe/opcua/types.hpp"

namespace otprobe::opcua {

using Bytes = std::vector<std::uint8_t>;

/// Malformed or unsupported binary content.
class DecodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct QualifiedName {
    std::uint16_t ns{0};
    std::string name;
    friend bool operator==(const QualifiedName&, const QualifiedName&) = default;
};

struct LocalizedText {
    std::string locale;
    std::string text;
    friend bool operator==(const LocalizedText&, const LocalizedText&) = default;
};

/// Scalar variant as it appears on the wire. Wider than Value because
/// attribute reads return bytes, node ids and names as well.
using WireVariant = std::variant<std::monostate, bool, std::uint8_t, std::int32_t, std::uint32_t, double, std::string,
                                 DateTime, NodeId, QualifiedName, LocalizedText>;

WireVariant to_wire(const Value& v);
/// Nullopt for wire types outside the five process value types.
std::optional<Value> from_wire(const WireVariant& v);

struct DataValue {
    std::optional<WireVariant> value;
    std::optional<std::uint32_t> status;
    std::optional<DateTime> source_timestamp;
    std::optional<DateTime> server_timestamp;

    std::uint32_t status_or_good() const noexcept { return status.value_or(status::Good); }
};

/// Extension object carrying a binary-encoded body.
struct ExtensionObject {
    NodeId type_id;
    std::optional<Bytes> body;
};

/// Little-endian encoder.
class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void boolean(bool v) { u8(v ? 1 : 0); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void i64(std::int64_t v);
    void f64(double v);
    /// Length-prefixed; empty strings encode with length 0.
    void string(std::string_view s);
    /// Length -1.
    void null_string() { i32(-1); }
    void byte_string(std::span<const std::uint8_t> b);
    void null_byte_string() { i32(-1); }
    void date_time(const DateTime& t) { i64(t.ticks); }
    void raw(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

    void node_id(const NodeId& id);
    void expanded_node_id(const NodeId& id) { node_id(id); }
    void qualified_name(const QualifiedName& q);
    void localized_text(const LocalizedText& t);
    void variant(const WireVariant& v);
    void data_value(const DataValue& v);
    void extension_object(const ExtensionObject& e);
    void string_array(const std::vector<std::string>& items);
    /// An empty DiagnosticInfo.
    void empty_diagnostics() { u8(0); }

    template <typename T, typename F>
    void array(const std::vector<T>& items, F&& each) {
        i32(static_cast<std::int32_t>(items.size()));
        for (const auto& item : items) each(*this, item);
    }

    const Bytes& bytes() const noexcept { return out_; }
    Bytes take() { return std::move(out_); }
    std::size_t size() const noexcept { return out_.size(); }

private:
    Bytes out_;
};

/// Little-endian decoder with bounds checks; every failure is a DecodeError.
class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : data_(bytes) {}

    std::uint8_t u8();
    bool boolean() { return u8() != 0; }
    std::uint16_t u16();
    std::uint32_t u32();
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    std::int64_t i64();
    double f64();
    /// Null strings decode as empty.
    std::string string();
    Bytes byte_string();
    DateTime date_time() { return DateTime{i64()}; }
    std::span<const std::uint8_t> raw(std::size_t n);

    NodeId node_id();
    /// Namespace URI and server index flags are consumed and dropped.
    NodeId expanded_node_id();
    QualifiedName qualified_name();
    LocalizedText localized_text();
    WireVariant variant();
    DataValue data_value();
    ExtensionObject extension_object();
    std::vector<std::string> string_array();
    void skip_diagnostics();
    /// Array length; -1 (null) becomes 0. Rejects lengths that cannot fit the remaining input.
    std::size_t array_length(std::size_t min_element_size = 1);

    template <typename F>
    auto array(F&& each) -> std::vector<decltype(each(*this))> {
        const std::size_t n = array_length();
        std::vector<decltype(each(*this))> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(each(*this));
        return out;
    }

    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    std::size_t position() const noexcept { return pos_; }

private:
    void need(std::size_t n) const;

    std::span<const std::uint8_t> data_;
    std::size_t pos_{0};
    int depth_{0};
};

}  // namespace otprobe::opcua
