#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace otprobe::opcua {

/// Namespace index plus numeric or string identifier.
///
/// Text form is "ns=<n>;i=<num>" or "ns=<n>;s=<str>". parse() also accepts
/// the short "i=85" form (namespace 0) and tolerates the spaced
/// "ns=2; i=10;" notation used in operator notes.
struct NodeId {
    std::uint16_t ns{0};
    std::variant<std::uint32_t, std::string> id{std::uint32_t{0}};

    NodeId() = default;
    NodeId(std::uint16_t n, std::uint32_t numeric) : ns(n), id(numeric) {}
    NodeId(std::uint16_t n, std::string text) : ns(n), id(std::move(text)) {}

    bool is_numeric() const noexcept { return id.index() == 0; }
    bool is_null() const noexcept { return ns == 0 && is_numeric() && numeric() == 0; }
    std::uint32_t numeric() const { return std::get<std::uint32_t>(id); }
    const std::string& text() const { return std::get<std::string>(id); }

    std::string to_string() const;
    /// Nullopt on malformed input.
    static std::optional<NodeId> parse(std::string_view text);

    friend bool operator==(const NodeId&, const NodeId&) = default;
    friend bool operator<(const NodeId& a, const NodeId& b) {
        if (a.ns != b.ns) return a.ns < b.ns;
        return a.id < b.id;
    }
};

/// OPC UA DateTime: 100 ns ticks since 1601-01-01T00:00:00Z.
struct DateTime {
    std::int64_t ticks{0};

    static DateTime now();
    static DateTime from_time_point(std::chrono::system_clock::time_point tp);
    std::chrono::system_clock::time_point to_time_point() const;
    /// ISO-8601 UTC with second precision, e.g. 2024-01-02T03:04:05Z.
    std::string to_iso8601() const;
    static std::optional<DateTime> parse_iso8601(std::string_view text);

    friend bool operator==(const DateTime&, const DateTime&) = default;
    friend auto operator<=>(const DateTime&, const DateTime&) = default;
};

enum class ValueType : std::uint8_t {
    Boolean = 1,
    Int32 = 6,
    Double = 11,
    String = 12,
    DateTime = 13,
};

const char* to_string(ValueType t) noexcept;
std::optional<ValueType> parse_value_type(std::string_view text) noexcept;
/// The standard DataType node (ns=0) for a value type.
NodeId data_type_node(ValueType t);
std::optional<ValueType> value_type_from_data_type(const NodeId& id) noexcept;

/// Typed process value. Alternative order matches ValueType.
using Value = std::variant<bool, std::int32_t, double, std::string, DateTime>;

ValueType type_of(const Value& v) noexcept;
/// Human-readable rendering ("true", "1200", "21.5", "2024-01-02T03:04:05Z").
std::string render(const Value& v);
/// Parses text as the given type; nullopt when it does not fit.
std::optional<Value> parse_value(ValueType t, std::string_view text);

/// Status codes used on the wire.
namespace status {
inline constexpr std::uint32_t Good = 0;
inline constexpr std::uint32_t BadInternalError = 0x80020000;
inline constexpr std::uint32_t BadDecodingError = 0x80070000;
inline constexpr std::uint32_t BadServiceUnsupported = 0x800B0000;
inline constexpr std::uint32_t BadUserAccessDenied = 0x801F0000;
inline constexpr std::uint32_t BadIdentityTokenInvalid = 0x80200000;
inline constexpr std::uint32_t BadIdentityTokenRejected = 0x80210000;
inline constexpr std::uint32_t BadSecureChannelIdInvalid = 0x80220000;
inline constexpr std::uint32_t BadSessionIdInvalid = 0x80250000;
inline constexpr std::uint32_t BadSessionClosed = 0x80260000;
inline constexpr std::uint32_t BadSessionNotActivated = 0x80270000;
inline constexpr std::uint32_t BadNodeIdUnknown = 0x80340000;
inline constexpr std::uint32_t BadAttributeIdInvalid = 0x80350000;
inline constexpr std::uint32_t BadNotReadable = 0x803A0000;
inline constexpr std::uint32_t BadNotWritable = 0x803B0000;
inline constexpr std::uint32_t BadSecurityPolicyRejected = 0x80550000;
inline constexpr std::uint32_t BadTypeMismatch = 0x80740000;
inline constexpr std::uint32_t BadTcpMessageTypeInvalid = 0x807E0000;
inline constexpr std::uint32_t BadTcpMessageTooLarge = 0x80800000;
inline constexpr std::uint32_t BadTcpEndpointUrlInvalid = 0x80830000;

inline bool is_bad(std::uint32_t code) noexcept { return (code & 0x80000000u) != 0; }
/// Symbolic name for the codes above, hex otherwise.
std::string name(std::uint32_t code);
}  // namespace status

/// Well-known ns=0 node ids.
namespace ids {
inline constexpr std::uint32_t Objects = 85;
inline constexpr std::uint32_t Server = 2253;
inline constexpr std::uint32_t CurrentTime = 2258;
inline constexpr std::uint32_t HierarchicalReferences = 33;
inline constexpr std::uint32_t Organizes = 35;
inline constexpr std::uint32_t HasProperty = 46;
inline constexpr std::uint32_t HasComponent = 47;
inline constexpr std::uint32_t HasTypeDefinition = 40;
inline constexpr std::uint32_t FolderType = 61;
inline constexpr std::uint32_t BaseObjectType = 58;
inline constexpr std::uint32_t BaseDataVariableType = 63;
}  // namespace ids

enum class AttributeId : std::uint32_t {
    NodeId = 1,
    NodeClass = 2,
    BrowseName = 3,
    DisplayName = 4,
    Value = 13,
    DataType = 14,
    AccessLevel = 17,
    UserAccessLevel = 18,
};

enum class NodeClass : std::uint32_t {
    Unspecified = 0,
    Object = 1,
    Variable = 2,
    Method = 4,
    ObjectType = 8,
    VariableType = 16,
    ReferenceType = 32,
    DataType = 64,
    View = 128,
};

const char* to_string(NodeClass c) noexcept;

inline constexpr std::uint8_t access_read = 0x01;
inline constexpr std::uint8_t access_write = 0x02;

}  // namespace otprobe::opcua
