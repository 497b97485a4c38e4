#include "otprobe/opcua/types.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <ctime>

namespace otprobe::opcua {

namespace {

// Seconds between 1601-01-01 and 1970-01-01.
constexpr std::int64_t epoch_offset_ticks = 11644473600LL * 10'000'000LL;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
    T out{};
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    if (ec != std::errc{} || p != end || s.empty()) return std::nullopt;
    return out;
}

}  // namespace

std::string NodeId::to_string() const {
    std::string out = "ns=" + std::to_string(ns);
    if (is_numeric()) return out + ";i=" + std::to_string(numeric());
    return out + ";s=" + text();
}

std::optional<NodeId> NodeId::parse(std::string_view text) {
    text = trim(text);
    std::uint16_t ns = 0;
    if (text.substr(0, 3) == "ns=") {
        const auto semi = text.find(';');
        if (semi == std::string_view::npos) return std::nullopt;
        auto n = parse_number<std::uint16_t>(text.substr(3, semi - 3));
        if (!n) return std::nullopt;
        ns = *n;
        text = trim(text.substr(semi + 1));
    }
    if (text.substr(0, 2) == "i=") {
        auto body = text.substr(2);
        if (!body.empty() && body.back() == ';') body.remove_suffix(1);
        auto v = parse_number<std::uint32_t>(trim(body));
        if (!v) return std::nullopt;
        return NodeId(ns, *v);
    }
    if (text.substr(0, 2) == "s=") return NodeId(ns, std::string(text.substr(2)));
    return std::nullopt;
}

DateTime DateTime::now() { return from_time_point(std::chrono::system_clock::now()); }

DateTime DateTime::from_time_point(std::chrono::system_clock::time_point tp) {
    const auto ticks = std::chrono::duration_cast<std::chrono::duration<std::int64_t, std::ratio<1, 10'000'000>>>(
                           tp.time_since_epoch())
                           .count();
    return DateTime{ticks + epoch_offset_ticks};
}

std::chrono::system_clock::time_point DateTime::to_time_point() const {
    const std::chrono::duration<std::int64_t, std::ratio<1, 10'000'000>> since_unix(ticks - epoch_offset_ticks);
    return std::chrono::system_clock::time_point(std::chrono::duration_cast<std::chrono::system_clock::duration>(since_unix));
}

std::string DateTime::to_iso8601() const {
    const std::int64_t unix_ticks = ticks - epoch_offset_ticks;
    std::int64_t secs = unix_ticks / 10'000'000;
    if (unix_ticks % 10'000'000 < 0) --secs;
    const std::time_t t = static_cast<std::time_t>(secs);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::array<char, 32> buf{};
    std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf.data();
}

std::optional<DateTime> DateTime::parse_iso8601(std::string_view text) {
    const std::string s(trim(text));
    std::tm tm{};
    int consumed = 0;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour, &tm.tm_min,
                    &tm.tm_sec, &consumed) != 6)
        return std::nullopt;
    std::int64_t fraction_ticks = 0;
    std::size_t pos = static_cast<std::size_t>(consumed);
    if (pos < s.size() && s[pos] == '.') {
        std::int64_t scale = 1'000'000;
        for (++pos; pos < s.size() && s[pos] >= '0' && s[pos] <= '9'; ++pos) {
            fraction_ticks += (s[pos] - '0') * scale;
            scale /= 10;
        }
    }
    if (pos != s.size() - 1 || s[pos] != 'Z') return std::nullopt;
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    const std::time_t t = timegm(&tm);
    return DateTime{static_cast<std::int64_t>(t) * 10'000'000 + fraction_ticks + epoch_offset_ticks};
}

const char* to_string(ValueType t) noexcept {
    switch (t) {
        case ValueType::Boolean: return "Boolean";
        case ValueType::Int32: return "Int32";
        case ValueType::Double: return "Double";
        case ValueType::String: return "String";
        case ValueType::DateTime: return "DateTime";
    }
    return "Unknown";
}

std::optional<ValueType> parse_value_type(std::string_view text) noexcept {
    for (auto t : {ValueType::Boolean, ValueType::Int32, ValueType::Double, ValueType::String, ValueType::DateTime}) {
        const std::string_view name = to_string(t);
        if (text.size() == name.size() &&
            std::equal(text.begin(), text.end(), name.begin(), [](char a, char b) { return std::tolower(a) == std::tolower(b); }))
            return t;
    }
    if (text == "bool") return ValueType::Boolean;
    if (text == "int" || text == "int32") return ValueType::Int32;
    return std::nullopt;
}

NodeId data_type_node(ValueType t) { return NodeId(0, static_cast<std::uint32_t>(t)); }

std::optional<ValueType> value_type_from_data_type(const NodeId& id) noexcept {
    if (id.ns != 0 || !id.is_numeric()) return std::nullopt;
    switch (id.numeric()) {
        case 1: return ValueType::Boolean;
        case 6: return ValueType::Int32;
        case 11: return ValueType::Double;
        case 12: return ValueType::String;
        case 13: return ValueType::DateTime;
        default: return std::nullopt;
    }
}

ValueType type_of(const Value& v) noexcept {
    static constexpr ValueType order[] = {ValueType::Boolean, ValueType::Int32, ValueType::Double, ValueType::String,
                                          ValueType::DateTime};
    return order[v.index()];
}

std::string render(const Value& v) {
    struct Visitor {
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(std::int32_t i) const { return std::to_string(i); }
        std::string operator()(double d) const {
            std::array<char, 32> buf{};
            auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), d);
            return std::string(buf.data(), p);
        }
        std::string operator()(const std::string& s) const { return s; }
        std::string operator()(const DateTime& t) const { return t.to_iso8601(); }
    };
    return std::visit(Visitor{}, v);
}

std::optional<Value> parse_value(ValueType t, std::string_view text) {
    switch (t) {
        case ValueType::Boolean: {
            const auto s = trim(text);
            if (s == "true" || s == "1" || s == "on") return Value{true};
            if (s == "false" || s == "0" || s == "off") return Value{false};
            return std::nullopt;
        }
        case ValueType::Int32:
            if (auto v = parse_number<std::int32_t>(trim(text))) return Value{*v};
            return std::nullopt;
        case ValueType::Double:
            if (auto v = parse_number<double>(trim(text))) return Value{*v};
            return std::nullopt;
        case ValueType::String: return Value{std::string(text)};
        case ValueType::DateTime:
            if (auto v = DateTime::parse_iso8601(text)) return Value{*v};
            return std::nullopt;
    }
    return std::nullopt;
}

std::string status::name(std::uint32_t code) {
    switch (code) {
        case Good: return "Good";
        case BadInternalError: return "BadInternalError";
        case BadDecodingError: return "BadDecodingError";
        case BadServiceUnsupported: return "BadServiceUnsupported";
        case BadUserAccessDenied: return "BadUserAccessDenied";
        case BadIdentityTokenInvalid: return "BadIdentityTokenInvalid";
        case BadIdentityTokenRejected: return "BadIdentityTokenRejected";
        case BadSecureChannelIdInvalid: return "BadSecureChannelIdInvalid";
        case BadSessionIdInvalid: return "BadSessionIdInvalid";
        case BadSessionClosed: return "BadSessionClosed";
        case BadSessionNotActivated: return "BadSessionNotActivated";
        case BadNodeIdUnknown: return "BadNodeIdUnknown";
        case BadAttributeIdInvalid: return "BadAttributeIdInvalid";
        case BadNotReadable: return "BadNotReadable";
        case BadNotWritable: return "BadNotWritable";
        case BadSecurityPolicyRejected: return "BadSecurityPolicyRejected";
        case BadTypeMismatch: return "BadTypeMismatch";
        case BadTcpMessageTypeInvalid: return "BadTcpMessageTypeInvalid";
        case BadTcpMessageTooLarge: return "BadTcpMessageTooLarge";
        case BadTcpEndpointUrlInvalid: return "BadTcpEndpointUrlInvalid";
        default: break;
    }
    std::array<char, 16> buf{};
    std::snprintf(buf.data(), buf.size(), "0x%08X", code);
    return buf.data();
}

const char* to_string(NodeClass c) noexcept {
    switch (c) {
        case NodeClass::Object: return "Object";
        case NodeClass::Variable: return "Variable";
        case NodeClass::Method: return "Method";
        case NodeClass::ObjectType: return "ObjectType";
        case NodeClass::VariableType: return "VariableType";
        case NodeClass::ReferenceType: return "ReferenceType";
        case NodeClass::DataType: return "DataType";
        case NodeClass::View: return "View";
        case NodeClass::Unspecified: break;
    }
    return "Unspecified";
}

}  // namespace otprobe::opcua
