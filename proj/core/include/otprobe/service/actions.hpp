#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "otprobe/evidence/store.hpp"

namespace otprobe::service {

enum class Tool {
    Scan,
    Modbus,
    OpcUa,
};

const char* to_string(Tool t) noexcept;
std::optional<Tool> parse_tool(std::string_view text) noexcept;
evidence::Category category_of(Tool t) noexcept;

/// Verbs accepted per tool ("run" for scan).
const std::vector<std::string>& actions_for(Tool t);

struct FieldError {
    std::string field;
    std::string message;
};

/// Parameters failed the per-action schema. Maps to HTTP 400 / exit code 2.
class ValidationError : public std::invalid_argument {
public:
    ValidationError(std::vector<FieldError> fields, const std::string& kind = "validation");
    const std::vector<FieldError>& fields() const noexcept { return fields_; }
    /// "validation", or a module-specific tag such as "InvalidHostSpec".
    const std::string& kind() const noexcept { return kind_; }

private:
    std::vector<FieldError> fields_;
    std::string kind_;
};

enum class Outcome {
    Ok,
    /// The target answered with a protocol-level refusal (Modbus exception,
    /// OPC UA Bad status, rejected identity).
    TargetError,
    /// Refused, timed out, reset, or spoke an unexpected protocol.
    Unreachable,
};

const char* to_string(Outcome o) noexcept;

/// One executed tool action. `params` is the normalised parameter set that
/// goes into evidence (passwords removed); `output` always carries "ok" and,
/// on failure, "error": {"kind", "message", ...}.
struct ActionResult {
    Tool tool{Tool::Scan};
    std::string action;
    nlohmann::json params = nlohmann::json::object();
    nlohmann::json output = nlohmann::json::object();
    std::string text;
    Outcome outcome{Outcome::Ok};
    std::chrono::milliseconds elapsed{0};
};

struct ExecutorLimits {
    /// Server-side cap on a single scan.
    std::chrono::milliseconds scan_cap{120000};
};

/// Validates `params` (throws ValidationError) then runs the action. Network
/// and protocol failures are reported in the result, never thrown.
ActionResult execute(Tool tool, const std::string& action, const nlohmann::json& params, const ExecutorLimits& limits = {});

/// Machine-readable response record shared by the HTTP API and `--json`.
nlohmann::json response_record(const ActionResult& result, const std::optional<std::string>& evidence_id);

/// Rebuilds the record for an item already in the inbox (idempotent replay).
nlohmann::json response_record(const evidence::EvidenceItem& item);

nlohmann::json validation_body(const ValidationError& e);

/// Runs the action and stores evidence when asked. A non-empty idempotency
/// key that is already in the inbox returns the stored record without
/// touching the target again.
struct ToolCall {
    Tool tool{Tool::Scan};
    std::string action;
    nlohmann::json params = nlohmann::json::object();
    bool store_evidence{false};
    std::string idempotency_key;
};

struct ToolResponse {
    nlohmann::json record;
    Outcome outcome{Outcome::Ok};
    bool replayed{false};
};

ToolResponse run_tool(const ToolCall& call, evidence::EvidenceStore* inbox, const ExecutorLimits& limits = {});

}  // namespace otprobe::service
