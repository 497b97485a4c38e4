#pragma once

#include <chrono>
#include <filesystem>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "otprobe/evidence/facts.hpp"
#include "otprobe/evidence/store.hpp"

namespace otprobe::evidence {

enum class Audience {
    Executive,
    Technical,
};

const char* to_string(Audience a) noexcept;
std::optional<Audience> parse_audience(std::string_view text) noexcept;

struct ReportRequest {
    Audience audience{Audience::Technical};
    std::string title{"ICS/OT assessment"};
    /// Model identifier; empty falls back to the configured model.
    std::string model;
    std::size_t max_items{default_max_items};

    /// Throws std::invalid_argument on an empty title or max_items == 0.
    void validate() const;
};

/// Executive datasets hold per-target statistics; technical datasets add
/// per-target details and the interaction traces ("traces" arrays).
struct ReportDataset {
    Audience audience{Audience::Technical};
    nlohmann::json data = nlohmann::json::object();
};

struct SelectionInfo {
    std::size_t item_count{0};
    std::string first_timestamp;
    std::string last_timestamp;
    std::vector<std::string> evidence_ids;
};

SelectionInfo describe_selection(const std::vector<EvidenceItem>& selected);

ReportDataset build_dataset(const ReportRequest& request, const Extraction& facts,
                            const std::vector<MitigationEntry>& mitigations, const SelectionInfo& selection);

/// select_items + extract_all + map_mitigations + build_dataset.
ReportDataset prepare_dataset(const ReportRequest& request, const std::vector<EvidenceItem>& inbox);

/// Stable key-value text form embedded in prompts (pretty-printed JSON).
std::string serialize(const ReportDataset& dataset);

const char* instruction_for(Audience a) noexcept;
std::string build_prompt(const std::string& title, Audience audience, const ReportDataset& dataset);

/// Deterministic Markdown rendering used in offline mode.
std::string render_offline(const std::string& title, const ReportDataset& dataset);

enum class LlmMode {
    Offline,
    Online,
};

const char* to_string(LlmMode m) noexcept;

struct LlmConfig {
    LlmMode mode{LlmMode::Offline};
    /// e.g. http://127.0.0.1:8000/v1; requests go to {base_url}/chat/completions.
    std::string base_url;
    std::string api_key;
    std::string model{"gpt-4o-mini"};
    std::chrono::milliseconds timeout{60000};
};

/// OTPROBE_LLM_MODE, OTPROBE_LLM_BASE_URL, OTPROBE_LLM_API_KEY,
/// OTPROBE_LLM_MODEL, OTPROBE_LLM_TIMEOUT_MS override the given values.
/// Setting a base URL without a mode switches to online.
LlmConfig llm_config_from_env(LlmConfig base);

enum class ReportErrorKind {
    InvalidRequest,
    EndpointUnreachable,
    AuthFailure,
    MalformedCompletion,
    StorageFailure,
};

const char* to_string(ReportErrorKind k) noexcept;

class ReportError : public std::runtime_error {
public:
    ReportError(ReportErrorKind kind, const std::string& what, bool retryable, int http_status = 0)
        : std::runtime_error(what), kind_(kind), retryable_(retryable), http_status_(http_status) {}

    ReportErrorKind kind() const noexcept { return kind_; }
    bool retryable() const noexcept { return retryable_; }
    int http_status() const noexcept { return http_status_; }

private:
    ReportErrorKind kind_;
    bool retryable_;
    int http_status_;
};

struct GeneratedReport {
    std::string markdown;
    std::string model;  // "offline-template" in offline mode
    std::string prompt;
};

/// Offline: render_offline. Online: POST a chat completion and return
/// choices[0].message.content verbatim. Throws ReportError.
GeneratedReport generate_report(const ReportRequest& request, const ReportDataset& dataset, const LlmConfig& config);

struct ReportMeta {
    std::string id;
    std::string title;
    std::string audience;
    std::string generated;
    std::size_t items{0};
    std::string model;
};

nlohmann::json to_json(const ReportMeta& m);

/// Directory of <id>.md files, each starting with an HTML-comment metadata
/// header. An empty directory path keeps reports in memory.
class ReportStore {
public:
    explicit ReportStore(std::filesystem::path dir = {});

    /// Writes atomically (temp file + rename). Throws ReportError(StorageFailure).
    ReportMeta save(const ReportMeta& meta, const std::string& markdown);
    /// Full stored file contents (header + body).
    std::optional<std::string> load(const std::string& id) const;
    std::vector<ReportMeta> list() const;
    std::size_t size() const;

private:
    std::filesystem::path dir_;
    mutable std::mutex mutex_;
    std::vector<std::pair<ReportMeta, std::string>> memory_;
};

/// Header line block written in front of each stored report.
std::string metadata_header(const ReportMeta& meta);

struct ReportResult {
    ReportMeta meta;
    std::string markdown;
    std::string stored;  // exact bytes served by the download route
};

/// Snapshots the inbox, builds the dataset, generates, then persists. Nothing
/// is persisted when generation fails.
ReportResult run_report_pipeline(const ReportRequest& request, const EvidenceStore& inbox, const LlmConfig& config,
                                 ReportStore& reports);

}  // namespace otprobe::evidence
