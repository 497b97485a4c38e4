#pragma once

#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace otprobe::evidence {

enum class Category {
    Scan,
    Modbus,
    OpcUa,
};

const char* to_string(Category c) noexcept;
std::optional<Category> parse_category(std::string_view text) noexcept;

/// One tool execution: when it ran, which tool, with what parameters, and
/// what came back. Immutable once appended.
struct EvidenceItem {
    std::string id;
    std::string timestamp;
    Category category{Category::Scan};
    nlohmann::json params = nlohmann::json::object();
    nlohmann::json output = nlohmann::json::object();
    /// Client-supplied token; a repeated append with the same token returns
    /// the original item.
    std::string idempotency_key;
};

nlohmann::json to_json(const EvidenceItem& item);
/// Throws std::invalid_argument on missing fields or an unknown category.
EvidenceItem item_from_json(const nlohmann::json& j);

class StorageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Append-only inbox persisted as one JSON object per line. An empty path
/// keeps everything in memory.
class EvidenceStore {
public:
    explicit EvidenceStore(std::filesystem::path path = {});

    EvidenceStore(const EvidenceStore&) = delete;
    EvidenceStore& operator=(const EvidenceStore&) = delete;

    /// Assigns id and timestamp. Throws StorageError when the file cannot be written.
    EvidenceItem append(Category category, nlohmann::json params, nlohmann::json output,
                        const std::string& idempotency_key = {});
    /// Keeps the item's id and timestamp when set (import and replay).
    EvidenceItem append(EvidenceItem item);

    std::vector<EvidenceItem> items() const;
    std::vector<EvidenceItem> items(Category category) const;
    std::optional<EvidenceItem> get(const std::string& id) const;
    std::optional<EvidenceItem> find_by_key(const std::string& idempotency_key) const;
    std::size_t size() const;
    /// Removes every item, including the on-disk file contents.
    void clear();

    const std::filesystem::path& path() const noexcept { return path_; }
    /// Lines in the file that could not be parsed at load time.
    std::size_t skipped_lines() const noexcept { return skipped_; }

private:
    void persist(const EvidenceItem& item);

    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::vector<EvidenceItem> items_;
    std::size_t skipped_{0};
};

inline constexpr std::size_t default_max_items = 200;

/// The `n` most recent items, oldest first.
std::vector<EvidenceItem> select_items(const std::vector<EvidenceItem>& items, std::size_t n = default_max_items);

}  // namespace otprobe::evidence
