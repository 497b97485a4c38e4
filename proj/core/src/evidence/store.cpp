#include "otprobe/evidence/store.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include "otprobe/util/time.hpp"

namespace otprobe::evidence {

namespace {

std::string new_id() {
    static std::mutex m;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(m);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out = "ev-";
    std::uint64_t v = rng();
    for (int i = 0; i < 16; ++i, v >>= 4) out.push_back(hex[v & 0xF]);
    return out;
}

}  // namespace

const char* to_string(Category c) noexcept {
    switch (c) {
        case Category::Scan: return "scan";
        case Category::Modbus: return "modbus";
        case Category::OpcUa: return "opcua";
    }
    return "scan";
}

std::optional<Category> parse_category(std::string_view text) noexcept {
    for (auto c : {Category::Scan, Category::Modbus, Category::OpcUa}) {
        if (text == to_string(c)) return c;
    }
    return std::nullopt;
}

nlohmann::json to_json(const EvidenceItem& item) {
    nlohmann::json j = {{"id", item.id},
                        {"timestamp", item.timestamp},
                        {"category", to_string(item.category)},
                        {"params", item.params},
                        {"output", item.output}};
    if (!item.idempotency_key.empty()) j["idempotency_key"] = item.idempotency_key;
    return j;
}

EvidenceItem item_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("evidence item must be an object");
    EvidenceItem item;
    try {
        item.id = j.at("id").get<std::string>();
        item.timestamp = j.at("timestamp").get<std::string>();
        const auto cat = parse_category(j.at("category").get<std::string>());
        if (!cat) throw std::invalid_argument("unknown category '" + j.at("category").get<std::string>() + "'");
        item.category = *cat;
        item.params = j.value("params", nlohmann::json::object());
        item.output = j.value("output", nlohmann::json::object());
        item.idempotency_key = j.value("idempotency_key", "");
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed evidence item: ") + e.what());
    }
    if (item.id.empty()) throw std::invalid_argument("evidence item has an empty id");
    return item;
}

EvidenceStore::EvidenceStore(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.empty()) return;
    std::error_code ec;
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path(), ec);
    std::ifstream in(path_);
    if (!in) return;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            items_.push_back(item_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception&) {
            ++skipped_;
        }
    }
}

void EvidenceStore::persist(const EvidenceItem& item) {
    if (path_.empty()) return;
    std::ofstream out(path_, std::ios::app);
    if (!out) throw StorageError("cannot open evidence store " + path_.string());
    out << to_json(item).dump() << '\n';
    out.flush();
    if (!out) throw StorageError("cannot write evidence store " + path_.string());
}

EvidenceItem EvidenceStore::append(Category category, nlohmann::json params, nlohmann::json output,
                                   const std::string& idempotency_key) {
    EvidenceItem item;
    item.category = category;
    item.params = std::move(params);
    item.output = std::move(output);
    item.idempotency_key = idempotency_key;
    return append(std::move(item));
}

EvidenceItem EvidenceStore::append(EvidenceItem item) {
    std::lock_guard lock(mutex_);
    if (!item.idempotency_key.empty()) {
        for (const auto& existing : items_) {
            if (existing.idempotency_key == item.idempotency_key) return existing;
        }
    }
    if (item.id.empty()) item.id = new_id();
    if (item.timestamp.empty()) item.timestamp = util::iso8601_now();
    persist(item);
    items_.push_back(item);
    return item;
}

std::vector<EvidenceItem> EvidenceStore::items() const {
    std::lock_guard lock(mutex_);
    return items_;
}

std::vector<EvidenceItem> EvidenceStore::items(Category category) const {
    std::lock_guard lock(mutex_);
    std::vector<EvidenceItem> out;
    std::copy_if(items_.begin(), items_.end(), std::back_inserter(out),
                 [&](const EvidenceItem& i) { return i.category == category; });
    return out;
}

std::optional<EvidenceItem> EvidenceStore::get(const std::string& id) const {
    std::lock_guard lock(mutex_);
    for (const auto& i : items_) {
        if (i.id == id) return i;
    }
    return std::nullopt;
}

std::optional<EvidenceItem> EvidenceStore::find_by_key(const std::string& idempotency_key) const {
    if (idempotency_key.empty()) return std::nullopt;
    std::lock_guard lock(mutex_);
    for (const auto& i : items_) {
        if (i.idempotency_key == idempotency_key) return i;
    }
    return std::nullopt;
}

std::size_t EvidenceStore::size() const {
    std::lock_guard lock(mutex_);
    return items_.size();
}

void EvidenceStore::clear() {
    std::lock_guard lock(mutex_);
    if (!path_.empty()) {
        std::ofstream out(path_, std::ios::trunc);
        if (!out) throw StorageError("cannot truncate evidence store " + path_.string());
    }
    items_.clear();
}

std::vector<EvidenceItem> select_items(const std::vector<EvidenceItem>& items, std::size_t n) {
    const std::size_t take = std::min(n, items.size());
    return {items.end() - static_cast<std::ptrdiff_t>(take), items.end()};
}

}  // namespace otprobe::evidence
