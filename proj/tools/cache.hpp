#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace atlas {

inline constexpr int kCacheVersion = 1;

// Hex SHA-256 of the text.
std::string digest(const std::string& text);

struct CacheEntry {
    std::string key;
    int version = 0;
    std::uintmax_t bytes = 0;
    std::string kind;
};

// One file per record: a header line "cubic-atlas-cache <version> <key> <kind>"
// followed by the payload. Records of another version are treated as absent.
class Cache {
public:
    explicit Cache(std::filesystem::path dir) : dir_(std::move(dir)) {}

    // Flag, then ATLAS_CACHE_DIR, then ./.atlas-cache.
    static std::filesystem::path resolve_dir(const std::string& flag);

    // Key for a job description (kind plus canonical parameter text).
    static std::string key(const std::string& kind, const std::string& job);

    std::optional<std::string> get(const std::string& key) const;
    void put(const std::string& key, const std::string& kind, const std::string& payload) const;

    std::vector<CacheEntry> list() const;
    int clear() const;  // removes records and stray temp files, returns the count
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path path_of(const std::string& key) const { return dir_ / (key + ".rec"); }
    std::filesystem::path dir_;
};

}  // namespace atlas
