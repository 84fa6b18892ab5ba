#include "cache.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

namespace atlas {

namespace fs = std::filesystem;

namespace {

constexpr const char* kMagic = "cubic-atlas-cache";

struct Header {
    int version = 0;
    std::string key, kind;
};

std::optional<Header> parse_header(const std::string& line) {
    std::istringstream in(line);
    std::string magic;
    Header h;
    if (!(in >> magic >> h.version >> h.key >> h.kind) || magic != kMagic) return std::nullopt;
    return h;
}

}  // namespace

std::string digest(const std::string& text) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

fs::path Cache::resolve_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("ATLAS_CACHE_DIR"); env && *env) return env;
    return ".atlas-cache";
}

std::string Cache::key(const std::string& kind, const std::string& job) {
    return digest(std::string(kMagic) + "\n" + std::to_string(kCacheVersion) + "\n" + kind + "\n" + job);
}

std::optional<std::string> Cache::get(const std::string& key) const {
    std::ifstream in(path_of(key), std::ios::binary);
    if (!in) return std::nullopt;
    std::string line;
    if (!std::getline(in, line)) return std::nullopt;
    const auto h = parse_header(line);
    if (!h || h->version != kCacheVersion || h->key != key) return std::nullopt;
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void Cache::put(const std::string& key, const std::string& kind, const std::string& payload) const {
    fs::create_directories(dir_);
    const fs::path tmp = dir_ / (key + ".tmp." + std::to_string(::getpid()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << kMagic << ' ' << kCacheVersion << ' ' << key << ' ' << kind << '\n' << payload;
        out.flush();
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, path_of(key));
}

std::vector<CacheEntry> Cache::list() const {
    std::vector<CacheEntry> out;
    if (!fs::is_directory(dir_)) return out;
    for (const auto& e : fs::directory_iterator(dir_)) {
        if (e.path().extension() != ".rec") continue;
        std::ifstream in(e.path());
        std::string line;
        std::getline(in, line);
        CacheEntry ce;
        ce.key = e.path().stem().string();
        ce.bytes = e.file_size();
        if (auto h = parse_header(line)) {
            ce.version = h->version;
            ce.kind = h->kind;
        }
        out.push_back(ce);
    }
    std::sort(out.begin(), out.end(), [](const CacheEntry& a, const CacheEntry& b) { return a.key < b.key; });
    return out;
}

int Cache::clear() const {
    int n = 0;
    if (!fs::is_directory(dir_)) return 0;
    for (const auto& e : fs::directory_iterator(dir_)) {
        const std::string name = e.path().filename().string();
        if (e.path().extension() == ".rec" || name.find(".tmp.") != std::string::npos) {
            fs::remove(e.path());
            ++n;
        }
    }
    return n;
}

}  // namespace atlas
