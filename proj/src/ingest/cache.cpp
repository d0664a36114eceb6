#include <fixctx/ingest/ingest.hpp>

#include <filesystem>

#include <spdlog/spdlog.h>

#include <fixctx/util/hash.hpp>
#include <fixctx/util/text.hpp>

namespace fs = std::filesystem;

namespace fixctx::ingest {

// Layout: <dir>/<sha256(key)>.blob holds the bytes and <sha256(key)>.sha256
// the digest of those bytes recorded at insertion.

BlobCache::BlobCache(std::string dir) : dir_(std::move(dir))
{
    fs::create_directories(dir_);
}

std::optional<std::string> BlobCache::get(const std::string& key) const
{
    std::lock_guard lock(mu_);
    auto stem = (fs::path(dir_) / util::sha256_hex(key)).string();
    if (!fs::exists(stem + ".blob") || !fs::exists(stem + ".sha256")) {
        ++misses_;
        return std::nullopt;
    }
    auto bytes = util::read_file(stem + ".blob");
    auto want = std::string(util::trim(util::read_file(stem + ".sha256")));
    if (util::sha256_hex(bytes) != want) {
        spdlog::warn("cache entry for '{}' fails its digest check; refetching", key);
        ++misses_;
        return std::nullopt;
    }
    ++hits_;
    return bytes;
}

void BlobCache::put(const std::string& key, std::string_view bytes)
{
    std::lock_guard lock(mu_);
    auto stem = (fs::path(dir_) / util::sha256_hex(key)).string();
    util::write_file_atomic(stem + ".blob", bytes);
    util::write_file_atomic(stem + ".sha256", util::sha256_hex(bytes) + "\n");
}

} // namespace fixctx::ingest
