#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>

#include "ethladder/common.hpp"
#include "ethladder/spectral.hpp"
#include "ethladder/version.hpp"

namespace ethladder {

static_assert(__BYTE_ORDER__ == __ORDER_LITTLE_ENDIAN__,
              "cache files are little-endian; big-endian hosts need byte swapping");

struct CacheKey {
    int n_sites = 0;
    int two_sz = 0;
    double kappa = 0.0;
    double delta = 0.0;
};

inline std::string cache_filename(const CacheKey& key) {
    const long long kk = std::llround(key.kappa * 1e9);
    const long long dk = std::llround(key.delta * 1e9);
    return "spec_n" + std::to_string(key.n_sites) + "_z" + std::to_string(key.two_sz) + "_k" +
           std::to_string(kk) + "_d" + std::to_string(dk) + ".bin";
}

namespace detail {

constexpr char kCacheMagic[8] = {'E', 'T', 'H', 'L', 'S', 'P', 'C', '\0'};
constexpr std::size_t kCodeVersionField = 20;

struct CacheFile {
    std::FILE* f = nullptr;
    ~CacheFile() {
        if (f) std::fclose(f);
    }
};

template <typename T>
bool read_pod(std::FILE* f, T& out) {
    return std::fread(&out, sizeof(T), 1, f) == 1;
}

template <typename T>
void write_pod(std::FILE* f, const T& in) {
    if (std::fwrite(&in, sizeof(T), 1, f) != 1) throw io_error("cache: short write");
}

}  // namespace detail

// Loads a cached spectrum if one exists for this key, this code version, and
// with at least the requested content. Anything unreadable counts as a miss.
inline std::optional<Spectrum> cache_load(const std::string& dir, const CacheKey& key,
                                          bool need_diagonals, bool need_vectors) {
    const std::filesystem::path path = std::filesystem::path(dir) / cache_filename(key);
    detail::CacheFile file;
    file.f = std::fopen(path.string().c_str(), "rb");
    if (!file.f) return std::nullopt;

    char magic[8];
    if (std::fread(magic, 1, 8, file.f) != 8 ||
        std::memcmp(magic, detail::kCacheMagic, 8) != 0)
        return std::nullopt;
    std::uint32_t format = 0;
    char code[detail::kCodeVersionField] = {};
    std::uint32_t n_sites = 0;
    std::int32_t two_sz = 0;
    std::int64_t kappa_key = 0, delta_key = 0;
    std::uint64_t dim = 0;
    std::uint8_t has_diagonals = 0, has_vectors = 0;
    if (!detail::read_pod(file.f, format) ||
        std::fread(code, 1, detail::kCodeVersionField, file.f) != detail::kCodeVersionField ||
        !detail::read_pod(file.f, n_sites) || !detail::read_pod(file.f, two_sz) ||
        !detail::read_pod(file.f, kappa_key) || !detail::read_pod(file.f, delta_key) ||
        !detail::read_pod(file.f, dim) || !detail::read_pod(file.f, has_diagonals) ||
        !detail::read_pod(file.f, has_vectors))
        return std::nullopt;

    if (format != kCacheFormatVersion) return std::nullopt;
    if (std::string(code) != kVersion) return std::nullopt;
    if (n_sites != static_cast<std::uint32_t>(key.n_sites) || two_sz != key.two_sz) return std::nullopt;
    if (kappa_key != std::llround(key.kappa * 1e9) || delta_key != std::llround(key.delta * 1e9))
        return std::nullopt;
    if (dim == 0 || dim > (1ull << 32)) return std::nullopt;
    if ((need_diagonals && !has_diagonals) || (need_vectors && !has_vectors)) return std::nullopt;

    Spectrum spec;
    const auto n = static_cast<Eigen::Index>(dim);
    spec.energies.resize(n);
    if (std::fread(spec.energies.data(), sizeof(double), dim, file.f) != dim) return std::nullopt;
    if (has_diagonals) {
        spec.d_diag.resize(n);
        spec.d2_diag.resize(n);
        if (std::fread(spec.d_diag.data(), sizeof(double), dim, file.f) != dim)
            return std::nullopt;
        if (std::fread(spec.d2_diag.data(), sizeof(double), dim, file.f) != dim)
            return std::nullopt;
    }
    if (has_vectors) {
        spec.eigvecs.resize(n, n);
        if (std::fread(spec.eigvecs.data(), sizeof(double), dim * dim, file.f) != dim * dim)
            return std::nullopt;
    }
    return spec;
}

// Writes the spectrum for this key atomically (temp file + rename).
// Eigenvectors are stored only for dimensions up to `vector_ceiling`.
inline void cache_store(const std::string& dir, const CacheKey& key, const Spectrum& spec,
                        std::uint64_t vector_ceiling = 5000) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path path = std::filesystem::path(dir) / cache_filename(key);
    const std::filesystem::path tmp = path.string() + ".tmp";

    const auto dim = static_cast<std::uint64_t>(spec.dim());
    const std::uint8_t has_diagonals = spec.has_diagonals() ? 1 : 0;
    const std::uint8_t has_vectors = (spec.has_vectors() && dim <= vector_ceiling) ? 1 : 0;

    {
        detail::CacheFile file;
        file.f = std::fopen(tmp.string().c_str(), "wb");
        if (!file.f) throw io_error("cache: cannot open " + tmp.string() + " for writing");
        if (std::fwrite(detail::kCacheMagic, 1, 8, file.f) != 8)
            throw io_error("cache: short write");
        detail::write_pod(file.f, static_cast<std::uint32_t>(kCacheFormatVersion));
        char code[detail::kCodeVersionField] = {};
        std::snprintf(code, sizeof(code), "%s", kVersion);
        if (std::fwrite(code, 1, sizeof(code), file.f) != sizeof(code))
            throw io_error("cache: short write");
        detail::write_pod(file.f, static_cast<std::uint32_t>(key.n_sites));
        detail::write_pod(file.f, static_cast<std::int32_t>(key.two_sz));
        detail::write_pod(file.f, static_cast<std::int64_t>(std::llround(key.kappa * 1e9)));
        detail::write_pod(file.f, static_cast<std::int64_t>(std::llround(key.delta * 1e9)));
        detail::write_pod(file.f, dim);
        detail::write_pod(file.f, has_diagonals);
        detail::write_pod(file.f, has_vectors);
        if (std::fwrite(spec.energies.data(), sizeof(double), dim, file.f) != dim)
            throw io_error("cache: short write");
        if (has_diagonals) {
            if (std::fwrite(spec.d_diag.data(), sizeof(double), dim, file.f) != dim)
                throw io_error("cache: short write");
            if (std::fwrite(spec.d2_diag.data(), sizeof(double), dim, file.f) != dim)
                throw io_error("cache: short write");
        }
        if (has_vectors) {
            if (std::fwrite(spec.eigvecs.data(), sizeof(double), dim * dim, file.f) != dim * dim)
                throw io_error("cache: short write");
        }
        if (std::fflush(file.f) != 0) throw io_error("cache: flush failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw io_error("cache: rename failed: " + ec.message());
}

}  // namespace ethladder
