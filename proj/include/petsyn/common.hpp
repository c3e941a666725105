#ifndef PETSYN_COMMON_HPP
#define PETSYN_COMMON_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace petsyn {

// Hard failures are exceptions; expected domain outcomes (segmentation
// failure, synthesis rejection) are values, never exceptions.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// Seed derivation. One master seed fans out to per-stage / per-case streams
// through splitmix64 so that outputs are order-independent and reproducible.
// ---------------------------------------------------------------------------

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
    return splitmix64(splitmix64(base) ^ splitmix64(stream * 0x9e3779b97f4a7c15ull + 1));
}

inline uint64_t hash_string(std::string_view s) {
    // FNV-1a 64
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t derive_seed(uint64_t base, std::string_view tag) {
    return derive_seed(base, hash_string(tag));
}

// ---------------------------------------------------------------------------
// Rng: mt19937_64 with hand-rolled uniform/normal draws. The standard library
// engines are portable but its distributions are not, so the mapping from
// raw bits to floats lives here and nowhere else.
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [lo, hi], inclusive
    int64_t uniform_int(int64_t lo, int64_t hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        // modulo bias is < 2^-53 for the span sizes used here
        return lo + static_cast<int64_t>(eng_() % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // standard normal, Box-Muller with a cached spare
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Thread budget for the conv kernels; overridable via PETSYN_THREADS.
int worker_threads();

// crc32 (zlib) of a file's raw bytes, as "crc32:<hex8>".
std::string file_checksum(const std::string& path);

} // namespace petsyn

#endif
