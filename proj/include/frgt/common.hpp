#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace frgt {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Persistence failures carry a machine-checkable kind so callers can
// distinguish a corrupt file from a malformed one.
struct StoreError : Error {
    enum class Kind {
        io,
        parse,
        unknown_version,
        truncated,
        checksum_mismatch,
        invariant_violation,
        shape_mismatch,
    };
    Kind kind;
    StoreError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
};

inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string to_hex(std::uint64_t v);

// Seeded RNG wrapper. Distributions are hand-rolled on top of the raw
// mt19937_64 stream so that identical seeds give identical values on any
// standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t bits() { return gen_(); }

    double uniform() {  // [0, 1)
        return static_cast<double>(bits() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint32_t bounded(std::uint32_t n) {
        // rejection sampling, bias-free
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = bits();
        } while (x >= limit);
        return static_cast<std::uint32_t>(x % n);
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = bounded(static_cast<std::uint32_t>(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace frgt
