#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace barecam {

// Splitmix64 stream. Self-contained so that seeded results are identical
// across standard libraries and platforms.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Unbiased integer in [0, n). Lemire multiply-shift with rejection.
    uint64_t below(uint64_t n) {
        if (n <= 1) return 0;
        while (true) {
            uint64_t x = next_u64();
            __uint128_t m = static_cast<__uint128_t>(x) * n;
            uint64_t lo = static_cast<uint64_t>(m);
            if (lo >= n || lo >= (0ull - n) % n) return static_cast<uint64_t>(m >> 64);
        }
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (no libm distribution objects, so the
    // stream is reproducible everywhere).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// FNV-1a, used to derive per-stage seeds from string tags.
inline uint64_t hash_tag(std::string_view tag) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

// Deterministic seed derivation: master seed + stage tag -> stage seed.
inline uint64_t derive_seed(uint64_t master, std::string_view tag) {
    Rng r(master ^ hash_tag(tag));
    return r.next_u64();
}

inline uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t index) {
    Rng r(master ^ hash_tag(tag) ^ (0x9E3779B97F4A7C15ull * (index + 1)));
    return r.next_u64();
}

}  // namespace barecam
