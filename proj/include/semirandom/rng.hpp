#ifndef SEMIRANDOM_RNG_HPP
#define SEMIRANDOM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <vector>

namespace semirandom {

// Counter-based generator built on the SplitMix64 finalizer. Every draw is a
// pure function of (seed, stream, counter), so parallel generation is
// order-independent and results are reproducible across platforms (the
// standard library distributions are not).
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t hash2(std::uint64_t a, std::uint64_t b) {
    return mix64(mix64(a) ^ b);
}

inline std::uint64_t hash3(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix64(hash2(a, b) ^ c);
}

// Uniform in [0,1), 53 mantissa bits.
inline double u01(std::uint64_t h) {
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Uniform in (0,1]; safe to pass to log().
inline double u01_open(std::uint64_t h) {
    return static_cast<double>((h >> 11) + 1) * 0x1.0p-53;
}

class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(hash2(seed, stream)) {}

    std::uint64_t next_u64() { return mix64(key_ ^ counter_++); }

    double next_u01() { return u01(next_u64()); }

    // Unbiased integer in [0, bound) via the 128-bit multiply reduction.
    std::uint64_t next_below(std::uint64_t bound) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
    }

    // Box-Muller on the counter stream; the second variate of each pair is cached.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = u01_open(next_u64());
        const double u2 = u01(next_u64());
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Fisher-Yates; returns a permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(p[i - 1], p[j]);
        }
        return p;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace semirandom

#endif
