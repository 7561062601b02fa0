#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace flude {

namespace detail {

inline constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
        h ^= static_cast<uint8_t>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace detail

/**
 * Counter-based random stream.
 *
 * Every draw is a pure function of (key, counter), and keys are derived
 * from (seed, domain, ids...). Distinct tuples give statistically
 * independent streams, two streams never share state, and replaying a
 * stream from the same key reproduces the same draws. This is what makes
 * whole-run determinism and mid-run checkpointing independent of host
 * parallelism: no draw depends on the order in which other streams drew.
 */
class RngStream {
public:
    explicit RngStream(uint64_t key) : key_(key) {}

    /// Key for the stream identified by (seed, domain, a, b, c).
    static uint64_t derive(uint64_t seed, std::string_view domain,
                           uint64_t a = 0, uint64_t b = 0, uint64_t c = 0) {
        uint64_t k = detail::mix64(seed ^ detail::fnv1a(domain));
        k = detail::mix64(k ^ (a + detail::kGolden));
        k = detail::mix64(k ^ (b + 2 * detail::kGolden));
        k = detail::mix64(k ^ (c + 3 * detail::kGolden));
        return k;
    }

    uint64_t next_u64() { return detail::mix64(key_ + detail::kGolden * ++counter_); }

    /// Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi); returns lo when the range is degenerate.
    double uniform(double lo, double hi) { return lo + next_double() * (hi - lo); }

    /// Uniform integer in [0, n). n must be > 0.
    uint64_t below(uint64_t n) {
        return static_cast<uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) { return next_double() < p; }

    /// Uniform in the open interval (0, 1).
    double open01() {
        double u;
        do {
            u = next_double();
        } while (u == 0.0);
        return u;
    }

    /// Box-Muller; consumes exactly two uniforms, caches nothing.
    double normal(double mean, double stddev) {
        double u1 = 1.0 - next_double(); // (0, 1]
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    uint64_t key() const { return key_; }
    uint64_t counter() const { return counter_; }

private:
    uint64_t key_;
    uint64_t counter_ = 0;
};

/// Identity permutation of size n shuffled by Fisher-Yates.
inline std::vector<uint32_t> random_permutation(size_t n, RngStream& g) {
    std::vector<uint32_t> p(n);
    for (size_t i = 0; i < n; ++i) p[i] = static_cast<uint32_t>(i);
    for (size_t i = 0; i + 1 < n; ++i) {
        size_t j = i + static_cast<size_t>(g.below(n - i));
        std::swap(p[i], p[j]);
    }
    return p;
}

/// First k elements of a uniform without-replacement sample from `pool`.
/// Partial Fisher-Yates; pool order defines the sampling frame.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> pool, size_t k, RngStream& g) {
    if (k > pool.size()) k = pool.size();
    for (size_t i = 0; i < k; ++i) {
        size_t j = i + static_cast<size_t>(g.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

} // namespace flude
