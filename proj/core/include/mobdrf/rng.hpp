#pragma once
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace mobdrf {

// Deterministic PRNG (splitmix64 core). The standard library distributions
// are implementation-defined, so all draws used by the pipeline go through
// this class to keep every output reproducible from a single seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform on [0, 1) with 53 random bits
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // standard normal via Box-Muller; pairs are cached
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    // uniform integer in [0, n), rejection sampled to avoid modulo bias
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = ~0ULL - ~0ULL % n;
        std::uint64_t r = next_u64();
        while (r >= limit) r = next_u64();
        return r % n;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
} // namespace detail

// Derives an independent substream seed from a base seed and up to three
// salts. One global seed fans out through this function to every random
// consumer (splitting, patches, permutation tests, synthesis), so a single
// --seed flag reproduces an entire run.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = detail::mix64(base + 0x9e3779b97f4a7c15ULL);
    s = detail::mix64(s ^ (a + 0xd1b54a32d192ed03ULL));
    s = detail::mix64(s ^ (b + 0x8cb92ba72f3d8dd7ULL));
    s = detail::mix64(s ^ (c + 0xda942042e4dd58b5ULL));
    return s;
}

// Substream salts. Keep stable across versions: serialized bundles record
// only the base seed.
namespace stream {
inline constexpr std::uint64_t kSplit = 1;
inline constexpr std::uint64_t kSynth = 2;
inline constexpr std::uint64_t kPatch = 3;
inline constexpr std::uint64_t kStability = 4;
inline constexpr std::uint64_t kValidation = 5;
inline constexpr std::uint64_t kFinal = 6;
} // namespace stream

} // namespace mobdrf
