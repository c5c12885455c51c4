#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>

namespace vcx {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seedable generator used everywhere randomness affects results.
///
/// The engine is MT19937-64 seeded with splitmix64(seed). Bounded draws,
/// uniform reals, normals and shuffles are implemented here rather than
/// through <random> distributions, whose output is implementation-defined,
/// so a given seed yields the same stream on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    /// Independent stream for the given index, derived from a base seed.
    static Rng substream(std::uint64_t seed, std::uint64_t index) {
        return Rng(splitmix64(seed ^ splitmix64(index + 0x632BE59BD9B4E019ULL)));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform integer in [0, bound). bound must be positive.
    std::uint64_t below(std::uint64_t bound) {
        // Rejection on the top of the range keeps the draw unbiased.
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    /// Uniform real in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; draws two uniforms per call.
    double normal();

    template <typename T>
    void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

    std::string serialize() const;
    static Rng deserialize(const std::string& state);

private:
    Rng() = default;
    std::mt19937_64 engine_;
};

}  // namespace vcx
