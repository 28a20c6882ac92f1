#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace sphgp {

/// SplitMix64 finalizer; used for seeding and seed derivation.
[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Child seed from a root seed and a label (FNV-1a of the label mixed through SplitMix64).
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const char ch : label) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001B3ULL;
    }
    std::uint64_t s = root ^ h;
    return splitmix64(s);
}

[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
    std::uint64_t s = root + 0xD1B54A32D192ED03ULL * (index + 1);
    return splitmix64(s);
}

/// xoshiro256** with platform-independent uniform and normal transforms.
///
/// Normals use the Marsaglia polar method with the second variate cached, so a
/// given seed yields the same stream on every platform and standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) {
        std::uint64_t s = seed;
        for (auto& w : state_) w = splitmix64(s);
    }

    [[nodiscard]] std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform on [0, 1) with 53 random bits.
    [[nodiscard]] double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    [[nodiscard]] double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n), unbiased by rejection.
    [[nodiscard]] std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    [[nodiscard]] double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    /// Independent generator for sub-stream `id`; does not advance this one.
    [[nodiscard]] Rng split(std::uint64_t id) const {
        std::uint64_t s = state_[0] ^ rotl(state_[2], 13);
        return Rng(derive_seed(splitmix64(s), id));
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4]{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace sphgp
