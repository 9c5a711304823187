#pragma once

// Counter-based random numbers shared by every stochastic routine.
//
// All randomness in the library flows from Philox4x32-10 (Salmon et al.,
// "Parallel random numbers: as easy as 1, 2, 3"). A stream is identified by a
// 64-bit key; draws are a pure function of (key, counter), so any replicate
// can be regenerated independently of scheduling. Distribution transforms are
// implemented here rather than through <random> so that samples are identical
// across standard library implementations.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace collab {

class Philox4x32 {
public:
    using result_type = std::uint32_t;

    explicit Philox4x32(std::uint64_t key, std::uint64_t stream = 0) noexcept
        : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
          counter_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return 0xFFFFFFFFu; }

    result_type operator()() noexcept {
        if (used_ == 4) {
            block_ = generate(counter_, key_);
            increment();
            used_ = 0;
        }
        return block_[used_++];
    }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t hi = (*this)();
        const std::uint64_t lo = (*this)();
        return (hi << 32) | lo;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform double in (0, 1).
    double uniform_open() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Uniform integer in [0, bound). Multiply-shift; the bias is below 2^-64 * bound.
    std::uint64_t below(std::uint64_t bound) noexcept {
        const unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * bound;
        return static_cast<std::uint64_t>(wide >> 64);
    }

    // Standard normal via Box-Muller, caching the second variate.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    static std::array<std::uint32_t, 4> generate(std::array<std::uint32_t, 4> ctr,
                                                 std::array<std::uint32_t, 2> key) noexcept {
        constexpr std::uint32_t kMul0 = 0xD2511F53u;
        constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
        constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
        constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }

private:
    void increment() noexcept {
        if (++counter_[0] == 0 && ++counter_[1] == 0) {
            // The upper half carries the stream id; 2^64 blocks per stream is never reached.
            ++counter_[2];
        }
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> counter_;
    std::array<std::uint32_t, 4> block_{};
    int used_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (const char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace detail

// Derives a sub-seed from a parent seed, a label naming the consumer, and
// up to two indices. Labels keep unrelated consumers of one seed independent.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t i = 0,
                                    std::uint64_t j = 0) noexcept {
    std::uint64_t h = detail::splitmix64(seed ^ detail::fnv1a(label));
    h = detail::splitmix64(h ^ detail::splitmix64(i + 0x632BE59BD9B4E019ull));
    h = detail::splitmix64(h ^ detail::splitmix64(j + 0x8CB92BA72F3D8DD7ull));
    return h;
}

inline Philox4x32 make_stream(std::uint64_t seed, std::string_view label, std::uint64_t i = 0,
                              std::uint64_t j = 0) noexcept {
    return Philox4x32(derive_seed(seed, label, i, j));
}

}  // namespace collab
