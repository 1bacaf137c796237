#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace cxqsm {

/// Philox4x32-10 counter-based generator (Random123 family).
///
/// The output block is a pure function of (counter, key), so every random
/// draw in the toolkit is addressed by (seed, stream, index) rather than by
/// generator state. Masks, phantoms, phase shifts and weight initialisation
/// are therefore reproducible across platforms and independent of the order
/// in which draws are consumed.
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static constexpr Counter generate(Counter c, Key k) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
            k[0] += kWeyl0;
            k[1] += kWeyl1;
        }
        return c;
    }
};

/// Random deviates addressed by index. Counter words are
/// (index_lo, index_hi, stream_lo, stream_hi); the key is the 64-bit seed.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream) {}

    Philox4x32::Counter block(std::uint64_t index) const {
        return Philox4x32::generate(
            {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
             static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
            key_);
    }

    /// Uniform in [0, 1) with 53 random bits (words 0 and 1).
    double uniform(std::uint64_t index) const { return to_unit(block(index), 0); }

    /// Uniform in (0, 1].
    double uniform_open(std::uint64_t index) const { return 1.0 - uniform(index); }

    /// Standard normal by Box-Muller over the two halves of one block.
    double normal(std::uint64_t index) const {
        const auto b = block(index);
        const double u1 = 1.0 - to_unit(b, 0);
        const double u2 = to_unit(b, 2);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    static double to_unit(const Philox4x32::Counter& b, int first) {
        const std::uint64_t hi = b[first] >> 5;       // 27 bits
        const std::uint64_t lo = b[first + 1] >> 6;   // 26 bits
        return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
    }

    Philox4x32::Key key_;
    std::uint64_t stream_;
};

/// Sequential view over a CounterRng for code that just wants "the next one".
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0) : rng_(seed, stream) {}

    double uniform() { return rng_.uniform(next_++); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal() { return rng_.normal(next_++); }
    std::uint64_t position() const { return next_; }

private:
    CounterRng rng_;
    std::uint64_t next_ = 0;
};

}  // namespace cxqsm
