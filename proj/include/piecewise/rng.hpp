#pragma once
// Self-contained deterministic random number generation.
//
// Standard-library distributions are not guaranteed to produce identical
// streams across implementations, so everything that needs reproducible
// randomness (sampler chains, mask construction) goes through this generator:
// splitmix64 seeding into xoshiro256++, uniform doubles from the top 53 bits,
// and Box–Muller normals with a cached spare. Streams for different
// (base_seed, run_index) pairs are independent by construction, which makes
// batch results invariant to worker count and scheduling.

#include <cmath>
#include <cstdint>

namespace pw {

struct SplitMix64 {
    std::uint64_t state;

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
};

class Xoshiro256pp {
public:
    explicit Xoshiro256pp(std::uint64_t seed) {
        SplitMix64 sm{seed};
        for (auto& w : s_) w = sm.next();
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;  // all-zero state is invalid
    }

    // Seed for one run of a batch: for_run(base, i) ≡ Xoshiro256pp(derived_seed(base, i)).
    static std::uint64_t derived_seed(std::uint64_t base_seed, std::uint64_t run_index) {
        SplitMix64 sm{base_seed};
        return sm.next() ^ (0x9E3779B97F4A7C15ULL * (run_index + 1));
    }

    // Independent, reproducible stream for one run of a batch.
    static Xoshiro256pp for_run(std::uint64_t base_seed, std::uint64_t run_index) {
        return Xoshiro256pp(derived_seed(base_seed, run_index));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, bound); bound ≥ 1. Multiply-shift mapping keeps
    // the draw count fixed (no rejection loop), which pins the stream layout.
    std::uint64_t bounded(std::uint64_t bound) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
    }

    // Standard normal via Box–Muller; generates pairs and caches the spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;  // keep log() finite
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = r * std::sin(angle);
        has_spare_ = true;
        return r * std::cos(angle);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace pw
