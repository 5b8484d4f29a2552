#pragma once

// Seeded PRNG for deterministic Monte Carlo runs.
//
// xoshiro256** with splitmix64 stream derivation. Sample streams are derived
// from (master_seed, sample_index, substream) only, so ensemble results do
// not depend on how samples are partitioned across worker threads.

#include <cstdint>

namespace qrouter {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Xoshiro256 {
public:
    explicit Xoshiro256(std::uint64_t seed = 0x853c49e6748fea9bULL) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    std::uint64_t next_u64() {
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

    // Uniform double in [0, 1), 53 mantissa bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return next_double() < p; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4]{};
};

// Counter-based stream split: stream (sample, substream) of a master seed.
// Independent of worker count and evaluation order.
inline Xoshiro256 derive_stream(std::uint64_t master_seed, std::uint64_t sample,
                                std::uint64_t substream = 0) {
    std::uint64_t sm = master_seed;
    std::uint64_t mixed = splitmix64(sm);
    sm = mixed ^ (0xd1342543de82ef95ULL * (sample + 1));
    mixed = splitmix64(sm);
    sm = mixed ^ (0xaf251af3b0f025b5ULL * (substream + 1));
    return Xoshiro256(splitmix64(sm));
}

} // namespace qrouter
