#pragma once

#include <cstdint>
#include <random>

namespace seqlab {

// SplitMix64 finalizer (Steele, Lea, Flood 2014). One application maps a
// 64-bit key to a well-mixed 64-bit output; used here as a stateless,
// counter-addressable random function.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Combine keys into a new key; order-sensitive.
inline std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (0x9e3779b97f4a7c15ULL + b + (a << 6) + (a >> 2)));
}

// Map a 64-bit word to [0, 1) using the top 53 bits. Exact on all platforms.
inline double u64_to_unit(std::uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Random value at (seed, counter, index) without sequential state.
// Dropout masks are addressed this way so a mask is recomputable from its
// coordinates alone.
inline double counter_uniform(std::uint64_t seed, std::uint64_t counter, std::uint64_t index) {
    return u64_to_unit(splitmix64(mix_keys(mix_keys(seed, counter), index)));
}

/// Sequential generator for parameter init and sampling. mt19937_64 has a
/// standard-specified sequence; the [0,1) mapping above avoids the
/// implementation-defined std::uniform_real_distribution.
class UniformRng {
public:
    explicit UniformRng(std::uint64_t seed) : engine_(seed) {}

    double unit() { return u64_to_unit(engine_()); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace seqlab
