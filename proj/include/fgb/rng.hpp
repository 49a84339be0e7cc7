#pragma once

#include <cstdint>
#include <random>

namespace fgb {

using Rng = std::mt19937_64;

// splitmix64 step; used to derive independent substreams from one seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based stream splitting: substream(seed, i) and substream(seed, j)
// are decorrelated for i != j and reproducible given (seed, index).
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(splitmix64(seed) ^ splitmix64(index * 0x9e3779b97f4a7c15ULL + 1));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

inline Rng make_substream(std::uint64_t seed, std::uint64_t index) {
    return Rng(substream_seed(seed, index));
}

inline double draw_normal(Rng& rng) {
    std::normal_distribution<double> d(0.0, 1.0);
    return d(rng);
}

inline double draw_uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(rng);
}

}  // namespace fgb
