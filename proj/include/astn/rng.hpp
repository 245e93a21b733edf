#ifndef ASTN_RNG_HPP
#define ASTN_RNG_HPP

#include <cstdint>
#include <random>

namespace astn {

// splitmix64; used to derive independent per-sample streams from one seed.
inline std::uint64_t split_mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    return std::mt19937_64(split_mix(seed ^ split_mix(stream)));
}

} // namespace astn

#endif
