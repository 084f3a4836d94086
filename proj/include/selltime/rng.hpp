#pragma once

#include <cstdint>
#include <random>

namespace selltime {

// splitmix64 — used to derive independent per-path seeds from (seed, index)
// so simulations are reproducible regardless of how paths are partitioned
// across worker threads.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Per-path generator. The algorithm (mt19937_64) is fixed by the standard,
// so identical (seed, path_index) pairs give bit-identical draws everywhere.
class PathRng {
public:
    PathRng(uint64_t seed, uint64_t path_index)
        : engine_(splitmix64(splitmix64(seed) ^ (path_index + 0x51ED2701FB9D3A1Full))) {}

    // Uniform draw in [0,1) with 53-bit resolution.
    double uniform01() { return (engine_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

} // namespace selltime
