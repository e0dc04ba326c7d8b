// rng.hpp — deterministic per-trajectory random streams
//
// Stream seeds are derived statelessly from (base_seed, stream_index), so any
// trajectory can be regenerated in isolation and the ensemble layout does not
// depend on scheduling order.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace nmjc {

// SplitMix64 finalizer (Steele/Lea/Flood mixing constants).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Counter-based stream derivation: independent 64-bit seeds for each
// (base, index) pair, no sequential state.
inline std::uint64_t stream_seed(std::uint64_t base_seed, std::uint64_t stream_index) {
    return splitmix64(splitmix64(base_seed) ^
                      splitmix64(stream_index * 0xD2B74407B1CE6E93ull + 0x9E3779B97F4A7C15ull));
}

// mt19937_64 with Box-Muller normals. Each normal consumes exactly two
// uniforms so the draw layout is independent of call history.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : gen_(seed) {}
    RandomStream(std::uint64_t base_seed, std::uint64_t stream_index)
        : gen_(stream_seed(base_seed, stream_index)) {}

    // uniform on [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double normal() {
        constexpr double two_pi = 6.283185307179586476925286766559;
        const double u1 = 1.0 - uniform(); // (0, 1], keeps log finite
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

} // namespace nmjc
