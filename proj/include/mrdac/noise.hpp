#pragma once

#include <cmath>
#include <cstdint>

namespace mrdac {

// splitmix64; used for all seeded randomness in the library so results are
// bit-identical across platforms.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    std::uint64_t state_;
};

namespace detail {

inline std::uint64_t hash_mix(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return x;
}

// Lattice value in [0, 1) for an integer cell, keyed by seed/channel/octave.
inline double lattice_value(std::uint64_t seed, std::int64_t cx, std::int64_t cy,
                            std::uint32_t channel, std::uint32_t octave) {
    std::uint64_t h = seed;
    h = hash_mix(h ^ (static_cast<std::uint64_t>(cx) * 0x9e3779b97f4a7c15ULL));
    h = hash_mix(h ^ (static_cast<std::uint64_t>(cy) * 0xc2b2ae3d27d4eb4fULL));
    h = hash_mix(h ^ (static_cast<std::uint64_t>(channel) << 32) ^ octave);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double smoothstep5(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

}  // namespace detail

// Smooth seeded value noise in [0, 1): quintic-interpolated lattice values.
inline double value_noise(std::uint64_t seed, double x, double y, std::uint32_t channel,
                          std::uint32_t octave) {
    const double fx = std::floor(x), fy = std::floor(y);
    const std::int64_t cx = static_cast<std::int64_t>(fx);
    const std::int64_t cy = static_cast<std::int64_t>(fy);
    const double tx = detail::smoothstep5(x - fx);
    const double ty = detail::smoothstep5(y - fy);
    const double v00 = detail::lattice_value(seed, cx, cy, channel, octave);
    const double v01 = detail::lattice_value(seed, cx + 1, cy, channel, octave);
    const double v10 = detail::lattice_value(seed, cx, cy + 1, channel, octave);
    const double v11 = detail::lattice_value(seed, cx + 1, cy + 1, channel, octave);
    return (1.0 - ty) * ((1.0 - tx) * v00 + tx * v01) + ty * ((1.0 - tx) * v10 + tx * v11);
}

// Fractal sum of value noise octaves, normalized back into [0, 1).
inline double fbm(std::uint64_t seed, double x, double y, std::uint32_t channel, int octaves,
                  double base_frequency = 1.5) {
    double out = 0.0, amplitude = 0.5, freq = base_frequency, norm = 0.0;
    for (int o = 0; o < octaves; ++o) {
        out += amplitude * value_noise(seed, x * freq, y * freq, channel,
                                       static_cast<std::uint32_t>(o));
        norm += amplitude;
        amplitude *= 0.5;
        freq *= 2.0;
    }
    return norm > 0.0 ? out / norm : 0.0;
}

}  // namespace mrdac
