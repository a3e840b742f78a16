#pragma once

#include <cstdint>
#include <vector>

#include "mrdac/tensor.hpp"

namespace testutil {

// splitmix64: tiny deterministic generator for test data, independent of any
// library RNG so frozen expectations never move.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

private:
    std::uint64_t state_;
};

inline mrdac::Tensord random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo = -1.0,
                                    double hi = 1.0) {
    mrdac::Tensord t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Flow with fractional pixel parts in [0.1, 0.9]: clear of the bilinear cell
// boundaries where the sampler is not differentiable.
inline mrdac::FlowFieldd random_interior_flow(Rng& rng, std::size_t h, std::size_t w,
                                              std::size_t feat_h, std::size_t feat_w) {
    mrdac::FlowFieldd f(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double px = rng.uniform_int(0, static_cast<int>(feat_w) - 2) +
                              rng.uniform(0.1, 0.9);
            const double py = rng.uniform_int(0, static_cast<int>(feat_h) - 2) +
                              rng.uniform(0.1, 0.9);
            f.x(y, x) = 2.0 * px / static_cast<double>(feat_w - 1) - 1.0;
            f.y(y, x) = 2.0 * py / static_cast<double>(feat_h - 1) - 1.0;
        }
    return f;
}

}  // namespace testutil
