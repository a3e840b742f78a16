#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mrdac/error.hpp"
#include "mrdac/motion.hpp"
#include "mrdac/tensor.hpp"

namespace mrdac {

// Per-reference temporal weights. lambda_r = exp(-(d_r - d_min)/sigma) with
// d_r = |target - ref_r|, so the nearest reference is always unscaled.
struct WeightVector {
    std::vector<double> lambdas;

    std::size_t size() const { return lambdas.size(); }
    double operator[](std::size_t i) const { return lambdas[i]; }
};

inline WeightVector temporal_weights(const std::vector<std::int64_t>& ref_indices,
                                     std::int64_t target_index, double sigma) {
    if (ref_indices.empty()) throw InvalidInputError("temporal_weights needs >= 1 reference");
    if (!(sigma > 0.0)) throw InvalidInputError("temporal_weights sigma must be > 0");
    std::int64_t d_min = std::numeric_limits<std::int64_t>::max();
    for (std::int64_t r : ref_indices) d_min = std::min(d_min, std::abs(target_index - r));
    WeightVector w;
    w.lambdas.reserve(ref_indices.size());
    for (std::int64_t r : ref_indices) {
        const double d = static_cast<double>(std::abs(target_index - r) - d_min);
        w.lambdas.push_back(std::exp(-d / sigma));
    }
    return w;
}

// d lambda_r / d sigma for the toy training loop.
inline std::vector<double> temporal_weights_sigma_grad(const std::vector<std::int64_t>& ref_indices,
                                                       std::int64_t target_index, double sigma) {
    const WeightVector w = temporal_weights(ref_indices, target_index, sigma);
    std::int64_t d_min = std::numeric_limits<std::int64_t>::max();
    for (std::int64_t r : ref_indices) d_min = std::min(d_min, std::abs(target_index - r));
    std::vector<double> g(ref_indices.size());
    for (std::size_t i = 0; i < ref_indices.size(); ++i) {
        const double d = static_cast<double>(std::abs(target_index - ref_indices[i]) - d_min);
        g[i] = w.lambdas[i] * d / (sigma * sigma);
    }
    return g;
}

// Occlusion-masked warp of a reference feature: mask (.) grid_sample(eps, flow),
// the mask broadcast across channels.
inline Tensord apply_motion(const Tensord& eps_r, const DenseMotion& motion,
                            PaddingMode pad = PaddingMode::BORDER) {
    if (motion.occlusion.rank() != 2 || motion.occlusion.dim(0) != motion.flow.height ||
        motion.occlusion.dim(1) != motion.flow.width)
        throw DimensionError("apply_motion occlusion/flow shapes differ");
    if (eps_r.height() != motion.flow.height || eps_r.width() != motion.flow.width)
        throw DimensionError("apply_motion feature/motion spatial dims differ");
    Tensord out = grid_sample(eps_r, motion.flow, pad);
    for (std::size_t c = 0; c < out.channels(); ++c)
        for (std::size_t y = 0; y < out.height(); ++y)
            for (std::size_t x = 0; x < out.width(); ++x)
                out.at(c, y, x) *= motion.occlusion.at(y, x);
    return out;
}

struct ApplyMotionGrads {
    Tensord d_feature;
    FlowFieldd d_flow;
    Tensord d_mask;  // H x W
};

inline ApplyMotionGrads apply_motion_backward(const Tensord& eps_r, const DenseMotion& motion,
                                              const Tensord& upstream,
                                              PaddingMode pad = PaddingMode::BORDER) {
    const Tensord sampled = grid_sample(eps_r, motion.flow, pad);
    // Upstream through the mask product.
    Tensord up_masked = upstream;
    ApplyMotionGrads g;
    g.d_mask = Tensord({motion.flow.height, motion.flow.width});
    for (std::size_t c = 0; c < upstream.channels(); ++c)
        for (std::size_t y = 0; y < upstream.height(); ++y)
            for (std::size_t x = 0; x < upstream.width(); ++x) {
                up_masked.at(c, y, x) = upstream.at(c, y, x) * motion.occlusion.at(y, x);
                g.d_mask.at(y, x) += upstream.at(c, y, x) * sampled.at(c, y, x);
            }
    auto sg = grid_sample_backward(eps_r, motion.flow, pad, up_masked);
    g.d_feature = std::move(sg.d_feature);
    g.d_flow = std::move(sg.d_flow);
    return g;
}

// Result of the weighted feature-wise max pool. argmax records, per (c, y, x),
// the reference index whose scaled feature won; ties break to the lowest index.
struct AggregateResult {
    Tensord features;
    std::vector<std::uint8_t> argmax;  // same linear layout as features

    std::uint8_t argmax_at(std::size_t c, std::size_t y, std::size_t x) const {
        return argmax[(c * features.height() + y) * features.width() + x];
    }
};

inline AggregateResult aggregate(const std::vector<Tensord>& deformed, const WeightVector& weights) {
    if (deformed.empty()) throw InvalidInputError("aggregate needs >= 1 feature map");
    if (deformed.size() != weights.size())
        throw DimensionError("aggregate feature count " + std::to_string(deformed.size()) +
                             " != weight count " + std::to_string(weights.size()));
    if (deformed.size() > 255) throw InvalidInputError("aggregate supports at most 255 references");
    for (const Tensord& t : deformed)
        if (!t.same_shape(deformed.front()))
            throw DimensionError("aggregate feature maps must share one shape");

    AggregateResult res;
    res.features = Tensord(deformed.front().shape());
    res.argmax.assign(res.features.numel(), 0);
    for (std::size_t i = 0; i < res.features.numel(); ++i) {
        double best = weights[0] * deformed[0][i];
        std::uint8_t best_r = 0;
        for (std::size_t r = 1; r < deformed.size(); ++r) {
            const double v = weights[r] * deformed[r][i];
            if (v > best) {
                best = v;
                best_r = static_cast<std::uint8_t>(r);
            }
        }
        res.features[i] = best;
        res.argmax[i] = best_r;
    }
    return res;
}

struct AggregateGrads {
    std::vector<Tensord> d_deformed;
    std::vector<double> d_lambdas;
};

// Subgradient of the max: all mass to the winning branch, scaled by lambda_r.
inline AggregateGrads aggregate_backward(const std::vector<Tensord>& deformed,
                                         const WeightVector& weights, const AggregateResult& fwd,
                                         const Tensord& upstream) {
    AggregateGrads g;
    g.d_deformed.assign(deformed.size(), Tensord::zeros(deformed.front().shape()));
    g.d_lambdas.assign(weights.size(), 0.0);
    for (std::size_t i = 0; i < upstream.numel(); ++i) {
        const std::size_t r = fwd.argmax[i];
        g.d_deformed[r][i] = upstream[i] * weights[r];
        g.d_lambdas[r] += upstream[i] * deformed[r][i];
    }
    return g;
}

}  // namespace mrdac
