#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mrdac/error.hpp"
#include "mrdac/tensor.hpp"

namespace mrdac {

using PooledFeature = std::vector<double>;

// Positive pairs aligned by index: side_1[i] and side_2[i] deform toward the
// same target; every other side_2[j] is a negative for anchor i.
struct ContrastiveBatch {
    std::vector<PooledFeature> side_1;
    std::vector<PooledFeature> side_2;

    std::size_t batch_size() const { return side_1.size(); }
};

struct ContrastiveConfig {
    double tau = 0.1;
    double epsilon = 1e-8;       // cosine denominator guard
    bool symmetrized = false;    // also anchor from side_2, average both directions
};

// Spatial mean per channel, flattened to a C-vector.
inline PooledFeature pool_feature(const Tensord& fm) {
    PooledFeature v(fm.channels(), 0.0);
    const double inv = 1.0 / static_cast<double>(fm.height() * fm.width());
    for (std::size_t c = 0; c < fm.channels(); ++c) {
        double s = 0.0;
        for (std::size_t y = 0; y < fm.height(); ++y)
            for (std::size_t x = 0; x < fm.width(); ++x) s += fm.at(c, y, x);
        v[c] = s * inv;
    }
    return v;
}

// Spreads a pooled-vector gradient back over the feature map (1/(H*W) each).
inline Tensord pool_feature_backward(const std::vector<std::size_t>& fm_shape,
                                     const PooledFeature& upstream) {
    Tensord g(fm_shape);
    const double inv = 1.0 / static_cast<double>(fm_shape[1] * fm_shape[2]);
    for (std::size_t c = 0; c < fm_shape[0]; ++c)
        for (std::size_t y = 0; y < fm_shape[1]; ++y)
            for (std::size_t x = 0; x < fm_shape[2]; ++x) g.at(c, y, x) = upstream[c] * inv;
    return g;
}

namespace detail {

inline double dot(const PooledFeature& a, const PooledFeature& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const PooledFeature& a) { return std::sqrt(dot(a, a)); }

}  // namespace detail

inline double cosine_sim(const PooledFeature& a, const PooledFeature& b, double epsilon = 1e-8) {
    if (a.size() != b.size()) throw DimensionError("cosine_sim vector sizes differ");
    if (a.empty()) throw InvalidInputError("cosine_sim needs D >= 1");
    return detail::dot(a, b) / std::max(detail::norm(a) * detail::norm(b), epsilon);
}

// d sim / d a. When the denominator is clamped at epsilon only the numerator
// depends on a.
inline PooledFeature cosine_sim_grad_a(const PooledFeature& a, const PooledFeature& b,
                                       double epsilon = 1e-8) {
    const double na = detail::norm(a), nb = detail::norm(b);
    const double m = std::max(na * nb, epsilon);
    PooledFeature g(a.size());
    if (na * nb > epsilon) {
        const double s = detail::dot(a, b) / m;
        for (std::size_t i = 0; i < a.size(); ++i) g[i] = b[i] / m - s * a[i] / (na * na);
    } else {
        for (std::size_t i = 0; i < a.size(); ++i) g[i] = b[i] / m;
    }
    return g;
}

struct InfoNceResult {
    double loss = 0.0;
    std::vector<PooledFeature> d_side_1;
    std::vector<PooledFeature> d_side_2;
};

namespace detail {

// One direction of the batch InfoNCE: anchors from `anch`, candidates from
// `cand`, positives on the diagonal. Accumulates gradients scaled by `scale`.
inline double info_nce_direction(const std::vector<PooledFeature>& anch,
                                 const std::vector<PooledFeature>& cand,
                                 const ContrastiveConfig& cfg, double scale,
                                 std::vector<PooledFeature>* d_anch,
                                 std::vector<PooledFeature>* d_cand) {
    const std::size_t b = anch.size();
    std::vector<double> sims(b * b);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j)
            sims[i * b + j] = cosine_sim(anch[i], cand[j], cfg.epsilon);

    double total = 0.0;
    std::vector<double> p(b);
    for (std::size_t i = 0; i < b; ++i) {
        // log-sum-exp stabilized: L_i = logsumexp_j(s_ij/tau) - s_ii/tau
        double mx = sims[i * b];
        for (std::size_t j = 1; j < b; ++j) mx = std::max(mx, sims[i * b + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < b; ++j) z += std::exp((sims[i * b + j] - mx) / cfg.tau);
        total += mx / cfg.tau + std::log(z) - sims[i * b + i] / cfg.tau;

        if (d_anch) {
            for (std::size_t j = 0; j < b; ++j)
                p[j] = std::exp((sims[i * b + j] - mx) / cfg.tau) / z;
            for (std::size_t j = 0; j < b; ++j) {
                // dL/ds_ij = (p_ij - delta_ij) / (tau * B), then chain through sim.
                const double ds = scale * (p[j] - (i == j ? 1.0 : 0.0)) /
                                  (cfg.tau * static_cast<double>(b));
                if (ds == 0.0) continue;
                const PooledFeature ga = cosine_sim_grad_a(anch[i], cand[j], cfg.epsilon);
                const PooledFeature gb = cosine_sim_grad_a(cand[j], anch[i], cfg.epsilon);
                for (std::size_t d = 0; d < ga.size(); ++d) {
                    (*d_anch)[i][d] += ds * ga[d];
                    (*d_cand)[j][d] += ds * gb[d];
                }
            }
        }
    }
    return total / static_cast<double>(b);
}

}  // namespace detail

// Batch InfoNCE over positive pairs, the positive term included in its own
// denominator (so the loss is always >= 0). Returns the loss and analytic
// gradients with respect to every feature vector.
inline InfoNceResult info_nce(const ContrastiveBatch& batch, const ContrastiveConfig& cfg,
                              bool want_grads = true) {
    const std::size_t b = batch.batch_size();
    if (b == 0 || batch.side_2.size() != b)
        throw InvalidInputError("info_nce needs aligned sides with B >= 1");
    if (!(cfg.tau > 0.0)) throw InvalidInputError("info_nce tau must be > 0");
    for (const auto& side : {&batch.side_1, &batch.side_2})
        for (const PooledFeature& v : *side)
            for (double x : v)
                if (!std::isfinite(x)) throw InvalidInputError("info_nce feature is not finite");

    InfoNceResult res;
    if (want_grads) {
        res.d_side_1.assign(b, PooledFeature(batch.side_1.front().size(), 0.0));
        res.d_side_2.assign(b, PooledFeature(batch.side_2.front().size(), 0.0));
    }
    auto* g1 = want_grads ? &res.d_side_1 : nullptr;
    auto* g2 = want_grads ? &res.d_side_2 : nullptr;
    if (!cfg.symmetrized) {
        res.loss = detail::info_nce_direction(batch.side_1, batch.side_2, cfg, 1.0, g1, g2);
    } else {
        res.loss = 0.5 * detail::info_nce_direction(batch.side_1, batch.side_2, cfg, 0.5, g1, g2) +
                   0.5 * detail::info_nce_direction(batch.side_2, batch.side_1, cfg, 0.5, g2, g1);
    }
    return res;
}

struct MultiRefContrastiveResult {
    double loss = 0.0;
    // d loss / d feature, indexed [sample][reference].
    std::vector<std::vector<PooledFeature>> d_features;
};

// Mean of info_nce over all unordered reference pairs, each pair evaluated in
// both anchor directions so the result is exactly invariant under permutation
// of the reference list. features[i][r] is the pooled deformed feature of
// reference r for batch sample i.
inline MultiRefContrastiveResult multi_ref_contrastive(
    const std::vector<std::vector<PooledFeature>>& features, const ContrastiveConfig& cfg,
    bool want_grads = true) {
    const std::size_t b = features.size();
    if (b == 0) throw InvalidInputError("multi_ref_contrastive needs B >= 1");
    const std::size_t n = features.front().size();
    if (n < 2) throw InvalidInputError("multi_ref_contrastive needs N >= 2 references");
    for (const auto& s : features)
        if (s.size() != n)
            throw DimensionError("multi_ref_contrastive reference counts differ across samples");

    MultiRefContrastiveResult res;
    if (want_grads) {
        res.d_features.assign(b, std::vector<PooledFeature>());
        for (std::size_t i = 0; i < b; ++i)
            res.d_features[i].assign(n, PooledFeature(features.front().front().size(), 0.0));
    }
    const double num_pairs = static_cast<double>(n * (n - 1) / 2);
    ContrastiveConfig pair_cfg = cfg;
    pair_cfg.symmetrized = true;
    for (std::size_t ra = 0; ra < n; ++ra) {
        for (std::size_t rb = ra + 1; rb < n; ++rb) {
            ContrastiveBatch pair_batch;
            pair_batch.side_1.reserve(b);
            pair_batch.side_2.reserve(b);
            for (std::size_t i = 0; i < b; ++i) {
                pair_batch.side_1.push_back(features[i][ra]);
                pair_batch.side_2.push_back(features[i][rb]);
            }
            InfoNceResult r = info_nce(pair_batch, pair_cfg, want_grads);
            res.loss += r.loss / num_pairs;
            if (want_grads) {
                for (std::size_t i = 0; i < b; ++i) {
                    for (std::size_t d = 0; d < r.d_side_1[i].size(); ++d) {
                        res.d_features[i][ra][d] += r.d_side_1[i][d] / num_pairs;
                        res.d_features[i][rb][d] += r.d_side_2[i][d] / num_pairs;
                    }
                }
            }
        }
    }
    return res;
}

}  // namespace mrdac
