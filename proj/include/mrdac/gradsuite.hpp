#pragma once

#include <string>
#include <vector>

#include "mrdac/aggregation.hpp"
#include "mrdac/contrastive.hpp"
#include "mrdac/gradcheck.hpp"
#include "mrdac/pipeline.hpp"
#include "mrdac/tensor.hpp"

namespace mrdac {

struct GradSuiteEntry {
    std::string op;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    int trials = 0;

    bool passed() const { return max_rel_error <= tolerance; }
};

namespace detail {

inline Tensord suite_random_tensor(SplitMix64& rng, std::vector<std::size_t> shape, double lo,
                                   double hi) {
    Tensord t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Flow coordinates with fractional pixel parts in [0.1, 0.9], packed 2 x H x W:
// clear of the cell boundaries where bilinear sampling has kinks.
inline Tensord suite_interior_flow(SplitMix64& rng, std::size_t h, std::size_t w) {
    Tensord t({2, h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double px =
                static_cast<double>(rng.next() % (w - 1)) + rng.uniform(0.1, 0.9);
            const double py =
                static_cast<double>(rng.next() % (h - 1)) + rng.uniform(0.1, 0.9);
            t.at(0, y, x) = 2.0 * px / static_cast<double>(w - 1) - 1.0;
            t.at(1, y, x) = 2.0 * py / static_cast<double>(h - 1) - 1.0;
        }
    return t;
}

inline FlowFieldd suite_unpack_flow(const Tensord& t) {
    FlowFieldd f(t.height(), t.width());
    for (std::size_t y = 0; y < f.height; ++y)
        for (std::size_t x = 0; x < f.width; ++x) {
            f.x(y, x) = t.at(0, y, x);
            f.y(y, x) = t.at(1, y, x);
        }
    return f;
}

inline Tensord suite_pack_flow(const FlowFieldd& f) {
    Tensord t({2, f.height, f.width});
    for (std::size_t y = 0; y < f.height; ++y)
        for (std::size_t x = 0; x < f.width; ++x) {
            t.at(0, y, x) = f.x(y, x);
            t.at(1, y, x) = f.y(y, x);
        }
    return t;
}

}  // namespace detail

// Central finite-difference validation of every analytic gradient in the
// library, at randomly drawn interior points. eps = 1e-6, double precision.
inline std::vector<GradSuiteEntry> run_gradient_suite(int trials = 100,
                                                      std::uint64_t seed = 2024) {
    SplitMix64 rng(seed);
    std::vector<GradSuiteEntry> results;

    // grid_sample, both inputs
    {
        DifferentiableOp op;
        const PaddingMode pads[2] = {PaddingMode::BORDER, PaddingMode::ZEROS};
        GradSuiteEntry feat{"grid_sample/d_feature", 0.0, 1e-4, trials};
        GradSuiteEntry flow{"grid_sample/d_flow", 0.0, 1e-4, trials};
        for (int i = 0; i < trials; ++i) {
            const PaddingMode pad = pads[i % 2];
            op.forward = [pad](const std::vector<Tensord>& in) {
                return grid_sample(in[0], detail::suite_unpack_flow(in[1]), pad);
            };
            op.backward = [pad](const std::vector<Tensord>& in, const Tensord& up,
                                std::size_t which) {
                auto g = grid_sample_backward(in[0], detail::suite_unpack_flow(in[1]), pad, up);
                return which == 0 ? g.d_feature : detail::suite_pack_flow(g.d_flow);
            };
            const Tensord f = detail::suite_random_tensor(rng, {2, 5, 4}, -1.0, 1.0);
            const Tensord fl = detail::suite_interior_flow(rng, 5, 4);
            const Tensord proj = detail::suite_random_tensor(rng, {2, 5, 4}, -1.0, 1.0);
            feat.max_rel_error =
                std::max(feat.max_rel_error, gradient_check(op, {f, fl}, 1e-6, 0, &proj));
            flow.max_rel_error =
                std::max(flow.max_rel_error, gradient_check(op, {f, fl}, 1e-6, 1, &proj));
        }
        results.push_back(feat);
        results.push_back(flow);
    }

    // apply_motion, all three inputs
    {
        auto unpack_motion = [](const std::vector<Tensord>& in) {
            DenseMotion m;
            m.flow = detail::suite_unpack_flow(in[1]);
            m.occlusion = Tensord({in[2].height(), in[2].width()});
            for (std::size_t i = 0; i < m.occlusion.numel(); ++i) m.occlusion[i] = in[2][i];
            return m;
        };
        DifferentiableOp op;
        op.forward = [unpack_motion](const std::vector<Tensord>& in) {
            return apply_motion(in[0], unpack_motion(in));
        };
        op.backward = [unpack_motion](const std::vector<Tensord>& in, const Tensord& up,
                                      std::size_t which) {
            const auto g = apply_motion_backward(in[0], unpack_motion(in), up);
            if (which == 0) return g.d_feature;
            if (which == 1) return detail::suite_pack_flow(g.d_flow);
            Tensord mg({1, g.d_mask.dim(0), g.d_mask.dim(1)});
            for (std::size_t i = 0; i < g.d_mask.numel(); ++i) mg[i] = g.d_mask[i];
            return mg;
        };
        GradSuiteEntry entry{"apply_motion", 0.0, 1e-4, trials};
        for (int i = 0; i < trials; ++i) {
            const Tensord f = detail::suite_random_tensor(rng, {2, 5, 4}, -1.0, 1.0);
            const Tensord fl = detail::suite_interior_flow(rng, 5, 4);
            const Tensord mask = detail::suite_random_tensor(rng, {1, 5, 4}, 0.1, 1.0);
            const Tensord proj = detail::suite_random_tensor(rng, {2, 5, 4}, -1.0, 1.0);
            for (std::size_t which = 0; which < 3; ++which)
                entry.max_rel_error = std::max(
                    entry.max_rel_error, gradient_check(op, {f, fl, mask}, 1e-6, which, &proj));
        }
        results.push_back(entry);
    }

    // aggregate, unique argmax with margin
    {
        GradSuiteEntry entry{"aggregate", 0.0, 1e-4, trials};
        for (int i = 0; i < trials; ++i) {
            WeightVector w{{1.0, rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0)}};
            std::vector<Tensord> maps;
            for (int r = 0; r < 3; ++r)
                maps.push_back(detail::suite_random_tensor(rng, {2, 3, 3}, -1.0, 1.0));
            for (std::size_t j = 0; j < maps[0].numel(); ++j) {
                std::size_t best = 0;
                double bv = w[0] * maps[0][j];
                for (std::size_t r = 1; r < 3; ++r)
                    if (w[r] * maps[r][j] > bv) {
                        bv = w[r] * maps[r][j];
                        best = r;
                    }
                for (std::size_t r = 0; r < 3; ++r)
                    if (r != best && bv - w[r] * maps[r][j] < 1e-3) maps[best][j] += 2e-3 / w[best];
            }
            DifferentiableOp op;
            op.forward = [&w](const std::vector<Tensord>& in) { return aggregate(in, w).features; };
            op.backward = [&w](const std::vector<Tensord>& in, const Tensord& up,
                               std::size_t which) {
                return aggregate_backward(in, w, aggregate(in, w), up).d_deformed[which];
            };
            const Tensord proj = detail::suite_random_tensor(rng, {2, 3, 3}, -1.0, 1.0);
            for (std::size_t which = 0; which < 3; ++which)
                entry.max_rel_error =
                    std::max(entry.max_rel_error, gradient_check(op, maps, 1e-6, which, &proj));
        }
        results.push_back(entry);
    }

    // info_nce; tau drawn in the finite-difference-resolvable range
    {
        GradSuiteEntry entry{"info_nce", 0.0, 1e-5, trials};
        const std::size_t bs_opts[3] = {2, 4, 8};
        const std::size_t d_opts[2] = {4, 16};
        for (int i = 0; i < trials; ++i) {
            const std::size_t bs = bs_opts[i % 3];
            const std::size_t d = d_opts[(i / 3) % 2];
            ContrastiveConfig cfg;
            cfg.tau = rng.uniform(0.5, 1.5);
            cfg.symmetrized = i % 5 == 0;
            auto unpack = [bs, d](const Tensord& t) {
                std::vector<PooledFeature> side(bs);
                for (std::size_t j = 0; j < bs; ++j)
                    side[j].assign(t.data() + j * d, t.data() + (j + 1) * d);
                return side;
            };
            DifferentiableOp op;
            op.forward = [&, cfg](const std::vector<Tensord>& in) {
                ContrastiveBatch b{unpack(in[0]), unpack(in[1])};
                return Tensord({1}, {info_nce(b, cfg, false).loss});
            };
            op.backward = [&, cfg](const std::vector<Tensord>& in, const Tensord& up,
                                   std::size_t which) {
                ContrastiveBatch b{unpack(in[0]), unpack(in[1])};
                const InfoNceResult r = info_nce(b, cfg, true);
                const auto& side = which == 0 ? r.d_side_1 : r.d_side_2;
                Tensord g(in[which].shape());
                for (std::size_t j = 0; j < bs; ++j)
                    for (std::size_t k = 0; k < d; ++k) g[j * d + k] = up[0] * side[j][k];
                return g;
            };
            const Tensord s1 = detail::suite_random_tensor(rng, {bs, d}, -1.0, 1.0);
            const Tensord s2 = detail::suite_random_tensor(rng, {bs, d}, -1.0, 1.0);
            entry.max_rel_error =
                std::max(entry.max_rel_error, gradient_check(op, {s1, s2}, 1e-6, 0));
            entry.max_rel_error =
                std::max(entry.max_rel_error, gradient_check(op, {s1, s2}, 1e-6, 1));
        }
        results.push_back(entry);
    }

    // multi_ref_contrastive
    {
        GradSuiteEntry entry{"multi_ref_contrastive", 0.0, 1e-4, trials};
        const std::size_t bs = 3, n = 3, d = 4;
        for (int i = 0; i < trials; ++i) {
            ContrastiveConfig cfg;
            cfg.tau = rng.uniform(0.5, 1.5);
            auto unpack = [&](const Tensord& t) {
                std::vector<std::vector<PooledFeature>> f(bs);
                for (std::size_t s = 0; s < bs; ++s)
                    for (std::size_t r = 0; r < n; ++r)
                        f[s].emplace_back(t.data() + (s * n + r) * d,
                                          t.data() + (s * n + r + 1) * d);
                return f;
            };
            DifferentiableOp op;
            op.forward = [&, cfg](const std::vector<Tensord>& in) {
                return Tensord({1}, {multi_ref_contrastive(unpack(in[0]), cfg, false).loss});
            };
            op.backward = [&, cfg](const std::vector<Tensord>& in, const Tensord& up,
                                   std::size_t) {
                const auto r = multi_ref_contrastive(unpack(in[0]), cfg, true);
                Tensord g(in[0].shape());
                for (std::size_t s = 0; s < bs; ++s)
                    for (std::size_t rr = 0; rr < n; ++rr)
                        for (std::size_t k = 0; k < d; ++k)
                            g[(s * n + rr) * d + k] = up[0] * r.d_features[s][rr][k];
                return g;
            };
            const Tensord feats =
                detail::suite_random_tensor(rng, {bs * n, d}, -1.0, 1.0);
            entry.max_rel_error =
                std::max(entry.max_rel_error, gradient_check(op, {feats}, 1e-6, 0));
        }
        results.push_back(entry);
    }

    // train_toy composite loss over (kp_variance, beta, sigma)
    {
        SynthConfig sc;
        sc.width = 16;
        sc.height = 16;
        sc.num_frames = 8;
        sc.waypoint_every = 4;
        sc.grid_k = 2;
        GradSuiteEntry entry{"train_toy_composite", 0.0, 1e-4, trials};
        const ToyBatch batch = make_toy_batch(sc, 2, 1, 2, seed ^ 0x55);
        DifferentiableOp op;
        op.forward = [&](const std::vector<Tensord>& in) {
            return Tensord(
                {1}, {toy_composite_loss(batch, in[0][0], in[0][1], in[0][2], 0.01, false).loss});
        };
        op.backward = [&](const std::vector<Tensord>& in, const Tensord& up, std::size_t) {
            const CompositeLoss cl =
                toy_composite_loss(batch, in[0][0], in[0][1], in[0][2], 0.01, true);
            return Tensord({3},
                           {up[0] * cl.d_kp_variance, up[0] * cl.d_beta, up[0] * cl.d_sigma});
        };
        for (int i = 0; i < trials; ++i) {
            const Tensord params({3}, {rng.uniform(0.02, 0.2), rng.uniform(1.0, 8.0),
                                       rng.uniform(2.0, 8.0)});
            entry.max_rel_error =
                std::max(entry.max_rel_error, gradient_check(op, {params}, 1e-6, 0));
        }
        results.push_back(entry);
    }

    return results;
}

}  // namespace mrdac
