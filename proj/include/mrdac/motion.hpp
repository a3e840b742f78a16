#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mrdac/error.hpp"
#include "mrdac/keypoint.hpp"
#include "mrdac/tensor.hpp"

namespace mrdac {

// Dense flow plus occlusion mask for one reference -> target pair.
struct DenseMotion {
    FlowFieldd flow;
    Tensord occlusion;  // H x W, values in [0,1]
};

// Central-difference divergence of the displacement field (flow minus the
// identity), in normalized coordinate units. One-sided at the borders, which
// stays exact for affine displacement fields.
inline Tensord flow_divergence(const FlowFieldd& flow) {
    const std::size_t h = flow.height, w = flow.width;
    Tensord div({h, w});
    const double hx = w > 1 ? 2.0 / static_cast<double>(w - 1) : 0.0;
    const double hy = h > 1 ? 2.0 / static_cast<double>(h - 1) : 0.0;
    auto ux = [&](std::size_t y, std::size_t x) {
        return flow.x(y, x) - FlowFieldd::normalized_coord(x, w);
    };
    auto uy = [&](std::size_t y, std::size_t x) {
        return flow.y(y, x) - FlowFieldd::normalized_coord(y, h);
    };
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double ddx = 0.0, ddy = 0.0;
            if (w > 1) {
                if (x == 0)
                    ddx = (ux(y, 1) - ux(y, 0)) / hx;
                else if (x == w - 1)
                    ddx = (ux(y, w - 1) - ux(y, w - 2)) / hx;
                else
                    ddx = (ux(y, x + 1) - ux(y, x - 1)) / (2.0 * hx);
            }
            if (h > 1) {
                if (y == 0)
                    ddy = (uy(1, x) - uy(0, x)) / hy;
                else if (y == h - 1)
                    ddy = (uy(h - 1, x) - uy(h - 2, x)) / hy;
                else
                    ddy = (uy(y + 1, x) - uy(y - 1, x)) / (2.0 * hy);
            }
            div.at(y, x) = ddx + ddy;
        }
    }
    return div;
}

// Adjoint of flow_divergence: maps a gradient on the divergence field back to
// a gradient on the flow values. The identity offset is constant, so it does
// not contribute.
inline FlowFieldd flow_divergence_adjoint(const Tensord& d_div, std::size_t h, std::size_t w) {
    FlowFieldd g(h, w);
    const double hx = w > 1 ? 2.0 / static_cast<double>(w - 1) : 0.0;
    const double hy = h > 1 ? 2.0 / static_cast<double>(h - 1) : 0.0;
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double gd = d_div.at(y, x);
            if (w > 1) {
                if (x == 0) {
                    g.x(y, 1) += gd / hx;
                    g.x(y, 0) -= gd / hx;
                } else if (x == w - 1) {
                    g.x(y, w - 1) += gd / hx;
                    g.x(y, w - 2) -= gd / hx;
                } else {
                    g.x(y, x + 1) += gd / (2.0 * hx);
                    g.x(y, x - 1) -= gd / (2.0 * hx);
                }
            }
            if (h > 1) {
                if (y == 0) {
                    g.y(1, x) += gd / hy;
                    g.y(0, x) -= gd / hy;
                } else if (y == h - 1) {
                    g.y(h - 1, x) += gd / hy;
                    g.y(h - 2, x) -= gd / hy;
                } else {
                    g.y(y + 1, x) += gd / (2.0 * hy);
                    g.y(y - 1, x) -= gd / (2.0 * hy);
                }
            }
        }
    }
    return g;
}

// mask[y,x] = exp(-beta * |div(flow - identity)(y,x)|). beta = 0 gives all ones.
inline Tensord occlusion_from_flow(const FlowFieldd& flow, double beta) {
    if (beta < 0.0) throw InvalidInputError("occlusion beta must be >= 0");
    Tensord div = flow_divergence(flow);
    Tensord mask({flow.height, flow.width});
    for (std::size_t i = 0; i < div.numel(); ++i) mask[i] = std::exp(-beta * std::abs(div[i]));
    return mask;
}

struct SparseToDenseParams {
    double kp_variance = 0.01;  // Gaussian blending variance, normalized units^2
    double w_bg = 0.01;         // fixed floor weight of the background candidate
    double beta = 5.0;          // occlusion sharpness
};

struct SparseToDenseResult {
    DenseMotion motion;
    // d flow / d kp_variance, filled when requested.
    FlowFieldd dflow_dvariance;
};

namespace detail {

// Gaussian-blended first-order candidate motions. Per pixel z (target frame):
// candidate k maps z to p_ref_k + A_k (z - p_tgt_k) with A_k = J_ref J_tgt^-1,
// plus a background candidate m_0(z) = z at fixed weight w_bg. Weights are
// normalized Gaussians in the distance to the target keypoints.
inline SparseToDenseResult sparse_to_dense_impl(const KeypointSet& ref_kp,
                                                const KeypointSet& tgt_kp, std::size_t height,
                                                std::size_t width,
                                                const SparseToDenseParams& prm,
                                                bool want_variance_grad) {
    const std::size_t k_n = ref_kp.size();
    if (k_n != tgt_kp.size())
        throw DimensionError("sparse_to_dense keypoint counts differ: " +
                             std::to_string(k_n) + " vs " + std::to_string(tgt_kp.size()));
    if (k_n == 0) throw InvalidInputError("sparse_to_dense requires at least one keypoint");
    if (!(prm.kp_variance > 0.0)) throw InvalidInputError("kp_variance must be > 0");
    if (prm.w_bg < 0.0) throw InvalidInputError("w_bg must be >= 0");

    const bool use_jac = ref_kp.has_jacobians() && tgt_kp.has_jacobians();
    std::vector<Mat2> combined(k_n, Mat2::identity());
    if (use_jac)
        for (std::size_t k = 0; k < k_n; ++k)
            combined[k] = *ref_kp.points[k].jacobian * tgt_kp.points[k].jacobian->inverse();

    SparseToDenseResult res;
    res.motion.flow = FlowFieldd(height, width);
    if (want_variance_grad) res.dflow_dvariance = FlowFieldd(height, width);

    const double v = prm.kp_variance;
    // Candidates are blended as displacements from the pixel position so that
    // the zero-motion case stays exactly the identity flow. The background
    // candidate has zero displacement by construction.
    std::vector<double> wk(k_n + 1), dk(k_n + 1);
    std::vector<Vec2> disp(k_n + 1);
    for (std::size_t yy = 0; yy < height; ++yy) {
        for (std::size_t xx = 0; xx < width; ++xx) {
            const Vec2 z{FlowFieldd::normalized_coord(xx, width),
                         FlowFieldd::normalized_coord(yy, height)};
            disp[0] = Vec2{};  // background: m_0(z) = z
            wk[0] = prm.w_bg;
            dk[0] = 0.0;
            double sum = prm.w_bg;
            for (std::size_t k = 0; k < k_n; ++k) {
                const Vec2 d = z - tgt_kp.points[k].position;
                const Vec2 warped = combined[k].apply(d);
                disp[k + 1] = (ref_kp.points[k].position - tgt_kp.points[k].position) +
                              (warped - d);
                wk[k + 1] = std::exp(-d.norm2() / (2.0 * v));
                dk[k + 1] = d.norm2() / (2.0 * v * v);
                sum += wk[k + 1];
            }
            Vec2 blended;  // zero when every weight underflowed (background fallback)
            if (sum > 0.0)
                for (std::size_t k = 0; k <= k_n; ++k) blended = blended + (wk[k] / sum) * disp[k];
            res.motion.flow.x(yy, xx) = z.x + blended.x;
            res.motion.flow.y(yy, xx) = z.y + blended.y;

            if (want_variance_grad) {
                Vec2 dv;
                if (sum > 0.0) {
                    double dbar = 0.0;
                    for (std::size_t k = 0; k <= k_n; ++k) dbar += (wk[k] / sum) * dk[k];
                    for (std::size_t k = 0; k <= k_n; ++k)
                        dv = dv + ((wk[k] / sum) * (dk[k] - dbar)) * disp[k];
                }
                res.dflow_dvariance.x(yy, xx) = dv.x;
                res.dflow_dvariance.y(yy, xx) = dv.y;
            }
        }
    }
    res.motion.occlusion = occlusion_from_flow(res.motion.flow, prm.beta);
    return res;
}

}  // namespace detail

inline DenseMotion sparse_to_dense(const KeypointSet& ref_kp, const KeypointSet& tgt_kp,
                                   std::size_t height, std::size_t width,
                                   const SparseToDenseParams& prm = {}) {
    return detail::sparse_to_dense_impl(ref_kp, tgt_kp, height, width, prm, false).motion;
}

inline DenseMotion sparse_to_dense(const KeypointSet& ref_kp, const KeypointSet& tgt_kp,
                                   std::size_t height, std::size_t width, double kp_variance) {
    SparseToDenseParams prm;
    prm.kp_variance = kp_variance;
    return sparse_to_dense(ref_kp, tgt_kp, height, width, prm);
}

// Variant exposing d flow / d kp_variance for the toy training loop.
inline SparseToDenseResult sparse_to_dense_with_grad(const KeypointSet& ref_kp,
                                                     const KeypointSet& tgt_kp,
                                                     std::size_t height, std::size_t width,
                                                     const SparseToDenseParams& prm) {
    return detail::sparse_to_dense_impl(ref_kp, tgt_kp, height, width, prm, true);
}

}  // namespace mrdac
