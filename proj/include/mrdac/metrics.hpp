#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "mrdac/error.hpp"
#include "mrdac/tensor.hpp"

namespace mrdac {

// 10*log10(peak^2 / MSE) over all channels, capped at 99 dB so identical
// frames stay plottable.
inline double psnr(const Tensord& a, const Tensord& b, double peak = 1.0) {
    if (!a.same_shape(b)) throw DimensionError("psnr frames differ in shape");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.numel());
    if (mse <= 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(peak * peak / mse));
}

namespace detail {

inline std::vector<double> gaussian_window(int taps, double sigma) {
    std::vector<double> w(taps);
    const double c = (taps - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < taps; ++i) {
        w[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

// Separable valid-region convolution of one channel plane (H x W, rank 2).
inline Tensord conv_valid(const Tensord& img, const std::vector<double>& win) {
    const std::size_t h = img.dim(0), w = img.dim(1), t = win.size();
    Tensord rows({h, w - t + 1});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x + t <= w; ++x) {
            double s = 0.0;
            for (std::size_t k = 0; k < t; ++k) s += win[k] * img.at(y, x + k);
            rows.at(y, x) = s;
        }
    Tensord out({h - t + 1, w - t + 1});
    for (std::size_t y = 0; y + t <= h; ++y)
        for (std::size_t x = 0; x < rows.dim(1); ++x) {
            double s = 0.0;
            for (std::size_t k = 0; k < t; ++k) s += win[k] * rows.at(y + k, x);
            out.at(y, x) = s;
        }
    return out;
}

inline Tensord downsample2(const Tensord& img) {
    const std::size_t h = img.dim(0) / 2, w = img.dim(1) / 2;
    Tensord out({h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            out.at(y, x) = 0.25 * (img.at(2 * y, 2 * x) + img.at(2 * y, 2 * x + 1) +
                                   img.at(2 * y + 1, 2 * x) + img.at(2 * y + 1, 2 * x + 1));
    return out;
}

struct SsimTerms {
    double mean_ssim = 0.0;  // luminance * contrast-structure
    double mean_cs = 0.0;    // contrast-structure only
};

// Single-scale SSIM terms on one channel plane: 11x11 Gaussian sigma 1.5,
// k1=0.01, k2=0.03, statistics over the valid region only.
inline SsimTerms ssim_terms(const Tensord& a, const Tensord& b, double peak) {
    const std::vector<double> win = gaussian_window(11, 1.5);
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);

    Tensord aa({a.dim(0), a.dim(1)}), bb({a.dim(0), a.dim(1)}), ab({a.dim(0), a.dim(1)});
    for (std::size_t i = 0; i < a.numel(); ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    const Tensord mu_a = conv_valid(a, win);
    const Tensord mu_b = conv_valid(b, win);
    const Tensord m_aa = conv_valid(aa, win);
    const Tensord m_bb = conv_valid(bb, win);
    const Tensord m_ab = conv_valid(ab, win);

    SsimTerms t;
    for (std::size_t i = 0; i < mu_a.numel(); ++i) {
        const double va = m_aa[i] - mu_a[i] * mu_a[i];
        const double vb = m_bb[i] - mu_b[i] * mu_b[i];
        const double cov = m_ab[i] - mu_a[i] * mu_b[i];
        const double lum = (2.0 * mu_a[i] * mu_b[i] + c1) /
                           (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1);
        const double cs = (2.0 * cov + c2) / (va + vb + c2);
        t.mean_ssim += lum * cs;
        t.mean_cs += cs;
    }
    t.mean_ssim /= static_cast<double>(mu_a.numel());
    t.mean_cs /= static_cast<double>(mu_a.numel());
    return t;
}

inline constexpr std::array<double, 5> kMsSsimWeights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

inline int ms_ssim_scales(std::size_t h, std::size_t w) {
    int scales = 0;
    std::size_t m = std::min(h, w);
    while (scales < 5 && m >= 11) {
        ++scales;
        m /= 2;
    }
    return scales;
}

}  // namespace detail

// Single-scale SSIM averaged over channels.
inline double ssim(const Tensord& a, const Tensord& b, double peak = 1.0) {
    if (!a.same_shape(b)) throw DimensionError("ssim frames differ in shape");
    if (a.height() < 11 || a.width() < 11)
        throw DimensionError("ssim needs at least 11x11 frames");
    double total = 0.0;
    for (std::size_t c = 0; c < a.channels(); ++c) {
        Tensord pa({a.height(), a.width()}), pb({a.height(), a.width()});
        for (std::size_t i = 0; i < pa.numel(); ++i) {
            pa[i] = a.data()[c * pa.numel() + i];
            pb[i] = b.data()[c * pa.numel() + i];
        }
        total += detail::ssim_terms(pa, pb, peak).mean_ssim;
    }
    return total / static_cast<double>(a.channels());
}

// Multi-scale SSIM with the standard weights. Frames below 176x176 use fewer
// scales (each scale needs 11 pixels after halving) with the retained weights
// renormalized. Per-scale terms clamp at zero so anti-correlated content maps
// near zero instead of NaN under the fractional exponents.
inline double ms_ssim(const Tensord& a, const Tensord& b, double peak = 1.0) {
    if (!a.same_shape(b)) throw DimensionError("ms_ssim frames differ in shape");
    const int scales = detail::ms_ssim_scales(a.height(), a.width());
    if (scales < 1) throw DimensionError("ms_ssim needs at least 11x11 frames");

    std::array<double, 5> w{};
    double wsum = 0.0;
    for (int s = 0; s < scales; ++s) wsum += detail::kMsSsimWeights[s];
    for (int s = 0; s < scales; ++s) w[s] = detail::kMsSsimWeights[s] / wsum;

    double total = 0.0;
    for (std::size_t c = 0; c < a.channels(); ++c) {
        Tensord pa({a.height(), a.width()}), pb({a.height(), a.width()});
        for (std::size_t i = 0; i < pa.numel(); ++i) {
            pa[i] = a.data()[c * pa.numel() + i];
            pb[i] = b.data()[c * pa.numel() + i];
        }
        double value = 1.0;
        for (int s = 0; s < scales; ++s) {
            const detail::SsimTerms t = detail::ssim_terms(pa, pb, peak);
            const double term = std::max(s + 1 == scales ? t.mean_ssim : t.mean_cs, 0.0);
            value *= std::pow(term, w[s]);
            if (s + 1 < scales) {
                pa = detail::downsample2(pa);
                pb = detail::downsample2(pb);
            }
        }
        total += value;
    }
    return total / static_cast<double>(a.channels());
}

// ---------------------------------------------------------------------------
// rate-distortion curves and the Bjontegaard delta rate
// ---------------------------------------------------------------------------

struct RDPoint {
    double rate_kbps = 0.0;
    double quality = 0.0;
};

struct RDCurve {
    std::vector<RDPoint> points;  // sorted by rate
    std::string metric_name;
};

// Hard-validates rates; returns true when quality is non-monotone in rate,
// which is reported, not failed.
inline bool rd_curve_quality_warning(const RDCurve& c) {
    if (c.points.size() < 4) throw InvalidInputError("RD curve needs >= 4 points");
    bool warn = false;
    for (std::size_t i = 1; i < c.points.size(); ++i) {
        if (!(c.points[i].rate_kbps > c.points[i - 1].rate_kbps))
            throw InvalidInputError("RD curve rates must be strictly increasing");
        if (!(c.points[i].rate_kbps > 0.0) || !(c.points[0].rate_kbps > 0.0))
            throw InvalidInputError("RD curve rates must be positive");
        if (c.points[i].quality < c.points[i - 1].quality) warn = true;
    }
    return warn;
}

namespace detail {

// Least-squares cubic y(x) on centered/scaled x; returns coefficients plus the
// transform so callers can integrate in the original variable.
struct CubicFit {
    std::array<double, 4> coef{};  // c0 + c1 u + c2 u^2 + c3 u^3, u = (x - shift)/scale
    double shift = 0.0;
    double scale = 1.0;

    double integrate(double lo, double hi) const {
        auto anti = [&](double x) {
            const double u = (x - shift) / scale;
            return scale * (coef[0] * u + coef[1] * u * u / 2.0 + coef[2] * u * u * u / 3.0 +
                            coef[3] * u * u * u * u / 4.0);
        };
        return anti(hi) - anti(lo);
    }
};

inline CubicFit fit_cubic(const std::vector<double>& x, const std::vector<double>& y) {
    CubicFit fit;
    double mean = 0.0, spread = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    for (double v : x) spread = std::max(spread, std::abs(v - mean));
    fit.shift = mean;
    fit.scale = spread > 0.0 ? spread : 1.0;

    double a[4][5] = {};
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double u = (x[i] - fit.shift) / fit.scale;
        const double pw[4] = {1.0, u, u * u, u * u * u};
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) a[r][c] += pw[r] * pw[c];
            a[r][4] += pw[r] * y[i];
        }
    }
    // Gaussian elimination with partial pivoting on the 4x4 normal equations.
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        if (std::abs(a[col][col]) < 1e-300)
            throw InvalidInputError("degenerate RD curve: singular cubic fit");
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 5; ++c) a[r][c] -= f * a[col][c];
        }
    }
    for (int r = 0; r < 4; ++r) fit.coef[r] = a[r][4] / a[r][r];
    return fit;
}

}  // namespace detail

// Classic Bjontegaard delta rate: cubic fits of log10(rate) over quality,
// integrated across the shared quality interval. Negative means the test
// curve spends fewer bits at equal quality.
inline double bd_rate(const RDCurve& anchor, const RDCurve& test) {
    rd_curve_quality_warning(anchor);
    rd_curve_quality_warning(test);

    auto extract = [](const RDCurve& c, std::vector<double>& q, std::vector<double>& lr) {
        for (const RDPoint& p : c.points) {
            q.push_back(p.quality);
            lr.push_back(std::log10(p.rate_kbps));
        }
    };
    std::vector<double> qa, la, qt, lt;
    extract(anchor, qa, la);
    extract(test, qt, lt);

    const double lo = std::max(*std::min_element(qa.begin(), qa.end()),
                               *std::min_element(qt.begin(), qt.end()));
    const double hi = std::min(*std::max_element(qa.begin(), qa.end()),
                               *std::max_element(qt.begin(), qt.end()));
    if (!(hi > lo))
        throw NoOverlapError("quality ranges [" + std::to_string(lo) + ", " +
                             std::to_string(hi) + "] do not overlap");

    const detail::CubicFit fa = detail::fit_cubic(qa, la);
    const detail::CubicFit ft = detail::fit_cubic(qt, lt);
    const double delta = (ft.integrate(lo, hi) - fa.integrate(lo, hi)) / (hi - lo);
    return 100.0 * (std::pow(10.0, delta) - 1.0);
}

}  // namespace mrdac
