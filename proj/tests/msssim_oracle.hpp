#pragma once

// Brute-force MS-SSIM oracle: direct 2D windowed statistics, no separable
// convolution or shared code with the library implementation.

#include <algorithm>
#include <cmath>
#include <vector>

#include "mrdac/tensor.hpp"

namespace testutil {

inline double ms_ssim_oracle(const mrdac::Tensord& fa, const mrdac::Tensord& fb,
                             double peak = 1.0) {
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    const double base_weights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

    // 11-tap Gaussian, sigma 1.5, as an explicit 2D kernel.
    double g1[11];
    double gsum = 0.0;
    for (int i = 0; i < 11; ++i) {
        g1[i] = std::exp(-(i - 5.0) * (i - 5.0) / (2.0 * 1.5 * 1.5));
        gsum += g1[i];
    }
    for (double& v : g1) v /= gsum;
    double g2[11][11];
    for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 11; ++x) g2[y][x] = g1[y] * g1[x];

    int scales = 0;
    for (std::size_t m = std::min(fa.height(), fa.width()); scales < 5 && m >= 11; m /= 2)
        ++scales;
    double wnorm = 0.0;
    for (int s = 0; s < scales; ++s) wnorm += base_weights[s];

    double channel_sum = 0.0;
    for (std::size_t c = 0; c < fa.channels(); ++c) {
        std::size_t h = fa.height(), w = fa.width();
        std::vector<double> pa(h * w), pb(h * w);
        for (std::size_t i = 0; i < h * w; ++i) {
            pa[i] = fa.data()[c * h * w + i];
            pb[i] = fb.data()[c * h * w + i];
        }

        double value = 1.0;
        for (int s = 0; s < scales; ++s) {
            double sum_ssim = 0.0, sum_cs = 0.0;
            std::size_t count = 0;
            for (std::size_t oy = 0; oy + 11 <= h; ++oy) {
                for (std::size_t ox = 0; ox + 11 <= w; ++ox) {
                    double ma = 0.0, mb = 0.0, maa = 0.0, mbb = 0.0, mab = 0.0;
                    for (int ky = 0; ky < 11; ++ky)
                        for (int kx = 0; kx < 11; ++kx) {
                            const double va = pa[(oy + ky) * w + ox + kx];
                            const double vb = pb[(oy + ky) * w + ox + kx];
                            const double wt = g2[ky][kx];
                            ma += wt * va;
                            mb += wt * vb;
                            maa += wt * va * va;
                            mbb += wt * vb * vb;
                            mab += wt * va * vb;
                        }
                    const double var_a = maa - ma * ma;
                    const double var_b = mbb - mb * mb;
                    const double cov = mab - ma * mb;
                    const double lum = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
                    const double cs = (2.0 * cov + c2) / (var_a + var_b + c2);
                    sum_ssim += lum * cs;
                    sum_cs += cs;
                    ++count;
                }
            }
            const double mean_ssim = sum_ssim / static_cast<double>(count);
            const double mean_cs = sum_cs / static_cast<double>(count);
            const double term = std::max(s + 1 == scales ? mean_ssim : mean_cs, 0.0);
            value *= std::pow(term, base_weights[s] / wnorm);

            if (s + 1 < scales) {
                const std::size_t nh = h / 2, nw = w / 2;
                std::vector<double> na(nh * nw), nb(nh * nw);
                for (std::size_t y = 0; y < nh; ++y)
                    for (std::size_t x = 0; x < nw; ++x) {
                        na[y * nw + x] = 0.25 * (pa[2 * y * w + 2 * x] + pa[2 * y * w + 2 * x + 1] +
                                                 pa[(2 * y + 1) * w + 2 * x] +
                                                 pa[(2 * y + 1) * w + 2 * x + 1]);
                        nb[y * nw + x] = 0.25 * (pb[2 * y * w + 2 * x] + pb[2 * y * w + 2 * x + 1] +
                                                 pb[(2 * y + 1) * w + 2 * x] +
                                                 pb[(2 * y + 1) * w + 2 * x + 1]);
                    }
                pa.swap(na);
                pb.swap(nb);
                h = nh;
                w = nw;
            }
        }
        channel_sum += value;
    }
    return channel_sum / static_cast<double>(fa.channels());
}

}  // namespace testutil
