#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "mrdac/error.hpp"

namespace mrdac {

enum class PaddingMode { BORDER, ZEROS };

// Dense row-major tensor. Rank-3 C x H x W instances carry feature maps;
// arbitrary rank is allowed for the gradient-check plumbing.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, T fill = T{})
        : shape_(std::move(shape)), data_(count(shape_), fill) {}

    Tensor(std::vector<std::size_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (count(shape_) != data_.size())
            throw DimensionError("tensor data size " + std::to_string(data_.size()) +
                                 " does not match shape product " + std::to_string(count(shape_)));
    }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, T value) {
        return Tensor(std::move(shape), value);
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t numel() const { return data_.size(); }

    // C x H x W accessors for feature maps.
    std::size_t channels() const { return shape_[0]; }
    std::size_t height() const { return shape_[1]; }
    std::size_t width() const { return shape_[2]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(std::size_t c, std::size_t y, std::size_t x) {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }
    const T& at(std::size_t c, std::size_t y, std::size_t x) const {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }

    // Rank-2 access (H x W masks and the like).
    T& at(std::size_t y, std::size_t x) { return data_[y * shape_[1] + x]; }
    const T& at(std::size_t y, std::size_t x) const { return data_[y * shape_[1] + x]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (T v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    Tensor& operator+=(const Tensor& o) {
        require_same(o, "+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor& operator-=(const Tensor& o) {
        require_same(o, "-=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Tensor& operator*=(T s) {
        for (T& v : data_) v *= s;
        return *this;
    }

    friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
    friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
    friend Tensor operator*(Tensor a, T s) { return a *= s; }
    friend Tensor operator*(T s, Tensor a) { return a *= s; }

    static std::size_t count(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                               std::multiplies<std::size_t>());
    }

private:
    void require_same(const Tensor& o, const char* op) const {
        if (!same_shape(o)) throw DimensionError(std::string("tensor shapes differ in ") + op);
    }

    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

// H x W x 2 grid of sampling coordinates in normalized range. (-1,-1) is the
// center of the top-left pixel, (+1,+1) the center of the bottom-right pixel.
template <typename T>
struct FlowField {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<T> xy;  // interleaved x, y per pixel

    FlowField() = default;
    FlowField(std::size_t h, std::size_t w) : height(h), width(w), xy(2 * h * w, T{}) {}

    T& x(std::size_t y_, std::size_t x_) { return xy[2 * (y_ * width + x_)]; }
    T& y(std::size_t y_, std::size_t x_) { return xy[2 * (y_ * width + x_) + 1]; }
    T x(std::size_t y_, std::size_t x_) const { return xy[2 * (y_ * width + x_)]; }
    T y(std::size_t y_, std::size_t x_) const { return xy[2 * (y_ * width + x_) + 1]; }

    std::size_t numel() const { return xy.size(); }

    // Normalized center coordinate of pixel index i along an axis of the given size.
    static T normalized_coord(std::size_t i, std::size_t size) {
        if (size <= 1) return T(-1);
        return static_cast<T>(2.0 * static_cast<double>(i) / static_cast<double>(size - 1) - 1.0);
    }

    static FlowField identity(std::size_t h, std::size_t w) {
        FlowField f(h, w);
        for (std::size_t yy = 0; yy < h; ++yy)
            for (std::size_t xx = 0; xx < w; ++xx) {
                f.x(yy, xx) = normalized_coord(xx, w);
                f.y(yy, xx) = normalized_coord(yy, h);
            }
        return f;
    }

    bool all_finite() const {
        for (T v : xy)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

using FlowFieldf = FlowField<float>;
using FlowFieldd = FlowField<double>;

namespace detail {

// Normalized coordinate -> continuous pixel coordinate, align-corners style.
// Snaps results within a few ulp of an integer so that identity flows index
// pixels exactly; the snap window is ~1e-12 and gradient checks stay clear of it.
template <typename T>
inline T unnormalize(T g, std::size_t size) {
    if (size <= 1) return T(0);
    T p = (g + T(1)) * T(0.5) * static_cast<T>(size - 1);
    T r = std::round(p);
    T tol = static_cast<T>(size) * T(8) * std::numeric_limits<T>::epsilon();
    if (std::abs(p - r) <= tol) return r;
    return p;
}

template <typename T>
inline T fetch(const Tensor<T>& f, std::size_t c, long yy, long xx, PaddingMode pad) {
    const long h = static_cast<long>(f.height());
    const long w = static_cast<long>(f.width());
    if (pad == PaddingMode::ZEROS) {
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) return T(0);
    } else {
        yy = std::clamp(yy, 0L, h - 1);
        xx = std::clamp(xx, 0L, w - 1);
    }
    return f.at(c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
}

// Bilinear sampling of `feature` at `flow` coordinates. Output spatial size is
// the flow size; no shape precondition so resize paths can reuse the kernel.
template <typename T>
Tensor<T> sample_bilinear(const Tensor<T>& feature, const FlowField<T>& flow, PaddingMode pad) {
    const std::size_t c_n = feature.channels();
    Tensor<T> out({c_n, flow.height, flow.width});
    for (std::size_t yy = 0; yy < flow.height; ++yy) {
        for (std::size_t xx = 0; xx < flow.width; ++xx) {
            const T px = unnormalize(flow.x(yy, xx), feature.width());
            const T py = unnormalize(flow.y(yy, xx), feature.height());
            const long x0 = static_cast<long>(std::floor(px));
            const long y0 = static_cast<long>(std::floor(py));
            const T tx = px - static_cast<T>(x0);
            const T ty = py - static_cast<T>(y0);
            for (std::size_t c = 0; c < c_n; ++c) {
                const T v00 = fetch(feature, c, y0, x0, pad);
                const T v01 = fetch(feature, c, y0, x0 + 1, pad);
                const T v10 = fetch(feature, c, y0 + 1, x0, pad);
                const T v11 = fetch(feature, c, y0 + 1, x0 + 1, pad);
                out.at(c, yy, xx) =
                    (T(1) - ty) * ((T(1) - tx) * v00 + tx * v01) +
                    ty * ((T(1) - tx) * v10 + tx * v11);
            }
        }
    }
    return out;
}

template <typename T>
inline void scatter(Tensor<T>& grad, std::size_t c, long yy, long xx, T v, PaddingMode pad) {
    const long h = static_cast<long>(grad.height());
    const long w = static_cast<long>(grad.width());
    if (pad == PaddingMode::ZEROS) {
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) return;
    } else {
        yy = std::clamp(yy, 0L, h - 1);
        xx = std::clamp(xx, 0L, w - 1);
    }
    grad.at(c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) += v;
}

template <typename T>
struct SampleGrads {
    Tensor<T> d_feature;
    FlowField<T> d_flow;
};

// Backward of sample_bilinear. `upstream` has the output shape. Gradients with
// respect to flow are in normalized units; border-clamped directions get zero
// because the clamped corner values coincide.
template <typename T>
SampleGrads<T> sample_bilinear_backward(const Tensor<T>& feature, const FlowField<T>& flow,
                                        PaddingMode pad, const Tensor<T>& upstream) {
    const std::size_t c_n = feature.channels();
    SampleGrads<T> g;
    g.d_feature = Tensor<T>::zeros(
        {feature.channels(), feature.height(), feature.width()});
    g.d_flow = FlowField<T>(flow.height, flow.width);
    const T sx = static_cast<T>(feature.width() > 1 ? 0.5 * (feature.width() - 1) : 0.0);
    const T sy = static_cast<T>(feature.height() > 1 ? 0.5 * (feature.height() - 1) : 0.0);
    for (std::size_t yy = 0; yy < flow.height; ++yy) {
        for (std::size_t xx = 0; xx < flow.width; ++xx) {
            const T px = unnormalize(flow.x(yy, xx), feature.width());
            const T py = unnormalize(flow.y(yy, xx), feature.height());
            const long x0 = static_cast<long>(std::floor(px));
            const long y0 = static_cast<long>(std::floor(py));
            const T tx = px - static_cast<T>(x0);
            const T ty = py - static_cast<T>(y0);
            T dpx = T(0), dpy = T(0);
            for (std::size_t c = 0; c < c_n; ++c) {
                const T up = upstream.at(c, yy, xx);
                const T v00 = fetch(feature, c, y0, x0, pad);
                const T v01 = fetch(feature, c, y0, x0 + 1, pad);
                const T v10 = fetch(feature, c, y0 + 1, x0, pad);
                const T v11 = fetch(feature, c, y0 + 1, x0 + 1, pad);
                scatter(g.d_feature, c, y0, x0, up * (T(1) - ty) * (T(1) - tx), pad);
                scatter(g.d_feature, c, y0, x0 + 1, up * (T(1) - ty) * tx, pad);
                scatter(g.d_feature, c, y0 + 1, x0, up * ty * (T(1) - tx), pad);
                scatter(g.d_feature, c, y0 + 1, x0 + 1, up * ty * tx, pad);
                dpx += up * ((T(1) - ty) * (v01 - v00) + ty * (v11 - v10));
                dpy += up * ((T(1) - tx) * (v10 - v00) + tx * (v11 - v01));
            }
            g.d_flow.x(yy, xx) = dpx * sx;
            g.d_flow.y(yy, xx) = dpy * sy;
        }
    }
    return g;
}

}  // namespace detail

// Occlusion-free warp: bilinear interpolation of each feature channel at the
// flow coordinates. BORDER clamps out-of-range reads, ZEROS reads zero.
template <typename T>
Tensor<T> grid_sample(const Tensor<T>& feature, const FlowField<T>& flow,
                      PaddingMode pad = PaddingMode::BORDER) {
    if (feature.rank() != 3)
        throw DimensionError("grid_sample expects a C x H x W feature tensor");
    if (feature.height() != flow.height || feature.width() != flow.width)
        throw DimensionError("grid_sample feature " + std::to_string(feature.height()) + "x" +
                             std::to_string(feature.width()) + " vs flow " +
                             std::to_string(flow.height) + "x" + std::to_string(flow.width));
    if (!flow.all_finite()) throw InvalidInputError("grid_sample flow contains NaN/Inf");
    return detail::sample_bilinear(feature, flow, pad);
}

template <typename T>
detail::SampleGrads<T> grid_sample_backward(const Tensor<T>& feature, const FlowField<T>& flow,
                                            PaddingMode pad, const Tensor<T>& upstream) {
    if (feature.height() != flow.height || feature.width() != flow.width)
        throw DimensionError("grid_sample_backward shape mismatch");
    if (upstream.channels() != feature.channels() || upstream.height() != flow.height ||
        upstream.width() != flow.width)
        throw DimensionError("grid_sample_backward upstream shape mismatch");
    return detail::sample_bilinear_backward(feature, flow, pad, upstream);
}

// Bilinear resize to out_h x out_w sampling the input at the align-corners
// positions of the output grid. Shares the grid_sample kernel and gradients.
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& feature, std::size_t out_h, std::size_t out_w) {
    return detail::sample_bilinear(feature, FlowField<T>::identity(out_h, out_w),
                                   PaddingMode::BORDER);
}

// Gradient of bilinear_resize with respect to the input feature.
template <typename T>
Tensor<T> bilinear_resize_backward(const Tensor<T>& feature, std::size_t out_h, std::size_t out_w,
                                   const Tensor<T>& upstream) {
    auto g = detail::sample_bilinear_backward(feature, FlowField<T>::identity(out_h, out_w),
                                              PaddingMode::BORDER, upstream);
    return std::move(g.d_feature);
}

}  // namespace mrdac
