#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mrdac/error.hpp"

namespace mrdac {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    double norm2() const { return x * x + y * y; }
};

// Row-major 2x2 matrix: [a b; c d].
struct Mat2 {
    double a = 1.0, b = 0.0, c = 0.0, d = 1.0;

    static Mat2 identity() { return {}; }
    static Mat2 rotation(double radians) {
        const double co = std::cos(radians), si = std::sin(radians);
        return {co, -si, si, co};
    }

    double det() const { return a * d - b * c; }

    Mat2 inverse() const {
        const double dt = det();
        if (std::abs(dt) <= 1e-8)
            throw InvalidInputError("2x2 matrix is singular (|det| <= 1e-8)");
        return {d / dt, -b / dt, -c / dt, a / dt};
    }

    Vec2 apply(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }

    friend Mat2 operator*(const Mat2& m, const Mat2& n) {
        return {m.a * n.a + m.b * n.c, m.a * n.b + m.b * n.d,
                m.c * n.a + m.d * n.c, m.c * n.b + m.d * n.d};
    }
    friend Mat2 operator*(double s, const Mat2& m) {
        return {s * m.a, s * m.b, s * m.c, s * m.d};
    }

    bool finite() const {
        return std::isfinite(a) && std::isfinite(b) && std::isfinite(c) && std::isfinite(d);
    }
};

// One sparse motion landmark in normalized [-1,1]^2 coordinates, optionally
// with a local 2x2 affine Jacobian. Positions clamp on construction.
struct Keypoint {
    Vec2 position;
    std::optional<Mat2> jacobian;

    Keypoint() = default;
    explicit Keypoint(Vec2 pos, std::optional<Mat2> jac = std::nullopt)
        : position{clamp01(pos.x), clamp01(pos.y)}, jacobian(jac) {
        if (jacobian) {
            if (!jacobian->finite())
                throw InvalidInputError("keypoint jacobian is not finite");
            if (std::abs(jacobian->det()) <= 1e-8)
                throw InvalidInputError("keypoint jacobian is singular (|det| <= 1e-8)");
        }
    }

private:
    static double clamp01(double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); }
};

struct KeypointSet {
    std::int64_t frame_index = 0;
    std::vector<Keypoint> points;

    std::size_t size() const { return points.size(); }
    bool has_jacobians() const {
        return !points.empty() && points.front().jacobian.has_value();
    }
};

// p -> scale * R(theta) * p + translation
struct SimilarityTransform {
    double scale = 1.0;
    double rotation_rad = 0.0;
    Vec2 translation;

    Mat2 linear() const { return scale * Mat2::rotation(rotation_rad); }

    Vec2 apply(Vec2 p) const { return linear().apply(p) + translation; }

    SimilarityTransform inverse() const {
        SimilarityTransform inv;
        inv.scale = 1.0 / scale;
        inv.rotation_rad = -rotation_rad;
        inv.translation = -1.0 * inv.linear().apply(translation);
        return inv;
    }
};

// Ground-truth keypoints for synthetic sequences: a grid_k x grid_k grid over
// [-0.6, 0.6]^2 of the base frame transported by `gt_motion`, Jacobians set to
// the transform's linear part.
inline KeypointSet keypoints_from_motion(const SimilarityTransform& gt_motion, int grid_k,
                                         std::int64_t frame_index = 0) {
    if (grid_k < 1) throw InvalidInputError("keypoints_from_motion grid_k must be >= 1");
    KeypointSet set;
    set.frame_index = frame_index;
    const Mat2 lin = gt_motion.linear();
    for (int gy = 0; gy < grid_k; ++gy) {
        for (int gx = 0; gx < grid_k; ++gx) {
            const double fx = grid_k == 1 ? 0.0 : -0.6 + 1.2 * gx / (grid_k - 1);
            const double fy = grid_k == 1 ? 0.0 : -0.6 + 1.2 * gy / (grid_k - 1);
            set.points.emplace_back(gt_motion.apply({fx, fy}), lin);
        }
    }
    return set;
}

}  // namespace mrdac
