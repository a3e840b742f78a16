#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mrdac/error.hpp"
#include "mrdac/keypoint.hpp"
#include "mrdac/noise.hpp"
#include "mrdac/tensor.hpp"

namespace mrdac {

using Frame = Tensord;  // 3 x H x W, values in [0, 1]

struct SynthConfig {
    std::size_t width = 64;
    std::size_t height = 64;
    std::uint32_t num_frames = 64;
    double fps = 25.0;
    std::uint64_t seed = 1;
    double max_rotation_deg = 30.0;
    double max_translation = 0.05;   // normalized units
    double max_scale_delta = 0.05;
    int texture_octaves = 2;
    int grid_k = 3;                  // K = grid_k^2 ground-truth keypoints
    std::uint32_t waypoint_every = 16;
};

struct Sequence {
    std::vector<Frame> frames;
    double fps = 25.0;
    std::vector<SimilarityTransform> gt_motion;     // base frame -> frame t
    std::vector<KeypointSet> gt_keypoints;

    std::size_t num_frames() const { return frames.size(); }
    std::size_t width() const { return frames.empty() ? 0 : frames.front().width(); }
    std::size_t height() const { return frames.empty() ? 0 : frames.front().height(); }
};

namespace detail {

// Cosine interpolation between seeded waypoints: C1 motion whose parameters
// stay inside the configured bounds.
class MotionTrack {
public:
    MotionTrack(const SynthConfig& cfg, SplitMix64& rng) : waypoint_every_(cfg.waypoint_every) {
        const std::uint32_t n_way = cfg.num_frames / std::max(cfg.waypoint_every, 1u) + 2;
        const double max_rot = cfg.max_rotation_deg * 3.14159265358979323846 / 180.0;
        rot_.push_back(0.0);
        scale_.push_back(1.0);
        tx_.push_back(0.0);
        ty_.push_back(0.0);
        for (std::uint32_t i = 1; i < n_way; ++i) {
            rot_.push_back(rng.uniform(-max_rot, max_rot));
            scale_.push_back(1.0 + rng.uniform(-cfg.max_scale_delta, cfg.max_scale_delta));
            tx_.push_back(rng.uniform(-cfg.max_translation, cfg.max_translation));
            ty_.push_back(rng.uniform(-cfg.max_translation, cfg.max_translation));
        }
    }

    SimilarityTransform at(std::uint32_t t) const {
        const std::uint32_t seg = t / std::max(waypoint_every_, 1u);
        const double frac = waypoint_every_ == 0
                                ? 0.0
                                : static_cast<double>(t % waypoint_every_) / waypoint_every_;
        const double u = 0.5 - 0.5 * std::cos(frac * 3.14159265358979323846);
        auto lerp = [u](double a, double b) { return a + (b - a) * u; };
        SimilarityTransform tr;
        tr.rotation_rad = lerp(rot_[seg], rot_[seg + 1]);
        tr.scale = lerp(scale_[seg], scale_[seg + 1]);
        tr.translation = {lerp(tx_[seg], tx_[seg + 1]), lerp(ty_[seg], ty_[seg + 1])};
        return tr;
    }

private:
    std::uint32_t waypoint_every_;
    std::vector<double> rot_, scale_, tx_, ty_;
};

}  // namespace detail

// Deterministic synthetic talking-head stand-in: a smooth procedural texture
// rigidly moved by a seeded similarity transform track. Frames are evaluated
// directly from the continuous texture at the inverse-transformed coordinates,
// so ground-truth motion is exact (no resampling error).
inline Sequence synth_sequence(const SynthConfig& cfg) {
    if (cfg.num_frames < 1) throw InvalidInputError("synth_sequence needs >= 1 frame");
    if (cfg.grid_k < 1) throw InvalidInputError("synth_sequence needs grid_k >= 1");
    if (cfg.texture_octaves < 1) throw InvalidInputError("synth_sequence needs >= 1 octave");

    SplitMix64 rng(detail::hash_mix(cfg.seed ^ 0x6d72646163ULL));
    const detail::MotionTrack track(cfg, rng);

    Sequence seq;
    seq.fps = cfg.fps;
    seq.frames.reserve(cfg.num_frames);
    for (std::uint32_t t = 0; t < cfg.num_frames; ++t) {
        const SimilarityTransform tr = track.at(t);
        const SimilarityTransform inv = tr.inverse();
        Frame f({3, cfg.height, cfg.width});
        for (std::size_t y = 0; y < cfg.height; ++y) {
            for (std::size_t x = 0; x < cfg.width; ++x) {
                const Vec2 z{FlowFieldd::normalized_coord(x, cfg.width),
                             FlowFieldd::normalized_coord(y, cfg.height)};
                const Vec2 p = inv.apply(z);
                for (std::uint32_t c = 0; c < 3; ++c)
                    f.at(c, y, x) = fbm(cfg.seed, p.x, p.y, c, cfg.texture_octaves);
            }
        }
        seq.frames.push_back(std::move(f));
        seq.gt_motion.push_back(tr);
        seq.gt_keypoints.push_back(
            keypoints_from_motion(tr, cfg.grid_k, static_cast<std::int64_t>(t)));
    }
    return seq;
}

}  // namespace mrdac
