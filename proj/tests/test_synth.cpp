#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mrdac/motion.hpp"
#include "mrdac/synth.hpp"
#include "test_util.hpp"

using namespace mrdac;

TEST_CASE("zero-motion sequences repeat frame 0 bitwise") {
    SynthConfig cfg;
    cfg.max_rotation_deg = 0.0;
    cfg.max_translation = 0.0;
    cfg.max_scale_delta = 0.0;
    cfg.num_frames = 6;
    const Sequence seq = synth_sequence(cfg);
    REQUIRE(seq.num_frames() == 6);
    for (std::size_t t = 1; t < 6; ++t)
        for (std::size_t i = 0; i < seq.frames[0].numel(); ++i)
            REQUIRE(seq.frames[t][i] == seq.frames[0][i]);
}

TEST_CASE("same seed gives bit-identical sequences") {
    SynthConfig cfg;
    cfg.seed = 7;
    cfg.num_frames = 8;
    const Sequence a = synth_sequence(cfg);
    const Sequence b = synth_sequence(cfg);
    REQUIRE(a.num_frames() == b.num_frames());
    for (std::size_t t = 0; t < a.num_frames(); ++t) {
        for (std::size_t i = 0; i < a.frames[t].numel(); ++i)
            REQUIRE(a.frames[t][i] == b.frames[t][i]);
        for (std::size_t k = 0; k < a.gt_keypoints[t].size(); ++k) {
            REQUIRE(a.gt_keypoints[t].points[k].position.x ==
                    b.gt_keypoints[t].points[k].position.x);
            REQUIRE(a.gt_keypoints[t].points[k].position.y ==
                    b.gt_keypoints[t].points[k].position.y);
        }
    }

    cfg.seed = 8;
    const Sequence c = synth_sequence(cfg);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.frames[0].numel(); ++i)
        any_diff |= a.frames[0][i] != c.frames[0][i];
    CHECK(any_diff);
}

TEST_CASE("frames and keypoints stay in range") {
    SynthConfig cfg;
    cfg.seed = 11;
    cfg.num_frames = 16;
    const Sequence seq = synth_sequence(cfg);
    for (const Frame& f : seq.frames)
        for (std::size_t i = 0; i < f.numel(); ++i) {
            REQUIRE(f[i] >= 0.0);
            REQUIRE(f[i] <= 1.0);
        }
    // motion bounds keep ground-truth keypoints strictly inside [-1,1]: the
    // construction clamp must never fire and corrupt correspondences
    for (const KeypointSet& ks : seq.gt_keypoints)
        for (const Keypoint& p : ks.points) {
            REQUIRE(std::abs(p.position.x) < 1.0);
            REQUIRE(std::abs(p.position.y) < 1.0);
            REQUIRE(p.jacobian.has_value());
        }
}

TEST_CASE("pure translation shifts content; shifting back recovers frame 0") {
    SynthConfig cfg;
    cfg.seed = 5;
    cfg.max_rotation_deg = 0.0;
    cfg.max_scale_delta = 0.0;
    cfg.max_translation = 0.05;
    cfg.num_frames = 16;
    const Sequence seq = synth_sequence(cfg);

    const std::uint32_t t = 10;
    const SimilarityTransform tr = seq.gt_motion[t];
    FlowFieldd flow(64, 64);
    for (std::size_t y = 0; y < 64; ++y)
        for (std::size_t x = 0; x < 64; ++x) {
            const Vec2 z{FlowFieldd::normalized_coord(x, 64),
                         FlowFieldd::normalized_coord(y, 64)};
            const Vec2 p = tr.apply(z);
            flow.x(y, x) = p.x;
            flow.y(y, x) = p.y;
        }
    const Tensord back = grid_sample(seq.frames[t], flow);
    double mse = 0.0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 6; y < 58; ++y)
            for (std::size_t x = 6; x < 58; ++x) {
                const double d = back.at(c, y, x) - seq.frames[0].at(c, y, x);
                mse += d * d;
                ++n;
            }
    const double psnr_db = 10.0 * std::log10(1.0 / (mse / static_cast<double>(n)));
    CHECK(psnr_db >= 40.0);
}

TEST_CASE("sparse_to_dense warping beats the identity flow on synthetic pairs") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SynthConfig cfg;
        cfg.seed = seed;
        const Sequence seq = synth_sequence(cfg);
        for (std::uint32_t t : {8u, 24u, 40u}) {
            KeypointSet rk = seq.gt_keypoints[0], tk = seq.gt_keypoints[t];
            for (auto& p : rk.points) p.jacobian.reset();
            for (auto& p : tk.points) p.jacobian.reset();
            SparseToDenseParams prm;
            prm.kp_variance = 0.03;
            prm.beta = 1.0;
            const DenseMotion m = sparse_to_dense(rk, tk, 64, 64, prm);
            const Tensord warped = grid_sample(seq.frames[0], m.flow);
            auto mse = [](const Tensord& a, const Tensord& b) {
                double s = 0.0;
                for (std::size_t i = 0; i < a.numel(); ++i) {
                    const double d = a[i] - b[i];
                    s += d * d;
                }
                return s / static_cast<double>(a.numel());
            };
            REQUIRE(mse(warped, seq.frames[t]) < mse(seq.frames[0], seq.frames[t]));
        }
    }
}

TEST_CASE("synth configuration validation") {
    SynthConfig cfg;
    cfg.num_frames = 0;
    CHECK_THROWS_AS(synth_sequence(cfg), InvalidInputError);
    cfg.num_frames = 2;
    cfg.grid_k = 0;
    CHECK_THROWS_AS(synth_sequence(cfg), InvalidInputError);
    cfg.grid_k = 3;
    cfg.texture_octaves = 0;
    CHECK_THROWS_AS(synth_sequence(cfg), InvalidInputError);
}
