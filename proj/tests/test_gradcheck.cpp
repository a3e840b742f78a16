#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mrdac/gradcheck.hpp"
#include "mrdac/tensor.hpp"
#include "test_util.hpp"

using namespace mrdac;

namespace {

DifferentiableOp elementwise_square() {
    DifferentiableOp op;
    op.forward = [](const std::vector<Tensord>& in) {
        Tensord out = in[0];
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= out[i];
        return out;
    };
    op.backward = [](const std::vector<Tensord>& in, const Tensord& up, std::size_t) {
        Tensord g = in[0];
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] = 2.0 * in[0][i] * up[i];
        return g;
    };
    return op;
}

// grid_sample with the flow packed as a rank-3 tensor (2 x H x W) so both
// inputs ride through the generic checker.
DifferentiableOp grid_sample_op(PaddingMode pad) {
    auto unpack = [](const Tensord& t) {
        FlowFieldd f(t.height(), t.width());
        for (std::size_t y = 0; y < t.height(); ++y)
            for (std::size_t x = 0; x < t.width(); ++x) {
                f.x(y, x) = t.at(0, y, x);
                f.y(y, x) = t.at(1, y, x);
            }
        return f;
    };
    DifferentiableOp op;
    op.forward = [unpack, pad](const std::vector<Tensord>& in) {
        return grid_sample(in[0], unpack(in[1]), pad);
    };
    op.backward = [unpack, pad](const std::vector<Tensord>& in, const Tensord& up,
                                std::size_t which) {
        auto g = grid_sample_backward(in[0], unpack(in[1]), pad, up);
        if (which == 0) return g.d_feature;
        Tensord packed({2, g.d_flow.height, g.d_flow.width});
        for (std::size_t y = 0; y < g.d_flow.height; ++y)
            for (std::size_t x = 0; x < g.d_flow.width; ++x) {
                packed.at(0, y, x) = g.d_flow.x(y, x);
                packed.at(1, y, x) = g.d_flow.y(y, x);
            }
        return packed;
    };
    return op;
}

Tensord pack_flow(const FlowFieldd& f) {
    Tensord t({2, f.height, f.width});
    for (std::size_t y = 0; y < f.height; ++y)
        for (std::size_t x = 0; x < f.width; ++x) {
            t.at(0, y, x) = f.x(y, x);
            t.at(1, y, x) = f.y(y, x);
        }
    return t;
}

}  // namespace

TEST_CASE("gradient_check on an elementwise square is near machine accurate") {
    const Tensord x({3}, {1.0, 2.0, 3.0});
    CHECK(gradient_check(elementwise_square(), {x}, 1e-6, 0) <= 1e-6);
}

TEST_CASE("gradient_check validates its arguments") {
    const Tensord x({3}, {1.0, 2.0, 3.0});
    CHECK_THROWS_AS(gradient_check(elementwise_square(), {x}, 0.0, 0), InvalidInputError);
    CHECK_THROWS_AS(gradient_check(elementwise_square(), {x}, 1e-1, 0), InvalidInputError);
    CHECK_THROWS_AS(gradient_check(elementwise_square(), {x}, 1e-6, 2), InvalidInputError);

    DifferentiableOp bad = elementwise_square();
    bad.forward = [](const std::vector<Tensord>&) {
        return Tensord({1}, {std::nan("")});
    };
    CHECK_THROWS_AS(gradient_check(bad, {x}, 1e-6, 0), InvalidInputError);
}

TEST_CASE("grid_sample gradients pass finite differences at interior points") {
    testutil::Rng rng(31);
    for (int trial = 0; trial < 25; ++trial) {
        const Tensord feat = testutil::random_tensor(rng, {2, 5, 4});
        const Tensord flow = pack_flow(testutil::random_interior_flow(rng, 5, 4, 5, 4));
        const Tensord proj = testutil::random_tensor(rng, {2, 5, 4});
        const PaddingMode pad = trial % 2 ? PaddingMode::ZEROS : PaddingMode::BORDER;

        CHECK(gradient_check(grid_sample_op(pad), {feat, flow}, 1e-6, 0, &proj) <= 1e-4);
        CHECK(gradient_check(grid_sample_op(pad), {feat, flow}, 1e-6, 1, &proj) <= 1e-4);
    }
}

TEST_CASE("bilinear_resize gradient matches finite differences") {
    testutil::Rng rng(37);
    DifferentiableOp op;
    op.forward = [](const std::vector<Tensord>& in) { return bilinear_resize(in[0], 7, 6); };
    op.backward = [](const std::vector<Tensord>& in, const Tensord& up, std::size_t) {
        return bilinear_resize_backward(in[0], 7, 6, up);
    };
    for (int trial = 0; trial < 10; ++trial) {
        const Tensord feat = testutil::random_tensor(rng, {2, 4, 3});
        const Tensord proj = testutil::random_tensor(rng, {2, 7, 6});
        CHECK(gradient_check(op, {feat}, 1e-6, 0, &proj) <= 1e-4);
    }
}
