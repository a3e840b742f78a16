#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mrdac/error.hpp"
#include "mrdac/tensor.hpp"

namespace mrdac {

// A differentiable operation under test. `forward` maps inputs to one output
// tensor; `backward` returns d(sum(upstream * output))/d(inputs[which]) with
// the same shape as that input.
struct DifferentiableOp {
    std::function<Tensord(const std::vector<Tensord>&)> forward;
    std::function<Tensord(const std::vector<Tensord>&, const Tensord& upstream,
                          std::size_t which)>
        backward;
};

// Central finite-difference check of an analytic gradient.
//
// The tensor output is reduced to a scalar L = sum(projection * output) so a
// single backward pass with `projection` as upstream yields the full Jacobian
// contraction. Returns the max over coordinates of
// |analytic - central difference| / max(|analytic|, |fd|, 1e-12).
inline double gradient_check(const DifferentiableOp& op, const std::vector<Tensord>& inputs,
                             double epsilon, std::size_t which_input,
                             const Tensord* projection = nullptr) {
    if (!(epsilon > 0.0) || epsilon > 1e-2)
        throw InvalidInputError("gradient_check epsilon must be in (0, 1e-2]");
    if (which_input >= inputs.size())
        throw InvalidInputError("gradient_check input index out of range");

    Tensord out = op.forward(inputs);
    if (!out.all_finite()) throw InvalidInputError("gradient_check forward output is not finite");

    Tensord proj = projection ? *projection : Tensord::full(out.shape(), 1.0);
    if (!proj.same_shape(out))
        throw DimensionError("gradient_check projection shape does not match output");

    const Tensord analytic = op.backward(inputs, proj, which_input);

    auto loss = [&](const std::vector<Tensord>& in) {
        Tensord o = op.forward(in);
        if (!o.all_finite())
            throw InvalidInputError("gradient_check forward output is not finite");
        double s = 0.0;
        for (std::size_t i = 0; i < o.numel(); ++i) s += proj[i] * o[i];
        return s;
    };

    std::vector<Tensord> work = inputs;
    Tensord& target = work[which_input];
    double max_rel = 0.0;
    for (std::size_t i = 0; i < target.numel(); ++i) {
        const double saved = target[i];
        target[i] = saved + epsilon;
        const double lp = loss(work);
        target[i] = saved - epsilon;
        const double lm = loss(work);
        target[i] = saved;
        const double fd = (lp - lm) / (2.0 * epsilon);
        const double a = analytic[i];
        const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-12});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace mrdac
