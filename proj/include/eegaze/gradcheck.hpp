#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "eegaze/error.hpp"
#include "eegaze/layers.hpp"
#include "eegaze/tensor.hpp"

namespace eegaze {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_target;
    std::size_t entries_checked = 0;
};

namespace detail {

inline double rel_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
    return std::abs(analytic - numeric) / denom;
}

} // namespace detail

// Central-difference check of an analytic backward pass. The probe loss is a
// fixed random linear functional of the output (summing outputs instead
// would let sign errors cancel). `fwd` must be a pure map from input to
// output for fixed parameters; `bwd` takes dL/d(output) and must return
// dL/d(input) and fill every parameter's grad buffer. The numeric side uses
// only `fwd`, so it is independent of the backward path it validates.
// Meant to run on double tensors; float roundoff drowns the comparison.
template <typename T, typename Fwd, typename Bwd>
GradCheckResult gradcheck(Fwd&& fwd, Bwd&& bwd, Tensor<T>& input,
                          const std::vector<ParamRef<T>>& params, T eps,
                          std::uint64_t probe_seed) {
    if (!(eps > T(0))) throw std::invalid_argument("gradcheck: eps must be > 0");

    Tensor<T> out0 = fwd(static_cast<const Tensor<T>&>(input));
    SplitMix64 rng(probe_seed);
    Tensor<T> probe = Tensor<T>::uniform(out0.shape(), T(-1), T(1), rng);

    auto probe_loss = [&](const Tensor<T>& out) {
        double acc = 0.0;
        for (std::size_t i = 0; i < out.numel(); ++i)
            acc += static_cast<double>(probe[i]) * static_cast<double>(out[i]);
        return acc;
    };

    Tensor<T> grad_input = bwd(probe);
    if (grad_input.shape() != input.shape())
        throw Error("gradcheck: backward returned grad of shape " + grad_input.shape().str() +
                    " for input " + input.shape().str());

    GradCheckResult result;
    auto check_entry = [&](T& slot, double analytic, const std::string& target, std::size_t idx) {
        const T saved = slot;
        slot = saved + eps;
        const double lp = probe_loss(fwd(static_cast<const Tensor<T>&>(input)));
        slot = saved - eps;
        const double lm = probe_loss(fwd(static_cast<const Tensor<T>&>(input)));
        slot = saved;
        if (!std::isfinite(lp) || !std::isfinite(lm))
            throw Error("gradcheck: non-finite probe loss at " + target);
        const double numeric = (lp - lm) / (2.0 * static_cast<double>(eps));
        const double err = detail::rel_error(analytic, numeric);
        ++result.entries_checked;
        if (err > result.max_rel_error) {
            result.max_rel_error = err;
            result.worst_target = target + "[" + std::to_string(idx) + "]";
        }
    };

    for (std::size_t i = 0; i < input.numel(); ++i)
        check_entry(input[i], static_cast<double>(grad_input[i]), "input", i);
    for (const auto& p : params) {
        if (!p.tensor->has_grad())
            throw Error("gradcheck: backward left no grad on " + p.name);
        for (std::size_t i = 0; i < p.tensor->numel(); ++i)
            check_entry((*p.tensor)[i], static_cast<double>(p.tensor->grad()[i]), p.name, i);
    }
    return result;
}

} // namespace eegaze
