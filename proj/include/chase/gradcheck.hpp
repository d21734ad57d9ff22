#pragma once

#include <functional>

#include "chase/rng.hpp"
#include "chase/tensor.hpp"

namespace chase {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::int64_t worst_coordinate = -1;
    std::int64_t coordinates_checked = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

// Central-difference comparison of an analytic gradient. loss_fn must be
// deterministic (dropout disabled or masks fixed). Call with gradients
// already populated in params. Checks every coordinate when the total count
// is <= max_coords, otherwise a seeded sample of max_coords (>= 200).
GradCheckReport grad_check(const std::function<double()>& loss_fn, ParamSet& params,
                           double eps = 1e-5, std::int64_t max_coords = 400,
                           std::uint64_t sample_seed = 0);

}  // namespace chase
