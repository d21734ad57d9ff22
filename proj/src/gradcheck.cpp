#include "chase/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace chase {

GradCheckReport grad_check(const std::function<double()>& loss_fn, ParamSet& params,
                           double eps, std::int64_t max_coords,
                           std::uint64_t sample_seed) {
    std::int64_t total = params.coordinate_count();
    if (max_coords < 200) max_coords = 200;

    std::vector<std::int64_t> coords;
    if (total <= max_coords) {
        coords.resize(static_cast<std::size_t>(total));
        for (std::int64_t i = 0; i < total; ++i) coords[static_cast<std::size_t>(i)] = i;
    } else {
        Rng rng(sample_seed);
        Rng pick = rng.stream("gradcheck");
        coords.reserve(static_cast<std::size_t>(max_coords));
        for (std::int64_t i = 0; i < max_coords; ++i)
            coords.push_back(static_cast<std::int64_t>(pick.below(static_cast<std::uint64_t>(total))));
        std::sort(coords.begin(), coords.end());
        coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    }

    GradCheckReport report;
    report.coordinates_checked = static_cast<std::int64_t>(coords.size());
    for (std::int64_t c : coords) {
        double& w = params.coord(c);
        double saved = w;
        w = saved + eps;
        double fp = loss_fn();
        w = saved - eps;
        double fm = loss_fn();
        w = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericalError("grad_check: non-finite loss during perturbation");
        double numeric = (fp - fm) / (2.0 * eps);
        double analytic = params.grad_coord(c);
        double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-8});
        double rel = std::fabs(numeric - analytic) / denom;
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_coordinate = c;
            report.analytic_at_worst = analytic;
            report.numeric_at_worst = numeric;
        }
    }
    return report;
}

}  // namespace chase
