#pragma once

#include "spatspec/common.hpp"

#include <functional>

namespace spatspec {

struct OptimOptions {
    int grid_points_per_dim = 7;   ///< stage-1 lattice resolution for up to `grid_max_dim` dimensions
    int grid_max_dim = 3;
    int quasi_random_points = 200; ///< stage-1 Halton points above `grid_max_dim`
    int restarts = 3;              ///< Nelder-Mead runs, from the best stage-1 points
    double x_tol = 1e-6;           ///< simplex diameter
    double f_tol = 1e-9;           ///< spread of simplex values
    int max_evals_per_restart = 2000;
};

struct OptimResult {
    Vector x;
    double value = kInf;
    int n_evals = 0;
    int n_finite = 0;
    bool converged = false;
};

/// Returns +inf for infeasible points.
using Objective = std::function<double(const Vector&)>;

/**
 * @brief Two-stage box-constrained minimisation: a coarse design over the box, then
 * Nelder-Mead from the best design points with reflection at the box faces.
 *
 * Coordinates with lower == upper are held fixed and excluded from both stages.
 * Deterministic: no randomness, evaluation order depends only on the inputs.
 */
[[nodiscard]] OptimResult minimize_box(const Objective& f, const Vector& lower, const Vector& upper,
                                       const OptimOptions& options = {});

/// Point i (1-based) of the d-dimensional Halton sequence in [0, 1)^d.
[[nodiscard]] Vector halton_point(long long i, Index d);

}  // namespace spatspec
