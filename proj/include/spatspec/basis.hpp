#pragma once

#include "spatspec/common.hpp"

#include "json.hpp"

#include <variant>
#include <vector>

namespace spatspec {

struct PowerBasis {
    int degree = 3;
};

/// Level 1: (1, sin x1, sin x1/2, sin x2, sin x2/2, cos x1, cos x1/2, cos x2, cos x2/2).
/// Level 2 appends (sin x1^2, cos x1^2, sin x2^2, cos x2^2).
struct TrigBasis {
    int level = 1;
};

/// Additive B-splines of the given order (degree + 1) per coordinate. Interior knots are
/// either supplied explicitly or placed equally spaced over each coordinate's range.
struct BSplineBasis {
    int order = 4;
    int n_knots = 1;
    std::vector<double> knots;  ///< explicit interior knots; overrides n_knots when non-empty
};

struct BasisSpec {
    std::variant<PowerBasis, TrigBasis, BSplineBasis> family = PowerBasis{};
    bool include_intercept = true;
    bool standardize = false;  ///< scale non-constant columns to unit mean square

    static BasisSpec power(int degree) { return {PowerBasis{degree}}; }
    static BasisSpec trig(int level) { return {TrigBasis{level}}; }
    static BasisSpec bspline(int order, int n_knots) { return {BSplineBasis{order, n_knots, {}}}; }
};

struct DesignMatrix {
    Matrix psi;
    BasisSpec spec;

    [[nodiscard]] Index p() const noexcept { return psi.cols(); }
    [[nodiscard]] bool has_zero_column() const;
};

/// Number of series terms p for k regressors. Power: C(k + degree, degree).
[[nodiscard]] Index count_terms(const BasisSpec& spec, Index k);

/// Builds the n x p series design Psi. Throws std::invalid_argument for non-finite x, a
/// trig basis with k != 2, or a B-spline coordinate with zero range. Rank deficiency is
/// left to the estimators.
[[nodiscard]] DesignMatrix build_design(const Matrix& x, const BasisSpec& spec);

/// Exponent vectors of all monomials with total degree <= degree, ordered by total degree
/// and, within a degree, by decreasing power of the leading coordinates.
[[nodiscard]] std::vector<std::vector<int>> monomial_exponents(Index k, int degree);

/// Values of the full B-spline basis (n_knots + order functions) at x.
[[nodiscard]] Vector bspline_basis_row(double x, const std::vector<double>& knot_vector, int order);

void to_json(nlohmann::json& j, const BasisSpec& spec);
void from_json(const nlohmann::json& j, BasisSpec& spec);

}  // namespace spatspec
