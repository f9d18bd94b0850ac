#pragma once

#include "spatspec/common.hpp"
#include "spatspec/covariance.hpp"
#include "spatspec/optimize.hpp"
#include "spatspec/weights.hpp"

#include "json.hpp"

#include <functional>
#include <vector>

namespace spatspec {

/**
 * @brief Componentwise box for gamma, or for phi = (lambda, gamma) with SAR lags first.
 *
 * A coordinate with lower == upper is fixed. Coordinates flagged in `log_scale` are
 * searched in log space and must have a positive lower bound.
 */
struct ParamSpace {
    Vector lower;
    Vector upper;
    std::vector<bool> log_scale;

    [[nodiscard]] Index dim() const noexcept { return lower.size(); }
    [[nodiscard]] bool is_log(Index i) const;
    /// Throws std::invalid_argument on mismatched sizes, lower > upper, non-finite bounds
    /// or a non-positive lower bound on a log-scale coordinate.
    void validate() const;

    static ParamSpace box(Vector lower, Vector upper);
    static ParamSpace fixed(const Vector& value);
    static ParamSpace concat(const ParamSpace& first, const ParamSpace& second);
    /// [-0.95, 0.95] per coefficient for SEM/SMA/SARMA, [-2, 2] for MESS, [-5, 5] for the
    /// distance sieve, Matern smoothness [0.1, 10] and range [1e-3, 1e3] on log scale,
    /// powered exponential scale and range [1e-3, 1e3] on log scale and power [0.05, 2].
    static ParamSpace default_for(const CovarianceModel& model);
    /// [-0.95, 0.95] per SAR lag.
    static ParamSpace default_sar(Index lags);
};

struct FitOptions {
    OptimOptions optim;
    double condition_limit = 1e12;  ///< bound on cond(Psi' Sigma^{-1} Psi) after column scaling
    double boundary_tol = 1e-6;
    /// Called once per likelihood evaluation with (eval index, phi, value); value is +inf
    /// at infeasible points.
    std::function<void(int, const Vector&, double)> trace;
};

struct FitResult {
    Vector gamma_hat;
    Vector lambda_hat;
    Vector beta_hat;
    double sigma2_hat = kNaN;
    double neg_loglik = kNaN;
    int n_evals = 0;
    bool converged = false;
    bool at_boundary = false;
};

struct Profile {
    Vector beta;
    double sigma2 = kNaN;
};

/// GLS coefficients and mean whitened residual square at gamma. Throws RankDeficientDesign
/// when the condition bound fails.
[[nodiscard]] Profile profile_beta_sigma(const Vector& y, const Matrix& psi, const CovarianceModel& model,
                                         const Vector& gamma, double condition_limit = 1e12);
[[nodiscard]] Profile profile_beta_sigma(const Vector& y, const Matrix& psi, const CovarianceFactor& factor,
                                         double condition_limit = 1e12);

/// ln(2 pi) + ln sigma2(gamma) + ln|Sigma(gamma)| / n
[[nodiscard]] double concentrated_loglik(const Vector& y, const Matrix& psi, const CovarianceModel& model,
                                         const Vector& gamma, double condition_limit = 1e12);

/// As concentrated_loglik applied to S(lambda) y, minus 2 ln|det S(lambda)| / n.
[[nodiscard]] double concentrated_loglik_sar(const Vector& y, const Matrix& psi, const WeightStack& sar,
                                             const CovarianceModel& model, const Vector& lambda,
                                             const Vector& gamma, double condition_limit = 1e12);

/// When no point is feasible: SingularCovariance if every failure was a singular operator,
/// RankDeficientDesign if every failure was the condition bound, else AllEvaluationsFailed.
[[nodiscard]] FitResult fit_qmle(const Vector& y, const Matrix& psi, const CovarianceModel& model,
                                 const ParamSpace& space, const FitOptions& options = {});

/// Jointly over phi = (lambda, gamma); `space` covers lambda first.
[[nodiscard]] FitResult fit_qmle_sar(const Vector& y, const Matrix& psi, const WeightStack& sar,
                                     const CovarianceModel& model, const ParamSpace& space,
                                     const FitOptions& options = {});

/// SEM with W(tau) = sum_l tau_l d^l on the masked cells; tau has order + 1 entries.
[[nodiscard]] FitResult fit_qmle_npw(const Vector& y, const Matrix& psi, const Matrix& distances,
                                     const Mask& mask, int order, const ParamSpace& space,
                                     const FitOptions& options = {});

/**
 * @brief Parametric null family f(x, alpha).
 *
 * `linear` is alpha_0 + x alpha_1; `constant` is alpha_0; `known` evaluates the linear
 * form at the supplied alpha without estimation; `custom` is fitted by Levenberg-Marquardt
 * from `start`.
 */
struct NullFamily {
    enum class Kind { linear, constant, known, custom };
    Kind kind = Kind::linear;
    Vector alpha;  ///< known: the fixed coefficients; custom: the starting point
    std::function<Vector(const Matrix& x, const Vector& alpha)> f;

    static NullFamily linear() { return {}; }
    static NullFamily constant() { return {Kind::constant, {}, {}}; }
    static NullFamily known(Vector alpha) { return {Kind::known, std::move(alpha), {}}; }
    static NullFamily custom(std::function<Vector(const Matrix&, const Vector&)> f, Vector start) {
        return {Kind::custom, std::move(start), std::move(f)};
    }
    [[nodiscard]] std::string name() const;
};

struct NullFit {
    Vector alpha_hat;
    Vector residuals;
    Vector fitted;
};

/// Least squares fit of f(x, alpha) to y_adjusted; residuals = y_adjusted - fitted.
[[nodiscard]] NullFit fit_null(const Vector& y_adjusted, const Matrix& x, const NullFamily& family);

void to_json(nlohmann::json& j, const FitResult& r);
void to_json(nlohmann::json& j, const NullFit& r);
void to_json(nlohmann::json& j, const ParamSpace& s);
void from_json(const nlohmann::json& j, ParamSpace& s);

}  // namespace spatspec
