#pragma once

#include "spatspec/basis.hpp"
#include "spatspec/covariance.hpp"
#include "spatspec/qmle.hpp"
#include "spatspec/weights.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>

namespace spatspec {

struct TestInput {
    Vector y;
    Matrix x;
    BasisSpec basis;
    CovarianceModel cov;
    WeightStack sar;  ///< SAR lags in the outcome; empty for none
    NullFamily null_family;
    std::optional<ParamSpace> space;  ///< over (lambda, gamma); defaults per family when unset
};

struct TestOptions {
    FitOptions fit;
};

struct BootstrapResult {
    int b = 0;
    Vector t_star;    ///< successful replications, in replication order
    Vector t_a_star;
    double p_star = kNaN;
    double p_a_star = kNaN;
    std::uint64_t seed = 0;
    int n_failed = 0;
    int n_boundary = 0;  ///< replications whose refit ended on the box boundary
};

struct TestResult {
    double t_n = kNaN;
    double t_n_a = kNaN;
    double p_asym = kNaN;
    double p_asym_a = kNaN;
    double m_hat = kNaN;
    double m_tilde = kNaN;
    Index p = 0;
    FitResult fit_alt;
    NullFit fit_null;
    /// S(lambda_hat) y, f(x, alpha_hat) and theta_hat = Psi beta_hat.
    Vector sy;
    Vector f_hat;
    Vector theta_hat;
    std::optional<BootstrapResult> boot;
};

/// Failure inside run_test, naming the pipeline stage and the underlying error kind.
class StageError : public std::runtime_error {
public:
    enum class Stage { design, alternative_fit, null_fit, statistic, bootstrap };
    enum class Kind { invalid_input, singular_covariance, rank_deficient, all_evaluations_failed, other };

    StageError(Stage stage, Kind kind, const std::string& detail);

    [[nodiscard]] Stage stage() const noexcept { return stage_; }
    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] static const char* stage_name(Stage s);

private:
    Stage stage_;
    Kind kind_;
};

/// sigma2^{-1} v' Sigma(gamma)^{-1} u / n
[[nodiscard]] double compute_mhat(const Vector& u_hat, const Vector& v_hat, const CovarianceModel& model,
                                  const Vector& gamma_hat, double sigma2_hat);
/// sigma2^{-1} (u' Sigma^{-1} u - eta' Sigma^{-1} eta) / n
[[nodiscard]] double compute_mtilde(const Vector& u_hat, const Vector& eta_hat, const CovarianceModel& model,
                                    const Vector& gamma_hat, double sigma2_hat);

/// (n m - p) / sqrt(2 p)
[[nodiscard]] double standardize_statistic(double m, Index n, Index p);

/// Upper tail 1 - Phi(t) of the standard normal.
[[nodiscard]] double normal_upper_tail(double t);
/// z with 1 - Phi(z) = level.
[[nodiscard]] double normal_upper_quantile(double level);

/// Fits the series alternative, then the null on S(lambda_hat) y, and forms both statistics.
/// Every failure surfaces as StageError.
[[nodiscard]] TestResult run_test(const TestInput& input, const TestOptions& options = {});
/// Same, with the series design already built from input.x.
[[nodiscard]] TestResult run_test(const TestInput& input, const Matrix& psi, const TestOptions& options = {});

/// (p^{1/4} / sqrt(n)) h
[[nodiscard]] Vector local_alternative_shift(const Vector& h, Index p, Index n);

void to_json(nlohmann::json& j, const BootstrapResult& r);
void to_json(nlohmann::json& j, const TestResult& r);

}  // namespace spatspec
