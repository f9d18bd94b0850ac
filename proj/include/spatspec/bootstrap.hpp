#pragma once

#include "spatspec/spec_test.hpp"

#include <cstdint>
#include <random>

namespace spatspec {

/// xi = A(gamma_hat) (S(lambda_hat) y - theta_hat), demeaned. For SARARMA errors
/// A = (I + sum gamma_3 W_3)^{-1} (I - sum gamma_2 W_2).
[[nodiscard]] Vector extract_innovations(const Vector& y, const Vector& theta_hat, const Vector& lambda_hat,
                                         const Vector& gamma_hat, const WeightStack& sar,
                                         const CovarianceModel& model);

/// Regenerates outcomes y* = S(lambda)^{-1} (f_hat + A(gamma)^{-1} xi*) with xi* drawn with
/// replacement from xi_tilde. S(lambda) is factored once at construction.
class Regenerator {
public:
    Regenerator(Vector xi_tilde, Vector f_hat, const Vector& lambda_hat, const Vector& gamma_hat,
                const WeightStack& sar, const CovarianceModel& model);

    [[nodiscard]] Vector draw(std::mt19937_64& rng) const;
    /// y* for a given innovation vector.
    [[nodiscard]] Vector regenerate(const Vector& xi_star) const;

private:
    Vector xi_;
    Vector f_hat_;
    CovarianceFactor factor_;
    std::optional<Eigen::PartialPivLU<Matrix>> s_lu_;
};

[[nodiscard]] Vector resample_and_regenerate(const Vector& xi_tilde, const Vector& f_hat, const Vector& lambda_hat,
                                             const Vector& gamma_hat, const WeightStack& sar,
                                             const CovarianceModel& model, std::mt19937_64& rng);

struct BootstrapOptions {
    int b = 100;
    std::uint64_t seed = 0;
    int threads = 1;
    int max_redraws = 3;
};

/**
 * @brief Residual bootstrap p-values for both statistics.
 *
 * Replication j draws from make_rng(seed, j, attempt); a failed refit is redrawn up to
 * `max_redraws` times and then skipped. p* counts strict exceedances over the successful
 * replications.
 */
[[nodiscard]] BootstrapResult bootstrap_pvalues(const TestInput& input, const Matrix& psi, const TestResult& observed,
                                                const BootstrapOptions& boot, const TestOptions& options = {});
[[nodiscard]] BootstrapResult bootstrap_pvalues(const TestInput& input, const TestResult& observed,
                                                const BootstrapOptions& boot, const TestOptions& options = {});

}  // namespace spatspec
