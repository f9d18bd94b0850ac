#pragma once

#include "spatspec/common.hpp"
#include "spatspec/weights.hpp"

#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace spatspec {

class CovarianceFactor;
struct SigmaEval;
class CovarianceModel;
CovarianceFactor make_factor(const CovarianceModel& model, const Vector& gamma);
SigmaEval eval_sigma(const CovarianceModel& model, const Vector& gamma);

/// u = sum_j gamma_j W_j u + xi
struct SemFamily {
    std::vector<WeightMatrix> weights;
};

/// u = sum_j gamma_j W_j xi + xi
struct SmaFamily {
    std::vector<WeightMatrix> weights;
};

/// AR coefficients first, then MA coefficients.
struct SarmaFamily {
    std::vector<WeightMatrix> ar_weights;
    std::vector<WeightMatrix> ma_weights;
};

/// u = exp(sum_j gamma_j W_j) xi
struct MessFamily {
    std::vector<WeightMatrix> weights;
};

/// SEM with W(tau)_ij = sum_l tau_l d_ij^l on the masked cells.
struct NonparDistanceFamily {
    Matrix distances;
    Mask mask;
    int order = 0;
};

enum class IsotropicKind { matern, powered_exp };

/// Sigma_ij = delta(d_ij, gamma). Matern: gamma = (smoothness nu, range);
/// powered exponential: gamma = (scale, range, power).
struct IsotropicFamily {
    IsotropicKind kind = IsotropicKind::matern;
    Matrix distances;
};

/**
 * @brief Error-covariance structure Sigma(gamma), with sigma^2 kept outside.
 *
 * Cheap to copy: the family data and any cached spectra are shared.
 */
class CovarianceModel {
public:
    using Family = std::variant<SemFamily, SmaFamily, SarmaFamily, MessFamily, NonparDistanceFamily,
                                IsotropicFamily>;

    CovarianceModel() = default;
    explicit CovarianceModel(Family family);

    static CovarianceModel iid(Index n);
    static CovarianceModel sem(std::vector<WeightMatrix> weights);
    static CovarianceModel sma(std::vector<WeightMatrix> weights);
    static CovarianceModel sarma(std::vector<WeightMatrix> ar, std::vector<WeightMatrix> ma);
    static CovarianceModel mess(std::vector<WeightMatrix> weights);
    static CovarianceModel nonpar_distance(Matrix distances, Mask mask, int order);
    static CovarianceModel isotropic(IsotropicKind kind, Matrix distances);

    [[nodiscard]] Index n() const noexcept;
    [[nodiscard]] Index params_dim() const noexcept;
    [[nodiscard]] const Family& family() const;
    [[nodiscard]] std::string family_name() const;

    /// For NonparDistance: the weight matrix W(tau).
    [[nodiscard]] WeightMatrix npw_weights(const Vector& tau) const;

    struct State;

private:
    friend CovarianceFactor make_factor(const CovarianceModel&, const Vector&);
    friend SigmaEval eval_sigma(const CovarianceModel&, const Vector&);
    std::shared_ptr<const State> state_;
};

/**
 * @brief A(gamma) with Sigma(gamma)^{-1} = A' A, plus log|Sigma(gamma)|.
 *
 * For the SARMA / MESS / nonparametric-weight families A is the structural operator
 * (I + sum gamma W_ma)^{-1} (I - sum gamma W_ar) or exp(-sum gamma W); for isotropic
 * families A = L^{-1} with Sigma = L L'. Quadratic forms a' Sigma^{-1} b are (A a)' (A b).
 */
class CovarianceFactor {
public:
    /// A M
    [[nodiscard]] Matrix whiten(const Matrix& m) const;
    [[nodiscard]] Vector whiten(const Vector& v) const;
    /// A^{-1} M
    [[nodiscard]] Matrix unwhiten(const Matrix& m) const;
    [[nodiscard]] Vector unwhiten(const Vector& v) const;
    [[nodiscard]] double log_det() const noexcept { return log_det_; }
    [[nodiscard]] const Vector& gamma() const noexcept { return gamma_; }

    class Impl;

private:
    friend CovarianceFactor make_factor(const CovarianceModel&, const Vector&);
    CovarianceFactor(std::shared_ptr<const Impl> impl, double log_det, Vector gamma);

    std::shared_ptr<const Impl> impl_;
    double log_det_ = 0.0;
    Vector gamma_;
};

/// Throws SingularCovariance when Sigma(gamma) is singular or not positive definite,
/// std::invalid_argument on a wrong parameter count, std::domain_error for an invalid
/// isotropic parameter.
[[nodiscard]] CovarianceFactor make_factor(const CovarianceModel& model, const Vector& gamma);

struct SigmaEval {
    Matrix sigma;
    double log_det = 0.0;
    Vector gamma;
    double asymmetry = 0.0;  ///< max |Sigma - Sigma'| / max |Sigma| before symmetrisation
};

/// Dense Sigma(gamma) (symmetrised once) with log|Sigma| from its Cholesky factor; an
/// eigensolve is the fallback and supplies the smallest eigenvalue on failure.
[[nodiscard]] SigmaEval eval_sigma(const CovarianceModel& model, const Vector& gamma);

/// Same as eval_sigma, restricted to the nonparametric distance-weights family.
[[nodiscard]] SigmaEval eval_sigma_npw(const CovarianceModel& model, const Vector& tau);

/// a' Sigma(gamma)^{-1} b via the factor; Sigma^{-1} is never formed.
[[nodiscard]] Matrix sigma_inv_quadform(const CovarianceModel& model, const Vector& gamma,
                                        const Matrix& a, const Matrix& b);
[[nodiscard]] Matrix sigma_inv_quadform(const CovarianceFactor& factor, const Matrix& a,
                                        const Matrix& b);

/// Symmetric E with E E' = Sigma^{-1}: E = Q Lambda^{-1/2} Q' from Sigma = Q Lambda Q'.
[[nodiscard]] Matrix symmetric_factor(const CovarianceModel& model, const Vector& gamma);

/// Matern or powered-exponential correlation at distance `distance`; 1 (Matern) or
/// gamma_1 (powered exponential) at zero lag.
[[nodiscard]] double isotropic_covariance(IsotropicKind kind, double distance, const Vector& gamma);

/// exp(M) by scaling and squaring with a degree-13 Pade approximant.
[[nodiscard]] Matrix matrix_exp(const Matrix& m);

}  // namespace spatspec
