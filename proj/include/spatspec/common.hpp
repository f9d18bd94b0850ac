#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace spatspec {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Raised when Σ(γ) (or one of the spatial operators defining it) is singular or
/// not positive definite at the requested parameter.
class SingularCovariance : public std::runtime_error {
public:
    SingularCovariance(const std::string& what, Vector gamma, double min_eigenvalue = kNaN)
        : std::runtime_error(what), gamma_(std::move(gamma)), min_eigenvalue_(min_eigenvalue) {}

    [[nodiscard]] const Vector& gamma() const noexcept { return gamma_; }
    /// Smallest eigenvalue of Σ when the failure was diagnosed by an eigensolve, NaN otherwise.
    [[nodiscard]] double min_eigenvalue() const noexcept { return min_eigenvalue_; }

private:
    Vector gamma_;
    double min_eigenvalue_;
};

/// The (whitened) regressor matrix is numerically rank deficient.
class RankDeficientDesign : public std::runtime_error {
public:
    RankDeficientDesign(const std::string& what, double condition)
        : std::runtime_error(what), condition_(condition) {}

    [[nodiscard]] double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// No point of the parameter box produced a finite concentrated likelihood.
class AllEvaluationsFailed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, dimensions, JSON).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace spatspec
