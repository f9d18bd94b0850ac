#pragma once

// Brute-force dense reference implementations. They form Sigma, its explicit inverse and
// determinants directly and share no code with the library's factor-based routines.

#include "spatspec/common.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace oracle {

using spatspec::Index;
using spatspec::Matrix;
using spatspec::Vector;

inline Matrix weighted_sum(const std::vector<Matrix>& ws, const Vector& c, Index offset = 0) {
    const Index n = ws.empty() ? 0 : ws.front().rows();
    Matrix out = Matrix::Zero(n, n);
    for (std::size_t j = 0; j < ws.size(); ++j) out += c(offset + static_cast<Index>(j)) * ws[j];
    return out;
}

/// exp(M) by a long Taylor series after halving; adequate for the small norms used in tests.
inline Matrix taylor_exp(const Matrix& m) {
    int halvings = 0;
    double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
    while (norm > 0.05) {
        norm /= 2.0;
        ++halvings;
    }
    const Matrix a = m / std::pow(2.0, halvings);
    Matrix term = Matrix::Identity(m.rows(), m.cols());
    Matrix sum = term;
    for (int k = 1; k < 30; ++k) {
        term = term * a / static_cast<double>(k);
        sum += term;
    }
    for (int i = 0; i < halvings; ++i) sum = sum * sum;
    return sum;
}

/// B with Sigma = B B' for SEM / SMA / SARMA / MESS given dense weights.
inline Matrix sem_b(const std::vector<Matrix>& w, const Vector& g) {
    const Index n = w.front().rows();
    return (Matrix::Identity(n, n) - weighted_sum(w, g)).inverse();
}
inline Matrix sma_b(const std::vector<Matrix>& w, const Vector& g) {
    const Index n = w.front().rows();
    return Matrix::Identity(n, n) + weighted_sum(w, g);
}
inline Matrix sarma_b(const std::vector<Matrix>& ar, const std::vector<Matrix>& ma, const Vector& g) {
    const Index n = ar.front().rows();
    const Matrix eye = Matrix::Identity(n, n);
    return (eye - weighted_sum(ar, g)).inverse() * (eye + weighted_sum(ma, g, static_cast<Index>(ar.size())));
}
inline Matrix mess_b(const std::vector<Matrix>& w, const Vector& g) { return taylor_exp(weighted_sum(w, g)); }

inline double log_abs_det(const Matrix& m) { return std::log(std::abs(m.fullPivLu().determinant())); }

struct Profile {
    Vector beta;
    double sigma2;
};

/// Normal equations with the explicit inverse of Sigma.
inline Profile gls(const Vector& y, const Matrix& psi, const Matrix& sigma) {
    const Matrix si = sigma.inverse();
    const Matrix g = psi.transpose() * si * psi;
    Profile out;
    out.beta = g.inverse() * (psi.transpose() * si * y);
    const Vector r = y - psi * out.beta;
    out.sigma2 = r.dot(si * r) / static_cast<double>(y.size());
    return out;
}

inline double loglik(const Vector& y, const Matrix& psi, const Matrix& sigma) {
    const double two_pi = 2.0 * 3.14159265358979323846;
    return std::log(two_pi) + std::log(gls(y, psi, sigma).sigma2) + log_abs_det(sigma) / static_cast<double>(y.size());
}

inline double loglik_sar(const Vector& y, const Matrix& psi, const Matrix& sigma, const std::vector<Matrix>& sar,
                         const Vector& lambda) {
    const Index n = y.size();
    const Matrix s = Matrix::Identity(n, n) - weighted_sum(sar, lambda);
    return loglik(s * y, psi, sigma) - 2.0 * log_abs_det(s) / static_cast<double>(n);
}

inline double mhat(const Vector& u, const Vector& v, const Matrix& sigma, double sigma2) {
    return v.dot(sigma.inverse() * u) / (sigma2 * static_cast<double>(u.size()));
}

inline double mtilde(const Vector& u, const Vector& eta, const Matrix& sigma, double sigma2) {
    const Matrix si = sigma.inverse();
    return (u.dot(si * u) - eta.dot(si * eta)) / (sigma2 * static_cast<double>(u.size()));
}

/// n^{-1} y' E' M E y with M = I - E Psi (Psi' E' E Psi)^{-1} Psi' E'.
inline double sigma2_projection_form(const Vector& y, const Matrix& psi, const Matrix& e) {
    const Index n = y.size();
    const Matrix ep = e * psi;
    const Matrix m = Matrix::Identity(n, n) - ep * (ep.transpose() * ep).inverse() * ep.transpose();
    const Vector ey = e * y;
    return ey.dot(m * ey) / static_cast<double>(n);
}

inline double relative_error(double got, double want) {
    return std::abs(got - want) / std::max(1.0, std::abs(want));
}

}  // namespace oracle
