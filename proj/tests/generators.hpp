#pragma once

// Seeded random instances for property tests.

#include "spatspec/covariance.hpp"
#include "spatspec/random.hpp"
#include "spatspec/weights.hpp"

#include <random>
#include <vector>

namespace gen {

using namespace spatspec;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Index integer(std::mt19937_64& rng, Index lo, Index hi) {
    return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

inline Matrix coords(std::mt19937_64& rng, Index n) {
    Matrix c(n, 2);
    for (Index i = 0; i < n; ++i) {
        c(i, 0) = uniform(rng, 0.0, 1.0);
        c(i, 1) = uniform(rng, 0.0, 1.0);
    }
    return c;
}

inline Vector normals(std::mt19937_64& rng, Index n) {
    std::normal_distribution<double> z;
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = z(rng);
    return v;
}

inline Matrix uniform_matrix(std::mt19937_64& rng, Index rows, Index cols, double lo, double hi) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = uniform(rng, lo, hi);
    return m;
}

/// Row-normalised kNN weights on random coordinates.
inline WeightMatrix knn(std::mt19937_64& rng, Index n, Index k = 0) {
    if (k == 0) k = std::max<Index>(1, std::min<Index>(n - 1, integer(rng, 1, 4)));
    return knn_weights(coords(rng, n), k, true);
}

/// Random non-negative sparse weights, row normalised.
inline WeightMatrix sparse_random(std::mt19937_64& rng, Index n, double density = 0.3) {
    std::vector<Triplet> t;
    for (Index i = 0; i < n; ++i) {
        bool any = false;
        for (Index j = 0; j < n; ++j) {
            if (i == j || uniform(rng, 0.0, 1.0) > density) continue;
            t.push_back({i, j, uniform(rng, 0.1, 1.0)});
            any = true;
        }
        if (!any) t.push_back({i, (i + 1) % n, 1.0});
    }
    return WeightMatrix(n, std::move(t)).row_normalized();
}

/// Symmetric 0/1 weights scaled to spectral radius one.
inline WeightMatrix symmetric_random(std::mt19937_64& rng, Index n) {
    Matrix d = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < i; ++j)
            if (uniform(rng, 0.0, 1.0) < 0.4) d(i, j) = d(j, i) = 1.0;
    for (Index i = 0; i + 1 < n; ++i) d(i, i + 1) = d(i + 1, i) = 1.0;
    return WeightMatrix::from_dense(d).spectrally_scaled(1.0);
}

struct ModelCase {
    CovarianceModel model;
    Vector gamma;
    std::vector<Matrix> ar;   ///< dense weights of the AR / SEM / MESS part
    std::vector<Matrix> ma;   ///< dense weights of the MA part
    int family;               ///< 0 SEM, 1 SMA, 2 SARMA, 3 MESS, 4 NPW
};

/// One of SEM / SMA / SARMA / MESS / NPW with parameters inside the stability region.
inline ModelCase model_case(std::mt19937_64& rng, Index n, int family = -1) {
    if (family < 0) family = static_cast<int>(integer(rng, 0, 4));
    ModelCase c;
    c.family = family;
    auto draw_list = [&](Index m) {
        std::vector<WeightMatrix> ws;
        for (Index j = 0; j < m; ++j) ws.push_back(j % 2 == 0 ? knn(rng, n) : sparse_random(rng, n));
        return ws;
    };
    auto dense = [](const std::vector<WeightMatrix>& ws) {
        std::vector<Matrix> out;
        for (const auto& w : ws) out.push_back(w.to_dense());
        return out;
    };
    auto coefficients = [&](Index m, double total) {
        Vector g(m);
        for (Index j = 0; j < m; ++j) g(j) = uniform(rng, -total, total) / static_cast<double>(m);
        return g;
    };
    switch (family) {
    case 0: {
        auto ws = draw_list(integer(rng, 1, 2));
        c.ar = dense(ws);
        c.gamma = coefficients(static_cast<Index>(ws.size()), 0.8);
        c.model = CovarianceModel::sem(ws);
        break;
    }
    case 1: {
        auto ws = draw_list(integer(rng, 1, 2));
        c.ma = dense(ws);
        c.gamma = coefficients(static_cast<Index>(ws.size()), 0.8);
        c.model = CovarianceModel::sma(ws);
        break;
    }
    case 2: {
        auto ar = draw_list(1);
        auto ma = draw_list(1);
        c.ar = dense(ar);
        c.ma = dense(ma);
        c.gamma = Vector{{uniform(rng, -0.7, 0.7), uniform(rng, -0.7, 0.7)}};
        c.model = CovarianceModel::sarma(ar, ma);
        break;
    }
    case 3: {
        auto ws = draw_list(integer(rng, 1, 2));
        c.ar = dense(ws);
        c.gamma = coefficients(static_cast<Index>(ws.size()), 1.0);
        c.model = CovarianceModel::mess(ws);
        break;
    }
    default: {
        const int order = static_cast<int>(integer(rng, 0, 2));
        Matrix d = uniform_matrix(rng, n, n, 0.0, 1.0);
        d = (0.5 * (d + d.transpose())).eval();
        Mask mask(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) mask(i, j) = i != j && uniform(rng, 0.0, 1.0) < 0.2;
        c.gamma = coefficients(order + 1, 0.15);
        c.model = CovarianceModel::nonpar_distance(d, mask, order);
        c.ar = {c.model.npw_weights(c.gamma).to_dense()};
        c.family = 4;
        break;
    }
    }
    return c;
}

/// Dense Sigma built from the case's dense weights, independently of the library.
inline Matrix dense_sigma(const ModelCase& c);

}  // namespace gen

#include "oracle.hpp"

namespace gen {

inline Matrix dense_sigma(const ModelCase& c) {
    Matrix b;
    switch (c.family) {
    case 0: b = oracle::sem_b(c.ar, c.gamma); break;
    case 1: b = oracle::sma_b(c.ma, c.gamma); break;
    case 2: b = oracle::sarma_b(c.ar, c.ma, c.gamma); break;
    case 3: b = oracle::mess_b(c.ar, c.gamma); break;
    default: b = oracle::sem_b(c.ar, Vector::Ones(1)); break;
    }
    return b * b.transpose();
}

}  // namespace gen
