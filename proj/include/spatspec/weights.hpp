#pragma once

#include "spatspec/common.hpp"

#include <Eigen/SparseCore>

#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <vector>

namespace spatspec {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Triplet {
    Index row;
    Index col;
    double value;
};

enum class NormalizationKind { none, row_stochastic, spectral_scaled };

struct Normalization {
    NormalizationKind kind = NormalizationKind::none;
    double factor = 0.0;  ///< c in W / (c * spectral radius); only meaningful for spectral_scaled
};

/**
 * @brief Sparse n x n spatial weight (network adjacency) matrix with zero diagonal.
 *
 * Entries are held as a coordinate list sorted by (row, col); a row-major CSR copy is
 * kept for products. Instances are immutable once constructed and safe to share
 * read-only across threads.
 */
class WeightMatrix {
public:
    WeightMatrix() = default;

    /// Throws std::invalid_argument on out-of-range indices, nonzero diagonal entries,
    /// duplicate (row, col) keys or non-finite values. Exact zeros are dropped.
    WeightMatrix(Index n, std::vector<Triplet> entries, Normalization normalization = {});

    static WeightMatrix from_dense(const Matrix& dense, Normalization normalization = {});

    [[nodiscard]] Index n() const noexcept { return n_; }
    [[nodiscard]] Index nnz() const noexcept { return static_cast<Index>(entries_.size()); }
    [[nodiscard]] const std::vector<Triplet>& entries() const noexcept { return entries_; }
    [[nodiscard]] const Normalization& normalization() const noexcept { return normalization_; }
    [[nodiscard]] const SparseMatrix& sparse() const noexcept { return csr_; }

    [[nodiscard]] Matrix to_dense() const;
    [[nodiscard]] Vector row_sums() const;
    [[nodiscard]] double coeff(Index row, Index col) const;

    /// Rows with at least one neighbour are scaled to sum to one; empty rows stay empty.
    [[nodiscard]] WeightMatrix row_normalized() const;
    /// W / (factor * rho(W)). Throws std::domain_error when rho(W) == 0.
    [[nodiscard]] WeightMatrix spectrally_scaled(double factor) const;

    [[nodiscard]] double spectral_radius() const;

    /// Checks the zero diagonal, row sums (row_stochastic) and, when requested,
    /// the spectral bound (spectral_scaled).
    [[nodiscard]] bool satisfies_invariants(bool check_spectral = false) const;

    [[nodiscard]] Matrix operator*(const Matrix& rhs) const { return csr_ * rhs; }
    [[nodiscard]] Vector operator*(const Vector& rhs) const { return csr_ * rhs; }

private:
    Index n_ = 0;
    std::vector<Triplet> entries_;
    Normalization normalization_;
    SparseMatrix csr_;
};

/// Spectral radius by power iteration (relative tolerance 1e-10, at most 10000 steps);
/// falls back to a dense eigensolve for n <= 512 when the iteration stalls.
[[nodiscard]] double spectral_radius(const SparseMatrix& w);
[[nodiscard]] double spectral_radius_dense(const Matrix& w);

/**
 * @brief k-nearest-neighbour weights from planar coordinates.
 *
 * Row i has exactly k entries at the k closest points (Euclidean), equal distances
 * resolved in favour of the lower index. Entries are 1, or 1/k when row_normalize.
 */
[[nodiscard]] WeightMatrix knn_weights(const Matrix& coords, Index k, bool row_normalize);

/// Raw distances, sparsity indicator and polynomial sieve coefficients a_0..a_r.
struct DistanceWeightSpec {
    Matrix distances;
    Mask mask;
    int order = 0;
    Vector coefficients;

    /// Throws std::invalid_argument when the mask diagonal is set, shapes disagree or
    /// a masked distance is not finite.
    void validate() const;
};

/// w_ij = sum_l a_l d_ij^l on masked off-diagonal cells, zero elsewhere.
[[nodiscard]] WeightMatrix build_distance_weights(const DistanceWeightSpec& spec);

struct NpwTruthOptions {
    bool symmetric_mask = false;  ///< mirror c_ij across the diagonal
    bool resample_degenerate = true;
    int max_resamples = 100;
};

struct NpwTruth {
    WeightMatrix weights;  ///< W = W* / (1.2 rho(W*))
    Matrix distances;      ///< symmetric, d_ij ~ U[-3, 3]
    Mask mask;             ///< I(c_ij < 0.05), false on the diagonal
};

/// Draws the nonparametric-weights Monte Carlo truth w*_ij = Phi(-d_ij) I(c_ij < 0.05).
[[nodiscard]] NpwTruth simulate_npw_truth(Index n, std::mt19937_64& rng,
                                          const NpwTruthOptions& options = {});

/**
 * @brief Linear combinations I + s * sum_j c_j W_j over a fixed list of weight matrices.
 *
 * Used for SAR lags S(lambda) and for the AR / MA parts of spatial error models. When
 * the list holds a single matrix of modest size, its eigenvalues are computed once
 * (lazily, thread-safe) and log-determinants become O(n) per call.
 */
class WeightStack {
public:
    static constexpr Index kSpectralCacheLimit = 250;

    WeightStack() = default;
    explicit WeightStack(std::vector<WeightMatrix> weights);

    [[nodiscard]] bool empty() const noexcept { return size() == 0; }
    [[nodiscard]] Index size() const noexcept;
    [[nodiscard]] Index n() const noexcept;
    [[nodiscard]] const std::vector<WeightMatrix>& weights() const;

    /// sum_j c_j W_j M
    [[nodiscard]] Matrix combine_apply(const Vector& coeffs, const Matrix& m) const;
    /// I + sign * sum_j c_j W_j
    [[nodiscard]] SparseMatrix shifted(const Vector& coeffs, double sign) const;
    [[nodiscard]] Matrix shifted_dense(const Vector& coeffs, double sign) const;
    /// (I + sign * sum_j c_j W_j) M, without forming the operator
    [[nodiscard]] Matrix shifted_apply(const Vector& coeffs, double sign, const Matrix& m) const;
    /// log |det(I + sign * sum_j c_j W_j)|, or nullopt when the operator is singular.
    [[nodiscard]] std::optional<double> log_abs_det_shifted(const Vector& coeffs, double sign) const;

private:
    struct State;
    std::shared_ptr<const State> state_;
};

/// Reads `row,col,value` triplet CSV (detected by that header) or dense CSV.
/// When n is not given, triplet files take n = 1 + largest index.
[[nodiscard]] WeightMatrix read_weights_csv(const std::filesystem::path& path,
                                            std::optional<Index> n = std::nullopt);
void write_weights_triplet_csv(const WeightMatrix& w, const std::filesystem::path& path);
void write_weights_dense_csv(const WeightMatrix& w, const std::filesystem::path& path);

}  // namespace spatspec
