#include "spatspec/weights.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <string>

namespace spatspec {

namespace {

constexpr double kPowerTol = 1e-10;
constexpr int kPowerMaxIter = 10000;
constexpr Index kDenseFallbackLimit = 512;

SparseMatrix make_csr(Index n, const std::vector<Triplet>& entries) {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(entries.size());
    for (const auto& e : entries) t.emplace_back(e.row, e.col, e.value);
    SparseMatrix m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<double> split_numbers(const std::string& line, const std::filesystem::path& path,
                                  std::size_t line_no) {
    std::vector<double> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cell = trim(cell);
        try {
            std::size_t used = 0;
            out.push_back(std::stod(cell, &used));
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": not a number: '" +
                            cell + "'");
        }
    }
    return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

// ---------------------------------------------------------------------------
// WeightMatrix

WeightMatrix::WeightMatrix(Index n, std::vector<Triplet> entries, Normalization normalization)
    : n_(n), normalization_(normalization) {
    if (n <= 0) throw std::invalid_argument("WeightMatrix: n must be positive");
    std::erase_if(entries, [](const Triplet& t) { return t.value == 0.0; });
    for (const auto& e : entries) {
        if (e.row < 0 || e.row >= n || e.col < 0 || e.col >= n)
            throw std::invalid_argument("WeightMatrix: index out of range");
        if (e.row == e.col) throw std::invalid_argument("WeightMatrix: nonzero diagonal entry");
        if (!std::isfinite(e.value)) throw std::invalid_argument("WeightMatrix: non-finite entry");
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (entries[i].row == entries[i - 1].row && entries[i].col == entries[i - 1].col)
            throw std::invalid_argument("WeightMatrix: duplicate entry");
    }
    entries_ = std::move(entries);
    csr_ = make_csr(n_, entries_);
}

WeightMatrix WeightMatrix::from_dense(const Matrix& dense, Normalization normalization) {
    if (dense.rows() != dense.cols())
        throw std::invalid_argument("WeightMatrix::from_dense: matrix is not square");
    std::vector<Triplet> entries;
    for (Index i = 0; i < dense.rows(); ++i)
        for (Index j = 0; j < dense.cols(); ++j)
            if (dense(i, j) != 0.0) entries.push_back({i, j, dense(i, j)});
    return {dense.rows(), std::move(entries), normalization};
}

Matrix WeightMatrix::to_dense() const { return Matrix(csr_); }

Vector WeightMatrix::row_sums() const {
    Vector s = Vector::Zero(n_);
    for (const auto& e : entries_) s(e.row) += e.value;
    return s;
}

double WeightMatrix::coeff(Index row, Index col) const { return csr_.coeff(row, col); }

WeightMatrix WeightMatrix::row_normalized() const {
    const Vector sums = row_sums();
    std::vector<Triplet> out = entries_;
    for (auto& e : out) e.value /= sums(e.row);
    return {n_, std::move(out), {NormalizationKind::row_stochastic, 0.0}};
}

WeightMatrix WeightMatrix::spectrally_scaled(double factor) const {
    if (!(factor > 0.0)) throw std::invalid_argument("spectrally_scaled: factor must be positive");
    const double rho = spectral_radius();
    if (rho == 0.0) throw std::domain_error("spectrally_scaled: spectral radius is zero");
    std::vector<Triplet> out = entries_;
    for (auto& e : out) e.value /= factor * rho;
    return {n_, std::move(out), {NormalizationKind::spectral_scaled, factor}};
}

double WeightMatrix::spectral_radius() const { return spatspec::spectral_radius(csr_); }

bool WeightMatrix::satisfies_invariants(bool check_spectral) const {
    for (const auto& e : entries_)
        if (e.row == e.col) return false;
    switch (normalization_.kind) {
    case NormalizationKind::none:
        return true;
    case NormalizationKind::row_stochastic: {
        std::vector<bool> has(static_cast<std::size_t>(n_), false);
        for (const auto& e : entries_) has[static_cast<std::size_t>(e.row)] = true;
        const Vector sums = row_sums();
        for (Index i = 0; i < n_; ++i)
            if (has[static_cast<std::size_t>(i)] && std::abs(sums(i) - 1.0) > 1e-12) return false;
        return true;
    }
    case NormalizationKind::spectral_scaled:
        if (!check_spectral) return true;
        return spectral_radius() <= 1.0 / normalization_.factor + 1e-10;
    }
    return false;
}

// ---------------------------------------------------------------------------
// spectral radius

double spectral_radius_dense(const Matrix& w) {
    if (w.size() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> es(w, false);
    if (es.info() != Eigen::Success) throw std::runtime_error("spectral_radius: eigensolve failed");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_radius(const SparseMatrix& w) {
    const Index n = w.rows();
    if (n == 0) return 0.0;
    Vector x(n);
    for (Index i = 0; i < n; ++i) x(i) = 1.0 + 0.1 * std::sin(static_cast<double>(i + 1));
    x.normalize();
    double previous = 0.0;
    for (int it = 0; it < kPowerMaxIter; ++it) {
        Vector y = w * x;
        const double estimate = y.norm();
        if (estimate == 0.0) break;
        if (it > 0 && std::abs(estimate - previous) <= kPowerTol * estimate) return estimate;
        previous = estimate;
        x = y / estimate;
    }
    if (n <= kDenseFallbackLimit) return spectral_radius_dense(Matrix(w));
    throw std::runtime_error("spectral_radius: power iteration did not converge");
}

// ---------------------------------------------------------------------------
// constructors

WeightMatrix knn_weights(const Matrix& coords, Index k, bool row_normalize) {
    const Index n = coords.rows();
    if (k <= 0) throw std::invalid_argument("knn_weights: k must be positive");
    if (k >= n) throw std::invalid_argument("knn_weights: k must be smaller than n");
    if (!coords.allFinite()) throw std::invalid_argument("knn_weights: non-finite coordinates");

    const double value = row_normalize ? 1.0 / static_cast<double>(k) : 1.0;
    std::vector<Triplet> entries;
    entries.reserve(static_cast<std::size_t>(n * k));
    std::vector<std::pair<double, Index>> cand(static_cast<std::size_t>(n - 1));
    for (Index i = 0; i < n; ++i) {
        std::size_t m = 0;
        for (Index j = 0; j < n; ++j) {
            if (j == i) continue;
            cand[m++] = {(coords.row(i) - coords.row(j)).squaredNorm(), j};
        }
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
        for (Index r = 0; r < k; ++r) entries.push_back({i, cand[static_cast<std::size_t>(r)].second, value});
    }
    Normalization norm;
    if (row_normalize) norm.kind = NormalizationKind::row_stochastic;
    return {n, std::move(entries), norm};
}

void DistanceWeightSpec::validate() const {
    const Index n = distances.rows();
    if (distances.cols() != n || mask.rows() != n || mask.cols() != n)
        throw std::invalid_argument("DistanceWeightSpec: distances and mask must be n x n");
    if (order < 0) throw std::invalid_argument("DistanceWeightSpec: negative order");
    for (Index i = 0; i < n; ++i) {
        if (mask(i, i)) throw std::invalid_argument("DistanceWeightSpec: mask diagonal must be false");
        for (Index j = 0; j < n; ++j)
            if (mask(i, j) && !std::isfinite(distances(i, j)))
                throw std::invalid_argument("DistanceWeightSpec: non-finite masked distance");
    }
}

WeightMatrix build_distance_weights(const DistanceWeightSpec& spec) {
    spec.validate();
    if (spec.coefficients.size() != spec.order + 1)
        throw std::invalid_argument("build_distance_weights: need order + 1 coefficients");
    const Index n = spec.distances.rows();
    std::vector<Triplet> entries;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i == j || !spec.mask(i, j)) continue;
            const double d = spec.distances(i, j);
            double v = 0.0;
            for (Index l = spec.order; l >= 0; --l) v = v * d + spec.coefficients(l);
            if (v != 0.0) entries.push_back({i, j, v});
        }
    }
    return {n, std::move(entries)};
}

NpwTruth simulate_npw_truth(Index n, std::mt19937_64& rng, const NpwTruthOptions& options) {
    if (n < 2) throw std::invalid_argument("simulate_npw_truth: n must be at least 2");
    std::uniform_real_distribution<double> dist_draw(-3.0, 3.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    for (int attempt = 0; attempt <= options.max_resamples; ++attempt) {
        NpwTruth out;
        out.distances = Matrix::Zero(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = i + 1; j < n; ++j) {
                const double d = dist_draw(rng);
                out.distances(i, j) = d;
                out.distances(j, i) = d;
            }
        out.mask = Mask::Constant(n, n, false);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) {
                if (i == j) continue;
                if (options.symmetric_mask && j < i) {
                    out.mask(i, j) = out.mask(j, i);
                    continue;
                }
                out.mask(i, j) = unif(rng) < 0.05;
            }

        std::vector<Triplet> entries;
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                if (out.mask(i, j)) entries.push_back({i, j, normal_cdf(-out.distances(i, j))});
        const WeightMatrix raw(n, std::move(entries));
        const double rho = raw.nnz() > 0 ? raw.spectral_radius() : 0.0;
        if (rho > 0.0) {
            std::vector<Triplet> scaled = raw.entries();
            for (auto& e : scaled) e.value /= 1.2 * rho;
            out.weights = WeightMatrix(n, std::move(scaled),
                                       {NormalizationKind::spectral_scaled, 1.2});
            return out;
        }
        if (!options.resample_degenerate) break;
    }
    throw std::runtime_error("simulate_npw_truth: degenerate W* (spectral radius zero)");
}

// ---------------------------------------------------------------------------
// WeightStack

struct WeightStack::State {
    std::vector<WeightMatrix> weights;
    Index n = 0;
    mutable std::once_flag spectrum_once;
    mutable Eigen::VectorXcd spectrum;
    bool cacheable = false;

    const Eigen::VectorXcd& eigenvalues() const {
        std::call_once(spectrum_once, [this] {
            Eigen::EigenSolver<Matrix> es(weights.front().to_dense(), false);
            spectrum = es.eigenvalues();
        });
        return spectrum;
    }
};

WeightStack::WeightStack(std::vector<WeightMatrix> weights) {
    auto state = std::make_shared<State>();
    if (!weights.empty()) {
        state->n = weights.front().n();
        for (const auto& w : weights)
            if (w.n() != state->n)
                throw std::invalid_argument("WeightStack: weight matrices differ in dimension");
    }
    state->weights = std::move(weights);
    state->cacheable = state->weights.size() == 1 && state->n <= kSpectralCacheLimit;
    state_ = std::move(state);
}

Index WeightStack::size() const noexcept {
    return state_ ? static_cast<Index>(state_->weights.size()) : 0;
}

Index WeightStack::n() const noexcept { return state_ ? state_->n : 0; }

const std::vector<WeightMatrix>& WeightStack::weights() const {
    static const std::vector<WeightMatrix> none;
    return state_ ? state_->weights : none;
}

Matrix WeightStack::combine_apply(const Vector& coeffs, const Matrix& m) const {
    if (coeffs.size() != size()) throw std::invalid_argument("WeightStack: coefficient count mismatch");
    Matrix out = Matrix::Zero(m.rows(), m.cols());
    for (Index j = 0; j < size(); ++j)
        if (coeffs(j) != 0.0) out.noalias() += coeffs(j) * (state_->weights[static_cast<std::size_t>(j)].sparse() * m);
    return out;
}

SparseMatrix WeightStack::shifted(const Vector& coeffs, double sign) const {
    if (coeffs.size() != size()) throw std::invalid_argument("WeightStack: coefficient count mismatch");
    const Index dim = n();
    SparseMatrix out(dim, dim);
    out.setIdentity();
    for (Index j = 0; j < size(); ++j)
        if (coeffs(j) != 0.0) out += (sign * coeffs(j)) * state_->weights[static_cast<std::size_t>(j)].sparse();
    out.makeCompressed();
    return out;
}

Matrix WeightStack::shifted_dense(const Vector& coeffs, double sign) const {
    if (coeffs.size() != size()) throw std::invalid_argument("WeightStack: coefficient count mismatch");
    Matrix out = Matrix::Identity(n(), n());
    for (Index j = 0; j < size(); ++j)
        for (const auto& e : state_->weights[static_cast<std::size_t>(j)].entries())
            out(e.row, e.col) += sign * coeffs(j) * e.value;
    return out;
}

Matrix WeightStack::shifted_apply(const Vector& coeffs, double sign, const Matrix& m) const {
    if (empty()) return m;
    Matrix out = m;
    out.noalias() += sign * combine_apply(coeffs, m);
    return out;
}

std::optional<double> WeightStack::log_abs_det_shifted(const Vector& coeffs, double sign) const {
    if (coeffs.size() != size()) throw std::invalid_argument("WeightStack: coefficient count mismatch");
    if (empty() || coeffs.isZero(0.0)) return 0.0;
    if (state_->cacheable) {
        const Eigen::VectorXcd& ev = state_->eigenvalues();
        const std::complex<double> c(sign * coeffs(0), 0.0);
        double acc = 0.0;
        for (Index i = 0; i < ev.size(); ++i) {
            const double mod = std::abs(1.0 + c * ev(i));
            if (mod < 1e-12) return std::nullopt;
            acc += std::log(mod);
        }
        return acc;
    }
    const Eigen::PartialPivLU<Matrix> lu(shifted_dense(coeffs, sign));
    const Vector diag = lu.matrixLU().diagonal().cwiseAbs();
    const double big = diag.maxCoeff();
    if (!(big > 0.0) || !std::isfinite(big) || diag.minCoeff() <= 1e-13 * big) return std::nullopt;
    return diag.array().log().sum();
}

// ---------------------------------------------------------------------------
// CSV

WeightMatrix read_weights_csv(const std::filesystem::path& path, std::optional<Index> n) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open weights file: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> lines;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) lines.push_back(line);
    }
    if (lines.empty()) throw DataError("empty weights file: " + path.string());

    std::string header = trim(lines.front());
    std::erase(header, ' ');
    if (header == "row,col,value") {
        std::vector<Triplet> entries;
        Index max_index = -1;
        for (std::size_t i = 1; i < lines.size(); ++i) {
            const auto v = split_numbers(lines[i], path, i + 1);
            if (v.size() != 3) throw DataError(path.string() + ": triplet rows need 3 fields");
            const auto r = static_cast<Index>(v[0]);
            const auto c = static_cast<Index>(v[1]);
            if (static_cast<double>(r) != v[0] || static_cast<double>(c) != v[1] || r < 0 || c < 0)
                throw DataError(path.string() + ": indices must be nonnegative integers");
            max_index = std::max({max_index, r, c});
            entries.push_back({r, c, v[2]});
        }
        const Index dim = n.value_or(max_index + 1);
        if (max_index >= dim) throw DataError(path.string() + ": index exceeds dimension");
        try {
            return {dim, std::move(entries)};
        } catch (const std::invalid_argument& e) {
            throw DataError(path.string() + ": " + e.what());
        }
    }

    const Index rows = static_cast<Index>(lines.size());
    Matrix dense(rows, rows);
    for (Index i = 0; i < rows; ++i) {
        const auto v = split_numbers(lines[static_cast<std::size_t>(i)], path, static_cast<std::size_t>(i) + 1);
        if (static_cast<Index>(v.size()) != rows)
            throw DataError(path.string() + ": dense weights must be square");
        for (Index j = 0; j < rows; ++j) dense(i, j) = v[static_cast<std::size_t>(j)];
    }
    if (n && *n != rows) throw DataError(path.string() + ": dimension does not match data");
    try {
        return WeightMatrix::from_dense(dense);
    } catch (const std::invalid_argument& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_weights_triplet_csv(const WeightMatrix& w, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out.precision(17);
    out << "row,col,value\n";
    for (const auto& e : w.entries()) out << e.row << ',' << e.col << ',' << e.value << '\n';
}

void write_weights_dense_csv(const WeightMatrix& w, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out.precision(17);
    const Matrix d = w.to_dense();
    for (Index i = 0; i < d.rows(); ++i) {
        for (Index j = 0; j < d.cols(); ++j) out << (j ? "," : "") << d(i, j);
        out << '\n';
    }
}

}  // namespace spatspec
