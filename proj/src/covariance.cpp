#include "spatspec/covariance.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <mutex>
#include <sstream>

namespace spatspec {

namespace {

enum class FactorKind { structural, mess, isotropic };

std::string format_gamma(const Vector& gamma) {
    std::ostringstream os;
    os << '(';
    for (Index i = 0; i < gamma.size(); ++i) os << (i ? ", " : "") << gamma(i);
    os << ')';
    return os.str();
}

Index common_dimension(const std::vector<const std::vector<WeightMatrix>*>& groups) {
    Index n = -1;
    for (const auto* g : groups)
        for (const auto& w : *g) {
            if (n < 0) n = w.n();
            if (w.n() != n)
                throw std::invalid_argument("CovarianceModel: weight matrices differ in dimension");
        }
    return n;
}

std::vector<WeightMatrix> npw_basis(const Matrix& d, const Mask& mask, int order) {
    DistanceWeightSpec spec{d, mask, order, Vector::Zero(order + 1)};
    spec.validate();
    const Index n = d.rows();
    std::vector<WeightMatrix> out;
    for (int l = 0; l <= order; ++l) {
        std::vector<Triplet> entries;
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                if (mask(i, j)) entries.push_back({i, j, std::pow(d(i, j), l)});
        out.emplace_back(n, std::move(entries));
    }
    return out;
}

}  // namespace

struct CovarianceModel::State {
    Family family;
    Index n = 0;
    Index dim = 0;
    FactorKind kind = FactorKind::structural;
    WeightStack ar;
    WeightStack ma;
    std::vector<WeightMatrix> mess;
};

CovarianceModel::CovarianceModel(Family family) {
    auto s = std::make_shared<State>();
    std::visit(
        [&](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, SemFamily>) {
                s->n = common_dimension({&f.weights});
                s->ar = WeightStack(f.weights);
                s->dim = static_cast<Index>(f.weights.size());
            } else if constexpr (std::is_same_v<T, SmaFamily>) {
                s->n = common_dimension({&f.weights});
                s->ma = WeightStack(f.weights);
                s->dim = static_cast<Index>(f.weights.size());
            } else if constexpr (std::is_same_v<T, SarmaFamily>) {
                s->n = common_dimension({&f.ar_weights, &f.ma_weights});
                s->ar = WeightStack(f.ar_weights);
                s->ma = WeightStack(f.ma_weights);
                s->dim = static_cast<Index>(f.ar_weights.size() + f.ma_weights.size());
            } else if constexpr (std::is_same_v<T, MessFamily>) {
                s->n = common_dimension({&f.weights});
                s->mess = f.weights;
                s->kind = FactorKind::mess;
                s->dim = static_cast<Index>(f.weights.size());
            } else if constexpr (std::is_same_v<T, NonparDistanceFamily>) {
                s->n = f.distances.rows();
                s->ar = WeightStack(npw_basis(f.distances, f.mask, f.order));
                s->dim = f.order + 1;
            } else {
                if (f.distances.rows() != f.distances.cols())
                    throw std::invalid_argument("CovarianceModel: distance matrix must be square");
                s->n = f.distances.rows();
                s->kind = FactorKind::isotropic;
                s->dim = f.kind == IsotropicKind::matern ? 2 : 3;
            }
        },
        family);
    if (s->n <= 0) throw std::invalid_argument("CovarianceModel: dimension could not be determined");
    s->family = std::move(family);
    state_ = std::move(s);
}

CovarianceModel CovarianceModel::iid(Index n) {
    // SEM without weights: Sigma = I, no parameters.
    CovarianceModel m;
    auto s = std::make_shared<State>();
    s->family = SemFamily{};
    s->n = n;
    s->dim = 0;
    m.state_ = std::move(s);
    return m;
}

CovarianceModel CovarianceModel::sem(std::vector<WeightMatrix> weights) {
    return CovarianceModel(SemFamily{std::move(weights)});
}
CovarianceModel CovarianceModel::sma(std::vector<WeightMatrix> weights) {
    return CovarianceModel(SmaFamily{std::move(weights)});
}
CovarianceModel CovarianceModel::sarma(std::vector<WeightMatrix> ar, std::vector<WeightMatrix> ma) {
    return CovarianceModel(SarmaFamily{std::move(ar), std::move(ma)});
}
CovarianceModel CovarianceModel::mess(std::vector<WeightMatrix> weights) {
    return CovarianceModel(MessFamily{std::move(weights)});
}
CovarianceModel CovarianceModel::nonpar_distance(Matrix distances, Mask mask, int order) {
    return CovarianceModel(NonparDistanceFamily{std::move(distances), std::move(mask), order});
}
CovarianceModel CovarianceModel::isotropic(IsotropicKind kind, Matrix distances) {
    return CovarianceModel(IsotropicFamily{kind, std::move(distances)});
}

Index CovarianceModel::n() const noexcept { return state_ ? state_->n : 0; }
Index CovarianceModel::params_dim() const noexcept { return state_ ? state_->dim : 0; }

const CovarianceModel::Family& CovarianceModel::family() const {
    if (!state_) throw std::logic_error("CovarianceModel: empty model");
    return state_->family;
}

std::string CovarianceModel::family_name() const {
    static constexpr const char* names[] = {"sem", "sma", "sarma", "mess", "npw", "isotropic"};
    const auto& f = family();
    if (const auto* iso = std::get_if<IsotropicFamily>(&f))
        return iso->kind == IsotropicKind::matern ? "matern" : "powered_exp";
    if (std::holds_alternative<SemFamily>(f) && params_dim() == 0) return "iid";
    return names[f.index()];
}

WeightMatrix CovarianceModel::npw_weights(const Vector& tau) const {
    const auto* f = std::get_if<NonparDistanceFamily>(&family());
    if (!f) throw std::invalid_argument("npw_weights: model is not NonparDistance");
    return build_distance_weights({f->distances, f->mask, f->order, tau});
}

// ---------------------------------------------------------------------------
// factors

class CovarianceFactor::Impl {
public:
    virtual ~Impl() = default;
    [[nodiscard]] virtual Matrix whiten(const Matrix& m) const = 0;
    [[nodiscard]] virtual Matrix unwhiten(const Matrix& m) const = 0;
};

namespace {

class StructuralFactor final : public CovarianceFactor::Impl {
public:
    StructuralFactor(WeightStack ar, WeightStack ma, Vector ar_coef, Vector ma_coef)
        : ar_(std::move(ar)), ma_(std::move(ma)), ar_coef_(std::move(ar_coef)), ma_coef_(std::move(ma_coef)) {
        if (!ar_.empty()) ar_op_ = ar_.shifted(ar_coef_, -1.0);
    }

    void set_ma_lu(Eigen::PartialPivLU<Matrix> lu) { ma_lu_ = std::move(lu); }

    [[nodiscard]] Matrix whiten(const Matrix& m) const override {
        Matrix t = ar_.empty() ? m : Matrix(ar_op_ * m);
        if (ma_lu_) return ma_lu_->solve(t);
        return t;
    }

    [[nodiscard]] Matrix unwhiten(const Matrix& m) const override {
        Matrix t = ma_lu_ ? ma_.shifted_apply(ma_coef_, 1.0, m) : m;
        if (ar_.empty()) return t;
        std::call_once(ar_lu_once_, [this] { ar_lu_.compute(ar_.shifted_dense(ar_coef_, -1.0)); });
        return ar_lu_.solve(t);
    }

private:
    WeightStack ar_;
    WeightStack ma_;
    Vector ar_coef_;
    Vector ma_coef_;
    SparseMatrix ar_op_;
    std::optional<Eigen::PartialPivLU<Matrix>> ma_lu_;
    mutable std::once_flag ar_lu_once_;
    mutable Eigen::PartialPivLU<Matrix> ar_lu_;
};

class DenseFactor final : public CovarianceFactor::Impl {
public:
    DenseFactor(Matrix forward, Matrix inverse) : forward_(std::move(forward)), inverse_(std::move(inverse)) {}
    [[nodiscard]] Matrix whiten(const Matrix& m) const override { return forward_ * m; }
    [[nodiscard]] Matrix unwhiten(const Matrix& m) const override { return inverse_ * m; }

private:
    Matrix forward_;
    Matrix inverse_;
};

class CholeskyFactor final : public CovarianceFactor::Impl {
public:
    explicit CholeskyFactor(Eigen::LLT<Matrix> llt) : llt_(std::move(llt)) {}
    [[nodiscard]] Matrix whiten(const Matrix& m) const override {
        return llt_.matrixL().solve(m);
    }
    [[nodiscard]] Matrix unwhiten(const Matrix& m) const override { return llt_.matrixL() * m; }

private:
    Eigen::LLT<Matrix> llt_;
};

Matrix weighted_sum_dense(const std::vector<WeightMatrix>& ws, const Vector& gamma, Index n) {
    Matrix out = Matrix::Zero(n, n);
    for (std::size_t j = 0; j < ws.size(); ++j)
        for (const auto& e : ws[j].entries()) out(e.row, e.col) += gamma(static_cast<Index>(j)) * e.value;
    return out;
}

void check_isotropic(IsotropicKind kind, const Vector& gamma) {
    if (kind == IsotropicKind::matern) {
        if (!(gamma(0) > 0.0)) throw std::domain_error("Matern smoothness must be positive");
        if (!(gamma(1) > 0.0)) throw std::domain_error("Matern range must be positive");
    } else {
        if (!(gamma(0) > 0.0)) throw std::domain_error("powered exponential scale must be positive");
        if (!(gamma(1) > 0.0)) throw std::domain_error("powered exponential range must be positive");
        if (!(gamma(2) > 0.0 && gamma(2) <= 2.0))
            throw std::domain_error("powered exponential power must lie in (0, 2]");
    }
}

Matrix isotropic_sigma(const IsotropicFamily& f, const Vector& gamma) {
    check_isotropic(f.kind, gamma);
    const Index n = f.distances.rows();
    Matrix s(n, n);
    for (Index i = 0; i < n; ++i) {
        s(i, i) = isotropic_covariance(f.kind, 0.0, gamma);
        for (Index j = 0; j < i; ++j) {
            const double v = isotropic_covariance(f.kind, f.distances(i, j), gamma);
            s(i, j) = v;
            s(j, i) = v;
        }
    }
    return s;
}

[[noreturn]] void throw_not_pd(const Matrix& sigma, const Vector& gamma) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sigma, Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues().minCoeff();
    throw SingularCovariance("Sigma is not positive definite at gamma = " + format_gamma(gamma) +
                                 " (smallest eigenvalue " + std::to_string(min_eig) + ")",
                             gamma, min_eig);
}

}  // namespace

CovarianceFactor::CovarianceFactor(std::shared_ptr<const Impl> impl, double log_det, Vector gamma)
    : impl_(std::move(impl)), log_det_(log_det), gamma_(std::move(gamma)) {}

Matrix CovarianceFactor::whiten(const Matrix& m) const { return impl_ ? impl_->whiten(m) : m; }
Vector CovarianceFactor::whiten(const Vector& v) const {
    return impl_ ? Vector(impl_->whiten(Matrix(v))) : v;
}
Matrix CovarianceFactor::unwhiten(const Matrix& m) const { return impl_ ? impl_->unwhiten(m) : m; }
Vector CovarianceFactor::unwhiten(const Vector& v) const {
    return impl_ ? Vector(impl_->unwhiten(Matrix(v))) : v;
}

CovarianceFactor make_factor(const CovarianceModel& model, const Vector& gamma) {
    if (!model.state_) throw std::logic_error("make_factor: empty model");
    const auto& s = *model.state_;
    if (gamma.size() != s.dim)
        throw std::invalid_argument("make_factor: expected " + std::to_string(s.dim) + " parameters, got " +
                                    std::to_string(gamma.size()));
    if (!gamma.allFinite()) throw std::invalid_argument("make_factor: non-finite parameter");

    switch (s.kind) {
    case FactorKind::structural: {
        if (s.dim == 0) return {nullptr, 0.0, gamma};
        const Vector ar_coef = gamma.head(s.ar.size());
        const Vector ma_coef = gamma.tail(s.ma.size());
        const auto ar_logdet = s.ar.log_abs_det_shifted(ar_coef, -1.0);
        if (!ar_logdet)
            throw SingularCovariance("I - sum gamma W is singular at gamma = " + format_gamma(gamma), gamma);
        auto impl = std::make_shared<StructuralFactor>(s.ar, s.ma, ar_coef, ma_coef);
        double ma_logdet = 0.0;
        if (!s.ma.empty() && !ma_coef.isZero(0.0)) {
            Eigen::PartialPivLU<Matrix> lu(s.ma.shifted_dense(ma_coef, 1.0));
            const Vector diag = lu.matrixLU().diagonal().cwiseAbs();
            const double big = diag.maxCoeff();
            if (!(big > 0.0) || diag.minCoeff() <= 1e-13 * big)
                throw SingularCovariance("I + sum gamma W is singular at gamma = " + format_gamma(gamma), gamma);
            ma_logdet = diag.array().log().sum();
            impl->set_ma_lu(std::move(lu));
        }
        return {std::move(impl), 2.0 * ma_logdet - 2.0 * *ar_logdet, gamma};
    }
    case FactorKind::mess: {
        const Matrix sum = weighted_sum_dense(s.mess, gamma, s.n);
        const Matrix forward = matrix_exp(-sum);
        const Matrix inverse = matrix_exp(sum);
        if (!forward.allFinite() || !inverse.allFinite())
            throw SingularCovariance("matrix exponential overflow at gamma = " + format_gamma(gamma), gamma);
        // log|exp(M) exp(M)'| = 2 tr(M)
        return {std::make_shared<DenseFactor>(forward, inverse), 2.0 * sum.trace(), gamma};
    }
    case FactorKind::isotropic: {
        const Matrix sigma = isotropic_sigma(std::get<IsotropicFamily>(s.family), gamma);
        Eigen::LLT<Matrix> llt(sigma);
        if (llt.info() != Eigen::Success) throw_not_pd(sigma, gamma);
        const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        return {std::make_shared<CholeskyFactor>(std::move(llt)), logdet, gamma};
    }
    }
    throw std::logic_error("make_factor: unknown family");
}

SigmaEval eval_sigma(const CovarianceModel& model, const Vector& gamma) {
    if (!model.state_) throw std::logic_error("eval_sigma: empty model");
    const auto& s = *model.state_;
    Matrix sigma;
    if (s.kind == FactorKind::isotropic) {
        if (gamma.size() != s.dim) throw std::invalid_argument("eval_sigma: wrong parameter count");
        sigma = isotropic_sigma(std::get<IsotropicFamily>(s.family), gamma);
    } else {
        const CovarianceFactor f = make_factor(model, gamma);
        const Matrix b = f.unwhiten(Matrix(Matrix::Identity(s.n, s.n)));
        sigma = b * b.transpose();
    }

    SigmaEval out;
    out.gamma = gamma;
    const double scale = sigma.cwiseAbs().maxCoeff();
    out.asymmetry = scale > 0.0 ? (sigma - sigma.transpose()).cwiseAbs().maxCoeff() / scale : 0.0;
    out.sigma = 0.5 * (sigma + sigma.transpose());

    Eigen::LLT<Matrix> llt(out.sigma);
    if (llt.info() == Eigen::Success) {
        out.log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        return out;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(out.sigma, Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues().minCoeff();
    if (!(min_eig > 0.0)) throw_not_pd(out.sigma, gamma);
    out.log_det = es.eigenvalues().array().log().sum();
    return out;
}

SigmaEval eval_sigma_npw(const CovarianceModel& model, const Vector& tau) {
    if (!std::holds_alternative<NonparDistanceFamily>(model.family()))
        throw std::invalid_argument("eval_sigma_npw: model is not NonparDistance");
    return eval_sigma(model, tau);
}

Matrix sigma_inv_quadform(const CovarianceFactor& factor, const Matrix& a, const Matrix& b) {
    if (a.cols() == 0 || b.cols() == 0) return Matrix(a.cols(), b.cols());
    return factor.whiten(a).transpose() * factor.whiten(b);
}

Matrix sigma_inv_quadform(const CovarianceModel& model, const Vector& gamma, const Matrix& a,
                          const Matrix& b) {
    if (a.rows() != model.n() || b.rows() != model.n())
        throw std::invalid_argument("sigma_inv_quadform: row count must equal n");
    return sigma_inv_quadform(make_factor(model, gamma), a, b);
}

Matrix symmetric_factor(const CovarianceModel& model, const Vector& gamma) {
    const SigmaEval ev = eval_sigma(model, gamma);
    Eigen::SelfAdjointEigenSolver<Matrix> es(ev.sigma);
    const Vector lambda = es.eigenvalues();
    if (!(lambda.minCoeff() > 0.0)) throw_not_pd(ev.sigma, gamma);
    const Matrix& q = es.eigenvectors();
    return q * lambda.array().rsqrt().matrix().asDiagonal() * q.transpose();
}

double isotropic_covariance(IsotropicKind kind, double distance, const Vector& gamma) {
    if (kind == IsotropicKind::matern) {
        if (gamma.size() != 2) throw std::invalid_argument("Matern needs 2 parameters");
        const double nu = gamma(0);
        const double range = gamma(1);
        if (!(nu > 0.0)) throw std::domain_error("Matern smoothness must be positive");
        if (!(range > 0.0)) throw std::domain_error("Matern range must be positive");
        const double x = std::sqrt(2.0 * nu) * std::abs(distance) / range;
        if (x == 0.0) return 1.0;
        const double k = std::cyl_bessel_k(nu, x);
        if (k == 0.0) return 0.0;
        const double log_delta = nu * std::log(x) + std::log(k) - (nu - 1.0) * std::log(2.0) - std::lgamma(nu);
        return std::exp(log_delta);
    }
    if (gamma.size() != 3) throw std::invalid_argument("powered exponential needs 3 parameters");
    if (!(gamma(1) > 0.0)) throw std::domain_error("powered exponential range must be positive");
    return gamma(0) * std::exp(-std::pow(std::abs(distance) / gamma(1), gamma(2)));
}

Matrix matrix_exp(const Matrix& m) { return m.exp(); }

}  // namespace spatspec
