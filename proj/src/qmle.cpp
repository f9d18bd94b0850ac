#include "spatspec/qmle.hpp"

#include "spatspec/json_util.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include <cmath>
#include <optional>

namespace spatspec {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2 pi)

/// Least squares of b on the columns of a, after scaling the columns
/// to unit norm. Returns the coefficients in the original scale.
Vector scaled_least_squares(const Matrix& a, const Vector& b, double condition_limit, const char* who) {
    const Index p = a.cols();
    if (a.rows() <= p)
        throw RankDeficientDesign(std::string(who) + ": need more observations than regressors", kInf);
    const Vector norms = a.colwise().norm();
    if (!(norms.minCoeff() > 0.0) || !norms.allFinite())
        throw RankDeficientDesign(std::string(who) + ": regressor column is zero or non-finite", kInf);
    const Matrix scaled = a * norms.cwiseInverse().asDiagonal();
    Eigen::HouseholderQR<Matrix> qr(scaled);
    const Matrix r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    const Vector sv = Eigen::JacobiSVD<Matrix>(r).singularValues();
    const double cond = sv(p - 1) > 0.0 ? std::pow(sv(0) / sv(p - 1), 2) : kInf;
    if (!(cond <= condition_limit))
        throw RankDeficientDesign(std::string(who) + ": condition number " + std::to_string(cond) +
                                      " exceeds the limit",
                                  cond);
    return qr.solve(b).cwiseQuotient(norms);
}

Profile profile_whitened(const Matrix& whitened, double condition_limit) {
    const Index p = whitened.cols() - 1;
    const Matrix a = whitened.leftCols(p);
    const Vector b = whitened.col(p);
    Profile out;
    out.beta = scaled_least_squares(a, b, condition_limit, "profile_beta_sigma");
    out.sigma2 = (b - a * out.beta).squaredNorm() / static_cast<double>(whitened.rows());
    return out;
}

Matrix stacked(const Matrix& psi, const Vector& y) {
    Matrix m(psi.rows(), psi.cols() + 1);
    m << psi, y;
    return m;
}

void check_inputs(const Vector& y, const Matrix& psi, const CovarianceModel& model) {
    if (psi.rows() != y.size()) throw std::invalid_argument("design and outcome lengths differ");
    if (model.n() != y.size()) throw std::invalid_argument("covariance model dimension differs from n");
}

Vector to_search(const ParamSpace& s, const Vector& v) {
    Vector t = v;
    for (Index i = 0; i < v.size(); ++i)
        if (s.is_log(i)) t(i) = std::log(v(i));
    return t;
}

Vector from_search(const ParamSpace& s, const Vector& t) {
    Vector v = t;
    for (Index i = 0; i < t.size(); ++i)
        if (s.is_log(i)) v(i) = std::exp(t(i));
    return v;
}

struct NullFunctor {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Vector;
    using ValueType = Vector;
    using JacobianType = Matrix;

    const NullFamily* family;
    const Matrix* x;
    const Vector* y;
    int n_inputs;

    [[nodiscard]] int inputs() const { return n_inputs; }
    [[nodiscard]] int values() const { return static_cast<int>(y->size()); }
    int operator()(const Vector& alpha, Vector& fvec) const {
        fvec = family->f(*x, alpha) - *y;
        return fvec.allFinite() ? 0 : -1;
    }
};

Matrix with_intercept(const Matrix& x) {
    Matrix a(x.rows(), x.cols() + 1);
    a << Vector::Ones(x.rows()), x;
    return a;
}

}  // namespace

bool ParamSpace::is_log(Index i) const {
    return static_cast<std::size_t>(i) < log_scale.size() && log_scale[static_cast<std::size_t>(i)];
}

void ParamSpace::validate() const {
    if (lower.size() != upper.size()) throw std::invalid_argument("ParamSpace: bound sizes differ");
    if (!log_scale.empty() && static_cast<Index>(log_scale.size()) != lower.size())
        throw std::invalid_argument("ParamSpace: log_scale size differs from the bounds");
    for (Index i = 0; i < lower.size(); ++i) {
        if (!std::isfinite(lower(i)) || !std::isfinite(upper(i)))
            throw std::invalid_argument("ParamSpace: bounds must be finite");
        if (lower(i) > upper(i)) throw std::invalid_argument("ParamSpace: lower bound above upper bound");
        if (is_log(i) && !(lower(i) > 0.0))
            throw std::invalid_argument("ParamSpace: log-scale coordinate needs a positive lower bound");
    }
}

ParamSpace ParamSpace::box(Vector lower, Vector upper) {
    ParamSpace s{std::move(lower), std::move(upper), {}};
    s.validate();
    return s;
}

ParamSpace ParamSpace::fixed(const Vector& value) { return box(value, value); }

ParamSpace ParamSpace::concat(const ParamSpace& first, const ParamSpace& second) {
    ParamSpace s;
    s.lower.resize(first.dim() + second.dim());
    s.upper.resize(s.lower.size());
    s.lower << first.lower, second.lower;
    s.upper << first.upper, second.upper;
    if (!first.log_scale.empty() || !second.log_scale.empty()) {
        for (Index i = 0; i < first.dim(); ++i) s.log_scale.push_back(first.is_log(i));
        for (Index i = 0; i < second.dim(); ++i) s.log_scale.push_back(second.is_log(i));
    }
    return s;
}

ParamSpace ParamSpace::default_for(const CovarianceModel& model) {
    const Index d = model.params_dim();
    return std::visit(
        [&](const auto& f) -> ParamSpace {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, MessFamily>) {
                return box(Vector::Constant(d, -2.0), Vector::Constant(d, 2.0));
            } else if constexpr (std::is_same_v<T, NonparDistanceFamily>) {
                return box(Vector::Constant(d, -5.0), Vector::Constant(d, 5.0));
            } else if constexpr (std::is_same_v<T, IsotropicFamily>) {
                ParamSpace s;
                if (f.kind == IsotropicKind::matern) {
                    s.lower = Vector{{0.1, 1e-3}};
                    s.upper = Vector{{10.0, 1e3}};
                    s.log_scale = {false, true};
                } else {
                    s.lower = Vector{{1e-3, 1e-3, 0.05}};
                    s.upper = Vector{{1e3, 1e3, 2.0}};
                    s.log_scale = {true, true, false};
                }
                s.validate();
                return s;
            } else {
                return box(Vector::Constant(d, -0.95), Vector::Constant(d, 0.95));
            }
        },
        model.family());
}

ParamSpace ParamSpace::default_sar(Index lags) {
    return box(Vector::Constant(lags, -0.95), Vector::Constant(lags, 0.95));
}

Profile profile_beta_sigma(const Vector& y, const Matrix& psi, const CovarianceFactor& factor,
                           double condition_limit) {
    if (psi.rows() != y.size()) throw std::invalid_argument("profile_beta_sigma: length mismatch");
    return profile_whitened(factor.whiten(stacked(psi, y)), condition_limit);
}

Profile profile_beta_sigma(const Vector& y, const Matrix& psi, const CovarianceModel& model,
                           const Vector& gamma, double condition_limit) {
    check_inputs(y, psi, model);
    return profile_beta_sigma(y, psi, make_factor(model, gamma), condition_limit);
}

double concentrated_loglik(const Vector& y, const Matrix& psi, const CovarianceModel& model,
                           const Vector& gamma, double condition_limit) {
    check_inputs(y, psi, model);
    const CovarianceFactor factor = make_factor(model, gamma);
    const Profile pr = profile_beta_sigma(y, psi, factor, condition_limit);
    return kLog2Pi + std::log(pr.sigma2) + factor.log_det() / static_cast<double>(y.size());
}

double concentrated_loglik_sar(const Vector& y, const Matrix& psi, const WeightStack& sar,
                               const CovarianceModel& model, const Vector& lambda, const Vector& gamma,
                               double condition_limit) {
    if (lambda.size() != sar.size()) throw std::invalid_argument("concentrated_loglik_sar: wrong lambda size");
    if (sar.empty()) return concentrated_loglik(y, psi, model, gamma, condition_limit);
    if (sar.n() != y.size()) throw std::invalid_argument("concentrated_loglik_sar: SAR weights dimension");
    const auto logdet_s = sar.log_abs_det_shifted(lambda, -1.0);
    if (!logdet_s) throw SingularCovariance("S(lambda) is singular", lambda);
    const Vector sy = sar.shifted_apply(lambda, -1.0, Matrix(y));
    return concentrated_loglik(sy, psi, model, gamma, condition_limit) -
           2.0 * *logdet_s / static_cast<double>(y.size());
}

FitResult fit_qmle_sar(const Vector& y, const Matrix& psi, const WeightStack& sar, const CovarianceModel& model,
                       const ParamSpace& space, const FitOptions& options) {
    check_inputs(y, psi, model);
    space.validate();
    const Index m = sar.size();
    const Index dg = model.params_dim();
    if (space.dim() != m + dg)
        throw std::invalid_argument("fit_qmle: parameter space has " + std::to_string(space.dim()) +
                                    " coordinates, expected " + std::to_string(m + dg));
    if (!sar.empty() && sar.n() != y.size())
        throw std::invalid_argument("fit_qmle: SAR weights dimension differs from n");

    int rank_failures = 0;
    int singular_failures = 0;
    int other_failures = 0;
    int eval_index = 0;
    std::string last_error;
    std::optional<SingularCovariance> last_singular;
    const Objective objective = [&](const Vector& t) {
        const Vector phi = from_search(space, t);
        double value = kInf;
        try {
            value = concentrated_loglik_sar(y, psi, sar, model, phi.head(m), phi.tail(dg), options.condition_limit);
        } catch (const RankDeficientDesign& e) {
            ++rank_failures;
            last_error = e.what();
        } catch (const SingularCovariance& e) {
            ++singular_failures;
            last_error = e.what();
            last_singular = e;
        } catch (const std::domain_error& e) {
            ++other_failures;
            last_error = e.what();
        }
        if (std::isnan(value)) value = kInf;
        if (options.trace) options.trace(eval_index, phi, value);
        ++eval_index;
        return value;
    };

    const OptimResult opt = minimize_box(objective, to_search(space, space.lower), to_search(space, space.upper),
                                         options.optim);
    if (!std::isfinite(opt.value)) {
        if (singular_failures > 0 && rank_failures == 0 && other_failures == 0)
            throw SingularCovariance("fit_qmle: Sigma is singular at every evaluated point (" + last_error + ")",
                                     last_singular->gamma(), last_singular->min_eigenvalue());
        if (rank_failures > 0 && singular_failures == 0 && other_failures == 0)
            throw RankDeficientDesign("fit_qmle: design is rank deficient at every evaluated point (" +
                                          last_error + ")",
                                      kInf);
        throw AllEvaluationsFailed("fit_qmle: no feasible parameter in the box (" + last_error + ")");
    }

    const Vector phi = from_search(space, opt.x);
    FitResult out;
    out.lambda_hat = phi.head(m);
    out.gamma_hat = phi.tail(dg);
    const Vector sy = m == 0 ? y : Vector(sar.shifted_apply(out.lambda_hat, -1.0, Matrix(y)));
    const Profile pr = profile_beta_sigma(sy, psi, model, out.gamma_hat, options.condition_limit);
    out.beta_hat = pr.beta;
    out.sigma2_hat = pr.sigma2;
    out.neg_loglik = opt.value;
    out.n_evals = opt.n_evals;
    out.converged = opt.converged;
    for (Index i = 0; i < phi.size(); ++i) {
        if (space.lower(i) == space.upper(i)) continue;
        if (phi(i) - space.lower(i) <= options.boundary_tol || space.upper(i) - phi(i) <= options.boundary_tol)
            out.at_boundary = true;
    }
    return out;
}

FitResult fit_qmle(const Vector& y, const Matrix& psi, const CovarianceModel& model, const ParamSpace& space,
                   const FitOptions& options) {
    return fit_qmle_sar(y, psi, WeightStack{}, model, space, options);
}

FitResult fit_qmle_npw(const Vector& y, const Matrix& psi, const Matrix& distances, const Mask& mask, int order,
                       const ParamSpace& space, const FitOptions& options) {
    return fit_qmle(y, psi, CovarianceModel::nonpar_distance(distances, mask, order), space, options);
}

std::string NullFamily::name() const {
    switch (kind) {
    case Kind::linear: return "linear";
    case Kind::constant: return "constant";
    case Kind::known: return "known";
    case Kind::custom: return "custom";
    }
    return "unknown";
}

NullFit fit_null(const Vector& y_adjusted, const Matrix& x, const NullFamily& family) {
    const Index n = y_adjusted.size();
    if (x.rows() != n) throw std::invalid_argument("fit_null: x and y lengths differ");
    NullFit out;
    switch (family.kind) {
    case NullFamily::Kind::constant:
        out.alpha_hat = Vector::Constant(1, y_adjusted.mean());
        out.fitted = Vector::Constant(n, out.alpha_hat(0));
        break;
    case NullFamily::Kind::linear: {
        const Matrix a = with_intercept(x);
        out.alpha_hat = scaled_least_squares(a, y_adjusted, 1e12, "fit_null");
        out.fitted = a * out.alpha_hat;
        break;
    }
    case NullFamily::Kind::known:
        if (family.alpha.size() != x.cols() + 1)
            throw std::invalid_argument("fit_null: known coefficients need k + 1 entries");
        out.alpha_hat = family.alpha;
        out.fitted = with_intercept(x) * family.alpha;
        break;
    case NullFamily::Kind::custom: {
        if (!family.f) throw std::invalid_argument("fit_null: custom family without a function");
        NullFunctor functor{&family, &x, &y_adjusted, static_cast<int>(family.alpha.size())};
        Eigen::NumericalDiff<NullFunctor> diff(functor);
        Eigen::LevenbergMarquardt<Eigen::NumericalDiff<NullFunctor>, double> lm(diff);
        Vector alpha = family.alpha;
        lm.minimize(alpha);
        Matrix jac(n, alpha.size());
        diff.df(alpha, jac);
        if (!alpha.allFinite() || !jac.allFinite())
            throw RankDeficientDesign("fit_null: nonlinear least squares diverged", kInf);
        (void)scaled_least_squares(jac, Vector::Zero(n), 1e12, "fit_null");
        out.alpha_hat = alpha;
        out.fitted = family.f(x, alpha);
        break;
    }
    }
    out.residuals = y_adjusted - out.fitted;
    return out;
}

void to_json(nlohmann::json& j, const FitResult& r) {
    j = {{"gamma_hat", vector_json(r.gamma_hat)},
         {"lambda_hat", vector_json(r.lambda_hat)},
         {"beta_hat", vector_json(r.beta_hat)},
         {"sigma2_hat", r.sigma2_hat},
         {"neg_loglik", r.neg_loglik},
         {"n_evals", r.n_evals},
         {"converged", r.converged},
         {"at_boundary", r.at_boundary}};
}

void to_json(nlohmann::json& j, const NullFit& r) {
    j = {{"alpha_hat", vector_json(r.alpha_hat)}};
}

void to_json(nlohmann::json& j, const ParamSpace& s) {
    j = {{"lower", vector_json(s.lower)}, {"upper", vector_json(s.upper)}};
    if (!s.log_scale.empty()) j["log_scale"] = s.log_scale;
}

void from_json(const nlohmann::json& j, ParamSpace& s) {
    s.lower = json_vector(j.at("lower"));
    s.upper = json_vector(j.at("upper"));
    s.log_scale = j.value("log_scale", std::vector<bool>{});
    s.validate();
}

}  // namespace spatspec
