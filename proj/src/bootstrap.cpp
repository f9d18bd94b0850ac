#include "spatspec/bootstrap.hpp"

#include "spatspec/parallel.hpp"
#include "spatspec/random.hpp"

#include <Eigen/LU>

namespace spatspec {

Vector extract_innovations(const Vector& y, const Vector& theta_hat, const Vector& lambda_hat,
                           const Vector& gamma_hat, const WeightStack& sar, const CovarianceModel& model) {
    if (y.size() != theta_hat.size() || y.size() != model.n())
        throw std::invalid_argument("extract_innovations: length mismatch");
    if (lambda_hat.size() != sar.size()) throw std::invalid_argument("extract_innovations: wrong lambda size");
    const Vector sy = sar.empty() ? y : Vector(sar.shifted_apply(lambda_hat, -1.0, Matrix(y)));
    Vector xi = make_factor(model, gamma_hat).whiten(Vector(sy - theta_hat));
    xi.array() -= xi.mean();
    return xi;
}

Regenerator::Regenerator(Vector xi_tilde, Vector f_hat, const Vector& lambda_hat, const Vector& gamma_hat,
                         const WeightStack& sar, const CovarianceModel& model)
    : xi_(std::move(xi_tilde)), f_hat_(std::move(f_hat)), factor_(make_factor(model, gamma_hat)) {
    if (xi_.size() != f_hat_.size() || xi_.size() != model.n())
        throw std::invalid_argument("Regenerator: length mismatch");
    if (lambda_hat.size() != sar.size()) throw std::invalid_argument("Regenerator: wrong lambda size");
    if (!sar.empty()) {
        if (!sar.log_abs_det_shifted(lambda_hat, -1.0)) throw SingularCovariance("S(lambda) is singular", lambda_hat);
        s_lu_.emplace(sar.shifted_dense(lambda_hat, -1.0));
    }
}

Vector Regenerator::regenerate(const Vector& xi_star) const {
    const Vector rhs = f_hat_ + factor_.unwhiten(xi_star);
    return s_lu_ ? Vector(s_lu_->solve(rhs)) : rhs;
}

Vector Regenerator::draw(std::mt19937_64& rng) const {
    const Index n = xi_.size();
    std::uniform_int_distribution<Index> pick(0, n - 1);
    Vector xi_star(n);
    for (Index i = 0; i < n; ++i) xi_star(i) = xi_(pick(rng));
    return regenerate(xi_star);
}

Vector resample_and_regenerate(const Vector& xi_tilde, const Vector& f_hat, const Vector& lambda_hat,
                               const Vector& gamma_hat, const WeightStack& sar, const CovarianceModel& model,
                               std::mt19937_64& rng) {
    return Regenerator(xi_tilde, f_hat, lambda_hat, gamma_hat, sar, model).draw(rng);
}

BootstrapResult bootstrap_pvalues(const TestInput& input, const TestResult& observed, const BootstrapOptions& boot,
                                  const TestOptions& options) {
    return bootstrap_pvalues(input, build_design(input.x, input.basis).psi, observed, boot, options);
}

BootstrapResult bootstrap_pvalues(const TestInput& input, const Matrix& psi, const TestResult& observed,
                                  const BootstrapOptions& boot, const TestOptions& options) {
    if (boot.b < 1) throw std::invalid_argument("bootstrap_pvalues: B must be positive");
    const FitResult& fit = observed.fit_alt;

    const auto regen = [&] {
        try {
            const Vector xi =
                extract_innovations(input.y, observed.theta_hat, fit.lambda_hat, fit.gamma_hat, input.sar, input.cov);
            return Regenerator(xi, observed.f_hat, fit.lambda_hat, fit.gamma_hat, input.sar, input.cov);
        } catch (const std::exception& e) {
            throw StageError(StageError::Stage::bootstrap, StageError::Kind::singular_covariance, e.what());
        }
    }();

    struct Outcome {
        bool ok = false;
        bool boundary = false;
        double t = kNaN;
        double t_a = kNaN;
    };
    std::vector<Outcome> outcomes(static_cast<std::size_t>(boot.b));
    TestOptions inner = options;
    inner.fit.trace = nullptr;

    parallel_for(outcomes.size(), boot.threads, [&](std::size_t j) {
        TestInput star = input;
        for (int attempt = 0; attempt <= boot.max_redraws; ++attempt) {
            auto rng = make_rng(boot.seed, j, static_cast<std::uint64_t>(attempt));
            star.y = regen.draw(rng);
            try {
                const TestResult r = run_test(star, psi, inner);
                outcomes[j] = {true, r.fit_alt.at_boundary, r.t_n, r.t_n_a};
                return;
            } catch (const StageError&) {
            }
        }
    });

    BootstrapResult out;
    out.b = boot.b;
    out.seed = boot.seed;
    std::vector<double> t;
    std::vector<double> ta;
    int exceed = 0;
    int exceed_a = 0;
    for (const Outcome& o : outcomes) {
        if (!o.ok) {
            ++out.n_failed;
            continue;
        }
        if (o.boundary) ++out.n_boundary;
        t.push_back(o.t);
        ta.push_back(o.t_a);
        if (observed.t_n < o.t) ++exceed;
        if (observed.t_n_a < o.t_a) ++exceed_a;
    }
    out.t_star = Eigen::Map<const Vector>(t.data(), static_cast<Index>(t.size()));
    out.t_a_star = Eigen::Map<const Vector>(ta.data(), static_cast<Index>(ta.size()));
    if (!t.empty()) {
        out.p_star = static_cast<double>(exceed) / static_cast<double>(t.size());
        out.p_a_star = static_cast<double>(exceed_a) / static_cast<double>(t.size());
    }
    return out;
}

}  // namespace spatspec
