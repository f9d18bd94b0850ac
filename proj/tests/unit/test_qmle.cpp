#include "doctest.h"

#include "../generators.hpp"
#include "spatspec/basis.hpp"
#include "spatspec/qmle.hpp"

using namespace spatspec;

namespace {

struct Instance {
    gen::ModelCase c;
    Vector y;
    Matrix psi;
};

Instance instance(std::mt19937_64& rng, Index n_lo, Index n_hi, int family = -1) {
    Instance in;
    const Index n = gen::integer(rng, n_lo, n_hi);
    in.c = gen::model_case(rng, n, family);
    const Index p = gen::integer(rng, 1, std::min<Index>(6, n - 2));
    in.psi = gen::uniform_matrix(rng, n, p, -1, 1);
    in.psi.col(0).setOnes();
    in.y = gen::normals(rng, n) + in.psi * gen::normals(rng, p);
    return in;
}

}  // namespace

TEST_SUITE("qmle") {

TEST_CASE("dense oracle reproduces a frozen weighted least squares fit") {
    Matrix psi(4, 2);
    psi << 1, .5, 1, 1.5, 1, -1, 1, 2;
    const Vector y{{1, 2.5, -.5, 4}};
    const Matrix sigma = Vector{{1, 2, 3, 4}}.asDiagonal();
    const auto g = oracle::gls(y, psi, sigma);
    CHECK(g.beta(0) == doctest::Approx(0.5272206303724927).epsilon(1e-13));
    CHECK(g.beta(1) == doctest::Approx(1.401146131805158).epsilon(1e-13));
    CHECK(g.sigma2 == doctest::Approx(0.05479942693409741).epsilon(1e-12));
}

TEST_CASE("profile and concentrated likelihood match the dense oracle") {
    auto rng = make_rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        const Instance in = instance(rng, 8, 20);
        const Matrix sigma = gen::dense_sigma(in.c);
        const Profile got = profile_beta_sigma(in.y, in.psi, in.c.model, in.c.gamma);
        const auto want = oracle::gls(in.y, in.psi, sigma);
        CHECK(oracle::relative_error(got.sigma2, want.sigma2) <= 1e-8);
        CHECK((got.beta - want.beta).norm() <= 1e-8 * (1.0 + want.beta.norm()));
        CHECK(oracle::relative_error(concentrated_loglik(in.y, in.psi, in.c.model, in.c.gamma),
                                     oracle::loglik(in.y, in.psi, sigma)) <= 1e-8);
    }
}

TEST_CASE("sigma2 equals the projection form built from the symmetric factor") {
    auto rng = make_rng(42);
    for (int trial = 0; trial < 30; ++trial) {
        const Instance in = instance(rng, 6, 20);
        const Matrix e = symmetric_factor(in.c.model, in.c.gamma);
        const double want = oracle::sigma2_projection_form(in.y, in.psi, e.transpose());
        CHECK(oracle::relative_error(profile_beta_sigma(in.y, in.psi, in.c.model, in.c.gamma).sigma2, want) <= 1e-8);
    }
}

TEST_CASE("SAR concentrated likelihood matches the dense oracle") {
    auto rng = make_rng(43);
    for (int trial = 0; trial < 100; ++trial) {
        const Instance in = instance(rng, 8, 20);
        const Index n = in.y.size();
        const Index lags = gen::integer(rng, 1, 2);
        std::vector<WeightMatrix> ws;
        std::vector<Matrix> dense;
        for (Index j = 0; j < lags; ++j) {
            ws.push_back(j == 0 ? gen::knn(rng, n) : gen::sparse_random(rng, n));
            dense.push_back(ws.back().to_dense());
        }
        Vector lambda(lags);
        for (Index j = 0; j < lags; ++j) lambda(j) = gen::uniform(rng, -0.8, 0.8) / static_cast<double>(lags);
        const double got = concentrated_loglik_sar(in.y, in.psi, WeightStack(ws), in.c.model, lambda, in.c.gamma);
        const double want = oracle::loglik_sar(in.y, in.psi, gen::dense_sigma(in.c), dense, lambda);
        CHECK(oracle::relative_error(got, want) <= 1e-8);
    }
}

TEST_CASE("profile is invariant to recombining the columns of Psi") {
    auto rng = make_rng(44);
    for (int trial = 0; trial < 20; ++trial) {
        const Instance in = instance(rng, 10, 20);
        const Index p = in.psi.cols();
        Matrix r = gen::uniform_matrix(rng, p, p, -1, 1) + 2.0 * Matrix::Identity(p, p);
        const double a = concentrated_loglik(in.y, in.psi, in.c.model, in.c.gamma);
        const double b = concentrated_loglik(in.y, in.psi * r, in.c.model, in.c.gamma);
        CHECK(a == doctest::Approx(b).epsilon(1e-9));
    }
}

TEST_CASE("rescaling y rescales beta and sigma2 and leaves gamma_hat unchanged") {
    auto rng = make_rng(45);
    const Index n = 60;
    const WeightMatrix w = gen::knn(rng, n, 3);
    const auto model = CovarianceModel::sem({w});
    Matrix psi = gen::uniform_matrix(rng, n, 3, -1, 1);
    psi.col(0).setOnes();
    const Vector y = psi * Vector{{1, -1, 0.5}} + gen::normals(rng, n);
    const ParamSpace space = ParamSpace::default_for(model);
    const FitResult a = fit_qmle(y, psi, model, space);
    const FitResult b = fit_qmle(3.0 * y, psi, model, space);
    CHECK(a.gamma_hat(0) == doctest::Approx(b.gamma_hat(0)).epsilon(1e-5));
    CHECK((3.0 * a.beta_hat - b.beta_hat).norm() <= 1e-4 * b.beta_hat.norm());
    CHECK(b.sigma2_hat == doctest::Approx(9.0 * a.sigma2_hat).epsilon(1e-5));
}

TEST_CASE("optimum is no worse than any grid point of the box") {
    auto rng = make_rng(46);
    for (int trial = 0; trial < 10; ++trial) {
        const Index n = gen::integer(rng, 20, 50);
        const auto model = CovarianceModel::sem({gen::knn(rng, n)});
        Matrix psi = gen::uniform_matrix(rng, n, 2, -1, 1);
        psi.col(0).setOnes();
        const Vector y = gen::normals(rng, n);
        const FitResult r = fit_qmle(y, psi, model, ParamSpace::default_for(model));
        for (int i = 0; i <= 40; ++i) {
            const Vector g{{-0.95 + 1.9 * i / 40.0}};
            CHECK(r.neg_loglik <= concentrated_loglik(y, psi, model, g) + 1e-10);
        }
        CHECK(r.neg_loglik == doctest::Approx(concentrated_loglik(y, psi, model, r.gamma_hat)));
    }
}

TEST_CASE("fixed coordinates stay fixed and the trace sees every evaluation") {
    auto rng = make_rng(47);
    const Index n = 30;
    const auto model = CovarianceModel::sarma({gen::knn(rng, n)}, {gen::knn(rng, n)});
    Matrix psi = Matrix::Ones(n, 1);
    const Vector y = gen::normals(rng, n);
    ParamSpace s = ParamSpace::box(Vector{{-0.9, 0.2}}, Vector{{0.9, 0.2}});
    int calls = 0;
    FitOptions o;
    o.trace = [&](int, const Vector& phi, double) {
        ++calls;
        CHECK(phi(1) == 0.2);
    };
    const FitResult r = fit_qmle(y, psi, model, s, o);
    CHECK(r.gamma_hat(1) == 0.2);
    CHECK(calls == r.n_evals);
}

TEST_CASE("collinear design is reported as rank deficient") {
    auto rng = make_rng(48);
    const Index n = 20;
    const auto model = CovarianceModel::sem({gen::knn(rng, n)});
    Matrix psi(n, 2);
    psi.col(0).setOnes();
    psi.col(1).setConstant(2.0);
    CHECK_THROWS_AS((void)profile_beta_sigma(gen::normals(rng, n), psi, model, Vector{{0.1}}), RankDeficientDesign);
    CHECK_THROWS_AS((void)fit_qmle(gen::normals(rng, n), psi, model, ParamSpace::default_for(model)),
                    RankDeficientDesign);
}

TEST_CASE("linear null fit matches a frozen value and is orthogonal to the design") {
    Matrix x(3, 1);
    x << 0, 1, 3;
    const NullFit f = fit_null(Vector{{1, 2, 2}}, x, NullFamily::linear());
    CHECK(f.alpha_hat(0) == doctest::Approx(1.2857142857142858).epsilon(1e-13));
    CHECK(f.alpha_hat(1) == doctest::Approx(0.2857142857142857).epsilon(1e-13));

    auto rng = make_rng(49);
    for (int trial = 0; trial < 20; ++trial) {
        const Index n = gen::integer(rng, 10, 80);
        const Matrix xr = gen::uniform_matrix(rng, n, 2, 0, 6);
        const Vector y = gen::normals(rng, n);
        const NullFit nf = fit_null(y, xr, NullFamily::linear());
        CHECK(std::abs(nf.residuals.sum()) <= 1e-10 * n);
        CHECK(std::abs(xr.col(0).dot(nf.residuals)) <= 1e-10 * n);
        CHECK((nf.fitted + nf.residuals - y).norm() <= 1e-12 * y.norm());
    }
}

TEST_CASE("constant, known and custom null families") {
    Matrix x(4, 1);
    x << 0, 1, 2, 3;
    const Vector y{{1, 3, 5, 7}};
    CHECK(fit_null(y, x, NullFamily::constant()).alpha_hat(0) == doctest::Approx(4.0));
    const NullFit k = fit_null(y, x, NullFamily::known(Vector{{1.0, 2.0}}));
    CHECK(k.residuals.norm() <= 1e-14);
    const auto f = [](const Matrix& xx, const Vector& a) -> Vector {
        return (a(0) * (a(1) * xx.col(0)).array().exp()).matrix();
    };
    Vector ye(4);
    for (Index i = 0; i < 4; ++i) ye(i) = 2.0 * std::exp(0.3 * x(i, 0));
    const NullFit c = fit_null(ye, x, NullFamily::custom(f, Vector{{1.0, 0.1}}));
    CHECK(c.alpha_hat(0) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(c.alpha_hat(1) == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("parameter space validation and defaults") {
    CHECK_THROWS_AS(ParamSpace::box(Vector{{1.0}}, Vector{{0.0}}).validate(), std::invalid_argument);
    ParamSpace s = ParamSpace::box(Vector{{0.0}}, Vector{{1.0}});
    s.log_scale = {true};
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    Matrix d = Matrix::Ones(3, 3);
    const ParamSpace m = ParamSpace::default_for(CovarianceModel::isotropic(IsotropicKind::matern, d));
    CHECK(m.dim() == 2);
    CHECK(m.is_log(1));
    const ParamSpace j = nlohmann::json(m).get<ParamSpace>();
    CHECK(j.lower == m.lower);
    CHECK(j.log_scale == m.log_scale);
}

}

TEST_SUITE("qmle") {

TEST_CASE("a box where Sigma is singular everywhere surfaces SingularCovariance") {
    const Index n = 12;
    std::vector<Triplet> t;
    for (Index i = 0; i < n; ++i) {
        t.push_back({i, (i + n - 1) % n, 0.5});
        t.push_back({i, (i + 1) % n, 0.5});
    }
    const auto model = CovarianceModel::sem({WeightMatrix(n, std::move(t))});
    auto rng = make_rng(410);
    const Matrix psi = Matrix::Ones(n, 1);
    CHECK_THROWS_AS((void)fit_qmle(gen::normals(rng, n), psi, model, ParamSpace::fixed(Vector{{1.0}})),
                    SingularCovariance);
}

}
