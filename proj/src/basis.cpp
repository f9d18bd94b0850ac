#include "spatspec/basis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace spatspec {

namespace {

Index binomial(Index n, Index k) {
    Index r = 1;
    for (Index i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

std::vector<double> knot_vector_for(const Vector& column, const BSplineBasis& b) {
    const double lo = column.minCoeff();
    const double hi = column.maxCoeff();
    if (!(hi > lo)) throw std::invalid_argument("build_design: B-spline coordinate has zero range");
    std::vector<double> interior = b.knots;
    if (interior.empty()) {
        for (int i = 1; i <= b.n_knots; ++i)
            interior.push_back(lo + (hi - lo) * static_cast<double>(i) / (b.n_knots + 1));
    }
    if (!std::is_sorted(interior.begin(), interior.end()))
        throw std::invalid_argument("build_design: B-spline knots must be sorted");
    std::vector<double> t(static_cast<std::size_t>(b.order), lo);
    t.insert(t.end(), interior.begin(), interior.end());
    t.insert(t.end(), static_cast<std::size_t>(b.order), hi);
    return t;
}

Index bspline_interior_count(const BSplineBasis& b) {
    return b.knots.empty() ? b.n_knots : static_cast<Index>(b.knots.size());
}

}  // namespace

bool DesignMatrix::has_zero_column() const {
    for (Index j = 0; j < psi.cols(); ++j)
        if (psi.col(j).isZero(0.0)) return true;
    return false;
}

std::vector<std::vector<int>> monomial_exponents(Index k, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> current(static_cast<std::size_t>(k), 0);
    // Fill exponents with a fixed total, largest powers on the leading coordinates first.
    std::function<void(Index, int)> fill = [&](Index pos, int remaining) {
        if (pos == k - 1) {
            current[static_cast<std::size_t>(pos)] = remaining;
            out.push_back(current);
            return;
        }
        for (int e = remaining; e >= 0; --e) {
            current[static_cast<std::size_t>(pos)] = e;
            fill(pos + 1, remaining - e);
        }
    };
    for (int total = 0; total <= degree; ++total) {
        if (k == 0) break;
        fill(0, total);
    }
    return out;
}

Vector bspline_basis_row(double x, const std::vector<double>& t, int order) {
    const int deg = order - 1;
    const auto m = static_cast<Index>(t.size());
    const Index count = m - order;
    Vector out = Vector::Zero(count);
    // span index mu with t[mu] <= x < t[mu+1], clamped to the last non-empty span
    Index mu = deg;
    const Index last = count - 1;
    while (mu < last && x >= t[static_cast<std::size_t>(mu + 1)]) ++mu;

    std::vector<double> nvals(static_cast<std::size_t>(order), 0.0);
    std::vector<double> left(static_cast<std::size_t>(order), 0.0);
    std::vector<double> right(static_cast<std::size_t>(order), 0.0);
    nvals[0] = 1.0;
    for (int j = 1; j <= deg; ++j) {
        left[static_cast<std::size_t>(j)] = x - t[static_cast<std::size_t>(mu + 1 - j)];
        right[static_cast<std::size_t>(j)] = t[static_cast<std::size_t>(mu + j)] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double temp = nvals[static_cast<std::size_t>(r)] /
                                (right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)]);
            nvals[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
            saved = left[static_cast<std::size_t>(j - r)] * temp;
        }
        nvals[static_cast<std::size_t>(j)] = saved;
    }
    for (int r = 0; r <= deg; ++r) out(mu - deg + r) = nvals[static_cast<std::size_t>(r)];
    return out;
}

Index count_terms(const BasisSpec& spec, Index k) {
    if (k <= 0) throw std::invalid_argument("count_terms: k must be positive");
    const Index drop = spec.include_intercept ? 0 : 1;
    return std::visit(
        [&](const auto& f) -> Index {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, PowerBasis>) {
                if (f.degree < 0) throw std::invalid_argument("count_terms: negative degree");
                return binomial(k + f.degree, f.degree) - drop;
            } else if constexpr (std::is_same_v<T, TrigBasis>) {
                if (k != 2) throw std::invalid_argument("count_terms: trig basis needs k = 2");
                if (f.level == 1) return 9 - drop;
                if (f.level == 2) return 13 - drop;
                throw std::invalid_argument("count_terms: trig level must be 1 or 2");
            } else {
                if (f.order < 1) throw std::invalid_argument("count_terms: B-spline order must be >= 1");
                return 1 + k * (f.order - 1 + bspline_interior_count(f)) - drop;
            }
        },
        spec.family);
}

DesignMatrix build_design(const Matrix& x, const BasisSpec& spec) {
    if (!x.allFinite()) throw std::invalid_argument("build_design: non-finite regressors");
    const Index n = x.rows();
    const Index k = x.cols();
    const Index p_full = count_terms(spec, k) + (spec.include_intercept ? 0 : 1);
    Matrix psi(n, p_full);

    std::visit(
        [&](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, PowerBasis>) {
                const auto exps = monomial_exponents(k, f.degree);
                for (std::size_t c = 0; c < exps.size(); ++c) {
                    for (Index i = 0; i < n; ++i) {
                        double v = 1.0;
                        for (Index d = 0; d < k; ++d) v *= std::pow(x(i, d), exps[c][static_cast<std::size_t>(d)]);
                        psi(i, static_cast<Index>(c)) = v;
                    }
                }
            } else if constexpr (std::is_same_v<T, TrigBasis>) {
                for (Index i = 0; i < n; ++i) {
                    const double x1 = x(i, 0);
                    const double x2 = x(i, 1);
                    psi(i, 0) = 1.0;
                    psi(i, 1) = std::sin(x1);
                    psi(i, 2) = std::sin(x1 / 2.0);
                    psi(i, 3) = std::sin(x2);
                    psi(i, 4) = std::sin(x2 / 2.0);
                    psi(i, 5) = std::cos(x1);
                    psi(i, 6) = std::cos(x1 / 2.0);
                    psi(i, 7) = std::cos(x2);
                    psi(i, 8) = std::cos(x2 / 2.0);
                    if (f.level == 2) {
                        psi(i, 9) = std::sin(x1 * x1);
                        psi(i, 10) = std::cos(x1 * x1);
                        psi(i, 11) = std::sin(x2 * x2);
                        psi(i, 12) = std::cos(x2 * x2);
                    }
                }
            } else {
                psi.col(0).setOnes();
                const Index per = f.order - 1 + bspline_interior_count(f);
                for (Index d = 0; d < k; ++d) {
                    const auto t = knot_vector_for(x.col(d), f);
                    for (Index i = 0; i < n; ++i) {
                        const Vector row = bspline_basis_row(x(i, d), t, f.order);
                        // the first function is dropped: the full set sums to one, like the intercept
                        psi.block(i, 1 + d * per, 1, per) = row.tail(per).transpose();
                    }
                }
            }
        },
        spec.family);

    if (!spec.include_intercept) psi = psi.rightCols(p_full - 1).eval();
    if (spec.standardize) {
        for (Index j = 0; j < psi.cols(); ++j) {
            const double first = psi(0, j);
            if ((psi.col(j).array() == first).all()) continue;
            const double rms = std::sqrt(psi.col(j).squaredNorm() / static_cast<double>(n));
            if (rms > 0.0) psi.col(j) /= rms;
        }
    }
    return {std::move(psi), spec};
}

void to_json(nlohmann::json& j, const BasisSpec& spec) {
    std::visit(
        [&](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, PowerBasis>) {
                j = {{"family", "power"}, {"degree", f.degree}};
            } else if constexpr (std::is_same_v<T, TrigBasis>) {
                j = {{"family", "trig"}, {"level", f.level}};
            } else {
                j = {{"family", "bspline"}, {"order", f.order}};
                if (f.knots.empty())
                    j["n_knots"] = f.n_knots;
                else
                    j["knots"] = f.knots;
            }
        },
        spec.family);
    j["intercept"] = spec.include_intercept;
    if (spec.standardize) j["standardize"] = true;
}

void from_json(const nlohmann::json& j, BasisSpec& spec) {
    const auto family = j.at("family").get<std::string>();
    if (family == "power") {
        spec.family = PowerBasis{j.at("degree").get<int>()};
    } else if (family == "trig") {
        const int level = j.at("level").get<int>();
        if (level != 1 && level != 2) throw DataError("basis: trig level must be 1 or 2");
        spec.family = TrigBasis{level};
    } else if (family == "bspline") {
        BSplineBasis b;
        b.order = j.value("order", 4);
        b.n_knots = j.value("n_knots", 1);
        if (j.contains("knots")) b.knots = j.at("knots").get<std::vector<double>>();
        spec.family = b;
    } else {
        throw DataError("basis: unknown family '" + family + "'");
    }
    spec.include_intercept = j.value("intercept", true);
    spec.standardize = j.value("standardize", false);
}

}  // namespace spatspec
