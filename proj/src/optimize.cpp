#include "spatspec/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace spatspec {

namespace {

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71};

double radical_inverse(long long i, int base) {
    double inv = 1.0 / base;
    double f = inv;
    double r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

struct Point {
    Vector z;
    double value;
};

/// Maps free coordinates to the full parameter vector and counts evaluations.
class Reduced {
public:
    Reduced(const Objective& f, const Vector& lower, const Vector& upper, OptimResult& tally)
        : f_(f), lower_(lower), upper_(upper), tally_(tally) {
        for (Index i = 0; i < lower.size(); ++i)
            if (upper(i) > lower(i)) free_.push_back(i);
    }

    [[nodiscard]] Index dim() const { return static_cast<Index>(free_.size()); }
    [[nodiscard]] double lo(Index j) const { return lower_(free_[static_cast<std::size_t>(j)]); }
    [[nodiscard]] double hi(Index j) const { return upper_(free_[static_cast<std::size_t>(j)]); }

    [[nodiscard]] Vector expand(const Vector& z) const {
        Vector x = lower_;
        for (Index j = 0; j < dim(); ++j) x(free_[static_cast<std::size_t>(j)]) = z(j);
        return x;
    }

    double operator()(const Vector& z) {
        ++tally_.n_evals;
        double v = f_(expand(z));
        if (std::isnan(v)) v = kInf;
        if (std::isfinite(v)) ++tally_.n_finite;
        return v;
    }

    /// Reflects each coordinate into the box, clamping if one reflection is not enough.
    [[nodiscard]] Vector reflect(Vector z) const {
        for (Index j = 0; j < dim(); ++j) {
            if (z(j) < lo(j)) z(j) = lo(j) + (lo(j) - z(j));
            if (z(j) > hi(j)) z(j) = hi(j) - (z(j) - hi(j));
            z(j) = std::clamp(z(j), lo(j), hi(j));
        }
        return z;
    }

private:
    const Objective& f_;
    Vector lower_;
    Vector upper_;
    std::vector<Index> free_;
    OptimResult& tally_;
};

std::vector<Point> design_points(Reduced& g, const OptimOptions& o) {
    const Index d = g.dim();
    std::vector<Point> pts;
    auto at = [&](const Vector& u) {
        Vector z(d);
        for (Index j = 0; j < d; ++j) z(j) = g.lo(j) + (g.hi(j) - g.lo(j)) * u(j);
        return z;
    };
    if (d <= o.grid_max_dim) {
        const int m = std::max(o.grid_points_per_dim, 1);
        long long total = 1;
        for (Index j = 0; j < d; ++j) total *= m;
        Vector u(d);
        for (long long idx = 0; idx < total; ++idx) {
            long long rest = idx;
            for (Index j = 0; j < d; ++j) {
                u(j) = (static_cast<double>(rest % m) + 0.5) / m;
                rest /= m;
            }
            Vector z = at(u);
            pts.push_back({z, g(z)});
        }
    } else {
        for (int i = 1; i <= o.quasi_random_points; ++i) {
            Vector z = at(halton_point(i, d));
            pts.push_back({z, g(z)});
        }
    }
    return pts;
}

Point nelder_mead(Reduced& g, Point start, const OptimOptions& o, bool& converged) {
    const Index d = g.dim();
    std::vector<Point> s;
    s.push_back(start);
    for (Index j = 0; j < d; ++j) {
        Vector z = start.z;
        const double step = 0.1 * (g.hi(j) - g.lo(j));
        z(j) += (z(j) + step <= g.hi(j)) ? step : -step;
        z = g.reflect(z);
        s.push_back({z, g(z)});
    }

    const int budget = o.max_evals_per_restart;
    int used = static_cast<int>(d);
    converged = false;
    auto by_value = [](const Point& a, const Point& b) { return a.value < b.value; };

    while (used < budget) {
        std::stable_sort(s.begin(), s.end(), by_value);
        double diameter = 0.0;
        for (Index j = 1; j <= d; ++j)
            diameter = std::max(diameter, (s[static_cast<std::size_t>(j)].z - s[0].z).cwiseAbs().maxCoeff());
        const double spread = s.back().value - s.front().value;
        if (diameter < o.x_tol && std::isfinite(s.back().value) && spread < o.f_tol) {
            converged = true;
            break;
        }
        if (diameter < 1e-3 * o.x_tol) break;  // collapsed without the values settling

        Vector centroid = Vector::Zero(d);
        for (Index j = 0; j < d; ++j) centroid += s[static_cast<std::size_t>(j)].z;
        centroid /= static_cast<double>(d);
        Point& worst = s.back();

        const Vector xr = g.reflect(centroid + (centroid - worst.z));
        const double fr = g(xr);
        ++used;
        if (fr < s.front().value) {
            const Vector xe = g.reflect(centroid + 2.0 * (centroid - worst.z));
            const double fe = g(xe);
            ++used;
            worst = fe < fr ? Point{xe, fe} : Point{xr, fr};
            continue;
        }
        if (fr < s[static_cast<std::size_t>(d - 1)].value) {
            worst = {xr, fr};
            continue;
        }
        const bool outside = fr < worst.value;
        const Vector xc = outside ? Vector(centroid + 0.5 * (xr - centroid))
                                  : Vector(centroid + 0.5 * (worst.z - centroid));
        const double fc = g(xc);
        ++used;
        if (fc < (outside ? fr : worst.value)) {
            worst = {xc, fc};
            continue;
        }
        for (std::size_t j = 1; j < s.size(); ++j) {
            s[j].z = s[0].z + 0.5 * (s[j].z - s[0].z);
            s[j].value = g(s[j].z);
            ++used;
        }
    }
    std::stable_sort(s.begin(), s.end(), by_value);
    return s.front();
}

}  // namespace

Vector halton_point(long long i, Index d) {
    if (d > static_cast<Index>(std::size(kPrimes)))
        throw std::invalid_argument("halton_point: dimension above 20");
    Vector u(d);
    for (Index j = 0; j < d; ++j) u(j) = radical_inverse(i, kPrimes[j]);
    return u;
}

OptimResult minimize_box(const Objective& f, const Vector& lower, const Vector& upper,
                         const OptimOptions& options) {
    if (lower.size() != upper.size()) throw std::invalid_argument("minimize_box: bound sizes differ");
    for (Index i = 0; i < lower.size(); ++i)
        if (!(lower(i) <= upper(i)) || !std::isfinite(lower(i)) || !std::isfinite(upper(i)))
            throw std::invalid_argument("minimize_box: invalid box");

    OptimResult result;
    Reduced g(f, lower, upper, result);
    if (g.dim() == 0) {
        result.x = lower;
        result.value = g(Vector());
        result.converged = std::isfinite(result.value);
        return result;
    }

    std::vector<Point> pts = design_points(g, options);
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pts[a].value < pts[b].value; });

    Point best{pts[order[0]].z, pts[order[0]].value};
    bool any_converged = false;
    const std::size_t starts = std::min<std::size_t>(static_cast<std::size_t>(std::max(options.restarts, 0)),
                                                     pts.size());
    for (std::size_t r = 0; r < starts; ++r) {
        const Point& p0 = pts[order[r]];
        if (!std::isfinite(p0.value)) break;
        bool conv = false;
        Point local = nelder_mead(g, p0, options, conv);
        if (local.value < best.value || (conv && !any_converged && local.value <= best.value)) {
            best = local;
            any_converged = conv;
        } else if (conv && local.value == best.value) {
            any_converged = true;
        }
    }
    result.x = g.expand(best.z);
    result.value = best.value;
    result.converged = any_converged && std::isfinite(best.value);
    return result;
}

}  // namespace spatspec
