#include "spatspec/dgp.hpp"

#include "spatspec/bootstrap.hpp"
#include "spatspec/parallel.hpp"
#include "spatspec/random.hpp"

#include <Eigen/LU>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace spatspec {

namespace {

constexpr std::uint64_t kFixedDesignStream = 0xF1F1F1F1ULL;

const char* model_name(McModel m) {
    switch (m) {
    case McModel::sararma_0_1_0: return "sararma_0_1_0";
    case McModel::sararma_1_0_1: return "sararma_1_0_1";
    case McModel::npw_sem: return "npw_sem";
    }
    return "unknown";
}

McModel parse_model(const std::string& s) {
    if (s == "sararma_0_1_0") return McModel::sararma_0_1_0;
    if (s == "sararma_1_0_1") return McModel::sararma_1_0_1;
    if (s == "npw_sem") return McModel::npw_sem;
    throw DataError("design: unknown model '" + s + "'");
}

Vector standard_normals(Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> z;
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = z(rng);
    return v;
}

std::string format_number(const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

/// Sample and binomial standard errors of the rejection indicators.
void aggregate(const std::vector<std::vector<double>>& stats, const std::vector<double>& levels, bool upper_tail,
               Matrix& rates, Matrix& se) {
    const auto ns = static_cast<Index>(stats.size());
    const auto nl = static_cast<Index>(levels.size());
    rates = Matrix::Zero(ns, nl);
    se = Matrix::Zero(ns, nl);
    for (Index s = 0; s < ns; ++s) {
        const auto& v = stats[static_cast<std::size_t>(s)];
        if (v.empty()) {
            rates.row(s).setConstant(kNaN);
            se.row(s).setConstant(kNaN);
            continue;
        }
        for (Index l = 0; l < nl; ++l) {
            const double level = levels[static_cast<std::size_t>(l)];
            const double z = upper_tail ? normal_upper_quantile(level) : 0.0;
            int hits = 0;
            for (double t : v) hits += upper_tail ? (t > z) : (t < level);
            const double r = static_cast<double>(hits) / static_cast<double>(v.size());
            rates(s, l) = r;
            se(s, l) = std::sqrt(r * (1.0 - r) / static_cast<double>(v.size()));
        }
    }
}

}  // namespace

void McDesign::validate() const {
    if (n < 3) throw std::invalid_argument("design: n must be at least 3");
    if (reps < 1) throw std::invalid_argument("design: reps must be positive");
    if (boot_b < 0) throw std::invalid_argument("design: boot_b must be non-negative");
    if (c_values.empty()) throw std::invalid_argument("design: no c values");
    if (levels.empty()) throw std::invalid_argument("design: no levels");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (!(levels[i] > 0.0 && levels[i] < 1.0)) throw std::invalid_argument("design: levels must lie in (0, 1)");
        if (i > 0 && !(levels[i] > levels[i - 1])) throw std::invalid_argument("design: levels must ascend");
    }
    if (model != McModel::npw_sem && (neighbor_count() < 1 || neighbor_count() >= n))
        throw std::invalid_argument("design: neighbour count must lie in [1, n)");
    if (model == McModel::npw_sem && r < 0) throw std::invalid_argument("design: sieve order must be >= 0");
}

Matrix gen_regressors(Index n, RegressorSupport support, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> g;
    auto draw = [&] { return support == RegressorSupport::compact_u02pi ? u(rng) : g(rng); };
    Matrix x(n, 2);
    for (Index i = 0; i < n; ++i) {
        const double z = draw();
        const double z1 = draw();
        const double z2 = draw();
        x(i, 0) = 0.5 * (z + z1);
        x(i, 1) = 0.5 * (z + z2);
    }
    return x;
}

Vector gen_theta(const Matrix& x, const Vector& alpha, double c, Index p, Index n) {
    if (alpha.size() != x.cols() + 1) throw std::invalid_argument("gen_theta: alpha needs k + 1 entries");
    const Vector index = (x * alpha.tail(x.cols())).array() + alpha(0);
    const Vector wiggle = index.array().sin();
    return index + local_alternative_shift(c * wiggle, p, n);
}

McWeights gen_weights(const McDesign& design, std::mt19937_64& rng) {
    McWeights out;
    if (design.model == McModel::npw_sem) {
        NpwTruth truth = simulate_npw_truth(design.n, rng, {design.symmetric_mask, true, 100});
        out.w = std::move(truth.weights);
        out.distances = std::move(truth.distances);
        out.mask = std::move(truth.mask);
        return out;
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix coords(design.n, 2);
    for (Index i = 0; i < design.n; ++i) {
        coords(i, 0) = u(rng);
        coords(i, 1) = u(rng);
    }
    out.w = knn_weights(coords, design.neighbor_count(), true);
    return out;
}

Vector gen_outcome(const McDesign& design, const Vector& theta, const McWeights& weights, std::mt19937_64& rng) {
    const Index n = theta.size();
    if (weights.w.n() != n) throw std::invalid_argument("gen_outcome: weights dimension differs from n");
    const Vector xi = standard_normals(n, rng);
    const Matrix w = weights.w.to_dense();
    const Matrix eye = Matrix::Identity(n, n);
    switch (design.model) {
    case McModel::sararma_0_1_0:
        return theta + Eigen::PartialPivLU<Matrix>(eye - design.gamma2 * w).solve(xi);
    case McModel::sararma_1_0_1:
        return Eigen::PartialPivLU<Matrix>(eye - design.lambda1 * w).solve(Vector(theta + xi + design.gamma3 * (w * xi)));
    case McModel::npw_sem:
        return theta + Eigen::PartialPivLU<Matrix>(eye - w).solve(xi);
    }
    throw std::logic_error("gen_outcome: unknown model");
}

TestInput mc_test_input(const McDesign& design, Vector y, Matrix x, const McWeights& weights) {
    TestInput in;
    in.y = std::move(y);
    in.x = std::move(x);
    in.basis = design.basis;
    in.null_family = NullFamily::linear();
    switch (design.model) {
    case McModel::sararma_0_1_0:
        in.cov = CovarianceModel::sem({weights.w});
        break;
    case McModel::sararma_1_0_1:
        in.cov = CovarianceModel::sma({weights.w});
        in.sar = WeightStack({weights.w});
        break;
    case McModel::npw_sem:
        in.cov = CovarianceModel::nonpar_distance(weights.distances, weights.mask, design.r);
        break;
    }
    return in;
}

bool RejectionTable::meets_success_rule() const {
    for (const auto& b : blocks)
        if (10 * b.n_ok < 9 * design.reps) return false;
    return true;
}

std::vector<McRecord> run_replication(const McDesign& design, int rep) {
    const auto urep = static_cast<std::uint64_t>(rep);
    auto rng = make_rng(design.seed, urep, 0);
    McWeights weights;
    Matrix x;
    if (design.fixed_design) {
        auto fixed = make_rng(design.seed, kFixedDesignStream, 0);
        weights = gen_weights(design, fixed);
        x = gen_regressors(design.n, design.support, fixed);
    } else {
        weights = gen_weights(design, rng);
        x = gen_regressors(design.n, design.support, rng);
    }
    const Index p = count_terms(design.basis, 2);
    const Vector alpha = Vector::Ones(3);
    auto noise_rng = rng;  // the same innovations at every c

    std::vector<McRecord> out(design.c_values.size());
    Matrix psi;
    try {
        psi = build_design(x, design.basis).psi;
    } catch (const std::exception&) {
        return out;
    }
    for (std::size_t ci = 0; ci < design.c_values.size(); ++ci) {
        auto local = noise_rng;
        const Vector theta = gen_theta(x, alpha, design.c_values[ci], p, design.n);
        const Vector y = gen_outcome(design, theta, weights, local);
        const TestInput input = mc_test_input(design, y, x, weights);
        McRecord& rec = out[ci];
        try {
            TestResult r = run_test(input, psi);
            rec.t = r.t_n;
            rec.t_a = r.t_n_a;
            if (design.boot_b > 0) {
                BootstrapOptions bo;
                bo.b = design.boot_b;
                bo.seed = make_rng(design.seed, urep, 1 + ci)();
                const BootstrapResult b = bootstrap_pvalues(input, psi, r, bo);
                if (b.t_star.size() == 0) continue;
                rec.p_star = b.p_star;
                rec.p_a_star = b.p_a_star;
            }
            rec.ok = true;
        } catch (const StageError&) {
        }
    }
    return out;
}

RejectionTable run_mc(const McDesign& design, int threads) {
    design.validate();
    const auto reps = static_cast<std::size_t>(design.reps);
    std::vector<std::vector<McRecord>> records(reps);
    parallel_for(reps, threads, [&](std::size_t rep) { records[rep] = run_replication(design, static_cast<int>(rep)); });

    RejectionTable table;
    table.design = design;
    for (std::size_t ci = 0; ci < design.c_values.size(); ++ci) {
        RejectionBlock b;
        b.c = design.c_values[ci];
        std::vector<std::vector<double>> t(2);
        std::vector<std::vector<double>> p(2);
        for (const auto& rec : records) {
            const McRecord& r = rec[ci];
            if (!r.ok) {
                ++b.n_failed;
                continue;
            }
            ++b.n_ok;
            t[0].push_back(r.t);
            t[1].push_back(r.t_a);
            p[0].push_back(r.p_star);
            p[1].push_back(r.p_a_star);
        }
        aggregate(t, design.levels, true, b.rates_asym, b.se_asym);
        if (design.boot_b > 0) aggregate(p, design.levels, false, b.rates_boot, b.se_boot);
        table.blocks.push_back(std::move(b));
    }
    return table;
}

void write_table_csv(const RejectionTable& table, std::ostream& os) {
    os << "c,statistic,method";
    for (double l : table.design.levels) os << ',' << format_number("%g", l);
    os << '\n';
    static constexpr const char* stats[] = {"T", "Ta"};
    for (const auto& b : table.blocks) {
        auto emit = [&](const Matrix& rates, const char* method) {
            for (Index s = 0; s < rates.rows(); ++s) {
                os << format_number("%g", b.c) << ',' << stats[s] << ',' << method;
                for (Index l = 0; l < rates.cols(); ++l) os << ',' << format_number("%.4f", rates(s, l));
                os << '\n';
            }
        };
        emit(b.rates_asym, "asym");
        if (table.design.boot_b > 0) emit(b.rates_boot, "boot");
    }
}

void write_table_csv(const RejectionTable& table, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path.string());
    write_table_csv(table, os);
}

nlohmann::json table_json(const RejectionTable& table) {
    auto mat = [](const Matrix& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (Index i = 0; i < m.rows(); ++i) {
            std::vector<double> row(static_cast<std::size_t>(m.cols()));
            for (Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
            rows.push_back(row);
        }
        return rows;
    };
    nlohmann::json j;
    j["design"] = table.design;
    j["statistics"] = {"T", "Ta"};
    j["meets_success_rule"] = table.meets_success_rule();
    j["blocks"] = nlohmann::json::array();
    for (const auto& b : table.blocks) {
        nlohmann::json jb = {{"c", b.c},
                             {"n_ok", b.n_ok},
                             {"n_failed", b.n_failed},
                             {"rates_asym", mat(b.rates_asym)},
                             {"mc_se_asym", mat(b.se_asym)}};
        if (table.design.boot_b > 0) {
            jb["rates_boot"] = mat(b.rates_boot);
            jb["mc_se_boot"] = mat(b.se_boot);
        }
        j["blocks"].push_back(jb);
    }
    return j;
}

void to_json(nlohmann::json& j, const McDesign& d) {
    j = {{"model", model_name(d.model)},
         {"n", d.n},
         {"c", d.c_values},
         {"basis", d.basis},
         {"support", d.support == RegressorSupport::compact_u02pi ? "compact" : "gaussian"},
         {"reps", d.reps},
         {"boot_b", d.boot_b},
         {"levels", d.levels},
         {"seed", d.seed},
         {"r", d.r},
         {"fixed_design", d.fixed_design},
         {"neighbors", d.neighbor_count()},
         {"symmetric_mask", d.symmetric_mask},
         {"gamma2", d.gamma2},
         {"lambda1", d.lambda1},
         {"gamma3", d.gamma3}};
}

void from_json(const nlohmann::json& j, McDesign& d) {
    d = McDesign{};
    d.model = parse_model(j.at("model").get<std::string>());
    d.n = j.at("n").get<Index>();
    d.c_values = j.value("c", d.c_values);
    if (j.contains("basis")) d.basis = j.at("basis").get<BasisSpec>();
    const auto support = j.value("support", std::string("compact"));
    if (support == "compact")
        d.support = RegressorSupport::compact_u02pi;
    else if (support == "gaussian")
        d.support = RegressorSupport::gaussian;
    else
        throw DataError("design: unknown support '" + support + "'");
    d.reps = j.value("reps", d.reps);
    d.boot_b = j.value("boot_b", d.boot_b);
    d.levels = j.value("levels", d.levels);
    d.seed = j.value("seed", d.seed);
    d.r = j.value("r", d.r);
    d.fixed_design = j.value("fixed_design", d.fixed_design);
    d.neighbors = j.value("neighbors", d.neighbors);
    d.symmetric_mask = j.value("symmetric_mask", d.symmetric_mask);
    d.gamma2 = j.value("gamma2", d.gamma2);
    d.lambda1 = j.value("lambda1", d.lambda1);
    d.gamma3 = j.value("gamma3", d.gamma3);
    try {
        d.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
}

}  // namespace spatspec
