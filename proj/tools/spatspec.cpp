// spatspec: fit, test and simulate from the command line.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include "spatspec/spatspec.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace spatspec;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Common {
    std::string y;
    std::string x;
    std::vector<std::string> weights;
    std::string model = "sem";
    std::string basis = "power:3";
    std::string trace;
    std::string out;
    bool json_stdout = false;
};

json load_json(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open " + path.string());
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

BasisSpec parse_basis(const std::string& s) {
    if (fs::exists(s)) {
        try {
            return load_json(s).get<BasisSpec>();
        } catch (const json::exception& e) {
            throw DataError("basis: " + std::string(e.what()));
        }
    }
    // family:arg[:arg]
    std::vector<int> args;
    const auto colon = s.find(':');
    const std::string family = s.substr(0, colon);
    std::string rest = colon == std::string::npos ? "" : s.substr(colon + 1);
    while (!rest.empty()) {
        const auto next = rest.find(':');
        try {
            args.push_back(std::stoi(rest.substr(0, next)));
        } catch (const std::exception&) {
            throw DataError("basis: cannot parse '" + s + "'");
        }
        rest = next == std::string::npos ? "" : rest.substr(next + 1);
    }
    auto arg = [&](std::size_t i, int fallback) { return i < args.size() ? args[i] : fallback; };
    if (family == "power") return BasisSpec::power(arg(0, 3));
    if (family == "trig") return BasisSpec::trig(arg(0, 1));
    if (family == "bspline") return BasisSpec::bspline(arg(0, 4), arg(1, 1));
    throw DataError("basis: unknown family '" + family + "' (expected power, trig, bspline or a JSON file)");
}

struct Problem {
    Vector y;
    Matrix x;
    Matrix psi;
    BasisSpec basis;
    ModelConfig model;
};

Problem load_problem(const Common& c) {
    Problem p;
    p.y = read_vector_csv(c.y);
    p.x = read_matrix_csv(c.x);
    const Index n = p.y.size();
    if (p.x.rows() != n)
        throw DataError("x has " + std::to_string(p.x.rows()) + " rows but y has " + std::to_string(n));
    std::vector<WeightMatrix> weights;
    for (const auto& w : c.weights) {
        if (!fs::exists(w)) throw DataError("weights file not found: " + w);
        weights.push_back(read_weights_csv(w, n));
        if (weights.back().n() != n) throw DataError("weights " + w + " do not match n = " + std::to_string(n));
    }
    json mj;
    fs::path base = fs::current_path();
    if (fs::exists(c.model) && fs::is_regular_file(c.model)) {
        mj = load_json(c.model);
        base = fs::absolute(c.model).parent_path();
    } else {
        mj = {{"family", c.model}};
    }
    p.model = parse_model_config(mj, base, n, weights);
    p.basis = parse_basis(c.basis);
    try {
        p.psi = build_design(p.x, p.basis).psi;
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("basis: ") + e.what());
    }
    return p;
}

FitOptions fit_options(const Common& c, std::ofstream& trace) {
    FitOptions o;
    if (!c.trace.empty()) {
        trace.open(c.trace);
        if (!trace) throw DataError("cannot write " + c.trace);
        trace << "eval_index,phi,loglik\n";
        trace.precision(17);
        o.trace = [&trace](int i, const Vector& phi, double v) {
            trace << i;
            for (Index k = 0; k < phi.size(); ++k) trace << (k ? ';' : ',') << phi(k);
            if (phi.size() == 0) trace << ',';
            trace << ',' << v << '\n';
        };
    }
    return o;
}

void write_json(const json& j, const std::string& out, bool to_stdout) {
    if (!out.empty()) {
        std::ofstream os(out);
        if (!os) throw DataError("cannot write " + out);
        os << j.dump(2) << '\n';
    }
    if (to_stdout) std::cout << j.dump(2) << '\n';
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%12.6f", v);
    return buf;
}

int cmd_fit(const Common& c) {
    const Problem p = load_problem(c);
    std::ofstream trace;
    const FitOptions o = fit_options(c, trace);
    const ParamSpace space = p.model.space ? *p.model.space
                                           : ParamSpace::concat(ParamSpace::default_sar(p.model.sar.size()),
                                                                ParamSpace::default_for(p.model.cov));
    const FitResult r = fit_qmle_sar(p.y, p.psi, p.model.sar, p.model.cov, space, o);
    write_json(json(r), c.out, c.json_stdout);
    if (!c.json_stdout) {
        std::cout << "family     " << p.model.cov.family_name() << "\n";
        for (Index i = 0; i < r.lambda_hat.size(); ++i) std::cout << "lambda[" << i << "] " << fmt(r.lambda_hat(i)) << "\n";
        for (Index i = 0; i < r.gamma_hat.size(); ++i) std::cout << "gamma[" << i << "]  " << fmt(r.gamma_hat(i)) << "\n";
        std::cout << "sigma2     " << fmt(r.sigma2_hat) << "\n"
                  << "loglik     " << fmt(r.neg_loglik) << "\n"
                  << "evals      " << r.n_evals << (r.converged ? "" : " (not converged)")
                  << (r.at_boundary ? " (at boundary)" : "") << "\n";
    }
    return kOk;
}

int cmd_test(const Common& c, const std::string& null_name, int boot_b, std::uint64_t seed, int threads) {
    const Problem p = load_problem(c);
    std::ofstream trace;
    TestOptions o;
    o.fit = fit_options(c, trace);
    TestInput in;
    in.y = p.y;
    in.x = p.x;
    in.basis = p.basis;
    in.cov = p.model.cov;
    in.sar = p.model.sar;
    in.null_family = parse_null_family(null_name);
    in.space = p.model.space;
    TestResult r = run_test(in, p.psi, o);
    if (boot_b > 0) {
        o.fit.trace = nullptr;
        r.boot = bootstrap_pvalues(in, p.psi, r, {boot_b, seed, threads, 3}, o);
    }
    write_json(json(r), c.out, c.json_stdout);
    if (!c.json_stdout) {
        const bool b = r.boot.has_value();
        std::cout << "statistic        value      p_asym      p_boot\n"
                  << "T_n       " << fmt(r.t_n) << fmt(r.p_asym) << (b ? fmt(r.boot->p_star) : "           -") << "\n"
                  << "T_n^a     " << fmt(r.t_n_a) << fmt(r.p_asym_a) << (b ? fmt(r.boot->p_a_star) : "           -")
                  << "\n"
                  << "p = " << r.p << ", n = " << p.y.size();
        if (b) std::cout << ", B = " << r.boot->b << ", failed = " << r.boot->n_failed;
        std::cout << "\n";
    }
    return kOk;
}

int cmd_simulate(const std::string& design_path, const std::string& out, int threads, int reps_override,
                 bool json_stdout) {
    McDesign d;
    try {
        d = load_json(design_path).get<McDesign>();
    } catch (const json::exception& e) {
        throw DataError("design: " + std::string(e.what()));
    }
    if (reps_override > 0) d.reps = reps_override;
    const RejectionTable t = run_mc(d, threads);
    const json sidecar = table_json(t);
    if (!t.meets_success_rule()) {
        std::cerr << "simulate: fewer than 90% of replications succeeded; no table written\n";
        for (const auto& b : t.blocks) std::cerr << "  c = " << b.c << ": " << b.n_failed << " failed\n";
        return kNumeric;
    }
    if (!out.empty()) {
        write_table_csv(t, fs::path(out));
        std::ofstream js(fs::path(out).replace_extension(".json"));
        js << sidecar.dump(2) << '\n';
    }
    if (json_stdout)
        std::cout << sidecar.dump(2) << '\n';
    else if (out.empty())
        write_table_csv(t, std::cout);
    return kOk;
}

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--y", c.y, "Outcome CSV (single column)")->required();
    cmd->add_option("--x", c.x, "Regressor CSV (headered)")->required();
    cmd->add_option("--weights", c.weights, "Weight matrix CSV (triplet or dense); repeatable");
    cmd->add_option("--model", c.model, "Covariance family name or model JSON")->capture_default_str();
    cmd->add_option("--basis", c.basis, "power:D, trig:L, bspline:ORDER:KNOTS or basis JSON")->capture_default_str();
    cmd->add_option("--trace", c.trace, "CSV log of likelihood evaluations");
    cmd->add_option("--out", c.out, "Write the result JSON here");
    cmd->add_flag("--json", c.json_stdout, "Print JSON to stdout");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Series-based specification tests under spatial dependence"};
    app.require_subcommand(1);
    int threads = default_threads();
    app.add_option("--threads", threads, "Worker threads (default: SPATSPEC_THREADS or all cores)");

    Common fit_args;
    auto* fit = app.add_subcommand("fit", "Profile QMLE of the series alternative");
    add_common(fit, fit_args);

    Common test_args;
    std::string null_name = "linear";
    int boot_b = 0;
    std::uint64_t seed = 1;
    auto* test = app.add_subcommand("test", "Specification test with optional bootstrap");
    add_common(test, test_args);
    test->add_option("--null", null_name, "Null family: linear or constant")->capture_default_str();
    test->add_option("--boot", boot_b, "Bootstrap replications (0 for none)")->check(CLI::NonNegativeNumber);
    test->add_option("--seed", seed, "Bootstrap seed")->capture_default_str();
    test->add_option("--threads", threads, "Worker threads");

    std::string design;
    std::string sim_out;
    int reps = 0;
    bool sim_json = false;
    auto* sim = app.add_subcommand("simulate", "Monte Carlo rejection table");
    sim->add_option("--design", design, "Design JSON")->required();
    sim->add_option("--out", sim_out, "Table CSV; a JSON sidecar is written next to it");
    sim->add_option("--reps", reps, "Override the design's replication count")->check(CLI::NonNegativeNumber);
    sim->add_option("--threads", threads, "Worker threads");
    sim->add_flag("--json", sim_json, "Print the JSON sidecar to stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }
    if (threads < 1) threads = 1;

    try {
        if (*fit) return cmd_fit(fit_args);
        if (*test) return cmd_test(test_args, null_name, boot_b, seed, threads);
        return cmd_simulate(design, sim_out, threads, reps, sim_json);
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const StageError& e) {
        std::cerr << "error in " << e.what() << '\n';
        return e.kind() == StageError::Kind::invalid_input ? kData : kNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const SingularCovariance& e) {
        std::cerr << "numerical failure (singular covariance): " << e.what() << '\n';
        return kNumeric;
    } catch (const RankDeficientDesign& e) {
        std::cerr << "numerical failure (rank-deficient design): " << e.what() << '\n';
        return kNumeric;
    } catch (const AllEvaluationsFailed& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumeric;
    }
}
