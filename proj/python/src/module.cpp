// Thin bindings: arrays in, JSON text out; the Python package parses the JSON.

#include "spatspec/spatspec.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace spatspec;
using nlohmann::json;

namespace {

std::vector<WeightMatrix> to_weights(const std::vector<Matrix>& dense) {
    std::vector<WeightMatrix> out;
    out.reserve(dense.size());
    for (const auto& d : dense) out.push_back(WeightMatrix::from_dense(d));
    return out;
}

CovarianceModel make_model(const std::string& family, Index n, const std::vector<Matrix>& weights,
                           const std::vector<Matrix>& ma_weights) {
    if (family == "iid") return CovarianceModel::iid(n);
    if (weights.empty()) throw std::invalid_argument("family '" + family + "' needs weights");
    if (family == "sem") return CovarianceModel::sem(to_weights(weights));
    if (family == "sma") return CovarianceModel::sma(to_weights(weights));
    if (family == "mess") return CovarianceModel::mess(to_weights(weights));
    if (family == "sarma") {
        if (ma_weights.empty()) throw std::invalid_argument("sarma needs ma_weights");
        return CovarianceModel::sarma(to_weights(weights), to_weights(ma_weights));
    }
    throw std::invalid_argument("unknown family '" + family + "'");
}

BasisSpec parse_basis(const std::string& basis_json) { return json::parse(basis_json).get<BasisSpec>(); }

TestInput make_input(const Vector& y, const Matrix& x, const std::string& family, const std::vector<Matrix>& weights,
                     const std::vector<Matrix>& ma_weights, const std::vector<Matrix>& sar_weights,
                     const std::string& basis_json, const std::string& null_name) {
    TestInput in;
    in.y = y;
    in.x = x;
    in.basis = parse_basis(basis_json);
    in.cov = make_model(family, y.size(), weights, ma_weights);
    if (!sar_weights.empty()) in.sar = WeightStack(to_weights(sar_weights));
    in.null_family = parse_null_family(null_name);
    return in;
}

}  // namespace

PYBIND11_MODULE(_spatspec, m) {
    m.doc() = "Series-based specification tests under spatial dependence";

    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<SingularCovariance>(m, "SingularCovariance", PyExc_ArithmeticError);
    py::register_exception<RankDeficientDesign>(m, "RankDeficientDesign", PyExc_ArithmeticError);
    py::register_exception<StageError>(m, "StageError", PyExc_RuntimeError);

    m.def(
        "knn_weights",
        [](const Matrix& coords, Index k, bool row_normalize) { return knn_weights(coords, k, row_normalize).to_dense(); },
        py::arg("coords"), py::arg("k"), py::arg("row_normalize") = true);

    m.def(
        "design", [](const Matrix& x, const std::string& basis_json) { return build_design(x, parse_basis(basis_json)).psi; },
        py::arg("x"), py::arg("basis_json"));

    m.def(
        "covariance",
        [](const std::string& family, const Vector& gamma, const std::vector<Matrix>& weights,
           const std::vector<Matrix>& ma_weights) {
            const Index n = weights.empty() ? 0 : weights.front().rows();
            return eval_sigma(make_model(family, n, weights, ma_weights), gamma).sigma;
        },
        py::arg("family"), py::arg("gamma"), py::arg("weights"), py::arg("ma_weights") = std::vector<Matrix>{});

    m.def(
        "fit",
        [](const Vector& y, const Matrix& x, const std::string& family, const std::vector<Matrix>& weights,
           const std::vector<Matrix>& ma_weights, const std::vector<Matrix>& sar_weights,
           const std::string& basis_json) {
            const TestInput in = make_input(y, x, family, weights, ma_weights, sar_weights, basis_json, "linear");
            const Matrix psi = build_design(x, in.basis).psi;
            const ParamSpace space =
                ParamSpace::concat(ParamSpace::default_sar(in.sar.size()), ParamSpace::default_for(in.cov));
            py::gil_scoped_release release;
            return json(fit_qmle_sar(in.y, psi, in.sar, in.cov, space)).dump();
        },
        py::arg("y"), py::arg("x"), py::arg("family"), py::arg("weights"), py::arg("ma_weights"),
        py::arg("sar_weights"), py::arg("basis_json"));

    m.def(
        "test",
        [](const Vector& y, const Matrix& x, const std::string& family, const std::vector<Matrix>& weights,
           const std::vector<Matrix>& ma_weights, const std::vector<Matrix>& sar_weights,
           const std::string& basis_json, const std::string& null_name, int boot, std::uint64_t seed, int threads) {
            const TestInput in = make_input(y, x, family, weights, ma_weights, sar_weights, basis_json, null_name);
            py::gil_scoped_release release;
            TestResult r = run_test(in);
            if (boot > 0) r.boot = bootstrap_pvalues(in, r, {boot, seed, threads, 3});
            return json(r).dump();
        },
        py::arg("y"), py::arg("x"), py::arg("family"), py::arg("weights"), py::arg("ma_weights"),
        py::arg("sar_weights"), py::arg("basis_json"), py::arg("null"), py::arg("boot"), py::arg("seed"),
        py::arg("threads"));

    m.def(
        "simulate",
        [](const std::string& design_json, int threads) {
            const McDesign d = json::parse(design_json).get<McDesign>();
            RejectionTable t;
            {
                py::gil_scoped_release release;
                t = run_mc(d, threads);
            }
            std::ostringstream csv;
            write_table_csv(t, csv);
            return py::make_tuple(csv.str(), table_json(t).dump());
        },
        py::arg("design_json"), py::arg("threads") = 1);
}
