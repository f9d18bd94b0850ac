#include "spatspec/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace spatspec {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r\"");
        const auto e = cell.find_last_not_of(" \t\r\"");
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    return out;
}

bool parse_double(const std::string& s, double& v) {
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<WeightMatrix> read_weight_list(const nlohmann::json& j, const std::filesystem::path& base, Index n) {
    std::vector<WeightMatrix> out;
    const auto paths = j.is_array() ? j.get<std::vector<std::string>>() : std::vector<std::string>{j.get<std::string>()};
    for (const auto& p : paths) {
        WeightMatrix w = read_weights_csv(base / p, n);
        if (w.n() != n) throw DataError("weights file " + p + " has dimension " + std::to_string(w.n()) +
                                        ", expected " + std::to_string(n));
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace

Matrix read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split(line);
        std::vector<double> row(cells.size());
        bool numeric = true;
        for (std::size_t i = 0; i < cells.size(); ++i) numeric = numeric && parse_double(cells[i], row[i]);
        if (!numeric) {
            if (rows.empty() && line_no == 1) continue;  // header
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": non-numeric value");
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError(path.string() + ": no data rows");
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    if (!m.allFinite()) throw DataError(path.string() + ": non-finite value");
    return m;
}

Vector read_vector_csv(const std::filesystem::path& path) {
    const Matrix m = read_matrix_csv(path);
    if (m.cols() != 1) throw DataError(path.string() + ": expected a single column");
    return m.col(0);
}

Mask read_mask_csv(const std::filesystem::path& path) {
    const Matrix m = read_matrix_csv(path);
    if (((m.array() != 0.0) && (m.array() != 1.0)).any()) throw DataError(path.string() + ": mask must be 0/1");
    return m.array() != 0.0;
}

ModelConfig parse_model_config(const nlohmann::json& j, const std::filesystem::path& base_dir, Index n,
                               const std::vector<WeightMatrix>& default_weights) {
    try {
        const auto family = j.at("family").get<std::string>();
        auto weights_or_default = [&](const char* key) {
            if (j.contains(key)) return read_weight_list(j.at(key), base_dir, n);
            if (default_weights.empty()) throw DataError(std::string("model: '") + key + "' not given and no --weights");
            return default_weights;
        };
        ModelConfig cfg;
        if (family == "iid") {
            cfg.cov = CovarianceModel::iid(n);
        } else if (family == "sem") {
            cfg.cov = CovarianceModel::sem(weights_or_default("weights"));
        } else if (family == "sma") {
            cfg.cov = CovarianceModel::sma(weights_or_default("weights"));
        } else if (family == "sarma") {
            cfg.cov = CovarianceModel::sarma(weights_or_default("ar_weights"), weights_or_default("ma_weights"));
        } else if (family == "mess") {
            cfg.cov = CovarianceModel::mess(weights_or_default("weights"));
        } else if (family == "npw") {
            const Matrix d = read_matrix_csv(base_dir / j.at("distances").get<std::string>());
            const Mask mask = read_mask_csv(base_dir / j.at("mask").get<std::string>());
            if (d.rows() != n || mask.rows() != n) throw DataError("model: distances/mask must be n x n");
            cfg.cov = CovarianceModel::nonpar_distance(d, mask, j.value("order", 2));
        } else if (family == "matern" || family == "powered_exp") {
            const Matrix d = read_matrix_csv(base_dir / j.at("distances").get<std::string>());
            if (d.rows() != n || d.cols() != n) throw DataError("model: distances must be n x n");
            cfg.cov = CovarianceModel::isotropic(family == "matern" ? IsotropicKind::matern : IsotropicKind::powered_exp, d);
        } else {
            throw DataError("model: unknown family '" + family + "'");
        }
        if (j.contains("sar_weights")) cfg.sar = WeightStack(read_weight_list(j.at("sar_weights"), base_dir, n));
        if (j.contains("space")) {
            cfg.space = j.at("space").get<ParamSpace>();
            if (cfg.space->dim() != cfg.sar.size() + cfg.cov.params_dim())
                throw DataError("model: space must have one coordinate per SAR lag and covariance parameter");
        }
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("model: ") + e.what());
    }
}

NullFamily parse_null_family(const std::string& name) {
    if (name == "linear") return NullFamily::linear();
    if (name == "constant") return NullFamily::constant();
    throw DataError("unknown null family '" + name + "'");
}

}  // namespace spatspec
