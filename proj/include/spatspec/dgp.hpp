#pragma once

#include "spatspec/basis.hpp"
#include "spatspec/spec_test.hpp"
#include "spatspec/weights.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace spatspec {

enum class McModel { sararma_0_1_0, sararma_1_0_1, npw_sem };
enum class RegressorSupport { compact_u02pi, gaussian };

struct McDesign {
    McModel model = McModel::sararma_0_1_0;
    Index n = 100;
    std::vector<double> c_values{0.0, 3.0, 6.0};
    BasisSpec basis = BasisSpec::power(3);
    RegressorSupport support = RegressorSupport::compact_u02pi;
    int reps = 500;
    int boot_b = 100;  ///< 0 for asymptotic rates only
    std::vector<double> levels{0.01, 0.05, 0.10};
    std::uint64_t seed = 1;
    int r = 2;               ///< sieve order of the estimated distance weights (npw_sem)
    bool fixed_design = false;  ///< draw regressors and weights once instead of per replication
    Index neighbors = 0;     ///< 0 selects n / 20
    bool symmetric_mask = false;
    double gamma2 = 0.3;
    double lambda1 = 0.3;
    double gamma3 = 0.4;

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
    [[nodiscard]] Index neighbor_count() const { return neighbors > 0 ? neighbors : n / 20; }
};

/// Spatial inputs of one replication: kNN weights, or the distance-weights truth.
struct McWeights {
    WeightMatrix w;
    Matrix distances;
    Mask mask;
};

/// x_1 = (z + z_1) / 2, x_2 = (z + z_2) / 2 with z, z_1, z_2 iid U[0, 2 pi] or N(0, 1).
[[nodiscard]] Matrix gen_regressors(Index n, RegressorSupport support, std::mt19937_64& rng);

/// x'alpha + c p^{1/4} n^{-1/2} sin(x'alpha) with x'alpha = alpha_0 + x alpha_{1:}.
[[nodiscard]] Vector gen_theta(const Matrix& x, const Vector& alpha, double c, Index p, Index n);

/// Coordinates U[0, 1]^2 and row-normalised nearest-neighbour weights, or the npw truth.
[[nodiscard]] McWeights gen_weights(const McDesign& design, std::mt19937_64& rng);

/// Draws xi ~ N(0, I) and returns y for the design's model.
[[nodiscard]] Vector gen_outcome(const McDesign& design, const Vector& theta, const McWeights& weights,
                                 std::mt19937_64& rng);

/// The TestInput estimating the model that matches the design.
[[nodiscard]] TestInput mc_test_input(const McDesign& design, Vector y, Matrix x, const McWeights& weights);

/// Rates for one c value. Rows: statistics (T, T^a); columns: levels.
struct RejectionBlock {
    double c = 0.0;
    int n_ok = 0;
    int n_failed = 0;
    Matrix rates_asym;
    Matrix rates_boot;
    Matrix se_asym;
    Matrix se_boot;
};

struct RejectionTable {
    McDesign design;
    std::vector<RejectionBlock> blocks;
    /// Every block has at least 90% successful replications.
    [[nodiscard]] bool meets_success_rule() const;
};

/// Per-replication outcome for one c value.
struct McRecord {
    bool ok = false;
    double t = kNaN;
    double t_a = kNaN;
    double p_star = kNaN;
    double p_a_star = kNaN;
};

/// Replication `rep` at every c value; c values share regressors, weights and innovations.
[[nodiscard]] std::vector<McRecord> run_replication(const McDesign& design, int rep);

/// Runs all replications on up to `threads` workers. The table is bit-identical for any
/// thread count.
[[nodiscard]] RejectionTable run_mc(const McDesign& design, int threads = 1);

void write_table_csv(const RejectionTable& table, std::ostream& os);
void write_table_csv(const RejectionTable& table, const std::filesystem::path& path);
[[nodiscard]] nlohmann::json table_json(const RejectionTable& table);

void to_json(nlohmann::json& j, const McDesign& d);
void from_json(const nlohmann::json& j, McDesign& d);

}  // namespace spatspec
