#pragma once

#include "spatspec/covariance.hpp"
#include "spatspec/qmle.hpp"
#include "spatspec/weights.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace spatspec {

/// Numeric CSV; a first line with any non-numeric field is taken as a header.
/// Throws DataError on a missing file, ragged rows or unparsable cells.
[[nodiscard]] Matrix read_matrix_csv(const std::filesystem::path& path);
/// Single-column CSV.
[[nodiscard]] Vector read_vector_csv(const std::filesystem::path& path);
/// 0/1 matrix CSV.
[[nodiscard]] Mask read_mask_csv(const std::filesystem::path& path);

/**
 * @brief Estimation model read from JSON.
 *
 * Keys: "family" (iid, sem, sma, sarma, mess, npw, matern, powered_exp), "weights",
 * "ar_weights", "ma_weights", "sar_weights" (lists of weight files), "distances" and
 * "mask" (CSV files, npw and isotropic), "order" (npw), "space" ({lower, upper,
 * log_scale} over lambda then gamma). Relative paths resolve against `base_dir`.
 * Families that take weights fall back to `default_weights` when none are listed.
 */
struct ModelConfig {
    CovarianceModel cov;
    WeightStack sar;
    std::optional<ParamSpace> space;
};

[[nodiscard]] ModelConfig parse_model_config(const nlohmann::json& j, const std::filesystem::path& base_dir,
                                             Index n, const std::vector<WeightMatrix>& default_weights);

/// "linear" or "constant".
[[nodiscard]] NullFamily parse_null_family(const std::string& name);

}  // namespace spatspec
