#pragma once

#include "spatspec/common.hpp"

#include "json.hpp"

#include <vector>

namespace spatspec {

[[nodiscard]] inline nlohmann::json vector_json(const Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

[[nodiscard]] inline Vector json_vector(const nlohmann::json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

}  // namespace spatspec
