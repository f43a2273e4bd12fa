#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <filesystem>

#include "sgpplace/environment.hpp"
#include "sgpplace/fov.hpp"
#include "sgpplace/kernels.hpp"
#include "sgpplace/placement.hpp"

namespace sgpplace {

using Json = nlohmann::json;

/// Reads and parses a JSON file. Missing files raise IoError naming the path,
/// malformed content raises ParseError.
Json read_json(const std::filesystem::path& path);
/// Writes `j` indented by two spaces with a trailing newline.
void write_json(const Json& j, const std::filesystem::path& path);

Json matrix_to_json(const Eigen::Ref<const Eigen::MatrixXd>& m);
/// Rows of equal length; `what` names the field in error messages.
Eigen::MatrixXd matrix_from_json(const Json& j, const char* what);

/// {"family":"rbf","variance":1.0,"lengthscale":[0.2],"noise_variance":0.1}
Json kernel_to_json(const KernelSpec& spec);
KernelSpec kernel_from_json(const Json& j);
KernelSpec load_kernel(const std::filesystem::path& path);

/// {"bounds":[[0,1],[0,1]],"obstacles":[[[x,y],...],...]} plus either
/// "candidates_path" (CSV, resolved against `base_dir`) or inline
/// "candidates" rows. Writing always inlines candidates.
Json environment_to_json(const Environment& env);
Environment environment_from_json(const Json& j, const std::filesystem::path& base_dir);
Environment load_environment(const std::filesystem::path& path);

/// {"center":[x,y],"radius":r,"fan_angle":a,"rays":k,"points_per_ray":t}
Json fan_to_json(const FanGeometry& geom);
FanGeometry fan_from_json(const Json& j);

/// NaN bound and metric values are written as null and read back as NaN.
Json placement_to_json(const PlacementResult& r);
PlacementResult placement_from_json(const Json& j);
PlacementResult load_placement(const std::filesystem::path& path);

/// Checks the placement type invariants against `env`: row count, dimension,
/// bounds, obstacles and, for discrete methods, distinct candidate members.
/// Throws ParseError describing the first violation.
void validate_placement(const PlacementResult& r, const Environment& env);

}  // namespace sgpplace
