#include "sgpplace/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "sgpplace/errors.hpp"

namespace sgpplace {

namespace {

const Json& field(const Json& j, const char* key, const char* owner) {
  if (!j.is_object()) throw ParseError(std::string(owner) + " must be a JSON object");
  const auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string(owner) + " is missing \"" + key + "\"");
  return *it;
}

double number(const Json& j, const char* what) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) throw ParseError(std::string(what) + " must be a number");
  return j.get<double>();
}

Json nullable(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

int integer(const Json& j, const char* what) {
  if (!j.is_number_integer()) throw ParseError(std::string(what) + " must be an integer");
  return j.get<int>();
}

bool is_discrete(PlacementMethod m) {
  return m == PlacementMethod::greedy_sgp || m == PlacementMethod::discrete_sgp || m == PlacementMethod::greedy_mi;
}

}  // namespace

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

Json matrix_to_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + " must be an array of rows");
  if (j.empty()) return Eigen::MatrixXd(0, 0);
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      throw ParseError(std::string(what) + ": row " + std::to_string(i + 1) + " has the wrong length");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      const double v = number(j[i][k], what);
      if (!std::isfinite(v)) throw ParseError(std::string(what) + " entries must be finite");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v;
    }
  }
  return m;
}

Json kernel_to_json(const KernelSpec& spec) {
  return Json{{"family", std::string(to_string(spec.family))},
              {"variance", spec.variance},
              {"lengthscale", std::vector<double>(spec.lengthscale.data(), spec.lengthscale.data() + spec.lengthscale.size())},
              {"noise_variance", spec.noise_variance}};
}

KernelSpec kernel_from_json(const Json& j) {
  KernelSpec spec;
  const Json& family = field(j, "family", "kernel");
  if (!family.is_string()) throw ParseError("kernel \"family\" must be a string");
  try {
    spec.family = kernel_family_from_string(family.get<std::string>());
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
  spec.variance = number(field(j, "variance", "kernel"), "kernel variance");
  spec.noise_variance = number(field(j, "noise_variance", "kernel"), "kernel noise_variance");
  const Json& ls = field(j, "lengthscale", "kernel");
  if (ls.is_number()) {
    spec.lengthscale = Eigen::VectorXd::Constant(1, ls.get<double>());
  } else if (ls.is_array() && !ls.empty()) {
    spec.lengthscale.resize(static_cast<Eigen::Index>(ls.size()));
    for (std::size_t i = 0; i < ls.size(); ++i) spec.lengthscale(static_cast<Eigen::Index>(i)) = number(ls[i], "lengthscale");
  } else {
    throw ParseError("kernel \"lengthscale\" must be a number or a non-empty array");
  }
  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("invalid kernel: ") + e.what());
  }
  return spec;
}

KernelSpec load_kernel(const std::filesystem::path& path) {
  try {
    return kernel_from_json(read_json(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

Json environment_to_json(const Environment& env) {
  Json j{{"bounds", matrix_to_json(env.bounds)}, {"obstacles", Json::array()}};
  for (const auto& poly : env.obstacles) {
    Json p = Json::array();
    for (const auto& v : poly) p.push_back({v.x(), v.y()});
    j["obstacles"].push_back(std::move(p));
  }
  if (env.candidates) j["candidates"] = matrix_to_json(*env.candidates);
  return j;
}

Environment environment_from_json(const Json& j, const std::filesystem::path& base_dir) {
  Environment env;
  env.bounds = matrix_from_json(field(j, "bounds", "environment"), "bounds");
  if (env.bounds.rows() < 1 || env.bounds.cols() != 2) throw ParseError("bounds must be a list of [low, high] pairs");
  if (j.contains("obstacles")) {
    const Json& obs = j["obstacles"];
    if (!obs.is_array()) throw ParseError("obstacles must be an array of polygons");
    for (const Json& poly : obs) {
      const Eigen::MatrixXd v = matrix_from_json(poly, "obstacle");
      if (v.cols() != 2) throw ParseError("obstacle vertices must be [x, y] pairs");
      Polygon p;
      for (Eigen::Index i = 0; i < v.rows(); ++i) p.emplace_back(v(i, 0), v(i, 1));
      env.obstacles.push_back(std::move(p));
    }
  }
  if (j.contains("candidates") && j.contains("candidates_path")) {
    throw ParseError("environment sets both \"candidates\" and \"candidates_path\"");
  }
  if (j.contains("candidates")) {
    env.candidates = matrix_from_json(j["candidates"], "candidates");
  } else if (j.contains("candidates_path")) {
    if (!j["candidates_path"].is_string()) throw ParseError("candidates_path must be a string");
    std::filesystem::path p = j["candidates_path"].get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    env.candidates = load_dataset(p).inputs;
  }
  if (env.candidates && env.candidates->cols() != env.dim()) {
    throw ParseError("candidates have " + std::to_string(env.candidates->cols()) + " columns but bounds have " +
                     std::to_string(env.dim()) + " dimensions");
  }
  try {
    env.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("invalid environment: ") + e.what());
  }
  return env;
}

Environment load_environment(const std::filesystem::path& path) {
  try {
    return environment_from_json(read_json(path), path.parent_path());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

Json fan_to_json(const FanGeometry& geom) {
  return Json{{"center", {geom.center.x(), geom.center.y()}},
              {"radius", geom.radius},
              {"fan_angle", geom.fan_angle},
              {"rays", geom.rays},
              {"points_per_ray", geom.points_per_ray}};
}

FanGeometry fan_from_json(const Json& j) {
  FanGeometry g;
  const Json& c = field(j, "center", "fan geometry");
  if (!c.is_array() || c.size() != 2) throw ParseError("fan center must be [x, y]");
  g.center = Eigen::Vector2d(number(c[0], "center"), number(c[1], "center"));
  g.radius = number(field(j, "radius", "fan geometry"), "radius");
  g.fan_angle = number(field(j, "fan_angle", "fan geometry"), "fan_angle");
  g.rays = integer(field(j, "rays", "fan geometry"), "rays");
  g.points_per_ray = integer(field(j, "points_per_ray", "fan geometry"), "points_per_ray");
  try {
    g.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("invalid fan geometry: ") + e.what());
  }
  return g;
}

Json placement_to_json(const PlacementResult& r) {
  Json metrics = Json::object();
  for (const auto& [k, v] : r.metrics) metrics[k] = nullable(v);
  Json j{{"method", std::string(to_string(r.method))},
         {"num_sensors", r.num_sensors()},
         {"locations", matrix_to_json(r.locations)},
         {"elbo", nullable(r.elbo)},
         {"seed", r.seed},
         {"wall_time", r.wall_time},
         {"metrics", std::move(metrics)}};
  if (r.angles) {
    j["angles"] = std::vector<double>(r.angles->data(), r.angles->data() + r.angles->size());
  }
  return j;
}

PlacementResult placement_from_json(const Json& j) {
  PlacementResult r;
  const Json& method = field(j, "method", "placement");
  if (!method.is_string()) throw ParseError("placement \"method\" must be a string");
  try {
    r.method = placement_method_from_string(method.get<std::string>());
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
  r.locations = matrix_from_json(field(j, "locations", "placement"), "locations");
  const Json& count = field(j, "num_sensors", "placement");
  if (!count.is_number_integer() || count.get<Eigen::Index>() != r.locations.rows()) {
    throw ParseError("num_sensors does not match the number of locations");
  }
  r.elbo = number(field(j, "elbo", "placement"), "elbo");
  const Json& seed = field(j, "seed", "placement");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
    throw ParseError("seed must be a non-negative integer");
  }
  r.seed = seed.get<std::uint64_t>();
  r.wall_time = number(field(j, "wall_time", "placement"), "wall_time");
  const Json& metrics = field(j, "metrics", "placement");
  if (!metrics.is_object()) throw ParseError("metrics must be an object");
  for (const auto& [k, v] : metrics.items()) r.metrics[k] = number(v, "metric");
  if (j.contains("angles")) {
    const Json& a = j["angles"];
    if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != r.locations.rows()) {
      throw ParseError("angles must hold one value per sensor");
    }
    Eigen::VectorXd angles(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) angles(static_cast<Eigen::Index>(i)) = number(a[i], "angle");
    r.angles = angles;
  }
  return r;
}

PlacementResult load_placement(const std::filesystem::path& path) {
  try {
    return placement_from_json(read_json(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void validate_placement(const PlacementResult& r, const Environment& env) {
  if (r.num_sensors() < 1) throw ParseError("placement has no locations");
  if (r.locations.cols() != env.dim()) throw ParseError("placement dimension does not match the environment");
  for (Eigen::Index i = 0; i < r.num_sensors(); ++i) {
    const Eigen::VectorXd p = r.locations.row(i).transpose();
    if (!env.in_bounds(p, 1e-9)) throw ParseError("location " + std::to_string(i + 1) + " is outside the bounds");
    if (env.in_obstacle(p)) throw ParseError("location " + std::to_string(i + 1) + " is inside an obstacle");
  }
  if (!is_discrete(r.method) || !env.candidates) return;
  const Eigen::MatrixXd& cand = *env.candidates;
  std::set<Eigen::Index> used;
  for (Eigen::Index i = 0; i < r.num_sensors(); ++i) {
    Eigen::Index hit = -1;
    for (Eigen::Index j = 0; j < cand.rows() && hit < 0; ++j) {
      if (cand.row(j) == r.locations.row(i)) hit = j;
    }
    if (hit < 0) throw ParseError("location " + std::to_string(i + 1) + " is not a candidate");
    if (!used.insert(hit).second) throw ParseError("location " + std::to_string(i + 1) + " repeats a candidate");
  }
}

}  // namespace sgpplace
