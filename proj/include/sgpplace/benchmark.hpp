#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sgpplace/environment.hpp"
#include "sgpplace/fov.hpp"
#include "sgpplace/kernels.hpp"
#include "sgpplace/metrics.hpp"
#include "sgpplace/placement.hpp"

namespace sgpplace {

struct MethodRequest {
  PlacementMethod method = PlacementMethod::continuous_sgp;
  Eigen::Index num_sensors = 1;
  PlacementOptions options;
  /// Stand-in for the environment in greedy-mi; drawn from the environment
  /// when absent.
  std::optional<EvaluationGrid> grid;
  /// Required by fov-sgp.
  std::optional<FanGeometry> fan;
  /// random: pick from the candidates instead of sampling the region.
  bool discrete_random = false;
};

/// Default number of uniform samples standing in for the environment.
inline constexpr Eigen::Index kDefaultGridSize = 2500;

/// Uniform stand-in grid for `env`, seeded independently of placement samples.
Eigen::MatrixXd stand_in_grid(const Environment& env, Eigen::Index size, std::uint64_t seed);

/// Dispatches to the placement method named in the request.
PlacementResult run_method(const Environment& env, const KernelSpec& spec, const MethodRequest& req);

/// Evaluation context over a labeled truth grid. MI uses the whole grid as the
/// unobserved set; KL uses disjoint random train/test subsets of the grid.
class PlacementEvaluator {
 public:
  PlacementEvaluator(const KernelSpec& spec, EvaluationGrid truth, Eigen::Index kl_train, Eigen::Index kl_test,
                     std::uint64_t seed);

  double rmse(const Eigen::Ref<const Eigen::MatrixXd>& locations) const;
  double mi(const Eigen::Ref<const Eigen::MatrixXd>& locations) const;
  /// NaN when KL was disabled (kl_train = 0).
  double kl(const Eigen::Ref<const Eigen::MatrixXd>& locations) const;
  const EvaluationGrid& truth() const { return truth_; }

 private:
  KernelSpec spec_;
  EvaluationGrid truth_;
  std::shared_ptr<const MiEvaluator> mi_;
  Dataset kl_train_;
  Eigen::MatrixXd kl_test_;
};

struct BenchmarkConfig {
  Environment env;
  KernelSpec spec;
  std::vector<PlacementMethod> methods{PlacementMethod::continuous_sgp, PlacementMethod::greedy_sgp,
                                       PlacementMethod::discrete_sgp, PlacementMethod::greedy_mi,
                                       PlacementMethod::random};
  std::vector<Eigen::Index> num_sensors{5, 10};
  int seeds = 3;
  std::uint64_t seed = 0;
  Eigen::Index grid_size = kDefaultGridSize;
  /// Candidates drawn when the environment has none.
  Eigen::Index num_candidates = 150;
  PlacementOptions placement;
  std::optional<FanGeometry> fan;
  /// Train/test sizes for the exact KL column; 0 disables it.
  Eigen::Index kl_train = 300;
  Eigen::Index kl_test = 200;
  int jobs = 1;
};

struct BenchmarkRow {
  PlacementMethod method = PlacementMethod::continuous_sgp;
  Eigen::Index num_sensors = 0;
  std::uint64_t seed = 0;
  double elbo = 0.0;
  double rmse = 0.0;
  double mi = 0.0;
  double kl = 0.0;
  double wall_time = 0.0;
  /// "ok" or "error: <message>".
  std::string status;
};

/// One row per (method, s, replicate). Replicate r at sensor count index k
/// uses seed `seed + k * seeds + r`, shared by every method so rows pair up.
/// Failures are recorded in the status column, never skipped.
std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& config);

/// CSV with header method,s,seed,elbo,rmse,mi,kl,wall_time,status. Numbers use
/// 17 significant digits; NaN is an empty field. Without timing the wall_time
/// column is written as 0 so reruns are byte-identical.
void write_benchmark_csv(const std::vector<BenchmarkRow>& rows, const std::filesystem::path& path, bool timing);

/// Reads back a benchmark CSV and checks its header and row shape. Throws
/// ParseError with the offending row.
std::vector<BenchmarkRow> read_benchmark_csv(const std::filesystem::path& path);

}  // namespace sgpplace
