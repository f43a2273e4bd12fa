#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sgpplace/environment.hpp"
#include "sgpplace/kernels.hpp"

namespace sgpplace {

enum class PlacementMethod { continuous_sgp, greedy_sgp, discrete_sgp, greedy_mi, random, fov_sgp };

std::string_view to_string(PlacementMethod method);
/// Throws InvalidArgument listing the valid names.
PlacementMethod placement_method_from_string(std::string_view name);
const std::vector<std::string>& placement_method_names();

struct PlacementResult {
  PlacementMethod method = PlacementMethod::continuous_sgp;
  /// s x d sensor locations. For fov-sgp these are the sensor positions on
  /// the disk boundary and `angles` holds the optimized parameters.
  Eigen::MatrixXd locations;
  /// Label-free bound of the solution; NaN when not computed.
  double elbo = 0.0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;
  std::map<std::string, double> metrics;
  std::optional<Eigen::VectorXd> angles;

  Eigen::Index num_sensors() const { return locations.rows(); }
};

enum class AssignmentCost { distance, covariance };

struct PlacementOptions {
  double learning_rate = 1e-2;
  int max_iters = 3000;
  std::uint64_t seed = 0;
  /// Unlabeled samples drawn from the environment; 0 selects default_num_samples(s).
  Eigen::Index num_samples = 0;
  /// Gradient ascent stops early once the best bound gained at most
  /// rel_tolerance times its total gain over the last `patience` iterations.
  double rel_tolerance = 1e-3;
  int patience = 25;
  AssignmentCost assignment_cost = AssignmentCost::distance;
};

Eigen::Index default_num_samples(Eigen::Index s);

/// Label-free collapsed bound of `inducing` over training inputs `x`.
double label_free_elbo(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x,
                       const Eigen::Ref<const Eigen::MatrixXd>& inducing);

/// The unlabeled training inputs a placement run with this seed uses.
Eigen::MatrixXd placement_samples(const Environment& env, Eigen::Index n, std::uint64_t seed);

struct InducingAscent {
  Eigen::MatrixXd inducing;
  double elbo = 0.0;
  double initial_elbo = 0.0;
  int iterations = 0;
};

/// Adam ascent of the label-free bound in the inducing locations, kept inside
/// the bounds and outside obstacles. Returns the best iterate.
InducingAscent optimize_inducing(const Environment& env, const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x,
                                 const Eigen::Ref<const Eigen::MatrixXd>& init, const PlacementOptions& opts);

PlacementResult continuous_sgp(const Environment& env, const KernelSpec& spec, Eigen::Index s,
                               const PlacementOptions& opts = {});

struct GreedySelection {
  std::vector<int> indices;
  /// Bound after each pick.
  std::vector<double> elbos;
};

/// Greedy bound maximization over candidate rows with training inputs `x`.
/// Ties go to the lowest candidate index.
GreedySelection greedy_sgp_select(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x,
                                  const Eigen::Ref<const Eigen::MatrixXd>& candidates, Eigen::Index s);

PlacementResult greedy_sgp(const Environment& env, const KernelSpec& spec, Eigen::Index s,
                           const PlacementOptions& opts = {});

/// Snaps continuous locations onto distinct candidates by solving the
/// assignment problem with the chosen cost.
std::vector<int> map_to_candidates(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& locations,
                                   const Eigen::Ref<const Eigen::MatrixXd>& candidates, AssignmentCost cost);

PlacementResult discrete_sgp(const Environment& env, const KernelSpec& spec, Eigen::Index s,
                             const PlacementOptions& opts = {});

/// Uniform obstacle-free draws, or a uniform subset of the candidates when
/// `discrete`. The bound is left as NaN.
PlacementResult random_placement(const Environment& env, Eigen::Index s, std::uint64_t seed, bool discrete);

}  // namespace sgpplace
