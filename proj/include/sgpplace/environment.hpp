#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "sgpplace/gp.hpp"
#include "sgpplace/kernels.hpp"

namespace sgpplace {

using Polygon = std::vector<Eigen::Vector2d>;

/// Ray-casting parity test. Points on an edge or vertex count as inside.
/// Throws InvalidArgument for fewer than three vertices, non-finite vertices
/// or zero signed area.
bool point_in_polygon(const Eigen::Vector2d& p, const Polygon& poly);

/// Axis-aligned region with polygonal obstacles (2D only) and an optional
/// discrete candidate set.
struct Environment {
  /// d x 2, column 0 = low, column 1 = high.
  Eigen::MatrixXd bounds;
  std::vector<Polygon> obstacles;
  std::optional<Eigen::MatrixXd> candidates;

  static Environment box(const Eigen::Ref<const Eigen::VectorXd>& low, const Eigen::Ref<const Eigen::VectorXd>& high);
  static Environment unit_square() { return box(Eigen::Vector2d::Zero(), Eigen::Vector2d::Ones()); }

  Eigen::Index dim() const { return bounds.rows(); }
  Eigen::VectorXd low() const { return bounds.col(0); }
  Eigen::VectorXd high() const { return bounds.col(1); }

  bool in_bounds(const Eigen::Ref<const Eigen::VectorXd>& p, double tol = 0.0) const;
  /// True when p lies inside or on the boundary of any obstacle.
  bool in_obstacle(const Eigen::Ref<const Eigen::VectorXd>& p) const;
  bool feasible(const Eigen::Ref<const Eigen::VectorXd>& p) const { return in_bounds(p) && !in_obstacle(p); }

  /// Clamps each coordinate into the bounds.
  void clamp(Eigen::Ref<Eigen::VectorXd> p) const;

  /// Checks bounds ordering, polygon validity and simplicity, and that
  /// candidates are feasible. Throws InvalidArgument.
  void validate() const;

  const Eigen::MatrixXd& require_candidates() const;
};

/// n i.i.d. uniform draws over the bounds, rejecting points in obstacles.
/// Throws EnvironmentDegenerate when fewer than 1% of the first 10^6
/// attempts are accepted.
Eigen::MatrixXd sample_uniform(const Environment& env, Eigen::Index n, std::uint64_t seed);

/// Nearest point of the polygon boundary to p.
Eigen::Vector2d nearest_boundary_point(const Eigen::Vector2d& p, const Polygon& poly);

/// Evaluation points with optional ground-truth values.
struct EvaluationGrid {
  Eigen::MatrixXd points;
  std::optional<Eigen::VectorXd> labels;

  Eigen::Index size() const { return points.rows(); }
};

/// Regular 2D lattice with values at every node; bilinear interpolation
/// inside the lattice extent. values(i, j) belongs to (xs(i), ys(j)).
struct GridField {
  Eigen::VectorXd xs;
  Eigen::VectorXd ys;
  Eigen::MatrixXd values;

  double at(const Eigen::Vector2d& p) const;
  bool contains(const Eigen::Vector2d& p, double tol = 1e-12) const;
  /// Lattice nodes as rows, x index fastest, with their values as labels.
  EvaluationGrid to_grid() const;
};

/// Lattice of nx x ny nodes spanning the bounds of a 2D environment.
Eigen::MatrixXd lattice_points(const Environment& env, int nx, int ny);

/// One draw from N(0, K_gg + 1e-8 I) at the grid points (jitter escalates on
/// factorization failure). Deterministic per seed.
EvaluationGrid synth_field(const Environment& env, const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& grid,
                           std::uint64_t seed);

/// synth_field on an nx x ny lattice, returned as an interpolating field.
GridField synth_grid_field(const Environment& env, const KernelSpec& spec, int nx, int ny, std::uint64_t seed);

/// Straight segment z + t w for t in [0, 1].
struct LineSegment {
  Eigen::Vector2d start;
  Eigen::Vector2d delta;
};

/// Integrated observations y_i = |w_i| * mean of the field at `quad_points`
/// midpoint nodes along segment i, plus N(0, noise_sd^2) noise. Inputs of the
/// returned dataset are rows [z_x, z_y, w_x, w_y]. Throws InvalidArgument when
/// a segment leaves the field extent or quad_points < 2.
Dataset line_integral_data(const GridField& field, const std::vector<LineSegment>& lines, int quad_points,
                           double noise_sd, std::uint64_t seed);

/// CSV with header x1,...,xd[,y]; values written with 17 significant digits.
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& data, const std::filesystem::path& path);

/// Derives an independent RNG seed for a named sub-stream of a run.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace sgpplace
