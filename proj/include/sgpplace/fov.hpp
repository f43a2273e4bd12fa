#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "sgpplace/gp.hpp"
#include "sgpplace/kernels.hpp"
#include "sgpplace/svgp.hpp"

namespace sgpplace {

/// Fan-beam sensors sitting on the boundary of a circular observation disk.
/// Each sensor emits `rays` rays spread evenly over `fan_angle` about the
/// diameter through its position, and each ray is sampled at
/// `points_per_ray` points along its chord with a half-step offset.
struct FanGeometry {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 1.0;
  double fan_angle = 0.5;
  int rays = 1;
  int points_per_ray = 1;

  int points_per_sensor() const { return rays * points_per_ray; }
  void validate() const;
};

/// Wraps every angle into [0, 2 pi).
Eigen::VectorXd wrap_angles(const Eigen::Ref<const Eigen::VectorXd>& angles);

/// Position on the disk boundary for each angle, one row per sensor.
Eigen::MatrixXd sensor_positions(const Eigen::Ref<const Eigen::VectorXd>& angles, const FanGeometry& geom);

/// Field-of-view points, shape (m p) x 2, sensor-major then ray-major.
Eigen::MatrixXd expansion_transform(const Eigen::Ref<const Eigen::VectorXd>& angles, const FanGeometry& geom);

/// d(point)/d(own sensor angle) for every row of expansion_transform.
Eigen::MatrixXd expansion_jacobian(const Eigen::Ref<const Eigen::VectorXd>& angles, const FanGeometry& geom);

/// Block-averaging matrix of shape (m p) x m: column j holds 1/p on rows
/// j p .. j p + p - 1.
Eigen::MatrixXd aggregation_matrix(Eigen::Index m, Eigen::Index p);

/// Collapsed bound with the inducing covariances replaced by their
/// aggregated versions T^T K_pp T and T^T K_pn. The data-fit term is used
/// when `train` carries labels.
double transformed_elbo(const KernelSpec& spec, const Dataset& train, const Eigen::Ref<const Eigen::VectorXd>& angles,
                        const FanGeometry& geom);

struct TransformedElboWithGrad {
  double elbo = 0.0;
  Eigen::VectorXd grad;  // d F / d angles
};
TransformedElboWithGrad transformed_elbo_with_grad(const KernelSpec& spec, const Dataset& train,
                                                   const Eigen::Ref<const Eigen::VectorXd>& angles,
                                                   const FanGeometry& geom);

/// n i.i.d. uniform points in the disk.
Eigen::MatrixXd sample_disk(const FanGeometry& geom, Eigen::Index n, std::uint64_t seed);

struct FovOptions {
  double learning_rate = 1e-2;
  int max_iters = 3000;
  std::uint64_t seed = 0;
  /// Stop once the best bound gained at most rel_tolerance times its total
  /// gain over the last `patience` iterations. patience <= 0 disables early
  /// stopping.
  double rel_tolerance = 1e-4;
  int patience = 50;
};

struct FovPlacement {
  Eigen::VectorXd angles;
  double elbo = 0.0;
  double initial_elbo = 0.0;
  int iterations = 0;
};

/// Gradient ascent of the label-free transformed bound over s sensor angles,
/// using n uniform samples in the disk. Returns the best iterate.
FovPlacement fov_continuous_placement(const KernelSpec& spec, const FanGeometry& geom, Eigen::Index s, Eigen::Index n,
                                      const FovOptions& opts = {});

}  // namespace sgpplace
