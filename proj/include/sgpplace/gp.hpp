#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "sgpplace/kernels.hpp"

namespace sgpplace {

/// Input locations (one row per point) with optional field values.
struct Dataset {
  Eigen::MatrixXd inputs;
  std::optional<Eigen::VectorXd> labels;

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index dim() const { return inputs.cols(); }
  bool labeled() const { return labels.has_value(); }

  /// Throws InvalidArgument on label-count mismatch or non-finite values.
  void validate() const;
};

struct GaussianPrediction {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Exact posterior over latent values at `test`. An empty training set yields
/// the prior.
GaussianPrediction gp_posterior(const KernelSpec& spec, const Dataset& train,
                                const Eigen::Ref<const Eigen::MatrixXd>& test);

/// Posterior mean only; avoids forming the test covariance.
Eigen::VectorXd gp_posterior_mean(const KernelSpec& spec, const Dataset& train,
                                  const Eigen::Ref<const Eigen::MatrixXd>& test);

/// log N(y | 0, K + noise * I).
double gp_log_marginal(const KernelSpec& spec, const Dataset& train);

/// Hyperparameters as the unconstrained vector the fitter optimizes:
/// [log variance, log lengthscale..., log noise_variance].
Eigen::VectorXd to_log_params(const KernelSpec& spec);
KernelSpec from_log_params(const KernelSpec& like, const Eigen::Ref<const Eigen::VectorXd>& log_params);

/// Analytic gradient of gp_log_marginal with respect to `to_log_params(spec)`,
/// via 0.5 tr((alpha alpha^T - K^-1) dK).
Eigen::VectorXd gp_log_marginal_grad(const KernelSpec& spec, const Dataset& train);

/// Central finite-difference version of the same gradient (testing aid).
Eigen::VectorXd gp_log_marginal_grad_fd(const KernelSpec& spec, const Dataset& train, double step = 1e-5);

enum class GradientMode { analytic, finite_difference };

struct FitOptions {
  double learning_rate = 1e-2;
  int max_iters = 3000;
  /// Stop once |delta log p(y)| < tolerance for `patience` consecutive iterations.
  double tolerance = 1e-6;
  int patience = 50;
  GradientMode gradient = GradientMode::analytic;
};

struct FitResult {
  KernelSpec spec;
  double log_marginal = 0.0;
  double initial_log_marginal = 0.0;
  int iterations = 0;
  std::vector<std::string> warnings;
};

/// Type-II maximum likelihood with Adam in log-parameter space. Returns the
/// best iterate seen, so the result never scores below `init`. Noise variance
/// must be positive in `init` (it is optimized on a log scale).
FitResult fit_kernel_hyperparams(const Dataset& train, const KernelSpec& init, const FitOptions& opts = {});

}  // namespace sgpplace
