#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace sgpplace {

enum class KernelFamily { rbf, matern32 };

std::string_view to_string(KernelFamily family);
KernelFamily kernel_family_from_string(std::string_view name);

/// Stationary covariance function plus the observation-noise variance that
/// accompanies it. A single lengthscale entry means isotropic; otherwise one
/// entry per input dimension.
struct KernelSpec {
  KernelFamily family = KernelFamily::rbf;
  double variance = 1.0;
  Eigen::VectorXd lengthscale = Eigen::VectorXd::Ones(1);
  double noise_variance = 0.1;

  static KernelSpec rbf(double variance, double lengthscale, double noise_variance);
  static KernelSpec matern32(double variance, double lengthscale, double noise_variance);

  bool isotropic() const { return lengthscale.size() == 1; }

  /// Throws InvalidArgument when any invariant fails.
  void validate() const;

  /// Throws InvalidArgument when `dim` is incompatible with the lengthscale arity.
  void check_dimension(Eigen::Index dim) const;

  /// Smallest lengthscale; used to size finite-difference steps.
  double min_lengthscale() const { return lengthscale.minCoeff(); }
};

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& a,
                   const Eigen::Ref<const Eigen::VectorXd>& b);

/// Rows of `a` and `b` are points.
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& a,
                              const Eigen::Ref<const Eigen::MatrixXd>& b);

/// Gradient of k(a, b) with respect to `a`.
Eigen::VectorXd kernel_grad_input(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& a,
                                  const Eigen::Ref<const Eigen::VectorXd>& b);

/// Contracts input gradients against a weight matrix: row j of the result is
/// sum_i weights(j, i) * d k(a_j, b_i) / d a_j. Shapes: a (m x d), b (n x d),
/// weights (m x n). This is the chain-rule workhorse for inducing-point gradients.
Eigen::MatrixXd kernel_input_grad_contract(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& a,
                                           const Eigen::Ref<const Eigen::MatrixXd>& b,
                                           const Eigen::Ref<const Eigen::MatrixXd>& weights);

/// Derivatives of the kernel matrix k(X, X) with respect to the log
/// hyperparameters, in the order [log variance, log lengthscale_0..].
/// The noise variance is not part of the kernel and is handled by callers.
std::vector<Eigen::MatrixXd> kernel_matrix_log_param_grads(const KernelSpec& spec,
                                                           const Eigen::Ref<const Eigen::MatrixXd>& x);

}  // namespace sgpplace
