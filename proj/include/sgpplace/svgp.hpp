#pragma once

#include <Eigen/Dense>

#include <optional>

#include "sgpplace/gp.hpp"
#include "sgpplace/kernels.hpp"
#include "sgpplace/linalg.hpp"

namespace sgpplace {

/// Terms of the collapsed bound
///   F = -n/2 log 2pi - 1/2 log|Q + s2 I| - 1/2 y^T (Q + s2 I)^-1 y - 1/(2 s2) tr(K - Q)
/// with Q = K_nm K_mm^-1 K_mn. `data_fit` is zero in label-free mode.
struct ElboTerms {
  double constant = 0.0;
  double complexity = 0.0;
  double data_fit = 0.0;
  double trace = 0.0;
  /// tr(K_nn - Q_nn), the Nystrom deficit (>= 0 up to roundoff).
  double trace_deficit = 0.0;

  double total() const { return constant + complexity + data_fit + trace; }
};

/// The collapsed bound evaluated from raw covariance blocks. Everything is
/// done through the m x m factor of K_mm (plus jitter) and the m x m matrix
/// B = I + V V^T / s2 with V = L^-1 K_mn; no n x n matrix is formed.
/// Point-inducing and aggregated (field-of-view) bounds both reduce to this.
class CollapsedBound {
 public:
  /// `knn_trace` is tr(K_nn). `labels` may be null for label-free mode.
  /// `jitter_scale` multiplies kInducingJitterLevels for the K_mm factorization.
  CollapsedBound(const Eigen::Ref<const Eigen::MatrixXd>& kmm, const Eigen::Ref<const Eigen::MatrixXd>& kmn,
                 double knn_trace, const Eigen::VectorXd* labels, double noise_variance, double jitter_scale);

  Eigen::Index num_inducing() const { return v_.rows(); }
  Eigen::Index num_data() const { return v_.cols(); }
  double jitter() const { return kmm_.jitter; }

  const ElboTerms& terms() const { return terms_; }
  double elbo() const { return terms_.total(); }

  /// dF/dK_mm as a symmetric matrix, in the convention dF = tr(G dK_mm) where
  /// both mirrored entries move together, and dF/dK_mn.
  Eigen::MatrixXd grad_kmm() const;
  Eigen::MatrixXd grad_kmn() const;

  /// Bounds obtained by appending one extra inducing point, for each column of
  /// the candidate blocks: kmc (m x c) = K(X_m, cand), kcc (c) = k(cand, cand),
  /// kcn (c x n) = K(cand, X). Uses a rank-one extension of both factors, so it
  /// is exact, not an approximation. Entries are NaN where the extended K_mm
  /// pivot is not acceptable at the current jitter; callers must recompute
  /// those from scratch.
  Eigen::VectorXd extended_elbos(const Eigen::Ref<const Eigen::MatrixXd>& kmc, const Eigen::Ref<const Eigen::VectorXd>& kcc,
                                 const Eigen::Ref<const Eigen::MatrixXd>& kcn) const;

  /// Predictive mean and latent covariance at test points given K(X_m, test)
  /// and k(test, test). Requires labels.
  GaussianPrediction predict(const Eigen::Ref<const Eigen::MatrixXd>& kmt, const Eigen::Ref<const Eigen::MatrixXd>& ktt) const;

 private:
  Eigen::MatrixXd l_inv_transpose_times(const Eigen::MatrixXd& rhs) const;

  double noise_;
  bool has_labels_;
  Eigen::VectorXd y_;
  double yty_ = 0.0;
  JitteredCholesky kmm_;
  Eigen::MatrixXd v_;
  Eigen::LLT<Eigen::MatrixXd> b_;
  Eigen::VectorXd z_;  // LB^-1 V y
  ElboTerms terms_;
};

/// Inducing-point sparse GP over a training set. When `data_fit` is false the
/// labels are treated as zero and the data-fit term vanishes.
struct SvgpState {
  KernelSpec spec;
  Dataset train;
  Eigen::MatrixXd inducing;
  bool data_fit = false;

  static SvgpState label_free(const KernelSpec& spec, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& inducing);
  static SvgpState with_labels(const KernelSpec& spec, const Dataset& train, const Eigen::MatrixXd& inducing);

  Eigen::Index num_inducing() const { return inducing.rows(); }

  /// Throws InvalidArgument on broken invariants. An empty inducing set is
  /// allowed for bound evaluation (greedy selection starts there).
  void validate() const;

  /// Factorizes the bound for this state.
  CollapsedBound bound() const;
};

double svgp_elbo(const SvgpState& state);
ElboTerms svgp_elbo_terms(const SvgpState& state);

/// Predictions from the optimal collapsed variational distribution.
GaussianPrediction svgp_predict(const SvgpState& state, const Eigen::Ref<const Eigen::MatrixXd>& test);

/// dF/dX_m, shape m x d.
Eigen::MatrixXd elbo_grad_inducing(const SvgpState& state);

/// Bound value and its inducing gradient from a single factorization.
struct ElboWithGrad {
  double elbo = 0.0;
  Eigen::MatrixXd grad;
};
ElboWithGrad svgp_elbo_with_grad(const SvgpState& state);

/// F(X_m + {x}) - F(X_m).
double elbo_delta(const SvgpState& state, const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace sgpplace
