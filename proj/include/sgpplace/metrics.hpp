#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "sgpplace/environment.hpp"
#include "sgpplace/gp.hpp"
#include "sgpplace/kernels.hpp"
#include "sgpplace/linalg.hpp"
#include "sgpplace/placement.hpp"

namespace sgpplace {

/// Entropy-difference greedy baseline: each step picks the candidate y
/// maximizing H(y | A) - H(y | V \ (A + y)), where V is the grid plus the
/// candidates and A the current selection. Both conditionings observe their
/// sets with noise; variances are of the latent value at y.
PlacementResult greedy_mi(const Eigen::Ref<const Eigen::MatrixXd>& candidates, const EvaluationGrid& grid,
                          const KernelSpec& spec, Eigen::Index s);

/// I(y_A; f_R) in nats with y_A = f_A + noise:
/// 0.5 log det(K_AA + s2 I) - 0.5 log det(K_AA + s2 I - K_AR K_RR^-1 K_RA).
/// K_RR is factorized with the exact-GP jitter schedule.
class MiEvaluator {
 public:
  MiEvaluator(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& r);
  double operator()(const Eigen::Ref<const Eigen::MatrixXd>& a) const;
  double jitter() const { return krr_.jitter; }

 private:
  KernelSpec spec_;
  Eigen::MatrixXd r_;
  JitteredCholesky krr_;
};

double mutual_information(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& a,
                          const Eigen::Ref<const Eigen::MatrixXd>& r);

/// GP reconstruction error on a labeled grid. Labels at the placements are
/// taken from the nearest grid node.
double rmse_reconstruction(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& placements,
                           const EvaluationGrid& truth);

/// Index of the nearest grid node for each query row.
std::vector<int> nearest_grid_indices(const Eigen::Ref<const Eigen::MatrixXd>& grid,
                                      const Eigen::Ref<const Eigen::MatrixXd>& queries);

/// KL(q || p) between the sparse and exact GP predictive distributions of the
/// noisy observations at `test` (covariances include the noise variance).
double exact_kl(const KernelSpec& spec, const Dataset& train, const Eigen::Ref<const Eigen::MatrixXd>& inducing,
                const Eigen::Ref<const Eigen::MatrixXd>& test);

struct SubmodularityReport {
  double violation_rate = 0.0;
  double max_violation = 0.0;
  int violations = 0;
  int trials = 0;
};

/// Samples nested sets B subset C of the candidates plus a candidate x outside
/// C and counts diminishing-returns violations of the label-free bound
/// increment: delta(B, x) < delta(C, x) - 1e-8.
SubmodularityReport submodularity_probe(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x,
                                        const Eigen::Ref<const Eigen::MatrixXd>& candidates, int trials,
                                        std::uint64_t seed);

}  // namespace sgpplace
