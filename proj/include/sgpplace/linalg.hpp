#pragma once

#include <Eigen/Dense>

#include <initializer_list>
#include <span>
#include <string_view>

namespace sgpplace {

/// Cholesky factor of `A + jitter * I` together with the jitter that made it
/// succeed.
struct JitteredCholesky {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;

  auto matrix_l() const { return llt.matrixL(); }
  Eigen::Index size() const { return llt.rows(); }
  double log_det() const;
};

/// Jitter schedule used by exact-GP code paths: plain, then 1e-8, 1e-6, 1e-4,
/// each multiplied by the mean diagonal of the matrix.
inline constexpr double kGpJitterLevels[] = {0.0, 1e-8, 1e-6, 1e-4};

/// Jitter schedule for inducing-point covariances: plain, then a 1e-9 level
/// that absorbs exact duplicates, then 1e-6 escalating x100 twice. Each level
/// is multiplied by the kernel variance.
inline constexpr double kInducingJitterLevels[] = {0.0, 1e-9, 1e-6, 1e-4, 1e-2};

/// A factorization is accepted only when every pivot satisfies
/// L_ii^2 >= kMinPivotRatio * (A_ii + jitter); otherwise the next level is tried.
inline constexpr double kMinPivotRatio = 1e-10;

/// Factorizes `a + level * scale * I` for the first level that yields a
/// well-conditioned factor. Throws NumericalFailure naming `what` when every
/// level fails.
JitteredCholesky jittered_cholesky(const Eigen::Ref<const Eigen::MatrixXd>& a, std::span<const double> levels,
                                   double scale, std::string_view what);

/// Pivot ratio check used by `jittered_cholesky`; exposed for incremental updates.
bool pivot_acceptable(double pivot_sq, double diag);

}  // namespace sgpplace
