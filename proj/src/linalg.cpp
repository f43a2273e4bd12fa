#include "sgpplace/linalg.hpp"

#include <cmath>
#include <string>

#include "sgpplace/errors.hpp"

namespace sgpplace {

double JitteredCholesky::log_det() const {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

bool pivot_acceptable(double pivot_sq, double diag) {
  return std::isfinite(pivot_sq) && pivot_sq > 0.0 && pivot_sq >= kMinPivotRatio * diag;
}

JitteredCholesky jittered_cholesky(const Eigen::Ref<const Eigen::MatrixXd>& a, std::span<const double> levels,
                                   double scale, std::string_view what) {
  if (a.rows() != a.cols()) throw NumericalFailure(std::string(what) + ": matrix is not square");
  JitteredCholesky out;
  if (a.rows() == 0) {
    out.llt.compute(a);
    return out;
  }
  if (!a.allFinite()) throw NumericalFailure(std::string(what) + ": matrix has non-finite entries");

  Eigen::MatrixXd work(a.rows(), a.cols());
  for (const double level : levels) {
    const double jitter = level * scale;
    work = a;
    work.diagonal().array() += jitter;
    out.llt.compute(work);
    if (out.llt.info() != Eigen::Success) continue;
    const auto& packed = out.llt.matrixLLT();
    bool ok = true;
    for (Eigen::Index i = 0; i < a.rows() && ok; ++i) {
      ok = pivot_acceptable(packed(i, i) * packed(i, i), work(i, i));
    }
    if (ok) {
      out.jitter = jitter;
      return out;
    }
  }
  throw NumericalFailure(std::string(what) + ": Cholesky factorization failed after jitter escalation (n=" +
                         std::to_string(a.rows()) + ")");
}

}  // namespace sgpplace
