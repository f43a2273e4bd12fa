#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <deque>

namespace sgpplace {

/// Adam on a flat parameter vector, written for ascent: `step` moves the
/// parameters along the supplied gradient.
class AdamAscent {
 public:
  explicit AdamAscent(Eigen::Index size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                      double epsilon = 1e-8)
      : lr_(learning_rate),
        beta1_(beta1),
        beta2_(beta2),
        eps_(epsilon),
        m_(Eigen::VectorXd::Zero(size)),
        v_(Eigen::VectorXd::Zero(size)) {}

  void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grad) {
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() += lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

  /// Clears the moment estimates of one coordinate, e.g. after a projection.
  void reset_coordinate(Eigen::Index i) {
    m_(i) = 0.0;
    v_(i) = 0.0;
  }

  long iterations() const { return t_; }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
};

/// Tracks |delta objective| over consecutive iterations; `converged` turns
/// true once the change stayed below `tolerance` for `patience` iterations.
class PlateauDetector {
 public:
  PlateauDetector(double tolerance, int patience) : tol_(tolerance), patience_(patience) {}

  bool update(double value) {
    if (has_last_ && std::abs(value - last_) < tol_) {
      ++quiet_;
    } else {
      quiet_ = 0;
    }
    last_ = value;
    has_last_ = true;
    return converged();
  }

  bool converged() const { return patience_ > 0 && quiet_ >= patience_; }

 private:
  double tol_;
  int patience_;
  double last_ = 0.0;
  bool has_last_ = false;
  int quiet_ = 0;
};

/// Stop rule on a best-so-far objective: converged once the gain over the
/// last `patience` updates is at most rel_tolerance times the total gain since
/// the first update. Insensitive to constant offsets in the objective.
class ImprovementWindow {
 public:
  ImprovementWindow(double rel_tolerance, int patience) : tol_(rel_tolerance), patience_(patience) {}

  bool update(double best) {
    if (history_.empty() && !started_) {
      initial_ = best;
      started_ = true;
    }
    history_.push_back(best);
    if (patience_ <= 0 || static_cast<int>(history_.size()) <= patience_) return false;
    history_.pop_front();
    return best - history_.front() <= tol_ * (best - initial_);
  }

 private:
  double tol_;
  int patience_;
  double initial_ = 0.0;
  bool started_ = false;
  std::deque<double> history_;
};

}  // namespace sgpplace
