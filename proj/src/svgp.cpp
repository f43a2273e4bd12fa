#include "sgpplace/svgp.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "sgpplace/errors.hpp"

namespace sgpplace {

namespace {

ElboTerms make_terms(Eigen::Index n, double noise, double log_det_b, double trace_deficit, const double* yty,
                     double zz) {
  const double nd = static_cast<double>(n);
  ElboTerms t;
  t.constant = -0.5 * nd * std::log(2.0 * std::numbers::pi);
  t.complexity = -0.5 * (nd * std::log(noise) + log_det_b);
  if (yty != nullptr) t.data_fit = -0.5 * (*yty - zz / noise) / noise;
  t.trace_deficit = trace_deficit;
  t.trace = -0.5 * trace_deficit / noise;
  return t;
}

}  // namespace

CollapsedBound::CollapsedBound(const Eigen::Ref<const Eigen::MatrixXd>& kmm, const Eigen::Ref<const Eigen::MatrixXd>& kmn,
                               double knn_trace, const Eigen::VectorXd* labels, double noise_variance,
                               double jitter_scale)
    : noise_(noise_variance), has_labels_(labels != nullptr) {
  if (!(noise_variance > 0.0)) {
    throw InvalidArgument("the collapsed bound needs a positive noise variance (trace term divides by it)");
  }
  if (kmm.rows() != kmn.rows()) throw InvalidArgument("K_mm and K_mn disagree on the inducing count");
  if (labels != nullptr && labels->size() != kmn.cols()) throw InvalidArgument("label count does not match K_mn");

  const Eigen::Index m = kmm.rows();
  kmm_ = jittered_cholesky(kmm, kInducingJitterLevels, jitter_scale, "inducing covariance K_mm");
  v_ = kmm_.matrix_l().solve(kmn);

  Eigen::MatrixXd b = Eigen::MatrixXd::Identity(m, m);
  b.selfadjointView<Eigen::Lower>().rankUpdate(v_, 1.0 / noise_);
  b_.compute(b.selfadjointView<Eigen::Lower>());
  if (b_.info() != Eigen::Success) throw NumericalFailure("collapsed bound: B = I + V V^T / s2 is not positive definite");

  const double log_det_b = 2.0 * b_.matrixLLT().diagonal().array().log().sum();
  const double deficit = knn_trace - v_.squaredNorm();
  if (has_labels_) {
    y_ = *labels;
    yty_ = y_.squaredNorm();
    z_ = b_.matrixL().solve(v_ * y_);
  }
  terms_ = make_terms(kmn.cols(), noise_, log_det_b, deficit, has_labels_ ? &yty_ : nullptr,
                      has_labels_ ? z_.squaredNorm() : 0.0);
}

Eigen::MatrixXd CollapsedBound::l_inv_transpose_times(const Eigen::MatrixXd& rhs) const {
  return kmm_.llt.matrixU().solve(rhs);
}

Eigen::MatrixXd CollapsedBound::grad_kmm() const {
  const Eigen::Index m = num_inducing();
  const Eigen::MatrixXd b_inv = b_.solve(Eigen::MatrixXd::Identity(m, m));
  Eigen::MatrixXd h = 0.5 * (Eigen::MatrixXd::Identity(m, m) - b_inv);
  h.noalias() -= (0.5 / noise_) * v_ * v_.transpose();
  const Eigen::MatrixXd t = l_inv_transpose_times(h);
  Eigen::MatrixXd g = l_inv_transpose_times(t.transpose());
  if (has_labels_) {
    const Eigen::VectorXd gamma = b_.matrixU().solve(z_);
    const Eigen::VectorXd beta = l_inv_transpose_times(gamma);
    g.noalias() -= (0.5 / (noise_ * noise_)) * beta * beta.transpose();
  }
  return 0.5 * (g + g.transpose());
}

Eigen::MatrixXd CollapsedBound::grad_kmn() const {
  const Eigen::Index m = num_inducing();
  const Eigen::MatrixXd b_inv = b_.solve(Eigen::MatrixXd::Identity(m, m));
  Eigen::MatrixXd inner = ((Eigen::MatrixXd::Identity(m, m) - b_inv) * v_) / noise_;
  if (has_labels_) {
    const Eigen::VectorXd gamma = b_.matrixU().solve(z_);
    const double s4 = noise_ * noise_;
    inner.noalias() += gamma * y_.transpose() / s4;
    inner.noalias() -= gamma * (v_.transpose() * gamma).transpose() / (s4 * noise_);
  }
  return l_inv_transpose_times(inner);
}

Eigen::VectorXd CollapsedBound::extended_elbos(const Eigen::Ref<const Eigen::MatrixXd>& kmc,
                                               const Eigen::Ref<const Eigen::VectorXd>& kcc,
                                               const Eigen::Ref<const Eigen::MatrixXd>& kcn) const {
  const Eigen::Index c = kcc.size();
  const Eigen::Index n = num_data();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd out = Eigen::VectorXd::Constant(c, nan);
  if (c == 0) return out;

  const Eigen::MatrixXd lc = kmm_.matrix_l().solve(kmc);
  const Eigen::VectorXd diag = kcc.array() + kmm_.jitter;
  const Eigen::VectorXd d2 = diag - lc.colwise().squaredNorm().transpose();

  Eigen::MatrixXd vc = kcn;
  vc.noalias() -= lc.transpose() * v_;
  Eigen::VectorXd inv_d = Eigen::VectorXd::Zero(c);
  for (Eigen::Index j = 0; j < c; ++j) {
    if (pivot_acceptable(d2(j), diag(j))) inv_d(j) = 1.0 / std::sqrt(d2(j));
  }
  vc = inv_d.asDiagonal() * vc;

  const Eigen::MatrixXd cm = b_.matrixL().solve((v_ * vc.transpose()) / noise_);
  const Eigen::VectorXd vv = vc.rowwise().squaredNorm();
  const Eigen::VectorXd schur = (1.0 + vv.array() / noise_).matrix() - cm.colwise().squaredNorm().transpose();
  const double base_log_det_b = 2.0 * b_.matrixLLT().diagonal().array().log().sum();
  Eigen::VectorXd vy;
  Eigen::VectorXd cz;
  if (has_labels_) {
    vy = vc * y_;
    cz = cm.transpose() * z_;
  }
  const double zz = has_labels_ ? z_.squaredNorm() : 0.0;

  for (Eigen::Index j = 0; j < c; ++j) {
    if (inv_d(j) == 0.0 || !(schur(j) > 0.0)) continue;
    double zz_ext = zz;
    if (has_labels_) {
      const double znew = (vy(j) - cz(j)) / std::sqrt(schur(j));
      zz_ext += znew * znew;
    }
    const ElboTerms t = make_terms(n, noise_, base_log_det_b + std::log(schur(j)), terms_.trace_deficit - vv(j),
                                   has_labels_ ? &yty_ : nullptr, zz_ext);
    out(j) = t.total();
  }
  return out;
}

GaussianPrediction CollapsedBound::predict(const Eigen::Ref<const Eigen::MatrixXd>& kmt,
                                           const Eigen::Ref<const Eigen::MatrixXd>& ktt) const {
  if (!has_labels_) throw InvalidArgument("SVGP prediction needs labels with the data-fit term enabled");
  const Eigen::MatrixXd w = kmm_.matrix_l().solve(kmt);
  const Eigen::MatrixXd q = b_.matrixL().solve(w);
  GaussianPrediction out;
  out.mean = q.transpose() * z_ / noise_;
  out.covariance = ktt;
  out.covariance.noalias() -= w.transpose() * w;
  out.covariance.noalias() += q.transpose() * q;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

SvgpState SvgpState::label_free(const KernelSpec& spec, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& inducing) {
  SvgpState s{spec, Dataset{inputs, std::nullopt}, inducing, false};
  s.validate();
  return s;
}

SvgpState SvgpState::with_labels(const KernelSpec& spec, const Dataset& train, const Eigen::MatrixXd& inducing) {
  SvgpState s{spec, train, inducing, true};
  s.validate();
  return s;
}

void SvgpState::validate() const {
  spec.validate();
  train.validate();
  if (train.size() < 1) throw InvalidArgument("SVGP needs at least one training input");
  spec.check_dimension(train.dim());
  if (inducing.rows() > 0 && inducing.cols() != train.dim()) {
    throw InvalidArgument("inducing points have dimension " + std::to_string(inducing.cols()) +
                          " but training inputs have dimension " + std::to_string(train.dim()));
  }
  if (!inducing.allFinite()) throw InvalidArgument("inducing points must be finite");
  if (data_fit && !train.labeled()) throw InvalidArgument("data-fit mode needs training labels");
  if (!(spec.noise_variance > 0.0)) {
    throw InvalidArgument("the collapsed bound needs a positive noise variance (trace term divides by it)");
  }
}

CollapsedBound SvgpState::bound() const {
  validate();
  const Eigen::Index n = train.size();
  const double knn_trace = static_cast<double>(n) * spec.variance;
  const Eigen::VectorXd* y = data_fit ? &*train.labels : nullptr;
  if (inducing.rows() == 0) {
    return CollapsedBound(Eigen::MatrixXd(0, 0), Eigen::MatrixXd(0, n), knn_trace, y, spec.noise_variance,
                          spec.variance);
  }
  return CollapsedBound(kernel_matrix(spec, inducing, inducing), kernel_matrix(spec, inducing, train.inputs), knn_trace,
                        y, spec.noise_variance, spec.variance);
}

double svgp_elbo(const SvgpState& state) { return state.bound().elbo(); }

ElboTerms svgp_elbo_terms(const SvgpState& state) { return state.bound().terms(); }

GaussianPrediction svgp_predict(const SvgpState& state, const Eigen::Ref<const Eigen::MatrixXd>& test) {
  if (!state.data_fit) throw InvalidArgument("svgp_predict needs data-fit mode with labels");
  if (state.num_inducing() < 1) throw InvalidArgument("svgp_predict needs at least one inducing point");
  if (test.rows() < 1) throw InvalidArgument("svgp_predict needs at least one test point");
  const CollapsedBound bound = state.bound();
  return bound.predict(kernel_matrix(state.spec, state.inducing, test), kernel_matrix(state.spec, test, test));
}

ElboWithGrad svgp_elbo_with_grad(const SvgpState& state) {
  const CollapsedBound bound = state.bound();
  ElboWithGrad out;
  out.elbo = bound.elbo();
  if (state.num_inducing() == 0) {
    out.grad = Eigen::MatrixXd(0, state.train.dim());
    return out;
  }
  out.grad = kernel_input_grad_contract(state.spec, state.inducing, state.train.inputs, bound.grad_kmn());
  out.grad += kernel_input_grad_contract(state.spec, state.inducing, state.inducing, 2.0 * bound.grad_kmm());
  return out;
}

Eigen::MatrixXd elbo_grad_inducing(const SvgpState& state) { return svgp_elbo_with_grad(state).grad; }

double elbo_delta(const SvgpState& state, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != state.train.dim()) throw InvalidArgument("candidate point has the wrong dimension");
  const CollapsedBound bound = state.bound();
  const Eigen::MatrixXd xr = x.transpose();
  const Eigen::MatrixXd kmc = state.num_inducing() == 0 ? Eigen::MatrixXd(0, 1)
                                                        : kernel_matrix(state.spec, state.inducing, xr);
  const Eigen::VectorXd kcc = Eigen::VectorXd::Constant(1, state.spec.variance);
  const double extended = bound.extended_elbos(kmc, kcc, kernel_matrix(state.spec, xr, state.train.inputs))(0);
  if (std::isfinite(extended)) return extended - bound.elbo();

  SvgpState grown = state;
  grown.inducing.conservativeResize(state.num_inducing() + 1, state.train.dim());
  grown.inducing.row(state.num_inducing()) = x.transpose();
  return svgp_elbo(grown) - bound.elbo();
}

}  // namespace sgpplace
