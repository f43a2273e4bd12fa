#include "sgpplace/gp.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "sgpplace/adam.hpp"
#include "sgpplace/errors.hpp"
#include "sgpplace/linalg.hpp"

namespace sgpplace {

namespace {

const Eigen::VectorXd& require_labels(const Dataset& train, const char* what) {
  if (!train.labels) throw InvalidArgument(std::string(what) + " requires a labeled training set");
  return *train.labels;
}

JitteredCholesky factor_noisy_gram(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  Eigen::MatrixXd k = kernel_matrix(spec, x, x);
  k.diagonal().array() += spec.noise_variance;
  return jittered_cholesky(k, kGpJitterLevels, k.diagonal().mean(), "exact GP covariance");
}

}  // namespace

void Dataset::validate() const {
  if (!inputs.allFinite()) throw InvalidArgument("dataset inputs must be finite");
  if (labels) {
    if (labels->size() != inputs.rows()) {
      throw InvalidArgument("dataset has " + std::to_string(inputs.rows()) + " inputs but " +
                            std::to_string(labels->size()) + " labels");
    }
    if (!labels->allFinite()) throw InvalidArgument("dataset labels must be finite");
  }
}

GaussianPrediction gp_posterior(const KernelSpec& spec, const Dataset& train,
                                const Eigen::Ref<const Eigen::MatrixXd>& test) {
  spec.validate();
  if (test.rows() < 1) throw InvalidArgument("gp_posterior needs at least one test point");
  GaussianPrediction out;
  if (train.size() == 0) {
    spec.check_dimension(test.cols());
    out.mean = Eigen::VectorXd::Zero(test.rows());
    out.covariance = kernel_matrix(spec, test, test);
    return out;
  }
  train.validate();
  const Eigen::VectorXd& y = require_labels(train, "gp_posterior");
  const JitteredCholesky chol = factor_noisy_gram(spec, train.inputs);
  const Eigen::MatrixXd k_nt = kernel_matrix(spec, train.inputs, test);
  out.mean = k_nt.transpose() * chol.llt.solve(y);
  const Eigen::MatrixXd w = chol.matrix_l().solve(k_nt);
  out.covariance = kernel_matrix(spec, test, test);
  out.covariance.noalias() -= w.transpose() * w;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

Eigen::VectorXd gp_posterior_mean(const KernelSpec& spec, const Dataset& train,
                                  const Eigen::Ref<const Eigen::MatrixXd>& test) {
  spec.validate();
  if (train.size() == 0) return Eigen::VectorXd::Zero(test.rows());
  train.validate();
  const Eigen::VectorXd& y = require_labels(train, "gp_posterior_mean");
  const JitteredCholesky chol = factor_noisy_gram(spec, train.inputs);
  return kernel_matrix(spec, test, train.inputs) * chol.llt.solve(y);
}

double gp_log_marginal(const KernelSpec& spec, const Dataset& train) {
  spec.validate();
  train.validate();
  const Eigen::VectorXd& y = require_labels(train, "gp_log_marginal");
  const Eigen::Index n = train.size();
  if (n < 1) throw InvalidArgument("gp_log_marginal needs at least one training point");
  const JitteredCholesky chol = factor_noisy_gram(spec, train.inputs);
  const Eigen::VectorXd z = chol.matrix_l().solve(y);
  return -0.5 * z.squaredNorm() - 0.5 * chol.log_det() - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

Eigen::VectorXd to_log_params(const KernelSpec& spec) {
  const Eigen::Index nl = spec.lengthscale.size();
  Eigen::VectorXd p(nl + 2);
  p(0) = std::log(spec.variance);
  p.segment(1, nl) = spec.lengthscale.array().log().matrix();
  p(nl + 1) = std::log(spec.noise_variance);
  return p;
}

KernelSpec from_log_params(const KernelSpec& like, const Eigen::Ref<const Eigen::VectorXd>& log_params) {
  const Eigen::Index nl = like.lengthscale.size();
  if (log_params.size() != nl + 2) throw InvalidArgument("log-parameter vector has the wrong length");
  KernelSpec spec = like;
  spec.variance = std::exp(log_params(0));
  spec.lengthscale = log_params.segment(1, nl).array().exp().matrix();
  spec.noise_variance = std::exp(log_params(nl + 1));
  return spec;
}

namespace {

struct ValueAndGrad {
  double value;
  Eigen::VectorXd grad;
};

ValueAndGrad log_marginal_and_grad(const KernelSpec& spec, const Dataset& train) {
  const Eigen::VectorXd& y = require_labels(train, "gp_log_marginal_grad");
  const Eigen::Index n = train.size();
  const JitteredCholesky chol = factor_noisy_gram(spec, train.inputs);
  const Eigen::VectorXd alpha = chol.llt.solve(y);
  Eigen::MatrixXd inner = chol.llt.solve(Eigen::MatrixXd::Identity(n, n));
  inner = (alpha * alpha.transpose() - inner).eval();

  const std::vector<Eigen::MatrixXd> dk = kernel_matrix_log_param_grads(spec, train.inputs);
  ValueAndGrad out;
  out.grad.resize(static_cast<Eigen::Index>(dk.size()) + 1);
  for (std::size_t p = 0; p < dk.size(); ++p) {
    out.grad(static_cast<Eigen::Index>(p)) = 0.5 * inner.cwiseProduct(dk[p]).sum();
  }
  out.grad(out.grad.size() - 1) = 0.5 * spec.noise_variance * inner.trace();
  out.value = -0.5 * y.dot(alpha) - 0.5 * chol.log_det() -
              0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  return out;
}

}  // namespace

Eigen::VectorXd gp_log_marginal_grad(const KernelSpec& spec, const Dataset& train) {
  spec.validate();
  train.validate();
  return log_marginal_and_grad(spec, train).grad;
}

Eigen::VectorXd gp_log_marginal_grad_fd(const KernelSpec& spec, const Dataset& train, double step) {
  const Eigen::VectorXd base = to_log_params(spec);
  Eigen::VectorXd grad(base.size());
  for (Eigen::Index i = 0; i < base.size(); ++i) {
    Eigen::VectorXd hi = base;
    Eigen::VectorXd lo = base;
    hi(i) += step;
    lo(i) -= step;
    grad(i) = (gp_log_marginal(from_log_params(spec, hi), train) - gp_log_marginal(from_log_params(spec, lo), train)) /
              (2.0 * step);
  }
  return grad;
}

FitResult fit_kernel_hyperparams(const Dataset& train, const KernelSpec& init, const FitOptions& opts) {
  init.validate();
  train.validate();
  require_labels(train, "fit_kernel_hyperparams");
  init.check_dimension(train.dim());
  if (train.size() < 1) throw InvalidArgument("kernel fitting needs at least one labeled point");
  if (!(init.noise_variance > 0.0)) throw InvalidArgument("kernel fitting needs a positive initial noise variance");
  if (!(opts.learning_rate > 0.0) || opts.max_iters < 0) throw InvalidArgument("invalid fit options");

  FitResult result;
  if (train.size() == 1) result.warnings.emplace_back("single training point: hyperparameters are under-determined");

  Eigen::VectorXd params = to_log_params(init);
  AdamAscent adam(params.size(), opts.learning_rate);
  PlateauDetector plateau(opts.tolerance, opts.patience);

  auto diagnostics = [&](int iter) {
    std::ostringstream os;
    os << "non-finite log marginal likelihood at iteration " << iter << " (log params: " << params.transpose()
       << ")";
    return os.str();
  };

  result.spec = init;
  result.initial_log_marginal = gp_log_marginal(init, train);
  result.log_marginal = result.initial_log_marginal;
  if (!std::isfinite(result.log_marginal)) throw NumericalFailure(diagnostics(0));

  for (int iter = 0;; ++iter) {
    const KernelSpec current = from_log_params(init, params);
    ValueAndGrad vg;
    if (opts.gradient == GradientMode::analytic) {
      vg = log_marginal_and_grad(current, train);
    } else {
      vg = {gp_log_marginal(current, train), gp_log_marginal_grad_fd(current, train)};
    }
    if (!std::isfinite(vg.value) || !vg.grad.allFinite()) throw NumericalFailure(diagnostics(iter));
    if (vg.value > result.log_marginal) {
      result.log_marginal = vg.value;
      result.spec = current;
    }
    if (plateau.update(vg.value) || iter == opts.max_iters) break;
    adam.step(params, vg.grad);
    result.iterations = iter + 1;
  }
  return result;
}

}  // namespace sgpplace
