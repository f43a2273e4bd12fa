#include "sgpplace/kernels.hpp"

#include <cmath>
#include <string>

#include "sgpplace/errors.hpp"

namespace sgpplace {

namespace {

const double kSqrt3 = std::sqrt(3.0);

Eigen::ArrayXd inverse_squared_lengthscales(const KernelSpec& spec, Eigen::Index dim) {
  if (spec.isotropic()) return Eigen::ArrayXd::Constant(dim, 1.0 / (spec.lengthscale(0) * spec.lengthscale(0)));
  return spec.lengthscale.array().square().inverse();
}

double scaled_sq_dist(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                      const Eigen::ArrayXd& inv_l2) {
  return ((a - b).array().square() * inv_l2).sum();
}

double covariance_from_r2(const KernelSpec& spec, double r2) {
  switch (spec.family) {
    case KernelFamily::rbf:
      return spec.variance * std::exp(-0.5 * r2);
    case KernelFamily::matern32: {
      const double z = kSqrt3 * std::sqrt(r2);
      return spec.variance * (1.0 + z) * std::exp(-z);
    }
  }
  return 0.0;
}

// g(r2) such that d k / d a = -g * (a - b) / l^2 elementwise.
double radial_factor_from_r2(const KernelSpec& spec, double r2) {
  switch (spec.family) {
    case KernelFamily::rbf:
      return spec.variance * std::exp(-0.5 * r2);
    case KernelFamily::matern32:
      return 3.0 * spec.variance * std::exp(-kSqrt3 * std::sqrt(r2));
  }
  return 0.0;
}

// Pairwise scaled squared distances between rows of a and b.
Eigen::MatrixXd scaled_sq_dist_matrix(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& a,
                                      const Eigen::Ref<const Eigen::MatrixXd>& b) {
  const Eigen::Index d = a.cols();
  const Eigen::ArrayXd inv_l2 = inverse_squared_lengthscales(spec, d);
  Eigen::MatrixXd r2 = Eigen::MatrixXd::Zero(a.rows(), b.rows());
  for (Eigen::Index p = 0; p < d; ++p) {
    const double w = inv_l2(p);
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const double bj = b(j, p);
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double diff = a(i, p) - bj;
        r2(i, j) += w * diff * diff;
      }
    }
  }
  return r2;
}

void check_pair(const KernelSpec& spec, Eigen::Index da, Eigen::Index db) {
  if (da != db) {
    throw InvalidArgument("kernel inputs have mismatched dimensions " + std::to_string(da) + " and " +
                          std::to_string(db));
  }
  spec.check_dimension(da);
}

}  // namespace

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::rbf:
      return "rbf";
    case KernelFamily::matern32:
      return "matern32";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(std::string_view name) {
  if (name == "rbf") return KernelFamily::rbf;
  if (name == "matern32") return KernelFamily::matern32;
  throw InvalidArgument("unknown kernel family '" + std::string(name) + "' (expected rbf or matern32)");
}

KernelSpec KernelSpec::rbf(double variance, double lengthscale, double noise_variance) {
  KernelSpec spec{KernelFamily::rbf, variance, Eigen::VectorXd::Constant(1, lengthscale), noise_variance};
  spec.validate();
  return spec;
}

KernelSpec KernelSpec::matern32(double variance, double lengthscale, double noise_variance) {
  KernelSpec spec{KernelFamily::matern32, variance, Eigen::VectorXd::Constant(1, lengthscale), noise_variance};
  spec.validate();
  return spec;
}

void KernelSpec::validate() const {
  if (!(variance > 0.0) || !std::isfinite(variance)) throw InvalidArgument("kernel variance must be > 0");
  if (lengthscale.size() == 0) throw InvalidArgument("kernel needs at least one lengthscale");
  for (Eigen::Index i = 0; i < lengthscale.size(); ++i) {
    if (!(lengthscale(i) > 0.0) || !std::isfinite(lengthscale(i))) {
      throw InvalidArgument("kernel lengthscales must be > 0");
    }
  }
  if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance)) {
    throw InvalidArgument("noise variance must be >= 0");
  }
}

void KernelSpec::check_dimension(Eigen::Index dim) const {
  if (!isotropic() && lengthscale.size() != dim) {
    throw InvalidArgument("input dimension " + std::to_string(dim) + " does not match " +
                          std::to_string(lengthscale.size()) + " lengthscales");
  }
}

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& a,
                   const Eigen::Ref<const Eigen::VectorXd>& b) {
  check_pair(spec, a.size(), b.size());
  return covariance_from_r2(spec, scaled_sq_dist(a, b, inverse_squared_lengthscales(spec, a.size())));
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& a,
                              const Eigen::Ref<const Eigen::MatrixXd>& b) {
  check_pair(spec, a.cols(), b.cols());
  Eigen::MatrixXd k = scaled_sq_dist_matrix(spec, a, b);
  for (Eigen::Index j = 0; j < k.cols(); ++j) {
    for (Eigen::Index i = 0; i < k.rows(); ++i) k(i, j) = covariance_from_r2(spec, k(i, j));
  }
  return k;
}

Eigen::VectorXd kernel_grad_input(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& a,
                                  const Eigen::Ref<const Eigen::VectorXd>& b) {
  check_pair(spec, a.size(), b.size());
  const Eigen::ArrayXd inv_l2 = inverse_squared_lengthscales(spec, a.size());
  const double g = radial_factor_from_r2(spec, scaled_sq_dist(a, b, inv_l2));
  return (-g * (a - b).array() * inv_l2).matrix();
}

Eigen::MatrixXd kernel_input_grad_contract(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& a,
                                           const Eigen::Ref<const Eigen::MatrixXd>& b,
                                           const Eigen::Ref<const Eigen::MatrixXd>& weights) {
  check_pair(spec, a.cols(), b.cols());
  if (weights.rows() != a.rows() || weights.cols() != b.rows()) {
    throw InvalidArgument("weight matrix shape does not match the point sets");
  }
  Eigen::MatrixXd f = scaled_sq_dist_matrix(spec, a, b);
  for (Eigen::Index j = 0; j < f.cols(); ++j) {
    for (Eigen::Index i = 0; i < f.rows(); ++i) f(i, j) = weights(i, j) * radial_factor_from_r2(spec, f(i, j));
  }
  const Eigen::ArrayXd inv_l2 = inverse_squared_lengthscales(spec, a.cols());
  Eigen::MatrixXd grad = f * b;
  grad -= f.rowwise().sum().asDiagonal() * a;
  return grad * inv_l2.matrix().asDiagonal();
}

std::vector<Eigen::MatrixXd> kernel_matrix_log_param_grads(const KernelSpec& spec,
                                                           const Eigen::Ref<const Eigen::MatrixXd>& x) {
  spec.check_dimension(x.cols());
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::ArrayXd inv_l2 = inverse_squared_lengthscales(spec, d);
  const Eigen::Index nl = spec.lengthscale.size();

  std::vector<Eigen::MatrixXd> grads(1 + nl, Eigen::MatrixXd::Zero(n, n));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const Eigen::ArrayXd diff2 = (x.row(i) - x.row(j)).transpose().array().square() * inv_l2;
      const double r2 = diff2.sum();
      const double k = covariance_from_r2(spec, r2);
      // dk/dlog l_p = g * (x_p - x'_p)^2 / l_p^2 for both families.
      const double g = radial_factor_from_r2(spec, r2);
      grads[0](i, j) = grads[0](j, i) = k;
      if (nl == 1) {
        grads[1](i, j) = grads[1](j, i) = g * r2;
      } else {
        for (Eigen::Index p = 0; p < nl; ++p) grads[1 + p](i, j) = grads[1 + p](j, i) = g * diff2(p);
      }
    }
  }
  return grads;
}

}  // namespace sgpplace
