#include "sgpplace/fov.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "sgpplace/adam.hpp"
#include "sgpplace/environment.hpp"
#include "sgpplace/errors.hpp"

namespace sgpplace {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double ray_offset(const FanGeometry& geom, int k) { return -0.5 * geom.fan_angle + geom.fan_angle * (k + 0.5) / geom.rays; }

double chord_fraction(const FanGeometry& geom, int j) { return (j + 0.5) / geom.points_per_ray; }

// Block sums over p x p tiles (rows) and p x 1 tiles, scaled to averages.
Eigen::MatrixXd aggregate_rows(const Eigen::MatrixXd& k, Eigen::Index m, Eigen::Index p) {
  Eigen::MatrixXd out(m, k.cols());
  for (Eigen::Index a = 0; a < m; ++a) out.row(a) = k.middleRows(a * p, p).colwise().mean();
  return out;
}

struct Prepared {
  Eigen::MatrixXd points;
  Eigen::MatrixXd kmm;
  Eigen::MatrixXd kmn;
};

Prepared prepare(const KernelSpec& spec, const Dataset& train, const Eigen::Ref<const Eigen::VectorXd>& angles,
                 const FanGeometry& geom) {
  spec.validate();
  geom.validate();
  train.validate();
  if (angles.size() < 1) throw InvalidArgument("transformed bound needs at least one sensor");
  if (train.size() < 1) throw InvalidArgument("transformed bound needs at least one training input");
  if (train.dim() != 2) throw InvalidArgument("field-of-view sensors need 2D training inputs");
  spec.check_dimension(2);
  if (!(spec.noise_variance > 0.0)) {
    throw InvalidArgument("the collapsed bound needs a positive noise variance (trace term divides by it)");
  }
  const Eigen::Index m = angles.size();
  const Eigen::Index p = geom.points_per_sensor();
  Prepared out;
  out.points = expansion_transform(angles, geom);
  const Eigen::MatrixXd kpp = kernel_matrix(spec, out.points, out.points);
  const Eigen::MatrixXd kmp = aggregate_rows(kpp, m, p);
  out.kmm = aggregate_rows(kmp.transpose(), m, p);
  out.kmm = 0.5 * (out.kmm + out.kmm.transpose()).eval();
  out.kmn = aggregate_rows(kernel_matrix(spec, out.points, train.inputs), m, p);
  return out;
}

CollapsedBound make_bound(const KernelSpec& spec, const Dataset& train, const Prepared& prep) {
  const double knn_trace = static_cast<double>(train.size()) * spec.variance;
  return CollapsedBound(prep.kmm, prep.kmn, knn_trace, train.labels ? &*train.labels : nullptr, spec.noise_variance,
                        spec.variance);
}

}  // namespace

void FanGeometry::validate() const {
  if (!center.allFinite()) throw InvalidArgument("fan geometry: center must be finite");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidArgument("fan geometry: disk radius must be positive");
  if (!(fan_angle > 0.0 && fan_angle < std::numbers::pi)) {
    throw InvalidArgument("fan geometry: fan angle must lie in (0, pi)");
  }
  if (rays < 1 || points_per_ray < 1) throw InvalidArgument("fan geometry: rays and points per ray must be >= 1");
}

Eigen::VectorXd wrap_angles(const Eigen::Ref<const Eigen::VectorXd>& angles) {
  Eigen::VectorXd out(angles.size());
  for (Eigen::Index i = 0; i < angles.size(); ++i) {
    if (!std::isfinite(angles(i))) throw InvalidArgument("sensor angles must be finite");
    double a = std::fmod(angles(i), kTwoPi);
    if (a < 0.0) a += kTwoPi;
    if (a >= kTwoPi) a = 0.0;
    out(i) = a;
  }
  return out;
}

Eigen::MatrixXd sensor_positions(const Eigen::Ref<const Eigen::VectorXd>& angles, const FanGeometry& geom) {
  Eigen::MatrixXd out(angles.size(), 2);
  for (Eigen::Index i = 0; i < angles.size(); ++i) {
    out.row(i) = (geom.center + geom.radius * Eigen::Vector2d(std::cos(angles(i)), std::sin(angles(i)))).transpose();
  }
  return out;
}

Eigen::MatrixXd expansion_transform(const Eigen::Ref<const Eigen::VectorXd>& angles, const FanGeometry& geom) {
  geom.validate();
  if (!angles.allFinite()) throw InvalidArgument("sensor angles must be finite");
  const Eigen::Index p = geom.points_per_sensor();
  Eigen::MatrixXd out(angles.size() * p, 2);
  Eigen::Index row = 0;
  for (Eigen::Index s = 0; s < angles.size(); ++s) {
    const double theta = angles(s);
    const Eigen::Vector2d origin = geom.center + geom.radius * Eigen::Vector2d(std::cos(theta), std::sin(theta));
    for (int k = 0; k < geom.rays; ++k) {
      const double phi = ray_offset(geom, k);
      const Eigen::Vector2d dir(-std::cos(theta + phi), -std::sin(theta + phi));
      const double chord = 2.0 * geom.radius * std::cos(phi);
      for (int j = 0; j < geom.points_per_ray; ++j, ++row) {
        out.row(row) = (origin + chord * chord_fraction(geom, j) * dir).transpose();
      }
    }
  }
  return out;
}

Eigen::MatrixXd expansion_jacobian(const Eigen::Ref<const Eigen::VectorXd>& angles, const FanGeometry& geom) {
  geom.validate();
  const Eigen::Index p = geom.points_per_sensor();
  Eigen::MatrixXd out(angles.size() * p, 2);
  Eigen::Index row = 0;
  for (Eigen::Index s = 0; s < angles.size(); ++s) {
    const double theta = angles(s);
    const Eigen::Vector2d d_origin = geom.radius * Eigen::Vector2d(-std::sin(theta), std::cos(theta));
    for (int k = 0; k < geom.rays; ++k) {
      const double phi = ray_offset(geom, k);
      const Eigen::Vector2d d_dir(std::sin(theta + phi), -std::cos(theta + phi));
      const double chord = 2.0 * geom.radius * std::cos(phi);
      for (int j = 0; j < geom.points_per_ray; ++j, ++row) {
        out.row(row) = (d_origin + chord * chord_fraction(geom, j) * d_dir).transpose();
      }
    }
  }
  return out;
}

Eigen::MatrixXd aggregation_matrix(Eigen::Index m, Eigen::Index p) {
  if (m < 1 || p < 1) throw InvalidArgument("aggregation matrix needs m >= 1 and p >= 1");
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m * p, m);
  for (Eigen::Index j = 0; j < m; ++j) t.block(j * p, j, p, 1).setConstant(1.0 / static_cast<double>(p));
  return t;
}

double transformed_elbo(const KernelSpec& spec, const Dataset& train, const Eigen::Ref<const Eigen::VectorXd>& angles,
                        const FanGeometry& geom) {
  const Prepared prep = prepare(spec, train, angles, geom);
  return make_bound(spec, train, prep).elbo();
}

TransformedElboWithGrad transformed_elbo_with_grad(const KernelSpec& spec, const Dataset& train,
                                                   const Eigen::Ref<const Eigen::VectorXd>& angles,
                                                   const FanGeometry& geom) {
  const Prepared prep = prepare(spec, train, angles, geom);
  const CollapsedBound bound = make_bound(spec, train, prep);
  const Eigen::Index m = angles.size();
  const Eigen::Index p = geom.points_per_sensor();
  const double pd = static_cast<double>(p);

  // Spread the aggregated sensitivities back onto the individual points.
  const Eigen::MatrixXd gmm = bound.grad_kmm();
  const Eigen::MatrixXd gmn = bound.grad_kmn();
  Eigen::MatrixXd w_pn(m * p, gmn.cols());
  Eigen::MatrixXd w_pp(m * p, m * p);
  for (Eigen::Index a = 0; a < m; ++a) {
    w_pn.middleRows(a * p, p) = gmn.row(a).replicate(p, 1) / pd;
    for (Eigen::Index b = 0; b < m; ++b) w_pp.block(a * p, b * p, p, p).setConstant(2.0 * gmm(a, b) / (pd * pd));
  }
  Eigen::MatrixXd g_points = kernel_input_grad_contract(spec, prep.points, train.inputs, w_pn);
  g_points += kernel_input_grad_contract(spec, prep.points, prep.points, w_pp);

  const Eigen::MatrixXd jac = expansion_jacobian(angles, geom);
  TransformedElboWithGrad out;
  out.elbo = bound.elbo();
  out.grad.resize(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    out.grad(a) = g_points.middleRows(a * p, p).cwiseProduct(jac.middleRows(a * p, p)).sum();
  }
  return out;
}

Eigen::MatrixXd sample_disk(const FanGeometry& geom, Eigen::Index n, std::uint64_t seed) {
  geom.validate();
  if (n < 1) throw InvalidArgument("sample_disk needs n >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd out(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = geom.radius * std::sqrt(u(rng));
    const double a = kTwoPi * u(rng);
    out.row(i) = (geom.center + r * Eigen::Vector2d(std::cos(a), std::sin(a))).transpose();
  }
  return out;
}

FovPlacement fov_continuous_placement(const KernelSpec& spec, const FanGeometry& geom, Eigen::Index s, Eigen::Index n,
                                      const FovOptions& opts) {
  if (s < 1) throw InvalidArgument("fov placement needs at least one sensor");
  if (n < 1) throw InvalidArgument("fov placement needs at least one sample");
  if (!(opts.learning_rate > 0.0) || opts.max_iters < 0) throw InvalidArgument("invalid optimizer options");
  const Dataset train{sample_disk(geom, n, derive_seed(opts.seed, 0)), std::nullopt};

  std::mt19937_64 rng(derive_seed(opts.seed, 1));
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  Eigen::VectorXd angles(s);
  for (Eigen::Index i = 0; i < s; ++i) angles(i) = u(rng);

  AdamAscent adam(s, opts.learning_rate);
  ImprovementWindow window(opts.rel_tolerance, opts.patience);
  FovPlacement best;
  for (int iter = 0;; ++iter) {
    const TransformedElboWithGrad eg = transformed_elbo_with_grad(spec, train, angles, geom);
    if (!std::isfinite(eg.elbo) || !eg.grad.allFinite()) {
      throw NumericalFailure("non-finite transformed bound at iteration " + std::to_string(iter));
    }
    if (iter == 0) best.initial_elbo = eg.elbo;
    if (iter == 0 || eg.elbo > best.elbo) {
      best.elbo = eg.elbo;
      best.angles = wrap_angles(angles);
    }
    best.iterations = iter;
    if (iter == opts.max_iters || window.update(best.elbo)) break;
    adam.step(angles, eg.grad);
    angles = wrap_angles(angles);
  }
  return best;
}

}  // namespace sgpplace
