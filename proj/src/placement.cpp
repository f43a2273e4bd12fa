#include "sgpplace/placement.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "sgpplace/adam.hpp"
#include "sgpplace/assignment.hpp"
#include "sgpplace/errors.hpp"
#include "sgpplace/svgp.hpp"

namespace sgpplace {

namespace {

constexpr std::uint64_t kSampleStream = 0;
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kRandomStream = 2;

struct MethodName {
  PlacementMethod method;
  const char* name;
};

constexpr MethodName kMethodNames[] = {
    {PlacementMethod::continuous_sgp, "continuous-sgp"}, {PlacementMethod::greedy_sgp, "greedy-sgp"},
    {PlacementMethod::discrete_sgp, "discrete-sgp"},     {PlacementMethod::greedy_mi, "greedy-mi"},
    {PlacementMethod::random, "random"},                 {PlacementMethod::fov_sgp, "fov-sgp"},
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Eigen::MatrixXd gather_rows(const Eigen::Ref<const Eigen::MatrixXd>& m, const std::vector<int>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

std::vector<int> random_subset(Eigen::Index total, Eigen::Index count, std::uint64_t seed) {
  std::vector<int> idx(static_cast<std::size_t>(total));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (Eigen::Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, total - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(count));
  return idx;
}

void check_count(Eigen::Index s, Eigen::Index available, const char* what) {
  if (s < 1) throw InvalidArgument("number of sensors must be >= 1");
  if (s > available) {
    throw InvalidArgument("requested " + std::to_string(s) + " sensors but only " + std::to_string(available) + " " +
                          what + " are available");
  }
}

// Moves an iterate that entered an obstacle to just outside the nearest
// obstacle boundary. Returns false when no feasible nearby point was found.
bool push_out_of_obstacles(const Environment& env, Eigen::Ref<Eigen::VectorXd> p) {
  const double nudge = 1e-6 * (env.high() - env.low()).maxCoeff();
  for (int attempt = 0; attempt < 3 && env.in_obstacle(p); ++attempt) {
    const Eigen::Vector2d q(p(0), p(1));
    Eigen::Vector2d best = q;
    double best_d = std::numeric_limits<double>::infinity();
    const Polygon* hit = nullptr;
    for (const auto& poly : env.obstacles) {
      if (!point_in_polygon(q, poly)) continue;
      const Eigen::Vector2d b = nearest_boundary_point(q, poly);
      if ((b - q).norm() < best_d) {
        best_d = (b - q).norm();
        best = b;
        hit = &poly;
      }
    }
    if (hit == nullptr) break;
    Eigen::Vector2d outward = best - q;
    if (outward.norm() == 0.0) {
      // On the boundary already: step away from the polygon's vertex mean.
      Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
      for (const auto& v : *hit) centroid += v;
      outward = q - centroid / static_cast<double>(hit->size());
    }
    const Eigen::Vector2d moved = best + nudge * outward.normalized();
    p(0) = moved.x();
    p(1) = moved.y();
    env.clamp(p);
  }
  return env.feasible(p);
}

}  // namespace

std::string_view to_string(PlacementMethod method) {
  for (const auto& m : kMethodNames) {
    if (m.method == method) return m.name;
  }
  return "unknown";
}

const std::vector<std::string>& placement_method_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& m : kMethodNames) v.emplace_back(m.name);
    return v;
  }();
  return names;
}

PlacementMethod placement_method_from_string(std::string_view name) {
  for (const auto& m : kMethodNames) {
    if (name == m.name) return m.method;
  }
  std::string valid;
  for (const auto& m : kMethodNames) valid += std::string(valid.empty() ? "" : ", ") + m.name;
  throw InvalidArgument("unknown placement method '" + std::string(name) + "'; valid methods: " + valid);
}

Eigen::Index default_num_samples(Eigen::Index s) { return std::max<Eigen::Index>(1000, 50 * s); }

double label_free_elbo(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x,
                       const Eigen::Ref<const Eigen::MatrixXd>& inducing) {
  return svgp_elbo(SvgpState::label_free(spec, x, inducing));
}

Eigen::MatrixXd placement_samples(const Environment& env, Eigen::Index n, std::uint64_t seed) {
  return sample_uniform(env, n, derive_seed(seed, kSampleStream));
}

InducingAscent optimize_inducing(const Environment& env, const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x,
                                 const Eigen::Ref<const Eigen::MatrixXd>& init, const PlacementOptions& opts) {
  if (!(opts.learning_rate > 0.0) || opts.max_iters < 0) throw InvalidArgument("invalid optimizer options");
  const Eigen::Index m = init.rows();
  const Eigen::Index d = init.cols();
  SvgpState state = SvgpState::label_free(spec, x, init);
  Eigen::VectorXd params = Eigen::Map<const Eigen::VectorXd>(state.inducing.data(), m * d);

  AdamAscent adam(params.size(), opts.learning_rate);
  ImprovementWindow window(opts.rel_tolerance, opts.patience);
  InducingAscent best;
  Eigen::VectorXd point(d);
  for (int iter = 0;; ++iter) {
    state.inducing = Eigen::Map<const Eigen::MatrixXd>(params.data(), m, d);
    const ElboWithGrad eg = svgp_elbo_with_grad(state);
    if (!std::isfinite(eg.elbo) || !eg.grad.allFinite()) {
      throw NumericalFailure("non-finite bound during inducing-point ascent at iteration " + std::to_string(iter));
    }
    if (iter == 0) best.initial_elbo = eg.elbo;
    if (iter == 0 || eg.elbo > best.elbo) {
      best.elbo = eg.elbo;
      best.inducing = state.inducing;
    }
    best.iterations = iter;
    if (iter == opts.max_iters || window.update(best.elbo)) break;

    const Eigen::VectorXd previous = params;
    adam.step(params, Eigen::Map<const Eigen::VectorXd>(eg.grad.data(), m * d));
    // Column-major layout: coordinate k of point j lives at j + k m.
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index k = 0; k < d; ++k) point(k) = params(j + k * m);
      env.clamp(point);
      if (!env.obstacles.empty() && !push_out_of_obstacles(env, point)) {
        for (Eigen::Index k = 0; k < d; ++k) {
          point(k) = previous(j + k * m);
          adam.reset_coordinate(j + k * m);
        }
      }
      for (Eigen::Index k = 0; k < d; ++k) params(j + k * m) = point(k);
    }
  }
  return best;
}

PlacementResult continuous_sgp(const Environment& env, const KernelSpec& spec, Eigen::Index s,
                               const PlacementOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  env.validate();
  spec.validate();
  spec.check_dimension(env.dim());
  const Eigen::Index n = opts.num_samples > 0 ? opts.num_samples : default_num_samples(s);
  check_count(s, n, "unlabeled samples");
  const Eigen::MatrixXd x = placement_samples(env, n, opts.seed);
  const Eigen::MatrixXd init = gather_rows(x, random_subset(n, s, derive_seed(opts.seed, kInitStream)));
  const InducingAscent fit = optimize_inducing(env, spec, x, init, opts);

  PlacementResult out;
  out.method = PlacementMethod::continuous_sgp;
  out.locations = fit.inducing;
  out.elbo = fit.elbo;
  out.seed = opts.seed;
  out.metrics["initial_elbo"] = fit.initial_elbo;
  out.metrics["iterations"] = fit.iterations;
  out.metrics["num_samples"] = static_cast<double>(n);
  out.wall_time = seconds_since(start);
  return out;
}

GreedySelection greedy_sgp_select(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x,
                                  const Eigen::Ref<const Eigen::MatrixXd>& candidates, Eigen::Index s) {
  spec.validate();
  check_count(s, candidates.rows(), "candidates");
  if (candidates.cols() != x.cols()) throw InvalidArgument("candidates and samples differ in dimension");
  if (!(spec.noise_variance > 0.0)) {
    throw InvalidArgument("the collapsed bound needs a positive noise variance (trace term divides by it)");
  }
  const Eigen::Index c = candidates.rows();
  const Eigen::Index n = x.rows();
  const double knn_trace = static_cast<double>(n) * spec.variance;
  const Eigen::MatrixXd kcn = kernel_matrix(spec, candidates, x);
  const Eigen::MatrixXd kcc = kernel_matrix(spec, candidates, candidates);

  GreedySelection out;
  std::vector<char> taken(static_cast<std::size_t>(c), 0);
  for (Eigen::Index step = 0; step < s; ++step) {
    const Eigen::Index m = static_cast<Eigen::Index>(out.indices.size());
    Eigen::MatrixXd kmm(m, m), kmn(m, n);
    for (Eigen::Index a = 0; a < m; ++a) {
      kmn.row(a) = kcn.row(out.indices[a]);
      for (Eigen::Index b = 0; b < m; ++b) kmm(a, b) = kcc(out.indices[a], out.indices[b]);
    }
    const CollapsedBound bound(kmm, kmn, knn_trace, nullptr, spec.noise_variance, spec.variance);

    std::vector<int> rest;
    for (Eigen::Index j = 0; j < c; ++j) {
      if (!taken[static_cast<std::size_t>(j)]) rest.push_back(static_cast<int>(j));
    }
    const Eigen::Index r = static_cast<Eigen::Index>(rest.size());
    Eigen::MatrixXd kmc(m, r), krn(r, n);
    Eigen::VectorXd krr(r);
    for (Eigen::Index j = 0; j < r; ++j) {
      krn.row(j) = kcn.row(rest[j]);
      krr(j) = kcc(rest[j], rest[j]);
      for (Eigen::Index a = 0; a < m; ++a) kmc(a, j) = kcc(out.indices[a], rest[j]);
    }
    Eigen::VectorXd ext = bound.extended_elbos(kmc, krr, krn);

    int best = -1;
    double best_val = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < r; ++j) {
      if (!std::isfinite(ext(j))) {
        std::vector<int> grown = out.indices;
        grown.push_back(rest[j]);
        Eigen::MatrixXd gmm(m + 1, m + 1), gmn(m + 1, n);
        for (Eigen::Index a = 0; a <= m; ++a) {
          gmn.row(a) = kcn.row(grown[a]);
          for (Eigen::Index b = 0; b <= m; ++b) gmm(a, b) = kcc(grown[a], grown[b]);
        }
        ext(j) = CollapsedBound(gmm, gmn, knn_trace, nullptr, spec.noise_variance, spec.variance).elbo();
      }
      if (ext(j) > best_val) {
        best_val = ext(j);
        best = rest[j];
      }
    }
    if (best < 0) throw NumericalFailure("greedy selection found no candidate with a finite bound");
    taken[static_cast<std::size_t>(best)] = 1;
    out.indices.push_back(best);
    out.elbos.push_back(best_val);
  }
  return out;
}

PlacementResult greedy_sgp(const Environment& env, const KernelSpec& spec, Eigen::Index s, const PlacementOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  env.validate();
  spec.validate();
  spec.check_dimension(env.dim());
  const Eigen::MatrixXd& candidates = env.require_candidates();
  check_count(s, candidates.rows(), "candidates");
  const Eigen::Index n = opts.num_samples > 0 ? opts.num_samples : default_num_samples(s);
  const Eigen::MatrixXd x = placement_samples(env, n, opts.seed);
  const GreedySelection sel = greedy_sgp_select(spec, x, candidates, s);

  PlacementResult out;
  out.method = PlacementMethod::greedy_sgp;
  out.locations = gather_rows(candidates, sel.indices);
  out.elbo = sel.elbos.back();
  out.seed = opts.seed;
  out.metrics["num_samples"] = static_cast<double>(n);
  out.wall_time = seconds_since(start);
  return out;
}

std::vector<int> map_to_candidates(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& locations,
                                   const Eigen::Ref<const Eigen::MatrixXd>& candidates, AssignmentCost cost) {
  if (locations.cols() != candidates.cols()) throw InvalidArgument("locations and candidates differ in dimension");
  Eigen::MatrixXd c(locations.rows(), candidates.rows());
  if (cost == AssignmentCost::distance) {
    for (Eigen::Index i = 0; i < locations.rows(); ++i)
      for (Eigen::Index j = 0; j < candidates.rows(); ++j) c(i, j) = (locations.row(i) - candidates.row(j)).norm();
  } else {
    c = (spec.variance - kernel_matrix(spec, locations, candidates).array()).matrix();
  }
  return assignment_solve(c).columns;
}

PlacementResult discrete_sgp(const Environment& env, const KernelSpec& spec, Eigen::Index s,
                             const PlacementOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  const Eigen::MatrixXd& candidates = env.require_candidates();
  check_count(s, candidates.rows(), "candidates");
  const PlacementResult cont = continuous_sgp(env, spec, s, opts);
  const std::vector<int> idx = map_to_candidates(spec, cont.locations, candidates, opts.assignment_cost);

  PlacementResult out;
  out.method = PlacementMethod::discrete_sgp;
  out.locations = gather_rows(candidates, idx);
  const Eigen::Index n = static_cast<Eigen::Index>(cont.metrics.at("num_samples"));
  out.elbo = label_free_elbo(spec, placement_samples(env, n, opts.seed), out.locations);
  out.seed = opts.seed;
  out.metrics["continuous_elbo"] = cont.elbo;
  out.metrics["mapped_elbo"] = out.elbo;
  out.metrics["iterations"] = cont.metrics.at("iterations");
  out.metrics["num_samples"] = static_cast<double>(n);
  out.wall_time = seconds_since(start);
  return out;
}

PlacementResult random_placement(const Environment& env, Eigen::Index s, std::uint64_t seed, bool discrete) {
  const auto start = std::chrono::steady_clock::now();
  env.validate();
  PlacementResult out;
  out.method = PlacementMethod::random;
  out.seed = seed;
  out.elbo = std::numeric_limits<double>::quiet_NaN();
  if (discrete) {
    const Eigen::MatrixXd& candidates = env.require_candidates();
    check_count(s, candidates.rows(), "candidates");
    out.locations = gather_rows(candidates, random_subset(candidates.rows(), s, derive_seed(seed, kRandomStream)));
  } else {
    if (s < 1) throw InvalidArgument("number of sensors must be >= 1");
    out.locations = sample_uniform(env, s, derive_seed(seed, kRandomStream));
  }
  out.wall_time = seconds_since(start);
  return out;
}

}  // namespace sgpplace
