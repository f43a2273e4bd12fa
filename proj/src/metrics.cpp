#include "sgpplace/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "sgpplace/errors.hpp"
#include "sgpplace/svgp.hpp"

namespace sgpplace {

namespace {

JitteredCholesky factor_gp(Eigen::MatrixXd a, const char* what) {
  const double scale = a.rows() > 0 ? a.diagonal().mean() : 1.0;
  return jittered_cholesky(a, kGpJitterLevels, scale, what);
}

Eigen::MatrixXd noisy_gram(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  Eigen::MatrixXd k = kernel_matrix(spec, x, x);
  k.diagonal().array() += spec.noise_variance;
  return k;
}

}  // namespace

PlacementResult greedy_mi(const Eigen::Ref<const Eigen::MatrixXd>& candidates, const EvaluationGrid& grid,
                          const KernelSpec& spec, Eigen::Index s) {
  const auto start = std::chrono::steady_clock::now();
  spec.validate();
  const Eigen::Index c = candidates.rows();
  if (s < 1 || s > c) {
    throw InvalidArgument("greedy_mi: requested " + std::to_string(s) + " sensors from " + std::to_string(c) +
                          " candidates");
  }
  if (grid.size() < 1) throw InvalidArgument("greedy_mi needs a non-empty grid");
  if (grid.points.cols() != candidates.cols()) throw InvalidArgument("grid and candidates differ in dimension");
  spec.check_dimension(candidates.cols());
  const double noise = spec.noise_variance;

  // Precision of the noisy covariance over V restricted to the candidate
  // block: (C_SS - C_SG C_GG^-1 C_GS)^-1. Removing a selected candidate from
  // the complement set is then a rank-one downdate of this block.
  const JitteredCholesky cgg = factor_gp(noisy_gram(spec, grid.points), "greedy_mi grid covariance");
  const Eigen::MatrixXd w = cgg.matrix_l().solve(kernel_matrix(spec, grid.points, candidates));
  Eigen::MatrixXd schur = noisy_gram(spec, candidates);
  schur.selfadjointView<Eigen::Lower>().rankUpdate(w.transpose(), -1.0);
  schur = schur.selfadjointView<Eigen::Lower>();
  const JitteredCholesky schur_llt = factor_gp(schur, "greedy_mi candidate Schur complement");
  Eigen::MatrixXd precision = schur_llt.llt.solve(Eigen::MatrixXd::Identity(c, c));

  const Eigen::MatrixXd kss = kernel_matrix(spec, candidates, candidates);
  std::vector<int> selected;
  std::vector<char> taken(static_cast<std::size_t>(c), 0);
  for (Eigen::Index step = 0; step < s; ++step) {
    // Latent variance given the noisy selected set.
    Eigen::VectorXd var_given_a = kss.diagonal();
    if (!selected.empty()) {
      const Eigen::Index m = static_cast<Eigen::Index>(selected.size());
      Eigen::MatrixXd caa(m, m), kas(m, c);
      for (Eigen::Index i = 0; i < m; ++i) {
        kas.row(i) = kss.row(selected[i]);
        for (Eigen::Index j = 0; j < m; ++j) caa(i, j) = kss(selected[i], selected[j]);
      }
      caa.diagonal().array() += noise;
      const JitteredCholesky la = factor_gp(caa, "greedy_mi selected covariance");
      var_given_a -= la.matrix_l().solve(kas).colwise().squaredNorm().transpose();
    }

    int best = -1;
    double best_val = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < c; ++j) {
      if (taken[static_cast<std::size_t>(j)]) continue;
      const double num = std::max(var_given_a(j), std::numeric_limits<double>::min());
      const double den = std::max(1.0 / precision(j, j) - noise, std::numeric_limits<double>::min());
      const double crit = 0.5 * std::log(num) - 0.5 * std::log(den);
      if (crit > best_val) {
        best_val = crit;
        best = static_cast<int>(j);
      }
    }
    if (best < 0) throw NumericalFailure("greedy_mi found no candidate with a finite criterion");
    selected.push_back(best);
    taken[static_cast<std::size_t>(best)] = 1;

    const Eigen::VectorXd col = precision.col(best);
    precision.noalias() -= col * col.transpose() / col(best);
  }

  PlacementResult out;
  out.method = PlacementMethod::greedy_mi;
  out.locations.resize(s, candidates.cols());
  for (Eigen::Index i = 0; i < s; ++i) out.locations.row(i) = candidates.row(selected[i]);
  out.elbo = std::numeric_limits<double>::quiet_NaN();
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

MiEvaluator::MiEvaluator(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& r) : spec_(spec), r_(r) {
  spec.validate();
  if (r.rows() < 1) throw InvalidArgument("mutual information needs a non-empty R");
  spec.check_dimension(r.cols());
  krr_ = factor_gp(kernel_matrix(spec, r, r), "mutual information K_RR");
}

double MiEvaluator::operator()(const Eigen::Ref<const Eigen::MatrixXd>& a) const {
  if (a.rows() < 1) throw InvalidArgument("mutual information needs a non-empty A");
  if (a.cols() != r_.cols()) throw InvalidArgument("A and R differ in dimension");
  const Eigen::MatrixXd caa = noisy_gram(spec_, a);
  const Eigen::MatrixXd w = krr_.matrix_l().solve(kernel_matrix(spec_, r_, a));
  Eigen::MatrixXd cond = caa;
  cond.noalias() -= w.transpose() * w;
  cond = 0.5 * (cond + cond.transpose()).eval();
  const JitteredCholesky full = factor_gp(caa, "mutual information K_AA");
  const JitteredCholesky rest = factor_gp(cond, "mutual information conditional covariance");
  return 0.5 * full.log_det() - 0.5 * rest.log_det();
}

double mutual_information(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& a,
                          const Eigen::Ref<const Eigen::MatrixXd>& r) {
  return MiEvaluator(spec, r)(a);
}

std::vector<int> nearest_grid_indices(const Eigen::Ref<const Eigen::MatrixXd>& grid,
                                      const Eigen::Ref<const Eigen::MatrixXd>& queries) {
  if (grid.rows() < 1) throw InvalidArgument("nearest-node lookup needs a non-empty grid");
  if (grid.cols() != queries.cols()) throw InvalidArgument("grid and queries differ in dimension");
  std::vector<int> out(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    Eigen::Index idx = 0;
    (grid.rowwise() - queries.row(q)).rowwise().squaredNorm().minCoeff(&idx);
    out[static_cast<std::size_t>(q)] = static_cast<int>(idx);
  }
  return out;
}

double rmse_reconstruction(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& placements,
                           const EvaluationGrid& truth) {
  if (!truth.labels) throw InvalidArgument("RMSE needs a labeled evaluation grid");
  if (placements.rows() < 1) throw InvalidArgument("RMSE needs at least one placement");
  const std::vector<int> idx = nearest_grid_indices(truth.points, placements);
  Dataset train;
  train.inputs = placements;
  train.labels = Eigen::VectorXd(placements.rows());
  for (std::size_t i = 0; i < idx.size(); ++i) (*train.labels)(static_cast<Eigen::Index>(i)) = (*truth.labels)(idx[i]);
  const Eigen::VectorXd mean = gp_posterior_mean(spec, train, truth.points);
  return std::sqrt((mean - *truth.labels).squaredNorm() / static_cast<double>(truth.size()));
}

double exact_kl(const KernelSpec& spec, const Dataset& train, const Eigen::Ref<const Eigen::MatrixXd>& inducing,
                const Eigen::Ref<const Eigen::MatrixXd>& test) {
  if (train.size() > 500 || test.rows() > 500) throw InvalidArgument("exact_kl is limited to 500 train and test points");
  const SvgpState state = SvgpState::with_labels(spec, train, inducing);
  GaussianPrediction q = svgp_predict(state, test);
  GaussianPrediction p = gp_posterior(spec, train, test);
  q.covariance.diagonal().array() += spec.noise_variance;
  p.covariance.diagonal().array() += spec.noise_variance;
  const JitteredCholesky lp = factor_gp(p.covariance, "exact GP predictive covariance");
  const JitteredCholesky lq = factor_gp(q.covariance, "sparse GP predictive covariance");
  const Eigen::MatrixXd a = lp.matrix_l().solve(lq.matrix_l().toDenseMatrix());
  const Eigen::VectorXd b = lp.matrix_l().solve(q.mean - p.mean);
  const double k = static_cast<double>(test.rows());
  return 0.5 * (a.squaredNorm() + b.squaredNorm() - k + lp.log_det() - lq.log_det());
}

SubmodularityReport submodularity_probe(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x,
                                        const Eigen::Ref<const Eigen::MatrixXd>& candidates, int trials,
                                        std::uint64_t seed) {
  if (trials < 1) throw InvalidArgument("submodularity probe needs trials >= 1");
  const Eigen::Index c = candidates.rows();
  if (c < 2) throw InvalidArgument("submodularity probe needs at least two candidates");
  std::mt19937_64 rng(seed);
  std::vector<int> perm(static_cast<std::size_t>(c));
  SubmodularityReport report;
  report.trials = trials;
  for (int t = 0; t < trials; ++t) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const Eigen::Index large = std::uniform_int_distribution<Eigen::Index>(1, c - 1)(rng);
    const Eigen::Index small = std::uniform_int_distribution<Eigen::Index>(0, large - 1)(rng);
    Eigen::MatrixXd big(large, candidates.cols());
    for (Eigen::Index i = 0; i < large; ++i) big.row(i) = candidates.row(perm[static_cast<std::size_t>(i)]);
    const Eigen::VectorXd point = candidates.row(perm[static_cast<std::size_t>(large)]).transpose();
    const double d_small = elbo_delta(SvgpState::label_free(spec, x, big.topRows(small)), point);
    const double d_large = elbo_delta(SvgpState::label_free(spec, x, big), point);
    if (d_small < d_large - 1e-8) {
      ++report.violations;
      report.max_violation = std::max(report.max_violation, d_large - d_small);
    }
  }
  report.violation_rate = static_cast<double>(report.violations) / trials;
  return report;
}

}  // namespace sgpplace
