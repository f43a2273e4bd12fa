#pragma once

// Independent reference computations for tests. Nothing here may call into
// the factored code paths it is used to check.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

namespace oracle {

inline Eigen::MatrixXd uniform_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double lo = 0.0,
                                      double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
  return m;
}

inline Eigen::VectorXd normal_vector(std::mt19937_64& rng, Eigen::Index n, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

/// Isotropic RBF written out longhand.
inline double rbf(double variance, double lengthscale, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return variance * std::exp(-(a - b).squaredNorm() / (2.0 * lengthscale * lengthscale));
}

/// log N(y | 0, C) through a dense LDLT of the full matrix.
inline double gaussian_log_density(const Eigen::MatrixXd& cov, const Eigen::VectorXd& y) {
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  const double log_det = ldlt.vectorD().array().log().sum();
  return -0.5 * y.dot(ldlt.solve(y)) - 0.5 * log_det -
         0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
}

/// Collapsed bound assembled with explicit n x n matrices from precomputed
/// blocks: Q = K_nm K_mm^-1 K_mn, then dense log-density plus trace term.
inline double dense_collapsed_bound(const Eigen::MatrixXd& knn, const Eigen::MatrixXd& knm, const Eigen::MatrixXd& kmm,
                                    double noise, const Eigen::VectorXd& y) {
  const Eigen::Index n = knn.rows();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  if (kmm.rows() > 0) q = knm * kmm.fullPivLu().solve(knm.transpose());
  Eigen::MatrixXd c = q;
  c.diagonal().array() += noise;
  return gaussian_log_density(c, y) - (knn - q).trace() / (2.0 * noise);
}

/// Central finite differences of a scalar function of a flat vector.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                          double step) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd hi = x;
    Eigen::VectorXd lo = x;
    hi(i) += step;
    lo(i) -= step;
    g(i) = (f(hi) - f(lo)) / (2.0 * step);
  }
  return g;
}

/// Relative disagreement between an analytic and a numeric derivative.
/// Coordinates where both are at the roundoff floor count as agreeing.
inline double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

/// Minimum-cost assignment of rows to distinct columns by enumerating every
/// ordered column choice. Returns the row-order total.
inline double brute_force_assignment(const Eigen::MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> perm(static_cast<std::size_t>(cols));
  std::iota(perm.begin(), perm.end(), 0);
  // Enumerate all permutations of columns; the first `rows` entries give an
  // injective map. Duplicated prefixes are harmless for the minimum.
  do {
    double total = 0.0;
    for (int r = 0; r < rows; ++r) total += cost(r, perm[static_cast<std::size_t>(r)]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Bivariate-normal style MI: 0.5 log det(S_rr) - 0.5 log det(S_rr|a) with
/// explicit inverses.
inline double dense_mutual_information(const Eigen::MatrixXd& k_aa, const Eigen::MatrixXd& k_ar, const Eigen::MatrixXd& k_rr,
                                       double noise) {
  Eigen::MatrixXd saa = k_aa;
  saa.diagonal().array() += noise;
  const Eigen::MatrixXd cond = k_rr - k_ar.transpose() * saa.inverse() * k_ar;
  return 0.5 * std::log(k_rr.determinant()) - 0.5 * std::log(cond.determinant());
}

/// Spearman rank correlation (no tie correction; inputs in tests are distinct).
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k);
    return r;
  };
  const std::vector<double> ra = ranks(a);
  const std::vector<double> rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

/// Latent variance at index y given noisy observations at `given`, all
/// indices into the covariance k, via an explicit inverse.
inline double conditional_variance(const Eigen::MatrixXd& k, int y, const std::vector<int>& given, double noise) {
  if (given.empty()) return k(y, y);
  const Eigen::Index m = static_cast<Eigen::Index>(given.size());
  Eigen::MatrixXd kss(m, m);
  Eigen::VectorXd ksy(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    ksy(i) = k(given[i], y);
    for (Eigen::Index j = 0; j < m; ++j) kss(i, j) = k(given[i], given[j]);
  }
  kss.diagonal().array() += noise;
  return k(y, y) - ksy.dot(kss.inverse() * ksy);
}

/// Sequential argmax of f(selected, candidate) over unselected candidates,
/// lowest index on ties.
inline std::vector<int> naive_greedy(int num_candidates, int budget,
                                     const std::function<double(const std::vector<int>&, int)>& f) {
  std::vector<int> chosen;
  for (int step = 0; step < budget; ++step) {
    int best = -1;
    double best_val = -1e300;
    for (int j = 0; j < num_candidates; ++j) {
      if (std::find(chosen.begin(), chosen.end(), j) != chosen.end()) continue;
      const double v = f(chosen, j);
      if (best < 0 || v > best_val) {
        best = j;
        best_val = v;
      }
    }
    chosen.push_back(best);
  }
  return chosen;
}

}  // namespace oracle
