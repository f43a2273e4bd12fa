// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "sgpplace/assignment.hpp"
#include "sgpplace/benchmark.hpp"
#include "sgpplace/environment.hpp"
#include "sgpplace/fov.hpp"
#include "sgpplace/gp.hpp"
#include "sgpplace/metrics.hpp"
#include "sgpplace/placement.hpp"
#include "sgpplace/svgp.hpp"

using namespace sgpplace;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

KernelSpec random_kernel(std::mt19937_64& rng, Eigen::Index d) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  KernelSpec spec;
  spec.family = u(rng) < 0.5 ? KernelFamily::rbf : KernelFamily::matern32;
  spec.variance = 0.5 + 1.5 * u(rng);
  spec.lengthscale = Eigen::VectorXd::Constant(u(rng) < 0.5 ? 1 : d, 0.0);
  for (Eigen::Index i = 0; i < spec.lengthscale.size(); ++i) spec.lengthscale(i) = 0.15 + 0.5 * u(rng);
  spec.noise_variance = 0.01 + 0.2 * u(rng);
  return spec;
}

// The synthetic benchmark setting shared by criteria 5 to 7.
const KernelSpec kFieldKernel = KernelSpec::rbf(1.0, 0.2, 0.01);

BenchmarkConfig field_config(std::uint64_t seed, std::vector<PlacementMethod> methods, std::vector<Eigen::Index> s) {
  BenchmarkConfig cfg;
  cfg.env = Environment::unit_square();
  cfg.spec = kFieldKernel;
  cfg.methods = std::move(methods);
  cfg.num_sensors = std::move(s);
  cfg.seeds = 1;
  cfg.seed = seed;
  cfg.grid_size = 2500;
  cfg.num_candidates = 150;
  cfg.kl_train = 0;
  return cfg;
}

Outcome elbo_lower_bound() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<Eigen::Index> nd(10, 200), md(1, 20), dd(1, 3);
  int bound_bad = 0, exact_bad = 0;
  double worst_gap = -1e300, worst_exact = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index d = dd(rng);
    const Eigen::Index n = nd(rng);
    const Eigen::Index m = std::min(md(rng), n);
    const KernelSpec spec = random_kernel(rng, d);
    const Dataset train{oracle::uniform_matrix(rng, n, d), oracle::normal_vector(rng, n)};
    const Eigen::MatrixXd z = oracle::uniform_matrix(rng, m, d);
    const double gap = svgp_elbo(SvgpState::with_labels(spec, train, z)) - gp_log_marginal(spec, train);
    worst_gap = std::max(worst_gap, gap);
    bound_bad += gap > 1e-6;
    // X_m = X on the first m training points.
    const Dataset small{train.inputs.topRows(m), train.labels->head(m)};
    const double diff = std::abs(svgp_elbo(SvgpState::with_labels(spec, small, small.inputs)) - gp_log_marginal(spec, small));
    worst_exact = std::max(worst_exact, diff);
    exact_bad += diff > 1e-5;
  }
  return {bound_bad == 0 && exact_bad == 0, "max(F - log p) = " + fmt("%.3g", worst_gap) +
                                                ", max |F - log p| at X_m = X: " + fmt("%.3g", worst_exact)};
}

Outcome gradient_check() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int total = 0, bad = 0;
  double worst = 0.0;
  auto tally = [&](const Eigen::VectorXd& g, const Eigen::VectorXd& fd) {
    for (Eigen::Index i = 0; i < g.size(); ++i, ++total) {
      const double e = oracle::relative_error(g(i), fd(i), 1e-6);
      worst = std::max(worst, e);
      bad += e >= 1e-5;
    }
  };
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::Index d = 1 + trial % 3;
    const Eigen::Index n = 30 + trial;
    const Eigen::Index m = 2 + trial % 5;
    const KernelSpec spec = random_kernel(rng, d);
    Dataset train{oracle::uniform_matrix(rng, n, d), std::nullopt};
    if (trial % 2) train.labels = oracle::normal_vector(rng, n);
    SvgpState s = trial % 2 ? SvgpState::with_labels(spec, train, oracle::uniform_matrix(rng, m, d))
                            : SvgpState::label_free(spec, train.inputs, oracle::uniform_matrix(rng, m, d));
    const Eigen::MatrixXd g = elbo_grad_inducing(s);
    const Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(s.inducing.data(), s.inducing.size());
    const Eigen::VectorXd fd = oracle::central_difference(
        [&](const Eigen::VectorXd& p) {
          SvgpState t = s;
          t.inducing = Eigen::Map<const Eigen::MatrixXd>(p.data(), m, d);
          return svgp_elbo(t);
        },
        flat, 1e-5 * spec.min_lengthscale());
    tally(Eigen::Map<const Eigen::VectorXd>(g.data(), g.size()), fd);
  }
  for (int trial = 0; trial < 25; ++trial) {
    FanGeometry geom;
    geom.center = Eigen::Vector2d(u(rng), u(rng));
    geom.radius = 0.5 + u(rng);
    geom.fan_angle = 0.3 + 1.5 * u(rng);
    geom.rays = 1 + trial % 4;
    geom.points_per_ray = 1 + trial % 3;
    KernelSpec spec = random_kernel(rng, 2);
    spec.lengthscale = (spec.lengthscale * geom.radius).eval();
    Dataset train{sample_disk(geom, 60, static_cast<std::uint64_t>(trial)), std::nullopt};
    if (trial % 2) train.labels = oracle::normal_vector(rng, 60);
    const Eigen::VectorXd angles = oracle::uniform_matrix(rng, 1 + trial % 4, 1, 0.0, 2.0 * std::numbers::pi);
    const Eigen::VectorXd g = transformed_elbo_with_grad(spec, train, angles, geom).grad;
    const Eigen::VectorXd fd = oracle::central_difference(
        [&](const Eigen::VectorXd& a) { return transformed_elbo(spec, train, a, geom); }, angles, 1e-5);
    tally(g, fd);
  }
  const double ok = 1.0 - static_cast<double>(bad) / total;
  return {ok >= 0.99, std::to_string(total - bad) + "/" + std::to_string(total) + " coordinates within 1e-5 (" +
                          fmt("%.2f%%", 100.0 * ok) + "), worst " + fmt("%.2e", worst)};
}

Outcome assignment_optimality() {
  std::mt19937_64 rng(303);
  int mismatches = 0, trials = 0;
  for (auto [rows, cols] : {std::pair{7, 7}, std::pair{5, 9}}) {
    for (int t = 0; t < 200; ++t, ++trials) {
      const Eigen::MatrixXd cost = oracle::uniform_matrix(rng, rows, cols, -5.0, 10.0);
      const Assignment a = assignment_solve(cost);
      double total = 0.0;
      for (int i = 0; i < rows; ++i) total += cost(i, a.columns[static_cast<std::size_t>(i)]);
      mismatches += total != oracle::brute_force_assignment(cost) || std::set<int>(a.columns.begin(), a.columns.end()).size() != static_cast<std::size_t>(rows);
    }
  }
  return {mismatches == 0, std::to_string(trials - mismatches) + "/" + std::to_string(trials) + " exact matches"};
}

Outcome greedy_equivalence() {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> cd(10, 40), sd(1, 8);
  int equal = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index d = 1 + trial % 3;
    const KernelSpec spec = random_kernel(rng, d);
    const int c = cd(rng);
    const int s = std::min(sd(rng), c);
    const Eigen::MatrixXd x = oracle::uniform_matrix(rng, 150, d);
    const Eigen::MatrixXd cand = oracle::uniform_matrix(rng, c, d);
    const auto naive = oracle::naive_greedy(c, s, [&](const std::vector<int>& chosen, int j) {
      Eigen::MatrixXd z(static_cast<Eigen::Index>(chosen.size()) + 1, d);
      for (std::size_t i = 0; i < chosen.size(); ++i) z.row(static_cast<Eigen::Index>(i)) = cand.row(chosen[i]);
      z.row(z.rows() - 1) = cand.row(j);
      return label_free_elbo(spec, x, z);
    });
    equal += greedy_sgp_select(spec, x, cand, s).indices == naive;
  }
  return {equal == 20, std::to_string(equal) + "/20 selections identical"};
}

Outcome quality_parity() {
  const std::vector<Eigen::Index> sizes{5, 10, 15, 20};
  std::vector<std::vector<double>> cont(sizes.size()), mi(sizes.size());
  int cells = 0, on_par = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto rows = run_benchmark(field_config(
        seed, {PlacementMethod::continuous_sgp, PlacementMethod::greedy_sgp, PlacementMethod::discrete_sgp,
               PlacementMethod::greedy_mi},
        sizes));
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      const BenchmarkRow* r = &rows[4 * k];
      for (int j = 0; j < 4; ++j) {
        if (r[j].status != "ok") return {false, "cell failed: " + r[j].status};
      }
      cont[k].push_back(r[0].rmse);
      mi[k].push_back(r[3].rmse);
      ++cells;
      on_par += r[2].elbo >= r[1].elbo - 0.02 * std::abs(r[1].elbo);
    }
  }
  bool rmse_ok = true;
  std::string detail = "RMSE ratio continuous/greedy-mi by s:";
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const double ratio = mean(cont[k]) / mean(mi[k]);
    rmse_ok = rmse_ok && ratio <= 1.05;
    detail += " " + std::to_string(sizes[k]) + ":" + fmt("%.3f", ratio);
  }
  const double frac = static_cast<double>(on_par) / cells;
  detail += "; discrete on par with greedy in " + std::to_string(on_par) + "/" + std::to_string(cells) + " cells";
  return {rmse_ok && frac >= 0.8, detail};
}

Outcome speed_ordering() {
  std::vector<double> cont, disc, mi;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto rows = run_benchmark(field_config(
        100 + seed, {PlacementMethod::continuous_sgp, PlacementMethod::discrete_sgp, PlacementMethod::greedy_mi}, {20}));
    for (const auto& r : rows) {
      if (r.status != "ok") return {false, "cell failed: " + r.status};
    }
    cont.push_back(rows[0].wall_time);
    disc.push_back(rows[1].wall_time);
    mi.push_back(rows[2].wall_time);
  }
  const double m = median(mi);
  return {median(cont) <= 0.5 * m && median(disc) <= 0.5 * m,
          "median wall time continuous " + fmt("%.3f", median(cont)) + " s, discrete " + fmt("%.3f", median(disc)) +
              " s, greedy-mi " + fmt("%.3f", m) + " s"};
}

Outcome elbo_mi_trend() {
  std::vector<Eigen::Index> sizes;
  for (Eigen::Index s = 3; s <= 19; ++s) sizes.push_back(s);
  double worst = 1.0;
  std::string detail = "Spearman per seed:";
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto rows = run_benchmark(field_config(200 + seed, {PlacementMethod::continuous_sgp}, sizes));
    std::vector<double> elbo, mi;
    for (const auto& r : rows) {
      if (r.status != "ok") return {false, "cell failed: " + r.status};
      elbo.push_back(r.elbo);
      mi.push_back(r.mi);
    }
    const double rho = oracle::spearman(elbo, mi);
    worst = std::min(worst, rho);
    detail += " " + fmt("%.3f", rho);
  }
  return {worst >= 0.8, detail};
}

Outcome kl_trend() {
  int better = 0;
  std::string detail = "KL(m=5) -> KL(m=20):";
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(500 + seed);
    const KernelSpec spec = KernelSpec::rbf(1.0, 0.2, 0.05);
    const Environment env = Environment::unit_square();
    const Eigen::MatrixXd x = sample_uniform(env, 100, derive_seed(500 + seed, 0));
    const EvaluationGrid field = synth_field(env, spec, x, derive_seed(500 + seed, 1));
    Dataset train{x, *field.labels + oracle::normal_vector(rng, 100, std::sqrt(spec.noise_variance))};
    const Eigen::MatrixXd cand = sample_uniform(env, 80, derive_seed(500 + seed, 2));
    const Eigen::MatrixXd test = sample_uniform(env, 100, derive_seed(500 + seed, 3));
    const GreedySelection sel = greedy_sgp_select(spec, x, cand, 20);
    auto prefix = [&](Eigen::Index m) {
      Eigen::MatrixXd z(m, 2);
      for (Eigen::Index i = 0; i < m; ++i) z.row(i) = cand.row(sel.indices[static_cast<std::size_t>(i)]);
      return z;
    };
    const double k5 = exact_kl(spec, train, prefix(5), test);
    const double k20 = exact_kl(spec, train, prefix(20), test);
    better += k20 < k5;
    if (seed < 3) detail += " " + fmt("%.3g", k5) + "->" + fmt("%.3g", k20);
  }
  return {better >= 9, std::to_string(better) + "/10 seeds lower at m = 20;" + detail + " ..."};
}

Outcome fov_correctness() {
  std::mt19937_64 rng(909);
  FanGeometry geom;
  geom.center = Eigen::Vector2d(0.5, 0.5);
  geom.radius = 0.5;
  geom.fan_angle = 1.2;
  geom.rays = 3;
  geom.points_per_ray = 1;
  const KernelSpec spec = KernelSpec::rbf(1.3, 0.25, 0.1);
  const Dataset train{sample_disk(geom, 40, 11), oracle::normal_vector(rng, 40)};
  const Eigen::Vector2d angles(0.7, 3.5);
  const Eigen::MatrixXd pts = expansion_transform(angles, geom);
  const Eigen::MatrixXd t = aggregation_matrix(2, 3);
  Eigen::MatrixXd kpp(6, 6), kpn(6, 40), knn(40, 40);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) kpp(i, j) = oracle::rbf(1.3, 0.25, pts.row(i), pts.row(j));
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 40; ++j) kpn(i, j) = oracle::rbf(1.3, 0.25, pts.row(i), train.inputs.row(j));
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 40; ++j) knn(i, j) = oracle::rbf(1.3, 0.25, train.inputs.row(i), train.inputs.row(j));
  const double dense =
      oracle::dense_collapsed_bound(knn, kpn.transpose() * t, t.transpose() * kpp * t, spec.noise_variance, *train.labels);
  const double dense_err = std::abs(transformed_elbo(spec, train, angles, geom) - dense);

  FanGeometry single = geom;
  single.rays = 1;
  const Eigen::VectorXd three = oracle::uniform_matrix(rng, 3, 1, 0.0, 6.2);
  const double p1_err = std::abs(transformed_elbo(spec, train, three, single) -
                                 svgp_elbo(SvgpState::with_labels(spec, train, expansion_transform(three, single))));

  GridField field;
  field.xs = Eigen::VectorXd::LinSpaced(5, 0.0, 2.0);
  field.ys = Eigen::VectorXd::LinSpaced(4, 0.0, 1.0);
  field.values = Eigen::MatrixXd::Constant(5, 4, 1.7);
  std::vector<LineSegment> lines;
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector2d a(2.0 * oracle::uniform_matrix(rng, 1, 1)(0), oracle::uniform_matrix(rng, 1, 1)(0));
    const Eigen::Vector2d b(2.0 * oracle::uniform_matrix(rng, 1, 1)(0), oracle::uniform_matrix(rng, 1, 1)(0));
    lines.push_back({a, b - a});
  }
  const Dataset obs = line_integral_data(field, lines, 16, 0.0, 1);
  double line_err = 0.0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    line_err = std::max(line_err, std::abs((*obs.labels)(static_cast<Eigen::Index>(i)) - 1.7 * lines[i].delta.norm()));
  }
  return {dense_err < 1e-8 && p1_err < 1e-9 && line_err < 1e-9,
          "dense oracle " + fmt("%.2e", dense_err) + ", p = 1 " + fmt("%.2e", p1_err) + ", constant field " +
              fmt("%.2e", line_err)};
}

Outcome obstacle_avoidance() {
  Environment env = Environment::unit_square();
  env.obstacles.push_back({{0.15, 0.2}, {0.45, 0.2}, {0.45, 0.45}, {0.15, 0.45}});
  env.obstacles.push_back({{0.55, 0.55}, {0.9, 0.6}, {0.7, 0.9}});
  const KernelSpec spec = KernelSpec::rbf(1.0, 0.2, 0.01);
  int inside = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    PlacementOptions opts;
    opts.seed = seed;
    const PlacementResult r = continuous_sgp(env, spec, 10, opts);
    for (Eigen::Index i = 0; i < r.num_sensors(); ++i, ++total) inside += !env.feasible(r.locations.row(i).transpose());
  }
  return {inside == 0, std::to_string(inside) + " of " + std::to_string(total) + " placements infeasible"};
}

Outcome submodularity() {
  const Eigen::MatrixXd lattice = lattice_points(Environment::unit_square(), 6, 6);
  const SubmodularityReport none = submodularity_probe(KernelSpec::rbf(1.0, 1e-3, 0.1), lattice, lattice, 200, 1);
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd x = oracle::uniform_matrix(rng, 60, 2);
  const Eigen::MatrixXd cand = oracle::uniform_matrix(rng, 12, 2);
  const SubmodularityReport some = submodularity_probe(KernelSpec::rbf(1.0, 0.3, 0.01), x, cand, 300, 7);
  return {none.violation_rate == 0.0 && some.violation_rate > 0.0,
          "near-diagonal rate " + fmt("%.3f", none.violation_rate) + ", correlated rate " +
              fmt("%.3f", some.violation_rate) + " (max violation " + fmt("%.3g", some.max_violation) + ")"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_determinism() {
#ifndef SGPPLACE_CLI_PATH
  return {false, "CLI was not built (SGPPLACE_BUILD_TOOLS=OFF)"};
#else
  const fs::path dir = fs::temp_directory_path() / ("sgpplace_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  {
    std::ofstream(dir / "env.json") << R"({"bounds":[[0,1],[0,1]],"obstacles":[[[0.3,0.3],[0.6,0.3],[0.45,0.6]]]})";
    std::ofstream(dir / "kernel.json") << R"({"family":"rbf","variance":1.0,"lengthscale":[0.2],"noise_variance":0.01})";
  }
  const std::string base = std::string("\"") + SGPPLACE_CLI_PATH + "\" benchmark --env \"" + (dir / "env.json").string() +
                           "\" --kernel \"" + (dir / "kernel.json").string() +
                           "\" --methods continuous-sgp,greedy-sgp,discrete-sgp,greedy-mi,random --num-sensors 3,6"
                           " --seeds 2 --seed 9 --grid-size 600 --num-candidates 60 --no-timing --validate";
  std::vector<std::string> outputs;
  for (const char* run : {"a", "b", "c"}) {
    const fs::path out = dir / (std::string(run) + ".csv");
    const std::string jobs = std::string(run) == "c" ? " --jobs 3" : "";
    const std::string cmd = base + jobs + " --output \"" + out.string() + "\" > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "benchmark command failed: " + cmd};
    outputs.push_back(slurp(out));
  }
  fs::remove_all(dir);
  const bool same = outputs[0] == outputs[1];
  const bool parallel_same = outputs[0] == outputs[2];
  const auto lines = std::count(outputs[0].begin(), outputs[0].end(), '\n');
  return {same && parallel_same && lines == 21,
          std::string(same ? "identical" : "different") + " reruns, " + (parallel_same ? "identical" : "different") +
              " with --jobs 3, " + std::to_string(lines - 1) + " rows"};
#endif
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "ELBO is a lower bound, tight at X_m = X", 30, elbo_lower_bound},
      {2, "gradient correctness", 60, gradient_check},
      {3, "assignment optimality", 10, assignment_optimality},
      {4, "greedy equivalence", 60, greedy_equivalence},
      {5, "quality parity", 600, quality_parity},
      {6, "speed ordering", 300, speed_ordering},
      {7, "ELBO-MI trend", 300, elbo_mi_trend},
      {8, "KL trend", 120, kl_trend},
      {9, "FoV correctness", 30, fov_correctness},
      {10, "obstacle avoidance", 300, obstacle_avoidance},
      {11, "submodularity probe", 60, submodularity},
      {12, "CLI determinism", 120, cli_determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s %2d %s: %s [%.1f s, budget %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
