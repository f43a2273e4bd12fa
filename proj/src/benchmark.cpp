#include "sgpplace/benchmark.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "sgpplace/errors.hpp"

namespace sgpplace {

namespace {

constexpr std::uint64_t kGridStream = 3;
constexpr std::uint64_t kFieldStream = 4;
constexpr std::uint64_t kCandidateStream = 5;
constexpr std::uint64_t kKlStream = 6;

constexpr const char* kCsvHeader = "method,s,seed,elbo,rmse,mi,kl,wall_time,status";

std::string format_number(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_safe(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  }
  return s;
}

double parse_number(const std::string& cell, std::size_t row, std::size_t col) {
  if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    throw ParseError("non-numeric cell '" + cell + "'", row, col);
  }
  if (used != cell.size()) throw ParseError("non-numeric cell '" + cell + "'", row, col);
  return v;
}

}  // namespace

Eigen::MatrixXd stand_in_grid(const Environment& env, Eigen::Index size, std::uint64_t seed) {
  return sample_uniform(env, size, derive_seed(seed, kGridStream));
}

PlacementResult run_method(const Environment& env, const KernelSpec& spec, const MethodRequest& req) {
  const Eigen::Index s = req.num_sensors;
  const std::uint64_t seed = req.options.seed;
  switch (req.method) {
    case PlacementMethod::continuous_sgp:
      return continuous_sgp(env, spec, s, req.options);
    case PlacementMethod::greedy_sgp:
      return greedy_sgp(env, spec, s, req.options);
    case PlacementMethod::discrete_sgp:
      return discrete_sgp(env, spec, s, req.options);
    case PlacementMethod::greedy_mi: {
      env.validate();
      const EvaluationGrid grid =
          req.grid ? *req.grid : EvaluationGrid{stand_in_grid(env, kDefaultGridSize, seed), std::nullopt};
      PlacementResult r = greedy_mi(env.require_candidates(), grid, spec, s);
      r.seed = seed;
      return r;
    }
    case PlacementMethod::random:
      return random_placement(env, s, seed, req.discrete_random);
    case PlacementMethod::fov_sgp: {
      if (!req.fan) throw InvalidArgument("fov-sgp needs a fan geometry");
      const auto start = std::chrono::steady_clock::now();
      FovOptions fo;
      fo.learning_rate = req.options.learning_rate;
      fo.max_iters = req.options.max_iters;
      fo.seed = seed;
      const Eigen::Index n = req.options.num_samples > 0 ? req.options.num_samples : default_num_samples(s);
      const FovPlacement fit = fov_continuous_placement(spec, *req.fan, s, n, fo);
      PlacementResult r;
      r.method = PlacementMethod::fov_sgp;
      r.locations = sensor_positions(fit.angles, *req.fan);
      r.angles = fit.angles;
      r.elbo = fit.elbo;
      r.seed = seed;
      r.metrics["initial_elbo"] = fit.initial_elbo;
      r.metrics["iterations"] = fit.iterations;
      r.metrics["num_samples"] = static_cast<double>(n);
      r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      return r;
    }
  }
  throw InvalidArgument("unhandled placement method");
}

PlacementEvaluator::PlacementEvaluator(const KernelSpec& spec, EvaluationGrid truth, Eigen::Index kl_train,
                                       Eigen::Index kl_test, std::uint64_t seed)
    : spec_(spec), truth_(std::move(truth)) {
  if (!truth_.labels) throw InvalidArgument("evaluation needs a labeled truth grid");
  mi_ = std::make_shared<const MiEvaluator>(spec, truth_.points);
  if (kl_train > 0) {
    if (kl_test < 1 || kl_train + kl_test > truth_.size()) {
      throw InvalidArgument("KL subsets need 1 <= test and train + test <= grid size");
    }
    std::vector<int> idx(static_cast<std::size_t>(truth_.size()));
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, kKlStream));
    std::shuffle(idx.begin(), idx.end(), rng);
    kl_train_.inputs.resize(kl_train, truth_.points.cols());
    kl_train_.labels = Eigen::VectorXd(kl_train);
    kl_test_.resize(kl_test, truth_.points.cols());
    for (Eigen::Index i = 0; i < kl_train; ++i) {
      kl_train_.inputs.row(i) = truth_.points.row(idx[static_cast<std::size_t>(i)]);
      (*kl_train_.labels)(i) = (*truth_.labels)(idx[static_cast<std::size_t>(i)]);
    }
    for (Eigen::Index i = 0; i < kl_test; ++i) kl_test_.row(i) = truth_.points.row(idx[static_cast<std::size_t>(kl_train + i)]);
  }
}

double PlacementEvaluator::rmse(const Eigen::Ref<const Eigen::MatrixXd>& locations) const {
  return rmse_reconstruction(spec_, locations, truth_);
}

double PlacementEvaluator::mi(const Eigen::Ref<const Eigen::MatrixXd>& locations) const { return (*mi_)(locations); }

double PlacementEvaluator::kl(const Eigen::Ref<const Eigen::MatrixXd>& locations) const {
  if (kl_train_.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  return exact_kl(spec_, kl_train_, locations, kl_test_);
}

std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& config) {
  if (config.methods.empty() || config.num_sensors.empty() || config.seeds < 1) {
    throw InvalidArgument("benchmark needs at least one method, sensor count and seed");
  }
  if (config.jobs < 1) throw InvalidArgument("jobs must be >= 1");
  config.env.validate();
  config.spec.validate();
  config.spec.check_dimension(config.env.dim());

  Environment env = config.env;
  if (!env.candidates) {
    env.candidates = sample_uniform(env, config.num_candidates, derive_seed(config.seed, kCandidateStream));
  }
  const Eigen::MatrixXd grid = stand_in_grid(env, config.grid_size, config.seed);
  EvaluationGrid truth = synth_field(env, config.spec, grid, derive_seed(config.seed, kFieldStream));
  const PlacementEvaluator eval(config.spec, std::move(truth), config.kl_train, config.kl_test, config.seed);
  const EvaluationGrid mi_grid{grid, std::nullopt};

  const std::size_t num_methods = config.methods.size();
  const std::size_t num_cells = config.num_sensors.size() * static_cast<std::size_t>(config.seeds);
  std::vector<BenchmarkRow> rows(num_cells * num_methods);

  auto run_one = [&](std::size_t task) {
    const std::size_t cell = task / num_methods;
    const std::size_t k = cell / static_cast<std::size_t>(config.seeds);
    BenchmarkRow& row = rows[task];
    row.method = config.methods[task % num_methods];
    row.num_sensors = config.num_sensors[k];
    row.seed = config.seed + cell;
    row.elbo = row.rmse = row.mi = row.kl = row.wall_time = std::numeric_limits<double>::quiet_NaN();
    try {
      MethodRequest req;
      req.method = row.method;
      req.num_sensors = row.num_sensors;
      req.options = config.placement;
      req.options.seed = row.seed;
      req.grid = mi_grid;
      req.fan = config.fan;
      if (row.method == PlacementMethod::fov_sgp) throw InvalidArgument("fov-sgp is not part of region benchmarks");
      const PlacementResult r = run_method(env, config.spec, req);
      row.wall_time = r.wall_time;
      const Eigen::Index n = config.placement.num_samples > 0 ? config.placement.num_samples
                                                                : default_num_samples(row.num_sensors);
      row.elbo = std::isfinite(r.elbo) ? r.elbo : label_free_elbo(config.spec, placement_samples(env, n, row.seed), r.locations);
      row.rmse = eval.rmse(r.locations);
      row.mi = eval.mi(r.locations);
      row.kl = eval.kl(r.locations);
      row.status = "ok";
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
    }
  };

  if (config.jobs == 1) {
    for (std::size_t t = 0; t < rows.size(); ++t) run_one(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < config.jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t t = next++; t < rows.size(); t = next++) run_one(t);
      });
    }
    for (auto& w : workers) w.join();
  }
  return rows;
}

void write_benchmark_csv(const std::vector<BenchmarkRow>& rows, const std::filesystem::path& path, bool timing) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << to_string(r.method) << ',' << r.num_sensors << ',' << r.seed << ',' << format_number(r.elbo) << ','
        << format_number(r.rmse) << ',' << format_number(r.mi) << ',' << format_number(r.kl) << ','
        << (timing ? format_number(r.wall_time) : std::string("0")) << ',' << csv_safe(r.status) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<BenchmarkRow> read_benchmark_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw ParseError("unexpected benchmark header", 1);
  std::vector<BenchmarkRow> rows;
  for (std::size_t row = 2; std::getline(in, line); ++row) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 9) throw ParseError("expected 9 fields, found " + std::to_string(cells.size()), row);
    BenchmarkRow r;
    try {
      r.method = placement_method_from_string(cells[0]);
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), row, 1);
    }
    r.num_sensors = static_cast<Eigen::Index>(parse_number(cells[1], row, 2));
    r.seed = static_cast<std::uint64_t>(parse_number(cells[2], row, 3));
    r.elbo = parse_number(cells[3], row, 4);
    r.rmse = parse_number(cells[4], row, 5);
    r.mi = parse_number(cells[5], row, 6);
    r.kl = parse_number(cells[6], row, 7);
    r.wall_time = parse_number(cells[7], row, 8);
    r.status = cells[8];
    if (r.status != "ok" && r.status.rfind("error: ", 0) != 0) throw ParseError("bad status field", row, 9);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace sgpplace
