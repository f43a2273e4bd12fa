#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sgpplace/benchmark.hpp"
#include "sgpplace/errors.hpp"
#include "sgpplace/gp.hpp"
#include "sgpplace/io.hpp"
#include "sgpplace/metrics.hpp"
#include "sgpplace/placement.hpp"

namespace fs = std::filesystem;
using namespace sgpplace;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("sgpplace");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::err);
  if (const char* env = std::getenv("SGPPLACE_LOG")) {
    const std::string level = env;
    if (level == "error") {
      spdlog::set_level(spdlog::level::err);
    } else if (level == "info") {
      spdlog::set_level(spdlog::level::info);
    } else if (level == "debug") {
      spdlog::set_level(spdlog::level::debug);
    } else {
      spdlog::warn("ignoring SGPPLACE_LOG={} (expected error, info or debug)", level);
    }
  }
}

struct OptimizerFlags {
  double learning_rate = 1e-2;
  int max_iters = 3000;
  Eigen::Index num_samples = 0;
  std::string assignment_cost = "distance";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--learning-rate", learning_rate, "Adam step size")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--max-iters", max_iters, "Gradient iterations")->capture_default_str()->check(CLI::NonNegativeNumber);
    cmd->add_option("--num-samples", num_samples, "Unlabeled samples n (0: max(1000, 50 s))")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--assignment-cost", assignment_cost, "discrete-sgp mapping cost")
        ->capture_default_str()
        ->check(CLI::IsMember({"distance", "covariance"}));
  }

  PlacementOptions options(std::uint64_t seed) const {
    PlacementOptions o;
    o.learning_rate = learning_rate;
    o.max_iters = max_iters;
    o.num_samples = num_samples;
    o.seed = seed;
    o.assignment_cost = assignment_cost == "covariance" ? AssignmentCost::covariance : AssignmentCost::distance;
    return o;
  }
};

// ---- fit-kernel

struct FitArgs {
  std::string train, init, output, family = "rbf";
  bool ard = false;
  double learning_rate = 1e-2;
  int max_iters = 3000;
  bool validate = false;
};

KernelSpec default_init(const Dataset& data, KernelFamily family, bool ard) {
  const Eigen::VectorXd& y = *data.labels;
  const double var = y.size() > 1 ? (y.array() - y.mean()).square().sum() / static_cast<double>(y.size() - 1) : 1.0;
  const Eigen::VectorXd extent = data.inputs.colwise().maxCoeff() - data.inputs.colwise().minCoeff();
  KernelSpec spec;
  spec.family = family;
  spec.variance = var > 0.0 ? var : 1.0;
  spec.noise_variance = 0.1 * spec.variance;
  const double ls = extent.mean() > 0.0 ? 0.25 * extent.mean() : 1.0;
  spec.lengthscale = Eigen::VectorXd::Constant(ard ? data.dim() : 1, ls);
  return spec;
}

void run_fit(const FitArgs& a) {
  const Dataset data = load_dataset(a.train);
  if (!data.labeled()) throw InvalidArgument(a.train + " has no y column; fit-kernel needs labels");
  const KernelSpec init = a.init.empty() ? default_init(data, kernel_family_from_string(a.family), a.ard) : load_kernel(a.init);
  FitOptions opts;
  opts.learning_rate = a.learning_rate;
  opts.max_iters = a.max_iters;
  const FitResult fit = fit_kernel_hyperparams(data, init, opts);
  for (const auto& w : fit.warnings) spdlog::warn("{}", w);
  write_json(kernel_to_json(fit.spec), a.output);
  if (a.validate) load_kernel(a.output);
  std::cout << "fit-kernel: log marginal " << fit.initial_log_marginal << " -> " << fit.log_marginal << " after "
            << fit.iterations << " iterations; wrote " << a.output << '\n';
}

// ---- place

struct PlaceArgs {
  std::string method, env, kernel, fan, output;
  Eigen::Index num_sensors = 1;
  std::uint64_t seed = 0;
  Eigen::Index grid_size = kDefaultGridSize;
  bool discrete = false;
  bool validate = false;
  OptimizerFlags opt;
};

void run_place(const PlaceArgs& a) {
  MethodRequest req;
  req.method = placement_method_from_string(a.method);
  req.num_sensors = a.num_sensors;
  req.options = a.opt.options(a.seed);
  req.discrete_random = a.discrete;
  const KernelSpec spec = load_kernel(a.kernel);
  Environment env;
  if (req.method == PlacementMethod::fov_sgp) {
    if (a.fan.empty()) throw InvalidArgument("--fan is required for fov-sgp");
    req.fan = fan_from_json(read_json(a.fan));
    const Eigen::Vector2d lo = req.fan->center.array() - req.fan->radius;
    const Eigen::Vector2d hi = req.fan->center.array() + req.fan->radius;
    env = Environment::box(lo, hi);
  } else {
    if (a.env.empty()) throw InvalidArgument("--env is required for " + a.method);
    env = load_environment(a.env);
  }
  if (req.method == PlacementMethod::greedy_mi) {
    req.grid = EvaluationGrid{stand_in_grid(env, a.grid_size, a.seed), std::nullopt};
  }
  spdlog::info("running {} with s = {} and seed {}", a.method, a.num_sensors, a.seed);
  const PlacementResult r = run_method(env, spec, req);
  write_json(placement_to_json(r), a.output);
  if (a.validate) {
    const PlacementResult back = load_placement(a.output);
    if (back.method != PlacementMethod::fov_sgp) validate_placement(back, env);
    spdlog::info("validated {}", a.output);
  }
  std::cout << a.method << ": " << r.num_sensors() << " sensors, bound " << r.elbo << ", " << r.wall_time
            << " s; wrote " << a.output << '\n';
}

// ---- evaluate

struct EvaluateArgs {
  std::string placement, env, kernel, truth, output;
  std::uint64_t seed = 0;
  Eigen::Index grid_size = kDefaultGridSize;
  Eigen::Index num_samples = 0;
  Eigen::Index kl_train = 300, kl_test = 200;
  bool validate = false;
};

void run_evaluate(const EvaluateArgs& a) {
  const PlacementResult r = load_placement(a.placement);
  const KernelSpec spec = load_kernel(a.kernel);
  const Environment env = load_environment(a.env);
  EvaluationGrid truth;
  if (!a.truth.empty()) {
    const Dataset grid = load_dataset(a.truth);
    if (!grid.labeled()) throw InvalidArgument(a.truth + " has no y column; the truth grid needs labels");
    truth = EvaluationGrid{grid.inputs, grid.labels};
  } else {
    truth = synth_field(env, spec, stand_in_grid(env, a.grid_size, a.seed), derive_seed(a.seed, 4));
  }
  const Eigen::Index kl_train = std::min(a.kl_train, truth.size() / 2);
  const PlacementEvaluator eval(spec, truth, kl_train, std::min(a.kl_test, truth.size() - kl_train), a.seed);
  const Eigen::Index n = a.num_samples > 0 ? a.num_samples : default_num_samples(r.num_sensors());
  Json out{{"placement", a.placement}, {"method", std::string(to_string(r.method))}, {"num_sensors", r.num_sensors()}};
  const double elbo = label_free_elbo(spec, placement_samples(env, n, r.seed), r.locations);
  const double kl = eval.kl(r.locations);
  out["elbo"] = elbo;
  out["rmse"] = eval.rmse(r.locations);
  out["mi"] = eval.mi(r.locations);
  out["kl"] = std::isfinite(kl) ? Json(kl) : Json(nullptr);
  write_json(out, a.output);
  if (a.validate) {
    const Json back = read_json(a.output);
    for (const char* key : {"elbo", "rmse", "mi", "kl", "num_sensors"}) {
      if (!back.contains(key)) throw ParseError(a.output + " is missing \"" + key + "\"");
    }
  }
  std::cout << "evaluate: bound " << out["elbo"] << ", rmse " << out["rmse"] << ", mi " << out["mi"] << ", kl "
            << out["kl"] << "; wrote " << a.output << '\n';
}

// ---- benchmark

struct BenchmarkArgs {
  std::string env, kernel, fan, output;
  std::vector<std::string> methods{"continuous-sgp", "greedy-sgp", "discrete-sgp", "greedy-mi", "random"};
  std::vector<Eigen::Index> num_sensors{5, 10};
  int seeds = 3;
  std::uint64_t seed = 0;
  Eigen::Index grid_size = kDefaultGridSize;
  Eigen::Index num_candidates = 150;
  Eigen::Index kl_train = 300, kl_test = 200;
  int jobs = 1;
  bool no_timing = false;
  bool validate = false;
  OptimizerFlags opt;
};

void run_bench(const BenchmarkArgs& a) {
  BenchmarkConfig cfg;
  cfg.methods.clear();
  for (const auto& m : a.methods) cfg.methods.push_back(placement_method_from_string(m));
  cfg.num_sensors = a.num_sensors;
  cfg.seeds = a.seeds;
  cfg.seed = a.seed;
  cfg.grid_size = a.grid_size;
  cfg.num_candidates = a.num_candidates;
  cfg.kl_train = a.kl_train;
  cfg.kl_test = a.kl_test;
  cfg.jobs = a.jobs;
  cfg.placement = a.opt.options(a.seed);
  cfg.spec = load_kernel(a.kernel);
  cfg.env = load_environment(a.env);
  if (!a.fan.empty()) cfg.fan = fan_from_json(read_json(a.fan));
  spdlog::info("benchmark: {} methods x {} sensor counts x {} seeds", cfg.methods.size(), cfg.num_sensors.size(),
               cfg.seeds);
  const std::vector<BenchmarkRow> rows = run_benchmark(cfg);
  write_benchmark_csv(rows, a.output, !a.no_timing);
  std::size_t failed = 0;
  for (const auto& r : rows) {
    if (r.status != "ok") {
      ++failed;
      spdlog::warn("{} s={} seed={}: {}", to_string(r.method), r.num_sensors, r.seed, r.status);
    }
  }
  if (a.validate) {
    const std::size_t expected = cfg.methods.size() * cfg.num_sensors.size() * static_cast<std::size_t>(cfg.seeds);
    if (read_benchmark_csv(a.output).size() != expected) throw ParseError(a.output + " has the wrong number of rows");
  }
  std::cout << "benchmark: " << rows.size() << " rows (" << failed << " failed); wrote " << a.output << '\n';
}

// ---- synth

struct SynthArgs {
  std::string env, kernel, output, train_output;
  int nx = 50, ny = 50;
  std::uint64_t seed = 0;
  Eigen::Index train = 0;
  double noise_sd = 0.0;
};

void run_synth(const SynthArgs& a) {
  const Environment env = load_environment(a.env);
  const KernelSpec spec = load_kernel(a.kernel);
  const GridField field = synth_grid_field(env, spec, a.nx, a.ny, a.seed);
  const EvaluationGrid grid = field.to_grid();
  save_dataset(Dataset{grid.points, grid.labels}, a.output);
  std::cout << "synth: " << grid.size() << " grid values; wrote " << a.output << '\n';
  if (a.train > 0) {
    if (a.train_output.empty()) throw InvalidArgument("--train needs --train-output");
    Dataset train{sample_uniform(env, a.train, derive_seed(a.seed, 1)), Eigen::VectorXd(a.train)};
    std::mt19937_64 rng(derive_seed(a.seed, 2));
    std::normal_distribution<double> noise(0.0, a.noise_sd);
    for (Eigen::Index i = 0; i < a.train; ++i) {
      (*train.labels)(i) = field.at(train.inputs.row(i).transpose()) + (a.noise_sd > 0.0 ? noise(rng) : 0.0);
    }
    save_dataset(train, a.train_output);
    std::cout << "synth: " << a.train << " noisy samples; wrote " << a.train_output << '\n';
  }
}

int guarded(const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Sensor placement with sparse Gaussian processes"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a TOML/INI file");

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit-kernel", "Fit kernel hyperparameters by maximum marginal likelihood");
  fit_cmd->add_option("--train", fit.train, "Labeled CSV (x1..xd,y)")->required();
  fit_cmd->add_option("--init", fit.init, "Initial kernel JSON");
  fit_cmd->add_option("--family", fit.family, "Kernel family when --init is absent")
      ->capture_default_str()
      ->check(CLI::IsMember({"rbf", "matern32"}));
  fit_cmd->add_flag("--ard", fit.ard, "One lengthscale per input dimension");
  fit_cmd->add_option("--learning-rate", fit.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
  fit_cmd->add_option("--max-iters", fit.max_iters)->capture_default_str()->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--output", fit.output, "Kernel JSON to write")->required();
  fit_cmd->add_flag("--validate", fit.validate, "Re-read and check the output");

  PlaceArgs place;
  auto* place_cmd = app.add_subcommand("place", "Compute a sensor placement");
  place_cmd->add_option("--method", place.method, "One of: continuous-sgp, greedy-sgp, discrete-sgp, greedy-mi, random, fov-sgp")
      ->required();
  place_cmd->add_option("--num-sensors", place.num_sensors, "Number of sensors s")->required()->check(CLI::PositiveNumber);
  place_cmd->add_option("--env", place.env, "Environment JSON");
  place_cmd->add_option("--kernel", place.kernel, "Kernel JSON")->required();
  place_cmd->add_option("--fan", place.fan, "Fan geometry JSON (fov-sgp)");
  place_cmd->add_option("--seed", place.seed)->capture_default_str();
  place_cmd->add_option("--grid-size", place.grid_size, "Stand-in grid size for greedy-mi")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  place_cmd->add_flag("--discrete", place.discrete, "random: draw from the candidates");
  place_cmd->add_option("--output", place.output, "Placement JSON to write")->required();
  place_cmd->add_flag("--validate", place.validate, "Re-read and check the output");
  place.opt.add_to(place_cmd);

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a placement file");
  eval_cmd->add_option("--placement", ev.placement, "Placement JSON")->required();
  eval_cmd->add_option("--env", ev.env, "Environment JSON")->required();
  eval_cmd->add_option("--kernel", ev.kernel, "Kernel JSON")->required();
  eval_cmd->add_option("--truth", ev.truth, "Labeled grid CSV; a synthetic field is drawn when absent");
  eval_cmd->add_option("--seed", ev.seed, "Seed for the synthetic field and KL subsets")->capture_default_str();
  eval_cmd->add_option("--grid-size", ev.grid_size)->capture_default_str()->check(CLI::PositiveNumber);
  eval_cmd->add_option("--num-samples", ev.num_samples)->capture_default_str()->check(CLI::NonNegativeNumber);
  eval_cmd->add_option("--kl-train", ev.kl_train, "0 disables KL")->capture_default_str()->check(CLI::NonNegativeNumber);
  eval_cmd->add_option("--kl-test", ev.kl_test)->capture_default_str()->check(CLI::PositiveNumber);
  eval_cmd->add_option("--output", ev.output, "Metrics JSON to write")->required();
  eval_cmd->add_flag("--validate", ev.validate, "Re-read and check the output");

  BenchmarkArgs bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "Sweep methods x sensor counts x seeds into a CSV");
  bench_cmd->add_option("--env", bench.env, "Environment JSON")->required();
  bench_cmd->add_option("--kernel", bench.kernel, "Kernel JSON")->required();
  bench_cmd->add_option("--fan", bench.fan, "Fan geometry JSON");
  bench_cmd->add_option("--methods", bench.methods)->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--num-sensors", bench.num_sensors)->delimiter(',')->capture_default_str()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seeds", bench.seeds, "Replicates per sensor count")->capture_default_str()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bench.seed, "Base seed")->capture_default_str();
  bench_cmd->add_option("--grid-size", bench.grid_size)->capture_default_str()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--num-candidates", bench.num_candidates, "Drawn when the environment has none")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--kl-train", bench.kl_train, "0 disables KL")->capture_default_str()->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--kl-test", bench.kl_test)->capture_default_str()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--jobs", bench.jobs, "Parallel cells")->capture_default_str()->check(CLI::PositiveNumber);
  bench_cmd->add_flag("--no-timing", bench.no_timing, "Write wall_time as 0 for byte-identical reruns");
  bench_cmd->add_option("--output", bench.output, "Results CSV to write")->required();
  bench_cmd->add_flag("--validate", bench.validate, "Re-read and check the output");
  bench.opt.add_to(bench_cmd);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Draw a synthetic GP field on a lattice");
  synth_cmd->add_option("--env", synth.env, "Environment JSON (2D)")->required();
  synth_cmd->add_option("--kernel", synth.kernel, "Kernel JSON")->required();
  synth_cmd->add_option("--nx", synth.nx)->capture_default_str()->check(CLI::Range(2, 70));
  synth_cmd->add_option("--ny", synth.ny)->capture_default_str()->check(CLI::Range(2, 70));
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
  synth_cmd->add_option("--output", synth.output, "Grid CSV (x1,x2,y) to write")->required();
  synth_cmd->add_option("--train", synth.train, "Also draw this many noisy samples")->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--noise-sd", synth.noise_sd)->capture_default_str()->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--train-output", synth.train_output, "CSV for the noisy samples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*fit_cmd) return guarded([&] { run_fit(fit); });
  if (*place_cmd) return guarded([&] { run_place(place); });
  if (*eval_cmd) return guarded([&] { run_evaluate(ev); });
  if (*bench_cmd) return guarded([&] { run_bench(bench); });
  return guarded([&] { run_synth(synth); });
}
