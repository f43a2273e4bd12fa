#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "sgpplace/io.hpp"

using namespace sgpplace;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path dir;
  Workspace() : dir(fs::temp_directory_path() / ("sgpplace_cli_" + std::to_string(::getpid()))) {
    fs::create_directories(dir);
    std::ofstream(dir / "env.json") << R"({"bounds":[[0,1],[0,1]],"obstacles":[[[0.2,0.2],[0.4,0.2],[0.4,0.4],[0.2,0.4]]],"candidates_path":"cands.csv"})";
    std::ofstream(dir / "kernel.json") << R"({"family":"rbf","variance":1.0,"lengthscale":[0.25],"noise_variance":0.02})";
    std::ofstream(dir / "fan.json") << R"({"center":[0,0],"radius":1,"fan_angle":0.8,"rays":3,"points_per_ray":4})";
    std::ofstream cands(dir / "cands.csv");
    cands << "x1,x2\n";
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        const double x = 0.05 + 0.125 * i, y = 0.05 + 0.125 * j;
        if (!(x >= 0.2 && x <= 0.4 && y >= 0.2 && y <= 0.4)) cands << x << ',' << y << '\n';
      }
  }
  ~Workspace() { fs::remove_all(dir); }

  std::string p(const std::string& name) const { return "\"" + (dir / name).string() + "\""; }

  int run(const std::string& args, const std::string& err_file = "") const {
    std::string cmd = std::string("\"") + SGPPLACE_CLI_PATH + "\" " + args + " > /dev/null";
    cmd += err_file.empty() ? " 2>/dev/null" : " 2> " + p(err_file);
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const std::string& name) const {
    std::ifstream in(dir / name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
};

}  // namespace

TEST_CASE("place writes a valid placement for every method") {
  Workspace w;
  for (const char* method : {"continuous-sgp", "greedy-sgp", "discrete-sgp", "greedy-mi", "random"}) {
    CAPTURE(method);
    const int code = w.run(std::string("place --method ") + method + " --num-sensors 5 --env " + w.p("env.json") +
                           " --kernel " + w.p("kernel.json") + " --seed 7 --grid-size 300 --output " + w.p("out.json") +
                           " --validate");
    REQUIRE(code == 0);
    const PlacementResult r = load_placement(w.dir / "out.json");
    CHECK(r.num_sensors() == 5);
    CHECK(r.seed == 7);
    CHECK(std::string(to_string(r.method)) == method);
    CHECK_NOTHROW(validate_placement(r, load_environment(w.dir / "env.json")));
  }
  REQUIRE(w.run("place --method fov-sgp --num-sensors 2 --fan " + w.p("fan.json") + " --kernel " + w.p("kernel.json") +
                " --max-iters 50 --output " + w.p("fov.json")) == 0);
  const PlacementResult fov = load_placement(w.dir / "fov.json");
  REQUIRE(fov.angles);
  CHECK(fov.angles->size() == 2);
}

TEST_CASE("exit codes") {
  Workspace w;
  CHECK(w.run("place --method frobnicate --num-sensors 5 --env " + w.p("env.json") + " --kernel " + w.p("kernel.json") +
                  " --output " + w.p("x.json"),
              "err.txt") == 2);
  const std::string err = w.read("err.txt");
  CHECK(err.find("continuous-sgp") != std::string::npos);
  CHECK(err.find("greedy-mi") != std::string::npos);

  CHECK(w.run("place --method random --num-sensors 5 --env " + w.p("nowhere.json") + " --kernel " + w.p("kernel.json") +
                  " --output " + w.p("x.json"),
              "err2.txt") == 1);
  CHECK(w.read("err2.txt").find("nowhere.json") != std::string::npos);

  CHECK(w.run("place --num-sensors 5") == 2);
  CHECK(w.run("place --method random --num-sensors 0 --env " + w.p("env.json") + " --kernel " + w.p("kernel.json") +
              " --output " + w.p("x.json")) == 2);
  CHECK(w.run("frobnicate") == 2);
  CHECK(w.run("--help") == 0);
}

TEST_CASE("synth, fit-kernel and evaluate") {
  Workspace w;
  REQUIRE(w.run("synth --env " + w.p("env.json") + " --kernel " + w.p("kernel.json") + " --nx 20 --ny 20 --seed 2" +
                " --output " + w.p("grid.csv") + " --train 150 --noise-sd 0.1 --train-output " + w.p("train.csv")) == 0);
  CHECK(load_dataset(w.dir / "grid.csv").size() == 400);
  REQUIRE(w.run("fit-kernel --train " + w.p("train.csv") + " --output " + w.p("fit.json") + " --validate") == 0);
  const KernelSpec fit = load_kernel(w.dir / "fit.json");
  CHECK(fit.lengthscale(0) > 0.1);
  CHECK(fit.lengthscale(0) < 0.5);

  REQUIRE(w.run("place --method greedy-sgp --num-sensors 6 --env " + w.p("env.json") + " --kernel " + w.p("fit.json") +
                " --output " + w.p("g.json")) == 0);
  REQUIRE(w.run("evaluate --placement " + w.p("g.json") + " --env " + w.p("env.json") + " --kernel " + w.p("fit.json") +
                " --truth " + w.p("grid.csv") + " --kl-train 100 --kl-test 50 --output " + w.p("m.json") + " --validate") == 0);
  const Json m = read_json(w.dir / "m.json");
  CHECK(m["rmse"].get<double>() >= 0.0);
  CHECK(m["mi"].get<double>() > 0.0);
  CHECK(m["kl"].get<double>() >= -1e-8);
}

TEST_CASE("benchmark reruns are byte-identical") {
  Workspace w;
  const std::string args = "benchmark --env " + w.p("env.json") + " --kernel " + w.p("kernel.json") +
                           " --methods greedy-sgp,random,continuous-sgp --num-sensors 2,4 --seeds 2 --grid-size 300 --kl-train 100 --kl-test 50"
                           " --no-timing --validate --output ";
  REQUIRE(w.run(args + w.p("a.csv")) == 0);
  REQUIRE(w.run(args + w.p("b.csv") + " --jobs 2") == 0);
  const std::string a = w.read("a.csv");
  CHECK(a == w.read("b.csv"));
  CHECK(std::count(a.begin(), a.end(), '\n') == 1 + 3 * 2 * 2);

  CHECK(w.run("benchmark --env " + w.p("env.json") + " --kernel " + w.p("kernel.json") +
              " --methods greedy-sgp,bogus --output " + w.p("c.csv")) == 2);
}
