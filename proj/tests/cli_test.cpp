#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "crossing/commands.hpp"
#include "crossing/config.hpp"
#include "crossing/mixture_io.hpp"

using namespace crossing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "crossing");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("crossing_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

}  // namespace

TEST_CASE("config defaults and round trip") {
  const RunConfig defaults;
  CHECK(defaults.mixture.k_max == 15);
  CHECK(defaults.sim.experiments == 50);
  CHECK(defaults.sim.sim.R0 == 30.0);
  CHECK(parse_run_config(nlohmann::json::object()) == defaults);

  const std::string text = R"({"seed": 9, "mixture": {"k_max": 4, "truncation_mode": "none"},
    "sim": {"arrival_mode": "poisson", "lambda": 0.1}, "eval": {"mu_0": 0.9, "kappa_0": 0.02},
    "agents": {"soft_yield": {"p1": 0.02}, "walk_speed_bounds": {"lower": 0.5, "upper": 2.5}}})";
  const RunConfig a = parse_run_config_text(text);
  CHECK(a.seed == 9);
  CHECK(a.mixture.truncation_mode == TruncationMode::kNone);
  CHECK(a.sim.sim.arrival_mode == ArrivalMode::kPoisson);
  CHECK(*a.eval.mu_0 == 0.9);
  CHECK(a.agents.soft_yield.p1 == 0.02);
  const RunConfig b = parse_run_config_text(run_config_to_json(a).dump());
  CHECK(a == b);
  CHECK(run_config_to_json(b).dump() == run_config_to_json(a).dump());
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_run_config_text(R"({"sed": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text(R"({"sim": {"R_0": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text(R"({"sim": {"dt": 0.5}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text(R"({"mixture": {"k_min": 3, "k_max": 2}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text(R"({"mixture": {"truncation_mode": "half"}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text(R"({"eval": {"mu_0": 1.0}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text(R"({"seed": "one"})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("{"), ConfigError);
}

TEST_CASE("usage errors exit with 1") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"fit", "--bogus"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
  const auto dir = fresh_dir("usage");
  const auto cfg = dir / "bad.json";
  std::ofstream(cfg) << R"({"unknown": 1})";
  const auto r = cli({"gen-data", "--config", cfg.string(), "--out", dir.string()});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("unknown") != std::string::npos);
}

TEST_CASE("missing output directory is a runtime error") {
  const auto r = cli({"gen-data", "--out", (fs::temp_directory_path() / "crossing_no_such_dir" / "x").string()});
  CHECK(r.code == kExitRuntime);
}

TEST_CASE("full pipeline") {
  const auto dir = fresh_dir("pipeline");
  const auto cfg = dir / "run.json";
  std::ofstream(cfg) << R"({"seed": 3, "ingest": {"samples": 600},
    "mixture": {"k_min": 1, "k_max": 3, "restarts": 1, "max_iterations": 60, "moment_draws": 4000},
    "sim": {"experiments": 6}})";
  const std::string c = cfg.string();
  const std::string out = dir.string();

  auto r = cli({"gen-data", "--config", c, "--out", out});
  REQUIRE(r.code == kExitOk);
  CHECK(fs::exists(dir / "observations.csv"));
  CHECK(fs::exists(dir / "observations.generator.json"));
  const std::string first = slurp(dir / "observations.csv");
  REQUIRE(cli({"gen-data", "--config", c, "--out", out}).code == kExitOk);
  CHECK(slurp(dir / "observations.csv") == first);

  r = cli({"fit", "--config", c, "--out", out});
  INFO(r.err);
  REQUIRE(r.code == kExitOk);
  const auto model = load_mixture(dir / "model.json");
  CHECK(model.dim() == 4);
  CHECK(model.truncation().has_value());
  const std::string curve = slurp(dir / "bic_curve.csv");
  CHECK(curve.rfind("K,bic,change_rate\n1,", 0) == 0);

  r = cli({"condition", "--config", c, "--out", out, "--given", "inv_R=0.05", "--given", "v=5", "--target", "v_p",
           "--points", "101"});
  REQUIRE(r.code == kExitOk);
  std::istringstream grid(slurp(dir / "condition.csv"));
  std::string line;
  std::getline(grid, line);
  CHECK(line == "value,pdf");
  std::vector<double> xs, ps;
  while (std::getline(grid, line)) {
    const auto comma = line.find(',');
    xs.push_back(std::stod(line.substr(0, comma)));
    ps.push_back(std::stod(line.substr(comma + 1)));
  }
  REQUIRE(xs.size() == 101);
  double area = 0.0;
  for (size_t i = 1; i < xs.size(); ++i) area += 0.5 * (ps[i] + ps[i - 1]) * (xs[i] - xs[i - 1]);
  CHECK(area == doctest::Approx(1.0).epsilon(0.01));
  CHECK(cli({"condition", "--config", c, "--out", out, "--given", "speed=1"}).code == kExitUsage);
  CHECK(cli({"condition", "--config", c, "--out", out, "--given", "v=5"}).code == kExitUsage);

  r = cli({"simulate", "--config", c, "--out", out, "--strategy", "soft-yield", "--index", "2"});
  REQUIRE(r.code == kExitOk);
  const auto episode = nlohmann::json::parse(slurp(dir / "episode.json"));
  CHECK(episode["index"] == 2);
  CHECK(slurp(dir / "trajectory.csv").rfind("t,R,v,pedestrian_id,L,v_p\n", 0) == 0);

  r = cli({"evaluate", "--config", c, "--out", out});
  REQUIRE(r.code == kExitOk);
  const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(report["experiments"] == 6);
  CHECK(fs::exists(dir / "tau_series.csv"));
  // The simulated episode is experiment 2 of the evaluation.
  if (!report["tau"].empty()) CHECK(report["av_strategy"] == "soft-yield");

  std::ofstream(dir / "gated.json") << R"({"seed": 3, "sim": {"experiments": 6},
    "eval": {"mu_0": 0.0, "kappa_0": 0.0}})";
  r = cli({"evaluate", "--config", (dir / "gated.json").string(), "--out", out});
  CHECK(r.code == kExitGateFail);
  CHECK(r.out.find("FAIL") != std::string::npos);

  CHECK(cli({"evaluate", "--config", c, "--out", out, "--av", "reckless"}).code == kExitUsage);
}

TEST_CASE("evaluate is independent of the worker count") {
  const auto dir = fresh_dir("parallel");
  const auto gen = dir / "model.json";
  REQUIRE(cli({"gen-data", "--out", dir.string(), "--seed", "4"}).code == kExitOk);
  fs::copy_file(dir / "observations.generator.json", gen);
  std::ofstream(dir / "run.json") << R"({"sim": {"experiments": 10, "pedestrian_count": 2}})";
  const std::string c = (dir / "run.json").string();
  REQUIRE(cli({"evaluate", "--config", c, "--out", dir.string(), "--parallel", "1"}).code == kExitOk);
  const std::string one = slurp(dir / "report.json");
  REQUIRE(cli({"evaluate", "--config", c, "--out", dir.string(), "--parallel", "8"}).code == kExitOk);
  CHECK(slurp(dir / "report.json") == one);
}
