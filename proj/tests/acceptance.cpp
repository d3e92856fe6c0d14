// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Stochastic criteria use seeds fixed before the first run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "crossing/commands.hpp"
#include "crossing/eval.hpp"
#include "crossing/ingest.hpp"
#include "crossing/mixture_io.hpp"
#include "crossing/seeds.hpp"
#include "crossing/sim.hpp"
#include "test_support.hpp"

using namespace crossing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string num(double x, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << x;
  return s.str();
}

class NeverBrake final : public DrivingStrategy {
 public:
  StrategyDecision step(const StrategyInput&) override { return {0.0, false}; }
  std::string_view name() const override { return "never-brake"; }
};

// 1 -------------------------------------------------------------------------
Outcome metric_exactness() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> th(5.0, 15.0), ratio(0.4, 1.6), u(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 200);
  double worst = 0.0;
  for (int list = 0; list < 20; ++list) {
    std::vector<PairedTimes> pairs(len(rng));
    for (auto& p : pairs) {
      p.t_h = th(rng);
      p.t_a = p.t_h * ratio(rng);
      p.av_crashed = u(rng) < 0.05;
    }
    const auto report = compute_report(pairs);
    // Reference: two-pass sums in long double.
    long double s = 0, crashes = 0;
    std::vector<long double> tau;
    for (const auto& p : pairs) {
      crashes += p.av_crashed;
      if (p.av_crashed) continue;
      tau.push_back(static_cast<long double>(p.t_a) / p.t_h);
      s += tau.back();
    }
    const long double mu = s / tau.size();
    long double ss = 0;
    for (auto t : tau) ss += (t - mu) * (t - mu);
    const long double sigma = std::sqrt(ss / tau.size());
    const long double kappa = crashes / pairs.size();
    worst = std::max({worst, static_cast<double>(std::fabs(report.mu - mu)),
                      static_cast<double>(std::fabs(report.cv - sigma / mu)),
                      static_cast<double>(std::fabs(report.kappa - kappa))});
  }
  return {worst < 1e-12, "max abs error " + num(worst, 3)};
}

// 2 -------------------------------------------------------------------------
Outcome conditional_correctness() {
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 1 + trial % 3;
    const auto g = testing_support::random_mixture(2, k, rng);
    const int observed_dim = trial % 2;
    const int free_dim = 1 - observed_dim;
    const double yo = sample(g, 1, rng())(0, observed_dim);
    const int observed[] = {observed_dim};
    Eigen::VectorXd value(1);
    value[0] = yo;
    const auto c = condition(g, observed, value);

    // Joint slice on a fine grid, renormalized by Simpson's rule.
    double lo = 1e300, hi = -1e300;
    for (int j = 0; j < k; ++j) {
      const double sd = std::sqrt(g.component(j).covariance(free_dim, free_dim));
      lo = std::min(lo, g.component(j).mean[free_dim] - 14.0 * sd);
      hi = std::max(hi, g.component(j).mean[free_dim] + 14.0 * sd);
    }
    const int n = 40000;
    const double h = (hi - lo) / n;
    std::vector<double> slice(n + 1);
    Eigen::VectorXd y(2);
    y[observed_dim] = yo;
    for (int i = 0; i <= n; ++i) {
      y[free_dim] = lo + i * h;
      slice[i] = g.density(y);
    }
    double z = slice[0] + slice[n];
    for (int i = 1; i < n; ++i) z += (i % 2 ? 4.0 : 2.0) * slice[i];
    z *= h / 3.0;
    Eigen::VectorXd x(1);
    for (int i = 0; i <= n; i += 7) {
      x[0] = lo + i * h;
      worst = std::max(worst, std::abs(c.density(x) - slice[i] / z));
    }
  }
  return {worst < 1e-6, "max abs error " + num(worst, 3)};
}

// 3 -------------------------------------------------------------------------
Outcome em_recovery() {
  const auto gen = testing_support::three_blob_generator();
  const Eigen::MatrixXd x = sample(gen, 5000, 1);
  FitConfig cfg;
  cfg.components = 3;
  cfg.restarts = 5;
  cfg.seed = 1;
  const auto fit = em_fit(x, cfg);
  const double ll_gen = log_likelihood(gen, x);
  std::array<int, 3> perm = {0, 1, 2};
  double best = 1e300;
  do {
    double worst = 0.0;
    for (int j = 0; j < 3; ++j) {
      worst = std::max(worst, (fit.model.component(perm[j]).mean - gen.component(j).mean).norm());
    }
    best = std::min(best, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));
  const bool pass = fit.diagnostics.log_likelihood >= ll_gen && best < 0.1;
  return {pass, "loglik fit " + num(fit.diagnostics.log_likelihood, 8) + " vs generator " + num(ll_gen, 8) +
                    ", max mean error " + num(best, 3)};
}

// 4 -------------------------------------------------------------------------
Outcome truncated_superiority() {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd x(5000, 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = std::abs(z(rng));
  FitConfig cfg;
  cfg.components = 1;
  cfg.seed = 1;
  const double naive = em_fit(x, cfg).model.component(0).mean[0];
  cfg.truncation_mode = TruncationMode::kTruncated;
  const double truncated = em_fit(x, cfg).model.component(0).mean[0];
  return {std::abs(truncated) < 0.05 && naive > 0.7,
          "truncated mean " + num(truncated, 4) + ", naive mean " + num(naive, 4)};
}

// 5 -------------------------------------------------------------------------
Outcome moment_oracle() {
  const GaussianComponent unit{testing_support::vec({0.0}), Eigen::MatrixXd::Identity(1, 1)};
  const auto box = TruncationBox::positive_orthant(1);
  const auto exact = truncated_moments(unit, box);
  const auto mc = truncated_moments(unit, box, {.method = MomentMethod::kMonteCarlo, .draws = 10000000, .seed = 1});
  const double mean = 0.7978845608028654, var = 0.3633802276324187;
  const double e_exact = std::max({std::abs(exact.mass - 0.5), std::abs(exact.mean[0] - mean),
                                   std::abs(exact.covariance(0, 0) - var)});
  const double e_mc = std::max({std::abs(mc.mass - 0.5), std::abs(mc.mean[0] - mean),
                                std::abs(mc.covariance(0, 0) - var)});
  return {e_exact < 1e-9 && e_mc < 1e-3,
          "closed-form error " + num(e_exact, 3) + ", Monte Carlo error " + num(e_mc, 3)};
}

// 6 -------------------------------------------------------------------------
Outcome soft_yield_arithmetic() {
  const auto plan = soft_yield_decide({}, 5.0, 30.0, 1.5, 9.0);
  return {std::abs(plan.acceleration + 0.37895) <= 1e-6 && std::abs(plan.t1) <= 1e-9,
          "a = " + num(plan.acceleration, 10) + ", T1 = " + num(plan.t1, 3)};
}

// 7 -------------------------------------------------------------------------
Outcome bic_shape() {
  const auto gen = testing_support::three_blob_generator();
  const int ks[] = {1, 2, 3, 4, 5, 6, 7, 8};
  int hits = 0;
  std::string picks;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd x = sample(gen, 2000, derive_seed(1, "bic-trial", trial));
    FitConfig cfg;
    cfg.restarts = 3;
    cfg.seed = derive_seed(1, "bic-fit", trial);
    const auto sel = select_components(x, ks, cfg);
    hits += sel.selected >= 3 && sel.selected <= 5;
    picks += (picks.empty() ? "" : ",") + std::to_string(sel.selected);
  }
  return {hits >= 9, std::to_string(hits) + "/10 trials in {3,4,5} (selected " + picks + ")"};
}

// 8 -------------------------------------------------------------------------
Outcome poisson_arrivals() {
  const double horizon = 120.0;
  int empty = 0;
  const int seeds = 10000;
  for (int s = 0; s < seeds; ++s) empty += sample_arrivals(1.0 / horizon, horizon, derive_seed(1, "poisson", s)).size() == 0;
  const double p = static_cast<double>(empty) / seeds;
  return {std::abs(p - 0.3679) <= 0.01, "P{N=0} = " + num(p, 4)};
}

// 9 -------------------------------------------------------------------------
Outcome protocol_soundness() {
  auto model = std::make_shared<const GaussianMixture>(default_interaction_generator());
  SimConfig cfg;
  cfg.seed = 1;
  HumanDriverParams hp;
  hp.model = model;
  const StrategyFactory human = [hp] { return std::make_unique<HumanDriverStrategy>(hp); };
  const auto outcomes = run_paired_experiments(cfg, human, human, WalkSpeedModel(*model), 50, 1);
  bool same_pedestrians = true;
  std::vector<PairedTimes> pairs;
  for (const auto& o : outcomes) {
    same_pedestrians = same_pedestrians && o.av.pedestrians == o.human.pedestrians && !o.av.pedestrians.empty();
    pairs.push_back(paired_times(o));
  }
  const auto r = compute_report(pairs);
  return {r.mu == 1.0 && r.cv == 0.0 && same_pedestrians && !r.tau.empty(),
          "mu = " + num(r.mu, 17) + ", cv = " + num(r.cv) + ", pairs kept " + std::to_string(r.tau.size()) +
              ", identical pedestrians " + (same_pedestrians ? "yes" : "no")};
}

// 10 ------------------------------------------------------------------------
Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "crossing_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  save_mixture(default_interaction_generator(), dir / "model.json");
  auto run = [&](const char* workers) {
    const std::string out = dir.string();
    const char* argv[] = {"crossing", "evaluate", "--seed", "1", "--out", out.c_str(), "--parallel", workers};
    std::ostringstream sink;
    const int code = run_cli(8, argv, sink, sink);
    return std::make_pair(code, read_text_file(dir / "report.json") + read_text_file(dir / "tau_series.csv"));
  };
  const auto one = run("1");
  const auto eight = run("8");
  const bool pass = one.first == kExitOk && eight.first == kExitOk && one.second == eight.second;
  return {pass, std::string("report files ") + (one.second == eight.second ? "byte-identical" : "differ") +
                    " (" + std::to_string(one.second.size()) + " bytes)"};
}

// 11 ------------------------------------------------------------------------
Outcome free_flow() {
  const SimConfig cfg;
  NeverBrake driver;
  const auto r = run_episode(cfg, driver, {}, [](int, double, double) { return 1.0; });
  const double expected = (cfg.R0 + 2.0 * cfg.vehicle_half_length) / cfg.v0;
  return {r.completed() && std::abs(r.passing_time - expected) <= cfg.dt,
          "passing time " + num(r.passing_time, 10) + " s, expected " + num(expected) + " s"};
}

// 12 ------------------------------------------------------------------------
Outcome crash_sensitivity() {
  const SimConfig cfg;  // front at the line at 6 s, rear clear at 7 s
  NeverBrake driver;
  // Arrives at 3 s walking 1.5 m/s: on the path line (4.5 m) at exactly 6 s.
  const ArrivalSchedule conflict{{3.0}, {Side::kNear}};
  const auto hit = run_episode(cfg, driver, conflict, [](int, double, double) { return 1.5; });
  // Arrives at 0 s walking 0.45 m/s: 3.15 m in when the rear clears, 0.35 m short of the strip.
  const ArrivalSchedule near{{0.0}, {Side::kNear}};
  const auto miss = run_episode(cfg, driver, near, [](int, double, double) { return 0.45; });
  return {hit.crashed && !miss.crashed, std::string("collision crashed=") + (hit.crashed ? "true" : "false") +
                                            ", near miss crashed=" + (miss.crashed ? "true" : "false")};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double limit_s;  // 0: no runtime bound
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"metric exactness", 1.0, metric_exactness},
      {"conditional correctness", 30.0, conditional_correctness},
      {"EM recovery", 60.0, em_recovery},
      {"truncated EM superiority", 30.0, truncated_superiority},
      {"truncated-moment oracle", 0.0, moment_oracle},
      {"Soft-Yield arithmetic", 0.0, soft_yield_arithmetic},
      {"BIC curve shape", 300.0, bic_shape},
      {"Poisson arrivals", 0.0, poisson_arrivals},
      {"protocol soundness", 0.0, protocol_soundness},
      {"determinism", 0.0, determinism},
      {"free-flow kinematics", 0.0, free_flow},
      {"crash sensitivity", 0.0, crash_sensitivity},
  };
  int passed = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome{false, ""};
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = num(seconds, 3) + " s";
    if (c.limit_s > 0.0) {
      timing += " / limit " + num(c.limit_s) + " s";
      if (seconds >= c.limit_s) outcome.pass = false;
    }
    passed += outcome.pass;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << index << ". " << c.name << ": "
              << outcome.detail << " [" << timing << "]" << std::endl;
  }
  std::cout << passed << "/" << index << " criteria passed" << std::endl;
  return passed == index ? 0 : 1;
}
