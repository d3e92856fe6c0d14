#include "crossing/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crossing/config.hpp"
#include "crossing/eval.hpp"
#include "crossing/ingest.hpp"
#include "crossing/mixture_io.hpp"
#include "crossing/seeds.hpp"

namespace crossing {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> model_path;
  int parallel = 1;
};

struct ConditionOptions {
  std::vector<std::string> given;
  std::string target;
  int points = 400;
  std::vector<double> range;
};

struct SimulateOptions {
  std::string strategy = "soft-yield";
  int index = 0;
};

struct EvaluateOptions {
  std::string av;
};

RunConfig load_config(const GlobalOptions& g) {
  RunConfig cfg;
  if (!g.config_path.empty()) {
    std::string text;
    try {
      text = read_text_file(g.config_path);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
    cfg = parse_run_config_text(text);
  }
  if (g.seed) cfg.seed = *g.seed;
  if (g.out_dir) cfg.paths.out_dir = *g.out_dir;
  if (g.model_path) cfg.paths.model = *g.model_path;
  cfg.validate();
  return cfg;
}

void require_out_dir(const RunConfig& cfg) {
  if (!fs::is_directory(cfg.paths.out_dir)) {
    throw std::runtime_error("output directory does not exist: " + cfg.paths.out_dir);
  }
}

std::string fmt(double x) {
  if (std::isnan(x)) return "";
  std::ostringstream s;
  s.precision(17);
  s << x;
  return s.str();
}

void write_file(const fs::path& path, const std::string& text, std::ostream& out) {
  write_text_file(path, text);
  out << "wrote " << path.string() << '\n';
}

GaussianMixture load_model(const RunConfig& cfg) { return load_mixture(cfg.resolve(cfg.paths.model)); }

StrategyFactory strategy_factory(const std::string& name, const RunConfig& cfg,
                                 std::shared_ptr<const GaussianMixture> model) {
  const auto& a = cfg.agents;
  if (name == "soft-yield") {
    SoftYieldParams p;
    p.coefficients = a.soft_yield;
    p.free_flow_speed = cfg.sim.sim.v0;
    p.recovery_acceleration = a.recovery_acceleration;
    return [p] { return std::make_unique<SoftYieldStrategy>(p); };
  }
  if (name == "human") {
    HumanDriverParams p;
    p.model = std::move(model);
    p.update_interval = a.update_interval;
    p.max_acceleration = a.max_acceleration;
    p.recovery_acceleration = a.recovery_acceleration;
    p.free_flow_speed = cfg.sim.sim.v0;
    p.speed_search_max = a.speed_search_max;
    p.condition_on_time_advantage = a.condition_on_time_advantage;
    p.validate();
    return [p] { return std::make_unique<HumanDriverStrategy>(p); };
  }
  throw UsageError("unknown strategy '" + name + "' (expected soft-yield or human)");
}

void require_interaction_model(const GaussianMixture& model) {
  if (model.dim() != kObservationDim) {
    throw std::runtime_error("interaction model must be " + std::to_string(kObservationDim) + "-dimensional");
  }
}

// --- gen-data --------------------------------------------------------------

int cmd_gen_data(const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load_config(g);
  require_out_dir(cfg);
  const fs::path obs_path = cfg.resolve(cfg.paths.observations);

  if (cfg.ingest.trajectories) {
    const auto logs = read_trajectory_csv(fs::path(*cfg.ingest.trajectories));
    ExtractionResult extracted = extract_observations(logs, cfg.ingest.sample_stride);
    for (const auto& w : extracted.warnings) err << "warning: " << w << '\n';
    std::ostringstream csv;
    write_observations_csv(extracted.observations, csv);
    write_file(obs_path, csv.str(), out);
    out << "events " << logs.size() << ", observations " << extracted.observations.rows.rows() << '\n';
    return kExitOk;
  }

  const GaussianMixture generator = cfg.ingest.generator_model
                                        ? load_mixture(fs::path(*cfg.ingest.generator_model))
                                        : default_interaction_generator();
  const ObservationMatrix obs =
      generate_synthetic(generator, cfg.ingest.samples, derive_seed(cfg.seed, "gen-data"));
  std::ostringstream csv;
  write_observations_csv(obs, csv);
  write_file(obs_path, csv.str(), out);
  fs::path gen_path = obs_path;
  gen_path.replace_extension(".generator.json");
  write_file(gen_path, serialize_mixture(*obs.generator), out);
  out << "observations " << obs.rows.rows() << " (synthetic)\n";
  return kExitOk;
}

// --- fit -------------------------------------------------------------------

int cmd_fit(const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load_config(g);
  require_out_dir(cfg);
  const ObservationMatrix obs = read_observations_csv(cfg.resolve(cfg.paths.observations));
  if (obs.rows.rows() == 0) throw std::runtime_error("no observations to fit");

  std::vector<int> ks;
  for (int k = cfg.mixture.k_min; k <= cfg.mixture.k_max; ++k) ks.push_back(k);
  const ComponentSelection sel =
      select_components(obs.rows, ks, cfg.fit_config(), cfg.mixture.rate_threshold);
  for (const auto& [k, why] : sel.failures) err << "warning: K=" << k << " failed: " << why << '\n';
  if (!sel.selected_fit) throw std::runtime_error("every candidate component count failed to fit");

  std::ostringstream curve;
  curve << "K,bic,change_rate\n";
  for (const auto& p : sel.curve) curve << p.components << ',' << fmt(p.bic) << ',' << fmt(p.change_rate) << '\n';
  write_file(cfg.resolve("bic_curve.csv"), curve.str(), out);
  write_file(cfg.resolve(cfg.paths.model), serialize_mixture(sel.selected_fit->model), out);

  const auto& d = sel.selected_fit->diagnostics;
  out << "selected K " << sel.selected << ", log-likelihood " << fmt(d.log_likelihood) << ", iterations "
      << d.iterations << (d.converged ? "" : " (not converged)") << '\n';
  return kExitOk;
}

// --- condition -------------------------------------------------------------

int cmd_condition(const GlobalOptions& g, const ConditionOptions& o, std::ostream& out) {
  const RunConfig cfg = load_config(g);
  require_out_dir(cfg);
  const GaussianMixture model = load_model(cfg);
  require_interaction_model(model);

  std::vector<int> observed;
  Eigen::VectorXd values(static_cast<Eigen::Index>(o.given.size()));
  for (size_t i = 0; i < o.given.size(); ++i) {
    const auto eq = o.given[i].find('=');
    if (eq == std::string::npos) throw UsageError("--given expects NAME=VALUE, got '" + o.given[i] + "'");
    const int dim = observation_index(o.given[i].substr(0, eq));
    if (dim < 0) throw UsageError("unknown variable in --given '" + o.given[i] + "'");
    double value = 0.0;
    try {
      size_t used = 0;
      const std::string text = o.given[i].substr(eq + 1);
      value = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw UsageError("bad value in --given '" + o.given[i] + "'");
    }
    if (std::find(observed.begin(), observed.end(), dim) != observed.end()) {
      throw UsageError("variable given twice: " + o.given[i]);
    }
    observed.push_back(dim);
    values(static_cast<Eigen::Index>(i)) = value;
  }

  std::vector<int> free_dims;
  for (int d = 0; d < model.dim(); ++d)
    if (std::find(observed.begin(), observed.end(), d) == observed.end()) free_dims.push_back(d);
  if (free_dims.empty()) throw UsageError("nothing left to condition on: every variable is given");

  int target = -1;
  if (!o.target.empty()) {
    target = observation_index(o.target);
    if (target < 0) throw UsageError("unknown --target '" + o.target + "'");
    if (std::find(free_dims.begin(), free_dims.end(), target) == free_dims.end()) {
      throw UsageError("--target must not be one of the given variables");
    }
  } else if (free_dims.size() == 1) {
    target = free_dims.front();
  } else {
    throw UsageError("--target is required when more than one variable is free");
  }

  GaussianMixture result = observed.empty() ? model : condition(model, observed, values);
  const int position = static_cast<int>(std::find(free_dims.begin(), free_dims.end(), target) - free_dims.begin());
  if (result.dim() > 1) {
    const int keep[] = {position};
    result = marginalize(result, keep);
  }

  double lo = 0.0;
  double hi = 0.0;
  if (o.range.size() == 2) {
    lo = o.range[0];
    hi = o.range[1];
    if (!(lo < hi)) throw UsageError("--range needs LO < HI");
  } else {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (int k = 0; k < result.size(); ++k) {
      if (result.weights()(k) <= 0.0) continue;
      const double m = result.components()[k].mean(0);
      const double s = std::sqrt(result.components()[k].covariance(0, 0));
      lo = std::min(lo, m - 6.0 * s);
      hi = std::max(hi, m + 6.0 * s);
    }
    if (const auto& box = result.truncation()) {
      lo = std::max(lo, box->lower()(0));
      hi = std::min(hi, box->upper()(0));
    }
    if (!(lo < hi)) throw std::runtime_error("conditional density has no support to tabulate");
  }
  if (o.points < 2) throw UsageError("--points must be at least 2");

  std::ostringstream csv;
  csv << "value,pdf\n";
  Eigen::VectorXd x(1);
  for (int i = 0; i < o.points; ++i) {
    x(0) = lo + (hi - lo) * i / (o.points - 1);
    csv << fmt(x(0)) << ',' << fmt(result.density(x)) << '\n';
  }
  write_file(cfg.resolve("condition.csv"), csv.str(), out);
  const double mode = conditional_mode(result, {lo, hi});
  out << "target " << kObservationNames[target] << ", mode " << fmt(mode) << '\n';
  return kExitOk;
}

// --- simulate --------------------------------------------------------------

int cmd_simulate(const GlobalOptions& g, const SimulateOptions& o, std::ostream& out) {
  const RunConfig cfg = load_config(g);
  require_out_dir(cfg);
  if (o.strategy != "soft-yield" && o.strategy != "human") {
    throw UsageError("--strategy must be soft-yield or human");
  }
  if (o.index < 0) throw UsageError("--index must be nonnegative");
  auto model = std::make_shared<const GaussianMixture>(load_model(cfg));
  require_interaction_model(*model);
  const WalkSpeedModel walk(*model, cfg.agents.walk_speed_bounds);

  // Same experiment as evaluate would run: the automated pass sets the
  // walking speeds, the human pass replays them.
  const auto outcome = run_paired_experiment(cfg.sim_config(), strategy_factory(cfg.eval.av_strategy, cfg, model),
                                             strategy_factory("human", cfg, model), walk, o.index, true);
  const EpisodeResult& ep = o.strategy == "human" ? outcome.human : outcome.av;
  const std::string label = o.strategy == "human" ? "human" : cfg.eval.av_strategy;

  ordered_json doc;
  doc["strategy"] = label;
  doc["index"] = o.index;
  doc["passing_time"] = ep.passing_time;
  doc["crashed"] = ep.crashed;
  doc["crash_time"] = ep.crash_time ? ordered_json(*ep.crash_time) : ordered_json(nullptr);
  doc["timed_out"] = ep.timed_out;
  doc["pedestrians"] = ordered_json::array();
  for (const auto& p : ep.pedestrians) {
    doc["pedestrians"].push_back({{"id", p.id},
                                  {"arrival_time", p.arrival_time},
                                  {"side", p.side == Side::kNear ? "near" : "far"},
                                  {"walk_speed", p.walk_speed}});
  }
  write_file(cfg.resolve("episode.json"), doc.dump(2) + "\n", out);
  std::ostringstream traj;
  write_trajectory_csv(ep, traj);
  write_file(cfg.resolve("trajectory.csv"), traj.str(), out);
  out << label << " episode " << o.index << ": "
      << (ep.crashed ? "crash" : ep.timed_out ? "timeout" : "passed in " + fmt(ep.passing_time) + " s") << '\n';
  return kExitOk;
}

// --- evaluate --------------------------------------------------------------

int cmd_evaluate(const GlobalOptions& g, const EvaluateOptions& o, std::ostream& out) {
  RunConfig cfg = load_config(g);
  if (!o.av.empty()) {
    cfg.eval.av_strategy = o.av;
    try {
      cfg.validate();
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }
  require_out_dir(cfg);
  if (g.parallel < 1) throw UsageError("--parallel must be >= 1");
  auto model = std::make_shared<const GaussianMixture>(load_model(cfg));
  require_interaction_model(*model);
  const WalkSpeedModel walk(*model, cfg.agents.walk_speed_bounds);

  const auto outcomes = run_paired_experiments(cfg.sim_config(), strategy_factory(cfg.eval.av_strategy, cfg, model),
                                               strategy_factory("human", cfg, model), walk,
                                               cfg.sim.experiments, g.parallel);
  std::vector<PairedTimes> pairs;
  pairs.reserve(outcomes.size());
  for (const auto& oc : outcomes) pairs.push_back(paired_times(oc));
  std::optional<Gates> gates;
  if (cfg.eval.mu_0 && cfg.eval.kappa_0) gates = Gates{*cfg.eval.mu_0, *cfg.eval.kappa_0};
  const EvaluationReport report = compute_report(pairs, gates);

  ordered_json doc = report_to_json(report);
  doc["av_strategy"] = cfg.eval.av_strategy;
  doc["seed"] = cfg.seed;
  write_file(cfg.resolve("report.json"), doc.dump(2) + "\n", out);
  std::ostringstream series;
  write_series_csv(report, series);
  write_file(cfg.resolve("tau_series.csv"), series.str(), out);

  out << "experiments " << report.experiments << ", mu " << fmt(report.mu) << ", cv " << fmt(report.cv)
      << ", kappa " << fmt(report.kappa) << " (" << report.crashes << " crashes, " << report.excluded
      << " excluded)\n";
  if (report.pass) {
    out << (*report.pass ? "PASS" : "FAIL") << " (mu_0 " << fmt(report.gates->mu_0) << ", kappa_0 "
        << fmt(report.gates->kappa_0) << ")\n";
    if (!*report.pass) return kExitGateFail;
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pedestrian-crossing interaction model and strategy evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string model_path;
  app.add_option("--config", g.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides the config)");
  auto* out_opt = app.add_option("--out", out_dir, "output directory (must exist)");
  auto* model_opt = app.add_option("--model", model_path, "model file (overrides paths.model)");
  app.add_option("--parallel", g.parallel, "worker threads for evaluate")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-data", "write an observation table (synthetic or from trajectories)");
  auto* fit = app.add_subcommand("fit", "fit the interaction mixture and select K by BIC");

  ConditionOptions co;
  auto* cond = app.add_subcommand("condition", "tabulate a conditional density");
  cond->add_option("--given", co.given, "observed variable, NAME=VALUE (repeatable)");
  cond->add_option("--target", co.target, "free variable to tabulate");
  cond->add_option("--points", co.points, "grid points");
  cond->add_option("--range", co.range, "grid bounds LO HI")->expected(2);

  SimulateOptions so;
  auto* sim = app.add_subcommand("simulate", "run one episode and dump its trajectory");
  sim->add_option("--strategy", so.strategy, "soft-yield or human");
  sim->add_option("--index", so.index, "experiment index");

  EvaluateOptions eo;
  auto* ev = app.add_subcommand("evaluate", "paired experiments, efficiency/stability/safety report");
  ev->add_option("--av", eo.av, "automated strategy (overrides eval.av_strategy)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (seed_opt->count()) g.seed = seed;
  if (out_opt->count()) g.out_dir = out_dir;
  if (model_opt->count()) g.model_path = model_path;

  try {
    if (gen->parsed()) return cmd_gen_data(g, out, err);
    if (fit->parsed()) return cmd_fit(g, out, err);
    if (cond->parsed()) return cmd_condition(g, co, out);
    if (sim->parsed()) return cmd_simulate(g, so, out);
    if (ev->parsed()) return cmd_evaluate(g, eo, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace crossing
