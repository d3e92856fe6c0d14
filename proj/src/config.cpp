#include "crossing/config.hpp"

#include <set>

#include "crossing/seeds.hpp"

namespace crossing {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Reads keys from one JSON object and rejects any it did not consume.
class Section {
 public:
  Section(const json& doc, std::string name) : doc_(doc), name_(std::move(name)) {
    if (!doc_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& target) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    try {
      target = doc_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + name_ + "." + key + "': " + e.what());
    }
  }

  template <typename T>
  void read_optional(const char* key, std::optional<T>& target) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    if (doc_.at(key).is_null()) {
      target.reset();
      return;
    }
    T value{};
    read(key, value);
    target = value;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return doc_.contains(key) ? &doc_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& item : doc_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown config key '" + name_ + "." + item.key() + "'");
    }
  }

 private:
  const json& doc_;
  std::string name_;
  std::set<std::string> seen_;
};

template <typename T>
ordered_json optional_json(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

TruncationMode parse_truncation_mode(const std::string& s) {
  if (s == "none") return TruncationMode::kNone;
  if (s == "truncated") return TruncationMode::kTruncated;
  throw ConfigError("mixture.truncation_mode must be 'none' or 'truncated'");
}

ArrivalMode parse_arrival_mode(const std::string& s) {
  if (s == "fixed-count") return ArrivalMode::kFixedCount;
  if (s == "poisson") return ArrivalMode::kPoisson;
  throw ConfigError("sim.arrival_mode must be 'fixed-count' or 'poisson'");
}

}  // namespace

std::string truncation_mode_name(TruncationMode mode) {
  return mode == TruncationMode::kNone ? "none" : "truncated";
}

std::string arrival_mode_name(ArrivalMode mode) {
  return mode == ArrivalMode::kFixedCount ? "fixed-count" : "poisson";
}

RunConfig parse_run_config(const json& doc) {
  RunConfig cfg;
  Section root(doc, "<root>");
  root.read("seed", cfg.seed);

  if (const json* j = root.child("ingest")) {
    Section s(*j, "ingest");
    s.read("samples", cfg.ingest.samples);
    s.read("sample_stride", cfg.ingest.sample_stride);
    s.read_optional("generator_model", cfg.ingest.generator_model);
    s.read_optional("trajectories", cfg.ingest.trajectories);
    s.finish();
  }
  if (const json* j = root.child("mixture")) {
    Section s(*j, "mixture");
    auto& m = cfg.mixture;
    s.read("k_min", m.k_min);
    s.read("k_max", m.k_max);
    s.read("max_iterations", m.max_iterations);
    s.read("loglik_tolerance", m.loglik_tolerance);
    s.read("restarts", m.restarts);
    s.read("covariance_floor", m.covariance_floor);
    std::string mode = truncation_mode_name(m.truncation_mode);
    s.read("truncation_mode", mode);
    m.truncation_mode = parse_truncation_mode(mode);
    s.read("moment_draws", m.moment_draws);
    s.read("rate_threshold", m.rate_threshold);
    s.finish();
  }
  if (const json* j = root.child("agents")) {
    Section s(*j, "agents");
    auto& a = cfg.agents;
    if (const json* sy = s.child("soft_yield")) {
      Section y(*sy, "agents.soft_yield");
      y.read("p1", a.soft_yield.p1);
      y.read("p2", a.soft_yield.p2);
      y.read("p3", a.soft_yield.p3);
      y.finish();
    }
    s.read("update_interval", a.update_interval);
    s.read("max_acceleration", a.max_acceleration);
    s.read("recovery_acceleration", a.recovery_acceleration);
    s.read("speed_search_max", a.speed_search_max);
    s.read("condition_on_time_advantage", a.condition_on_time_advantage);
    if (const json* wb = s.child("walk_speed_bounds")) {
      Section w(*wb, "agents.walk_speed_bounds");
      w.read("lower", a.walk_speed_bounds.lower);
      w.read("upper", a.walk_speed_bounds.upper);
      w.finish();
    }
    s.finish();
  }
  if (const json* j = root.child("sim")) {
    Section s(*j, "sim");
    auto& c = cfg.sim.sim;
    s.read("R0", c.R0);
    s.read("L0", c.L0);
    s.read("v0", c.v0);
    s.read("lambda", c.lambda);
    s.read("dt", c.dt);
    s.read("horizon", c.horizon);
    s.read("vehicle_half_length", c.vehicle_half_length);
    s.read("vehicle_half_width", c.vehicle_half_width);
    s.read("detection_range", c.detection_range);
    std::string mode = arrival_mode_name(c.arrival_mode);
    s.read("arrival_mode", mode);
    c.arrival_mode = parse_arrival_mode(mode);
    s.read("pedestrian_count", c.pedestrian_count);
    s.read("arrival_window", c.arrival_window);
    s.read("experiments", cfg.sim.experiments);
    s.finish();
  }
  if (const json* j = root.child("eval")) {
    Section s(*j, "eval");
    s.read_optional("mu_0", cfg.eval.mu_0);
    s.read_optional("kappa_0", cfg.eval.kappa_0);
    s.read("av_strategy", cfg.eval.av_strategy);
    s.finish();
  }
  if (const json* j = root.child("paths")) {
    Section s(*j, "paths");
    s.read("out_dir", cfg.paths.out_dir);
    s.read("observations", cfg.paths.observations);
    s.read("model", cfg.paths.model);
    s.finish();
  }
  root.finish();
  cfg.validate();
  return cfg;
}

RunConfig parse_run_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_run_config(doc);
}

ordered_json run_config_to_json(const RunConfig& cfg) {
  ordered_json doc;
  doc["seed"] = cfg.seed;
  doc["ingest"] = {{"samples", cfg.ingest.samples},
                   {"sample_stride", cfg.ingest.sample_stride},
                   {"generator_model", optional_json(cfg.ingest.generator_model)},
                   {"trajectories", optional_json(cfg.ingest.trajectories)}};
  const auto& m = cfg.mixture;
  doc["mixture"] = {{"k_min", m.k_min},
                    {"k_max", m.k_max},
                    {"max_iterations", m.max_iterations},
                    {"loglik_tolerance", m.loglik_tolerance},
                    {"restarts", m.restarts},
                    {"covariance_floor", m.covariance_floor},
                    {"truncation_mode", truncation_mode_name(m.truncation_mode)},
                    {"moment_draws", m.moment_draws},
                    {"rate_threshold", m.rate_threshold}};
  const auto& a = cfg.agents;
  doc["agents"] = {
      {"soft_yield", {{"p1", a.soft_yield.p1}, {"p2", a.soft_yield.p2}, {"p3", a.soft_yield.p3}}},
      {"update_interval", a.update_interval},
      {"max_acceleration", a.max_acceleration},
      {"recovery_acceleration", a.recovery_acceleration},
      {"speed_search_max", a.speed_search_max},
      {"condition_on_time_advantage", a.condition_on_time_advantage},
      {"walk_speed_bounds", {{"lower", a.walk_speed_bounds.lower}, {"upper", a.walk_speed_bounds.upper}}}};
  const auto& c = cfg.sim.sim;
  doc["sim"] = {{"R0", c.R0},
                {"L0", c.L0},
                {"v0", c.v0},
                {"lambda", c.lambda},
                {"dt", c.dt},
                {"horizon", c.horizon},
                {"vehicle_half_length", c.vehicle_half_length},
                {"vehicle_half_width", c.vehicle_half_width},
                {"detection_range", c.detection_range},
                {"arrival_mode", arrival_mode_name(c.arrival_mode)},
                {"pedestrian_count", c.pedestrian_count},
                {"arrival_window", c.arrival_window},
                {"experiments", cfg.sim.experiments}};
  doc["eval"] = {{"mu_0", optional_json(cfg.eval.mu_0)},
                 {"kappa_0", optional_json(cfg.eval.kappa_0)},
                 {"av_strategy", cfg.eval.av_strategy}};
  doc["paths"] = {{"out_dir", cfg.paths.out_dir},
                  {"observations", cfg.paths.observations},
                  {"model", cfg.paths.model}};
  return doc;
}

void RunConfig::validate() const {
  try {
    fit_config().validate();
    sim_config().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (ingest.samples < 0) throw ConfigError("ingest.samples must be nonnegative");
  if (!(ingest.sample_stride >= 0.0)) throw ConfigError("ingest.sample_stride must be nonnegative");
  if (mixture.k_min < 1 || mixture.k_max < mixture.k_min) throw ConfigError("mixture: need 1 <= k_min <= k_max");
  if (!(mixture.rate_threshold >= 0.0)) throw ConfigError("mixture.rate_threshold must be nonnegative");
  if (!(agents.update_interval > 0.0) || !(agents.max_acceleration > 0.0) ||
      !(agents.recovery_acceleration > 0.0) || !(agents.speed_search_max > 0.0)) {
    throw ConfigError("agents: interval, accelerations and search range must be positive");
  }
  if (!(agents.walk_speed_bounds.lower > 0.0) || !(agents.walk_speed_bounds.lower < agents.walk_speed_bounds.upper)) {
    throw ConfigError("agents.walk_speed_bounds: need 0 < lower < upper");
  }
  if (sim.sim.dt > 0.1 * agents.update_interval + 1e-12) {
    throw ConfigError("sim.dt must not exceed a tenth of agents.update_interval");
  }
  if (sim.experiments < 1) throw ConfigError("sim.experiments must be >= 1");
  if (eval.av_strategy != "soft-yield" && eval.av_strategy != "human") {
    throw ConfigError("eval.av_strategy must be 'soft-yield' or 'human'");
  }
  if (eval.mu_0.has_value() != eval.kappa_0.has_value()) {
    throw ConfigError("eval: set both mu_0 and kappa_0, or neither");
  }
}

FitConfig RunConfig::fit_config() const {
  FitConfig f;
  f.components = mixture.k_min;
  f.max_iterations = mixture.max_iterations;
  f.loglik_tolerance = mixture.loglik_tolerance;
  f.restarts = mixture.restarts;
  f.covariance_floor = mixture.covariance_floor;
  f.seed = derive_seed(seed, "fit");
  f.truncation_mode = mixture.truncation_mode;
  f.moment_draws = mixture.moment_draws;
  return f;
}

SimConfig RunConfig::sim_config() const {
  SimConfig c = sim.sim;
  c.seed = derive_seed(seed, "evaluate");
  return c;
}

std::filesystem::path RunConfig::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  return p.is_absolute() ? p : std::filesystem::path(paths.out_dir) / p;
}

}  // namespace crossing
