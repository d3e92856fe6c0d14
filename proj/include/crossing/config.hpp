#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "crossing/agents.hpp"
#include "crossing/mixture.hpp"
#include "crossing/sim.hpp"

namespace crossing {

/// Malformed or inconsistent run configuration (usage error).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IngestSection {
  long samples = 3000;  ///< synthetic rows written by gen-data
  double sample_stride = 0.5;
  std::optional<std::string> generator_model;  ///< model file; built-in generator when unset
  std::optional<std::string> trajectories;     ///< trajectory CSV; extracted instead of synthesized
  friend bool operator==(const IngestSection&, const IngestSection&) = default;
};

struct MixtureSection {
  int k_min = 1;
  int k_max = 15;
  int max_iterations = 300;
  double loglik_tolerance = 1e-7;
  int restarts = 2;
  double covariance_floor = 1e-6;
  TruncationMode truncation_mode = TruncationMode::kTruncated;
  int moment_draws = 20000;
  double rate_threshold = 0.10;
  friend bool operator==(const MixtureSection&, const MixtureSection&) = default;
};

struct AgentsSection {
  SoftYieldCoefficients soft_yield;
  double update_interval = 1.0;
  double max_acceleration = 4.0;
  double recovery_acceleration = 1.0;
  double speed_search_max = 25.0;
  bool condition_on_time_advantage = true;
  SpeedBounds walk_speed_bounds;
  friend bool operator==(const AgentsSection&, const AgentsSection&) = default;
};

struct SimSection {
  SimConfig sim;  ///< seed is ignored; episodes derive theirs from the master seed
  int experiments = 50;
  friend bool operator==(const SimSection&, const SimSection&) = default;
};

struct EvalSection {
  std::optional<double> mu_0;
  std::optional<double> kappa_0;
  std::string av_strategy = "soft-yield";  ///< "soft-yield" or "human"
  friend bool operator==(const EvalSection&, const EvalSection&) = default;
};

struct PathsSection {
  std::string out_dir = ".";
  std::string observations = "observations.csv";  ///< relative paths resolve against out_dir
  std::string model = "model.json";
  friend bool operator==(const PathsSection&, const PathsSection&) = default;
};

struct RunConfig {
  std::uint64_t seed = 1;
  IngestSection ingest;
  MixtureSection mixture;
  AgentsSection agents;
  SimSection sim;
  EvalSection eval;
  PathsSection paths;

  void validate() const;
  FitConfig fit_config() const;
  SimConfig sim_config() const;
  std::filesystem::path resolve(const std::string& path) const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Sections: seed, ingest, mixture, agents, sim, eval, paths. Missing keys
/// take defaults; unknown keys raise ConfigError.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig parse_run_config_text(const std::string& text);
nlohmann::ordered_json run_config_to_json(const RunConfig& config);

std::string truncation_mode_name(TruncationMode mode);
std::string arrival_mode_name(ArrivalMode mode);

}  // namespace crossing
