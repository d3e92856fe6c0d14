#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "crossing/sim.hpp"

namespace crossing {

/// Passing times of one experiment under the automated and human strategies.
struct PairedTimes {
  double t_a = 0.0;
  double t_h = 0.0;
  bool av_crashed = false;
  bool av_timed_out = false;
  bool human_completed = true;
};

PairedTimes paired_times(const PairedOutcome& outcome);

struct Gates {
  double mu_0 = 0.0;
  double kappa_0 = 0.0;
  friend bool operator==(const Gates&, const Gates&) = default;
};

struct EvaluationReport {
  int experiments = 0;                ///< N
  std::vector<double> tau;            ///< t_a / t_h over the pairs kept
  std::vector<double> running_mean;   ///< mean of the first n entries of tau
  double mu = 0.0;                    ///< NaN when every pair was excluded
  double sigma = 0.0;                 ///< population standard deviation of tau
  double cv = 0.0;                    ///< sigma / mu
  int crashes = 0;
  double kappa = 0.0;                 ///< crashes / N
  int excluded = 0;                   ///< pairs left out of tau (AV crash, timeout, or human incomplete)
  std::optional<Gates> gates;
  std::optional<bool> pass;           ///< (mu < mu_0) and (kappa < kappa_0), when gates are set
};

/// Efficiency (mu), stability (cv) and safety (kappa) of the automated strategy.
/// Throws std::invalid_argument for an empty list or a nonpositive passing time
/// in a completed pair.
EvaluationReport compute_report(std::span<const PairedTimes> pairs, std::optional<Gates> gates = std::nullopt);

nlohmann::ordered_json report_to_json(const EvaluationReport& report);

/// Plot-ready series: n,running_mean,tau_n.
void write_series_csv(const EvaluationReport& report, std::ostream& out);

}  // namespace crossing
