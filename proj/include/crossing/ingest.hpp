#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "crossing/mixture.hpp"
#include "crossing/scenario.hpp"

namespace crossing {

struct TrajectorySample {
  double t = 0.0;  ///< s
  double R = 0.0;  ///< m
  double L = 0.0;  ///< m, remaining lateral distance to the vehicle path line
  double v = 0.0;  ///< m/s
};

struct TrajectoryLog {
  std::string event_id;
  std::vector<TrajectorySample> rows;
};

enum class Provenance { kReal, kSynthetic };

struct ObservationMatrix {
  Eigen::MatrixXd rows = Eigen::MatrixXd(0, kObservationDim);  ///< n x 4: inv_R, v, v_p, inv_T_adv
  Provenance provenance = Provenance::kReal;
  std::optional<GaussianMixture> generator;  ///< set for synthetic data
};

struct ExtractionResult {
  ObservationMatrix observations;
  std::vector<std::string> warnings;
};

/// Parses the delimited trajectory format (header naming event_id, t, R, L, v
/// in any order; comma separated). Rows are grouped by event_id in order of
/// first appearance.
std::vector<TrajectoryLog> read_trajectory_csv(std::istream& in);
std::vector<TrajectoryLog> read_trajectory_csv(const std::filesystem::path& path);

/// Estimates v_p = -dL/dt by centered differences (one-sided at the ends),
/// keeps rows at `sample_stride` spacing (0 keeps all), drops rows whose
/// observation is undefined and maps the rest to observation space.
ExtractionResult extract_observations(const TrajectoryLog& log, double sample_stride = 0.5,
                                      TtcConvention convention = TtcConvention::kRangeOverSpeed);

ExtractionResult extract_observations(const std::vector<TrajectoryLog>& logs, double sample_stride = 0.5,
                                      TtcConvention convention = TtcConvention::kRangeOverSpeed);

/// n seeded draws from a 4-D generator truncated to the positive orthant.
ObservationMatrix generate_synthetic(const GaussianMixture& generator, Eigen::Index n, std::uint64_t seed);

/// Three-component stand-in for naturalistic passing-event data: free
/// approach, close-range yielding, and slow pedestrians.
GaussianMixture default_interaction_generator();

/// Header inv_R,v,v_p,inv_T_adv then one row per observation.
void write_observations_csv(const ObservationMatrix& obs, std::ostream& out);
/// Throws std::runtime_error on a malformed header/row or a non-positive entry.
ObservationMatrix read_observations_csv(std::istream& in);
ObservationMatrix read_observations_csv(const std::filesystem::path& path);

}  // namespace crossing
