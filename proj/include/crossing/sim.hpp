#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "crossing/agents.hpp"

namespace crossing {

enum class ArrivalMode {
  kFixedCount,  ///< pedestrian_count arrivals uniformly placed in [0, arrival_window)
  kPoisson,     ///< Poisson stream with rate lambda over the horizon
};

struct SimConfig {
  double R0 = 30.0;              ///< distance at which pedestrians start to arrive, m
  double L0 = 9.0;               ///< crossing length, m
  double v0 = 5.0;               ///< approach speed, m/s
  double lambda = 250.0 / 3600;  ///< pedestrians per second (Poisson mode)
  double dt = 0.05;              ///< integration step, s
  double horizon = 120.0;        ///< episode time limit, s
  double vehicle_half_length = 2.5;
  double vehicle_half_width = 1.0;
  double detection_range = 50.0;  ///< strategies see pedestrians only while R <= this
  ArrivalMode arrival_mode = ArrivalMode::kFixedCount;
  int pedestrian_count = 1;
  double arrival_window = 3.0;  ///< s, fixed-count mode
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct PedestrianState {
  int id = 0;
  double arrival_time = 0.0;
  Side side = Side::kNear;
  double walk_speed = 0.0;
  double progress = 0.0;  ///< distance walked from the starting curb, 0..L0

  /// Signed lateral position relative to the vehicle path line (at L0 / 2).
  double lateral_offset(double L0) const;
  double to_path_line(double L0) const;
  bool clear_of_path(double L0, double half_width) const;
};

struct WorldState {
  double t = 0.0;
  double vehicle_position = 0.0;  ///< R: vehicle front to crossing line, positive approaching
  double vehicle_v = 0.0;
  std::vector<PedestrianState> pedestrians;
};

/// A pedestrian stands in the path strip while the vehicle body spans the
/// crossing line, i.e. -2 * half_length <= R <= 0.
bool detect_crash(const WorldState& state, const SimConfig& config);

struct PedestrianRecord {
  int id = 0;
  double arrival_time = 0.0;
  Side side = Side::kNear;
  double walk_speed = 0.0;
  friend bool operator==(const PedestrianRecord&, const PedestrianRecord&) = default;
};

struct TrajectoryRow {
  double t = 0.0;
  double R = 0.0;
  double v = 0.0;
  int pedestrian_id = -1;  ///< -1: no active pedestrian at this step
  double L = 0.0;          ///< signed distance still to walk to the path line
  double v_p = 0.0;
};

struct EpisodeResult {
  double passing_time = 0.0;  ///< from R = R0 to clearance; elapsed time at termination otherwise
  bool crashed = false;
  std::optional<double> crash_time;
  bool timed_out = false;
  std::vector<PedestrianRecord> pedestrians;  ///< every pedestrian that entered the scene
  std::vector<TrajectoryRow> trajectory;

  bool completed() const { return !crashed && !timed_out; }
};

/// Supplies a walking speed for pedestrian `index` given the vehicle state at its arrival.
using WalkSpeedSource = std::function<double(int index, double R, double v)>;

EpisodeResult run_episode(const SimConfig& config, DrivingStrategy& strategy,
                          const ArrivalSchedule& schedule, const WalkSpeedSource& walk_speeds,
                          bool record_trajectory = false);

/// Schedule for one experiment according to the configured arrival mode.
ArrivalSchedule make_schedule(const SimConfig& config, std::uint64_t seed);

struct PairedOutcome {
  int index = 0;
  ArrivalSchedule schedule;
  std::vector<double> walk_speeds;  ///< per scheduled pedestrian, shared by both passes
  EpisodeResult av;
  EpisodeResult human;
};

/// Experiment `index` of a paired run: the automated pass decides the walking
/// speeds, the human pass replays them on the same arrival schedule.
PairedOutcome run_paired_experiment(const SimConfig& config, const StrategyFactory& av,
                                    const StrategyFactory& human, const WalkSpeedModel& walk_model,
                                    int index, bool record_trajectory = false);

/// Runs experiment i = 0..count-1 twice over one pedestrian realization:
/// first with the automated strategy (walking speeds decided against its
/// vehicle state), then with the human baseline replaying those speeds.
/// Pedestrians the first pass never saw get unconditional speeds. Results do
/// not depend on `parallelism`.
std::vector<PairedOutcome> run_paired_experiments(const SimConfig& config, const StrategyFactory& av,
                                                  const StrategyFactory& human,
                                                  const WalkSpeedModel& walk_model, int count,
                                                  int parallelism = 1);

/// Tabular dump: t,R,v,pedestrian_id,L,v_p.
void write_trajectory_csv(const EpisodeResult& result, std::ostream& out);

}  // namespace crossing
