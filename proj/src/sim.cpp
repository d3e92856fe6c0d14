#include "crossing/sim.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "crossing/seeds.hpp"

namespace crossing {

namespace {

std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace

void SimConfig::validate() const {
  const bool positive = R0 > 0 && L0 > 0 && v0 > 0 && dt > 0 && horizon > 0 && vehicle_half_length > 0 &&
                        vehicle_half_width > 0 && detection_range > 0;
  if (!positive) throw std::invalid_argument("SimConfig: geometry, speeds and times must be positive");
  if (!(lambda >= 0.0)) throw std::invalid_argument("SimConfig: lambda must be nonnegative");
  if (pedestrian_count < 0) throw std::invalid_argument("SimConfig: pedestrian_count must be nonnegative");
  if (!(arrival_window >= 0.0)) throw std::invalid_argument("SimConfig: arrival_window must be nonnegative");
  if (vehicle_half_width >= L0 / 2) {
    throw std::invalid_argument("SimConfig: vehicle wider than the crossing");
  }
}

double PedestrianState::lateral_offset(double L0) const {
  const double from_curb = progress - 0.5 * L0;
  return side == Side::kNear ? from_curb : -from_curb;
}

double PedestrianState::to_path_line(double L0) const { return std::max(0.0, 0.5 * L0 - progress); }

bool PedestrianState::clear_of_path(double L0, double half_width) const {
  return progress > 0.5 * L0 + half_width;
}

bool detect_crash(const WorldState& state, const SimConfig& config) {
  const double R = state.vehicle_position;
  if (R > 0.0 || R < -2.0 * config.vehicle_half_length) return false;
  return std::any_of(state.pedestrians.begin(), state.pedestrians.end(), [&](const PedestrianState& p) {
    return std::abs(p.lateral_offset(config.L0)) <= config.vehicle_half_width;
  });
}

ArrivalSchedule make_schedule(const SimConfig& config, std::uint64_t seed) {
  switch (config.arrival_mode) {
    case ArrivalMode::kFixedCount:
      return fixed_count_arrivals(config.pedestrian_count, config.arrival_window, seed);
    case ArrivalMode::kPoisson:
      return sample_arrivals(config.lambda, config.horizon, seed);
  }
  throw std::invalid_argument("unknown arrival mode");
}

EpisodeResult run_episode(const SimConfig& config, DrivingStrategy& strategy,
                          const ArrivalSchedule& schedule, const WalkSpeedSource& walk_speeds,
                          bool record_trajectory) {
  config.validate();
  if (schedule.times.size() != schedule.sides.size()) {
    throw std::invalid_argument("run_episode: schedule times and sides differ in length");
  }
  EpisodeResult result;
  WorldState world;
  world.vehicle_position = config.R0;
  world.vehicle_v = config.v0;
  const double clearance = -2.0 * config.vehicle_half_length;
  // Guard against rounding in step * dt so an arrival on the grid spawns on time.
  const double spawn_slack = 1e-9 * config.dt;

  size_t next_arrival = 0;
  std::vector<VisiblePedestrian> visible;
  for (long step = 0;; ++step) {
    world.t = static_cast<double>(step) * config.dt;

    while (next_arrival < schedule.size() && schedule.times[next_arrival] <= world.t + spawn_slack) {
      const int id = static_cast<int>(next_arrival);
      const double speed = walk_speeds(id, world.vehicle_position, world.vehicle_v);
      if (!(speed > 0.0) || !std::isfinite(speed)) {
        throw std::invalid_argument("run_episode: walking speed must be positive");
      }
      PedestrianState p{id, schedule.times[next_arrival], schedule.sides[next_arrival], speed, 0.0};
      world.pedestrians.push_back(p);
      result.pedestrians.push_back({id, p.arrival_time, p.side, speed});
      ++next_arrival;
    }

    if (record_trajectory) {
      if (world.pedestrians.empty()) {
        result.trajectory.push_back({world.t, world.vehicle_position, world.vehicle_v, -1, 0.0, 0.0});
      }
      for (const auto& p : world.pedestrians) {
        result.trajectory.push_back({world.t, world.vehicle_position, world.vehicle_v, p.id,
                                     0.5 * config.L0 - p.progress, p.walk_speed});
      }
    }

    if (detect_crash(world, config)) {
      result.crashed = true;
      result.crash_time = world.t;
      result.passing_time = world.t;
      return result;
    }
    if (world.t >= config.horizon) {
      result.timed_out = true;
      result.passing_time = world.t;
      return result;
    }

    visible.clear();
    if (world.vehicle_position <= config.detection_range) {
      for (const auto& p : world.pedestrians) {
        if (p.clear_of_path(config.L0, config.vehicle_half_width)) continue;
        visible.push_back({p.id, p.arrival_time, p.walk_speed, p.to_path_line(config.L0),
                           config.L0 - p.progress});
      }
    }
    const StrategyDecision decision =
        strategy.step({world.t, world.vehicle_position, world.vehicle_v, visible});
    if (!std::isfinite(decision.acceleration)) {
      throw std::runtime_error("run_episode: strategy returned a non-finite acceleration");
    }

    const double previous_R = world.vehicle_position;
    world.vehicle_position -= world.vehicle_v * config.dt;
    world.vehicle_v = std::max(0.0, world.vehicle_v + decision.acceleration * config.dt);
    for (auto& p : world.pedestrians) p.progress = std::min(config.L0, p.progress + p.walk_speed * config.dt);

    if (world.vehicle_position <= clearance) {
      WorldState final_state = world;
      final_state.t = static_cast<double>(step + 1) * config.dt;
      if (detect_crash(final_state, config)) {
        result.crashed = true;
        result.crash_time = final_state.t;
        result.passing_time = final_state.t;
        return result;
      }
      const double fraction = (previous_R - clearance) / (previous_R - world.vehicle_position);
      result.passing_time = world.t + fraction * config.dt;
      if (record_trajectory) {
        result.trajectory.push_back(
            {final_state.t, world.vehicle_position, world.vehicle_v, -1, 0.0, 0.0});
      }
      return result;
    }
    std::erase_if(world.pedestrians, [&](const PedestrianState& p) { return p.progress >= config.L0; });
  }
}

PairedOutcome run_paired_experiment(const SimConfig& config, const StrategyFactory& av,
                                    const StrategyFactory& human, const WalkSpeedModel& walk_model,
                                    int index, bool record_trajectory) {
  if (index < 0) throw std::invalid_argument("run_paired_experiment: index must be nonnegative");
  const std::uint64_t experiment_seed = derive_seed(config.seed, "experiment", index);
  PairedOutcome out;
  out.index = index;
  out.schedule = make_schedule(config, derive_seed(experiment_seed, "arrivals"));
  const size_t n = out.schedule.size();
  std::vector<std::optional<double>> speeds(n);
  auto walk_seed = [&](int j) { return derive_seed(experiment_seed, "walk-speed", j); };

  auto av_strategy = av();
  out.av = run_episode(config, *av_strategy, out.schedule, [&](int j, double R, double v) {
    const double s = walk_model.decide(R, v, walk_seed(j)).speed;
    speeds[j] = s;
    return s;
  }, record_trajectory);
  // Pedestrians the automated pass never reached still need a speed for the replay.
  out.walk_speeds.resize(n);
  for (size_t j = 0; j < n; ++j) {
    out.walk_speeds[j] = speeds[j] ? *speeds[j] : walk_model.unconditional(walk_seed(static_cast<int>(j))).speed;
  }
  auto human_strategy = human();
  out.human = run_episode(config, *human_strategy, out.schedule,
                          [&](int j, double, double) { return out.walk_speeds[j]; }, record_trajectory);
  return out;
}

std::vector<PairedOutcome> run_paired_experiments(const SimConfig& config, const StrategyFactory& av,
                                                  const StrategyFactory& human,
                                                  const WalkSpeedModel& walk_model, int count,
                                                  int parallelism) {
  if (count < 1) throw std::invalid_argument("run_paired_experiments: need at least one experiment");
  config.validate();
  std::vector<PairedOutcome> outcomes(count);
  auto run_one = [&](int i) { outcomes[i] = run_paired_experiment(config, av, human, walk_model, i); };

  const int workers = std::clamp(parallelism, 1, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) run_one(i);
    return outcomes;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < count; i = next++) run_one(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return outcomes;
}

void write_trajectory_csv(const EpisodeResult& result, std::ostream& out) {
  out << "t,R,v,pedestrian_id,L,v_p\n";
  for (const auto& row : result.trajectory) {
    out << format_double(row.t) << ',' << format_double(row.R) << ',' << format_double(row.v) << ',';
    if (row.pedestrian_id < 0) {
      out << ",,\n";
    } else {
      out << row.pedestrian_id << ',' << format_double(row.L) << ',' << format_double(row.v_p) << '\n';
    }
  }
}

}  // namespace crossing
