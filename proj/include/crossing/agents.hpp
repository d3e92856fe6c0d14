#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "crossing/mixture.hpp"
#include "crossing/scenario.hpp"

namespace crossing {

enum class Side { kNear, kFar };

struct ArrivalSchedule {
  std::vector<double> times;  ///< seconds after the vehicle reaches R0, strictly ascending
  std::vector<Side> sides;

  size_t size() const { return times.size(); }
  friend bool operator==(const ArrivalSchedule&, const ArrivalSchedule&) = default;
};

/// Poisson arrivals: exponential(lambda) gaps accumulated while below the
/// horizon, each with a fair-coin side.
ArrivalSchedule sample_arrivals(double lambda, double horizon, std::uint64_t seed);

/// `count` arrivals placed uniformly at random in [0, window), sorted.
ArrivalSchedule fixed_count_arrivals(int count, double window, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Pedestrian walking speed

struct SpeedBounds {
  double lower = 0.3;
  double upper = 3.0;
  friend bool operator==(const SpeedBounds&, const SpeedBounds&) = default;
};

struct WalkSpeedDecision {
  double speed = 0.0;
  bool fallback = false;  ///< conditioning failed; drawn from the unconditional v_p marginal
};

/// Precomputed marginals of the interaction model used to draw walking speeds.
class WalkSpeedModel {
 public:
  explicit WalkSpeedModel(const GaussianMixture& model, SpeedBounds bounds = {});

  /// v_p | (1/R, v) for a moving vehicle, v_p | 1/R for a stopped one, and the
  /// plain v_p marginal once the vehicle is past the crossing line (R <= 0).
  WalkSpeedDecision decide(double vehicle_R, double vehicle_v, std::uint64_t seed) const;
  WalkSpeedDecision unconditional(std::uint64_t seed) const;

  const SpeedBounds& bounds() const { return bounds_; }

 private:
  double draw(const GaussianMixture& one_dim, std::uint64_t seed) const;

  SpeedBounds bounds_;
  GaussianMixture range_speed_walk_;  // (inv_R, v, v_p)
  GaussianMixture range_walk_;        // (inv_R, v_p)
  GaussianMixture walk_;              // v_p
};

WalkSpeedDecision decide_walk_speed(const GaussianMixture& model, double vehicle_R, double vehicle_v,
                                    std::uint64_t seed, SpeedBounds bounds = {});

// ---------------------------------------------------------------------------
// Strategies

/// A pedestrian as seen by a driving strategy.
struct VisiblePedestrian {
  int id = 0;
  double arrival_time = 0.0;
  double walk_speed = 0.0;
  double to_path_line = 0.0;      ///< remaining lateral distance to the vehicle path line (>= 0)
  double crossing_remaining = 0.0;  ///< remaining distance to the far curb
};

struct StrategyInput {
  double t = 0.0;
  double R = 0.0;
  double v = 0.0;
  std::span<const VisiblePedestrian> pedestrians;  ///< visible and not yet clear of the vehicle path
};

struct StrategyDecision {
  double acceleration = 0.0;
  bool flagged = false;  ///< produced by a fallback path
};

class DrivingStrategy {
 public:
  virtual ~DrivingStrategy() = default;
  virtual StrategyDecision step(const StrategyInput& input) = 0;
  virtual std::string_view name() const = 0;
};

using StrategyFactory = std::function<std::unique_ptr<DrivingStrategy>()>;

/// Time advantage of a pedestrian; +infinity for a stopped vehicle.
double pedestrian_time_advantage(double R, double v, const VisiblePedestrian& p,
                                 TtcConvention convention = TtcConvention::kRangeOverSpeed);

/// Index of the pedestrian with minimal time advantage, ties to the earlier
/// arrival, then the lower id.
std::optional<size_t> governing_pedestrian(double R, double v, std::span<const VisiblePedestrian> peds,
                                           TtcConvention convention = TtcConvention::kRangeOverSpeed);

// --- Soft-Yield ------------------------------------------------------------

struct SoftYieldCoefficients {
  double p1 = 0.0169;
  double p2 = -0.13986;
  double p3 = 0.010115;
  friend bool operator==(const SoftYieldCoefficients&, const SoftYieldCoefficients&) = default;
};

struct SoftYieldPlan {
  double acceleration = 0.0;  ///< m/s^2 during the deceleration phase
  double t1 = 0.0;            ///< deceleration duration, s (may be negative: coast at once)
  bool feasible = true;       ///< false when the T1 radicand is negative or a == 0
};

/// a = p1 + p2 v + p3 R, t_L = crossing_length / v_p,
/// T1 = t_L - sqrt(t_L^2 - 2 (R - v t_L) / a).
SoftYieldPlan soft_yield_decide(const SoftYieldCoefficients& coeffs, double v, double R, double v_p,
                                double crossing_length);

/// Constant deceleration reaching v = 0 exactly at the crossing line.
SoftYieldPlan full_stop_plan(double v, double R);

/// Committed acceleration while t_since_decision < T1, then 0 (coast).
StrategyDecision soft_yield_step(const SoftYieldPlan& plan, double t_since_decision);

struct SoftYieldParams {
  SoftYieldCoefficients coefficients;
  double free_flow_speed = 5.0;        ///< v0
  double recovery_acceleration = 1.0;  ///< a0, used once every pedestrian is clear
};

class SoftYieldStrategy final : public DrivingStrategy {
 public:
  explicit SoftYieldStrategy(SoftYieldParams params,
                             TtcConvention convention = TtcConvention::kRangeOverSpeed);
  StrategyDecision step(const StrategyInput& input) override;
  std::string_view name() const override { return "soft-yield"; }

  const std::optional<SoftYieldPlan>& plan() const { return plan_; }
  int decisions() const { return decisions_; }

 private:
  SoftYieldParams params_;
  TtcConvention convention_;
  std::optional<SoftYieldPlan> plan_;
  int plan_pedestrian_ = -1;
  double decision_time_ = 0.0;
  int decisions_ = 0;
};

// --- Human driver ----------------------------------------------------------

struct HumanDriverParams {
  std::shared_ptr<const GaussianMixture> model;  ///< 4-D interaction model
  double update_interval = 1.0;                  ///< delta t, s
  double max_acceleration = 4.0;                 ///< a_m, m/s^2
  double recovery_acceleration = 1.0;            ///< a0, m/s^2
  double free_flow_speed = 5.0;                  ///< v0, m/s
  double speed_search_max = 25.0;                ///< upper end of the desired-speed search, m/s
  bool condition_on_time_advantage = true;

  void validate() const;
};

/// Most probable vehicle speed given the pedestrian state, or nullopt when the
/// conditional cannot be formed.
std::optional<double> human_desired_speed(const HumanDriverParams& params,
                                          const GaussianMixture* range_walk_speed_marginal, double R,
                                          double v, const VisiblePedestrian& pedestrian,
                                          TtcConvention convention = TtcConvention::kRangeOverSpeed);

class HumanDriverStrategy final : public DrivingStrategy {
 public:
  explicit HumanDriverStrategy(HumanDriverParams params,
                               TtcConvention convention = TtcConvention::kRangeOverSpeed);
  StrategyDecision step(const StrategyInput& input) override;
  std::string_view name() const override { return "human"; }

 private:
  HumanDriverParams params_;
  TtcConvention convention_;
  std::optional<GaussianMixture> marginal_;  // (inv_R, v, v_p) when T_adv is not conditioned on
  bool pending_update_ = true;
  double last_update_ = 0.0;
  StrategyDecision last_command_;
};

/// One call of the human-driver rule; `strategy` carries the update clock.
StrategyDecision human_driver_step(HumanDriverStrategy& strategy, const StrategyInput& input);

/// Accelerates at a0 (capped at a_max) toward v0, then holds.
double recovery_command(double v, double v0, double a0, double a_max);

}  // namespace crossing
