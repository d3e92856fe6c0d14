#include "crossing/agents.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

namespace crossing {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Dimensions of the (inv_R, v, v_p) marginal.
constexpr std::array<int, 3> kRangeSpeedWalk = {kInvRange, kSpeed, kWalkSpeed};
constexpr std::array<int, 2> kRangeWalk = {kInvRange, kWalkSpeed};
constexpr std::array<int, 1> kWalk = {kWalkSpeed};

void require_four_dims(const GaussianMixture& model, const char* what) {
  if (model.dim() != kObservationDim) {
    throw std::invalid_argument(std::string(what) + ": interaction model must be 4-dimensional");
  }
}

const GaussianMixture& checked(const GaussianMixture& model) {
  require_four_dims(model, "WalkSpeedModel");
  return model;
}

}  // namespace

// ---------------------------------------------------------------------------
// Arrivals

ArrivalSchedule sample_arrivals(double lambda, double horizon, std::uint64_t seed) {
  if (!(lambda >= 0.0) || !(horizon > 0.0)) {
    throw std::invalid_argument("sample_arrivals: need lambda >= 0 and horizon > 0");
  }
  ArrivalSchedule schedule;
  if (lambda == 0.0) return schedule;
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(lambda);
  std::bernoulli_distribution coin(0.5);
  double t = 0.0;
  while (true) {
    t += gap(rng);
    if (!(t < horizon)) break;
    if (!schedule.times.empty() && !(t > schedule.times.back())) continue;
    schedule.times.push_back(t);
    schedule.sides.push_back(coin(rng) ? Side::kFar : Side::kNear);
  }
  return schedule;
}

ArrivalSchedule fixed_count_arrivals(int count, double window, std::uint64_t seed) {
  if (count < 0 || !(window >= 0.0)) {
    throw std::invalid_argument("fixed_count_arrivals: need count >= 0 and window >= 0");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::vector<std::pair<double, Side>> draws;
  for (int i = 0; i < count; ++i) {
    const double t = unif(rng) * window;
    draws.emplace_back(t, coin(rng) ? Side::kFar : Side::kNear);
  }
  std::sort(draws.begin(), draws.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  ArrivalSchedule schedule;
  for (const auto& [t, side] : draws) {
    // Coincident draws are nudged apart to keep the schedule strictly ascending.
    const double time = schedule.times.empty() ? t : std::max(t, std::nextafter(schedule.times.back(), kInf));
    schedule.times.push_back(time);
    schedule.sides.push_back(side);
  }
  return schedule;
}

// ---------------------------------------------------------------------------
// Walking speed

WalkSpeedModel::WalkSpeedModel(const GaussianMixture& model, SpeedBounds bounds)
    : bounds_(bounds),
      range_speed_walk_(marginalize(checked(model), kRangeSpeedWalk)),
      range_walk_(marginalize(model, kRangeWalk)),
      walk_(marginalize(model, kWalk)) {
  if (!(bounds_.lower > 0.0) || !(bounds_.lower < bounds_.upper)) {
    throw std::invalid_argument("WalkSpeedModel: need 0 < lower < upper speed bounds");
  }
}

double WalkSpeedModel::draw(const GaussianMixture& one_dim, std::uint64_t seed) const {
  const double value = sample(one_dim, 1, seed)(0, 0);
  return std::clamp(value, bounds_.lower, bounds_.upper);
}

WalkSpeedDecision WalkSpeedModel::unconditional(std::uint64_t seed) const {
  return {draw(walk_, seed), false};
}

WalkSpeedDecision WalkSpeedModel::decide(double vehicle_R, double vehicle_v, std::uint64_t seed) const {
  if (!(vehicle_R > 0.0) || !std::isfinite(vehicle_R)) return unconditional(seed);
  try {
    if (vehicle_v > 0.0) {
      const std::array<int, 2> observed = {0, 1};
      const Eigen::Vector2d values(1.0 / vehicle_R, vehicle_v);
      return {draw(condition(range_speed_walk_, observed, values), seed), false};
    }
    const std::array<int, 1> observed = {0};
    Eigen::VectorXd values(1);
    values[0] = 1.0 / vehicle_R;
    return {draw(condition(range_walk_, observed, values), seed), false};
  } catch (const std::exception&) {
    return {draw(walk_, seed), true};
  }
}

WalkSpeedDecision decide_walk_speed(const GaussianMixture& model, double vehicle_R, double vehicle_v,
                                    std::uint64_t seed, SpeedBounds bounds) {
  return WalkSpeedModel(model, bounds).decide(vehicle_R, vehicle_v, seed);
}

// ---------------------------------------------------------------------------
// Shared strategy helpers

double pedestrian_time_advantage(double R, double v, const VisiblePedestrian& p,
                                 TtcConvention convention) {
  if (!(v > 0.0)) return kInf;
  return time_advantage({R, p.to_path_line, v, p.walk_speed}, convention);
}

std::optional<size_t> governing_pedestrian(double R, double v, std::span<const VisiblePedestrian> peds,
                                           TtcConvention convention) {
  std::optional<size_t> best;
  double best_adv = kInf;
  for (size_t i = 0; i < peds.size(); ++i) {
    const double adv = pedestrian_time_advantage(R, v, peds[i], convention);
    if (!best) {
      best = i;
      best_adv = adv;
      continue;
    }
    const auto& cur = peds[*best];
    const bool better = adv < best_adv ||
                        (adv == best_adv && (peds[i].arrival_time < cur.arrival_time ||
                                             (peds[i].arrival_time == cur.arrival_time && peds[i].id < cur.id)));
    if (better) {
      best = i;
      best_adv = adv;
    }
  }
  return best;
}

double recovery_command(double v, double v0, double a0, double a_max) {
  return v < v0 ? std::min(a0, a_max) : 0.0;
}

// ---------------------------------------------------------------------------
// Soft-Yield

SoftYieldPlan soft_yield_decide(const SoftYieldCoefficients& coeffs, double v, double R, double v_p,
                                double crossing_length) {
  if (!(v > 0.0) || !(R > 0.0) || !(v_p > 0.0) || !(crossing_length >= 0.0)) {
    throw std::invalid_argument("soft_yield_decide: need v > 0, R > 0, v_p > 0");
  }
  SoftYieldPlan plan;
  plan.acceleration = coeffs.p1 + coeffs.p2 * v + coeffs.p3 * R;
  const double t_l = crossing_length / v_p;
  if (plan.acceleration == 0.0) {
    plan.feasible = false;
    plan.t1 = std::numeric_limits<double>::quiet_NaN();
    return plan;
  }
  const double radicand = t_l * t_l - 2.0 * (R - v * t_l) / plan.acceleration;
  if (radicand < 0.0) {
    plan.feasible = false;
    plan.t1 = std::numeric_limits<double>::quiet_NaN();
    return plan;
  }
  plan.t1 = t_l - std::sqrt(radicand);
  return plan;
}

SoftYieldPlan full_stop_plan(double v, double R) {
  if (!(v > 0.0) || !(R > 0.0)) throw std::invalid_argument("full_stop_plan: need v > 0, R > 0");
  return {-v * v / (2.0 * R), 2.0 * R / v, true};
}

StrategyDecision soft_yield_step(const SoftYieldPlan& plan, double t_since_decision) {
  return {t_since_decision < plan.t1 ? plan.acceleration : 0.0, false};
}

SoftYieldStrategy::SoftYieldStrategy(SoftYieldParams params, TtcConvention convention)
    : params_(params), convention_(convention) {}

StrategyDecision SoftYieldStrategy::step(const StrategyInput& in) {
  const auto gov = in.R > 0.0 ? governing_pedestrian(in.R, in.v, in.pedestrians, convention_) : std::nullopt;
  if (!gov) {
    plan_.reset();
    plan_pedestrian_ = -1;
    return {recovery_command(in.v, params_.free_flow_speed, params_.recovery_acceleration, kInf), false};
  }
  const VisiblePedestrian& target = in.pedestrians[*gov];

  bool decide = !plan_;
  if (plan_ && target.id != plan_pedestrian_) {
    const bool previous_present =
        std::any_of(in.pedestrians.begin(), in.pedestrians.end(),
                    [&](const VisiblePedestrian& p) { return p.id == plan_pedestrian_; });
    const bool within_t1 = in.t - decision_time_ < plan_->t1;
    decide = !previous_present || within_t1;
  }
  if (decide) {
    if (!(in.v > 0.0)) return {0.0, false};  // stopped: wait for the crossing to clear
    SoftYieldPlan plan =
        soft_yield_decide(params_.coefficients, in.v, in.R, target.walk_speed, target.crossing_remaining);
    const bool fallback = !plan.feasible;
    if (fallback) plan = full_stop_plan(in.v, in.R);
    plan_ = plan;
    plan_pedestrian_ = target.id;
    decision_time_ = in.t;
    ++decisions_;
    StrategyDecision out = soft_yield_step(*plan_, 0.0);
    out.flagged = fallback;
    return out;
  }
  return soft_yield_step(*plan_, in.t - decision_time_);
}

// ---------------------------------------------------------------------------
// Human driver

void HumanDriverParams::validate() const {
  if (!model) throw std::invalid_argument("HumanDriverParams: model missing");
  require_four_dims(*model, "HumanDriverParams");
  if (!(update_interval > 0.0) || !(max_acceleration > 0.0) || !(recovery_acceleration > 0.0) ||
      !(free_flow_speed > 0.0) || !(speed_search_max > 0.0)) {
    throw std::invalid_argument("HumanDriverParams: intervals, accelerations and speeds must be positive");
  }
}

std::optional<double> human_desired_speed(const HumanDriverParams& params,
                                          const GaussianMixture* range_walk_speed_marginal, double R,
                                          double v, const VisiblePedestrian& pedestrian,
                                          TtcConvention convention) {
  if (!(R > 0.0) || !(pedestrian.walk_speed > 0.0)) return std::nullopt;
  try {
    GaussianMixture free_speed = [&] {
      if (params.condition_on_time_advantage) {
        // A stopped vehicle has infinite time to collision: 1/T_adv -> 0.
        const double t_adv = pedestrian_time_advantage(R, v, pedestrian, convention);
        if (!(t_adv > 0.0)) throw std::domain_error("zero time advantage");
        const std::array<int, 3> observed = {kInvRange, kWalkSpeed, kInvTimeAdvantage};
        const Eigen::Vector3d values(1.0 / R, pedestrian.walk_speed, std::isinf(t_adv) ? 0.0 : 1.0 / t_adv);
        return condition(*params.model, observed, values);
      }
      const std::array<int, 2> observed = {0, 2};  // inv_R, v_p within (inv_R, v, v_p)
      const Eigen::Vector2d values(1.0 / R, pedestrian.walk_speed);
      return condition(*range_walk_speed_marginal, observed, values);
    }();
    return conditional_mode(free_speed, {0.0, params.speed_search_max});
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

HumanDriverStrategy::HumanDriverStrategy(HumanDriverParams params, TtcConvention convention)
    : params_(std::move(params)), convention_(convention) {
  params_.validate();
  if (!params_.condition_on_time_advantage) marginal_.emplace(marginalize(*params_.model, kRangeSpeedWalk));
}

StrategyDecision HumanDriverStrategy::step(const StrategyInput& in) {
  const auto gov = in.R > 0.0 ? governing_pedestrian(in.R, in.v, in.pedestrians, convention_) : std::nullopt;
  if (!gov) {
    pending_update_ = true;
    return {recovery_command(in.v, params_.free_flow_speed, params_.recovery_acceleration,
                             params_.max_acceleration),
            false};
  }
  // Small slack keeps accumulated step times from skipping an update.
  if (pending_update_ || in.t - last_update_ >= params_.update_interval - 1e-9) {
    const auto desired = human_desired_speed(params_, marginal_ ? &*marginal_ : nullptr, in.R, in.v,
                                             in.pedestrians[*gov], convention_);
    if (desired) {
      const double a_d = (*desired - in.v) / params_.update_interval;
      last_command_ = {std::clamp(a_d, -params_.max_acceleration, params_.max_acceleration), false};
    } else {
      last_command_ = {0.0, true};
    }
    last_update_ = in.t;
    pending_update_ = false;
  }
  return last_command_;
}

StrategyDecision human_driver_step(HumanDriverStrategy& strategy, const StrategyInput& input) {
  return strategy.step(input);
}

}  // namespace crossing
