#include "crossing/scenario.hpp"

#include <cmath>
#include <string>

namespace crossing {

int observation_index(std::string_view name) {
  for (int i = 0; i < kObservationDim; ++i) {
    if (kObservationNames[i] == name) return i;
  }
  return -1;
}

ObservationVector ObservationVector::from_vector(const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (y.size() != kObservationDim) {
    throw std::invalid_argument("observation vector must have 4 entries, got " +
                                std::to_string(y.size()));
  }
  return {y[0], y[1], y[2], y[3]};
}

double time_to_collision(const Kinematics& k, TtcConvention convention) {
  switch (convention) {
    case TtcConvention::kRangeOverSpeed:
      if (k.v == 0.0) throw ZeroSpeedError("time to collision undefined for a stopped vehicle");
      return k.R / k.v;
  }
  throw std::invalid_argument("unknown TTC convention");
}

double time_advantage(const Kinematics& k, TtcConvention convention) {
  if (k.v_p == 0.0) throw ZeroSpeedError("time advantage undefined for a standing pedestrian");
  const double ttc = time_to_collision(k, convention);
  return std::abs(ttc - k.L / k.v_p);
}

ObservationVector to_observation(const Kinematics& k, TtcConvention convention) {
  if (!(k.R > 0.0) || !(k.v > 0.0) || !(k.v_p > 0.0) || !(k.L >= 0.0)) {
    throw std::invalid_argument("observation requires R > 0, v > 0, v_p > 0 and L >= 0");
  }
  const double t_adv = time_advantage(k, convention);
  if (!(t_adv > 0.0)) throw std::invalid_argument("observation undefined for zero time advantage");
  ObservationVector y{1.0 / k.R, k.v, k.v_p, 1.0 / t_adv};
  if (!std::isfinite(y.inv_R) || !std::isfinite(y.inv_T_adv)) {
    throw std::invalid_argument("observation is not finite");
  }
  return y;
}

RecoveredState from_observation(const ObservationVector& y) {
  return {1.0 / y.inv_R, y.v, y.v_p, 1.0 / y.inv_T_adv};
}

}  // namespace crossing
