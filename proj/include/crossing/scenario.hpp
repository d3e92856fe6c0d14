#pragma once

#include <array>
#include <stdexcept>
#include <string_view>

#include <Eigen/Core>

namespace crossing {

// Geometry: the vehicle travels along a straight line toward a crossing line
// at longitudinal coordinate 0; the pedestrian walks along the crossing line,
// perpendicular to the vehicle path.

/// Instantaneous relative state of one vehicle/pedestrian pair.
struct Kinematics {
  double R = 0.0;    ///< vehicle front to crossing line, m (positive while approaching)
  double L = 0.0;    ///< pedestrian's remaining lateral distance to the vehicle path line, m
  double v = 0.0;    ///< vehicle speed, m/s
  double v_p = 0.0;  ///< pedestrian walking speed, m/s
};

enum class TtcConvention {
  kRangeOverSpeed,  ///< TTC = R / v
};

/// Indices of the four model variables in an observation vector.
enum ObservationIndex : int {
  kInvRange = 0,
  kSpeed = 1,
  kWalkSpeed = 2,
  kInvTimeAdvantage = 3,
};
inline constexpr int kObservationDim = 4;
inline constexpr std::array<std::string_view, kObservationDim> kObservationNames = {
    "inv_R", "v", "v_p", "inv_T_adv"};

/// Returns the variable index for a column name, or -1.
int observation_index(std::string_view name);

struct ObservationVector {
  double inv_R = 0.0;      ///< 1/m
  double v = 0.0;          ///< m/s
  double v_p = 0.0;        ///< m/s
  double inv_T_adv = 0.0;  ///< 1/s

  Eigen::Vector4d as_vector() const { return {inv_R, v, v_p, inv_T_adv}; }
  static ObservationVector from_vector(const Eigen::Ref<const Eigen::VectorXd>& y);
};

/// Thrown when a quantity would require dividing by a zero speed.
class ZeroSpeedError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

double time_to_collision(const Kinematics& k, TtcConvention convention = TtcConvention::kRangeOverSpeed);

/// Time advantage |TTC - L/v_p|. Throws ZeroSpeedError when v or v_p is zero.
double time_advantage(const Kinematics& k, TtcConvention convention = TtcConvention::kRangeOverSpeed);

/// Maps accepted kinematics to (1/R, v, v_p, 1/T_adv). Throws
/// std::invalid_argument when R, v or v_p is nonpositive or T_adv is zero.
ObservationVector to_observation(const Kinematics& k,
                                 TtcConvention convention = TtcConvention::kRangeOverSpeed);

/// State recovered from an observation; L is not identifiable from it.
struct RecoveredState {
  double R = 0.0;
  double v = 0.0;
  double v_p = 0.0;
  double T_adv = 0.0;
};

RecoveredState from_observation(const ObservationVector& y);

}  // namespace crossing
