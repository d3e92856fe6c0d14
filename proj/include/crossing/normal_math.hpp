#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace crossing::normal {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double pdf(double x);
double cdf(double x);
/// Upper tail 1 - cdf(x), accurate for large x.
double survival(double x);
double quantile(double p);

/// P(lower <= X <= upper) for X ~ N(mean, variance). Infinite bounds allowed.
double interval_probability(double mean, double variance, double lower, double upper);

struct BoxProbabilityOptions {
  int points_per_shift = 2048;
  int shifts = 8;
  std::uint64_t seed = 0x5eed;
};

/// P(lower <= X <= upper) for X ~ N(mean, cov) using the Genz separation-of-
/// variables transform with a randomly shifted rank-1 lattice. Closed form for
/// d = 1 or diagonal covariance.
double box_probability(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                       const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                       const BoxProbabilityOptions& options = {});

/// Mean and variance of N(mean, variance) restricted to [lower, upper].
struct IntervalMoments {
  double mass;
  double mean;
  double variance;
};
IntervalMoments truncated_interval_moments(double mean, double variance, double lower,
                                           double upper);

/// One draw of a standard normal restricted to [alpha, beta] by inversion.
double sample_truncated_standard(double alpha, double beta, std::mt19937_64& rng);

}  // namespace crossing::normal
