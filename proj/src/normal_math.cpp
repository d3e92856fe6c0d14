#include "crossing/normal_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <boost/math/special_functions/erf.hpp>

namespace crossing::normal {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInf = std::numeric_limits<double>::infinity();

// x * pdf(x) with the convention 0 at +-infinity.
double x_pdf(double x) { return std::isinf(x) ? 0.0 : x * pdf(x); }

bool is_diagonal(const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (i != j && m(i, j) != 0.0) return false;
  return true;
}

}  // namespace

double pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }

double cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double survival(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

double quantile(double p) {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

double interval_probability(double mean, double variance, double lower, double upper) {
  const double sd = std::sqrt(variance);
  const double a = (lower - mean) / sd;
  const double b = (upper - mean) / sd;
  if (!(a < b)) return 0.0;
  // Work in whichever tail keeps the difference well conditioned.
  if (a > 0.0) return survival(a) - survival(b);
  return cdf(b) - cdf(a);
}

double box_probability(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                       const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                       const BoxProbabilityOptions& options) {
  const Eigen::Index d = mean.size();
  if (cov.rows() != d || cov.cols() != d || lower.size() != d || upper.size() != d) {
    throw std::invalid_argument("box_probability: dimension mismatch");
  }
  if (d == 0) return 1.0;
  if (d == 1 || is_diagonal(cov)) {
    double p = 1.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      p *= interval_probability(mean[i], cov(i, i), lower[i], upper[i]);
    }
    return p;
  }

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("box_probability: covariance not positive definite");
  }
  const Eigen::MatrixXd chol = llt.matrixL();
  const Eigen::VectorXd a = lower - mean;
  const Eigen::VectorXd b = upper - mean;

  static constexpr double kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47};
  const Eigen::Index lattice_dims = d - 1;
  if (lattice_dims > static_cast<Eigen::Index>(std::size(kPrimes))) {
    throw std::invalid_argument("box_probability: dimension too large");
  }
  Eigen::VectorXd generator(lattice_dims);
  for (Eigen::Index j = 0; j < lattice_dims; ++j) generator[j] = std::sqrt(kPrimes[j]);

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd shift(lattice_dims);
  Eigen::VectorXd y(d);

  double total = 0.0;
  for (int s = 0; s < options.shifts; ++s) {
    for (Eigen::Index j = 0; j < lattice_dims; ++j) shift[j] = unif(rng);
    double shift_sum = 0.0;
    for (int n = 1; n <= options.points_per_shift; ++n) {
      double lo = cdf(a[0] / chol(0, 0));
      double hi = cdf(b[0] / chol(0, 0));
      double f = hi - lo;
      for (Eigen::Index i = 1; i < d && f > 0.0; ++i) {
        double w = std::fmod(n * generator[i - 1] + shift[i - 1], 1.0);
        w = std::abs(2.0 * w - 1.0);  // baker's transform
        const double p = std::clamp(lo + w * (hi - lo), 1e-300, 1.0 - 1e-16);
        y[i - 1] = quantile(p);
        double partial = 0.0;
        for (Eigen::Index j = 0; j < i; ++j) partial += chol(i, j) * y[j];
        lo = cdf((a[i] - partial) / chol(i, i));
        hi = cdf((b[i] - partial) / chol(i, i));
        f *= std::max(hi - lo, 0.0);
      }
      shift_sum += f;
    }
    total += shift_sum / options.points_per_shift;
  }
  return std::clamp(total / options.shifts, 0.0, 1.0);
}

IntervalMoments truncated_interval_moments(double mean, double variance, double lower,
                                           double upper) {
  const double sd = std::sqrt(variance);
  const double alpha = (lower - mean) / sd;
  const double beta = (upper - mean) / sd;
  const double mass = interval_probability(mean, variance, lower, upper);
  if (!(mass > 0.0)) return {0.0, mean, variance};
  const double pa = std::isinf(alpha) ? 0.0 : pdf(alpha);
  const double pb = std::isinf(beta) ? 0.0 : pdf(beta);
  const double ratio = (pa - pb) / mass;
  const double m = mean + sd * ratio;
  const double v = variance * (1.0 + (x_pdf(alpha) - x_pdf(beta)) / mass - ratio * ratio);
  return {mass, m, v};
}

double sample_truncated_standard(double alpha, double beta, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (beta <= 0.0 && !(alpha >= 0.0)) {
    return -sample_truncated_standard(-beta, -alpha, rng);
  }
  if (alpha >= 0.0) {
    const double qa = survival(alpha);
    const double qb = survival(beta);
    if (!(qa > qb)) return alpha;
    const double u = qb + unif(rng) * (qa - qb);
    if (u <= 0.0) return alpha;
    return std::clamp(std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u), alpha, beta);
  }
  const double pa = cdf(alpha);
  const double pb = cdf(beta);
  const double u = pa + unif(rng) * (pb - pa);
  return std::clamp(quantile(u), alpha, beta);
}

}  // namespace crossing::normal
