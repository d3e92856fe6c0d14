#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "crossing/normal_math.hpp"

namespace crossing {

/// A row is outside the truncation box, or the box itself is malformed.
class TruncationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A covariance (or a conditioning block of one) is not positive definite.
class SingularCovarianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GaussianComponent {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Axis-aligned support box. Infinite entries mean unbounded.
class TruncationBox {
 public:
  TruncationBox(Eigen::VectorXd lower, Eigen::VectorXd upper);

  static TruncationBox positive_orthant(int dim);
  static TruncationBox unbounded(int dim);

  int dim() const { return static_cast<int>(lower_.size()); }
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }

  bool contains(const Eigen::Ref<const Eigen::VectorXd>& y) const;
  bool is_unbounded() const;
  TruncationBox slice(std::span<const int> dims) const;

  friend bool operator==(const TruncationBox&, const TruncationBox&) = default;

 private:
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
};

/// Finite Gaussian mixture, optionally truncated to a box and renormalized
/// there as a whole. Immutable after construction.
class GaussianMixture {
 public:
  /// Weights must be nonnegative and sum to 1 within 1e-9; sums further than
  /// 1e-12 from 1 are renormalized. `mass_options` sets the lattice used for
  /// the component box masses.
  GaussianMixture(Eigen::VectorXd weights, std::vector<GaussianComponent> components,
                  std::optional<TruncationBox> truncation = std::nullopt,
                  std::uint64_t fit_seed = 0, const normal::BoxProbabilityOptions& mass_options = {});

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(components_.size()); }
  const Eigen::VectorXd& weights() const { return weights_; }
  const std::vector<GaussianComponent>& components() const { return components_; }
  const GaussianComponent& component(int k) const { return components_[k]; }
  const std::optional<TruncationBox>& truncation() const { return truncation_; }
  std::uint64_t fit_seed() const { return fit_seed_; }

  /// Probability mass of each untruncated component inside the box.
  const Eigen::VectorXd& component_masses() const { return masses_; }
  /// Normalizer sum_k pi_k * mass_k (1 when untruncated).
  double box_mass() const { return box_mass_; }

  double density(const Eigen::Ref<const Eigen::VectorXd>& y) const;
  /// -infinity outside the box.
  double log_density(const Eigen::Ref<const Eigen::VectorXd>& y) const;
  /// log sum_k pi_k f_k(y), ignoring truncation.
  double untruncated_log_density(const Eigen::Ref<const Eigen::VectorXd>& y) const;
  double component_log_density(int k, const Eigen::Ref<const Eigen::VectorXd>& y) const;

  GaussianMixture without_truncation() const;

 private:
  void check_dim(const Eigen::Ref<const Eigen::VectorXd>& y) const;

  int dim_ = 0;
  Eigen::VectorXd weights_;
  std::vector<GaussianComponent> components_;
  std::optional<TruncationBox> truncation_;
  std::uint64_t fit_seed_ = 0;

  std::vector<Eigen::MatrixXd> chol_;  // lower Cholesky factors
  Eigen::VectorXd log_norm_;           // -0.5 log det(2 pi Sigma_k)
  Eigen::VectorXd masses_;
  double box_mass_ = 1.0;
};

bool is_positive_definite(const Eigen::MatrixXd& m);

/// Sum of log densities over rows. Throws TruncationError for a row outside
/// the box of a truncated model.
double log_likelihood(const GaussianMixture& model, const Eigen::MatrixXd& data);

/// (K-1) + K d + K d (d+1) / 2
int free_parameter_count(int components, int dim);

/// -2 log L + p ln n.
double bic(const GaussianMixture& model, const Eigen::MatrixXd& data);

GaussianMixture marginalize(const GaussianMixture& model, std::span<const int> keep_dims);

/// Mixture over the complementary (free) dimensions given the observed ones.
/// Component weights are reweighted by the untruncated marginal density of the
/// observed values; a truncated input yields a result truncated to the sliced box.
GaussianMixture condition(const GaussianMixture& model, std::span<const int> observed_dims,
                          const Eigen::Ref<const Eigen::VectorXd>& observed_values);

/// count x d matrix of draws. Truncated models are rejection-sampled into the box.
Eigen::MatrixXd sample(const GaussianMixture& model, Eigen::Index count, std::uint64_t seed);

struct SearchInterval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Highest-density point of a 1-D mixture over the interval: dense grid scan
/// then golden-section refinement around the best grid point. Ties resolve to
/// the lower value.
double conditional_mode(const GaussianMixture& model, SearchInterval interval,
                        int grid_points = 2048);

// ---------------------------------------------------------------------------
// Truncated moments

enum class MomentMethod {
  kAuto,        ///< closed form for d = 1 or diagonal covariance, Monte Carlo otherwise
  kMonteCarlo,  ///< always sample
};

struct MomentOptions {
  MomentMethod method = MomentMethod::kAuto;
  int draws = 20000;  ///< accepted Monte Carlo draws
  std::uint64_t seed = 0;
  std::optional<double> known_mass;  ///< box mass of the component, when already computed
};

struct TruncatedMoments {
  double mass = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Mass, mean and covariance of one Gaussian restricted to the box. Throws
/// TruncationError when the mass is below 1e-300.
TruncatedMoments truncated_moments(const GaussianComponent& component, const TruncationBox& box,
                                   const MomentOptions& options = {});

// ---------------------------------------------------------------------------
// Fitting

enum class TruncationMode { kNone, kTruncated };

struct FitConfig {
  int components = 1;
  int max_iterations = 500;
  /// Convergence when the per-observation log-likelihood gain drops below this.
  double loglik_tolerance = 1e-8;
  int restarts = 1;
  double covariance_floor = 1e-6;
  std::uint64_t seed = 0;
  TruncationMode truncation_mode = TruncationMode::kNone;
  /// Box used in truncated mode; the positive orthant when unset.
  std::optional<TruncationBox> box;
  int moment_draws = 20000;

  void validate() const;
};

struct FitDiagnostics {
  int iterations = 0;
  double log_likelihood = 0.0;
  bool converged = false;
  int restart = 0;
  int reinitializations = 0;
  std::vector<double> log_likelihood_trace;  ///< after initialization, then each iteration
};

struct FitResult {
  GaussianMixture model;
  FitDiagnostics diagnostics;
};

FitResult em_fit(const Eigen::MatrixXd& data, const FitConfig& config);

struct BicPoint {
  int components = 0;
  double bic = 0.0;
  /// (BIC_prev - BIC) / (BIC_first - BIC_min); NaN for the first fitted K.
  double change_rate = 0.0;
};

struct ComponentSelection {
  int selected = 0;
  std::vector<BicPoint> curve;
  std::vector<std::pair<int, std::string>> failures;
  std::optional<FitResult> selected_fit;
};

/// Fits every K in k_range and selects the last K before the normalized BIC
/// improvement first drops below rate_threshold (argmin BIC when none does,
/// or when rate_threshold <= 0).
ComponentSelection select_components(const Eigen::MatrixXd& data, std::span<const int> k_range,
                                     const FitConfig& config, double rate_threshold = 0.10);

}  // namespace crossing
