#include "crossing/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>

#include "crossing/normal_math.hpp"

namespace crossing {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(const Eigen::VectorXd& terms) {
  const double peak = terms.maxCoeff();
  if (!std::isfinite(peak)) return peak;
  return peak + std::log((terms.array() - peak).exp().sum());
}

Eigen::VectorXd draw_standard(Eigen::Index d, std::mt19937_64& rng,
                              std::normal_distribution<double>& normal) {
  Eigen::VectorXd z(d);
  for (Eigen::Index i = 0; i < d; ++i) z[i] = normal(rng);
  return z;
}

bool is_diagonal(const Eigen::MatrixXd& m) {
  return (m - Eigen::MatrixXd(m.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
}

std::vector<int> complement(std::span<const int> dims, int d) {
  std::vector<int> out;
  for (int i = 0; i < d; ++i) {
    if (std::find(dims.begin(), dims.end(), i) == dims.end()) out.push_back(i);
  }
  return out;
}

void check_dims(std::span<const int> dims, int d, const char* what) {
  if (dims.empty()) throw std::invalid_argument(std::string(what) + ": no dimensions given");
  std::vector<int> sorted(dims.begin(), dims.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument(std::string(what) + ": repeated dimension");
  }
  if (sorted.front() < 0 || sorted.back() >= d) {
    throw std::invalid_argument(std::string(what) + ": dimension out of range");
  }
}

Eigen::VectorXd take(const Eigen::VectorXd& v, std::span<const int> idx) {
  Eigen::VectorXd out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

Eigen::MatrixXd take(const Eigen::MatrixXd& m, std::span<const int> rows, std::span<const int> cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// TruncationBox

TruncationBox::TruncationBox(Eigen::VectorXd lower, Eigen::VectorXd upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size() || lower_.size() == 0) {
    throw TruncationError("truncation box bounds must have the same nonzero length");
  }
  for (Eigen::Index i = 0; i < lower_.size(); ++i) {
    if (std::isnan(lower_[i]) || std::isnan(upper_[i]) || !(lower_[i] < upper_[i])) {
      throw TruncationError("truncation box requires lower < upper in every dimension");
    }
  }
}

TruncationBox TruncationBox::positive_orthant(int dim) {
  return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Constant(dim, kInf)};
}

TruncationBox TruncationBox::unbounded(int dim) {
  return {Eigen::VectorXd::Constant(dim, -kInf), Eigen::VectorXd::Constant(dim, kInf)};
}

bool TruncationBox::contains(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  if (y.size() != lower_.size()) return false;
  return (y.array() >= lower_.array()).all() && (y.array() <= upper_.array()).all();
}

bool TruncationBox::is_unbounded() const {
  return lower_.array().isInf().all() && upper_.array().isInf().all();
}

TruncationBox TruncationBox::slice(std::span<const int> dims) const {
  return {take(lower_, dims), take(upper_, dims)};
}

// ---------------------------------------------------------------------------
// GaussianMixture

bool is_positive_definite(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if (!m.allFinite() || (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * m.cwiseAbs().maxCoeff())
    return false;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

GaussianMixture::GaussianMixture(Eigen::VectorXd weights, std::vector<GaussianComponent> components,
                                 std::optional<TruncationBox> truncation, std::uint64_t fit_seed,
                                 const normal::BoxProbabilityOptions& mass_options)
    : weights_(std::move(weights)),
      components_(std::move(components)),
      truncation_(std::move(truncation)),
      fit_seed_(fit_seed) {
  if (components_.empty()) throw std::invalid_argument("mixture needs at least one component");
  if (weights_.size() != static_cast<Eigen::Index>(components_.size())) {
    throw std::invalid_argument("mixture weight count differs from component count");
  }
  if (!weights_.allFinite() || (weights_.array() < 0.0).any()) {
    throw std::invalid_argument("mixture weights must be finite and nonnegative");
  }
  const double total = weights_.sum();
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("mixture weights must sum to 1");
  }
  if (std::abs(total - 1.0) > 1e-12) weights_ /= total;

  dim_ = static_cast<int>(components_.front().mean.size());
  if (dim_ == 0) throw std::invalid_argument("mixture components must have dimension >= 1");
  const int k_count = size();
  chol_.reserve(k_count);
  log_norm_.resize(k_count);
  for (int k = 0; k < k_count; ++k) {
    const auto& c = components_[k];
    if (c.mean.size() != dim_ || c.covariance.rows() != dim_ || c.covariance.cols() != dim_) {
      throw std::invalid_argument("mixture components must share one dimension");
    }
    if (!c.mean.allFinite()) throw std::invalid_argument("component mean is not finite");
    if (!is_positive_definite(c.covariance)) {
      throw SingularCovarianceError("component " + std::to_string(k) +
                                    " covariance is not symmetric positive definite");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
    Eigen::MatrixXd factor = llt.matrixL();
    log_norm_[k] = -dim_ * normal::kLogSqrt2Pi - factor.diagonal().array().log().sum();
    chol_.push_back(std::move(factor));
  }

  masses_ = Eigen::VectorXd::Ones(k_count);
  if (truncation_) {
    if (truncation_->dim() != dim_) throw TruncationError("truncation box dimension mismatch");
    if (truncation_->is_unbounded()) {
      truncation_.reset();
    } else {
      for (int k = 0; k < k_count; ++k) {
        masses_[k] = normal::box_probability(components_[k].mean, components_[k].covariance,
                                             truncation_->lower(), truncation_->upper(), mass_options);
      }
      box_mass_ = weights_.dot(masses_);
      if (!(box_mass_ > 1e-300)) {
        throw TruncationError("mixture has no probability mass inside its truncation box");
      }
    }
  }
}

void GaussianMixture::check_dim(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  if (y.size() != dim_) {
    throw std::invalid_argument("point dimension " + std::to_string(y.size()) +
                                " differs from mixture dimension " + std::to_string(dim_));
  }
}

double GaussianMixture::component_log_density(int k, const Eigen::Ref<const Eigen::VectorXd>& y) const {
  check_dim(y);
  const Eigen::VectorXd z =
      chol_[k].triangularView<Eigen::Lower>().solve(y - components_[k].mean);
  return log_norm_[k] - 0.5 * z.squaredNorm();
}

double GaussianMixture::untruncated_log_density(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  Eigen::VectorXd terms(size());
  for (int k = 0; k < size(); ++k) {
    terms[k] = weights_[k] > 0.0 ? std::log(weights_[k]) + component_log_density(k, y) : -kInf;
  }
  return log_sum_exp(terms);
}

double GaussianMixture::log_density(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  check_dim(y);
  if (truncation_) {
    if (!truncation_->contains(y)) return -kInf;
    return untruncated_log_density(y) - std::log(box_mass_);
  }
  return untruncated_log_density(y);
}

double GaussianMixture::density(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  return std::exp(log_density(y));
}

GaussianMixture GaussianMixture::without_truncation() const {
  return GaussianMixture(weights_, components_, std::nullopt, fit_seed_);
}

// ---------------------------------------------------------------------------
// Likelihood and BIC

double log_likelihood(const GaussianMixture& model, const Eigen::MatrixXd& data) {
  if (data.rows() > 0 && data.cols() != model.dim()) {
    throw std::invalid_argument("data has " + std::to_string(data.cols()) +
                                " columns, mixture dimension is " + std::to_string(model.dim()));
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const Eigen::VectorXd row = data.row(i).transpose();
    const double value = model.log_density(row);
    if (value == -kInf && model.truncation() && !model.truncation()->contains(row)) {
      throw TruncationError("row " + std::to_string(i) + " lies outside the truncation box");
    }
    total += value;
  }
  return total;
}

int free_parameter_count(int components, int dim) {
  return (components - 1) + components * dim + components * dim * (dim + 1) / 2;
}

double bic(const GaussianMixture& model, const Eigen::MatrixXd& data) {
  if (data.rows() == 0) throw std::invalid_argument("BIC undefined for empty data");
  const double p = free_parameter_count(model.size(), model.dim());
  return -2.0 * log_likelihood(model, data) + p * std::log(static_cast<double>(data.rows()));
}

// ---------------------------------------------------------------------------
// Marginalization and conditioning

GaussianMixture marginalize(const GaussianMixture& model, std::span<const int> keep_dims) {
  check_dims(keep_dims, model.dim(), "marginalize");
  std::vector<GaussianComponent> parts;
  parts.reserve(model.size());
  for (const auto& c : model.components()) {
    parts.push_back({take(c.mean, keep_dims), take(c.covariance, keep_dims, keep_dims)});
  }
  std::optional<TruncationBox> box;
  if (model.truncation()) box = model.truncation()->slice(keep_dims);
  return GaussianMixture(model.weights(), std::move(parts), std::move(box), model.fit_seed());
}

GaussianMixture condition(const GaussianMixture& model, std::span<const int> observed_dims,
                          const Eigen::Ref<const Eigen::VectorXd>& observed_values) {
  check_dims(observed_dims, model.dim(), "condition");
  if (static_cast<int>(observed_dims.size()) >= model.dim()) {
    throw std::invalid_argument("condition: at least one dimension must stay free");
  }
  if (observed_values.size() != static_cast<Eigen::Index>(observed_dims.size())) {
    throw std::invalid_argument("condition: one observed value per observed dimension required");
  }
  if (!observed_values.allFinite()) throw std::invalid_argument("condition: observed value not finite");
  if (model.truncation() && !model.truncation()->slice(observed_dims).contains(observed_values)) {
    throw TruncationError("condition: observed value outside the truncation box");
  }
  const std::vector<int> free_dims = complement(observed_dims, model.dim());

  std::vector<GaussianComponent> parts;
  parts.reserve(model.size());
  Eigen::VectorXd log_weights(model.size());
  for (int k = 0; k < model.size(); ++k) {
    const auto& c = model.component(k);
    const Eigen::VectorXd mu_m = take(c.mean, free_dims);
    const Eigen::VectorXd mu_o = take(c.mean, observed_dims);
    const Eigen::MatrixXd s_mm = take(c.covariance, free_dims, free_dims);
    const Eigen::MatrixXd s_mo = take(c.covariance, free_dims, observed_dims);
    const Eigen::MatrixXd s_oo = take(c.covariance, observed_dims, observed_dims);
    Eigen::LLT<Eigen::MatrixXd> llt(s_oo);
    if (llt.info() != Eigen::Success) {
      throw SingularCovarianceError("condition: observed block of component " +
                                    std::to_string(k) + " is singular");
    }
    const Eigen::VectorXd diff = observed_values - mu_o;
    const Eigen::VectorXd solved = llt.solve(diff);
    Eigen::MatrixXd cond_cov = s_mm - s_mo * llt.solve(s_mo.transpose());
    cond_cov = 0.5 * (cond_cov + cond_cov.transpose());
    parts.push_back({mu_m + s_mo * solved, std::move(cond_cov)});

    const Eigen::MatrixXd factor = llt.matrixL();
    const double log_marginal = -static_cast<double>(observed_dims.size()) * normal::kLogSqrt2Pi -
                                factor.diagonal().array().log().sum() - 0.5 * diff.dot(solved);
    log_weights[k] =
        model.weights()[k] > 0.0 ? std::log(model.weights()[k]) + log_marginal : -kInf;
  }
  const double norm = log_sum_exp(log_weights);
  if (!std::isfinite(norm)) {
    throw std::domain_error("condition: observed values have zero density under every component");
  }
  Eigen::VectorXd weights = (log_weights.array() - norm).exp();
  weights /= weights.sum();

  std::optional<TruncationBox> box;
  if (model.truncation()) box = model.truncation()->slice(free_dims);
  return GaussianMixture(std::move(weights), std::move(parts), std::move(box), model.fit_seed());
}

// ---------------------------------------------------------------------------
// Sampling

Eigen::MatrixXd sample(const GaussianMixture& model, Eigen::Index count, std::uint64_t seed) {
  if (count < 0) throw std::invalid_argument("sample: negative count");
  const int d = model.dim();
  Eigen::MatrixXd out(count, d);
  if (count == 0) return out;

  constexpr double kMinAcceptance = 1e-6;
  if (model.truncation() && model.box_mass() < kMinAcceptance) {
    throw TruncationError("sample: truncation acceptance rate below 1e-6");
  }

  std::vector<Eigen::MatrixXd> factors;
  for (const auto& c : model.components()) factors.push_back(c.covariance.llt().matrixL());
  std::vector<double> cumulative(model.size());
  double acc = 0.0;
  for (int k = 0; k < model.size(); ++k) cumulative[k] = (acc += model.weights()[k]);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double budget = static_cast<double>(count) / kMinAcceptance + 1e6;
  double attempts = 0.0;
  for (Eigen::Index row = 0; row < count;) {
    if (++attempts > budget) throw TruncationError("sample: rejection budget exhausted");
    const double u = unif(rng) * acc;
    int k = static_cast<int>(std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    k = std::min(k, model.size() - 1);
    const Eigen::VectorXd y = model.component(k).mean + factors[k] * draw_standard(d, rng, normal);
    if (model.truncation() && !model.truncation()->contains(y)) continue;
    out.row(row++) = y.transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mode search

double conditional_mode(const GaussianMixture& model, SearchInterval interval, int grid_points) {
  if (model.dim() != 1) throw std::invalid_argument("conditional_mode: mixture must be 1-D");
  if (!(interval.lower < interval.upper) || !std::isfinite(interval.lower) ||
      !std::isfinite(interval.upper)) {
    throw std::invalid_argument("conditional_mode: empty or unbounded search interval");
  }
  if (grid_points < 3) throw std::invalid_argument("conditional_mode: need at least 3 grid points");

  auto log_f = [&](double x) {
    Eigen::VectorXd y(1);
    y[0] = x;
    return model.log_density(y);
  };
  const double step = (interval.upper - interval.lower) / (grid_points - 1);
  int best = 0;
  double best_value = -kInf;
  for (int i = 0; i < grid_points; ++i) {
    const double x = i + 1 == grid_points ? interval.upper : interval.lower + i * step;
    const double value = log_f(x);
    if (value > best_value) {  // strict: earlier (lower) point wins ties
      best_value = value;
      best = i;
    }
  }
  const double grid_best = best + 1 == grid_points ? interval.upper : interval.lower + best * step;
  if (best_value == -kInf) return grid_best;

  // Golden-section search on the bracket around the best grid point.
  double a = std::max(interval.lower, grid_best - step);
  double b = std::min(interval.upper, grid_best + step);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = log_f(c);
  double fd = log_f(d);
  for (int iter = 0; iter < 200 && b - a > 1e-12 * std::max(1.0, std::abs(grid_best)); ++iter) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = log_f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = log_f(d);
    }
  }
  const double refined = 0.5 * (a + b);
  return log_f(refined) >= best_value ? refined : grid_best;
}

// ---------------------------------------------------------------------------
// Truncated moments

namespace {

TruncatedMoments gibbs_moments(const GaussianComponent& c, const TruncationBox& box, int draws,
                               std::uint64_t seed) {
  const Eigen::Index d = c.mean.size();
  const Eigen::MatrixXd precision = c.covariance.inverse();
  Eigen::VectorXd x = c.mean.cwiseMax(box.lower()).cwiseMin(box.upper());
  std::mt19937_64 rng(seed);
  constexpr int kBurnIn = 200;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(d, d);
  for (int sweep = 0; sweep < kBurnIn + draws; ++sweep) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const double cond_var = 1.0 / precision(i, i);
      double shift = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        if (j != i) shift += precision(i, j) * (x[j] - c.mean[j]);
      }
      const double cond_mean = c.mean[i] - cond_var * shift;
      const double sd = std::sqrt(cond_var);
      x[i] = cond_mean + sd * normal::sample_truncated_standard((box.lower()[i] - cond_mean) / sd,
                                                                (box.upper()[i] - cond_mean) / sd, rng);
    }
    if (sweep >= kBurnIn) {
      sum += x;
      outer += x * x.transpose();
    }
  }
  TruncatedMoments out;
  out.mean = sum / draws;
  out.covariance = outer / draws - out.mean * out.mean.transpose();
  return out;
}

TruncatedMoments rejection_moments(const GaussianComponent& c, const TruncationBox& box, int draws,
                                   std::uint64_t seed, double mass) {
  const Eigen::Index d = c.mean.size();
  const Eigen::MatrixXd factor = c.covariance.llt().matrixL();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd e(d);
  Eigen::VectorXd z(d);
  const double budget = 100.0 * draws / mass + 1e5;
  double attempts = 0.0;
  int accepted = 0;
  // z = L e is built row by row, so a draw is rejected as soon as one
  // coordinate leaves the box. Accumulate about the untruncated mean to
  // limit cancellation.
  while (accepted < draws) {
    if (++attempts > budget) throw TruncationError("truncated_moments: rejection budget exhausted");
    bool inside = true;
    for (Eigen::Index i = 0; i < d && inside; ++i) {
      e[i] = normal(rng);
      double zi = 0.0;
      for (Eigen::Index j = 0; j <= i; ++j) zi += factor(i, j) * e[j];
      z[i] = zi;
      const double y = c.mean[i] + zi;
      inside = y >= box.lower()[i] && y <= box.upper()[i];
    }
    if (!inside) continue;
    sum += z;
    outer.selfadjointView<Eigen::Lower>().rankUpdate(z);
    ++accepted;
  }
  outer = outer.selfadjointView<Eigen::Lower>();
  TruncatedMoments out;
  const Eigen::VectorXd centred = sum / draws;
  out.mean = c.mean + centred;
  out.covariance = outer / draws - centred * centred.transpose();
  return out;
}

}  // namespace

TruncatedMoments truncated_moments(const GaussianComponent& component, const TruncationBox& box,
                                   const MomentOptions& options) {
  const Eigen::Index d = component.mean.size();
  if (box.dim() != d || component.covariance.rows() != d || component.covariance.cols() != d) {
    throw std::invalid_argument("truncated_moments: dimension mismatch");
  }
  if (!is_positive_definite(component.covariance)) {
    throw SingularCovarianceError("truncated_moments: covariance not positive definite");
  }
  if (box.is_unbounded()) return {1.0, component.mean, component.covariance};

  const bool closed_form = options.method == MomentMethod::kAuto &&
                           (d == 1 || is_diagonal(component.covariance));
  if (closed_form) {
    TruncatedMoments out{1.0, Eigen::VectorXd(d), Eigen::MatrixXd::Zero(d, d)};
    for (Eigen::Index i = 0; i < d; ++i) {
      const auto m = normal::truncated_interval_moments(component.mean[i], component.covariance(i, i),
                                                        box.lower()[i], box.upper()[i]);
      out.mass *= m.mass;
      out.mean[i] = m.mean;
      out.covariance(i, i) = m.variance;
    }
    if (!(out.mass >= 1e-300)) throw TruncationError("truncated_moments: degenerate truncation");
    return out;
  }

  const double mass = options.known_mass
                           ? *options.known_mass
                           : normal::box_probability(component.mean, component.covariance, box.lower(),
                                                     box.upper());
  if (!(mass >= 1e-300)) throw TruncationError("truncated_moments: degenerate truncation");
  if (options.method == MomentMethod::kAuto && mass > 1.0 - 1e-12) {
    return {1.0, component.mean, component.covariance};
  }
  TruncatedMoments out = mass >= 0.01
                             ? rejection_moments(component, box, options.draws, options.seed, mass)
                             : gibbs_moments(component, box, options.draws, options.seed);
  out.mass = mass;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  return out;
}

}  // namespace crossing
