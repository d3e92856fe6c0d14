#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>

#include "crossing/mixture.hpp"
#include "crossing/seeds.hpp"

namespace crossing {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kStallLimit = 50;
constexpr normal::BoxProbabilityOptions kIterationMass{.points_per_shift = 512, .shifts = 4};

struct Params {
  Eigen::VectorXd weights;
  std::vector<GaussianComponent> components;
};

// n x K matrix of log(pi_k) + log f_k(y_i).
Eigen::MatrixXd weighted_log_densities(const GaussianMixture& model, const Eigen::MatrixXd& data) {
  const Eigen::Index n = data.rows();
  Eigen::MatrixXd out(n, model.size());
  for (int k = 0; k < model.size(); ++k) {
    const auto& c = model.component(k);
    Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
    const Eigen::MatrixXd factor = llt.matrixL();
    const double log_norm = -model.dim() * 0.91893853320467274178 - factor.diagonal().array().log().sum();
    const Eigen::MatrixXd centred = (data.rowwise() - c.mean.transpose()).transpose();
    const Eigen::MatrixXd z = factor.triangularView<Eigen::Lower>().solve(centred);
    const double log_w = model.weights()[k] > 0.0 ? std::log(model.weights()[k]) : -kInf;
    out.col(k) = (log_w + log_norm - 0.5 * z.colwise().squaredNorm().array()).matrix().transpose();
  }
  return out;
}

// Fills responsibilities and returns the (possibly truncated) log-likelihood.
double expectation(const GaussianMixture& model, const Eigen::MatrixXd& data, bool truncated,
                   Eigen::MatrixXd& resp) {
  resp = weighted_log_densities(model, data);
  double total = 0.0;
  for (Eigen::Index i = 0; i < resp.rows(); ++i) {
    const double peak = resp.row(i).maxCoeff();
    auto row = resp.row(i).array();
    const double lse = peak + std::log((row - peak).exp().sum());
    row = (row - lse).exp();
    total += lse;
  }
  if (truncated) total -= data.rows() * std::log(model.box_mass());
  return total;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& data) {
  const Eigen::VectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centred = data.rowwise() - mean.transpose();
  return centred.transpose() * centred / static_cast<double>(data.rows());
}

// Raises the smallest eigenvalue to the floor when it falls below it.
bool floor_covariance(Eigen::MatrixXd& cov, double floor) {
  cov = 0.5 * (cov + cov.transpose());
  if (!cov.allFinite()) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  const double smallest = eig.eigenvalues().minCoeff();
  if (smallest < floor) cov += Eigen::MatrixXd::Identity(cov.rows(), cov.cols()) * (floor - smallest);
  return is_positive_definite(cov);
}

Params initialize(const Eigen::MatrixXd& data, int components, const Eigen::MatrixXd& pooled,
                  std::mt19937_64& rng) {
  const Eigen::Index n = data.rows();
  // k-means++ seeding on standardized columns.
  Eigen::VectorXd scale = pooled.diagonal().cwiseSqrt();
  for (Eigen::Index j = 0; j < scale.size(); ++j)
    if (!(scale[j] > 0.0)) scale[j] = 1.0;
  const Eigen::MatrixXd scaled = data * scale.cwiseInverse().asDiagonal();

  std::vector<Eigen::Index> chosen;
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  chosen.push_back(pick(rng));
  Eigen::VectorXd dist = (scaled.rowwise() - scaled.row(chosen[0])).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (static_cast<int>(chosen.size()) < components) {
    const double total = dist.sum();
    Eigen::Index next = pick(rng);
    if (total > 0.0) {
      double target = unif(rng) * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= dist[i];
        if (target <= 0.0) {
          next = i;
          break;
        }
      }
    }
    chosen.push_back(next);
    dist = dist.cwiseMin((scaled.rowwise() - scaled.row(next)).rowwise().squaredNorm());
  }

  Params p;
  p.weights = Eigen::VectorXd::Constant(components, 1.0 / components);
  for (Eigen::Index idx : chosen) p.components.push_back({data.row(idx).transpose(), pooled});
  return p;
}

struct Workspace {
  const Eigen::MatrixXd& data;
  const FitConfig& config;
  const std::optional<TruncationBox>& box;
  Eigen::MatrixXd pooled;
  std::mt19937_64 rng;
  std::uint64_t moment_seed;
  int reinitializations = 0;
};

void reinitialize(Workspace& ws, GaussianComponent& c) {
  std::uniform_int_distribution<Eigen::Index> pick(0, ws.data.rows() - 1);
  c.mean = ws.data.row(pick(ws.rng)).transpose();
  c.covariance = ws.pooled;
  ++ws.reinitializations;
}

Params maximization(Workspace& ws, const GaussianMixture& model, const Eigen::MatrixXd& resp) {
  const auto& data = ws.data;
  const double n = static_cast<double>(data.rows());
  const int k_count = model.size();
  Params next;
  next.weights.resize(k_count);
  next.components.resize(k_count);

  const bool truncated = ws.box.has_value();
  const double total_mass = model.box_mass();

  for (int k = 0; k < k_count; ++k) {
    const auto& old = model.component(k);
    const Eigen::VectorXd r = resp.col(k);
    const double n_k = r.sum();
    GaussianComponent& c = next.components[k];
    if (!(n_k > 1e-10 * n)) {
      next.weights[k] = 1.0 / k_count;
      reinitialize(ws, c);
      continue;
    }
    const Eigen::VectorXd first = data.transpose() * r;

    if (!truncated) {
      next.weights[k] = n_k / n;
      c.mean = first / n_k;
      const Eigen::MatrixXd centred = data.rowwise() - c.mean.transpose();
      c.covariance = centred.transpose() * r.asDiagonal() * centred / n_k;
    } else {
      // Complete-data EM: the draws lost outside the box are latent.
      TruncatedMoments moments;
      try {
        moments = truncated_moments(old, *ws.box,
                                    {.draws = ws.config.moment_draws,
                                     .seed = derive_seed(ws.moment_seed, "component", k),
                                     .known_mass = model.component_masses()[k]});
      } catch (const TruncationError&) {
        next.weights[k] = 1.0 / k_count;
        reinitialize(ws, c);
        continue;
      }
      const double lost_scale = n * model.weights()[k] / total_mass;  // n pi_k / P
      const double missing = lost_scale * (1.0 - moments.mass);       // M_k, expected lost draws
      const double effective = n_k + missing;
      next.weights[k] = effective * total_mass / n;  // (n_k + M_k) / (n + M)
      c.mean = (first + lost_scale * (old.mean - moments.mass * moments.mean)) / effective;

      const Eigen::MatrixXd centred = data.rowwise() - c.mean.transpose();
      const Eigen::VectorXd shift_all = old.mean - c.mean;
      const Eigen::VectorXd shift_in = moments.mean - c.mean;
      const Eigen::MatrixXd lost_second =
          old.covariance + shift_all * shift_all.transpose() -
          moments.mass * (moments.covariance + shift_in * shift_in.transpose());
      c.covariance = (centred.transpose() * r.asDiagonal() * centred + lost_scale * lost_second) / effective;
    }
    if (!floor_covariance(c.covariance, ws.config.covariance_floor)) {
      reinitialize(ws, c);
    }
  }
  next.weights /= next.weights.sum();
  return next;
}

struct RunOutcome {
  Params params;
  FitDiagnostics diagnostics;
};

RunOutcome run_once(const Eigen::MatrixXd& data, const FitConfig& config,
                    const std::optional<TruncationBox>& box, const Eigen::MatrixXd& pooled,
                    std::uint64_t seed) {
  Workspace ws{data, config, box, pooled, std::mt19937_64(seed), derive_seed(seed, "moments"), 0};
  Params params = initialize(data, config.components, pooled, ws.rng);
  const bool truncated = box.has_value();
  const double n = static_cast<double>(data.rows());

  // A coarser lattice during the iterations; the final model uses the default.
  auto build = [&](const Params& p) { return GaussianMixture(p.weights, p.components, box, 0, kIterationMass); };
  GaussianMixture model = build(params);
  Eigen::MatrixXd resp;
  double ll = expectation(model, data, truncated, resp);

  FitDiagnostics diag;
  diag.log_likelihood_trace.push_back(ll);
  // Monte Carlo moments make the truncated likelihood path slightly noisy, so
  // the best iterate is kept and a long stall ends the run.
  Params best = params;
  double best_ll = ll;
  int stalled = 0;
  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    Params next = maximization(ws, model, resp);
    std::optional<GaussianMixture> next_model;
    try {
      next_model.emplace(build(next));
    } catch (const std::runtime_error&) {
      // Mass vanished or a factorization failed: restart the offending parts.
      for (auto& c : next.components) {
        if (!is_positive_definite(c.covariance)) reinitialize(ws, c);
      }
      next.weights.setConstant(1.0 / next.weights.size());
      next_model.emplace(build(next));
    }
    Eigen::MatrixXd next_resp;
    const double next_ll = expectation(*next_model, data, truncated, next_resp);
    diag.iterations = iter;
    diag.log_likelihood_trace.push_back(next_ll);
    const double gain = (next_ll - ll) / n;
    params = std::move(next);
    model = std::move(*next_model);
    resp = std::move(next_resp);
    ll = next_ll;
    if (ll >= best_ll) {
      best = params;
      best_ll = ll;
      stalled = 0;
    } else if (++stalled >= kStallLimit) {
      break;
    }
    if (std::abs(gain) < config.loglik_tolerance) {
      diag.converged = true;
      break;
    }
  }
  diag.log_likelihood = best_ll;
  diag.reinitializations = ws.reinitializations;
  return {std::move(best), std::move(diag)};
}

}  // namespace

void FitConfig::validate() const {
  if (components < 1) throw std::invalid_argument("FitConfig: components must be >= 1");
  if (max_iterations < 1) throw std::invalid_argument("FitConfig: max_iterations must be >= 1");
  if (!(loglik_tolerance > 0.0)) throw std::invalid_argument("FitConfig: loglik_tolerance must be positive");
  if (restarts < 1) throw std::invalid_argument("FitConfig: restarts must be >= 1");
  if (!(covariance_floor > 0.0)) throw std::invalid_argument("FitConfig: covariance_floor must be positive");
  if (moment_draws < 1) throw std::invalid_argument("FitConfig: moment_draws must be >= 1");
}

FitResult em_fit(const Eigen::MatrixXd& data, const FitConfig& config) {
  config.validate();
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (d == 0) throw std::invalid_argument("em_fit: data has no columns");
  if (n < config.components * (d + 1)) {
    throw std::invalid_argument("em_fit: need at least K (d + 1) rows");
  }
  if (!data.allFinite()) throw std::invalid_argument("em_fit: data must be finite");

  std::optional<TruncationBox> box;
  if (config.truncation_mode == TruncationMode::kTruncated) {
    box = config.box.value_or(TruncationBox::positive_orthant(static_cast<int>(d)));
    if (box->dim() != d) throw TruncationError("em_fit: truncation box dimension mismatch");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!box->contains(data.row(i).transpose())) {
        throw TruncationError("em_fit: row " + std::to_string(i) + " lies outside the truncation box");
      }
    }
    if (box->is_unbounded()) box.reset();
  }

  Eigen::MatrixXd pooled = sample_covariance(data);
  if (!floor_covariance(pooled, config.covariance_floor)) {
    throw SingularCovarianceError("em_fit: pooled covariance cannot be floored");
  }

  std::optional<RunOutcome> best;
  for (int r = 0; r < config.restarts; ++r) {
    RunOutcome outcome = run_once(data, config, box, pooled, derive_seed(config.seed, "em-restart", r));
    outcome.diagnostics.restart = r;
    if (!best || outcome.diagnostics.log_likelihood > best->diagnostics.log_likelihood) {
      best = std::move(outcome);
    }
  }
  GaussianMixture model(best->params.weights, best->params.components, box, config.seed);
  best->diagnostics.log_likelihood = log_likelihood(model, data);
  return {std::move(model), std::move(best->diagnostics)};
}

ComponentSelection select_components(const Eigen::MatrixXd& data, std::span<const int> k_range,
                                     const FitConfig& config, double rate_threshold) {
  if (k_range.empty()) throw std::invalid_argument("select_components: empty K range");
  if (!std::is_sorted(k_range.begin(), k_range.end()) ||
      std::adjacent_find(k_range.begin(), k_range.end()) != k_range.end()) {
    throw std::invalid_argument("select_components: K range must be strictly ascending");
  }
  ComponentSelection out;
  std::vector<FitResult> fits;
  for (int k : k_range) {
    FitConfig cfg = config;
    cfg.components = k;
    try {
      FitResult fit = em_fit(data, cfg);
      out.curve.push_back({k, bic(fit.model, data), 0.0});
      fits.push_back(std::move(fit));
    } catch (const std::exception& e) {
      out.failures.emplace_back(k, e.what());
    }
  }
  if (out.curve.empty()) throw std::runtime_error("select_components: every fit failed");

  size_t argmin = 0;
  for (size_t j = 1; j < out.curve.size(); ++j) {
    if (out.curve[j].bic < out.curve[argmin].bic) argmin = j;
  }
  const double span = out.curve.front().bic - out.curve[argmin].bic;
  out.curve.front().change_rate = std::numeric_limits<double>::quiet_NaN();
  for (size_t j = 1; j < out.curve.size(); ++j) {
    const double drop = out.curve[j - 1].bic - out.curve[j].bic;
    out.curve[j].change_rate = span > 0.0 ? drop / span : 0.0;
  }

  size_t chosen = argmin;
  if (rate_threshold > 0.0) {
    for (size_t j = 1; j < out.curve.size(); ++j) {
      if (out.curve[j].change_rate < rate_threshold) {
        chosen = j - 1;
        break;
      }
    }
  }
  out.selected = out.curve[chosen].components;
  out.selected_fit = std::move(fits[chosen]);
  return out;
}

}  // namespace crossing
