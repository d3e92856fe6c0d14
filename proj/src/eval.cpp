#include "crossing/eval.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace crossing {

namespace {

nlohmann::ordered_json number_or_null(double x) {
  return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr);
}

std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace

PairedTimes paired_times(const PairedOutcome& outcome) {
  return {outcome.av.passing_time, outcome.human.passing_time, outcome.av.crashed, outcome.av.timed_out,
          outcome.human.completed()};
}

EvaluationReport compute_report(std::span<const PairedTimes> pairs, std::optional<Gates> gates) {
  if (pairs.empty()) throw std::invalid_argument("compute_report: no experiments");
  EvaluationReport report;
  report.experiments = static_cast<int>(pairs.size());
  report.gates = gates;

  double sum = 0.0;
  for (const auto& p : pairs) {
    if (p.av_crashed) ++report.crashes;
    if (p.av_crashed || p.av_timed_out || !p.human_completed) {
      ++report.excluded;
      continue;
    }
    if (!(p.t_h > 0.0) || !(p.t_a > 0.0)) {
      throw std::invalid_argument("compute_report: passing times must be positive");
    }
    const double tau = p.t_a / p.t_h;
    report.tau.push_back(tau);
    sum += tau;
    report.running_mean.push_back(sum / static_cast<double>(report.tau.size()));
  }
  report.kappa = static_cast<double>(report.crashes) / report.experiments;

  if (report.tau.empty()) {
    report.mu = report.sigma = report.cv = std::numeric_limits<double>::quiet_NaN();
  } else {
    const double n = static_cast<double>(report.tau.size());
    report.mu = sum / n;
    double squares = 0.0;
    for (double t : report.tau) squares += (t - report.mu) * (t - report.mu);
    report.sigma = std::sqrt(squares / n);
    report.cv = report.sigma / report.mu;
  }
  if (gates) report.pass = report.mu < gates->mu_0 && report.kappa < gates->kappa_0;
  return report;
}

nlohmann::ordered_json report_to_json(const EvaluationReport& report) {
  nlohmann::ordered_json doc;
  doc["format"] = "evaluation-report";
  doc["version"] = 1;
  doc["experiments"] = report.experiments;
  doc["mu"] = number_or_null(report.mu);
  doc["sigma"] = number_or_null(report.sigma);
  doc["cv"] = number_or_null(report.cv);
  doc["kappa"] = report.kappa;
  doc["crashes"] = report.crashes;
  doc["excluded"] = report.excluded;
  if (report.gates) {
    doc["gates"] = {{"mu_0", report.gates->mu_0}, {"kappa_0", report.gates->kappa_0}, {"pass", *report.pass}};
  } else {
    doc["gates"] = nullptr;
  }
  doc["tau"] = report.tau;
  doc["running_mean"] = report.running_mean;
  return doc;
}

void write_series_csv(const EvaluationReport& report, std::ostream& out) {
  out << "n,running_mean,tau_n\n";
  for (size_t i = 0; i < report.tau.size(); ++i) {
    out << (i + 1) << ',' << format_double(report.running_mean[i]) << ',' << format_double(report.tau[i])
        << '\n';
  }
}

}  // namespace crossing
