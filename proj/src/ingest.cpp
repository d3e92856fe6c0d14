#include "crossing/ingest.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace crossing {

namespace {

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, delim)) out.push_back(field);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& text, size_t line_no) {
  const std::string s = trim(text);
  double value = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": cannot parse number '" + s + "'");
  }
  return value;
}

std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

Eigen::MatrixXd correlated_covariance(const Eigen::Vector4d& sd, const Eigen::Matrix4d& corr) {
  return sd.asDiagonal() * corr * sd.asDiagonal();
}

// Symmetric 4x4 correlation from its upper triangle, (inv_R, v, v_p, inv_T_adv) order.
Eigen::Matrix4d correlation(double rv, double rp, double rt, double vp, double vt, double pt) {
  Eigen::Matrix4d c;
  c << 1.0, rv, rp, rt,
       rv, 1.0, vp, vt,
       rp, vp, 1.0, pt,
       rt, vt, pt, 1.0;
  return c;
}

}  // namespace

std::vector<TrajectoryLog> read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trajectory file is empty");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);  // UTF-8 BOM
  const auto header = split(line, ',');
  std::map<std::string, size_t> column;
  for (size_t i = 0; i < header.size(); ++i) column[trim(header[i])] = i;
  constexpr std::array<const char*, 5> kRequired = {"event_id", "t", "R", "L", "v"};
  for (const char* name : kRequired) {
    if (!column.count(name)) throw std::runtime_error(std::string("trajectory header lacks column '") + name + "'");
  }

  std::vector<TrajectoryLog> logs;
  std::map<std::string, size_t> index;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != header.size()) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " fields");
    }
    const std::string id = trim(fields[column["event_id"]]);
    TrajectorySample s{parse_double(fields[column["t"]], line_no), parse_double(fields[column["R"]], line_no),
                       parse_double(fields[column["L"]], line_no), parse_double(fields[column["v"]], line_no)};
    if (!std::isfinite(s.t) || !std::isfinite(s.R) || !std::isfinite(s.L) || !std::isfinite(s.v)) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": non-finite value");
    }
    auto [it, inserted] = index.emplace(id, logs.size());
    if (inserted) logs.push_back({id, {}});
    auto& rows = logs[it->second].rows;
    if (!rows.empty() && !(s.t > rows.back().t)) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": time not increasing within event " + id);
    }
    rows.push_back(s);
  }
  return logs;
}

std::vector<TrajectoryLog> read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return read_trajectory_csv(in);
}

ExtractionResult extract_observations(const TrajectoryLog& log, double sample_stride, TtcConvention convention) {
  if (log.rows.size() < 2) throw std::invalid_argument("extract_observations: event needs at least two rows");
  if (!(sample_stride >= 0.0)) throw std::invalid_argument("extract_observations: negative stride");
  const auto& rows = log.rows;
  const size_t n = rows.size();

  std::vector<Eigen::Vector4d> kept;
  const double t0 = rows.front().t;
  const double tolerance = 1e-9 * std::max(1.0, std::abs(rows.back().t));
  double next_target = t0;
  for (size_t i = 0; i < n; ++i) {
    if (rows[i].t + tolerance < next_target) continue;
    if (sample_stride > 0.0) {
      next_target = t0 + (std::floor((rows[i].t - t0 + tolerance) / sample_stride) + 1.0) * sample_stride;
    }
    const size_t lo = i == 0 ? 0 : i - 1;
    const size_t hi = i + 1 == n ? i : i + 1;
    const double v_p = -(rows[hi].L - rows[lo].L) / (rows[hi].t - rows[lo].t);
    const Kinematics k{rows[i].R, rows[i].L, rows[i].v, v_p};
    if (!(k.R > 0.0) || !(k.v > 0.0) || !(k.v_p > 0.0) || !(k.L >= 0.0)) continue;
    try {
      kept.push_back(to_observation(k, convention).as_vector());
    } catch (const std::invalid_argument&) {
      // T_adv == 0 or an infinite reciprocal
    }
  }

  ExtractionResult result;
  result.observations.rows.resize(static_cast<Eigen::Index>(kept.size()), kObservationDim);
  for (size_t i = 0; i < kept.size(); ++i) result.observations.rows.row(i) = kept[i].transpose();
  if (kept.empty()) result.warnings.push_back("event " + log.event_id + ": every row was dropped");
  return result;
}

ExtractionResult extract_observations(const std::vector<TrajectoryLog>& logs, double sample_stride,
                                      TtcConvention convention) {
  ExtractionResult all;
  std::vector<Eigen::MatrixXd> parts;
  Eigen::Index total = 0;
  for (const auto& log : logs) {
    if (log.rows.size() < 2) {
      all.warnings.push_back("event " + log.event_id + ": fewer than two rows, skipped");
      continue;
    }
    ExtractionResult one = extract_observations(log, sample_stride, convention);
    all.warnings.insert(all.warnings.end(), one.warnings.begin(), one.warnings.end());
    total += one.observations.rows.rows();
    parts.push_back(std::move(one.observations.rows));
  }
  all.observations.rows.resize(total, kObservationDim);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    all.observations.rows.middleRows(at, p.rows()) = p;
    at += p.rows();
  }
  return all;
}

ObservationMatrix generate_synthetic(const GaussianMixture& generator, Eigen::Index n, std::uint64_t seed) {
  if (generator.dim() != kObservationDim) {
    throw std::invalid_argument("generate_synthetic: generator must be 4-dimensional");
  }
  if (!generator.truncation() || !(generator.truncation()->lower().array() >= 0.0).all()) {
    throw std::invalid_argument("generate_synthetic: generator must be truncated to the positive orthant");
  }
  ObservationMatrix out;
  out.rows = sample(generator, n, seed);
  // Boundary draws at exactly zero would violate strict positivity.
  for (Eigen::Index i = 0; i < out.rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < kObservationDim; ++j) {
      if (!(out.rows(i, j) > 0.0)) out.rows(i, j) = std::numeric_limits<double>::min();
    }
  }
  out.provenance = Provenance::kSynthetic;
  out.generator = generator;
  return out;
}

GaussianMixture default_interaction_generator() {
  // Three regimes: cruising past a pedestrian well ahead, slowing, and creeping
  // up on a tight crossing. Within each, speed falls as 1/R and 1/T_adv grow.
  // Correlations ordered (inv_R, v, v_p, inv_T_adv).
  std::vector<GaussianComponent> parts;
  parts.push_back({Eigen::Vector4d(0.04, 6.0, 1.3, 0.15),
                   correlated_covariance(Eigen::Vector4d(0.015, 1.2, 0.25, 0.08),
                                         correlation(-0.5, 0.1, 0.3, 0.0, -0.5, 0.1))});
  parts.push_back({Eigen::Vector4d(0.08, 3.5, 1.35, 0.45),
                   correlated_covariance(Eigen::Vector4d(0.03, 1.0, 0.3, 0.2),
                                         correlation(-0.5, 0.15, 0.3, -0.1, -0.6, 0.2))});
  parts.push_back({Eigen::Vector4d(0.18, 1.5, 1.2, 1.1),
                   correlated_covariance(Eigen::Vector4d(0.08, 0.7, 0.3, 0.5),
                                         correlation(-0.4, 0.1, 0.3, -0.1, -0.5, 0.1))});
  return GaussianMixture(Eigen::Vector3d(0.45, 0.35, 0.20), std::move(parts),
                         TruncationBox::positive_orthant(kObservationDim));
}

void write_observations_csv(const ObservationMatrix& obs, std::ostream& out) {
  out << "inv_R,v,v_p,inv_T_adv\n";
  for (Eigen::Index i = 0; i < obs.rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < kObservationDim; ++j) {
      if (j) out << ',';
      out << format_double(obs.rows(i, j));
    }
    out << '\n';
  }
}

ObservationMatrix read_observations_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("observation file is empty");
  const auto header = split(trim(line), ',');
  if (header.size() != kObservationDim) throw std::runtime_error("observation header must have 4 columns");
  for (int j = 0; j < kObservationDim; ++j) {
    if (trim(header[j]) != kObservationNames[j]) {
      throw std::runtime_error("observation header must be inv_R,v,v_p,inv_T_adv");
    }
  }
  std::vector<Eigen::Vector4d> rows;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != kObservationDim) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected 4 fields");
    }
    Eigen::Vector4d row;
    for (int j = 0; j < kObservationDim; ++j) {
      row[j] = parse_double(fields[j], line_no);
      if (!(row[j] > 0.0) || !std::isfinite(row[j])) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": entries must be positive and finite");
      }
    }
    rows.push_back(row);
  }
  ObservationMatrix out;
  out.rows.resize(static_cast<Eigen::Index>(rows.size()), kObservationDim);
  for (size_t i = 0; i < rows.size(); ++i) out.rows.row(i) = rows[i].transpose();
  return out;
}

ObservationMatrix read_observations_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return read_observations_csv(in);
}

}  // namespace crossing
