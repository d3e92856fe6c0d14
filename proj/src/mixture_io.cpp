#include "crossing/mixture_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace crossing {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json bounds_to_json(const Eigen::VectorXd& v) {
  ordered_json out = ordered_json::array();
  for (double x : v) out.push_back(std::isinf(x) ? ordered_json(nullptr) : ordered_json(x));
  return out;
}

Eigen::VectorXd bounds_from_json(const json& arr, double unbounded) {
  Eigen::VectorXd v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].is_null() ? unbounded : arr[i].get<double>();
  return v;
}

Eigen::VectorXd vector_from_json(const json& arr, size_t expected, const char* what) {
  if (!arr.is_array() || arr.size() != expected) {
    throw std::runtime_error(std::string("model document: '") + what + "' has wrong length");
  }
  Eigen::VectorXd v(expected);
  for (size_t i = 0; i < expected; ++i) v[i] = arr[i].get<double>();
  return v;
}

}  // namespace

ordered_json mixture_to_json(const GaussianMixture& model) {
  const int d = model.dim();
  ordered_json doc;
  doc["format"] = "gaussian-mixture";
  doc["version"] = 1;
  doc["dimension"] = d;
  doc["components"] = model.size();
  doc["weights"] = std::vector<double>(model.weights().begin(), model.weights().end());
  ordered_json means = ordered_json::array();
  ordered_json covs = ordered_json::array();
  for (const auto& c : model.components()) {
    means.push_back(std::vector<double>(c.mean.begin(), c.mean.end()));
    std::vector<double> flat;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) flat.push_back(c.covariance(i, j));
    covs.push_back(flat);
  }
  doc["means"] = means;
  doc["covariances"] = covs;
  if (model.truncation()) {
    doc["truncation"] = {{"lower", bounds_to_json(model.truncation()->lower())},
                         {"upper", bounds_to_json(model.truncation()->upper())}};
  } else {
    doc["truncation"] = nullptr;
  }
  doc["fit_seed"] = model.fit_seed();
  return doc;
}

GaussianMixture mixture_from_json(const json& doc) {
  if (doc.value("format", "") != "gaussian-mixture") {
    throw std::runtime_error("model document: missing or unknown format tag");
  }
  if (doc.value("version", 0) != 1) throw std::runtime_error("model document: unsupported version");
  const int d = doc.at("dimension").get<int>();
  const int k_count = doc.at("components").get<int>();
  if (d < 1 || k_count < 1) throw std::runtime_error("model document: bad dimension or component count");

  Eigen::VectorXd weights = vector_from_json(doc.at("weights"), k_count, "weights");
  const json& means = doc.at("means");
  const json& covs = doc.at("covariances");
  if (means.size() != static_cast<size_t>(k_count) || covs.size() != static_cast<size_t>(k_count)) {
    throw std::runtime_error("model document: component arrays have wrong length");
  }
  std::vector<GaussianComponent> components;
  for (int k = 0; k < k_count; ++k) {
    Eigen::VectorXd mean = vector_from_json(means[k], d, "means");
    Eigen::VectorXd flat = vector_from_json(covs[k], static_cast<size_t>(d) * d, "covariances");
    Eigen::MatrixXd cov(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) cov(i, j) = flat[i * d + j];
    components.push_back({std::move(mean), std::move(cov)});
  }
  std::optional<TruncationBox> box;
  const json& trunc = doc.at("truncation");
  if (!trunc.is_null()) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    const json& lower = trunc.at("lower");
    const json& upper = trunc.at("upper");
    if (lower.size() != static_cast<size_t>(d) || upper.size() != static_cast<size_t>(d)) {
      throw std::runtime_error("model document: truncation bounds have wrong length");
    }
    box.emplace(bounds_from_json(lower, -kInf), bounds_from_json(upper, kInf));
  }
  return GaussianMixture(std::move(weights), std::move(components), std::move(box),
                         doc.value("fit_seed", std::uint64_t{0}));
}

std::string serialize_mixture(const GaussianMixture& model) {
  return mixture_to_json(model).dump(2) + "\n";
}

GaussianMixture parse_mixture(const std::string& text) {
  return mixture_from_json(json::parse(text));
}

void save_mixture(const GaussianMixture& model, const std::filesystem::path& path) {
  write_text_file(path, serialize_mixture(model));
}

GaussianMixture load_mixture(const std::filesystem::path& path) {
  return parse_mixture(read_text_file(path));
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace crossing
