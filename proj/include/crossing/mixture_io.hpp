#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "crossing/mixture.hpp"

namespace crossing {

// Model document layout (JSON):
//   {"format": "gaussian-mixture", "version": 1, "dimension": d, "components": K,
//    "weights": [K], "means": [[d] x K], "covariances": [[d*d row-major] x K],
//    "truncation": null | {"lower": [d], "upper": [d]}, "fit_seed": n}
// Unbounded box edges are written as null. Doubles use shortest round-trip
// formatting, so finite values survive save/load bit-exactly.

nlohmann::ordered_json mixture_to_json(const GaussianMixture& model);
GaussianMixture mixture_from_json(const nlohmann::json& doc);

std::string serialize_mixture(const GaussianMixture& model);
GaussianMixture parse_mixture(const std::string& text);

void save_mixture(const GaussianMixture& model, const std::filesystem::path& path);
GaussianMixture load_mixture(const std::filesystem::path& path);

/// Writes text to path; throws std::runtime_error when the file cannot be opened.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace crossing
