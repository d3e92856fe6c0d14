#include <doctest.h>

#include <filesystem>
#include <random>

#include "crossing/mixture_io.hpp"
#include "crossing/seeds.hpp"
#include "test_support.hpp"

using namespace crossing;
using testing_support::vec;

constexpr double kInf = std::numeric_limits<double>::infinity();

namespace {

void check_identical(const GaussianMixture& a, const GaussianMixture& b) {
  REQUIRE(a.size() == b.size());
  CHECK(a.weights() == b.weights());
  for (int k = 0; k < a.size(); ++k) {
    CHECK(a.component(k).mean == b.component(k).mean);
    CHECK(a.component(k).covariance == b.component(k).covariance);
  }
  CHECK(a.truncation().has_value() == b.truncation().has_value());
  if (a.truncation()) CHECK(*a.truncation() == *b.truncation());
  CHECK(a.fit_seed() == b.fit_seed());
}

}  // namespace

TEST_CASE("serialization round-trips bit-exactly") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 25; ++trial) {
    const int d = 1 + trial % 4;
    std::optional<TruncationBox> box;
    if (trial % 2) {
      Eigen::VectorXd lo = Eigen::VectorXd::Constant(d, -kInf), hi = Eigen::VectorXd::Constant(d, kInf);
      lo[0] = -10.0 - trial / 7.0;
      if (d > 1) hi[1] = 12.0 + 1.0 / 3.0;
      box = TruncationBox(lo, hi);
    }
    GaussianMixture g = testing_support::random_mixture(d, 1 + trial % 3, rng, box);
    g = GaussianMixture(g.weights(), g.components(), g.truncation(), 1000u + trial);
    const std::string text = serialize_mixture(g);
    const GaussianMixture back = parse_mixture(text);
    check_identical(g, back);
    CHECK(serialize_mixture(back) == text);
  }
}

TEST_CASE("file round trip and infinite bounds") {
  const GaussianMixture g(vec({1.0}), {{vec({0.25, 3.0}), (Eigen::Matrix2d() << 1.0, 0.1, 0.1, 2.0).finished()}},
                          TruncationBox::positive_orthant(2), 42);
  const auto path = std::filesystem::temp_directory_path() / "crossing_model_io_test.json";
  save_mixture(g, path);
  check_identical(g, load_mixture(path));
  const auto doc = mixture_to_json(g);
  CHECK(doc["truncation"]["upper"][0].is_null());
  CHECK(doc["truncation"]["lower"][1] == 0.0);
  std::filesystem::remove(path);
  CHECK_THROWS(load_mixture(path));
}

TEST_CASE("malformed documents are rejected") {
  CHECK_THROWS(parse_mixture("not json"));
  CHECK_THROWS(parse_mixture(R"({"format":"something-else"})"));
  const GaussianMixture g(vec({1.0}), {{vec({0.0}), Eigen::MatrixXd::Identity(1, 1)}});
  auto doc = mixture_to_json(g);
  doc["covariances"][0] = {1.0, 2.0};
  CHECK_THROWS(mixture_from_json(doc));
  doc = mixture_to_json(g);
  doc["weights"] = {0.5};
  CHECK_THROWS(mixture_from_json(doc));
}

TEST_CASE("derived seeds") {
  CHECK(derive_seed(1, "fit") == derive_seed(1, "fit"));
  CHECK(derive_seed(1, "fit") != derive_seed(2, "fit"));
  CHECK(derive_seed(1, "fit") != derive_seed(1, "gen-data"));
  CHECK(derive_seed(1, "experiment", 0) != derive_seed(1, "experiment", 1));
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}
