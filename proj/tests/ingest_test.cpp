#include <doctest.h>

#include <array>
#include <sstream>

#include "crossing/ingest.hpp"

using namespace crossing;

TEST_CASE("trajectory CSV parsing") {
  std::istringstream in(
      "\xEF\xBB\xBFv,event_id,t,L,R\n"
      "5,a,0.0,9.0,30\n"
      "5,b,0.0,4.0,20\n"
      "5,a,0.5,8.25,27.5\n"
      "5,a,1.0,7.5,25\n");
  const auto logs = read_trajectory_csv(in);
  REQUIRE(logs.size() == 2);
  CHECK(logs[0].event_id == "a");
  CHECK(logs[0].rows.size() == 3);
  CHECK(logs[0].rows[1].L == 8.25);
  CHECK(logs[1].rows[0].R == 20.0);

  std::istringstream missing("event_id,t,R,v\n");
  CHECK_THROWS_AS(read_trajectory_csv(missing), std::runtime_error);
  std::istringstream backwards("event_id,t,R,L,v\na,1,30,9,5\na,0.5,28,8,5\n");
  CHECK_THROWS_AS(read_trajectory_csv(backwards), std::runtime_error);
  std::istringstream garbage("event_id,t,R,L,v\na,x,30,9,5\n");
  CHECK_THROWS_AS(read_trajectory_csv(garbage), std::runtime_error);
}

TEST_CASE("observation extraction") {
  TrajectoryLog log{"e", {}};
  for (int i = 0; i <= 20; ++i) {
    const double t = 0.1 * i;
    log.rows.push_back({t, 30.0 - 5.0 * t, 6.0 - 1.5 * t, 5.0});
  }
  const auto all = extract_observations(log, 0.0);
  REQUIRE(all.observations.rows.rows() == 21);
  for (Eigen::Index i = 0; i < 21; ++i) CHECK(all.observations.rows(i, kWalkSpeed) == doctest::Approx(1.5));
  CHECK(all.observations.rows(0, kInvRange) == doctest::Approx(1.0 / 30.0));
  // TTC 6 - t against a walk of 4 - t: T_adv = 2 throughout.
  CHECK(all.observations.rows(7, kInvTimeAdvantage) == doctest::Approx(0.5));
}

TEST_CASE("observation extraction drops undefined rows") {
  TrajectoryLog log{"e", {}};
  // A stopped vehicle and a vehicle past the line give no observation.
  log.rows = {{0.0, 30.0, 9.0, 5.0}, {0.5, 27.5, 8.0, 5.0}, {1.0, 25.0, 7.0, 0.0}, {1.5, -1.0, 6.0, 5.0}};
  const auto r = extract_observations(log, 0.0);
  CHECK(r.observations.rows.rows() == 2);
  // TTC equal to the walking time (T_adv = 0) is dropped too.
  TrajectoryLog tie{"t", {{0.0, 30.0, 9.0, 5.0}, {1.0, 24.0, 7.5, 5.0}}};
  CHECK(extract_observations(tie, 0.0).observations.rows.rows() == 1);
  CHECK(r.warnings.empty());

  TrajectoryLog stuck{"s", {{0.0, 30.0, 9.0, 0.0}, {1.0, 30.0, 9.0, 0.0}}};
  const auto none = extract_observations(stuck, 0.0);
  CHECK(none.observations.rows.rows() == 0);
  CHECK(none.warnings.size() == 1);
}

TEST_CASE("stride resampling") {
  TrajectoryLog log{"e", {}};
  for (int i = 0; i < 30; ++i) log.rows.push_back({0.1 * i, 40.0 - 0.5 * i, 9.0 - 0.1 * i, 5.0});
  CHECK(extract_observations(log, 0.5).observations.rows.rows() == 6);
  CHECK(extract_observations(log, 0.0).observations.rows.rows() == 30);
  const std::vector<TrajectoryLog> two = {log, TrajectoryLog{"short", {{0.0, 1.0, 1.0, 1.0}}}};
  const auto combined = extract_observations(two, 1.0);
  CHECK(combined.observations.rows.rows() == 3);
  CHECK(combined.warnings.size() == 1);
}

TEST_CASE("synthetic observations") {
  const auto gen = default_interaction_generator();
  CHECK(gen.dim() == 4);
  CHECK(gen.size() == 3);
  const auto a = generate_synthetic(gen, 500, 9);
  CHECK(a.provenance == Provenance::kSynthetic);
  REQUIRE(a.generator.has_value());
  CHECK((a.rows.array() > 0.0).all());
  CHECK(a.rows == generate_synthetic(gen, 500, 9).rows);

  // Drivers slow for tight crossings: the speed mode rises with the time advantage.
  double previous = 0.0;
  for (double t_adv : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    const std::array<int, 3> observed = {kInvRange, kWalkSpeed, kInvTimeAdvantage};
    const auto c = condition(gen, observed, Eigen::Vector3d(1.0 / 30.0, 1.2, 1.0 / t_adv));
    const double mode = conditional_mode(c, {0.0, 25.0});
    CHECK(mode > previous);
    previous = mode;
  }

  GaussianMixture open = gen.without_truncation();
  CHECK_THROWS_AS(generate_synthetic(open, 10, 1), std::invalid_argument);
}

TEST_CASE("observation CSV round trip") {
  const auto a = generate_synthetic(default_interaction_generator(), 200, 4);
  std::stringstream s;
  write_observations_csv(a, s);
  const auto b = read_observations_csv(s);
  CHECK(b.rows == a.rows);

  std::istringstream bad("inv_R,v,v_p,inv_T_adv\n0.1,2,-1,0.3\n");
  CHECK_THROWS_AS(read_observations_csv(bad), std::runtime_error);
  std::istringstream header("a,b,c,d\n");
  CHECK_THROWS_AS(read_observations_csv(header), std::runtime_error);
}
