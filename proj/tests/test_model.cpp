#include <doctest.h>

#include <stdexcept>

#include "d2dcache/model.hpp"
#include "d2dcache/rng.hpp"
#include "d2dcache/scenario_gen.hpp"
#include "support/builders.hpp"

using namespace d2dcache;

TEST_CASE("all-zero placement is feasible on any scenario") {
  auto rng = RandomStream::keyed(5, "model-zero");
  for (int n = 0; n < 25; ++n) {
    Scenario s = builders::random_scenario(rng, 5, 6);
    Placement p(s.num_files, s.num_users);
    auto report = check_feasible(s, p);
    CHECK(report.ok);
    CHECK(report.violations.empty());
  }
}

TEST_CASE("capacity overrun is reported with the overshoot amount") {
  Scenario s = builders::uniform_scenario(1, 1, 0.0, 1, /*cache=*/1, /*s_rec=*/2, /*s_max=*/2);
  Placement p(1, 1);
  p.counts(0, 0) = 2;
  auto report = check_feasible(s, p);
  REQUIRE_FALSE(report.ok);
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].constraint == "cache-capacity");
  CHECK(report.violations[0].user == 0);
  CHECK(report.violations[0].amount == 1);
}

TEST_CASE("segment budget overrun is reported per file") {
  Scenario s = builders::uniform_scenario(2, 1, 0.0, 1, /*cache=*/1, /*s_rec=*/1, /*s_max=*/1);
  Placement p(1, 2);
  p.counts(0, 0) = 1;
  p.counts(0, 1) = 1;
  auto report = check_feasible(s, p);
  REQUIRE_FALSE(report.ok);
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].constraint == "segment-budget");
  CHECK(report.violations[0].file == 0);
  CHECK(report.violations[0].amount == 1);
}

TEST_CASE("every violation is enumerated") {
  Scenario s = builders::uniform_scenario(2, 2, 0.0, 1, /*cache=*/1, /*s_rec=*/1, /*s_max=*/1);
  Placement p(2, 2);
  p.counts(0, 0) = 2;  // level range + capacity + budget
  p.counts(1, 1) = -1; // negative count
  auto report = check_feasible(s, p);
  REQUIRE_FALSE(report.ok);
  int level_range = 0, capacity = 0, budget = 0;
  for (const auto& v : report.violations) {
    if (v.constraint == "level-range") ++level_range;
    if (v.constraint == "cache-capacity") ++capacity;
    if (v.constraint == "segment-budget") ++budget;
  }
  CHECK(level_range == 2);
  CHECK(capacity == 1);
  CHECK(budget == 1);
}

TEST_CASE("dimension mismatch is a structural error, not infeasibility") {
  Scenario s = builders::uniform_scenario(2, 2, 0.1, 1, 1, 1, 1);
  Placement p(1, 2);
  CHECK_THROWS_AS(check_feasible(s, p), std::invalid_argument);
}

TEST_CASE("check_feasible is pure") {
  Scenario s = builders::uniform_scenario(2, 1, 0.0, 1, 1, 1, 1);
  Placement p(1, 2);
  p.counts(0, 0) = 1;
  p.counts(0, 1) = 1;
  auto a = check_feasible(s, p);
  auto b = check_feasible(s, p);
  CHECK(a.ok == b.ok);
  REQUIRE(a.violations.size() == b.violations.size());
  for (std::size_t k = 0; k < a.violations.size(); ++k) {
    CHECK(a.violations[k].describe() == b.violations[k].describe());
  }
}

TEST_CASE("scenario text round trip is field-exact") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    GeneratorConfig cfg;
    cfg.num_users = 6;
    cfg.num_files = 9;
    cfg.seed = seed;
    Scenario s = generate(cfg);
    Scenario back = scenario_from_text(scenario_to_text(s));
    CHECK(back == s);  // bit-exact doubles included
    CHECK(scenario_to_text(back) == scenario_to_text(s));
  }
}

TEST_CASE("scenario parser rejects invalid documents") {
  GeneratorConfig cfg;
  cfg.num_users = 3;
  cfg.num_files = 4;
  Scenario s = generate(cfg);

  SUBCASE("negative contact rate") {
    s.contact_rate(0, 1) = -0.25;
    s.contact_rate(1, 0) = -0.25;
    CHECK_THROWS_WITH_AS(std::ignore = scenario_from_text(scenario_to_text(s)),
                         doctest::Contains("contact_rate"), std::invalid_argument);
  }
  SUBCASE("popularity column off unity names the user") {
    s.popularity(0, 2) -= 0.1;  // column now sums to 0.9
    CHECK_THROWS_WITH_AS(std::ignore = scenario_from_text(scenario_to_text(s)),
                         doctest::Contains("user 2"), std::invalid_argument);
  }
  SUBCASE("missing version tag") {
    CHECK_THROWS_WITH_AS(std::ignore = scenario_from_text("{\"num_users\": 2}"),
                         doctest::Contains("format_version"), std::invalid_argument);
  }
  SUBCASE("asymmetric rates") {
    s.contact_rate(0, 1) += 0.5;
    CHECK_THROWS_AS(std::ignore = scenario_from_text(scenario_to_text(s)), std::invalid_argument);
  }
  SUBCASE("not JSON at all") {
    CHECK_THROWS_AS(std::ignore = scenario_from_text("users: 2"), std::invalid_argument);
  }
}

TEST_CASE("placement text round trip") {
  Placement p(3, 2);
  p.counts(0, 0) = 2;
  p.counts(2, 1) = 1;
  Placement back = placement_from_text(placement_to_text(p));
  CHECK(back == p);
}

TEST_CASE("search params validation") {
  SearchParams ok{0.0, 400.0, 1.0, 1e-6};
  CHECK_NOTHROW(validate_search_params(ok));
  SearchParams bad_step = ok;
  bad_step.step = 1e-7;  // step must exceed tolerance
  CHECK_THROWS_AS(validate_search_params(bad_step), std::invalid_argument);
  SearchParams bad_range = ok;
  bad_range.t_max = 0.0;
  CHECK_THROWS_AS(validate_search_params(bad_range), std::invalid_argument);
}
