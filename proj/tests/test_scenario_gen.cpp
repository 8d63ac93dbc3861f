#include <doctest.h>

#include <cmath>

#include "d2dcache/model.hpp"
#include "d2dcache/rng.hpp"
#include "d2dcache/scenario_gen.hpp"

using namespace d2dcache;

TEST_CASE("zipf popularity: frozen examples") {
  SUBCASE("single file") {
    auto p = zipf_popularity(0.8, 1);
    REQUIRE(p.size() == 1);
    CHECK(p[0] == 1.0);
  }
  SUBCASE("shape zero degenerates to uniform") {
    auto p = zipf_popularity(0.0, 4);
    for (double v : p) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("shape one over two files") {
    auto p = zipf_popularity(1.0, 2);
    CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("shape 0.8 over three files, extended-precision reference") {
    long double norm = 0.0L;
    for (int f = 1; f <= 3; ++f) norm += powl(static_cast<long double>(f), -0.8L);
    auto p = zipf_popularity(0.8, 3);
    for (int f = 1; f <= 3; ++f) {
      long double expect = powl(static_cast<long double>(f), -0.8L) / norm;
      CHECK(p[f - 1] == doctest::Approx(static_cast<double>(expect)).epsilon(1e-12));
    }
    // coarse magnitudes, frozen from the long-double evaluation above
    CHECK(p[0] == doctest::Approx(0.50262).epsilon(5e-4));
    CHECK(p[1] == doctest::Approx(0.28867).epsilon(5e-4));
    CHECK(p[2] == doctest::Approx(0.20871).epsilon(5e-4));
  }
}

TEST_CASE("zipf popularity sums to one and is nonincreasing") {
  for (double gamma : {0.0, 0.8, 2.0}) {
    auto p = zipf_popularity(gamma, 100);
    double sum = 0.0;
    for (std::size_t f = 0; f < p.size(); ++f) {
      sum += p[f];
      if (f > 0) CHECK(p[f] <= p[f - 1] + 1e-15);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("gamma rate draws have the configured mean") {
  // mean = shape * scale; 1e5 draws keep 3 sigma near 2e-5
  const double shape = 4.43, scale = 1.0 / 1088.0;
  auto stream = RandomStream::keyed(12345, "gamma-mean");
  const long n = 100000;
  double sum = 0.0;
  for (long k = 0; k < n; ++k) sum += stream.gamma(shape, scale);
  double mean = sum / n;
  double sigma_of_mean = std::sqrt(shape * scale * scale / n);
  CHECK(std::fabs(mean - shape * scale) <= 3.0 * sigma_of_mean);
}

TEST_CASE("generation is deterministic and valid") {
  GeneratorConfig cfg;
  cfg.num_users = 8;
  cfg.num_files = 12;
  cfg.seed = 77;
  Scenario a = generate(cfg);
  Scenario b = generate(cfg);
  CHECK(a == b);
  CHECK(scenario_to_text(a) == scenario_to_text(b));
  CHECK_NOTHROW(validate_scenario(a));

  cfg.seed = 78;
  Scenario c = generate(cfg);
  CHECK_FALSE(a == c);

  // structure mandated by the recipe
  for (int f = 0; f < cfg.num_files; ++f) {
    CHECK(a.recover_segments[f] >= cfg.recover_min);
    CHECK(a.recover_segments[f] <= cfg.recover_max);
    CHECK(a.max_segments[f] == cfg.max_multiplier * a.recover_segments[f]);
    for (int i = 1; i < cfg.num_users; ++i) {
      CHECK(a.popularity(f, i) == a.popularity(f, 0));  // shared zipf column
    }
  }
  Placement zero(cfg.num_files, cfg.num_users);
  CHECK(check_feasible(a, zero).ok);
}

TEST_CASE("adding users preserves earlier pair draws") {
  // keyed substreams: the (0,1) rate must not depend on how many users exist
  GeneratorConfig small;
  small.num_users = 3;
  small.num_files = 4;
  small.seed = 9;
  GeneratorConfig big = small;
  big.num_users = 6;
  Scenario a = generate(small);
  Scenario b = generate(big);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(a.contact_rate(i, j) == b.contact_rate(i, j));
  }
}

TEST_CASE("generator config round trip and validation") {
  GeneratorConfig cfg;
  cfg.num_users = 5;
  cfg.gamma_scale = 0.25;
  cfg.seed = 4242;
  GeneratorConfig back = generator_config_from_text(generator_config_to_text(cfg));
  CHECK(back == cfg);

  CHECK_THROWS_AS(generator_config_from_text("{\"num_users\": -2}"), std::invalid_argument);
  GeneratorConfig bad;
  bad.recover_min = 3;
  bad.recover_max = 1;
  CHECK_THROWS_AS(validate_generator_config(bad), std::invalid_argument);
}
