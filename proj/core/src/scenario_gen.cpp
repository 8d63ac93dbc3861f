#include "d2dcache/scenario_gen.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "d2dcache/rng.hpp"

namespace d2dcache {

namespace {
using ordered_json = nlohmann::ordered_json;
}

void validate_generator_config(const GeneratorConfig& c) {
  auto fail = [](const std::string& m) { throw std::invalid_argument("generator config: " + m); };
  if (c.num_users <= 0) fail("num_users must be positive");
  if (c.num_files <= 0) fail("num_files must be positive");
  if (c.cache_capacity < 0) fail("cache_capacity must be >= 0");
  if (c.contact_budget <= 0) fail("contact_budget must be positive");
  if (!(c.zipf_shape >= 0.0)) fail("zipf_shape must be >= 0");
  if (!(c.gamma_shape > 0.0) || !(c.gamma_scale > 0.0)) fail("gamma parameters must be positive");
  if (c.recover_min <= 0 || c.recover_max < c.recover_min) fail("recover range must be 1 <= lo <= hi");
  if (c.max_multiplier < 1) fail("max_multiplier must be >= 1");
  if (!(c.nlr_limit >= 0.0 && c.nlr_limit <= 1.0)) fail("nlr_limit must lie in [0,1]");
  if (!(c.delay_limit > 0.0)) fail("delay_limit must be positive");
}

std::vector<double> zipf_popularity(double gamma, int num_files) {
  if (num_files < 1) throw std::invalid_argument("zipf_popularity: need at least one file");
  if (!(gamma >= 0.0)) throw std::invalid_argument("zipf_popularity: gamma must be >= 0");
  std::vector<double> p(num_files);
  double norm = 0.0;
  for (int f = 1; f <= num_files; ++f) {
    double w = std::pow(static_cast<double>(f), -gamma);
    p[f - 1] = w;
    norm += w;
  }
  for (double& v : p) v /= norm;
  return p;
}

Scenario generate(const GeneratorConfig& c) {
  validate_generator_config(c);
  Scenario s;
  s.num_users = c.num_users;
  s.num_files = c.num_files;
  s.cache_capacity.assign(c.num_users, c.cache_capacity);
  s.contact_budget = c.contact_budget;
  s.nlr_limit = c.nlr_limit;
  s.delay_limit = c.delay_limit;
  s.zipf_shape.assign(c.num_users, c.zipf_shape);

  std::vector<double> pop = zipf_popularity(c.zipf_shape, c.num_files);
  s.popularity = Matrix<double>(c.num_files, c.num_users);
  for (int f = 0; f < c.num_files; ++f) {
    for (int i = 0; i < c.num_users; ++i) s.popularity(f, i) = pop[f];
  }

  // One substream per unordered pair, mirrored for symmetry.
  s.contact_rate = Matrix<double>(c.num_users, c.num_users, 0.0);
  for (int i = 0; i < c.num_users; ++i) {
    for (int j = i + 1; j < c.num_users; ++j) {
      auto stream = RandomStream::keyed(c.seed, "contact-rate", static_cast<std::uint64_t>(i),
                                        static_cast<std::uint64_t>(j));
      double rate = stream.gamma(c.gamma_shape, c.gamma_scale);
      s.contact_rate(i, j) = rate;
      s.contact_rate(j, i) = rate;
    }
  }

  s.recover_segments.resize(c.num_files);
  s.max_segments.resize(c.num_files);
  for (int f = 0; f < c.num_files; ++f) {
    auto stream = RandomStream::keyed(c.seed, "recover-segments", static_cast<std::uint64_t>(f));
    s.recover_segments[f] = stream.uniform_int(c.recover_min, c.recover_max);
    s.max_segments[f] = c.max_multiplier * s.recover_segments[f];
  }

  validate_scenario(s);
  return s;
}

std::string generator_config_to_text(const GeneratorConfig& c) {
  ordered_json j;
  j["num_users"] = c.num_users;
  j["num_files"] = c.num_files;
  j["cache_capacity"] = c.cache_capacity;
  j["contact_budget"] = c.contact_budget;
  j["zipf_shape"] = c.zipf_shape;
  j["gamma_shape"] = c.gamma_shape;
  j["gamma_scale"] = c.gamma_scale;
  j["recover_min"] = c.recover_min;
  j["recover_max"] = c.recover_max;
  j["max_multiplier"] = c.max_multiplier;
  j["nlr_limit"] = c.nlr_limit;
  j["delay_limit"] = c.delay_limit;
  j["seed"] = c.seed;
  return j.dump(2) + "\n";
}

GeneratorConfig generator_config_from_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("generator config: not valid JSON: ") + e.what());
  }
  GeneratorConfig c;
  auto get = [&](const char* name, auto& field) {
    auto it = j.find(name);
    if (it != j.end()) field = it->get<std::decay_t<decltype(field)>>();
  };
  get("num_users", c.num_users);
  get("num_files", c.num_files);
  get("cache_capacity", c.cache_capacity);
  get("contact_budget", c.contact_budget);
  get("zipf_shape", c.zipf_shape);
  get("gamma_shape", c.gamma_shape);
  get("gamma_scale", c.gamma_scale);
  get("recover_min", c.recover_min);
  get("recover_max", c.recover_max);
  get("max_multiplier", c.max_multiplier);
  get("nlr_limit", c.nlr_limit);
  get("delay_limit", c.delay_limit);
  get("seed", c.seed);
  validate_generator_config(c);
  return c;
}

}  // namespace d2dcache
