#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "d2dcache/model.hpp"

namespace d2dcache {

// Synthetic instance recipe: Zipf request popularity shared by all users,
// Gamma-distributed symmetric contact rates, uniform random recovery
// thresholds with a fixed budget multiplier.
struct GeneratorConfig {
  int num_users = 20;
  int num_files = 150;
  int cache_capacity = 2;  // uniform C across users
  int contact_budget = 2;
  double zipf_shape = 0.8;  // uniform across users
  double gamma_shape = 4.43;
  double gamma_scale = 1.0 / 1088.0;  // second Gamma parameter read as a scale
  int recover_min = 1;
  int recover_max = 3;
  int max_multiplier = 3;  // S_max = multiplier * S_rec
  double nlr_limit = 0.7;
  double delay_limit = 400.0;
  std::uint64_t seed = 1;

  bool operator==(const GeneratorConfig&) const = default;
};

void validate_generator_config(const GeneratorConfig& c);

// f^-gamma / sum_k k^-gamma for f = 1..F. Sums to 1, nonincreasing.
std::vector<double> zipf_popularity(double gamma, int num_files);

// Deterministic per seed; every draw site has its own named substream, so the
// layout documented in the README is stable under config extensions.
Scenario generate(const GeneratorConfig& config);

std::string generator_config_to_text(const GeneratorConfig& c);
GeneratorConfig generator_config_from_text(const std::string& text);

}  // namespace d2dcache
