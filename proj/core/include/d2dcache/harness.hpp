#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "d2dcache/model.hpp"
#include "d2dcache/scenario_gen.hpp"
#include "d2dcache/search.hpp"

namespace d2dcache {

// Upper bound on the number of feasible placements: product over users of
// per-user capacity-constrained counts (segment budgets ignored).
double estimate_placement_count(const Scenario& s);

// Visits every feasible placement once, in lexicographic (user, file) cell
// order. Returns the number visited.
long enumerate_feasible_placements(const Scenario& s,
                                   const std::function<void(const Placement&)>& visit);

struct GapHistogram {
  bool refused = false;    // enumeration guard tripped
  double estimate = 0.0;   // upper-bound count reported on refusal
  double window = 0.0;     // T at which gaps were evaluated
  long total = 0;
  long zero_count = 0;     // gap <= 1e-12
  double zero_fraction = 0.0;
  double min_gap = 0.0;
  double max_gap = 0.0;
  double bin_width = 0.0;  // bins cover [0, 1]
  std::vector<long> bins;
};

// Exact minus lower-bound NLR over every feasible placement.
GapHistogram gap_histogram(const Scenario& s, double t, int bins, double guard = 1e8);

std::string gap_histogram_csv(const GapHistogram& h);

constexpr int kSweepCsvVersion = 1;

struct SweepConfig {
  GeneratorConfig base;            // cache_capacity and seed overridden per run
  std::vector<int> cache_sizes;
  std::vector<std::string> methods;  // lower-bound | esa-ilp | esa-rra | popularity | random
  int num_seeds = 1;
  std::uint64_t first_seed = 1;
  SearchParams params;
  int jobs = 1;

  bool operator==(const SweepConfig&) const = default;
};

struct SweepRow {
  std::string method;
  int cache_capacity = 0;
  std::uint64_t seed = 0;
  std::string status;   // solved | infeasible | step-exhausted | error
  double delay = 0.0;   // NaN when not solved
  double exact_nlr = 0.0;
  double lb_nlr = 0.0;
  int feasible = 0;
  SolveCounters counters;
  double wall_ms = 0.0;
  std::string error;
};

struct SweepResult {
  SweepConfig config;
  std::vector<SweepRow> rows;  // fixed order: cache size, seed, method
};

// Runs every (cache size, seed, method) combination; cells execute
// concurrently on `config.jobs` workers, outputs are identical regardless of
// worker count. Per-run failures are captured in the row.
SweepResult sweep_cache(const SweepConfig& config);

// `omit_timing` blanks the wall_ms column so byte-identical reruns compare
// clean; the column itself is never part of the determinism guarantee.
std::string sweep_csv(const SweepResult& result, bool include_aggregates = true,
                      bool omit_timing = false);

std::string sweep_manifest(const SweepConfig& config);
SweepConfig sweep_config_from_manifest(const std::string& text);

struct VerifyReport {
  bool ok = true;
  long rows_checked = 0;
  std::vector<std::string> mismatches;
};

// Recomputes every per-run row from (manifest, seed, method) and compares
// all non-timing fields; aggregate rows are rechecked against the parsed
// per-run rows.
VerifyReport verify_sweep(const std::string& manifest_text, const std::string& csv_text,
                          int jobs = 1);

}  // namespace d2dcache
