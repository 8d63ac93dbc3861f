#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "d2dcache/milp.hpp"
#include "d2dcache/model.hpp"

namespace d2dcache {

enum class OutcomeStatus {
  Solved,
  Infeasible,      // R*_lb(T_max) > R': no window length can satisfy the cap
  StepExhausted,   // ESA ran the step below tolerance while still over the cap
};

std::string to_string(OutcomeStatus s);

struct SolveCounters {
  long solver_calls = 0;     // optimize_lower_bound-level invocations
  long bisection_probes = 0; // interior bisection probes (excludes endpoints)
  long ilp_nodes = 0;
  long lp_iterations = 0;
  long nlr_evaluations = 0;
  long esa_iterations = 0;
};

struct SolveOutcome {
  OutcomeStatus status = OutcomeStatus::Infeasible;
  double delay = 0.0;  // T*_lb, T*_c, T_so, or a baseline delay
  Placement placement;
  double exact_nlr = 1.0;
  double lb_nlr = 1.0;
  bool feasible = false;  // exact_nlr <= R' + 1e-9
  std::string method;
  SolveCounters counters;
};

struct BisectionResult {
  double value = 0.0;  // midpoint of the final bracket
  double lo = 0.0;
  double hi = 0.0;
  long probes = 0;
};

// Bisection on a monotone satisfaction predicate. Preconditions:
// !satisfied(lo) and satisfied(hi); maintains that invariant while shrinking
// the bracket to width <= eps. At most ceil(log2((hi-lo)/eps)) probes.
BisectionResult bisect_threshold(const std::function<bool(double)>& satisfied, double lo,
                                 double hi, double eps);

// Finds the smallest window (within tolerance) whose optimal lower-bound NLR
// meets the cap, together with the optimizing placement. Returns an
// Infeasible outcome when even T_max fails the cap.
SolveOutcome bisect_lower_bound(const Scenario& s, const SearchParams& params,
                                OptimizeMethod method, std::uint64_t seed = 0);

// Forward search: advance the window by `step`, halving on T_max overshoot,
// re-optimizing the placement at every iteration with the same method that
// produced the start, until the exact NLR meets the cap or the step falls
// to the tolerance.
SolveOutcome esa(const Scenario& s, const SearchParams& params, const SolveOutcome& start,
                 OptimizeMethod method, std::uint64_t seed = 0);

enum class BaselineKind { Random, Popularity };

std::string to_string(BaselineKind k);

Placement baseline_placement(const Scenario& s, BaselineKind kind, std::uint64_t seed);

// Smallest window at which the fixed placement meets the cap under the exact
// evaluator (valid bisection since R(x, .) is nonincreasing in T).
SolveOutcome baseline_delay(const Scenario& s, const Placement& p, const SearchParams& params);

}  // namespace d2dcache
