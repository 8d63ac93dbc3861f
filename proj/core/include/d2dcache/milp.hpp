#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "d2dcache/lp.hpp"
#include "d2dcache/model.hpp"

namespace d2dcache {

// Level-variable reformulation of the lower-bound placement problem for one
// window length T. Columns are the binary level indicators y^k_fi (k = 0 ..
// S_rec_f) followed by the continuous shortfall auxiliaries N'_fi; rows are
// the shortfall definitions, the one-level-per-cell selection rows, per-user
// capacities and per-file segment budgets. Solving `lp` as-is (variables just
// nonnegative) is exactly the LP relaxation: selection rows cap the levels
// at 1, so no explicit upper bounds are needed.
struct AnocpModel {
  int num_users = 0;
  int num_files = 0;
  double window = 0.0;  // T
  int contact_budget = 1;
  std::vector<int> recover_segments;
  std::vector<int> max_segments;
  std::vector<int> cache_capacity;
  Matrix<double> popularity;

  lp::LinearProgram lp;
  int num_level_vars = 0;  // columns [0, num_level_vars) are y's
  int nprime_offset = 0;   // first N' column

  int y_index(int file, int user, int level) const;
  int nprime_index(int file, int user) const;

  struct LevelVar {
    int file = 0;
    int user = 0;
    int level = 0;
  };
  LevelVar level_var(int column) const;

  // e^k_fij = E[min(B*M_ij, k)]; depends on f only through the level cap.
  double transfer_coefficient(int file, int i, int j, int k) const;

  // R_lb(x, T) evaluated from the precomputed transfer gains.
  double lower_bound_value(const Placement& p) const;

  // Greedy repair: while a capacity or budget row is over, decrement the cell
  // whose unit decrement raises the lower bound least (ties: lowest file,
  // then lowest user).
  void repair(Placement& p) const;

  int max_recover = 0;
  std::vector<double> transfer_gain;  // (i*U + j) * (max_recover+1) + k

 private:
  std::vector<int> y_offset_;  // per file

  friend AnocpModel build_anocp(const Scenario& s, double t);
};

AnocpModel build_anocp(const Scenario& s, double t);

// Solves the LP relaxation of the model.
lp::Solution solve_lp(const AnocpModel& model);

struct IlpOptions {
  long node_budget = 1000000;
  // Early exits for sign probes: stop as soon as the incumbent proves the
  // optimum is <= the threshold, or the global bound proves it is > it.
  std::optional<double> stop_if_at_most;
  std::optional<double> stop_if_above;
  const Placement* warm_start = nullptr;  // feasible placement used as initial incumbent
  // When positive, give up (keeping the incumbent) after this many nodes
  // without an incumbent improvement. Leaves optimality unproven; meant for
  // heuristic solves on instances whose trees cannot close anyway.
  long stall_node_limit = 0;
};

enum class OptimizeMethod { Exact, RelaxRound };

std::string to_string(OptimizeMethod m);

struct MilpSolution {
  Placement placement;
  double objective = 0.0;  // lower-bound NLR of `placement` at the model's T
  long node_count = 0;
  double gap = 0.0;  // incumbent objective minus best open bound; 0 when proven
  bool optimal = false;
  OptimizeMethod method = OptimizeMethod::Exact;
  long lp_iterations = 0;
};

// Depth-first branch and bound on the level variables: branch on the most
// fractional y, dive toward its nearest integer, prune with LP bounds.
MilpSolution solve_ilp(const AnocpModel& model, const IlpOptions& opts = {});

// Samples one level per (file, user) with the relaxation values as
// probabilities, then repairs capacity/budget overruns. Deterministic per seed.
Placement round_relaxation(const lp::Solution& relaxed, const AnocpModel& model,
                           std::uint64_t seed);

// method == Exact: branch and bound. method == RelaxRound: LP + rounding.
MilpSolution optimize_lower_bound(const Scenario& s, double t, OptimizeMethod method,
                                  std::uint64_t seed = 0, const IlpOptions& opts = {});

}  // namespace d2dcache
