#pragma once

#include <cstdint>
#include <vector>

#include "d2dcache/contact.hpp"
#include "d2dcache/model.hpp"

namespace d2dcache {

// Distribution of the number of segments of one file a user has collected by
// the end of the window, truncated at the recovery threshold: only
// P(S = b) for b below the threshold matters for the load ratio, so all mass
// at or above it is lumped together.
struct SegmentDistribution {
  std::vector<double> mass_below;   // index b = 0 .. S_rec-1
  double mass_at_or_above = 0.0;
};

struct NlrReport {
  double total = 0.0;            // mean over users
  std::vector<double> per_user;  // r_i
  Matrix<double> per_pair;       // r_fi, F x U
};

struct MonteCarloEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
  long samples = 0;
};

// Precomputed per-pair transfer data for a fixed (scenario, T). Building one
// of these up front amortizes the Poisson evaluations across placements, which
// matters when enumerating placement lattices.
class TransferTable {
 public:
  TransferTable(const Scenario& s, double t);

  const TransferDistribution& transfer(int i, int j, int cached) const;
  // E[min(B*M_ij, k)]
  double expected_transfer(int i, int j, int k) const;
  double window() const { return t_; }
  const Scenario& scenario() const { return *scenario_; }

 private:
  const Scenario* scenario_;
  double t_ = 0.0;
  int max_level_ = 0;
  std::vector<TransferDistribution> transfer_;  // (i*U + j) * (max_level+1) + x
  std::vector<double> expected_;                // same layout
};

// Exact distribution of collected segments for (file, user): convolution of
// every neighbor's transfer distribution in ascending user order, truncated at
// the recovery threshold after each step, then shifted by the self-cache term.
SegmentDistribution collected_distribution(const Scenario& s, const Placement& p, double t,
                                           int file, int user);
SegmentDistribution collected_distribution(const TransferTable& table, const Placement& p,
                                           int file, int user);

// Exact expected network load ratio.
NlrReport expected_nlr(const Scenario& s, const Placement& p, double t);
NlrReport expected_nlr(const TransferTable& table, const Placement& p);

// Sampling estimate of the same quantity. Per-sample counter-based substreams
// keyed off `seed`, so the result does not depend on evaluation chunking.
MonteCarloEstimate expected_nlr_monte_carlo(const Scenario& s, const Placement& p, double t,
                                            long samples, std::uint64_t seed);

// Linearizable lower bound: per (file, user) the shortfall of the *expected*
// collected count, clamped at zero, instead of the expected shortfall.
NlrReport lower_bound_nlr(const Scenario& s, const Placement& p, double t);
NlrReport lower_bound_nlr(const TransferTable& table, const Placement& p);

}  // namespace d2dcache
