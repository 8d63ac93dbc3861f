#pragma once

#include <vector>

namespace d2dcache {

// P(M = m) for M ~ Poisson(mean). Evaluated directly for small arguments and
// in log space once mean or m exceeds 30, where the factorial would overflow.
double poisson_pmf(double mean, long m);

// P(M <= m); -1 yields 0.
double poisson_cdf(double mean, long m);

// P(M >= m), computed as 1 minus a Kahan-compensated pmf sum so the tail is a
// first-class probability rather than a cancellation residue.
double poisson_tail(double mean, long m);

// E[min(B*M, cap)] for M ~ Poisson(mean): the expected number of segments a
// neighbor caching >= cap segments can hand over within the window, given at
// most `budget` segments per contact.
double expected_truncated_transfer(double mean, int budget, int cap);

// Distribution of min(B*M, cached): point masses at B*m for m below the
// saturation count, plus the Poisson upper tail collapsed onto `cached`.
struct TransferDistribution {
  std::vector<int> support;  // ascending
  std::vector<double> mass;  // aligned with support, sums to 1

  double mean() const;
};

TransferDistribution transfer_distribution(double mean, int budget, int cached);

}  // namespace d2dcache
