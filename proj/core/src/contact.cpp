#include "d2dcache/contact.hpp"

#include <cmath>
#include <stdexcept>

namespace d2dcache {

namespace {

void require_valid_mean(double mean) {
  if (std::isnan(mean) || mean < 0.0) {
    throw std::domain_error("poisson: mean must be >= 0");
  }
  if (!std::isfinite(mean)) {
    throw std::domain_error("poisson: mean must be finite");
  }
}

}  // namespace

double poisson_pmf(double mean, long m) {
  require_valid_mean(mean);
  if (m < 0) return 0.0;
  if (mean == 0.0) return m == 0 ? 1.0 : 0.0;
  if (mean <= 30.0 && m <= 30) {
    double p = std::exp(-mean);
    for (long t = 1; t <= m; ++t) p *= mean / static_cast<double>(t);
    return p;
  }
  double logp = -mean + static_cast<double>(m) * std::log(mean) -
                std::lgamma(static_cast<double>(m) + 1.0);
  double p = std::exp(logp);
  if (p > 1.0) p = 1.0;
  return p;
}

double poisson_cdf(double mean, long m) {
  require_valid_mean(mean);
  if (m < 0) return 0.0;
  double sum = 0.0;
  double comp = 0.0;  // Kahan carry
  for (long t = 0; t <= m; ++t) {
    double y = poisson_pmf(mean, t) - comp;
    double s = sum + y;
    comp = (s - sum) - y;
    sum = s;
  }
  return sum > 1.0 ? 1.0 : sum;
}

double poisson_tail(double mean, long m) {
  require_valid_mean(mean);
  if (m <= 0) return 1.0;
  double tail = 1.0 - poisson_cdf(mean, m - 1);
  if (tail < 0.0) tail = 0.0;
  if (tail > 1.0) tail = 1.0;
  return tail;
}

double expected_truncated_transfer(double mean, int budget, int cap) {
  require_valid_mean(mean);
  if (budget <= 0) throw std::domain_error("expected_truncated_transfer: budget must be positive");
  if (cap < 0) throw std::domain_error("expected_truncated_transfer: cap must be >= 0");
  if (cap == 0) return 0.0;
  const long saturate = (static_cast<long>(cap) + budget - 1) / budget;  // first m with B*m >= cap
  double sum = 0.0;
  double comp = 0.0;
  for (long m = 1; m < saturate; ++m) {
    double y = static_cast<double>(budget) * static_cast<double>(m) * poisson_pmf(mean, m) - comp;
    double s = sum + y;
    comp = (s - sum) - y;
    sum = s;
  }
  return sum + static_cast<double>(cap) * poisson_tail(mean, saturate);
}

double TransferDistribution::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) m += static_cast<double>(support[i]) * mass[i];
  return m;
}

TransferDistribution transfer_distribution(double mean, int budget, int cached) {
  require_valid_mean(mean);
  if (budget <= 0) throw std::domain_error("transfer_distribution: budget must be positive");
  if (cached < 0) throw std::domain_error("transfer_distribution: cached must be >= 0");
  TransferDistribution d;
  const long saturate = (static_cast<long>(cached) + budget - 1) / budget;
  double below = 0.0;
  double comp = 0.0;
  for (long m = 0; m < saturate; ++m) {
    double p = poisson_pmf(mean, m);
    d.support.push_back(budget * static_cast<int>(m));
    d.mass.push_back(p);
    double y = p - comp;
    double s = below + y;
    comp = (s - below) - y;
    below = s;
  }
  double tail = 1.0 - below;
  if (tail < 0.0) tail = 0.0;
  // B*(saturate-1) < cached always holds, so the tail point never collides
  // with an interior point except in the degenerate cached == 0 case.
  if (!d.support.empty() && d.support.back() == cached) {
    d.mass.back() += tail;
  } else {
    d.support.push_back(cached);
    d.mass.push_back(tail);
  }
  return d;
}

}  // namespace d2dcache
