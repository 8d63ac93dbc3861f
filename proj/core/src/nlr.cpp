#include "d2dcache/nlr.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "d2dcache/rng.hpp"

namespace d2dcache {

namespace {

void require_feasible(const Scenario& s, const Placement& p) {
  auto report = check_feasible(s, p);
  if (!report.ok) {
    throw std::invalid_argument("placement violates " + report.violations.front().describe());
  }
}

void require_window(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw std::invalid_argument("window T must be finite and >= 0");
  }
}

// In-place convolution of (below, at_or_above) with one transfer
// distribution, lumping everything that reaches s_rec.
void convolve_truncated(std::vector<double>& below, double& at_or_above,
                        const TransferDistribution& d, std::vector<double>& scratch) {
  const int s_rec = static_cast<int>(below.size());
  scratch.assign(below.size(), 0.0);
  double lumped = 0.0;
  for (int b = 0; b < s_rec; ++b) {
    double mass = below[b];
    if (mass == 0.0) continue;
    for (std::size_t k = 0; k < d.support.size(); ++k) {
      int target = b + d.support[k];
      double add = mass * d.mass[k];
      if (target < s_rec) {
        scratch[target] += add;
      } else {
        lumped += add;
      }
    }
  }
  below.swap(scratch);
  at_or_above += lumped;
}

void shift_by_self_cache(std::vector<double>& below, double& at_or_above, int self) {
  if (self == 0) return;
  const int s_rec = static_cast<int>(below.size());
  if (self >= s_rec) {
    for (double& v : below) {
      at_or_above += v;
      v = 0.0;
    }
    return;
  }
  for (int b = s_rec - 1; b >= 0; --b) {
    double mass = below[b];
    below[b] = 0.0;
    if (mass == 0.0) continue;
    int target = b + self;
    if (target < s_rec) {
      below[target] = mass;
    } else {
      at_or_above += mass;
    }
  }
}

double pair_load_ratio(const std::vector<double>& below, int s_rec) {
  double r = 0.0;
  for (int b = 0; b < s_rec; ++b) {
    r += static_cast<double>(s_rec - b) * below[b];
  }
  return r / static_cast<double>(s_rec);
}

NlrReport assemble_report(const Scenario& s, const Matrix<double>& per_pair) {
  NlrReport report;
  report.per_pair = per_pair;
  report.per_user.assign(s.num_users, 0.0);
  for (int i = 0; i < s.num_users; ++i) {
    double r_i = 0.0;
    for (int f = 0; f < s.num_files; ++f) {
      r_i += s.popularity(f, i) * per_pair(f, i);
    }
    report.per_user[i] = r_i;
  }
  double total = 0.0;
  for (double r : report.per_user) total += r;
  report.total = total / static_cast<double>(s.num_users);
  return report;
}

}  // namespace

TransferTable::TransferTable(const Scenario& s, double t) : scenario_(&s), t_(t) {
  require_window(t);
  max_level_ = s.max_recover_segments();
  const int u = s.num_users;
  transfer_.resize(static_cast<std::size_t>(u) * u * (max_level_ + 1));
  expected_.resize(transfer_.size(), 0.0);
  for (int i = 0; i < u; ++i) {
    for (int j = 0; j < u; ++j) {
      if (i == j) continue;
      double mean = s.contact_rate(i, j) * t;
      for (int x = 0; x <= max_level_; ++x) {
        std::size_t idx = (static_cast<std::size_t>(i) * u + j) * (max_level_ + 1) + x;
        transfer_[idx] = transfer_distribution(mean, s.contact_budget, x);
        expected_[idx] = expected_truncated_transfer(mean, s.contact_budget, x);
      }
    }
  }
}

const TransferDistribution& TransferTable::transfer(int i, int j, int cached) const {
  return transfer_[(static_cast<std::size_t>(i) * scenario_->num_users + j) * (max_level_ + 1) +
                   cached];
}

double TransferTable::expected_transfer(int i, int j, int k) const {
  return expected_[(static_cast<std::size_t>(i) * scenario_->num_users + j) * (max_level_ + 1) +
                   k];
}

SegmentDistribution collected_distribution(const TransferTable& table, const Placement& p,
                                           int file, int user) {
  const Scenario& s = table.scenario();
  const int s_rec = s.recover_segments[file];
  SegmentDistribution dist;
  dist.mass_below.assign(s_rec, 0.0);
  dist.mass_below[0] = 1.0;
  dist.mass_at_or_above = 0.0;
  std::vector<double> scratch;
  for (int j = 0; j < s.num_users; ++j) {
    if (j == user) continue;
    // Capping the neighbor's count at s_rec is exact: transfer mass at or
    // beyond the threshold is lumped either way.
    int cached = std::min(p.counts(file, j), s_rec);
    if (cached == 0) continue;  // point mass at zero, convolution is a no-op
    convolve_truncated(dist.mass_below, dist.mass_at_or_above, table.transfer(user, j, cached),
                       scratch);
  }
  shift_by_self_cache(dist.mass_below, dist.mass_at_or_above, p.counts(file, user));
  return dist;
}

SegmentDistribution collected_distribution(const Scenario& s, const Placement& p, double t,
                                           int file, int user) {
  require_window(t);
  require_feasible(s, p);
  const int s_rec = s.recover_segments[file];
  SegmentDistribution dist;
  dist.mass_below.assign(s_rec, 0.0);
  dist.mass_below[0] = 1.0;
  dist.mass_at_or_above = 0.0;
  std::vector<double> scratch;
  for (int j = 0; j < s.num_users; ++j) {
    if (j == user) continue;
    int cached = p.counts(file, j);
    if (cached == 0) continue;
    auto d = transfer_distribution(s.contact_rate(user, j) * t, s.contact_budget, cached);
    convolve_truncated(dist.mass_below, dist.mass_at_or_above, d, scratch);
  }
  shift_by_self_cache(dist.mass_below, dist.mass_at_or_above, p.counts(file, user));
  return dist;
}

NlrReport expected_nlr(const TransferTable& table, const Placement& p) {
  const Scenario& s = table.scenario();
  Matrix<double> per_pair(s.num_files, s.num_users, 0.0);
  for (int f = 0; f < s.num_files; ++f) {
    for (int i = 0; i < s.num_users; ++i) {
      auto dist = collected_distribution(table, p, f, i);
      per_pair(f, i) = pair_load_ratio(dist.mass_below, s.recover_segments[f]);
    }
  }
  return assemble_report(s, per_pair);
}

NlrReport expected_nlr(const Scenario& s, const Placement& p, double t) {
  require_window(t);
  require_feasible(s, p);
  TransferTable table(s, t);
  return expected_nlr(table, p);
}

NlrReport lower_bound_nlr(const TransferTable& table, const Placement& p) {
  const Scenario& s = table.scenario();
  Matrix<double> per_pair(s.num_files, s.num_users, 0.0);
  for (int f = 0; f < s.num_files; ++f) {
    const int s_rec = s.recover_segments[f];
    for (int i = 0; i < s.num_users; ++i) {
      double expected = static_cast<double>(p.counts(f, i));
      for (int j = 0; j < s.num_users; ++j) {
        if (j == i) continue;
        int cached = p.counts(f, j);
        if (cached == 0) continue;
        expected += table.expected_transfer(i, j, std::min(cached, s_rec));
      }
      double shortfall = std::max(static_cast<double>(s_rec) - expected, 0.0);
      per_pair(f, i) = shortfall / static_cast<double>(s_rec);
    }
  }
  return assemble_report(s, per_pair);
}

NlrReport lower_bound_nlr(const Scenario& s, const Placement& p, double t) {
  require_window(t);
  require_feasible(s, p);
  TransferTable table(s, t);
  return lower_bound_nlr(table, p);
}

MonteCarloEstimate expected_nlr_monte_carlo(const Scenario& s, const Placement& p, double t,
                                            long samples, std::uint64_t seed) {
  require_window(t);
  require_feasible(s, p);
  if (samples < 1) throw std::invalid_argument("monte carlo: samples must be >= 1");

  const int u = s.num_users;
  const int f_count = s.num_files;
  std::vector<long> contacts(static_cast<std::size_t>(u) * u, 0);

  double mean = 0.0;
  double m2 = 0.0;
  for (long n = 0; n < samples; ++n) {
    auto stream = RandomStream::keyed(seed, "nlr-mc-sample", static_cast<std::uint64_t>(n));
    for (int i = 0; i < u; ++i) {
      for (int j = i + 1; j < u; ++j) {
        long m = stream.poisson(s.contact_rate(i, j) * t);
        contacts[static_cast<std::size_t>(i) * u + j] = m;
        contacts[static_cast<std::size_t>(j) * u + i] = m;
      }
    }
    double value = 0.0;
    for (int i = 0; i < u; ++i) {
      double r_i = 0.0;
      for (int f = 0; f < f_count; ++f) {
        double pop = s.popularity(f, i);
        if (pop == 0.0) continue;
        const int s_rec = s.recover_segments[f];
        long collected = p.counts(f, i);
        for (int j = 0; j < u && collected < s_rec; ++j) {
          if (j == i) continue;
          long cap = static_cast<long>(s.contact_budget) *
                     contacts[static_cast<std::size_t>(i) * u + j];
          collected += std::min(cap, static_cast<long>(p.counts(f, j)));
        }
        if (collected < s_rec) {
          r_i += pop * static_cast<double>(s_rec - collected) / static_cast<double>(s_rec);
        }
      }
      value += r_i;
    }
    value /= static_cast<double>(u);
    // Welford update
    double delta = value - mean;
    mean += delta / static_cast<double>(n + 1);
    m2 += delta * (value - mean);
  }

  MonteCarloEstimate est;
  est.estimate = mean;
  est.samples = samples;
  est.standard_error =
      samples > 1 ? std::sqrt(m2 / (static_cast<double>(samples - 1) * static_cast<double>(samples)))
                  : 0.0;
  return est;
}

}  // namespace d2dcache
