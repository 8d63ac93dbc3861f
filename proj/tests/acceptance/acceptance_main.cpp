// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavy criteria parallelize internally over --jobs workers; every
// run is deterministic regardless of the worker count.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "d2dcache/harness.hpp"
#include "d2dcache/milp.hpp"
#include "d2dcache/nlr.hpp"
#include "d2dcache/rng.hpp"
#include "d2dcache/scenario_gen.hpp"
#include "d2dcache/search.hpp"
#include "support/builders.hpp"
#include "support/oracles.hpp"

using namespace d2dcache;
using clock_type = std::chrono::steady_clock;

namespace {

int g_jobs = 2;

struct Criterion {
  int id;
  std::string name;
  std::optional<double> time_cap_s;
  std::function<bool(std::string&)> run;  // fills a detail string
};

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

template <typename Fn>
void parallel_for(long count, Fn&& body) {
  std::atomic<long> next{0};
  auto worker = [&]() {
    for (;;) {
      long i = next.fetch_add(1);
      if (i >= count) return;
      body(i);
    }
  };
  int jobs = std::max(1, g_jobs);
  if (jobs == 1) {
    worker();
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(jobs);
  for (int w = 0; w < jobs; ++w) threads.emplace_back(worker);
  for (auto& th : threads) th.join();
}

// ---- criterion 1: lower bound never exceeds the exact NLR -----------------

bool criterion_lower_bound_inequality(std::string& detail) {
  const long kTriples = 1000;
  std::vector<int> ok(kTriples, 0);
  parallel_for(kTriples, [&](long i) {
    auto rng = RandomStream::keyed(0xACC1, "triple", static_cast<std::uint64_t>(i));
    Scenario s = builders::random_scenario(rng, 8, 10);
    Placement p = builders::random_feasible_placement(s, rng);
    double t = rng.uniform(0.0, 20.0);
    TransferTable table(s, t);
    double exact = expected_nlr(table, p).total;
    double lb = lower_bound_nlr(table, p).total;
    ok[i] = (exact - lb >= -1e-10) ? 1 : 0;
  });
  long passed = 0;
  for (int v : ok) passed += v;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%ld/%ld triples with exact - bound >= -1e-10", passed,
                kTriples);
  detail = buf;
  return passed == kTriples;
}

// ---- criterion 2: both evaluators nonincreasing in T ----------------------

bool criterion_monotonicity(std::string& detail) {
  const long kPlacements = 200;
  std::vector<int> ok(kPlacements, 0);
  parallel_for(kPlacements, [&](long i) {
    auto rng = RandomStream::keyed(0xACC2, "mono", static_cast<std::uint64_t>(i));
    Scenario s = builders::random_scenario(rng, 6, 6);
    Placement p = builders::random_feasible_placement(s, rng);
    double t = 0.0;
    double prev_exact = std::numeric_limits<double>::infinity();
    double prev_lb = prev_exact;
    bool good = true;
    for (int step = 0; step < 20; ++step) {
      TransferTable table(s, t);
      double exact = expected_nlr(table, p).total;
      double lb = lower_bound_nlr(table, p).total;
      if (exact > prev_exact + 1e-10 || lb > prev_lb + 1e-10) good = false;
      prev_exact = exact;
      prev_lb = lb;
      t += rng.uniform(0.05, 2.5);
    }
    ok[i] = good ? 1 : 0;
  });
  long passed = 0;
  for (int v : ok) passed += v;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%ld/%ld placements monotone on 20-point grids", passed,
                kPlacements);
  detail = buf;
  return passed == kPlacements;
}

// ---- criterion 3: branch and bound equals brute force ---------------------

bool criterion_ilp_exactness(std::string& detail) {
  const long kInstances = 100;
  std::vector<int> ok(kInstances, 0);
  std::vector<double> worst(kInstances, 0.0);
  parallel_for(kInstances, [&](long i) {
    auto rng = RandomStream::keyed(0xACC3, "ilp", static_cast<std::uint64_t>(i));
    Scenario s = builders::random_scenario(rng, 3, 4, /*max_cache=*/2, /*max_rec=*/2);
    double t = rng.uniform(0.0, 8.0);
    AnocpModel model = build_anocp(s, t);
    MilpSolution sol = solve_ilp(model);
    TransferTable table(s, t);
    double best = std::numeric_limits<double>::infinity();
    oracle::for_each_feasible(s, [&](const Placement& p) {
      best = std::min(best, lower_bound_nlr(table, p).total);
    });
    double err = std::fabs(sol.objective - best);
    worst[i] = err;
    ok[i] = (sol.optimal && err <= 1e-9) ? 1 : 0;
  });
  long passed = 0;
  double max_err = 0.0;
  for (long i = 0; i < kInstances; ++i) {
    passed += ok[i];
    max_err = std::max(max_err, worst[i]);
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%ld/%ld instances equal brute force (max |err| = %.2e)",
                passed, kInstances, max_err);
  detail = buf;
  return passed == kInstances;
}

// ---- criterion 4: gap histogram regime ------------------------------------

bool criterion_gap_histogram(std::string& detail) {
  const int kSeeds = 10;
  std::vector<double> zero_fraction(kSeeds, 0.0);
  std::vector<double> max_gap(kSeeds, 0.0);
  std::vector<double> min_gap(kSeeds, 0.0);
  parallel_for(kSeeds, [&](long i) {
    GeneratorConfig cfg;
    cfg.num_users = 3;
    cfg.num_files = 8;
    cfg.cache_capacity = 2;
    cfg.contact_budget = 2;
    cfg.nlr_limit = 0.7;
    cfg.seed = static_cast<std::uint64_t>(i + 1);
    Scenario s = generate(cfg);
    GapHistogram h = gap_histogram(s, 400.0, 50);
    zero_fraction[i] = h.zero_fraction;
    max_gap[i] = h.max_gap;
    min_gap[i] = h.min_gap;
  });
  std::vector<double> sorted = zero_fraction;
  std::sort(sorted.begin(), sorted.end());
  double median = 0.5 * (sorted[4] + sorted[5]);
  double overall_max = *std::max_element(max_gap.begin(), max_gap.end());
  double overall_min = *std::min_element(min_gap.begin(), min_gap.end());
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "median zero-gap fraction %.3f (target [0.30,0.70]), max gap %.4f (< 0.12), "
                "min gap %.1e (>= -1e-10)",
                median, overall_max, overall_min);
  detail = buf;
  return median >= 0.30 && median <= 0.70 && overall_max < 0.12 && overall_min >= -1e-10;
}

// ---- criteria 5 and 6: bound ordering and ESA feasibility -----------------

struct OrderingRun {
  bool solvable = false;
  bool brute_forceable = false;
  bool ok = true;
  std::string note;
  // re-evaluation material for criterion 6
  double esa_ilp_delay = 0.0, esa_rra_delay = 0.0;
  bool esa_ilp_feasible = false, esa_rra_feasible = false;
  double esa_ilp_fresh_nlr = 1.0, esa_rra_fresh_nlr = 1.0;
  double nlr_limit = 0.0;
};

GeneratorConfig ordering_config(long i, bool tiny) {
  auto rng = RandomStream::keyed(0xACC5, "cfg", static_cast<std::uint64_t>(i));
  GeneratorConfig cfg;
  if (tiny) {
    cfg.num_users = rng.uniform_int(2, 3);
    cfg.num_files = rng.uniform_int(2, 4);
    cfg.cache_capacity = rng.uniform_int(1, 2);
    cfg.recover_min = 1;
    cfg.recover_max = 2;
  } else {
    cfg.num_users = rng.uniform_int(4, 6);
    cfg.num_files = rng.uniform_int(6, 12);
    cfg.cache_capacity = rng.uniform_int(1, 3);
    cfg.recover_min = 1;
    cfg.recover_max = 3;
  }
  cfg.contact_budget = rng.uniform_int(1, 3);
  cfg.zipf_shape = 0.8;
  cfg.gamma_scale = 1.0 / 200.0;  // brisker contacts keep windows short
  cfg.nlr_limit = rng.uniform(0.35, 0.8);
  cfg.delay_limit = 400.0;
  cfg.seed = static_cast<std::uint64_t>(1000 + i);
  return cfg;
}

OrderingRun run_ordering_instance(long i) {
  OrderingRun run;
  bool tiny = (i % 3 == 0);  // a third of the pool is brute-forceable
  GeneratorConfig cfg = ordering_config(i, tiny);
  Scenario s = generate(cfg);
  SearchParams params{0.0, 400.0, 1.0, 1e-6};
  const double eps = 1e-6;

  SolveOutcome start = bisect_lower_bound(s, params, OptimizeMethod::Exact, cfg.seed);
  if (start.status != OutcomeStatus::Solved) return run;
  run.solvable = true;
  run.nlr_limit = s.nlr_limit;

  SolveOutcome so_ilp = esa(s, params, start, OptimizeMethod::Exact, cfg.seed);
  SolveOutcome rra_start = bisect_lower_bound(s, params, OptimizeMethod::RelaxRound, cfg.seed);
  std::optional<SolveOutcome> so_rra;
  if (rra_start.status == OutcomeStatus::Solved) {
    so_rra = esa(s, params, rra_start, OptimizeMethod::RelaxRound, cfg.seed);
  }

  auto note = [&](const std::string& m) {
    run.ok = false;
    if (!run.note.empty()) run.note += "; ";
    run.note += "instance " + std::to_string(i) + ": " + m;
  };

  if (so_ilp.status == OutcomeStatus::Solved && start.delay > so_ilp.delay + eps) {
    note("T_lb > T_so(ilp)");
  }
  if (so_rra && so_rra->status == OutcomeStatus::Solved && start.delay > so_rra->delay + eps) {
    note("T_lb > T_so(rra)");
  }

  run.brute_forceable = tiny;
  if (tiny) {
    double t_grid = std::numeric_limits<double>::infinity();
    TransferTable probe_table(s, params.t_max);
    enumerate_feasible_placements(s, [&](const Placement& p) {
      auto ok_at = [&](double t) { return expected_nlr(s, p, t).total <= s.nlr_limit + 1e-9; };
      if (expected_nlr(probe_table, p).total > s.nlr_limit + 1e-9) return;
      if (ok_at(params.t_min)) {
        t_grid = params.t_min;
        return;
      }
      double hi = std::min(t_grid, params.t_max);
      if (hi <= params.t_min + params.tolerance) return;
      t_grid = std::min(t_grid, bisect_threshold(ok_at, params.t_min, hi, params.tolerance).hi);
    });
    if (std::isfinite(t_grid)) {
      if (start.delay > t_grid + eps) note("T_lb > grid optimum");
      if (so_ilp.status == OutcomeStatus::Solved && so_ilp.delay < t_grid - eps) {
        note("T_so(ilp) < grid optimum");
      }
      if (so_rra && so_rra->status == OutcomeStatus::Solved && so_rra->delay < t_grid - eps) {
        note("T_so(rra) < grid optimum");
      }
    }
  }

  run.esa_ilp_delay = so_ilp.delay;
  run.esa_ilp_feasible = so_ilp.feasible;
  run.esa_ilp_fresh_nlr = expected_nlr(s, so_ilp.placement, so_ilp.delay).total;
  if (so_rra) {
    run.esa_rra_delay = so_rra->delay;
    run.esa_rra_feasible = so_rra->feasible;
    run.esa_rra_fresh_nlr = expected_nlr(s, so_rra->placement, so_rra->delay).total;
  }
  return run;
}

std::vector<OrderingRun> g_ordering_runs;  // filled by criterion 5, reused by 6

bool criterion_bound_ordering(std::string& detail) {
  const long kPool = 80;  // first 50 solvable in index order count
  std::vector<OrderingRun> runs(kPool);
  parallel_for(kPool, [&](long i) { runs[i] = run_ordering_instance(i); });

  long solvable = 0, brute = 0;
  bool all_ok = true;
  std::string first_note;
  g_ordering_runs.clear();
  for (const OrderingRun& run : runs) {
    if (!run.solvable) continue;
    if (solvable == 50) break;
    ++solvable;
    if (run.brute_forceable) ++brute;
    if (!run.ok && first_note.empty()) first_note = run.note;
    all_ok = all_ok && run.ok;
    g_ordering_runs.push_back(run);
  }
  char buf[220];
  std::snprintf(buf, sizeof(buf),
                "%ld solvable instances (%ld brute-forced)%s%s", solvable, brute,
                first_note.empty() ? "" : ", first failure: ", first_note.c_str());
  detail = buf;
  return all_ok && solvable == 50;
}

bool criterion_esa_feasibility(std::string& detail) {
  if (g_ordering_runs.empty()) {
    // allow running standalone
    std::string scratch;
    criterion_bound_ordering(scratch);
  }
  long flagged = 0, confirmed = 0;
  for (const OrderingRun& run : g_ordering_runs) {
    if (run.esa_ilp_feasible) {
      ++flagged;
      if (run.esa_ilp_fresh_nlr <= run.nlr_limit + 1e-9) ++confirmed;
    }
    if (run.esa_rra_feasible) {
      ++flagged;
      if (run.esa_rra_fresh_nlr <= run.nlr_limit + 1e-9) ++confirmed;
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%ld/%ld feasible-flagged outcomes confirmed by re-evaluation",
                confirmed, flagged);
  detail = buf;
  return flagged > 0 && confirmed == flagged;
}

// ---- criterion 7: method ordering on the cache-size sweep -----------------

bool criterion_method_ordering(std::string& detail) {
  SweepConfig cfg;
  cfg.base.num_users = 10;
  cfg.base.num_files = 50;
  cfg.base.contact_budget = 2;
  cfg.base.nlr_limit = 0.7;
  cfg.base.zipf_shape = 0.8;
  cfg.base.delay_limit = 400.0;
  cfg.cache_sizes = {2, 3, 4, 5};
  cfg.methods = {"lower-bound", "esa-ilp", "esa-rra", "popularity", "random"};
  cfg.num_seeds = 20;
  cfg.first_seed = 1;
  cfg.params = SearchParams{0.0, 400.0, 1.0, 1e-6};
  cfg.jobs = g_jobs;
  SweepResult result = sweep_cache(cfg);

  std::map<std::pair<std::string, int>, std::pair<double, long>> mean;  // sum, solved count
  std::map<std::pair<std::uint64_t, int>, std::map<std::string, const SweepRow*>> cells;
  for (const SweepRow& row : result.rows) {
    if (row.status == "error") {
      detail = "run failed: " + row.error;
      return false;
    }
    if (row.status == "solved") {
      auto& agg = mean[{row.method, row.cache_capacity}];
      agg.first += row.delay;
      agg.second += 1;
    }
    cells[{row.seed, row.cache_capacity}][row.method] = &row;
  }
  auto mean_of = [&](const std::string& m, int c) {
    auto& agg = mean[{m, c}];
    return agg.second > 0 ? agg.first / agg.second
                          : std::numeric_limits<double>::quiet_NaN();
  };

  bool ok = true;
  std::string why;
  auto complain = [&](const std::string& m) {
    ok = false;
    if (why.empty()) why = m;
  };

  for (int c : cfg.cache_sizes) {
    long n_lb = mean[{"lower-bound", c}].second;
    long n_ilp = mean[{"esa-ilp", c}].second;
    long n_rra = mean[{"esa-rra", c}].second;
    if (n_lb != 20 || n_ilp != 20 || n_rra != 20) {
      complain("unsolved lower-bound/esa rows at C=" + std::to_string(c));
      continue;
    }
    double lb = mean_of("lower-bound", c);
    double ilp = mean_of("esa-ilp", c);
    double rra = mean_of("esa-rra", c);
    if (!(lb <= ilp + 1e-6)) complain("mean lower-bound > mean esa-ilp at C=" + std::to_string(c));
    if (!(ilp <= rra + 1e-6)) complain("mean esa-ilp > mean esa-rra at C=" + std::to_string(c));
  }

  // esa-ilp beats popularity in at least 80% of runs
  long comparable = 0, ilp_wins = 0;
  for (auto& [key, methods] : cells) {
    auto it_ilp = methods.find("esa-ilp");
    auto it_pop = methods.find("popularity");
    if (it_ilp == methods.end() || it_pop == methods.end()) continue;
    if (it_ilp->second->status != "solved") continue;
    ++comparable;
    if (it_pop->second->status != "solved" ||
        it_ilp->second->delay < it_pop->second->delay) {
      ++ilp_wins;
    }
  }
  double win_rate = comparable > 0 ? static_cast<double>(ilp_wins) / comparable : 0.0;
  if (win_rate < 0.80) complain("esa-ilp beats popularity in only " + std::to_string(win_rate));

  // delays nonincreasing in C per method (means over solved rows)
  for (const std::string& m : {"lower-bound", "esa-ilp", "esa-rra", "popularity"}) {
    double prev = std::numeric_limits<double>::infinity();
    for (int c : cfg.cache_sizes) {
      double v = mean_of(m, c);
      if (std::isnan(v)) continue;
      if (v > prev + 1e-6) complain(m + " mean delay increases at C=" + std::to_string(c));
      prev = v;
    }
  }

  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "means at C=2..5: lb (%.1f %.1f %.1f %.1f), esa-ilp (%.1f %.1f %.1f %.1f), "
                "esa-rra (%.1f %.1f %.1f %.1f), pop (%.1f %.1f %.1f %.1f); ilp-vs-pop win rate "
                "%.2f%s%s",
                mean_of("lower-bound", 2), mean_of("lower-bound", 3), mean_of("lower-bound", 4),
                mean_of("lower-bound", 5), mean_of("esa-ilp", 2), mean_of("esa-ilp", 3),
                mean_of("esa-ilp", 4), mean_of("esa-ilp", 5), mean_of("esa-rra", 2),
                mean_of("esa-rra", 3), mean_of("esa-rra", 4), mean_of("esa-rra", 5),
                mean_of("popularity", 2), mean_of("popularity", 3), mean_of("popularity", 4),
                mean_of("popularity", 5), win_rate, why.empty() ? "" : " | ", why.c_str());
  detail = buf;
  return ok;
}

// ---- criterion 8: Monte Carlo consistency ----------------------------------

bool criterion_monte_carlo(std::string& detail) {
  const long kTriples = 100;
  std::vector<int> ok(kTriples, 0);
  parallel_for(kTriples, [&](long i) {
    auto rng = RandomStream::keyed(0xACC8, "mc", static_cast<std::uint64_t>(i));
    Scenario s = builders::random_scenario(rng, 6, 8);
    Placement p = builders::random_feasible_placement(s, rng);
    double t = rng.uniform(0.0, 15.0);
    double exact = expected_nlr(s, p, t).total;
    auto mc = expected_nlr_monte_carlo(s, p, t, 100000, static_cast<std::uint64_t>(9000 + i));
    double err = std::fabs(mc.estimate - exact);
    ok[i] = (err <= 3.0 * mc.standard_error + 1e-12) ? 1 : 0;
  });
  long passed = 0;
  for (int v : ok) passed += v;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%ld/%ld estimates within 3 standard errors (need >= 97)",
                passed, kTriples);
  detail = buf;
  return passed >= 97;
}

// ---- criterion 9: bisection convergence ------------------------------------

bool criterion_bisection(std::string& detail) {
  auto r = bisect_threshold([](double t) { return std::exp(-t) <= 0.5; }, 0.0, 400.0, 1e-6);
  double err = std::fabs(r.value - std::log(2.0));
  char buf[128];
  std::snprintf(buf, sizeof(buf), "recovered ln 2 with error %.2e in %ld probes (cap 29)", err,
                r.probes);
  detail = buf;
  return err <= 1e-6 && r.probes <= 29;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  g_jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (g_jobs < 1) g_jobs = 2;
  for (int a = 1; a < argc; ++a) {
    if (std::strcmp(argv[a], "--jobs") == 0 && a + 1 < argc) {
      g_jobs = std::atoi(argv[++a]);
    } else if (std::strcmp(argv[a], "--criterion") == 0 && a + 1 < argc) {
      selected.push_back(std::atoi(argv[++a]));
    } else {
      std::fprintf(stderr, "usage: %s [--jobs N] [--criterion K]...\n", argv[0]);
      return 2;
    }
  }

  std::vector<Criterion> criteria = {
      {1, "lower-bound inequality", 60.0, criterion_lower_bound_inequality},
      {2, "monotonicity in T", 60.0, criterion_monotonicity},
      {3, "branch-and-bound exactness", 120.0, criterion_ilp_exactness},
      {4, "gap histogram regime", std::nullopt, criterion_gap_histogram},
      {5, "bound ordering", 600.0, criterion_bound_ordering},
      {6, "ESA feasibility flags", std::nullopt, criterion_esa_feasibility},
      {7, "method ordering on the cache sweep", std::nullopt, criterion_method_ordering},
      {8, "Monte Carlo consistency", 120.0, criterion_monte_carlo},
      {9, "bisection convergence", std::nullopt, criterion_bisection},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), c.id) == selected.end()) {
      continue;
    }
    auto t0 = clock_type::now();
    std::string detail;
    bool pass = false;
    try {
      pass = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
      pass = false;
    }
    double elapsed = seconds_since(t0);
    if (pass && c.time_cap_s && elapsed > *c.time_cap_s) {
      pass = false;
      detail += " [exceeded time cap]";
    }
    std::string cap_note;
    if (c.time_cap_s) {
      cap_note = ", cap " + std::to_string(static_cast<int>(*c.time_cap_s)) + " s";
    }
    std::printf("[%s] criterion %d: %s — %s (%.1f s%s)\n", pass ? "PASS" : "FAIL", c.id,
                c.name.c_str(), detail.c_str(), elapsed, cap_note.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
  }
  if (failures == 0) {
    std::printf("acceptance: all criteria passed\n");
  } else {
    std::printf("acceptance: %d criterion(s) failed\n", failures);
  }
  return failures == 0 ? 0 : 1;
}
