#include "d2dcache/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "d2dcache/nlr.hpp"

namespace d2dcache {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kZeroGapTol = 1e-12;

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s.empty()) return kNaN;
  return std::stod(s);
}

std::string sanitize(std::string text) {
  for (char& c : text) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return text;
}

}  // namespace

double estimate_placement_count(const Scenario& s) {
  double product = 1.0;
  for (int i = 0; i < s.num_users; ++i) {
    const int cap = s.cache_capacity[i];
    std::vector<double> ways(cap + 1, 0.0);
    ways[0] = 1.0;
    for (int f = 0; f < s.num_files; ++f) {
      std::vector<double> next(cap + 1, 0.0);
      const int top = std::min(s.recover_segments[f], cap);
      for (int used = 0; used <= cap; ++used) {
        if (ways[used] == 0.0) continue;
        for (int x = 0; x <= top && used + x <= cap; ++x) next[used + x] += ways[used];
      }
      ways.swap(next);
    }
    double count = 0.0;
    for (double w : ways) count += w;
    product *= count;
    if (!std::isfinite(product)) return std::numeric_limits<double>::infinity();
  }
  return product;
}

long enumerate_feasible_placements(const Scenario& s,
                                   const std::function<void(const Placement&)>& visit) {
  Placement p(s.num_files, s.num_users);
  std::vector<int> used_user(s.num_users, 0);
  std::vector<int> used_file(s.num_files, 0);
  long count = 0;
  const int cells = s.num_users * s.num_files;

  // Iterative depth-first walk over cells in (user, file) order.
  std::vector<int> level(cells, -1);
  int cell = 0;
  while (cell >= 0) {
    if (cell == cells) {
      ++count;
      visit(p);
      --cell;
      continue;
    }
    const int user = cell / s.num_files;
    const int file = cell % s.num_files;
    int x = level[cell] + 1;
    if (level[cell] >= 0) {
      // undo previous choice before trying the next
      p.counts(file, user) = 0;
      used_user[user] -= level[cell];
      used_file[file] -= level[cell];
    }
    const int top = std::min({s.recover_segments[file], s.cache_capacity[user] - used_user[user],
                              s.max_segments[file] - used_file[file]});
    if (x > top) {
      level[cell] = -1;
      --cell;
      continue;
    }
    level[cell] = x;
    p.counts(file, user) = x;
    used_user[user] += x;
    used_file[file] += x;
    ++cell;
  }
  return count;
}

GapHistogram gap_histogram(const Scenario& s, double t, int bins, double guard) {
  validate_scenario(s);
  if (bins < 1) throw std::invalid_argument("gap_histogram: need at least one bin");
  GapHistogram h;
  h.window = t;
  h.estimate = estimate_placement_count(s);
  if (h.estimate > guard) {
    h.refused = true;
    return h;
  }
  h.bins.assign(bins, 0);
  h.bin_width = 1.0 / bins;
  h.min_gap = std::numeric_limits<double>::infinity();
  h.max_gap = -std::numeric_limits<double>::infinity();

  TransferTable table(s, t);
  enumerate_feasible_placements(s, [&](const Placement& p) {
    double exact = expected_nlr(table, p).total;
    double lb = lower_bound_nlr(table, p).total;
    double gap = exact - lb;
    h.min_gap = std::min(h.min_gap, gap);
    h.max_gap = std::max(h.max_gap, gap);
    if (gap <= kZeroGapTol) ++h.zero_count;
    int bin = gap <= 0.0 ? 0 : std::min(static_cast<int>(gap / h.bin_width), bins - 1);
    ++h.bins[bin];
    ++h.total;
  });
  h.zero_fraction = h.total > 0 ? static_cast<double>(h.zero_count) / h.total : 0.0;
  if (h.total == 0) {
    h.min_gap = 0.0;
    h.max_gap = 0.0;
  }
  return h;
}

std::string gap_histogram_csv(const GapHistogram& h) {
  std::ostringstream os;
  os << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < h.bins.size(); ++b) {
    os << format_double(b * h.bin_width) << "," << format_double((b + 1) * h.bin_width) << ","
       << h.bins[b] << "\n";
  }
  return os.str();
}

namespace {

const std::vector<std::string> kKnownMethods = {"lower-bound", "esa-ilp", "esa-rra", "popularity",
                                                "random"};

struct CellContext {
  Scenario scenario;
  SearchParams params;
  std::uint64_t seed = 0;
  std::optional<SolveOutcome> bisect_exact;
  std::optional<SolveOutcome> bisect_rra;

  const SolveOutcome& exact_start() {
    if (!bisect_exact) bisect_exact = bisect_lower_bound(scenario, params, OptimizeMethod::Exact, seed);
    return *bisect_exact;
  }
  const SolveOutcome& rra_start() {
    if (!bisect_rra) bisect_rra = bisect_lower_bound(scenario, params, OptimizeMethod::RelaxRound, seed);
    return *bisect_rra;
  }
};

SolveOutcome run_method(CellContext& ctx, const std::string& method) {
  if (method == "lower-bound") return ctx.exact_start();
  if (method == "esa-ilp") {
    const SolveOutcome& start = ctx.exact_start();
    if (start.status != OutcomeStatus::Solved) return start;
    return esa(ctx.scenario, ctx.params, start, OptimizeMethod::Exact, ctx.seed);
  }
  if (method == "esa-rra") {
    const SolveOutcome& start = ctx.rra_start();
    if (start.status != OutcomeStatus::Solved) return start;
    return esa(ctx.scenario, ctx.params, start, OptimizeMethod::RelaxRound, ctx.seed);
  }
  if (method == "popularity" || method == "random") {
    BaselineKind kind = method == "random" ? BaselineKind::Random : BaselineKind::Popularity;
    Placement p = baseline_placement(ctx.scenario, kind, ctx.seed);
    SolveOutcome out = baseline_delay(ctx.scenario, p, ctx.params);
    out.method = method;
    return out;
  }
  throw std::invalid_argument("unknown sweep method: " + method);
}

void fill_row(SweepRow& row, const SolveOutcome& out) {
  row.status = to_string(out.status);
  if (out.status == OutcomeStatus::Infeasible) {
    row.delay = kNaN;
    row.exact_nlr = kNaN;
    row.lb_nlr = kNaN;
    row.feasible = 0;
  } else {
    row.delay = out.delay;
    row.exact_nlr = out.exact_nlr;
    row.lb_nlr = out.lb_nlr;
    row.feasible = out.feasible ? 1 : 0;
  }
  row.counters = out.counters;
}

}  // namespace

SweepResult sweep_cache(const SweepConfig& config) {
  validate_generator_config(config.base);
  validate_search_params(config.params);
  if (config.num_seeds < 1) throw std::invalid_argument("sweep: num_seeds must be >= 1");
  if (config.cache_sizes.empty()) throw std::invalid_argument("sweep: no cache sizes given");
  if (config.methods.empty()) throw std::invalid_argument("sweep: no methods given");
  for (const std::string& m : config.methods) {
    if (std::find(kKnownMethods.begin(), kKnownMethods.end(), m) == kKnownMethods.end()) {
      throw std::invalid_argument("unknown sweep method: " + m);
    }
  }

  SweepResult result;
  result.config = config;
  const long num_cells = static_cast<long>(config.cache_sizes.size()) * config.num_seeds;
  const long methods = static_cast<long>(config.methods.size());
  result.rows.assign(num_cells * methods, SweepRow{});

  std::atomic<long> next_cell{0};
  auto worker = [&]() {
    for (;;) {
      long cell = next_cell.fetch_add(1);
      if (cell >= num_cells) return;
      const int c_index = static_cast<int>(cell / config.num_seeds);
      const int s_index = static_cast<int>(cell % config.num_seeds);

      CellContext ctx;
      GeneratorConfig gen = config.base;
      gen.cache_capacity = config.cache_sizes[c_index];
      gen.seed = config.first_seed + static_cast<std::uint64_t>(s_index);
      ctx.seed = gen.seed;
      ctx.params = config.params;

      for (long m = 0; m < methods; ++m) {
        SweepRow& row = result.rows[cell * methods + m];
        row.method = config.methods[m];
        row.cache_capacity = gen.cache_capacity;
        row.seed = gen.seed;
        auto t0 = std::chrono::steady_clock::now();
        try {
          if (ctx.scenario.num_users == 0) ctx.scenario = generate(gen);
          fill_row(row, run_method(ctx, config.methods[m]));
        } catch (const std::exception& e) {
          row.status = "error";
          row.delay = kNaN;
          row.exact_nlr = kNaN;
          row.lb_nlr = kNaN;
          row.error = sanitize(e.what());
        }
        row.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
      }
    }
  };

  int jobs = std::max(1, config.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(jobs);
    for (int w = 0; w < jobs; ++w) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
  }
  return result;
}

namespace {

constexpr const char* kCsvHeader =
    "method,cache,seed,status,delay,exact_nlr,lb_nlr,feasible,solver_calls,bisection_probes,"
    "ilp_nodes,lp_iterations,nlr_evaluations,esa_iterations,wall_ms,error";

void append_row(std::ostringstream& os, const SweepRow& r, bool omit_timing) {
  os << r.method << ',' << r.cache_capacity << ',' << r.seed << ',' << r.status << ','
     << format_double(r.delay) << ',' << format_double(r.exact_nlr) << ','
     << format_double(r.lb_nlr) << ',' << r.feasible << ',' << r.counters.solver_calls << ','
     << r.counters.bisection_probes << ',' << r.counters.ilp_nodes << ','
     << r.counters.lp_iterations << ',' << r.counters.nlr_evaluations << ','
     << r.counters.esa_iterations << ',' << (omit_timing ? "" : format_double(r.wall_ms)) << ','
     << r.error << '\n';
}

struct Aggregate {
  std::string method;
  int cache = 0;
  long solved = 0;
  long rows = 0;
  double delay_sum = 0.0;
  double exact_sum = 0.0;
  double lb_sum = 0.0;
  long feasible_count = 0;
};

std::vector<Aggregate> aggregate_rows(const SweepConfig& config,
                                      const std::vector<SweepRow>& rows) {
  std::vector<Aggregate> out;
  for (int c : config.cache_sizes) {
    for (const std::string& m : config.methods) {
      Aggregate a;
      a.method = m;
      a.cache = c;
      for (const SweepRow& r : rows) {
        if (r.method != m || r.cache_capacity != c) continue;
        ++a.rows;
        if (r.status == "solved") {
          ++a.solved;
          a.delay_sum += r.delay;
          a.exact_sum += r.exact_nlr;
          a.lb_sum += r.lb_nlr;
        }
        if (r.feasible) ++a.feasible_count;
      }
      out.push_back(a);
    }
  }
  return out;
}

}  // namespace

std::string sweep_csv(const SweepResult& result, bool include_aggregates, bool omit_timing) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const SweepRow& r : result.rows) append_row(os, r, omit_timing);
  if (include_aggregates) {
    for (const Aggregate& a : aggregate_rows(result.config, result.rows)) {
      double n = static_cast<double>(a.solved);
      os << a.method << ',' << a.cache << ",mean,"
         << (a.solved == a.rows ? "solved" : "partial") << ','
         << format_double(a.solved ? a.delay_sum / n : kNaN) << ','
         << format_double(a.solved ? a.exact_sum / n : kNaN) << ','
         << format_double(a.solved ? a.lb_sum / n : kNaN) << ','
         << format_double(a.rows ? static_cast<double>(a.feasible_count) / a.rows : kNaN)
         << ",,,,,,,,\n";
    }
  }
  return os.str();
}

std::string sweep_manifest(const SweepConfig& config) {
  ordered_json j;
  j["manifest_version"] = 1;
  j["csv_version"] = kSweepCsvVersion;
  j["generator"] = ordered_json::parse(generator_config_to_text(config.base));
  j["cache_sizes"] = config.cache_sizes;
  j["methods"] = config.methods;
  j["num_seeds"] = config.num_seeds;
  j["first_seed"] = config.first_seed;
  j["t_min"] = config.params.t_min;
  j["t_max"] = config.params.t_max;
  j["step"] = config.params.step;
  j["tolerance"] = config.params.tolerance;
  return j.dump(2) + "\n";
}

SweepConfig sweep_config_from_manifest(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("manifest: not valid JSON: ") + e.what());
  }
  if (j.value("manifest_version", 0) != 1) throw std::invalid_argument("manifest: bad version");
  if (j.value("csv_version", 0) != kSweepCsvVersion)
    throw std::invalid_argument("manifest: csv_version mismatch");
  SweepConfig c;
  c.base = generator_config_from_text(j.at("generator").dump());
  c.cache_sizes = j.at("cache_sizes").get<std::vector<int>>();
  c.methods = j.at("methods").get<std::vector<std::string>>();
  c.num_seeds = j.at("num_seeds").get<int>();
  c.first_seed = j.at("first_seed").get<std::uint64_t>();
  c.params.t_min = j.at("t_min").get<double>();
  c.params.t_max = j.at("t_max").get<double>();
  c.params.step = j.at("step").get<double>();
  c.params.tolerance = j.at("tolerance").get<double>();
  return c;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

bool same_number(double a, double b) {
  if (std::isnan(a) && std::isnan(b)) return true;
  return format_double(a) == format_double(b);
}

}  // namespace

VerifyReport verify_sweep(const std::string& manifest_text, const std::string& csv_text,
                          int jobs) {
  SweepConfig config = sweep_config_from_manifest(manifest_text);
  VerifyReport report;

  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) {
    report.ok = false;
    report.mismatches.push_back("csv: empty file");
    return report;
  }
  if (line != kCsvHeader) {
    report.ok = false;
    report.mismatches.push_back("csv: unexpected header");
    return report;
  }
  struct ParsedRow {
    SweepRow row;
    bool aggregate = false;
    std::string raw;
  };
  std::vector<ParsedRow> parsed;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 16) {
      report.ok = false;
      report.mismatches.push_back("csv: malformed row: " + line);
      return report;
    }
    ParsedRow pr;
    pr.raw = line;
    pr.row.method = f[0];
    pr.row.cache_capacity = std::stoi(f[1]);
    pr.aggregate = (f[2] == "mean");
    if (!pr.aggregate) pr.row.seed = std::stoull(f[2]);
    pr.row.status = f[3];
    pr.row.delay = parse_double(f[4]);
    pr.row.exact_nlr = parse_double(f[5]);
    pr.row.lb_nlr = parse_double(f[6]);
    if (!pr.aggregate) {
      pr.row.feasible = std::stoi(f[7]);
      pr.row.counters.solver_calls = std::stol(f[8]);
      pr.row.counters.bisection_probes = std::stol(f[9]);
      pr.row.counters.ilp_nodes = std::stol(f[10]);
      pr.row.counters.lp_iterations = std::stol(f[11]);
      pr.row.counters.nlr_evaluations = std::stol(f[12]);
      pr.row.counters.esa_iterations = std::stol(f[13]);
    }
    parsed.push_back(std::move(pr));
  }

  std::vector<const ParsedRow*> runs;
  for (const auto& pr : parsed) {
    if (!pr.aggregate) runs.push_back(&pr);
  }

  std::vector<std::string> mismatch_slots(runs.size());
  std::atomic<long> next{0};
  auto worker = [&]() {
    for (;;) {
      long idx = next.fetch_add(1);
      if (idx >= static_cast<long>(runs.size())) return;
      const SweepRow& row = runs[idx]->row;
      std::ostringstream note;
      try {
        GeneratorConfig gen = config.base;
        gen.cache_capacity = row.cache_capacity;
        gen.seed = row.seed;
        CellContext ctx;
        ctx.scenario = generate(gen);
        ctx.params = config.params;
        ctx.seed = gen.seed;
        SweepRow fresh;
        fill_row(fresh, run_method(ctx, row.method));
        if (row.status == "error") {
          note << "row marked error but recompute succeeded; ";
        } else {
          if (fresh.status != row.status) note << "status " << fresh.status << " != " << row.status << "; ";
          if (!same_number(fresh.delay, row.delay)) note << "delay differs; ";
          if (!same_number(fresh.exact_nlr, row.exact_nlr)) note << "exact_nlr differs; ";
          if (!same_number(fresh.lb_nlr, row.lb_nlr)) note << "lb_nlr differs; ";
          if (fresh.feasible != row.feasible) note << "feasible differs; ";
          if (fresh.counters.solver_calls != row.counters.solver_calls) note << "solver_calls differs; ";
          if (fresh.counters.bisection_probes != row.counters.bisection_probes) note << "bisection_probes differs; ";
          if (fresh.counters.ilp_nodes != row.counters.ilp_nodes) note << "ilp_nodes differs; ";
          if (fresh.counters.lp_iterations != row.counters.lp_iterations) note << "lp_iterations differs; ";
          if (fresh.counters.nlr_evaluations != row.counters.nlr_evaluations) note << "nlr_evaluations differs; ";
          if (fresh.counters.esa_iterations != row.counters.esa_iterations) note << "esa_iterations differs; ";
        }
      } catch (const std::exception& e) {
        if (row.status != "error") note << "recompute failed: " << e.what() << "; ";
      }
      std::string msg = note.str();
      if (!msg.empty()) {
        mismatch_slots[idx] = row.method + "/C=" + std::to_string(row.cache_capacity) + "/seed=" +
                              std::to_string(row.seed) + ": " + msg;
      }
    }
  };
  int n_jobs = std::max(1, jobs);
  if (n_jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < n_jobs; ++w) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
  }
  for (auto& m : mismatch_slots) {
    if (!m.empty()) report.mismatches.push_back(std::move(m));
  }
  report.rows_checked = static_cast<long>(runs.size());

  // Aggregates must match the per-run rows they summarize.
  std::vector<SweepRow> run_rows;
  for (const auto* pr : runs) run_rows.push_back(pr->row);
  auto aggs = aggregate_rows(config, run_rows);
  for (const auto& pr : parsed) {
    if (!pr.aggregate) continue;
    bool found = false;
    for (const Aggregate& a : aggs) {
      if (a.method != pr.row.method || a.cache != pr.row.cache_capacity) continue;
      found = true;
      double n = static_cast<double>(a.solved);
      if (!same_number(pr.row.delay, a.solved ? a.delay_sum / n : kNaN) ||
          !same_number(pr.row.exact_nlr, a.solved ? a.exact_sum / n : kNaN) ||
          !same_number(pr.row.lb_nlr, a.solved ? a.lb_sum / n : kNaN)) {
        report.mismatches.push_back("aggregate mismatch: " + pr.raw);
      }
    }
    if (!found) report.mismatches.push_back("aggregate for unknown cell: " + pr.raw);
  }

  report.ok = report.mismatches.empty();
  return report;
}

}  // namespace d2dcache
