#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "d2dcache/harness.hpp"
#include "d2dcache/milp.hpp"
#include "d2dcache/nlr.hpp"
#include "d2dcache/scenario_gen.hpp"
#include "d2dcache/search.hpp"

namespace {

using namespace d2dcache;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spill(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

// Generator flags shared by generate / gap-hist / sweep-c. Flags mirror the
// usual symbols: C, B, R', T_max, gamma, eta, epsilon.
void add_generator_flags(CLI::App* cmd, GeneratorConfig& cfg) {
  cmd->add_option("--users", cfg.num_users, "number of users");
  cmd->add_option("--files", cfg.num_files, "number of files");
  cmd->add_option("--cache", cfg.cache_capacity, "per-user cache capacity C");
  cmd->add_option("--budget", cfg.contact_budget, "segments per contact B");
  cmd->add_option("--zipf", cfg.zipf_shape, "zipf shape gamma");
  cmd->add_option("--gamma-shape", cfg.gamma_shape, "contact-rate gamma shape");
  cmd->add_option("--gamma-scale", cfg.gamma_scale, "contact-rate gamma scale");
  cmd->add_option("--recover-min", cfg.recover_min, "lower end of S_rec range");
  cmd->add_option("--recover-max", cfg.recover_max, "upper end of S_rec range");
  cmd->add_option("--max-multiplier", cfg.max_multiplier, "S_max = multiplier * S_rec");
  cmd->add_option("--nlr-limit", cfg.nlr_limit, "NLR cap R'");
  cmd->add_option("--t-max", cfg.delay_limit, "delay limit T_max");
  cmd->add_option("--seed", cfg.seed, "generator seed");
}

int cmd_generate(const GeneratorConfig& cfg, const std::string& config_path,
                 const std::string& out_path) {
  GeneratorConfig effective = cfg;
  if (!config_path.empty()) effective = generator_config_from_text(slurp(config_path));
  Scenario s = generate(effective);
  std::string text = scenario_to_text(s);
  if (out_path.empty()) {
    std::cout << text;
  } else {
    spill(out_path, text);
    std::cout << "wrote " << out_path << "\n";
  }
  return kExitOk;
}

int cmd_solve(const std::string& scenario_path, const std::string& method_name,
              SearchParams params, bool params_tmax_set, std::uint64_t seed, long samples,
              const std::string& placement_path) {
  Scenario s = load_scenario(scenario_path);
  if (!params_tmax_set) params.t_max = s.delay_limit;
  validate_search_params(params);
  OptimizeMethod method =
      method_name == "relax-round" ? OptimizeMethod::RelaxRound : OptimizeMethod::Exact;

  SolveOutcome start = bisect_lower_bound(s, params, method, seed);
  if (start.status == OutcomeStatus::Infeasible) {
    std::printf("status: infeasible\n");
    std::printf("reason: optimal lower bound at T_max exceeds the cap %.17g\n", s.nlr_limit);
    return kExitInfeasible;
  }
  SolveOutcome so = esa(s, params, start, method, seed);

  std::printf("method: %s\n", to_string(method).c_str());
  std::printf("T_lb: %.17g\n", start.delay);
  std::printf("lb_nlr_at_T_lb: %.17g\n", start.lb_nlr);
  std::printf("exact_nlr_at_T_lb: %.17g\n", start.exact_nlr);
  std::printf("T_so: %.17g\n", so.delay);
  std::printf("exact_nlr: %.17g\n", so.exact_nlr);
  std::printf("lb_nlr: %.17g\n", so.lb_nlr);
  std::printf("feasible: %s\n", so.feasible ? "yes" : "no");
  std::printf("status: %s\n", to_string(so.status).c_str());
  std::printf("esa_iterations: %ld\n", so.counters.esa_iterations);
  std::printf("solver_calls: %ld\n", so.counters.solver_calls);
  if (samples > 0) {
    auto mc = expected_nlr_monte_carlo(s, so.placement, so.delay, samples, seed);
    std::printf("mc_nlr: %.17g\n", mc.estimate);
    std::printf("mc_stderr: %.17g\n", mc.standard_error);
  }
  if (!placement_path.empty()) {
    save_placement(so.placement, placement_path);
    std::printf("placement: %s\n", placement_path.c_str());
  }
  return so.feasible ? kExitOk : kExitInfeasible;
}

int cmd_gap_hist(const std::string& scenario_path, const GeneratorConfig& cfg, double t,
                 bool t_set, int bins, double guard, const std::string& out_path) {
  Scenario s = scenario_path.empty() ? generate(cfg) : load_scenario(scenario_path);
  if (!t_set) t = s.delay_limit;
  auto h = gap_histogram(s, t, bins, guard);
  if (h.refused) {
    std::printf("refused: placement count estimate %.3g exceeds guard %.3g\n", h.estimate, guard);
    return kExitError;
  }
  std::printf("window: %.17g\n", h.window);
  std::printf("placements: %ld\n", h.total);
  std::printf("zero_gap_fraction: %.17g\n", h.zero_fraction);
  std::printf("max_gap: %.17g\n", h.max_gap);
  std::printf("min_gap: %.17g\n", h.min_gap);
  if (!out_path.empty()) {
    spill(out_path, gap_histogram_csv(h));
    std::printf("histogram: %s\n", out_path.c_str());
  }
  return kExitOk;
}

int cmd_sweep(SweepConfig cfg, const std::string& out_path, const std::string& manifest_path,
              bool omit_timing) {
  cfg.params.t_max = cfg.base.delay_limit;
  SweepResult result = sweep_cache(cfg);
  std::string csv = sweep_csv(result, /*include_aggregates=*/true, omit_timing);
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    spill(out_path, csv);
    std::printf("results: %s\n", out_path.c_str());
  }
  if (!manifest_path.empty()) {
    spill(manifest_path, sweep_manifest(cfg));
    std::printf("manifest: %s\n", manifest_path.c_str());
  }
  long errors = 0;
  for (const auto& row : result.rows) {
    if (row.status == "error") ++errors;
  }
  if (errors > 0) std::fprintf(stderr, "%ld run(s) failed; see the error column\n", errors);
  return kExitOk;
}

int cmd_verify(const std::string& manifest_path, const std::string& csv_path, int jobs) {
  auto report = verify_sweep(slurp(manifest_path), slurp(csv_path), jobs);
  std::printf("rows_checked: %ld\n", report.rows_checked);
  for (const auto& m : report.mismatches) std::printf("mismatch: %s\n", m.c_str());
  std::printf("verdict: %s\n", report.ok ? "ok" : "mismatch");
  return report.ok ? kExitOk : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"delay-optimal D2D cache placement toolkit"};
  app.require_subcommand(1);

  GeneratorConfig gen_cfg;
  std::string config_path, out_path;
  auto* generate_cmd = app.add_subcommand("generate", "generate a synthetic scenario file");
  add_generator_flags(generate_cmd, gen_cfg);
  generate_cmd->add_option("--config", config_path, "generator config JSON (overrides flags)");
  generate_cmd->add_option("-o,--output", out_path, "scenario file to write (default stdout)");

  std::string scenario_path, method = "exact", placement_path;
  SearchParams params;
  std::uint64_t seed = 1;
  long samples = 0;
  auto* solve_cmd = app.add_subcommand("solve", "bisection plus forward search on one scenario");
  solve_cmd->add_option("scenario", scenario_path, "scenario file")->required();
  solve_cmd->add_option("--method", method, "exact | relax-round")
      ->check(CLI::IsMember({"exact", "relax-round"}));
  solve_cmd->add_option("--t-min", params.t_min, "search window start");
  auto* tmax_opt = solve_cmd->add_option("--t-max", params.t_max, "search window end (default: scenario delay limit)");
  solve_cmd->add_option("--eta", params.step, "forward-search step");
  solve_cmd->add_option("--epsilon", params.tolerance, "bisection tolerance");
  solve_cmd->add_option("--seed", seed, "seed for rounding draws");
  solve_cmd->add_option("--samples", samples, "if > 0, print a Monte Carlo cross-check");
  solve_cmd->add_option("-o,--placement", placement_path, "write the final placement here");

  GeneratorConfig hist_cfg;
  hist_cfg.num_users = 3;
  hist_cfg.num_files = 8;
  hist_cfg.cache_capacity = 2;
  std::string hist_scenario;
  double hist_t = 0.0;
  int hist_bins = 50;
  double hist_guard = 1e8;
  std::string hist_out;
  auto* hist_cmd = app.add_subcommand("gap-hist", "exact-vs-bound gap over every feasible placement");
  hist_cmd->add_option("scenario", hist_scenario, "scenario file (omit to generate)");
  add_generator_flags(hist_cmd, hist_cfg);
  auto* hist_t_opt = hist_cmd->add_option("--t", hist_t, "window length (default: delay limit)");
  hist_cmd->add_option("--bins", hist_bins, "histogram bins over [0,1]");
  hist_cmd->add_option("--guard", hist_guard, "refuse enumerations beyond this count");
  hist_cmd->add_option("-o,--output", hist_out, "histogram CSV path");

  SweepConfig sweep_cfg;
  sweep_cfg.base.num_users = 10;
  sweep_cfg.base.num_files = 50;
  sweep_cfg.cache_sizes = {2, 3, 4, 5};
  sweep_cfg.methods = {"lower-bound", "esa-ilp", "esa-rra", "popularity", "random"};
  sweep_cfg.num_seeds = 20;
  std::string sweep_out, sweep_manifest_path, sweep_config_path;
  bool omit_timing = false;
  auto* sweep_cmd = app.add_subcommand("sweep-c", "delay-versus-cache-size comparison sweep");
  add_generator_flags(sweep_cmd, sweep_cfg.base);
  sweep_cmd->add_option("--config", sweep_config_path, "generator config JSON (overrides flags)");
  sweep_cmd->add_option("--cache-list", sweep_cfg.cache_sizes, "cache sizes to sweep")->delimiter(',');
  sweep_cmd->add_option("--methods", sweep_cfg.methods,
                        "subset of lower-bound esa-ilp esa-rra popularity random")
      ->delimiter(',');
  sweep_cmd->add_option("--seeds", sweep_cfg.num_seeds, "seeds per cache size");
  sweep_cmd->add_option("--first-seed", sweep_cfg.first_seed, "first seed value");
  sweep_cmd->add_option("--eta", sweep_cfg.params.step, "forward-search step");
  sweep_cmd->add_option("--epsilon", sweep_cfg.params.tolerance, "bisection tolerance");
  sweep_cmd->add_option("--jobs", sweep_cfg.jobs, "worker threads");
  sweep_cmd->add_flag("--omit-timing", omit_timing, "blank the wall_ms column (golden runs)");
  sweep_cmd->add_option("-o,--output", sweep_out, "results CSV (default stdout)");
  sweep_cmd->add_option("--manifest", sweep_manifest_path, "write the run manifest here");

  std::string verify_manifest, verify_csv;
  int verify_jobs = 1;
  auto* verify_cmd = app.add_subcommand("verify", "recompute a sweep CSV from its manifest");
  verify_cmd->add_option("--manifest", verify_manifest, "manifest JSON")->required();
  verify_cmd->add_option("--csv", verify_csv, "results CSV")->required();
  verify_cmd->add_option("--jobs", verify_jobs, "worker threads");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate_cmd->parsed()) return cmd_generate(gen_cfg, config_path, out_path);
    if (solve_cmd->parsed()) {
      return cmd_solve(scenario_path, method, params, tmax_opt->count() > 0, seed, samples,
                       placement_path);
    }
    if (hist_cmd->parsed()) {
      return cmd_gap_hist(hist_scenario, hist_cfg, hist_t, hist_t_opt->count() > 0, hist_bins,
                          hist_guard, hist_out);
    }
    if (sweep_cmd->parsed()) {
      if (!sweep_config_path.empty()) {
        sweep_cfg.base = generator_config_from_text(slurp(sweep_config_path));
      }
      return cmd_sweep(sweep_cfg, sweep_out, sweep_manifest_path, omit_timing);
    }
    if (verify_cmd->parsed()) return cmd_verify(verify_manifest, verify_csv, verify_jobs);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}
