#include "d2dcache/milp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "d2dcache/contact.hpp"
#include "d2dcache/rng.hpp"

namespace d2dcache {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPruneMargin = 1e-12;
constexpr double kIntegralTol = 1e-7;
}  // namespace

int AnocpModel::y_index(int file, int user, int level) const {
  return y_offset_[file] + user * (recover_segments[file] + 1) + level;
}

int AnocpModel::nprime_index(int file, int user) const {
  return nprime_offset + file * num_users + user;
}

AnocpModel::LevelVar AnocpModel::level_var(int column) const {
  // y columns are grouped by file, then user, then level.
  int f = static_cast<int>(std::upper_bound(y_offset_.begin(), y_offset_.end(), column) -
                           y_offset_.begin()) -
          1;
  int within = column - y_offset_[f];
  int span = recover_segments[f] + 1;
  return LevelVar{f, within / span, within % span};
}

double AnocpModel::transfer_coefficient(int /*file*/, int i, int j, int k) const {
  return transfer_gain[(static_cast<std::size_t>(i) * num_users + j) * (max_recover + 1) + k];
}

double AnocpModel::lower_bound_value(const Placement& p) const {
  double total = 0.0;
  for (int f = 0; f < num_files; ++f) {
    const int s_rec = recover_segments[f];
    for (int i = 0; i < num_users; ++i) {
      double expected = static_cast<double>(p.counts(f, i));
      for (int j = 0; j < num_users; ++j) {
        if (j == i) continue;
        int cached = std::min(p.counts(f, j), s_rec);
        if (cached == 0) continue;
        expected += transfer_coefficient(f, i, j, cached);
      }
      double shortfall = static_cast<double>(s_rec) - expected;
      if (shortfall > 0.0) {
        total += popularity(f, i) * shortfall / static_cast<double>(s_rec);
      }
    }
  }
  return total / static_cast<double>(num_users);
}

void AnocpModel::repair(Placement& p) const {
  std::vector<long> used_user(num_users, 0);
  std::vector<long> used_file(num_files, 0);
  for (int f = 0; f < num_files; ++f) {
    for (int i = 0; i < num_users; ++i) {
      used_user[i] += p.counts(f, i);
      used_file[f] += p.counts(f, i);
    }
  }
  // Expected collected count per (file, user) under the current placement.
  Matrix<double> expected(num_files, num_users, 0.0);
  auto recompute_file = [&](int f) {
    const int s_rec = recover_segments[f];
    for (int i = 0; i < num_users; ++i) {
      double e = static_cast<double>(p.counts(f, i));
      for (int j = 0; j < num_users; ++j) {
        if (j == i) continue;
        int cached = std::min(p.counts(f, j), s_rec);
        if (cached > 0) e += transfer_coefficient(f, i, j, cached);
      }
      expected(f, i) = e;
    }
  };
  for (int f = 0; f < num_files; ++f) recompute_file(f);

  auto shortfall_term = [&](int f, int i, double e) {
    double s = static_cast<double>(recover_segments[f]) - e;
    return s > 0.0 ? popularity(f, i) * s / static_cast<double>(recover_segments[f]) : 0.0;
  };

  for (;;) {
    bool any_violation = false;
    for (int i = 0; i < num_users && !any_violation; ++i) {
      if (used_user[i] > cache_capacity[i]) any_violation = true;
    }
    for (int f = 0; f < num_files && !any_violation; ++f) {
      if (used_file[f] > max_segments[f]) any_violation = true;
    }
    if (!any_violation) break;

    double best_delta = kInf;
    int best_f = -1, best_i = -1;
    for (int f = 0; f < num_files; ++f) {
      const int s_rec = recover_segments[f];
      for (int i = 0; i < num_users; ++i) {
        if (p.counts(f, i) <= 0) continue;
        if (used_user[i] <= cache_capacity[i] && used_file[f] <= max_segments[f]) continue;
        int old_level = p.counts(f, i);
        double delta = 0.0;
        for (int u = 0; u < num_users; ++u) {
          double e_old = expected(f, u);
          double e_new;
          if (u == i) {
            e_new = e_old - 1.0;
          } else {
            int capped_old = std::min(old_level, s_rec);
            int capped_new = std::min(old_level - 1, s_rec);
            e_new = e_old - (transfer_coefficient(f, u, i, capped_old) -
                             transfer_coefficient(f, u, i, capped_new));
          }
          delta += shortfall_term(f, u, e_new) - shortfall_term(f, u, e_old);
        }
        if (delta < best_delta) {  // strict: first hit wins ties (lowest f, then i)
          best_delta = delta;
          best_f = f;
          best_i = i;
        }
      }
    }
    if (best_f < 0) {
      throw std::logic_error("repair: violated rows but no positive cell to decrement");
    }
    p.counts(best_f, best_i) -= 1;
    used_user[best_i] -= 1;
    used_file[best_f] -= 1;
    recompute_file(best_f);
  }
}

AnocpModel build_anocp(const Scenario& s, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw std::invalid_argument("build_anocp: window T must be finite and >= 0");
  }
  AnocpModel m;
  m.num_users = s.num_users;
  m.num_files = s.num_files;
  m.window = t;
  m.contact_budget = s.contact_budget;
  m.recover_segments = s.recover_segments;
  m.max_segments = s.max_segments;
  m.cache_capacity = s.cache_capacity;
  m.popularity = s.popularity;
  m.max_recover = s.max_recover_segments();

  const int u = s.num_users;
  m.transfer_gain.assign(static_cast<std::size_t>(u) * u * (m.max_recover + 1), 0.0);
  for (int i = 0; i < u; ++i) {
    for (int j = 0; j < u; ++j) {
      if (i == j) continue;
      double mean = s.contact_rate(i, j) * t;
      for (int k = 0; k <= m.max_recover; ++k) {
        m.transfer_gain[(static_cast<std::size_t>(i) * u + j) * (m.max_recover + 1) + k] =
            expected_truncated_transfer(mean, s.contact_budget, k);
      }
    }
  }

  // Columns: y levels grouped by (file, user, level), then the N' block.
  m.y_offset_.resize(s.num_files);
  for (int f = 0; f < s.num_files; ++f) {
    m.y_offset_[f] = m.lp.num_vars;
    for (int i = 0; i < u; ++i) {
      for (int k = 0; k <= s.recover_segments[f]; ++k) m.lp.add_variable(0.0);
    }
  }
  m.num_level_vars = m.lp.num_vars;
  m.nprime_offset = m.lp.num_vars;
  for (int f = 0; f < s.num_files; ++f) {
    for (int i = 0; i < u; ++i) {
      m.lp.add_variable(s.popularity(f, i) /
                        (static_cast<double>(u) * s.recover_segments[f]));
    }
  }

  // Shortfall rows: N'_fi + sum_k k y^k_fi + sum_{j != i} sum_k e^k_fij y^k_fj >= S_rec_f.
  for (int f = 0; f < s.num_files; ++f) {
    const int s_rec = s.recover_segments[f];
    for (int i = 0; i < u; ++i) {
      std::vector<std::pair<int, double>> terms;
      terms.reserve(1 + s_rec * u);
      terms.emplace_back(m.nprime_index(f, i), 1.0);
      for (int k = 1; k <= s_rec; ++k) {
        terms.emplace_back(m.y_index(f, i, k), static_cast<double>(k));
      }
      for (int j = 0; j < u; ++j) {
        if (j == i) continue;
        for (int k = 1; k <= s_rec; ++k) {
          double e = m.transfer_coefficient(f, i, j, k);
          if (e > 0.0) terms.emplace_back(m.y_index(f, j, k), e);
        }
      }
      m.lp.add_row(std::move(terms), lp::Sense::GreaterEqual, static_cast<double>(s_rec));
    }
  }
  // Selection rows: exactly one level per (file, user).
  for (int f = 0; f < s.num_files; ++f) {
    for (int i = 0; i < u; ++i) {
      std::vector<std::pair<int, double>> terms;
      for (int k = 0; k <= s.recover_segments[f]; ++k) terms.emplace_back(m.y_index(f, i, k), 1.0);
      m.lp.add_row(std::move(terms), lp::Sense::Equal, 1.0);
    }
  }
  // Capacity rows.
  for (int i = 0; i < u; ++i) {
    std::vector<std::pair<int, double>> terms;
    for (int f = 0; f < s.num_files; ++f) {
      for (int k = 1; k <= s.recover_segments[f]; ++k) {
        terms.emplace_back(m.y_index(f, i, k), static_cast<double>(k));
      }
    }
    m.lp.add_row(std::move(terms), lp::Sense::LessEqual, static_cast<double>(s.cache_capacity[i]));
  }
  // Segment budget rows.
  for (int f = 0; f < s.num_files; ++f) {
    std::vector<std::pair<int, double>> terms;
    for (int i = 0; i < u; ++i) {
      for (int k = 1; k <= s.recover_segments[f]; ++k) {
        terms.emplace_back(m.y_index(f, i, k), static_cast<double>(k));
      }
    }
    m.lp.add_row(std::move(terms), lp::Sense::LessEqual, static_cast<double>(s.max_segments[f]));
  }
  return m;
}

lp::Solution solve_lp(const AnocpModel& model) { return lp::solve(model.lp); }

namespace {

// Node LP with fixed level variables substituted out.
struct NodeLp {
  lp::LinearProgram lp;
  std::vector<int> node_to_model;
  std::vector<int> model_to_node;  // -1 for fixed columns
  bool infeasible = false;
};

NodeLp build_node_lp(const AnocpModel& m, const std::vector<std::int8_t>& fix) {
  NodeLp node;
  const int total = m.lp.num_vars;
  node.model_to_node.assign(total, -1);
  node.node_to_model.reserve(total);
  for (int j = 0; j < total; ++j) {
    if (j < m.num_level_vars && fix[j] >= 0) continue;
    node.model_to_node[j] = node.lp.add_variable(m.lp.objective[j]);
    node.node_to_model.push_back(j);
  }
  for (const lp::Row& r : m.lp.rows) {
    std::vector<std::pair<int, double>> terms;
    terms.reserve(r.terms.size());
    double rhs = r.rhs;
    bool all_nonneg = true;
    bool all_nonpos = true;
    for (auto [j, a] : r.terms) {
      if (j < m.num_level_vars && fix[j] >= 0) {
        if (fix[j] == 1) rhs -= a;
        continue;
      }
      terms.emplace_back(node.model_to_node[j], a);
      if (a < 0.0) all_nonneg = false;
      if (a > 0.0) all_nonpos = false;
    }
    if (terms.empty()) {
      bool ok = (r.sense == lp::Sense::LessEqual && rhs >= -1e-9) ||
                (r.sense == lp::Sense::GreaterEqual && rhs <= 1e-9) ||
                (r.sense == lp::Sense::Equal && std::fabs(rhs) <= 1e-9);
      if (!ok) node.infeasible = true;
      continue;
    }
    // Nonnegative-variable implication checks catch capacity/budget overruns
    // introduced by fixings without invoking the solver.
    if (r.sense == lp::Sense::LessEqual && rhs < 0.0 && all_nonneg) node.infeasible = true;
    if (r.sense == lp::Sense::GreaterEqual && rhs > 0.0 && all_nonpos) node.infeasible = true;
    if (node.infeasible) return node;
    node.lp.add_row(std::move(terms), r.sense, rhs);
  }
  return node;
}

Placement placement_from_levels(const AnocpModel& m, const std::vector<double>& y_full) {
  Placement p(m.num_files, m.num_users);
  for (int f = 0; f < m.num_files; ++f) {
    for (int i = 0; i < m.num_users; ++i) {
      int best_k = 0;
      double best_v = -1.0;
      for (int k = 0; k <= m.recover_segments[f]; ++k) {
        double v = y_full[m.y_index(f, i, k)];
        if (v > best_v) {
          best_v = v;
          best_k = k;
        }
      }
      p.counts(f, i) = best_k;
    }
  }
  return p;
}

std::vector<double> expand_values(const AnocpModel& m, const NodeLp& node,
                                  const std::vector<double>& node_values,
                                  const std::vector<std::int8_t>& fix) {
  std::vector<double> full(m.lp.num_vars, 0.0);
  for (int j = 0; j < m.num_level_vars; ++j) {
    if (fix[j] == 1) full[j] = 1.0;
  }
  for (std::size_t c = 0; c < node.node_to_model.size(); ++c) {
    full[node.node_to_model[c]] = node_values[c];
  }
  return full;
}

// Deterministic rounding of a fractional relaxation: per cell take the level
// with the largest weight, then repair. Used as a cheap incumbent.
Placement mode_rounding(const AnocpModel& m, const std::vector<double>& y_full) {
  Placement p = placement_from_levels(m, y_full);
  m.repair(p);
  return p;
}

}  // namespace

std::string to_string(OptimizeMethod m) {
  return m == OptimizeMethod::Exact ? "exact" : "relax-round";
}

MilpSolution solve_ilp(const AnocpModel& model, const IlpOptions& opts) {
  struct Node {
    std::vector<std::int8_t> fix;
    double bound;
  };

  MilpSolution result;
  result.method = OptimizeMethod::Exact;

  // The all-zero placement is always feasible; it seeds the incumbent so a
  // bound-based early exit can always report a placement.
  Placement incumbent(model.num_files, model.num_users);
  double incumbent_value = model.lower_bound_value(incumbent);
  if (opts.warm_start != nullptr) {
    double v = model.lower_bound_value(*opts.warm_start);
    if (v < incumbent_value) {
      incumbent = *opts.warm_start;
      incumbent_value = v;
    }
  }

  std::vector<Node> stack;
  stack.push_back(Node{std::vector<std::int8_t>(model.num_level_vars, -1), -kInf});

  bool budget_hit = false;
  bool early_stop = false;
  long last_incumbent_node = 0;
  auto stack_bound = [&]() {
    double b = kInf;
    for (const Node& n : stack) b = std::min(b, n.bound);
    return b;
  };
  // `current_open` is the bound of a node being processed that is not on the
  // stack yet; kInf when every open subtree is represented on the stack.
  auto should_stop = [&](double current_open) {
    if (opts.stop_if_at_most && incumbent_value <= *opts.stop_if_at_most) return true;
    if (opts.stop_if_above) {
      double global_lb = std::min({stack_bound(), incumbent_value, current_open});
      if (global_lb > *opts.stop_if_above) return true;
    }
    return false;
  };

  if (should_stop(kInf)) {
    early_stop = true;
  }

  while (!early_stop && !stack.empty()) {
    if (result.node_count >= opts.node_budget) {
      budget_hit = true;
      break;
    }
    if (opts.stall_node_limit > 0 &&
        result.node_count - last_incumbent_node >= opts.stall_node_limit) {
      budget_hit = true;
      break;
    }
    Node node = std::move(stack.back());
    stack.pop_back();
    if (node.bound >= incumbent_value - kPruneMargin) continue;

    NodeLp nlp = build_node_lp(model, node.fix);
    if (nlp.infeasible) continue;
    lp::Solution sol = lp::solve(nlp.lp);
    ++result.node_count;
    result.lp_iterations += sol.iterations;
    if (sol.status == lp::SolveStatus::Infeasible) continue;
    if (sol.status == lp::SolveStatus::Unbounded) {
      throw lp::SolverError("solve_ilp: relaxation unbounded; model malformed");
    }
    if (sol.objective >= incumbent_value - kPruneMargin) continue;

    std::vector<double> y_full = expand_values(model, nlp, sol.values, node.fix);

    // Most fractional free level variable.
    int branch_col = -1;
    double branch_frac = kIntegralTol;
    for (int j = 0; j < model.num_level_vars; ++j) {
      if (node.fix[j] >= 0) continue;
      double v = y_full[j];
      double frac = std::min(v, 1.0 - v);
      if (frac > branch_frac) {
        branch_frac = frac;
        branch_col = j;
      }
    }

    if (branch_col < 0) {
      Placement p = placement_from_levels(model, y_full);
      double value = model.lower_bound_value(p);
      if (value < incumbent_value) {
        incumbent = std::move(p);
        incumbent_value = value;
        last_incumbent_node = result.node_count;
      }
      if (should_stop(kInf)) early_stop = true;
      continue;
    }

    if (result.node_count == 1) {
      // Root heuristic: mode rounding with repair, typically near-optimal.
      Placement rounded = mode_rounding(model, y_full);
      double value = model.lower_bound_value(rounded);
      if (value < incumbent_value) {
        incumbent = std::move(rounded);
        incumbent_value = value;
        last_incumbent_node = result.node_count;
      }
      if (should_stop(sol.objective)) {
        early_stop = true;
        continue;
      }
    }

    double v = y_full[branch_col];
    auto make_child = [&](std::int8_t value) {
      Node child;
      child.fix = node.fix;
      child.bound = sol.objective;
      child.fix[branch_col] = value;
      if (value == 1) {
        auto lv = model.level_var(branch_col);
        for (int k = 0; k <= model.recover_segments[lv.file]; ++k) {
          if (k != lv.level) child.fix[model.y_index(lv.file, lv.user, k)] = 0;
        }
      }
      return child;
    };
    // Dive toward the nearest integer: push the far child first.
    std::int8_t near = v >= 0.5 ? 1 : 0;
    stack.push_back(make_child(static_cast<std::int8_t>(1 - near)));
    stack.push_back(make_child(near));

    if (should_stop(kInf)) early_stop = true;
  }

  result.placement = incumbent;
  result.objective = incumbent_value;
  double open_bound = stack.empty() ? kInf : stack_bound();
  double global_lb = std::min(open_bound, incumbent_value);
  result.gap = std::max(0.0, incumbent_value - global_lb);
  result.optimal = !budget_hit && !early_stop && stack.empty();
  if (result.optimal) result.gap = 0.0;
  return result;
}

Placement round_relaxation(const lp::Solution& relaxed, const AnocpModel& model,
                           std::uint64_t seed) {
  if (relaxed.status != lp::SolveStatus::Optimal) {
    throw std::invalid_argument("round_relaxation: relaxation must be optimal");
  }
  Placement p(model.num_files, model.num_users);
  for (int f = 0; f < model.num_files; ++f) {
    for (int i = 0; i < model.num_users; ++i) {
      double sum = 0.0;
      const int levels = model.recover_segments[f] + 1;
      for (int k = 0; k < levels; ++k) {
        sum += std::max(0.0, relaxed.values[model.y_index(f, i, k)]);
      }
      int chosen = 0;
      if (sum > 1e-12) {
        double u = RandomStream::keyed(seed, "round-level", static_cast<std::uint64_t>(f),
                                       static_cast<std::uint64_t>(i))
                       .next_double() *
                   sum;
        double cum = 0.0;
        chosen = levels - 1;
        for (int k = 0; k < levels; ++k) {
          cum += std::max(0.0, relaxed.values[model.y_index(f, i, k)]);
          if (u < cum) {
            chosen = k;
            break;
          }
        }
      }
      p.counts(f, i) = chosen;
    }
  }
  model.repair(p);
  return p;
}

MilpSolution optimize_lower_bound(const Scenario& s, double t, OptimizeMethod method,
                                  std::uint64_t seed, const IlpOptions& opts) {
  AnocpModel model = build_anocp(s, t);
  if (method == OptimizeMethod::Exact) {
    MilpSolution sol = solve_ilp(model, opts);
    return sol;
  }
  lp::Solution relaxed = solve_lp(model);
  if (relaxed.status != lp::SolveStatus::Optimal) {
    throw lp::SolverError("optimize_lower_bound: relaxation not optimal");
  }
  MilpSolution sol;
  sol.method = OptimizeMethod::RelaxRound;
  sol.placement = round_relaxation(relaxed, model, seed);
  sol.objective = model.lower_bound_value(sol.placement);
  sol.node_count = 0;
  sol.lp_iterations = relaxed.iterations;
  sol.gap = std::max(0.0, sol.objective - relaxed.objective);
  sol.optimal = false;
  return sol;
}

}  // namespace d2dcache
