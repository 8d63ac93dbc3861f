#include "d2dcache/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace d2dcache::lp {

int LinearProgram::add_variable(double cost, std::string name) {
  objective.push_back(cost);
  var_names.push_back(std::move(name));
  return num_vars++;
}

void LinearProgram::add_row(std::vector<std::pair<int, double>> terms, Sense sense, double rhs) {
  rows.push_back(Row{std::move(terms), sense, rhs});
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class Tableau {
 public:
  Tableau(const LinearProgram& prog, const SimplexOptions& opts) : prog_(prog), opts_(opts) {
    build();
  }

  Solution run() {
    Solution sol;
    if (num_artificial_ > 0) {
      load_phase1_costs();
      simplex(/*phase1=*/true, sol.iterations);
      if (phase1_objective() > 1e-8) {
        sol.status = SolveStatus::Infeasible;
        return sol;
      }
      expel_artificials();
    }
    load_phase2_costs();
    bool bounded = simplex(/*phase1=*/false, sol.iterations);
    if (!bounded) {
      sol.status = SolveStatus::Unbounded;
      return sol;
    }
    sol.status = SolveStatus::Optimal;
    sol.values.assign(prog_.num_vars, 0.0);
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < prog_.num_vars) sol.values[basis_[i]] = rhs(i);
    }
    double obj = prog_.objective_offset;
    for (int j = 0; j < prog_.num_vars; ++j) obj += prog_.objective[j] * sol.values[j];
    sol.objective = obj;
    return sol;
  }

 private:
  double* row(int i) { return tab_.data() + static_cast<std::size_t>(i) * width_; }
  const double* row(int i) const { return tab_.data() + static_cast<std::size_t>(i) * width_; }
  double& rhs(int i) { return tab_[static_cast<std::size_t>(i) * width_ + width_ - 1]; }
  double* cost() { return cost_.data(); }
  double& cost_rhs() { return cost_[width_ - 1]; }

  void build() {
    m_ = static_cast<int>(prog_.rows.size());
    const int n = prog_.num_vars;

    // Normalized copies: rhs >= 0.
    struct NormRow {
      const Row* src;
      bool negated;
      Sense sense;
      double rhs;
    };
    std::vector<NormRow> norm(m_);
    for (int i = 0; i < m_; ++i) {
      const Row& r = prog_.rows[i];
      bool neg = r.rhs < 0.0;
      Sense sense = r.sense;
      if (neg && sense == Sense::LessEqual) sense = Sense::GreaterEqual;
      else if (neg && sense == Sense::GreaterEqual) sense = Sense::LessEqual;
      norm[i] = NormRow{&r, neg, sense, neg ? -r.rhs : r.rhs};
    }

    // Column occupancy for the singleton crash.
    std::vector<int> col_count(n, 0);
    std::vector<int> col_row(n, -1);
    std::vector<double> col_coef(n, 0.0);
    for (int i = 0; i < m_; ++i) {
      for (auto [j, a] : norm[i].src->terms) {
        if (a == 0.0) continue;
        col_count[j]++;
        col_row[j] = i;
        col_coef[j] = norm[i].negated ? -a : a;
      }
    }

    // Logical columns: slack for <=, surplus for >=.
    num_logical_ = 0;
    std::vector<int> logical_col(m_, -1);
    for (int i = 0; i < m_; ++i) {
      if (norm[i].sense != Sense::Equal) logical_col[i] = n + num_logical_++;
    }

    basis_.assign(m_, -1);
    // Basic candidate per row: slack; else cheapest positive structural
    // singleton; else an artificial.
    std::vector<int> crash_col(m_, -1);
    for (int j = 0; j < n; ++j) {
      if (col_count[j] != 1 || col_coef[j] <= 0.0) continue;
      int i = col_row[j];
      if (norm[i].sense == Sense::LessEqual) continue;  // slack is free, prefer it
      int cur = crash_col[i];
      if (cur < 0 || prog_.objective[j] < prog_.objective[cur] ||
          (prog_.objective[j] == prog_.objective[cur] && j < cur)) {
        crash_col[i] = j;
      }
    }
    num_artificial_ = 0;
    std::vector<int> artificial_col(m_, -1);
    for (int i = 0; i < m_; ++i) {
      if (norm[i].sense == Sense::LessEqual) {
        basis_[i] = logical_col[i];
      } else if (crash_col[i] >= 0) {
        basis_[i] = crash_col[i];
      } else if (norm[i].rhs == 0.0 && norm[i].sense == Sense::GreaterEqual) {
        basis_[i] = logical_col[i];  // surplus basic at zero after row negation
      } else {
        artificial_col[i] = -2;  // placeholder, column index assigned below
      }
    }
    for (int i = 0; i < m_; ++i) {
      if (artificial_col[i] == -2) {
        artificial_col[i] = n + num_logical_ + num_artificial_++;
        basis_[i] = artificial_col[i];
      }
    }

    width_ = n + num_logical_ + num_artificial_ + 1;
    first_artificial_ = n + num_logical_;
    tab_.assign(static_cast<std::size_t>(m_) * width_, 0.0);
    cost_.assign(width_, 0.0);

    for (int i = 0; i < m_; ++i) {
      double sign = norm[i].negated ? -1.0 : 1.0;
      // A surplus chosen as the crash basic needs its row negated so the
      // basic coefficient is +1; only reachable when rhs == 0.
      bool flip_for_surplus =
          norm[i].sense == Sense::GreaterEqual && basis_[i] == logical_col[i];
      double rowsign = flip_for_surplus ? -sign : sign;
      double* tr = row(i);
      for (auto [j, a] : norm[i].src->terms) tr[j] += rowsign * a;
      if (logical_col[i] >= 0) {
        double lcoef = norm[i].sense == Sense::LessEqual ? 1.0 : -1.0;
        tr[logical_col[i]] = flip_for_surplus ? -lcoef : lcoef;
      }
      if (artificial_col[i] >= 0) tr[artificial_col[i]] = 1.0;
      rhs(i) = flip_for_surplus ? -norm[i].rhs : norm[i].rhs;
    }

    // Crash basics that are structural singletons may have coefficient != 1.
    for (int i = 0; i < m_; ++i) {
      double piv = row(i)[basis_[i]];
      if (piv != 1.0) {
        double inv = 1.0 / piv;
        double* tr = row(i);
        for (int j = 0; j < width_; ++j) tr[j] *= inv;
      }
    }
  }

  void load_phase1_costs() {
    std::fill(cost_.begin(), cost_.end(), 0.0);
    // Phase-1 objective: sum of artificials; expressed over nonbasic columns
    // by subtracting each artificial-basic row.
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] >= first_artificial_) {
        const double* tr = row(i);
        for (int j = 0; j < width_; ++j) cost_[j] -= tr[j];
      }
    }
    for (int j = first_artificial_; j < width_ - 1; ++j) cost_[j] = 0.0;
    // Artificials never re-enter once driven out.
    allow_entering_limit_ = first_artificial_;
  }

  double phase1_objective() { return -cost_rhs(); }

  void expel_artificials() {
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < first_artificial_) continue;
      const double* tr = row(i);
      int pivot_col = -1;
      double best = 0.0;
      for (int j = 0; j < first_artificial_; ++j) {
        double a = std::fabs(tr[j]);
        if (a > best + 1e-12) {
          best = a;
          pivot_col = j;
        }
      }
      if (pivot_col >= 0 && best > opts_.tol) {
        pivot(i, pivot_col);
      }
      // Otherwise the row is redundant; the artificial stays basic at zero
      // and, having no overlap with real columns, is never perturbed.
    }
  }

  void load_phase2_costs() {
    std::fill(cost_.begin(), cost_.end(), 0.0);
    for (int j = 0; j < prog_.num_vars; ++j) cost_[j] = prog_.objective[j];
    for (int i = 0; i < m_; ++i) {
      double cb = basis_[i] < prog_.num_vars ? prog_.objective[basis_[i]] : 0.0;
      if (cb == 0.0) continue;
      const double* tr = row(i);
      for (int j = 0; j < width_; ++j) cost_[j] -= cb * tr[j];
    }
    allow_entering_limit_ = first_artificial_;
  }

  // Returns false on unboundedness.
  bool simplex(bool phase1, long& total_iterations) {
    long stall = 0;
    double last_obj = -cost_rhs();
    bool bland = false;
    for (;;) {
      if (total_iterations++ > opts_.max_iterations) {
        throw SolverError("simplex: iteration limit exceeded");
      }
      int q = -1;
      if (!bland) {
        double best = -opts_.tol;
        for (int j = 0; j < allow_entering_limit_; ++j) {
          if (cost_[j] < best) {
            best = cost_[j];
            q = j;
          }
        }
      } else {
        for (int j = 0; j < allow_entering_limit_; ++j) {
          if (cost_[j] < -opts_.tol) {
            q = j;
            break;
          }
        }
      }
      if (q < 0) return true;  // optimal for this phase

      // Ratio test.
      int leave = -1;
      double best_ratio = kInf;
      double best_piv = 0.0;
      for (int i = 0; i < m_; ++i) {
        double a = row(i)[q];
        if (a <= opts_.tol) continue;
        double ratio = rhs(i) / a;
        if (ratio < best_ratio - 1e-12) {
          best_ratio = ratio;
          best_piv = a;
          leave = i;
        } else if (ratio < best_ratio + 1e-12 && leave >= 0) {
          if (bland ? basis_[i] < basis_[leave] : a > best_piv) {
            best_ratio = std::min(best_ratio, ratio);
            best_piv = a;
            leave = i;
          }
        }
      }
      if (leave < 0) {
        if (phase1) throw SolverError("simplex: phase-1 objective unbounded (numerical failure)");
        return false;
      }

      pivot(leave, q);

      double obj = -cost_rhs();
      if (obj < last_obj - 1e-12) {
        stall = 0;
        last_obj = obj;
      } else if (++stall > opts_.stall_limit) {
        bland = true;
      }
      if (!std::isfinite(obj)) throw SolverError("simplex: objective diverged (singular basis?)");
    }
  }

  void pivot(int leave, int q) {
    double* pr = row(leave);
    double piv = pr[q];
    if (std::fabs(piv) < 1e-13) throw SolverError("simplex: vanishing pivot element");
    double inv = 1.0 / piv;
    for (int j = 0; j < width_; ++j) pr[j] *= inv;
    pr[q] = 1.0;
    for (int i = 0; i < m_; ++i) {
      if (i == leave) continue;
      double* tr = row(i);
      double factor = tr[q];
      if (factor == 0.0) continue;
      for (int j = 0; j < width_; ++j) tr[j] -= factor * pr[j];
      tr[q] = 0.0;
    }
    double cfactor = cost_[q];
    if (cfactor != 0.0) {
      for (int j = 0; j < width_; ++j) cost_[j] -= cfactor * pr[j];
      cost_[q] = 0.0;
    }
    basis_[leave] = q;
  }

  const LinearProgram& prog_;
  const SimplexOptions& opts_;
  int m_ = 0;
  int width_ = 0;
  int num_logical_ = 0;
  int num_artificial_ = 0;
  int first_artificial_ = 0;
  int allow_entering_limit_ = 0;
  std::vector<double> tab_;
  std::vector<double> cost_;
  std::vector<int> basis_;
};

}  // namespace

Solution solve(const LinearProgram& prog, const SimplexOptions& opts) {
  for (const Row& r : prog.rows) {
    for (auto [j, a] : r.terms) {
      if (j < 0 || j >= prog.num_vars) throw SolverError("lp: row references unknown variable");
      if (!std::isfinite(a)) throw SolverError("lp: non-finite coefficient");
    }
    if (!std::isfinite(r.rhs)) throw SolverError("lp: non-finite rhs");
  }
  Tableau tab(prog, opts);
  return tab.run();
}

namespace {

std::string var_name(const LinearProgram& prog, int j) {
  if (j < static_cast<int>(prog.var_names.size()) && !prog.var_names[j].empty()) {
    return prog.var_names[j];
  }
  return "x" + std::to_string(j);
}

void write_terms(const LinearProgram& prog, const std::vector<std::pair<int, double>>& terms,
                 std::ostream& out) {
  bool first = true;
  for (auto [j, a] : terms) {
    if (a == 0.0) continue;
    if (first) {
      if (a < 0.0) out << "- ";
      first = false;
    } else {
      out << (a < 0.0 ? " - " : " + ");
    }
    double mag = std::fabs(a);
    out << mag << " " << var_name(prog, j);
  }
  if (first) out << "0 " << var_name(prog, 0);
}

}  // namespace

void write_lp_format(const LinearProgram& prog, std::ostream& out) {
  out << "Minimize\n obj: ";
  std::vector<std::pair<int, double>> obj_terms;
  for (int j = 0; j < prog.num_vars; ++j) {
    if (prog.objective[j] != 0.0) obj_terms.emplace_back(j, prog.objective[j]);
  }
  write_terms(prog, obj_terms, out);
  out << "\nSubject To\n";
  for (std::size_t i = 0; i < prog.rows.size(); ++i) {
    const Row& r = prog.rows[i];
    out << " c" << i << ": ";
    write_terms(prog, r.terms, out);
    switch (r.sense) {
      case Sense::LessEqual: out << " <= "; break;
      case Sense::GreaterEqual: out << " >= "; break;
      case Sense::Equal: out << " = "; break;
    }
    out << r.rhs << "\n";
  }
  out << "Bounds\n";
  for (int j = 0; j < prog.num_vars; ++j) {
    out << " 0 <= " << var_name(prog, j) << "\n";
  }
  out << "End\n";
}

}  // namespace d2dcache::lp
