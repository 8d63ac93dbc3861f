#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace d2dcache::lp {

enum class Sense { LessEqual, GreaterEqual, Equal };

struct Row {
  std::vector<std::pair<int, double>> terms;  // (column, coefficient)
  Sense sense = Sense::LessEqual;
  double rhs = 0.0;
};

// Minimize c.x subject to rows, x >= 0. Upper bounds, when needed, are
// expressed as rows; the models built here either imply them through
// selection rows or do not need them.
struct LinearProgram {
  int num_vars = 0;
  std::vector<double> objective;
  double objective_offset = 0.0;
  std::vector<Row> rows;
  std::vector<std::string> var_names;  // optional; used by the text dump

  int add_variable(double cost, std::string name = {});
  void add_row(std::vector<std::pair<int, double>> terms, Sense sense, double rhs);
};

enum class SolveStatus { Optimal, Infeasible, Unbounded };

struct Solution {
  SolveStatus status = SolveStatus::Infeasible;
  double objective = 0.0;
  std::vector<double> values;  // structural variables only
  long iterations = 0;
};

struct SimplexOptions {
  double tol = 1e-9;               // pivot and reduced-cost tolerance
  long max_iterations = 20000000;  // hard stop; hitting it throws
  long stall_limit = 20000;        // degenerate steps before Bland's rule kicks in
};

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense two-phase primal simplex. Dantzig pricing with a Bland fallback once
// the objective stalls; singleton-column crash basis, so models whose rows
// all carry a slack or a positive singleton start without artificials.
Solution solve(const LinearProgram& prog, const SimplexOptions& opts = {});

// CPLEX LP-format dump for cross-checking against external solvers.
void write_lp_format(const LinearProgram& prog, std::ostream& out);

}  // namespace d2dcache::lp
