#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace d2dcache {

// Dense row-major matrix. File-by-user tables use (file, user) indexing.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  T& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

// Immutable problem instance. All solver entry points treat a Scenario as
// read-only; it is safe to share one instance across worker threads.
struct Scenario {
  int num_users = 0;                  // U
  int num_files = 0;                  // F
  std::vector<int> cache_capacity;    // per user, segments
  int contact_budget = 1;             // B, segments per contact
  Matrix<double> contact_rate;        // U x U, contacts per unit time, symmetric, zero diagonal
  Matrix<double> popularity;          // F x U, columns sum to 1
  std::vector<int> recover_segments;  // per file
  std::vector<int> max_segments;      // per file
  double nlr_limit = 1.0;             // R'
  double delay_limit = 1.0;           // T_max acceptable to users
  std::vector<double> zipf_shape;     // per user, metadata only

  bool operator==(const Scenario&) const = default;

  int max_recover_segments() const;
};

// Throws std::invalid_argument when a structural invariant is broken
// (dimension mismatch, popularity column off unity, asymmetric rates, ...).
void validate_scenario(const Scenario& s);

// Segment counts x[f][i]. Like Scenario, treated as immutable once built.
struct Placement {
  Matrix<int> counts;  // F x U

  Placement() = default;
  Placement(int num_files, int num_users) : counts(num_files, num_users, 0) {}

  int total_at_user(int user) const;
  int total_of_file(int file) const;

  bool operator==(const Placement&) const = default;
};

struct ConstraintViolation {
  std::string constraint;  // "cache-capacity" | "segment-budget" | "level-range"
  int file = -1;           // -1 where not applicable
  int user = -1;
  long amount = 0;         // how far over the bound

  std::string describe() const;
};

struct FeasibilityReport {
  bool ok = true;
  std::vector<ConstraintViolation> violations;
};

// Checks the placement box, per-user capacity, and per-file segment budget.
// Enumerates every violation; dimension mismatches throw instead.
FeasibilityReport check_feasible(const Scenario& s, const Placement& p);

struct SearchParams {
  double t_min = 0.0;
  double t_max = 400.0;
  double step = 1.0;        // eta
  double tolerance = 1e-6;  // epsilon

  bool operator==(const SearchParams&) const = default;
};

// Requires 0 <= t_min < t_max, step > tolerance > 0.
void validate_search_params(const SearchParams& p);

// Scenario files are canonical-order JSON documents with a format_version
// tag; doubles round-trip bit-exactly. See README for the schema.
std::string scenario_to_text(const Scenario& s);
Scenario scenario_from_text(const std::string& text);
void save_scenario(const Scenario& s, const std::filesystem::path& path);
Scenario load_scenario(const std::filesystem::path& path);

std::string placement_to_text(const Placement& p);
Placement placement_from_text(const std::string& text);
void save_placement(const Placement& p, const std::filesystem::path& path);
Placement load_placement(const std::filesystem::path& path);

}  // namespace d2dcache
