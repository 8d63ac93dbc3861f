#include "d2dcache/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace d2dcache {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kScenarioFormatVersion = 1;
constexpr int kPlacementFormatVersion = 1;
constexpr double kPopularityTolerance = 1e-9;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

int Scenario::max_recover_segments() const {
  int m = 0;
  for (int v : recover_segments) m = std::max(m, v);
  return m;
}

void validate_scenario(const Scenario& s) {
  if (s.num_users <= 0) fail("scenario: num_users must be positive");
  if (s.num_files <= 0) fail("scenario: num_files must be positive");
  if (s.contact_budget <= 0) fail("scenario: contact_budget must be positive");
  if (static_cast<int>(s.cache_capacity.size()) != s.num_users)
    fail("scenario: cache_capacity must have one entry per user");
  for (int i = 0; i < s.num_users; ++i) {
    if (s.cache_capacity[i] < 0) fail("scenario: cache_capacity[" + std::to_string(i) + "] is negative");
  }
  if (s.contact_rate.rows() != s.num_users || s.contact_rate.cols() != s.num_users)
    fail("scenario: contact_rate must be num_users x num_users");
  for (int i = 0; i < s.num_users; ++i) {
    if (s.contact_rate(i, i) != 0.0)
      fail("scenario: contact_rate diagonal must be zero (user " + std::to_string(i) + ")");
    for (int j = 0; j < s.num_users; ++j) {
      double v = s.contact_rate(i, j);
      if (!(v >= 0.0) || !std::isfinite(v))
        fail("scenario: contact_rate[" + std::to_string(i) + "][" + std::to_string(j) +
             "] must be finite and >= 0");
      if (v != s.contact_rate(j, i))
        fail("scenario: contact_rate must be symmetric (users " + std::to_string(i) + "," +
             std::to_string(j) + ")");
    }
  }
  if (s.popularity.rows() != s.num_files || s.popularity.cols() != s.num_users)
    fail("scenario: popularity must be num_files x num_users");
  for (int i = 0; i < s.num_users; ++i) {
    double sum = 0.0;
    for (int f = 0; f < s.num_files; ++f) {
      double v = s.popularity(f, i);
      if (!(v >= 0.0) || v > 1.0 || !std::isfinite(v))
        fail("scenario: popularity[" + std::to_string(f) + "][" + std::to_string(i) +
             "] must lie in [0,1]");
      sum += v;
    }
    if (std::fabs(sum - 1.0) > kPopularityTolerance)
      fail("scenario: popularity of user " + std::to_string(i) + " sums to " +
           std::to_string(sum) + ", expected 1");
  }
  if (static_cast<int>(s.recover_segments.size()) != s.num_files)
    fail("scenario: recover_segments must have one entry per file");
  if (static_cast<int>(s.max_segments.size()) != s.num_files)
    fail("scenario: max_segments must have one entry per file");
  for (int f = 0; f < s.num_files; ++f) {
    if (s.recover_segments[f] <= 0)
      fail("scenario: recover_segments[" + std::to_string(f) + "] must be positive");
    if (s.max_segments[f] < s.recover_segments[f])
      fail("scenario: max_segments[" + std::to_string(f) + "] must be >= recover_segments");
  }
  if (!(s.nlr_limit >= 0.0 && s.nlr_limit <= 1.0)) fail("scenario: nlr_limit must lie in [0,1]");
  if (!(s.delay_limit > 0.0) || !std::isfinite(s.delay_limit))
    fail("scenario: delay_limit must be positive and finite");
  if (static_cast<int>(s.zipf_shape.size()) != s.num_users)
    fail("scenario: zipf_shape must have one entry per user");
  for (double g : s.zipf_shape) {
    if (!(g >= 0.0) || !std::isfinite(g)) fail("scenario: zipf_shape entries must be >= 0");
  }
}

int Placement::total_at_user(int user) const {
  int sum = 0;
  for (int f = 0; f < counts.rows(); ++f) sum += counts(f, user);
  return sum;
}

int Placement::total_of_file(int file) const {
  int sum = 0;
  for (int i = 0; i < counts.cols(); ++i) sum += counts(file, i);
  return sum;
}

std::string ConstraintViolation::describe() const {
  std::ostringstream os;
  os << constraint;
  if (file >= 0) os << " file=" << file;
  if (user >= 0) os << " user=" << user;
  os << " over_by=" << amount;
  return os.str();
}

FeasibilityReport check_feasible(const Scenario& s, const Placement& p) {
  if (p.counts.rows() != s.num_files || p.counts.cols() != s.num_users)
    fail("check_feasible: placement is " + std::to_string(p.counts.rows()) + "x" +
         std::to_string(p.counts.cols()) + ", scenario wants " + std::to_string(s.num_files) +
         "x" + std::to_string(s.num_users));
  FeasibilityReport report;
  for (int f = 0; f < s.num_files; ++f) {
    for (int i = 0; i < s.num_users; ++i) {
      int x = p.counts(f, i);
      if (x < 0) {
        report.violations.push_back({"level-range", f, i, static_cast<long>(-x)});
      } else if (x > s.recover_segments[f]) {
        report.violations.push_back({"level-range", f, i, static_cast<long>(x - s.recover_segments[f])});
      }
    }
  }
  for (int i = 0; i < s.num_users; ++i) {
    long used = p.total_at_user(i);
    if (used > s.cache_capacity[i])
      report.violations.push_back({"cache-capacity", -1, i, used - s.cache_capacity[i]});
  }
  for (int f = 0; f < s.num_files; ++f) {
    long used = p.total_of_file(f);
    if (used > s.max_segments[f])
      report.violations.push_back({"segment-budget", f, -1, used - s.max_segments[f]});
  }
  report.ok = report.violations.empty();
  return report;
}

void validate_search_params(const SearchParams& p) {
  if (!(p.t_min >= 0.0)) fail("search params: t_min must be >= 0");
  if (!(p.t_max > p.t_min)) fail("search params: t_max must exceed t_min");
  if (!(p.tolerance > 0.0)) fail("search params: tolerance must be positive");
  if (!(p.step > p.tolerance)) fail("search params: step must exceed tolerance");
}

namespace {

template <typename T>
ordered_json matrix_to_json(const Matrix<T>& m) {
  ordered_json rows = ordered_json::array();
  for (int r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename T>
Matrix<T> matrix_from_json(const ordered_json& j, const char* field) {
  if (!j.is_array()) fail(std::string("scenario: field '") + field + "' must be an array of rows");
  int rows = static_cast<int>(j.size());
  int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
  Matrix<T> m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (!j[r].is_array() || static_cast<int>(j[r].size()) != cols)
      fail(std::string("scenario: field '") + field + "' has ragged rows");
    for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<T>();
  }
  return m;
}

const ordered_json& require_field(const ordered_json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) fail(std::string("scenario: missing field '") + name + "'");
  return *it;
}

}  // namespace

std::string scenario_to_text(const Scenario& s) {
  ordered_json j;
  j["format_version"] = kScenarioFormatVersion;
  j["num_users"] = s.num_users;
  j["num_files"] = s.num_files;
  j["cache_capacity"] = s.cache_capacity;
  j["contact_budget"] = s.contact_budget;
  j["contact_rate"] = matrix_to_json(s.contact_rate);
  j["popularity"] = matrix_to_json(s.popularity);
  j["recover_segments"] = s.recover_segments;
  j["max_segments"] = s.max_segments;
  j["nlr_limit"] = s.nlr_limit;
  j["delay_limit"] = s.delay_limit;
  j["zipf_shape"] = s.zipf_shape;
  return j.dump(2) + "\n";
}

Scenario scenario_from_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(std::string("scenario: not valid JSON: ") + e.what());
  }
  int version = require_field(j, "format_version").get<int>();
  if (version != kScenarioFormatVersion)
    fail("scenario: unsupported format_version " + std::to_string(version));
  Scenario s;
  s.num_users = require_field(j, "num_users").get<int>();
  s.num_files = require_field(j, "num_files").get<int>();
  s.cache_capacity = require_field(j, "cache_capacity").get<std::vector<int>>();
  s.contact_budget = require_field(j, "contact_budget").get<int>();
  s.contact_rate = matrix_from_json<double>(require_field(j, "contact_rate"), "contact_rate");
  s.popularity = matrix_from_json<double>(require_field(j, "popularity"), "popularity");
  s.recover_segments = require_field(j, "recover_segments").get<std::vector<int>>();
  s.max_segments = require_field(j, "max_segments").get<std::vector<int>>();
  s.nlr_limit = require_field(j, "nlr_limit").get<double>();
  s.delay_limit = require_field(j, "delay_limit").get<double>();
  s.zipf_shape = require_field(j, "zipf_shape").get<std::vector<double>>();
  validate_scenario(s);
  return s;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write " + path.string());
  out << text;
}

}  // namespace

void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  write_file(path, scenario_to_text(s));
}

Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_text(read_file(path));
}

std::string placement_to_text(const Placement& p) {
  ordered_json j;
  j["format_version"] = kPlacementFormatVersion;
  j["num_files"] = p.counts.rows();
  j["num_users"] = p.counts.cols();
  j["counts"] = matrix_to_json(p.counts);
  return j.dump(2) + "\n";
}

Placement placement_from_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(std::string("placement: not valid JSON: ") + e.what());
  }
  int version = require_field(j, "format_version").get<int>();
  if (version != kPlacementFormatVersion)
    fail("placement: unsupported format_version " + std::to_string(version));
  Placement p;
  p.counts = matrix_from_json<int>(require_field(j, "counts"), "counts");
  int f = require_field(j, "num_files").get<int>();
  int u = require_field(j, "num_users").get<int>();
  if (p.counts.rows() != f || p.counts.cols() != u)
    fail("placement: counts shape disagrees with num_files/num_users");
  return p;
}

void save_placement(const Placement& p, const std::filesystem::path& path) {
  write_file(path, placement_to_text(p));
}

Placement load_placement(const std::filesystem::path& path) {
  return placement_from_text(read_file(path));
}

}  // namespace d2dcache
