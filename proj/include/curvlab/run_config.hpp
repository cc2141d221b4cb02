#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "curvlab/chart.hpp"
#include "curvlab/identity_suite.hpp"

namespace curvlab {

/// Chart request: a builtin spec or a JSON chart file.
struct ChartConfig {
  ChartSpec spec;
  std::string file;  // takes precedence over spec when non-empty

  bool operator==(const ChartConfig&) const = default;
};

/// Point 0 is the box centre; the rest are uniform in the box shrunk by `margin`.
struct PointSampler {
  int count = 1;
  std::optional<std::uint64_t> seed;  // defaults to the run seed
  double margin = 0.1;

  bool operator==(const PointSampler&) const = default;
};

struct RunConfig {
  ChartConfig chart;
  /// Explicit points; the sampler is used when empty.
  std::vector<std::vector<double>> points;
  PointSampler sampler;
  double h = 1e-3;
  int order = 4;
  std::optional<double> tolerance;
  std::map<std::string, double> tolerances;
  std::vector<std::string> include;
  std::vector<std::string> exclude;
  std::uint64_t seed = 1;
  Reading reading = Reading::A;
  int tuples = 24;
  bool algebra = true;
  bool closure = false;
  std::string output;

  bool operator==(const RunConfig&) const = default;

  /// Throws ConfigError on unknown keys, unknown identity ids, h <= 0 or count < 1.
  static RunConfig from_json(const std::string& text);
  static RunConfig from_file(const std::string& path);
  /// Canonical form: fixed key order, every field present.
  std::string to_json(int indent = 2) const;
  void validate() const;
  /// Selected identity ids after include and exclude.
  std::set<std::string> selected_identities() const;
};

/// FNV-1a 64 of the canonical config JSON, as 16 hex digits.
std::string config_hash(const RunConfig& config);

/// ISO 8601 UTC time from SOURCE_DATE_EPOCH when set, otherwise now.
std::string report_timestamp();

Chart load_chart(const ChartConfig& config);
std::vector<Vector> run_points(const Chart& chart, const RunConfig& config);

enum ExitCode { ExitPass = 0, ExitFail = 1, ExitHypothesis = 2, ExitConfig = 64, ExitDomain = 65 };

struct CheckResult {
  IdentityReport report;
  int exit_code = ExitPass;
  std::vector<std::string> messages;
};

/// Chart groups at every point, prop_1_2 over all points, thm_1 when n >= 4,
/// then the algebra-level checks for the chart's n. Hypothesis violations are
/// recorded in the report metadata rather than thrown.
CheckResult run_check(const RunConfig& config);

/// Writes to a temporary sibling file and renames it over `path`.
void write_atomic(const std::string& path, const std::string& content);

}  // namespace curvlab
