#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "curvlab/hermitian_algebra.hpp"
#include "curvlab/quad.hpp"

namespace curvlab {

/// Writes a dim x dim row-major component array for the point `x`.
template <class Real>
using PointFn = std::function<void(std::span<const Real> x, std::span<Real> out)>;

template <class Real>
struct ChartFns {
  PointFn<Real> metric;  // g_ab
  PointFn<Real> J;       // J^a_b: component a of J applied to the b-th coordinate vector
};

/// Coordinate description of an almost Hermitian structure on a box.
/// Charts expose double and quad evaluations of the same functions so the
/// finite-difference pipeline can run in either precision.
struct Chart {
  std::string name;
  int n = 0;
  std::vector<double> lower;
  std::vector<double> upper;
  std::map<std::string, double> params;
  ChartFns<double> fns_d;
  ChartFns<Quad> fns_q;

  int dim() const { return 2 * n; }

  template <class Real>
  const ChartFns<Real>& fns() const {
    if constexpr (std::is_same_v<Real, Quad>)
      return fns_q;
    else
      return fns_d;
  }

  Matrix metric(const Vector& x) const;
  Matrix complex_structure(const Vector& x) const;
  /// Validated pointwise space with a J-adapted frame. Throws OutOfDomain.
  HermitianSpace space_at(const Vector& x, double tol = 1e-10) const;

  /// Smallest distance from x to the boundary of the box (negative outside).
  double margin(const Vector& x) const;
  Vector center() const;
};

/// Chart request: a builtin name with complex dimension and parameters, or a
/// product of factor specs. `flat:2` is the string form of {flat, n = 2}.
struct ChartSpec {
  std::string name;
  int n = 0;
  std::map<std::string, double> params;
  std::vector<ChartSpec> factors;

  static ChartSpec parse(const std::string& text);
  std::string to_string() const;
  bool operator==(const ChartSpec&) const = default;
};

struct BuiltinInfo {
  std::string name;
  std::string summary;
  std::string params;
};
const std::vector<BuiltinInfo>& builtin_catalog();

/// Throws UnknownChart or BadParams.
Chart builtin_chart(const ChartSpec& spec);
Chart builtin_chart(const std::string& name, int n = 0, const std::map<std::string, double>& params = {});

/// Block-diagonal product, coordinates of `a` first.
Chart product_chart(const Chart& a, const Chart& b);

/// Parses the JSON chart format:
///
///     {"grammar": 1, "name": "...", "dim": 4,
///      "domain": [[lo, hi], ...],
///      "params": {"a": 0.5},
///      "metric": [["1", "0", ...], ...],
///      "J": [["0", "-1", ...], ...]}
///
/// Entries are expression strings (see Expression) or plain numbers in the
/// variables x1..x{dim}; `J` rows hold J^a_b with a the row index. Throws
/// ParseError (with line/column for malformed JSON and expressions) or BadParams.
Chart load_chart_json(const std::string& text);
Chart load_chart_file(const std::string& path);

}  // namespace curvlab
