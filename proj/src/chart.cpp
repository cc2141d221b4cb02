#include "curvlab/chart.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "curvlab/errors.hpp"
#include "curvlab/expression.hpp"

namespace curvlab {

namespace {

template <class Real>
void standard_j(int d, std::span<Real> out) {
  std::fill(out.begin(), out.end(), Real(0));
  for (int k = 0; 2 * k + 1 < d; ++k) {
    out[(2 * k + 1) * d + 2 * k] = Real(1);
    out[(2 * k) * d + 2 * k + 1] = Real(-1);
  }
}

// Kahler metric (4/|c|) Re h on the affine chart z_k = x_{2k} + i x_{2k+1}, with
// h = delta / w - sign zbar_k z_l / w^2 and w = 1 + sign |z|^2. sign = +1 gives
// Fubini-Study, sign = -1 the ball model.
template <class Real>
void kahler_model_metric(int n, double c, int sign, std::span<const Real> x, std::span<Real> g) {
  const int d = 2 * n;
  Real s(0);
  for (int i = 0; i < d; ++i) s += x[i] * x[i];
  const Real w = Real(1) + Real(sign) * s;
  const Real inv_w = Real(1) / w;
  const Real inv_w2 = inv_w * inv_w;
  const Real scale = Real(4) / Real(std::abs(c));
  for (int k = 0; k < n; ++k) {
    const Real ak = x[2 * k], bk = x[2 * k + 1];
    for (int l = 0; l < n; ++l) {
      const Real al = x[2 * l], bl = x[2 * l + 1];
      Real A = -Real(sign) * (ak * al + bk * bl) * inv_w2;
      if (k == l) A += inv_w;
      const Real B = -Real(sign) * (ak * bl - bk * al) * inv_w2;
      g[(2 * k) * d + 2 * l] = scale * A;
      g[(2 * k + 1) * d + 2 * l + 1] = scale * A;
      g[(2 * k) * d + 2 * l + 1] = scale * B;
      g[(2 * k + 1) * d + 2 * l] = -scale * B;
    }
  }
}

// Coframe e1 = dx, e2 = dy, e3 = dz - x dy, e4 = dt on R^4 with the Heisenberg
// group law in (x, y, z) and omega = e1 ^ e4 + e2 ^ e3, which is closed, while J
// (J E1 = E4, J E2 = E3 on the dual frame) is not parallel.
template <class Real>
void kt_metric(std::span<const Real> x, std::span<Real> g) {
  std::fill(g.begin(), g.end(), Real(0));
  const Real a = x[0];
  g[0 * 4 + 0] = Real(1);
  g[1 * 4 + 1] = Real(1) + a * a;
  g[1 * 4 + 2] = -a;
  g[2 * 4 + 1] = -a;
  g[2 * 4 + 2] = Real(1);
  g[3 * 4 + 3] = Real(1);
}

template <class Real>
void kt_j(std::span<const Real> x, std::span<Real> J) {
  std::fill(J.begin(), J.end(), Real(0));
  const Real a = x[0];
  J[3 * 4 + 0] = Real(1);
  J[1 * 4 + 1] = a;
  J[2 * 4 + 1] = Real(1) + a * a;
  J[1 * 4 + 2] = Real(-1);
  J[2 * 4 + 2] = -a;
  J[0 * 4 + 3] = Real(-1);
}

template <class Real, class F>
ChartFns<Real> make_fns(F metric, int d) {
  ChartFns<Real> f;
  f.metric = metric;
  f.J = [d](std::span<const Real>, std::span<Real> out) { standard_j<Real>(d, out); };
  return f;
}

void require_params(const ChartSpec& spec, std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : spec.params) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }) == allowed.end())
      throw Error(ErrorCode::BadParams, "chart '" + spec.name + "' has no parameter '" + k + "'");
    if (!std::isfinite(v)) throw Error(ErrorCode::BadParams, "parameter '" + k + "' is not finite");
  }
}

double param_or(const ChartSpec& spec, const std::string& key, double fallback) {
  auto it = spec.params.find(key);
  return it == spec.params.end() ? fallback : it->second;
}

Chart box_chart(const std::string& name, int n, double half_width) {
  Chart c;
  c.name = name;
  c.n = n;
  c.lower.assign(2 * n, -half_width);
  c.upper.assign(2 * n, half_width);
  return c;
}

Chart flat(const ChartSpec& spec) {
  require_params(spec, {});
  if (spec.n < 1) throw Error(ErrorCode::BadParams, "flat needs n >= 1");
  Chart c = box_chart("flat", spec.n, 1.0);
  const int d = c.dim();
  auto eye = [d]<class Real>(std::span<Real> out) {
    std::fill(out.begin(), out.end(), Real(0));
    for (int i = 0; i < d; ++i) out[i * d + i] = Real(1);
  };
  c.fns_d = make_fns<double>([eye](std::span<const double>, std::span<double> g) { eye(g); }, d);
  c.fns_q = make_fns<Quad>([eye](std::span<const Quad>, std::span<Quad> g) { eye(g); }, d);
  return c;
}

Chart kahler_model(const ChartSpec& spec, int sign) {
  require_params(spec, {"c"});
  if (spec.n < 1) throw Error(ErrorCode::BadParams, spec.name + " needs n >= 1");
  const double cval = param_or(spec, "c", 4.0);
  if (sign > 0 && !(cval > 0))
    throw Error(ErrorCode::BadParams, "fubini_study needs c > 0; use complex_hyperbolic for negative curvature");
  if (cval == 0) throw Error(ErrorCode::BadParams, "complex_hyperbolic needs c != 0");
  const int n = spec.n;
  // The ball |z| < 1 contains the box when its half-diagonal is below 1.
  Chart c = box_chart(spec.name, n, sign > 0 ? 1.0 : 0.9 / std::sqrt(2.0 * n));
  c.params["c"] = cval;
  const int d = c.dim();
  c.fns_d = make_fns<double>(
      [=](std::span<const double> x, std::span<double> g) { kahler_model_metric<double>(n, cval, sign, x, g); }, d);
  c.fns_q = make_fns<Quad>(
      [=](std::span<const Quad> x, std::span<Quad> g) { kahler_model_metric<Quad>(n, cval, sign, x, g); }, d);
  return c;
}

Chart kodaira_thurston(const ChartSpec& spec) {
  require_params(spec, {});
  if (spec.n != 0 && spec.n != 2) throw Error(ErrorCode::BadParams, "kodaira_thurston is fixed at real dimension 4");
  Chart c = box_chart("kodaira_thurston", 2, 1.0);
  c.fns_d = {[](std::span<const double> x, std::span<double> g) { kt_metric<double>(x, g); },
             [](std::span<const double> x, std::span<double> J) { kt_j<double>(x, J); }};
  c.fns_q = {[](std::span<const Quad> x, std::span<Quad> g) { kt_metric<Quad>(x, g); },
             [](std::span<const Quad> x, std::span<Quad> J) { kt_j<Quad>(x, J); }};
  return c;
}

template <class Real>
PointFn<Real> block_diag(PointFn<Real> fa, PointFn<Real> fb, int da, int db) {
  return [=](std::span<const Real> x, std::span<Real> out) {
    const int d = da + db;
    std::vector<Real> a(da * da), b(db * db);
    fa(x.subspan(0, da), a);
    fb(x.subspan(da, db), b);
    std::fill(out.begin(), out.end(), Real(0));
    for (int i = 0; i < da; ++i)
      for (int j = 0; j < da; ++j) out[i * d + j] = a[i * da + j];
    for (int i = 0; i < db; ++i)
      for (int j = 0; j < db; ++j) out[(da + i) * d + da + j] = b[i * db + j];
  };
}

template <class Real>
Matrix eval_matrix(const PointFn<Real>& f, const Vector& x) {
  const int d = static_cast<int>(x.size());
  std::vector<Real> xs(d), out(d * d);
  for (int i = 0; i < d; ++i) xs[i] = Real(x(i));
  f(xs, out);
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = static_cast<double>(out[i * d + j]);
  return m;
}

}  // namespace

Matrix Chart::metric(const Vector& x) const { return eval_matrix(fns_q.metric, x); }
Matrix Chart::complex_structure(const Vector& x) const { return eval_matrix(fns_q.J, x); }

double Chart::margin(const Vector& x) const {
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < dim(); ++i) m = std::min({m, x(i) - lower[i], upper[i] - x(i)});
  return m;
}

Vector Chart::center() const {
  Vector c(dim());
  for (int i = 0; i < dim(); ++i) c(i) = 0.5 * (lower[i] + upper[i]);
  return c;
}

HermitianSpace Chart::space_at(const Vector& x, double tol) const {
  if (x.size() != dim()) throw Error(ErrorCode::OutOfDomain, "point has dimension " + std::to_string(x.size()));
  if (!(margin(x) > 0)) throw Error(ErrorCode::OutOfDomain, "point outside the domain of chart '" + name + "'");
  return make_space(n, metric(x), complex_structure(x), FrameKind::JAdapted, tol);
}

Chart product_chart(const Chart& a, const Chart& b) {
  Chart c;
  c.name = "product(" + a.name + "," + b.name + ")";
  c.n = a.n + b.n;
  c.lower = a.lower;
  c.lower.insert(c.lower.end(), b.lower.begin(), b.lower.end());
  c.upper = a.upper;
  c.upper.insert(c.upper.end(), b.upper.begin(), b.upper.end());
  for (const auto& [k, v] : a.params) c.params["0." + k] = v;
  for (const auto& [k, v] : b.params) c.params["1." + k] = v;
  const int da = a.dim(), db = b.dim();
  c.fns_d = {block_diag(a.fns_d.metric, b.fns_d.metric, da, db), block_diag(a.fns_d.J, b.fns_d.J, da, db)};
  c.fns_q = {block_diag(a.fns_q.metric, b.fns_q.metric, da, db), block_diag(a.fns_q.J, b.fns_q.J, da, db)};
  return c;
}

const std::vector<BuiltinInfo>& builtin_catalog() {
  static const std::vector<BuiltinInfo> cat = {
      {"flat", "Euclidean metric with constant J0 on [-1,1]^{2n}; nu = 0", "n >= 1"},
      {"fubini_study", "affine-chart Fubini-Study metric on [-1,1]^{2n}; holomorphic curvature c",
       "n >= 1; c > 0 (default 4)"},
      {"complex_hyperbolic", "ball-model complex hyperbolic metric on a box inside |z| < 0.9; holomorphic "
                             "curvature -|c|",
       "n >= 1; c != 0 (default 4)"},
      {"kodaira_thurston", "left-invariant almost Kahler, non-Kahler structure on the Kodaira-Thurston "
                           "nilmanifold chart [-1,1]^4",
       "real dimension 4"},
      {"product", "block-diagonal product of two factor charts (coordinates of the first factor first)",
       "two factors"},
  };
  return cat;
}

Chart builtin_chart(const ChartSpec& spec) {
  if (spec.name == "flat") return flat(spec);
  if (spec.name == "fubini_study") return kahler_model(spec, +1);
  if (spec.name == "complex_hyperbolic") return kahler_model(spec, -1);
  if (spec.name == "kodaira_thurston") return kodaira_thurston(spec);
  if (spec.name == "product") {
    require_params(spec, {});
    if (spec.factors.size() < 2) throw Error(ErrorCode::BadParams, "product needs at least two factors");
    Chart c = builtin_chart(spec.factors[0]);
    for (std::size_t i = 1; i < spec.factors.size(); ++i) c = product_chart(c, builtin_chart(spec.factors[i]));
    if (spec.n != 0 && spec.n != c.n)
      throw Error(ErrorCode::BadParams, "product factors have total n = " + std::to_string(c.n));
    return c;
  }
  throw Error(ErrorCode::UnknownChart, "no builtin chart named '" + spec.name + "'");
}

Chart builtin_chart(const std::string& name, int n, const std::map<std::string, double>& params) {
  return builtin_chart(ChartSpec{name, n, params, {}});
}

ChartSpec ChartSpec::parse(const std::string& text) {
  ChartSpec s;
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.empty() || parts[0].empty()) throw Error(ErrorCode::BadParams, "empty chart spec");
  s.name = parts[0];
  std::size_t i = 1;
  if (i < parts.size() && parts[i].find('=') == std::string::npos) {
    try {
      std::size_t used = 0;
      s.n = std::stoi(parts[i], &used);
      if (used != parts[i].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(ErrorCode::BadParams, "bad dimension '" + parts[i] + "' in chart spec '" + text + "'");
    }
    ++i;
  }
  for (; i < parts.size(); ++i) {
    std::stringstream kv(parts[i]);
    for (std::string item; std::getline(kv, item, ',');) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::BadParams, "expected key=value in '" + item + "'");
      try {
        s.params[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
      } catch (const std::exception&) {
        throw Error(ErrorCode::BadParams, "bad value in '" + item + "'");
      }
    }
  }
  return s;
}

std::string ChartSpec::to_string() const {
  std::ostringstream os;
  os << name;
  if (n != 0) os << ':' << n;
  bool first = true;
  for (const auto& [k, v] : params) {
    os << (first ? ":" : ",") << k << '=' << v;
    first = false;
  }
  for (const ChartSpec& f : factors) os << (&f == &factors.front() ? " [" : " ") << f.to_string();
  if (!factors.empty()) os << ']';
  return os.str();
}

namespace {

using nlohmann::json;

[[noreturn]] void json_fail(const std::string& msg) { throw Error(ErrorCode::ParseError, msg); }

std::string line_col(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

std::vector<Expression> component_grid(const json& j, const char* field, int d,
                                       const std::vector<std::string>& vars,
                                       const std::map<std::string, double>& params) {
  if (!j.contains(field)) json_fail(std::string("missing field '") + field + "'");
  const json& rows = j[field];
  if (!rows.is_array() || static_cast<int>(rows.size()) != d)
    json_fail(std::string("field '") + field + "' must be a " + std::to_string(d) + "x" + std::to_string(d) +
              " array");
  std::vector<Expression> out;
  for (int a = 0; a < d; ++a) {
    if (!rows[a].is_array() || static_cast<int>(rows[a].size()) != d)
      json_fail(std::string(field) + "[" + std::to_string(a) + "] must have " + std::to_string(d) + " entries");
    for (int b = 0; b < d; ++b) {
      const json& e = rows[a][b];
      const std::string where = std::string(field) + "[" + std::to_string(a) + "][" + std::to_string(b) + "]";
      std::string src;
      if (e.is_string())
        src = e.get<std::string>();
      else if (e.is_number())
        src = e.dump();
      else
        json_fail(where + " must be a string or a number");
      try {
        out.push_back(Expression::compile(src, vars, params));
      } catch (const Error& err) {
        json_fail(where + ": " + std::string(err.what()).substr(std::string("ParseError: ").size()));
      }
    }
  }
  return out;
}

template <class Real>
PointFn<Real> grid_fn(std::shared_ptr<const std::vector<Expression>> grid) {
  return [grid](std::span<const Real> x, std::span<Real> out) {
    for (std::size_t i = 0; i < grid->size(); ++i) out[i] = (*grid)[i].eval<Real>(x);
  };
}

}  // namespace

Chart load_chart_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    json_fail("malformed JSON at " + line_col(text, e.byte));
  }
  if (!j.is_object()) json_fail("chart spec must be a JSON object");
  if (j.contains("grammar") && j["grammar"] != Expression::grammar_version)
    json_fail("unsupported grammar version " + j["grammar"].dump());
  if (!j.contains("dim") || !j["dim"].is_number_integer()) json_fail("missing integer field 'dim'");
  const int d = j["dim"].get<int>();
  if (d < 2 || d % 2 != 0) throw Error(ErrorCode::BadParams, "dim must be even and positive");

  Chart c;
  c.name = j.value("name", std::string("user"));
  c.n = d / 2;
  if (j.contains("params")) {
    if (!j["params"].is_object()) json_fail("'params' must be an object");
    for (const auto& [k, v] : j["params"].items()) {
      if (!v.is_number()) json_fail("parameter '" + k + "' must be a number");
      c.params[k] = v.get<double>();
    }
  }
  if (!j.contains("domain")) json_fail("missing field 'domain'");
  const json& dom = j["domain"];
  if (!dom.is_array() || static_cast<int>(dom.size()) != d) json_fail("'domain' must list one [lo, hi] per axis");
  for (int i = 0; i < d; ++i) {
    if (!dom[i].is_array() || dom[i].size() != 2 || !dom[i][0].is_number() || !dom[i][1].is_number())
      json_fail("domain[" + std::to_string(i) + "] must be [lo, hi]");
    const double lo = dom[i][0].get<double>(), hi = dom[i][1].get<double>();
    if (!(lo < hi)) throw Error(ErrorCode::BadParams, "domain[" + std::to_string(i) + "] is empty");
    c.lower.push_back(lo);
    c.upper.push_back(hi);
  }
  std::vector<std::string> vars;
  for (int i = 1; i <= d; ++i) vars.push_back("x" + std::to_string(i));
  auto metric = std::make_shared<const std::vector<Expression>>(component_grid(j, "metric", d, vars, c.params));
  auto J = std::make_shared<const std::vector<Expression>>(component_grid(j, "J", d, vars, c.params));
  c.fns_d = {grid_fn<double>(metric), grid_fn<double>(J)};
  c.fns_q = {grid_fn<Quad>(metric), grid_fn<Quad>(J)};
  return c;
}

Chart load_chart_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read chart file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_chart_json(ss.str());
}

}  // namespace curvlab
