#include "curvlab/identity_suite.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <tuple>
#include <limits>
#include <sstream>

#include <Eigen/QR>

#include "curvlab/errors.hpp"
#include "curvlab/rng.hpp"
#include "curvlab/version.hpp"
#include "json.hpp"

namespace curvlab {

using json = nlohmann::ordered_json;

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Exploratory: return "exploratory";
  }
  return "fail";
}

namespace {

Verdict verdict_from(std::string_view s) {
  if (s == "pass") return Verdict::Pass;
  if (s == "exploratory") return Verdict::Exploratory;
  if (s == "fail") return Verdict::Fail;
  throw Error(ErrorCode::ParseError, "unknown verdict '" + std::string(s) + "'");
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double read_number(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

constexpr double kAlgebraTol = 1e-10;

}  // namespace

std::string default_report_header() {
  return "Kaehler-degenerate regime: the only desk-scale p.c.a.s.c. almost Kaehler charts are Kaehler space "
         "forms, where every term containing nabla J, nabla Q, dnu or dtau vanishes on its own. Chart "
         "entries therefore carry term_magnitude; the discriminating checks are the pure-algebra "
         "instance entries.";
}

void IdentityReport::merge(const IdentityReport& other) {
  entries.insert(entries.end(), other.entries.begin(), other.entries.end());
  metadata.skipped.insert(metadata.skipped.end(), other.metadata.skipped.begin(), other.metadata.skipped.end());
  metadata.hypothesis_violations.insert(metadata.hypothesis_violations.end(),
                                        other.metadata.hypothesis_violations.begin(),
                                        other.metadata.hypothesis_violations.end());
}

void IdentityReport::sort() {
  std::stable_sort(entries.begin(), entries.end(), [](const ReportEntry& a, const ReportEntry& b) {
    if (a.identity_id != b.identity_id) return a.identity_id < b.identity_id;
    if (a.context != b.context) return a.context < b.context;
    return a.check < b.check;
  });
  auto uniq = [](std::vector<std::string>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(metadata.skipped);
  uniq(metadata.hypothesis_violations);
}

bool IdentityReport::passed() const {
  return std::none_of(entries.begin(), entries.end(), [](const ReportEntry& e) { return e.verdict == Verdict::Fail; });
}

std::size_t IdentityReport::count(Verdict v) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const ReportEntry& e) { return e.verdict == v; }));
}

const ReportEntry* IdentityReport::find(std::string_view identity_id, std::string_view check) const {
  for (const ReportEntry& e : entries)
    if (e.identity_id == identity_id && e.check == check) return &e;
  return nullptr;
}

std::string IdentityReport::to_json(int indent) const {
  json root;
  root["schema_version"] = report_schema_version;
  json meta;
  meta["version"] = metadata.version;
  meta["timestamp"] = metadata.timestamp;
  meta["config_hash"] = metadata.config_hash;
  meta["header"] = metadata.header;
  meta["skipped"] = metadata.skipped;
  meta["hypothesis_violations"] = metadata.hypothesis_violations;
  root["metadata"] = meta;
  json list = json::array();
  for (const ReportEntry& e : entries) {
    json j;
    j["identity_id"] = e.identity_id;
    j["check"] = e.check;
    j["residual"] = number(e.residual);
    j["tolerance"] = number(e.tolerance);
    j["verdict"] = std::string(to_string(e.verdict));
    json ctx;
    ctx["chart"] = e.context.chart;
    json pt = json::array();
    for (double x : e.context.point) pt.push_back(number(x));
    ctx["point"] = pt;
    ctx["h"] = number(e.context.h);
    ctx["seed"] = e.context.seed;
    ctx["n"] = e.context.n;
    j["context"] = ctx;
    j["term_magnitude"] = number(e.term_magnitude);
    j["note"] = e.note;
    json det = json::object();
    for (const auto& [k, v] : e.details) det[k] = number(v);
    j["details"] = det;
    list.push_back(j);
  }
  root["entries"] = list;
  return root.dump(indent) + "\n";
}

IdentityReport IdentityReport::from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, std::string("report: ") + e.what());
  }
  try {
    if (root.at("schema_version").get<int>() != report_schema_version)
      throw Error(ErrorCode::ParseError, "report: unsupported schema_version");
    IdentityReport r;
    const json& meta = root.at("metadata");
    r.metadata.version = meta.at("version").get<std::string>();
    r.metadata.timestamp = meta.at("timestamp").get<std::string>();
    r.metadata.config_hash = meta.at("config_hash").get<std::string>();
    r.metadata.header = meta.value("header", std::string());
    r.metadata.skipped = meta.value("skipped", std::vector<std::string>{});
    r.metadata.hypothesis_violations = meta.value("hypothesis_violations", std::vector<std::string>{});
    for (const json& j : root.at("entries")) {
      ReportEntry e;
      e.identity_id = j.at("identity_id").get<std::string>();
      e.check = j.value("check", std::string());
      e.residual = read_number(j.at("residual"));
      e.tolerance = read_number(j.at("tolerance"));
      e.verdict = verdict_from(j.at("verdict").get<std::string>());
      const json& ctx = j.at("context");
      e.context.chart = ctx.at("chart").get<std::string>();
      for (const json& x : ctx.at("point")) e.context.point.push_back(read_number(x));
      e.context.h = read_number(ctx.at("h"));
      e.context.seed = ctx.at("seed").get<std::uint64_t>();
      e.context.n = ctx.at("n").get<int>();
      e.term_magnitude = read_number(j.value("term_magnitude", json(0.0)));
      e.note = j.value("note", std::string());
      if (j.contains("details"))
        for (const auto& [k, v] : j.at("details").items()) e.details[k] = read_number(v);
      r.entries.push_back(std::move(e));
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("report: ") + e.what());
  }
}

double calibrated_tolerance(const JetPoint& jet) { return std::max(1e-6, 100.0 * bianchi_noise_floor(jet)); }

HypothesisState hypothesis_state(const JetPoint& jet, int plane_samples, std::uint64_t seed) {
  HypothesisState s;
  s.almost_kahler = almost_kahler_residuals(jet).r_1_8;
  if (jet.space.n >= 2) {
    const auto planes = sample_planes(jet.space, PlaneKind::Antiholomorphic, plane_samples, seed);
    const PcascEstimate e = pcasc_estimate(jet.space, jet.R, planes, 1e-8);
    s.pcasc_spread = e.spread;
    s.pcasc_nu = e.mean_nu;
  }
  return s;
}

namespace {

bool selected(const SuiteOptions& o, const std::string& id) { return o.identities.empty() || o.identities.count(id); }

double tolerance_for(const SuiteOptions& o, const std::string& id, double calibrated) {
  if (const auto it = o.tolerances.find(id); it != o.tolerances.end()) return it->second;
  return o.tolerance.value_or(calibrated);
}

ReportContext context_of(const JetPoint& jet, const SuiteOptions& o) {
  return {o.chart_label, to_std(jet.point), jet.h, o.seed, jet.space.n};
}

std::uint64_t point_seed(const SuiteOptions& o, const std::vector<double>& point) {
  // Tuples differ between points but stay reproducible for a fixed seed.
  std::uint64_t h = o.seed;
  for (double x : point) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    h = Rng(h ^ bits).next_u64();
  }
  return h;
}

/// Runs every selected catalog identity of `group` on the jet.
IdentityReport chart_group(const JetPoint& jet, double nu, const SuiteOptions& o, const std::string& group) {
  std::vector<const IdentityInfo*> ids;
  bool need_ak = false, need_pcasc = false;
  for (const IdentityInfo& info : identity_catalog()) {
    if (info.group != group || !selected(o, info.id)) continue;
    ids.push_back(&info);
    need_ak |= info.needs_almost_kahler;
    need_pcasc |= info.needs_pcasc;
  }
  IdentityReport rep;
  if (ids.empty()) return rep;
  const double calibrated = calibrated_tolerance(jet);
  const double hyp_tol = o.tolerance.value_or(calibrated);
  const HypothesisState hs = hypothesis_state(jet, o.plane_samples, o.seed);
  std::vector<std::string> failed;
  std::ostringstream where;
  where << " at " << o.chart_label << " point [";
  for (Eigen::Index i = 0; i < jet.point.size(); ++i) where << (i ? ", " : "") << jet.point(i);
  where << "]";
  if (need_ak && hs.almost_kahler > hyp_tol) {
    std::ostringstream os;
    os << "almost Kaehler residual " << hs.almost_kahler << " > " << hyp_tol << where.str();
    failed.push_back(os.str());
  }
  if (need_pcasc && jet.space.n >= 2 && hs.pcasc_spread > hyp_tol) {
    std::ostringstream os;
    os << "pcasc spread " << hs.pcasc_spread << " > " << hyp_tol << where.str();
    failed.push_back(os.str());
  }
  if (!failed.empty()) {
    std::string msg = group + " identities:";
    for (const std::string& f : failed) msg += " " + f + ";";
    throw Error(ErrorCode::HypothesisViolated, msg);
  }
  const PointData p = point_data(jet, nu);
  const ReportContext ctx = context_of(jet, o);
  const std::uint64_t seed = point_seed(o, ctx.point);
  for (const IdentityInfo* info : ids) {
    if (const std::string why = dimension_excludes(*info, jet.space.n); !why.empty()) {
      rep.metadata.skipped.push_back(why);
      continue;
    }
    const Sampled s = sample_identity(info->id, p, o.tuples, seed, o.reading);
    ReportEntry e;
    e.identity_id = info->id;
    e.residual = s.residual;
    e.term_magnitude = s.term_magnitude;
    e.tolerance = tolerance_for(o, info->id, calibrated);
    e.context = ctx;
    const bool exploratory = info->exploratory || (info->id == "eq_2_10" && o.reading == Reading::B);
    e.verdict = exploratory ? Verdict::Exploratory : (s.residual <= e.tolerance ? Verdict::Pass : Verdict::Fail);
    e.note = info->note;
    if (info->id == "eq_2_10") e.note += o.reading == Reading::A ? " (reading A)" : " (reading B)";
    if (s.term_magnitude <= e.tolerance)
      e.note += std::string(e.note.empty() ? "" : "; ") + "every term below tolerance (Kaehler-degenerate)";
    e.details["noise_floor"] = bianchi_noise_floor(jet);
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

}  // namespace

IdentityReport preliminary_residuals(const JetPoint& jet, double nu, const SuiteOptions& options) {
  return chart_group(jet, nu, options, "preliminary");
}

IdentityReport lemma_residuals(const JetPoint& jet, double nu, const SuiteOptions& options) {
  return chart_group(jet, nu, options, "lemma");
}

IdentityReport section3_residuals(const JetPoint& jet, double nu, const SuiteOptions& options) {
  return chart_group(jet, nu, options, "section3");
}

EinsteinHolomorphic einstein_holomorphic_defects(const HermitianSpace& space, const Curv4& R, int samples,
                                                 std::uint64_t seed) {
  const Bilinear rho = ricci(R);
  const int d = space.dim();
  const double tau = rho.m.trace();
  EinsteinHolomorphic out;
  out.einstein_defect = (rho.m - tau / d * Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
  out.holo_spread = sectional_spread(R, sample_planes(space, PlaneKind::Holomorphic, samples, seed)).spread;
  return out;
}

double co_vanishing_residual(const EinsteinHolomorphic& eh, double tol) {
  const double m = std::max(eh.einstein_defect, eh.holo_spread);
  if (eh.einstein_defect > tol && eh.holo_spread > tol) return 0.0;
  return m;
}

IdentityReport einstein_vs_holomorphic(std::span<const JetPoint> jets, const SuiteOptions& o) {
  IdentityReport rep;
  if (!selected(o, "prop_1_2")) return rep;
  std::vector<std::string> failed;
  for (const JetPoint& jet : jets) {
    const double calibrated = calibrated_tolerance(jet);
    const double tol = tolerance_for(o, "prop_1_2", calibrated);
    const HypothesisState hs = hypothesis_state(jet, o.plane_samples, o.seed);
    if (jet.space.n >= 2 && hs.pcasc_spread > o.tolerance.value_or(calibrated)) {
      std::ostringstream os;
      os << "pcasc spread " << hs.pcasc_spread << " at " << o.chart_label;
      failed.push_back(os.str());
      continue;
    }
    const ReportContext ctx = context_of(jet, o);
    const EinsteinHolomorphic eh =
        einstein_holomorphic_defects(jet.space, jet.R, o.plane_samples, point_seed(o, ctx.point));
    ReportEntry e;
    e.identity_id = "prop_1_2";
    e.residual = co_vanishing_residual(eh, tol);
    e.tolerance = tol;
    e.verdict = e.residual <= tol ? Verdict::Pass : Verdict::Fail;
    e.context = ctx;
    e.term_magnitude = std::max(eh.einstein_defect, eh.holo_spread);
    e.details["einstein_defect"] = eh.einstein_defect;
    e.details["holo_spread"] = eh.holo_spread;
    e.note = "residual is max(einstein_defect, holo_spread) unless both exceed tolerance";
    rep.entries.push_back(std::move(e));
  }
  if (!failed.empty()) {
    std::string msg = "prop_1_2:";
    for (const std::string& f : failed) msg += " " + f + ";";
    throw Error(ErrorCode::HypothesisViolated, msg);
  }
  return rep;
}

IdentityReport theorem1_conclusions(const std::vector<SpaceFormSample>& samples, double tol,
                                    const SuiteOptions& o) {
  IdentityReport rep;
  if (samples.empty()) return rep;
  double lo = samples.front().nu, hi = lo;
  for (const SpaceFormSample& s : samples) {
    lo = std::min(lo, s.nu);
    hi = std::max(hi, s.nu);
    const ReportContext ctx{o.chart_label, s.point, 0.0, o.seed, s.space.n};
    const Curv4 model = (canonical(s.space, Canonical::Pi1) + canonical(s.space, Canonical::Pi2)) * s.nu;
    ReportEntry a;
    a.identity_id = "thm_1";
    a.check = "nabla_J";
    a.residual = s.nabla_j;
    a.tolerance = tol;
    a.verdict = a.residual <= tol ? Verdict::Pass : Verdict::Fail;
    a.context = ctx;
    a.term_magnitude = s.nabla_j;
    a.details["nu"] = s.nu;
    ReportEntry b = a;
    b.check = "space_form";
    b.residual = (s.R - model).max_abs();
    b.term_magnitude = s.R.max_abs();
    b.verdict = b.residual <= tol ? Verdict::Pass : Verdict::Fail;
    rep.entries.push_back(std::move(a));
    rep.entries.push_back(std::move(b));
  }
  ReportEntry c;
  c.identity_id = "thm_1";
  c.check = "constant_nu";
  c.residual = hi - lo;
  c.tolerance = tol;
  c.verdict = c.residual <= tol ? Verdict::Pass : Verdict::Fail;
  c.context = {o.chart_label, {}, 0.0, o.seed, samples.front().space.n};
  c.term_magnitude = std::max(std::abs(lo), std::abs(hi));
  c.details["nu_min"] = lo;
  c.details["nu_max"] = hi;
  c.details["points"] = static_cast<double>(samples.size());
  rep.entries.push_back(std::move(c));
  return rep;
}

IdentityReport theorem1_instance_check(const Chart& chart, const std::vector<Vector>& points, double h,
                                       const SuiteOptions& o) {
  if (chart.dim() < 8) throw Error(ErrorCode::HypothesisViolated, "thm_1 needs 2n >= 8, chart has 2n = " +
                                                                      std::to_string(chart.dim()));
  if (points.empty()) throw Error(ErrorCode::BadParams, "thm_1 needs at least one point");
  const double tol = tolerance_for(o, "thm_1", 1e-6);
  JetOptions jo;
  jo.h = h;
  jo.curvature_derivatives = false;
  std::vector<SpaceFormSample> samples;
  std::vector<std::string> failed;
  for (const Vector& x : points) {
    const JetPoint jp = jet(chart, x, jo);
    const HypothesisState hs = hypothesis_state(jp, o.plane_samples, o.seed);
    std::ostringstream at;
    at << " at [";
    for (Eigen::Index i = 0; i < x.size(); ++i) at << (i ? ", " : "") << x(i);
    at << "]";
    if (hs.almost_kahler > tol) {
      std::ostringstream os;
      os << "almost Kaehler residual " << hs.almost_kahler << at.str();
      failed.push_back(os.str());
    }
    if (hs.pcasc_spread > tol) {
      std::ostringstream os;
      os << "pcasc spread " << hs.pcasc_spread << at.str();
      failed.push_back(os.str());
    }
    samples.push_back({jp.space, jp.R, nabla_j_norm(jp), hs.pcasc_nu, to_std(x)});
  }
  if (!failed.empty()) {
    std::string msg = "thm_1 on " + chart.name + ":";
    for (const std::string& f : failed) msg += " " + f + ";";
    throw Error(ErrorCode::HypothesisViolated, msg);
  }
  IdentityReport rep = theorem1_conclusions(samples, tol, o);
  for (ReportEntry& e : rep.entries) e.context.h = h;
  if (!rep.passed()) {
    std::ostringstream os;
    os << "hypotheses hold on " << chart.name << " but the space form conclusion fails:";
    for (const ReportEntry& e : rep.entries)
      if (e.verdict == Verdict::Fail) os << " " << e.check << " residual " << e.residual << ";";
    throw ReportError(ErrorCode::ConclusionViolated, os.str(), rep);
  }
  return rep;
}

namespace {

using Fn3 = std::function<double(const Vector&, const Vector&, const Vector&)>;

std::vector<Vector> units(Rng& rng, int count, int d) {
  std::vector<Vector> v;
  for (int i = 0; i < count; ++i) {
    Vector x = rng.normal_vector(d);
    v.push_back(x / x.norm());
  }
  return v;
}

struct Fit {
  Vector coeffs;
  double relres = 0;  // max |b - A c| / max |b|
  double scale = 0;   // max |b|
};

Fit least_squares(const Matrix& A, const Vector& b) {
  Fit f;
  f.scale = b.cwiseAbs().maxCoeff();
  f.coeffs = A.colPivHouseholderQr().solve(b);
  f.relres = f.scale > 0 ? (A * f.coeffs - b).cwiseAbs().maxCoeff() / f.scale : 0.0;
  return f;
}

ReportEntry algebra_entry(const std::string& id, const std::string& check, double residual, double magnitude,
                          const ReportContext& ctx, bool exploratory, double tol = kAlgebraTol) {
  ReportEntry e;
  e.identity_id = id;
  e.check = check;
  e.residual = residual;
  e.tolerance = tol;
  e.term_magnitude = magnitude;
  e.context = ctx;
  e.verdict = exploratory ? Verdict::Exploratory : (residual <= tol ? Verdict::Pass : Verdict::Fail);
  return e;
}

std::string lead_label(int n, double lead) {
  return lead == 4.0 * (2 * n * n - 3) ? "lead_4(2n^2-3)" : "lead_4(2n-3)";
}

}  // namespace

IdentityReport algebra_checks(const AlgebraInstance& inst, const SuiteOptions& o) {
  IdentityReport rep;
  const PointData p = point_data(inst);
  const int n = inst.space.n, d = 2 * n;
  const ReportContext ctx{"algebra", {}, 0.0, o.seed, n};
  auto J = [&](const Vector& u) { return Vector(inst.space.J_frame * u); };
  Rng rng = Rng(o.seed).split("algebra_checks");

  // Claims that hold identically in the constrained (Q, A, nabla Q).
  for (const char* id : {"eq_1_8", "eq_1_9", "eq_1_10", "eq_2_2", "eq_2_3", "eq_2_4", "eq_2_5", "eq_2_6", "eq_2_7",
                         "eq_2_8", "eq_2_9"}) {
    const Sampled s = sample_identity(id, p, o.tuples, rng.next_u64());
    const std::string check = std::string(id) == "eq_2_9" ? "formal_derivative" : "identically_zero";
    ReportEntry e = algebra_entry(id, check, s.residual, s.term_magnitude, ctx, false);
    if (check == "formal_derivative") e.note = "transcribed expansion against the product-rule derivative";
    rep.entries.push_back(std::move(e));
  }

  double t_anti = 0, t_j = 0, q_skew = 0, q_mag = 0, t_mag = 0, h_def = 0, h_mag = 0;
  const int tuples = std::max(o.tuples, 50);
  // The P block of the reduced Bianchi condition, with dnu removed, is 3/(4(n+1)) H.
  PointData flat_nu = p;
  flat_nu.dnu.setZero();
  const double kh = 4.0 * (n + 1) / 3.0;
  for (int k = 0; k < tuples; ++k) {
    const auto a = units(rng, 5, d);
    const Vector &V = a[0], &X = a[1], &Y = a[2], &Z = a[3], &W = a[4];
    const double t = t_tensor(p, V, X, Y);
    t_mag = std::max(t_mag, std::abs(t));
    t_anti = std::max(t_anti, std::abs(t + t_tensor(p, V, Y, X)));
    t_j = std::max(t_j, std::abs(t + t_tensor(p, V, J(X), J(Y))));
    const double q = q1_tensor(p, V, X, Y);
    q_mag = std::max(q_mag, std::abs(q));
    q_skew = std::max({q_skew, std::abs(q + q1_tensor(p, X, V, Y)), std::abs(q + q1_tensor(p, V, Y, X))});
    auto block_hp = [&](const Vector& v, const Vector& x, const Vector& y, const Vector& z, const Vector& w) {
      auto Hb = [&](const Vector& b, const Vector& c, const Vector& e, const Vector& f) {
        const std::vector<Vector> args{v, b, c, e, f};
        return kh * identity_terms("eq_3_2", flat_nu, args)[0];
      };
      return 2 * (Hb(x, y, z, w) + Hb(z, w, x, y)) - Hb(y, z, x, w) - Hb(x, w, y, z) - Hb(z, x, y, w) -
             Hb(y, w, z, x);
    };
    for (const auto& [v, x, y, z, w] : {std::tuple{V, X, Y, Z, W}, std::tuple{V, J(X), J(Y), Z, W},
                                        std::tuple{J(V), X, Y, Z, J(W)}}) {
      const double hp = h_prime_tensor(p, v, x, y, z, w);
      h_mag = std::max(h_mag, std::abs(hp));
      h_def = std::max(h_def, std::abs(hp - block_hp(v, x, y, z, w)));
    }
  }
  rep.entries.push_back(algebra_entry("eq_2_19", "T_antisymmetry", t_anti, t_mag, ctx, false));
  rep.entries.push_back(algebra_entry("eq_2_19", "T_J_invariance", t_j, t_mag, ctx, false));
  rep.entries.push_back(algebra_entry("eq_2_19", "q1_skew", q_skew, q_mag, ctx, false));
  {
    ReportEntry e = algebra_entry("eq_3_2", "H_prime_definition", h_def, h_mag, ctx, false);
    e.note = "H' at the three stated substitutions, from H and from the P block of the reduced condition";
    rep.entries.push_back(std::move(e));
  }

  // Hypothesis-dependent derivation steps: exploratory findings.
  const int K = std::max(4 * o.tuples, 120);
  std::vector<std::array<Vector, 3>> wxy;
  for (int k = 0; k < K; ++k) {
    const auto a = units(rng, 3, d);
    wxy.push_back({a[0], a[1], a[2]});
  }
  auto E = [&](const char* id, const Vector& w, const Vector& x, const Vector& y) {
    const std::vector<Vector> args{w, x, y};
    double s = 0;
    for (double t : identity_terms(id, p, args)) s += t;
    return s;
  };
  if (n >= 3) {
    std::map<std::string, double> relres1;
    for (double lead : {4.0 * (2 * n * n - 3), 4.0 * (2 * n - 3)}) {
      auto S = [&](const Vector& w, const Vector& x, const Vector& y) { return s_tensor(p, lead, w, x, y); };
      const std::string label = lead_label(n, lead);
      for (int sign : {-1, 1}) {
        const char* target = sign < 0 ? "eq_2_15" : "eq_2_16";
        Matrix A(K, 1);
        Vector b(K);
        for (int k = 0; k < K; ++k) {
          const auto& [W, X, Y] = wxy[k];
          b(k) = S(W, X, Y) - S(W, J(X), J(Y)) + sign * (S(J(W), J(X), Y) + S(J(W), X, J(Y)));
          A(k, 0) = E(target, W, X, Y);
        }
        const Fit f = least_squares(A, b);
        const bool degenerate = A.cwiseAbs().maxCoeff() == 0.0 && f.scale <= kAlgebraTol;
        ReportEntry e = algebra_entry(target, "S_combination[" + label + "]", degenerate ? 0.0 : f.relres, f.scale,
                                      ctx, true);
        e.details["lead"] = lead;
        e.details["fit_coefficient"] = degenerate ? 0.0 : f.coeffs(0);
        e.details["holds"] = (degenerate || f.relres <= 1e-8) ? 1.0 : 0.0;
        e.note = degenerate ? "both sides vanish identically at this n"
                            : "relative residual of the J-combination of S against a multiple of the target";
        if (sign < 0) relres1[label] = f.relres;
        rep.entries.push_back(std::move(e));
      }
    }
    // Adjudication: the first combination is sensitive to the leading coefficient.
    ReportEntry adj = algebra_entry("eq_2_14", "S_coefficient_adjudication", 0.0, 0.0, ctx, true);
    const double r_long = relres1[lead_label(n, 4.0 * (2 * n * n - 3))];
    const double r_short = relres1[lead_label(n, 4.0 * (2 * n - 3))];
    adj.details["relres_lead_4(2n^2-3)"] = r_long;
    adj.details["relres_lead_4(2n-3)"] = r_short;
    const bool long_ok = r_long <= 1e-8, short_ok = r_short <= 1e-8;
    adj.residual = std::min(r_long, r_short);
    adj.details["verified_lead"] = long_ok && !short_ok ? 4.0 * (2 * n * n - 3)
                                   : short_ok && !long_ok ? 4.0 * (2 * n - 3)
                                                          : 0.0;
    adj.note = long_ok && !short_ok   ? "verified: 4(2n^2-3); rejected: 4(2n-3)"
               : short_ok && !long_ok ? "verified: 4(2n-3); rejected: 4(2n^2-3)"
               : long_ok              ? "both coefficients consistent"
                                      : "both coefficients rejected";
    rep.entries.push_back(std::move(adj));

    // The reduced combination in the span of the first combination and the transposition relation.
    {
      const int perms[6][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}, {1, 0, 2}, {0, 2, 1}, {2, 1, 0}};
      Matrix A(K, 13);
      Vector b(K);
      for (int k = 0; k < K; ++k) {
        const auto& s = wxy[k];
        b(k) = E("eq_2_18", s[0], s[1], s[2]);
        A(k, 0) = E("eq_2_15", s[0], s[1], s[2]);
        for (int q = 0; q < 6; ++q) {
          A(k, 1 + q) = E("eq_2_16", s[perms[q][0]], s[perms[q][1]], s[perms[q][2]]);
          A(k, 7 + q) = E("eq_2_17", s[perms[q][0]], s[perms[q][1]], s[perms[q][2]]);
        }
      }
      const Fit f = least_squares(A, b);
      ReportEntry e = algebra_entry("eq_2_18", "span_of_2_15_2_16_2_17", f.relres, f.scale, ctx, true);
      e.details["holds"] = f.relres <= 1e-8 ? 1.0 : 0.0;
      e.details["coef_2_15"] = f.coeffs(0);
      e.details["coef_2_17"] = f.coeffs(7);
      e.note = "least squares over the target and argument permutations of the other two";
      rep.entries.push_back(std::move(e));
    }
    // Final S expression, generic instance: hypothesis dependent.
    {
      const double lead = 4.0 * (2 * n * n - 3);
      double worst = 0, mag = 0;
      for (const auto& [W, X, Y] : wxy) {
        const double s = s_tensor(p, lead, W, X, Y);
        mag = std::max(mag, std::abs(s));
        worst = std::max(worst, std::abs(s - n * (n + 1.0) / (n - 1.0) * E("eq_2_14", W, X, Y)));
      }
      ReportEntry e = algebra_entry("eq_2_14", "S_final_expression", mag > 0 ? worst / mag : 0.0, mag, ctx, true);
      e.details["holds"] = (mag > 0 ? worst / mag : 0.0) <= 1e-8 ? 1.0 : 0.0;
      e.note = "hypothesis dependent: not expected to vanish on generic data, see bianchi_closed entries";
      rep.entries.push_back(std::move(e));
    }
  }

  // The final nabla omega condition from H' = 0 at stated and at all J-substitutions.
  {
    PointData flat_nu = p;
    flat_nu.dnu.setZero();
    const int K5 = std::max(2 * K, 200);
    Matrix stated(K5, 3), all(K5, 32);
    Vector b(K5);
    for (int k = 0; k < K5; ++k) {
      const auto a = units(rng, 5, d);
      const Vector &V = a[0], &X = a[1], &Y = a[2], &Z = a[3], &W = a[4];
      const std::vector<Vector> args{V, X, Y, Z, W};
      b(k) = 0;
      for (double t : identity_terms("eq_3_4", flat_nu, args)) b(k) += t;
      stated(k, 0) = h_prime_tensor(p, V, X, Y, Z, W);
      stated(k, 1) = h_prime_tensor(p, V, J(X), J(Y), Z, W);
      stated(k, 2) = h_prime_tensor(p, J(V), X, Y, Z, J(W));
      for (int m = 0; m < 32; ++m) {
        auto f = [&](int bit, const Vector& u) { return (m >> bit) & 1 ? J(u) : u; };
        all(k, m) = h_prime_tensor(p, f(0, V), f(1, X), f(2, Y), f(3, Z), f(4, W));
      }
    }
    const Fit fs = least_squares(stated, b), fa = least_squares(all, b);
    ReportEntry e = algebra_entry("eq_3_4", "H_prime_span_stated", fs.relres, fs.scale, ctx, true);
    e.details["holds"] = fs.relres <= 1e-8 ? 1.0 : 0.0;
    e.note = "least squares of the condition on H' at the three stated substitutions";
    rep.entries.push_back(std::move(e));
    ReportEntry e2 = algebra_entry("eq_3_4", "H_prime_span_J_variants", fa.relres, fa.scale, ctx, true);
    e2.details["holds"] = fa.relres <= 1e-8 ? 1.0 : 0.0;
    e2.note = "least squares on H' with J applied to every subset of the arguments";
    rep.entries.push_back(std::move(e2));
  }
  return rep;
}

IdentityReport bianchi_closure_checks(int n, const SuiteOptions& o) {
  IdentityReport rep;
  const BianchiClosure bc = bianchi_closed_instance(n, o.seed);
  const ReportContext ctx{"bianchi_closed", {}, 0.0, o.seed, n};
  ReportEntry head = algebra_entry("eq_3_1", "bianchi_closure_system", 0.0, 0.0, ctx, true);
  head.details["unknowns"] = bc.unknowns;
  head.details["null_dim"] = bc.null_dim;
  head.details["q_weight"] = bc.q_weight;
  head.note = "solutions of the second Bianchi identity in (Q, nu, nabla Q, dnu) at fixed nabla J";
  if (!bc.instance) {
    head.note += "; only the zero solution";
    rep.entries.push_back(std::move(head));
    return rep;
  }
  const PointData p = point_data(*bc.instance);
  head.details["max_A"] = p.A.max_abs();
  head.details["max_dnu"] = p.dnu.cwiseAbs().maxCoeff();
  head.details["max_P"] = p.P.max_abs();
  head.residual = sample_identity("eq_3_1", p, o.tuples, o.seed).residual;
  rep.entries.push_back(std::move(head));
  for (const IdentityInfo& info : identity_catalog()) {
    if (info.arity == 0 || info.group == "preliminary" || n < info.min_n) continue;
    for (Reading r : {Reading::A, Reading::B}) {
      if (r == Reading::B && info.id != "eq_2_10") continue;
      const Sampled s = sample_identity(info.id, p, o.tuples, o.seed, r);
      std::string check = "bianchi_closed";
      if (info.id == "eq_2_10") check += r == Reading::A ? "[reading_A]" : "[reading_B]";
      ReportEntry e = algebra_entry(info.id, check, s.residual, s.term_magnitude, ctx, true);
      e.details["holds"] = s.residual <= kAlgebraTol * std::max(1.0, s.term_magnitude) ? 1.0 : 0.0;
      if (info.excluded_n == n) e.note = "outside the stated dimension range";
      if (s.term_magnitude <= kAlgebraTol) e.note += std::string(e.note.empty() ? "" : "; ") + "degenerate";
      rep.entries.push_back(std::move(e));
    }
  }
  if (n >= 3) {
    Rng rng = Rng(o.seed).split("closure_S");
    for (double lead : {4.0 * (2 * n * n - 3), 4.0 * (2 * n - 3)}) {
      double worst = 0;
      for (int k = 0; k < o.tuples; ++k) {
        const auto a = units(rng, 3, 2 * n);
        worst = std::max(worst, std::abs(s_tensor(p, lead, a[0], a[1], a[2])));
      }
      ReportEntry e = algebra_entry("eq_2_14", "S_vanishes[" + lead_label(n, lead) + "]", worst, worst, ctx, true);
      e.details["lead"] = lead;
      e.details["holds"] = worst <= 1e-9 ? 1.0 : 0.0;
      rep.entries.push_back(std::move(e));
    }
  }
  return rep;
}

namespace {

struct Corruption {
  const char* name;
  std::function<void(PointData&, Rng&)> apply;
};

const std::vector<Corruption>& corruptions() {
  static const std::vector<Corruption> list = {
      {"flip_tau_star", [](PointData& p, Rng&) { p.tau_star = -p.tau_star; }},
      {"flip_nu", [](PointData& p, Rng&) { p.nu = -p.nu; }},
      {"flip_R",
       [](PointData& p, Rng&) {
         p.R = Curv4(p.R * -1.0);
         p.refresh();
       }},
      {"random_A",
       [](PointData& p, Rng& r) {
         Tensor<3> t(p.dim());
         for (double& v : t.data()) v = r.normal();
         p.A = ConstrainedA(t);
       }},
      {"random_nabla_Q",
       [](PointData& p, Rng& r) {
         for (double& v : p.nabla_Q.data()) v = r.normal();
       }},
      {"random_dnu", [](PointData& p, Rng& r) { p.dnu = r.normal_vector(p.dim()); }},
      {"random_dtau", [](PointData& p, Rng& r) { p.dtau = r.normal_vector(p.dim()); }},
      {"random_Q", [](PointData& p, Rng& r) { p.Q = Bilinear(r.normal_matrix(p.dim(), p.dim())); }},
      {"random_nabla_R",
       [](PointData& p, Rng& r) {
         for (double& v : p.nabla_R.data()) v = r.normal();
       }},
      {"random_P_and_A",
       [](PointData& p, Rng& r) {
         p.P = Bilinear(r.normal_matrix(p.dim(), p.dim()));
         p.A = random_constrained_a(p.space, r.next_u64());
       }},
  };
  return list;
}

ReportEntry control_entry(const std::string& id, double corrupted, double tol, const std::string& how, int n,
                          std::uint64_t seed) {
  ReportEntry e;
  e.identity_id = id;
  e.check = "negative_control";
  const double threshold = 10 * tol;
  // Ratio below 1 means the corruption was detected.
  e.residual = corrupted > 0 ? threshold / corrupted : std::numeric_limits<double>::infinity();
  e.tolerance = 1.0;
  e.verdict = e.residual < 1.0 ? Verdict::Pass : Verdict::Fail;
  e.context = {"negative_control", {}, 0.0, seed, n};
  e.term_magnitude = corrupted;
  e.details["corrupted_residual"] = corrupted;
  e.details["threshold"] = threshold;
  e.note = "residual = 10 x tolerance / corrupted residual; corruption: " + how;
  return e;
}

}  // namespace

IdentityReport negative_controls(int n, std::uint64_t seed, double tol) {
  if (n < 2) throw Error(ErrorCode::DimensionTooSmall, "negative controls need n >= 2");
  IdentityReport rep;
  const PointData base = space_form_point(n, 1.0);
  for (const IdentityInfo& info : identity_catalog()) {
    if (info.group == "proposition" || info.group == "theorem") continue;
    const Sampled clean = sample_identity(info.id, base, 8, seed);
    double best = 0;
    std::string how = "none detected";
    for (const Corruption& c : corruptions()) {
      PointData p = base;
      Rng rng = Rng(seed).split(c.name);
      c.apply(p, rng);
      const double r = sample_identity(info.id, p, 8, seed).residual;
      if (r > best) {
        best = r;
        how = c.name;
      }
      if (best > 10 * tol) break;
    }
    ReportEntry e = control_entry(info.id, best, tol, how, n, seed);
    e.details["clean_residual"] = clean.residual;
    rep.entries.push_back(std::move(e));
  }
  // Einstein but not of constant holomorphic curvature: pi1 plus a Weyl-type tensor.
  {
    const HermitianSpace s = make_space(n);
    const int d = s.dim();
    const Curv4 T = random_curvature_tensor(d, seed);
    const Bilinear rho = ricci(T);
    const double tau = rho.m.trace();
    Curv4 W = T - lift(s, rho, Lift::Phi) * (1.0 / (d - 2)) +
              lift(s, Bilinear(Matrix::Identity(d, d)), Lift::Phi) * (tau / (2.0 * (d - 1) * (d - 2)));
    const Curv4 R = canonical(s, Canonical::Pi1) + W * 0.1;
    const EinsteinHolomorphic eh = einstein_holomorphic_defects(s, R, 200, seed);
    ReportEntry e =
        control_entry("prop_1_2", co_vanishing_residual(eh, tol), tol, "pi1 plus 0.1 x Weyl-type tensor", n, seed);
    e.details["einstein_defect"] = eh.einstein_defect;
    e.details["holo_spread"] = eh.holo_spread;
    rep.entries.push_back(std::move(e));
  }
  // Two space forms with different nu.
  {
    const HermitianSpace s = make_space(n);
    auto sf = [&](double nu) {
      return SpaceFormSample{s, (canonical(s, Canonical::Pi1) + canonical(s, Canonical::Pi2)) * nu, 0.0, nu, {}};
    };
    const IdentityReport r = theorem1_conclusions({sf(1.0), sf(1.5)}, tol);
    const ReportEntry* c = r.find("thm_1", "constant_nu");
    rep.entries.push_back(control_entry("thm_1", c ? c->residual : 0.0, tol, "space forms with nu = 1 and 1.5", n,
                                        seed));
  }
  return rep;
}

}  // namespace curvlab
