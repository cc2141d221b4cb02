// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "curvlab/chart_geometry.hpp"
#include "curvlab/identity_suite.hpp"
#include "curvlab/rng.hpp"
#include "curvlab/run_config.hpp"
#include "oracles.hpp"

using namespace curvlab;

namespace {

/// Collects failed sub-checks; the first few are printed.
struct Probe {
  std::vector<std::string> failures;
  std::ostringstream summary;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void le(double v, double bound, const std::string& what) {
    if (!(v <= bound)) {
      std::ostringstream os;
      os << what << " = " << v << " > " << bound;
      failures.push_back(os.str());
    }
  }
  void ge(double v, double bound, const std::string& what) {
    if (!(v >= bound)) {
      std::ostringstream os;
      os << what << " = " << v << " < " << bound;
      failures.push_back(os.str());
    }
  }
};

Curv4 space_form(const HermitianSpace& s, double nu) {
  return (canonical(s, Canonical::Pi1) + canonical(s, Canonical::Pi2)) * nu;
}

std::string tag(int n, double nu = std::nan("")) {
  std::ostringstream os;
  os << "n=" << n;
  if (!std::isnan(nu)) os << " nu=" << nu;
  return os.str();
}

void criterion1(Probe& p) {
  double worst = 0;
  for (int n : {2, 3, 4})
    for (double nu : {-1.0, 0.0, 1.0, 2.0}) {
      const HermitianSpace s = make_space(n);
      const Curv4 R = space_form(s, nu);
      const std::string t = tag(n, nu);
      const PcascEstimate e = pcasc_estimate(s, R, sample_planes(s, PlaneKind::Antiholomorphic, 200, 1));
      p.le(e.spread, 1e-12, "pcasc spread " + t);
      for (const TwoPlane& pl : sample_planes(s, PlaneKind::Holomorphic, 50, 2))
        p.le(std::abs(sectional(R, pl) - 4 * nu), 1e-12, "holomorphic sectional " + t);
      const ScalarIdentities si = scalar_identities(s, R, nu);
      p.le(si.res_1_7, 1e-12, "eq 1.7 " + t);
      p.le(si.res_1_6, 1e-12, "eq 1.6 " + t);
      const double rec = (ganchev_reconstruct(s, R) - R).max_abs();
      p.le(rec, 1e-12, "reconstruction " + t);
      const double rt = (reconstruct_from_q(s, q_tensor(s, R), nu) - R).max_abs();
      p.le(rt, 1e-12, "Q round trip " + t);
      worst = std::max({worst, e.spread, si.res_1_7, si.res_1_6, rec, rt});
    }
  p.summary << "worst residual " << worst << " over 12 space forms";
}

void criterion2(Probe& p) {
  double worst_lift = 0, worst_sym = 0;
  for (int n : {2, 3, 4}) {
    const HermitianSpace s = make_space(n);
    const Bilinear g(Matrix::Identity(2 * n, 2 * n));
    const double a = (lift(s, g, Lift::Phi) - canonical(s, Canonical::Pi1) * 2.0).max_abs();
    const double b = (lift(s, g, Lift::Psi) - canonical(s, Canonical::Pi2) * 2.0).max_abs();
    p.le(a, 1e-14, "phi(g) - 2 pi1 " + tag(n));
    p.le(b, 1e-14, "psi(g) - 2 pi2 " + tag(n));
    worst_lift = std::max({worst_lift, a, b});
    const Curv4 R = random_curvature_tensor(2 * n, 3);
    p.expect(l3(s, l3(s, R)) == R, "L3 involution not exact " + tag(n));
    for (int k = 0; k < 20; ++k) {
      const Bilinear Q = random_constrained_q(s, 100 * n + k);
      const double d = symmetry_defect(lift(s, Q, Lift::Psi)).max();
      p.le(d, 1e-12, "psi(Q) symmetry " + tag(n));
      worst_sym = std::max(worst_sym, d);
    }
  }
  p.summary << "lift residual " << worst_lift << ", psi(Q) symmetry defect " << worst_sym << " (60 Q)";
}

void criterion3(Probe& p) {
  namespace orc = oracle;
  double worst = 0;
  auto track = [&](double v, const std::string& what) {
    p.le(v, 1e-12, what);
    worst = std::max(worst, v);
  };
  for (int n : {2, 3, 4})
    for (int k = 0; k < 10; ++k) {
      const auto rh = orc::random_hermitian(n, 1000 * n + k);
      const HermitianSpace s = make_space(n, rh.g, rh.J, FrameKind::GramSchmidt);
      const Curv4 R = random_curvature_tensor(2 * n, 7 * k + n);
      Rng rng(k + 31 * n);
      const Matrix m = rng.normal_matrix(2 * n, 2 * n);
      const std::string t = tag(n);
      const Contractions c = contractions(s, R);
      track((ricci(R).m - orc::ricci(s, R)).cwiseAbs().maxCoeff(), "ricci " + t);
      track((c.rho.m - orc::ricci(s, R)).cwiseAbs().maxCoeff(), "contractions.rho " + t);
      track((star_ricci(s, R).m - orc::star_ricci(s, R)).cwiseAbs().maxCoeff(), "star ricci " + t);
      track((c.rho_star.m - orc::star_ricci(s, R)).cwiseAbs().maxCoeff(), "contractions.rho_star " + t);
      track(std::abs(c.tau - orc::ricci(s, R).trace()), "tau " + t);
      track(std::abs(c.tau_star - orc::star_ricci(s, R).trace()), "tau_star " + t);
      track(orc::max_abs_diff(l3(s, R), orc::l3_tensor(s, R)), "L3 " + t);
      track(orc::max_abs_diff(lift(s, Bilinear(m), Lift::Phi), orc::phi_tensor(s, m)), "phi " + t);
      track(orc::max_abs_diff(lift(s, Bilinear(m), Lift::Psi), orc::psi_tensor(s, m)), "psi " + t);
      track(orc::max_abs_diff(canonical(s, Canonical::Pi1), orc::pi1_tensor(s)), "pi1 " + t);
      track(orc::max_abs_diff(canonical(s, Canonical::Pi2), orc::pi2_tensor(s)), "pi2 " + t);
    }
  p.summary << "max deviation from brute-force loops " << worst << " (11 operations x 30 inputs)";
}

std::vector<Vector> fs_points(const Chart& c, int random, std::uint64_t seed) {
  std::vector<Vector> pts{Vector::Zero(c.dim())};
  Rng rng(seed);
  for (int k = 0; k < random; ++k) {
    Vector x(c.dim());
    for (int i = 0; i < c.dim(); ++i) x(i) = rng.uniform(-0.5, 0.5);
    pts.push_back(x);
  }
  return pts;
}

void criterion4(Probe& p) {
  double worst_err = 0, worst_ratio = 1e300, worst_bianchi = 0, worst_dj = 0, worst_tau = 0;
  for (int n : {2, 4}) {
    const Chart c = builtin_chart("fubini_study", n, {{"c", 4.0}});
    for (const Vector& x : fs_points(c, 3, 40 + n)) {
      const JetPoint j = jet(c, x, {.h = 1e-3});
      JetOptions half;
      half.h = 5e-4;
      half.curvature_derivatives = false;
      const JetPoint j2 = jet(c, x, half);
      const double e1 = (j.R - space_form(j.space, 1.0)).max_abs();
      const double e2 = (j2.R - space_form(j2.space, 1.0)).max_abs();
      const std::string t = tag(n);
      p.le(e1, 1e-4, "curvature error " + t);
      p.ge(e1 / e2, 8.0, "convergence ratio " + t);
      const double b = second_bianchi_residual(j), dj = nabla_j_norm(j), dt = std::abs(j.tau - 4.0 * n * (n + 1));
      p.le(b, 1e-4, "second Bianchi " + t);
      p.le(dj, 1e-5, "nabla J " + t);
      p.le(dt, 1e-3, "tau " + t);
      worst_err = std::max(worst_err, e1);
      worst_ratio = std::min(worst_ratio, e1 / e2);
      worst_bianchi = std::max(worst_bianchi, b);
      worst_dj = std::max(worst_dj, dj);
      worst_tau = std::max(worst_tau, dt);
    }
  }
  p.summary << "curvature error " << worst_err << ", min halving ratio " << worst_ratio << ", Bianchi "
            << worst_bianchi << ", nabla J " << worst_dj << ", |tau - 4n(n+1)| " << worst_tau;
}

void criterion5(Probe& p) {
  const Chart c = builtin_chart("kodaira_thurston");
  const JetPoint j = jet(c, c.center());
  const AlmostKahlerResiduals r = almost_kahler_residuals(j);
  p.le(r.r_1_8, 1e-8, "r_1_8");
  p.le(r.r_1_9, 1e-8, "r_1_9");
  p.le(r.r_1_10, 1e-8, "r_1_10");
  const double dj = nabla_j_norm(j);
  p.ge(dj, 0.1, "nabla J");
  const double spread = pcasc_estimate(j.space, j.R, sample_planes(j.space, PlaneKind::Antiholomorphic, 200, 1)).spread;
  p.ge(spread, 1e-3, "pcasc spread");
  bool rejected = false;
  try {
    lemma_residuals(j, j.nu);
  } catch (const Error& e) {
    rejected = e.code() == ErrorCode::HypothesisViolated;
  }
  p.expect(rejected, "lemma run not rejected with HypothesisViolated");
  p.summary << "r_1_8 " << r.r_1_8 << ", r_1_9 " << r.r_1_9 << ", r_1_10 " << r.r_1_10 << ", |nabla J| " << dj
            << ", pcasc spread " << spread << ", lemma run rejected";
}

void criterion6(Probe& p) {
  const Chart c = builtin_chart("fubini_study", 4, {{"c", 4.0}});
  SuiteOptions o;
  o.chart_label = c.name;
  IdentityReport rep;
  std::vector<JetPoint> jets;
  for (const Vector& x : fs_points(c, 1, 77)) {
    jets.push_back(jet(c, x));
    const JetPoint& j = jets.back();
    rep.merge(preliminary_residuals(j, j.nu, o));
    rep.merge(lemma_residuals(j, j.nu, o));
    rep.merge(section3_residuals(j, j.nu, o));
  }
  rep.merge(einstein_vs_holomorphic(jets, o));
  Rng rng(5);
  std::vector<Vector> five{Vector::Zero(8)};
  for (int k = 0; k < 4; ++k) {
    Vector x(8);
    for (int i = 0; i < 8; ++i) x(i) = rng.uniform(-0.5, 0.5);
    five.push_back(x);
  }
  const IdentityReport thm = theorem1_instance_check(c, five, 1e-3, o);
  rep.merge(thm);
  std::set<std::string> ids;
  std::size_t degenerate = 0;
  double max_residual = 0;
  for (const ReportEntry& e : rep.entries) {
    ids.insert(e.identity_id);
    if (e.verdict != Verdict::Exploratory)
      p.expect(e.verdict == Verdict::Pass, e.identity_id + " " + e.check + " failed");
    if (e.note.find("Kaehler-degenerate") != std::string::npos) ++degenerate;
    max_residual = std::max(max_residual, e.residual);
  }
  p.expect(ids.size() == identity_catalog().size(), "not every identity evaluated");
  p.expect(degenerate > 0, "no term magnitudes flagged as degenerate");
  const ReportEntry* nu = thm.find("thm_1", "constant_nu");
  p.expect(nu != nullptr, "no constant_nu entry");
  double lo = 0, hi = 0;
  if (nu) {
    lo = nu->details.at("nu_min");
    hi = nu->details.at("nu_max");
    p.le(std::abs(lo - 1.0), 1e-4, "nu_min - 1");
    p.le(std::abs(hi - 1.0), 1e-4, "nu_max - 1");
  }
  p.summary << rep.entries.size() << " entries over " << ids.size() << " ids, max residual " << max_residual << ", "
            << degenerate << " Kaehler-degenerate entries, thm_1 nu in [" << lo << ", " << hi << "]";
}

void criterion7(Probe& p) {
  double t_worst = 0, alg_worst = 0;
  std::set<std::string> findings;
  for (int k = 0; k < 50; ++k) {
    const int n = 2 + k % 3;
    const IdentityReport r = algebra_checks(random_algebra_instance(n, 500 + k));
    for (const char* check : {"T_antisymmetry", "T_J_invariance", "q1_skew"}) {
      const ReportEntry* e = r.find("eq_2_19", check);
      p.expect(e != nullptr, std::string("missing ") + check);
      if (!e) continue;
      p.le(e->residual, 1e-10, std::string(check) + " " + tag(n));
      t_worst = std::max(t_worst, e->residual);
    }
    for (const char* id : {"eq_2_3", "eq_2_4", "eq_2_5", "eq_2_6", "eq_2_7"}) {
      const ReportEntry* e = r.find(id, "identically_zero");
      p.expect(e != nullptr, std::string("missing ") + id);
      if (!e) continue;
      p.le(e->residual, 1e-10, std::string(id) + " " + tag(n));
      alg_worst = std::max(alg_worst, e->residual);
    }
    if (n >= 3) {
      const ReportEntry* adj = r.find("eq_2_14", "S_coefficient_adjudication");
      p.expect(adj != nullptr && adj->verdict == Verdict::Exploratory, "adjudication entry missing");
      if (adj) findings.insert(adj->note);
    }
  }
  p.expect(findings.size() == 1, "adjudication finding differs between instances");
  const std::string finding = findings.empty() ? "" : *findings.begin();
  p.expect(finding.rfind("verified: ", 0) == 0 || finding == "both coefficients rejected",
           "adjudication not definite: " + finding);
  p.summary << "T/q1 residual " << t_worst << ", 2.3-2.7 residual " << alg_worst << " (50 instances); S lead "
            << finding;
}

void criterion8(Probe& p) {
  const IdentityReport nc = negative_controls(4, 3);
  double weakest = 1e300;
  std::set<std::string> ids;
  for (const ReportEntry& e : nc.entries) {
    ids.insert(e.identity_id);
    const double corrupted = e.details.at("corrupted_residual"), threshold = e.details.at("threshold");
    p.expect(corrupted > threshold, e.identity_id + " not detected by any corruption");
    weakest = std::min(weakest, corrupted / threshold);
  }
  p.expect(ids.size() == identity_catalog().size(), "negative controls do not cover the catalog");
  setenv("SOURCE_DATE_EPOCH", "0", 1);
  const RunConfig cfg = RunConfig::from_json(R"({"chart": "fubini_study:2:c=4", "sampler": {"count": 2}, "seed": 9})");
  const std::string a = run_check(cfg).report.to_json(), b = run_check(cfg).report.to_json();
  unsetenv("SOURCE_DATE_EPOCH");
  p.expect(a == b, "reports differ between identical runs");
  p.summary << ids.size() << " evaluators, weakest detection " << weakest << "x the 10x threshold; identical "
            << a.size() << "-byte reports";
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<void(Probe&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "space-form algebraic suite", 1, criterion1},
      {2, "operator identities", 1, criterion2},
      {3, "oracle equivalence", 10, criterion3},
      {4, "chart convergence", 60, criterion4},
      {5, "almost Kaehler non-Kaehler machinery", 10, criterion5},
      {6, "identity suite on Fubini-Study 2n = 8", 300, criterion6},
      {7, "algebra derivation checks", 30, criterion7},
      {8, "negative controls and determinism", 10, criterion8},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    Probe p;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(p);
    } catch (const std::exception& e) {
      p.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) {
      std::ostringstream os;
      os << "took " << secs << " s, budget " << c.budget_s << " s";
      p.failures.push_back(os.str());
    }
    const bool ok = p.failures.empty();
    failed += !ok;
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", ok ? "PASS" : "FAIL", c.id, c.name, p.summary.str().c_str(),
                secs);
    for (std::size_t i = 0; i < p.failures.size() && i < 5; ++i) std::printf("    %s\n", p.failures[i].c_str());
    if (p.failures.size() > 5) std::printf("    ... %zu more\n", p.failures.size() - 5);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
