#include <gtest/gtest.h>

#include <set>

#include "curvlab/identity_suite.hpp"
#include "curvlab/rng.hpp"
#include "oracles.hpp"

namespace curvlab {
namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no curvlab::Error thrown";
  return ErrorCode::ConfigError;
}

const JetPoint& fs4_origin() {
  static const JetPoint j = jet(builtin_chart("fubini_study", 4, {{"c", 4.0}}), Vector::Zero(8));
  return j;
}

IdentityReport run_chart_groups(const JetPoint& j, SuiteOptions o = {}) {
  IdentityReport r = preliminary_residuals(j, j.nu, o);
  r.merge(lemma_residuals(j, j.nu, o));
  r.merge(section3_residuals(j, j.nu, o));
  return r;
}

TEST(Catalog, CoversEveryIdentity) {
  const std::set<std::string> expected = {
      "eq_1_6",  "eq_1_7",  "eq_1_8",  "eq_1_9",  "eq_1_10", "eq_2_2",  "eq_2_3",  "eq_2_4",  "eq_2_5",  "eq_2_6",
      "eq_2_7",  "eq_2_8",  "eq_2_9",  "eq_2_10", "eq_2_11", "eq_2_12", "eq_2_13", "eq_2_14", "eq_2_15", "eq_2_16",
      "eq_2_17", "eq_2_18", "eq_2_19", "eq_3_1",  "eq_3_2",  "eq_3_3",  "eq_3_4",  "prop_1_2", "thm_1"};
  std::set<std::string> seen;
  for (const IdentityInfo& info : identity_catalog()) EXPECT_TRUE(seen.insert(info.id).second) << info.id;
  EXPECT_EQ(seen, expected);
  // Every tensor identity has exactly one evaluator.
  const PointData p = space_form_point(4, 1.0);
  for (const IdentityInfo& info : identity_catalog()) {
    if (info.group == "proposition" || info.group == "theorem") continue;
    EXPECT_NO_THROW(sample_identity(info.id, p, 1, 1)) << info.id;
  }
  EXPECT_EQ(code_of([] { identity_info("eq_9_9"); }), ErrorCode::ConfigError);
}

TEST(Catalog, DimensionHypotheses) {
  EXPECT_FALSE(dimension_excludes(identity_info("eq_2_13"), 3).empty());
  EXPECT_TRUE(dimension_excludes(identity_info("eq_2_13"), 4).empty());
  EXPECT_FALSE(dimension_excludes(identity_info("eq_2_14"), 2).empty());
  EXPECT_TRUE(dimension_excludes(identity_info("eq_2_14"), 3).empty());
  EXPECT_FALSE(dimension_excludes(identity_info("eq_2_19"), 3).empty());
  EXPECT_TRUE(dimension_excludes(identity_info("eq_2_19"), 4).empty());
}

TEST(SpaceFormPoint, EveryIdentityVanishesExactly) {
  for (int n : {2, 3, 4})
    for (double nu : {-1.0, 0.0, 1.0, 2.0}) {
      const PointData p = space_form_point(n, nu);
      for (const IdentityInfo& info : identity_catalog()) {
        if (info.group == "proposition" || info.group == "theorem" || n < info.min_n) continue;
        EXPECT_LE(sample_identity(info.id, p, 8, 3).residual, 1e-12) << info.id << " n=" << n << " nu=" << nu;
      }
    }
}

TEST(ChartSuite, FubiniStudyN4PassesWithDegenerateTerms) {
  SuiteOptions o;
  o.chart_label = "fubini_study";
  const IdentityReport r = run_chart_groups(fs4_origin(), o);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.entries.size(), 27u);
  EXPECT_TRUE(r.metadata.skipped.empty());
  for (const ReportEntry& e : r.entries) {
    EXPECT_EQ(e.verdict, Verdict::Pass) << e.identity_id;
    EXPECT_LE(e.residual, 1e-4) << e.identity_id;
    EXPECT_EQ(e.context.n, 4);
    EXPECT_EQ(e.context.chart, "fubini_study");
  }
  // Terms built from nabla J, nabla Q and dnu vanish individually.
  for (const char* id : {"eq_2_3", "eq_2_5", "eq_2_6", "eq_2_7", "eq_2_13", "eq_2_19", "eq_3_3", "eq_3_4"}) {
    const ReportEntry* e = r.find(id);
    ASSERT_NE(e, nullptr) << id;
    EXPECT_LE(e->term_magnitude, 1e-4) << id;
    EXPECT_NE(e->note.find("Kaehler-degenerate"), std::string::npos) << id;
  }
  // Curvature-only identities have sizeable terms.
  EXPECT_GT(r.find("eq_2_8")->term_magnitude, 0.1);
}

TEST(ChartSuite, FubiniStudyN2SkipsByDimension) {
  const JetPoint j = jet(builtin_chart("fubini_study", 2, {{"c", 4.0}}), Vector::Constant(4, 0.1));
  const IdentityReport r = run_chart_groups(j);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.find("eq_2_14"), nullptr);
  ASSERT_NE(r.find("eq_2_13"), nullptr);
  EXPECT_EQ(r.metadata.skipped.size(), 9u);
}

TEST(ChartSuite, FlatIsExactlyZero) {
  const JetPoint j = jet(builtin_chart("flat", 4), Vector::Zero(8));
  for (const ReportEntry& e : run_chart_groups(j).entries) EXPECT_EQ(e.residual, 0.0) << e.identity_id;
}

TEST(ChartSuite, KodairaThurstonViolatesHypotheses) {
  const Chart kt = builtin_chart("kodaira_thurston");
  const JetPoint j = jet(kt, kt.center());
  EXPECT_EQ(code_of([&] { lemma_residuals(j, j.nu); }), ErrorCode::HypothesisViolated);
  EXPECT_EQ(code_of([&] { section3_residuals(j, j.nu); }), ErrorCode::HypothesisViolated);
  // The almost Kaehler identities only need dw = 0.
  SuiteOptions o;
  o.identities = {"eq_1_8", "eq_1_9", "eq_1_10"};
  const IdentityReport r = preliminary_residuals(j, j.nu, o);
  EXPECT_EQ(r.entries.size(), 3u);
  EXPECT_TRUE(r.passed());
  try {
    lemma_residuals(j, j.nu);
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("pcasc"), std::string::npos);
  }
}

TEST(ChartSuite, ReadingBIsExploratory) {
  SuiteOptions o;
  o.identities = {"eq_2_10"};
  o.reading = Reading::B;
  const IdentityReport r = lemma_residuals(fs4_origin(), fs4_origin().nu, o);
  ASSERT_EQ(r.entries.size(), 1u);
  EXPECT_EQ(r.entries[0].verdict, Verdict::Exploratory);
}

TEST(ChartSuite, ToleranceIsCalibrated) {
  const double t = calibrated_tolerance(fs4_origin());
  EXPECT_GE(t, 1e-6);
  EXPECT_DOUBLE_EQ(t, std::max(1e-6, 100 * bianchi_noise_floor(fs4_origin())));
  SuiteOptions o;
  o.tolerances["eq_2_8"] = 1e-30;
  const IdentityReport r = lemma_residuals(fs4_origin(), fs4_origin().nu, o);
  EXPECT_EQ(r.find("eq_2_8")->tolerance, 1e-30);
  EXPECT_EQ(r.find("eq_2_8")->verdict, Verdict::Fail);
}

TEST(PropOneTwo, FubiniStudyAndFlat) {
  const JetPoint fs = jet(builtin_chart("fubini_study", 2, {{"c", 4.0}}), Vector::Constant(4, 0.2),
                          {.curvature_derivatives = false});
  const JetPoint flat = jet(builtin_chart("flat", 2), Vector::Zero(4), {.curvature_derivatives = false});
  const std::vector<JetPoint> jets{fs, flat};
  const IdentityReport r = einstein_vs_holomorphic(jets);
  ASSERT_EQ(r.entries.size(), 2u);
  EXPECT_TRUE(r.passed());
  EXPECT_LE(r.entries[0].details.at("einstein_defect"), 1e-5);
  EXPECT_LE(r.entries[0].details.at("holo_spread"), 1e-5);
  EXPECT_EQ(r.entries[1].details.at("einstein_defect"), 0.0);
  EXPECT_EQ(r.entries[1].details.at("holo_spread"), 0.0);
}

TEST(PropOneTwo, PerturbationCoFails) {
  for (int n : {2, 3}) {
    const HermitianSpace s = make_space(n);
    // Traceless J-invariant symmetric D.
    Rng rng(11);
    Matrix m = rng.normal_matrix(2 * n, 2 * n);
    m = 0.5 * (m + m.transpose());
    m = 0.5 * (m + s.J_frame.transpose() * m * s.J_frame);
    m -= m.trace() / (2 * n) * Matrix::Identity(2 * n, 2 * n);
    const Curv4 R = canonical(s, Canonical::Pi1) + canonical(s, Canonical::Pi2) + lift(s, Bilinear(m), Lift::Psi) * 0.2;
    const double pcasc = pcasc_estimate(s, R, sample_planes(s, PlaneKind::Antiholomorphic, 200, 2)).spread;
    EXPECT_LE(pcasc, 1e-12);
    const EinsteinHolomorphic eh = einstein_holomorphic_defects(s, R, 200, 2);
    EXPECT_GT(eh.einstein_defect, 1e-3);
    EXPECT_GT(eh.holo_spread, 1e-3);
    EXPECT_EQ(co_vanishing_residual(eh, 1e-6), 0.0);
    EXPECT_GT(co_vanishing_residual({0.0, eh.holo_spread}, 1e-6), 1e-3);
  }
}

TEST(PropOneTwo, RejectsNonPcasc) {
  const Chart kt = builtin_chart("kodaira_thurston");
  const std::vector<JetPoint> jets{jet(kt, kt.center(), {.curvature_derivatives = false})};
  EXPECT_EQ(code_of([&] { einstein_vs_holomorphic(jets); }), ErrorCode::HypothesisViolated);
}

std::vector<Vector> five_points(int d) {
  std::vector<Vector> pts{Vector::Zero(d)};
  Rng rng(5);
  for (int i = 0; i < 4; ++i) {
    Vector x(d);
    for (int k = 0; k < d; ++k) x(k) = rng.uniform(-0.3, 0.3);
    pts.push_back(x);
  }
  return pts;
}

TEST(TheoremOne, FubiniStudySharedNu) {
  const Chart c = builtin_chart("fubini_study", 4, {{"c", 4.0}});
  const IdentityReport r = theorem1_instance_check(c, five_points(8), 1e-3);
  EXPECT_TRUE(r.passed());
  const ReportEntry* nu = r.find("thm_1", "constant_nu");
  ASSERT_NE(nu, nullptr);
  EXPECT_NEAR(nu->details.at("nu_min"), 1.0, 1e-4);
  EXPECT_NEAR(nu->details.at("nu_max"), 1.0, 1e-4);
  EXPECT_EQ(r.entries.size(), 11u);
}

TEST(TheoremOne, FlatHasZeroNu) {
  const IdentityReport r = theorem1_instance_check(builtin_chart("flat", 4), five_points(8), 1e-3);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.find("thm_1", "constant_nu")->details.at("nu_max"), 0.0);
}

TEST(TheoremOne, HypothesisFailures) {
  const Chart prod = product_chart(builtin_chart("kodaira_thurston"), builtin_chart("flat", 2));
  ASSERT_EQ(prod.dim(), 8);
  EXPECT_EQ(code_of([&] { theorem1_instance_check(prod, {prod.center()}, 1e-3); }), ErrorCode::HypothesisViolated);
  const Chart small = builtin_chart("fubini_study", 3, {{"c", 4.0}});
  EXPECT_EQ(code_of([&] { theorem1_instance_check(small, {small.center()}, 1e-3); }),
            ErrorCode::HypothesisViolated);
}

TEST(TheoremOne, ConclusionsDetectNonConstantNu) {
  const HermitianSpace s = make_space(4);
  const Curv4 model = canonical(s, Canonical::Pi1) + canonical(s, Canonical::Pi2);
  const IdentityReport ok = theorem1_conclusions({{s, model, 0, 1.0, {}}, {s, model, 0, 1.0, {}}}, 1e-6);
  EXPECT_TRUE(ok.passed());
  const IdentityReport bad = theorem1_conclusions({{s, model, 0, 1.0, {}}, {s, model * 2.0, 0, 2.0, {}}}, 1e-6);
  EXPECT_FALSE(bad.passed());
  EXPECT_EQ(bad.find("thm_1", "constant_nu")->verdict, Verdict::Fail);
  EXPECT_EQ(bad.find("thm_1", "space_form")->verdict, Verdict::Pass);
}

TEST(AlgebraInstance, ConstraintsHold) {
  for (int n : {2, 3, 4}) {
    const AlgebraInstance inst = random_algebra_instance(n, 100 + n);
    EXPECT_LE(constrained_a_defects(inst.space, inst.A).max(), 1e-12);
    const Matrix& J = inst.space.J_frame;
    EXPECT_LE((J.transpose() * inst.Q.m * J - inst.Q.m.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GT(inst.A.max_abs(), 0.01);
    // dtau = 6 tr nabla_Q.
    const int d = 2 * n;
    for (int v = 0; v < d; ++v) {
      double tr = 0;
      for (int i = 0; i < d; ++i) tr += inst.nabla_Q(v, i, i);
      EXPECT_NEAR(inst.dtau(v), 6 * tr, 1e-12);
    }
  }
}

TEST(AlgebraInstance, BruteForceTSymmetries) {
  // T(V, X, Y) = Q(V, (nabla_X J)Y - (nabla_Y J)X) assembled directly from the A array.
  for (int n : {2, 3, 4}) {
    const AlgebraInstance inst = random_algebra_instance(n, 40 + n);
    const PointData p = point_data(inst);
    const int d = 2 * n;
    Rng rng(9);
    for (int k = 0; k < 20; ++k) {
      const Vector V = rng.normal_vector(d), X = rng.normal_vector(d), Y = rng.normal_vector(d);
      auto dJ = [&](const Vector& u, const Vector& w) {
        Vector out = Vector::Zero(d);
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < d; ++b)
            for (int c = 0; c < d; ++c) out(c) += u(a) * w(b) * inst.A(a, b, c);
        return out;
      };
      const double T = oracle::S(inst.Q.m, V, dJ(X, Y) - dJ(Y, X));
      EXPECT_NEAR(t_tensor(p, V, X, Y), T, 1e-10);
    }
  }
}

TEST(AlgebraChecks, HardEntriesPassAndFindingsAreDefinite) {
  for (int n : {2, 3, 4}) {
    const IdentityReport r = algebra_checks(random_algebra_instance(n, 7));
    EXPECT_TRUE(r.passed()) << n;
    for (const char* check : {"T_antisymmetry", "T_J_invariance", "q1_skew"})
      EXPECT_LE(r.find("eq_2_19", check)->residual, 1e-10) << check;
    for (const char* id : {"eq_2_3", "eq_2_4", "eq_2_5", "eq_2_6", "eq_2_7"})
      EXPECT_LE(r.find(id, "identically_zero")->residual, 1e-10) << id;
    EXPECT_EQ(r.find("eq_3_2", "H_prime_definition")->verdict, Verdict::Pass);
    EXPECT_EQ(r.find("eq_2_9", "formal_derivative")->verdict, Verdict::Pass);
    if (n < 3) {
      EXPECT_EQ(r.find("eq_2_14", "S_coefficient_adjudication"), nullptr);
      continue;
    }
    const ReportEntry* adj = r.find("eq_2_14", "S_coefficient_adjudication");
    ASSERT_NE(adj, nullptr);
    EXPECT_EQ(adj->verdict, Verdict::Exploratory);
    EXPECT_EQ(adj->details.at("verified_lead"), 4.0 * (2 * n * n - 3));
    EXPECT_EQ(adj->note, "verified: 4(2n^2-3); rejected: 4(2n-3)");
    EXPECT_EQ(r.find("eq_2_18", "span_of_2_15_2_16_2_17")->details.at("holds"), 1.0);
    EXPECT_EQ(r.find("eq_3_4", "H_prime_span_stated")->details.at("holds"), 0.0);
    EXPECT_EQ(r.find("eq_3_4", "H_prime_span_J_variants")->details.at("holds"), 1.0);
  }
}

TEST(AlgebraChecks, ZeroDerivativeInstanceIsTrivial) {
  InstanceOptions io;
  io.zero_A = io.zero_dnu = io.zero_nabla_Q = true;
  const PointData p = point_data(random_algebra_instance(4, 3, io));
  for (const char* id : {"eq_2_14", "eq_2_15", "eq_2_16", "eq_2_17", "eq_2_18"})
    EXPECT_LE(sample_identity(id, p, 16, 1).residual, 1e-12) << id;
  Rng rng(1);
  for (int k = 0; k < 10; ++k) {
    const Vector w = rng.normal_vector(8), x = rng.normal_vector(8), y = rng.normal_vector(8);
    EXPECT_LE(std::abs(s_tensor(p, 4.0 * 29, w, x, y)), 1e-12);
  }
}

TEST(AlgebraChecks, FormalDerivativeSatisfiesBianchiOnlyWhenClosed) {
  const AlgebraInstance generic = random_algebra_instance(3, 8);
  EXPECT_GT(sample_identity("eq_3_1", point_data(generic), 16, 1).residual, 1e-3);
  const BianchiClosure bc = bianchi_closed_instance(3, 1);
  ASSERT_TRUE(bc.instance.has_value());
  EXPECT_LE(sample_identity("eq_3_1", point_data(*bc.instance), 16, 1).residual, 1e-10);
}

TEST(BianchiClosure, Findings) {
  SuiteOptions o;
  {
    const IdentityReport r = bianchi_closure_checks(2, o);
    EXPECT_EQ(r.find("eq_2_10", "bianchi_closed[reading_A]")->details.at("holds"), 1.0);
    EXPECT_EQ(r.find("eq_2_10", "bianchi_closed[reading_B]")->details.at("holds"), 0.0);
    // The n = 2 failure of the dnu formula.
    EXPECT_EQ(r.find("eq_2_13", "bianchi_closed")->details.at("holds"), 0.0);
    EXPECT_EQ(r.find("eq_3_1", "bianchi_closure_system")->details.at("null_dim"), 15.0);
  }
  {
    const IdentityReport r = bianchi_closure_checks(3, o);
    EXPECT_EQ(r.find("eq_2_14", "S_vanishes[lead_4(2n^2-3)]")->details.at("holds"), 1.0);
    EXPECT_EQ(r.find("eq_2_14", "S_vanishes[lead_4(2n-3)]")->details.at("holds"), 0.0);
    const ReportEntry* head = r.find("eq_3_1", "bianchi_closure_system");
    EXPECT_LE(head->details.at("max_P"), 1e-10);
    EXPECT_LE(head->details.at("max_dnu"), 1e-10);
    EXPECT_GT(head->details.at("max_A"), 0.01);
    for (const ReportEntry& e : r.entries) {
      EXPECT_EQ(e.verdict, Verdict::Exploratory);
      if (e.check == "bianchi_closed") EXPECT_EQ(e.details.at("holds"), 1.0) << e.identity_id;
    }
  }
}

TEST(NegativeControls, EveryEvaluatorDetectsCorruption) {
  {
    const IdentityReport r = negative_controls(4, 3);
    std::set<std::string> ids;
    for (const ReportEntry& e : r.entries) {
      ids.insert(e.identity_id);
      EXPECT_EQ(e.verdict, Verdict::Pass) << e.identity_id;
      EXPECT_GT(e.details.at("corrupted_residual"), 10 * 1e-6) << e.identity_id;
      if (e.details.count("clean_residual")) EXPECT_LE(e.details.at("clean_residual"), 1e-12) << e.identity_id;
    }
    EXPECT_EQ(ids.size(), identity_catalog().size());
  }
}

TEST(NegativeControls, SecondSCombinationIsEmptyAtNThree) {
  // Both sides of the second S combination vanish identically when n = 3.
  const IdentityReport r = negative_controls(3, 3);
  EXPECT_EQ(r.find("eq_2_16", "negative_control")->details.at("corrupted_residual"), 0.0);
  EXPECT_EQ(r.count(Verdict::Fail), 1u);
}

TEST(NegativeControls, CorruptedGammaBreaksBianchi) {
  JetOptions jo;
  jo.corrupt_gamma = GammaCorruption{0, 1, 1, 0.01};
  const JetPoint j = jet(builtin_chart("fubini_study", 2, {{"c", 4.0}}), Vector::Zero(4), jo);
  EXPECT_GT(second_bianchi_residual(j), 1e-3);
}

TEST(Report, DeterministicAndSorted) {
  SuiteOptions o;
  o.seed = 42;
  const JetPoint j = jet(builtin_chart("fubini_study", 2, {{"c", 4.0}}), Vector::Constant(4, 0.1));
  IdentityReport a = run_chart_groups(j, o), b = run_chart_groups(j, o);
  a.merge(algebra_checks(random_algebra_instance(3, 42), o));
  b.merge(algebra_checks(random_algebra_instance(3, 42), o));
  a.sort();
  b.sort();
  EXPECT_EQ(a.to_json(), b.to_json());
  for (std::size_t i = 1; i < a.entries.size(); ++i)
    EXPECT_LE(a.entries[i - 1].identity_id, a.entries[i].identity_id);
}

TEST(Report, JsonRoundTrip) {
  IdentityReport r = algebra_checks(random_algebra_instance(3, 5));
  r.metadata = {"0.1.0", "2026-01-01T00:00:00Z", "abc", default_report_header(), {"x"}, {}};
  r.entries[0].residual = std::numeric_limits<double>::infinity();
  r.entries[0].context.point = {0.25, -1.0};
  const std::string text = r.to_json();
  EXPECT_NE(text.find("\"schema_version\": 1"), std::string::npos);
  EXPECT_NE(text.find("\"residual\": null"), std::string::npos);
  const IdentityReport back = IdentityReport::from_json(text);
  EXPECT_EQ(back.to_json(), text);
  EXPECT_TRUE(std::isinf(back.entries[0].residual));
  EXPECT_EQ(code_of([] { IdentityReport::from_json("{"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { IdentityReport::from_json(R"({"schema_version": 9})"); }), ErrorCode::ParseError);
}

TEST(Report, VerdictSemantics) {
  IdentityReport r;
  ReportEntry e;
  e.verdict = Verdict::Exploratory;
  r.entries.push_back(e);
  EXPECT_TRUE(r.passed());
  e.verdict = Verdict::Fail;
  r.entries.push_back(e);
  EXPECT_FALSE(r.passed());
  EXPECT_EQ(r.count(Verdict::Exploratory), 1u);
}

}  // namespace
}  // namespace curvlab
