#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "curvlab/chart.hpp"
#include "curvlab/chart_geometry.hpp"
#include "curvlab/errors.hpp"
#include "curvlab/hermitian_algebra.hpp"
#include "curvlab/tensor.hpp"

namespace curvlab {

inline constexpr int report_schema_version = 1;

enum class Verdict { Pass, Fail, Exploratory };
std::string_view to_string(Verdict v);

struct ReportContext {
  std::string chart;
  std::vector<double> point;
  double h = 0;
  std::uint64_t seed = 0;
  int n = 0;

  auto operator<=>(const ReportContext&) const = default;
};

struct ReportEntry {
  std::string identity_id;
  /// Sub-check label; empty for the identity itself.
  std::string check;
  double residual = 0;
  double tolerance = 0;
  Verdict verdict = Verdict::Pass;
  ReportContext context;
  /// Largest single term seen while assembling the residual.
  double term_magnitude = 0;
  std::string note;
  std::map<std::string, double> details;
};

struct ReportMetadata {
  std::string version;
  std::string timestamp;
  std::string config_hash;
  std::string header;
  std::vector<std::string> skipped;
  std::vector<std::string> hypothesis_violations;
};

struct IdentityReport {
  std::vector<ReportEntry> entries;
  ReportMetadata metadata;

  void merge(const IdentityReport& other);
  /// Canonical order: identity_id, context, check.
  void sort();
  /// No non-exploratory entry failed.
  bool passed() const;
  std::size_t count(Verdict v) const;
  const ReportEntry* find(std::string_view identity_id, std::string_view check = {}) const;

  std::string to_json(int indent = 2) const;
  static IdentityReport from_json(const std::string& text);
};

/// Default report header: states the Kaehler-degenerate limitation.
std::string default_report_header();

struct IdentityInfo {
  std::string id;
  std::string summary;
  std::string group;  // preliminary, lemma, section3, proposition, theorem
  int arity = 0;      // number of vector arguments; 0 for scalar statements
  int min_n = 1;
  int excluded_n = 0;  // 0 = none
  bool needs_almost_kahler = false;
  bool needs_pcasc = false;
  bool exploratory = false;
  std::string note;
};

const std::vector<IdentityInfo>& identity_catalog();
/// Throws ConfigError for unknown ids.
const IdentityInfo& identity_info(std::string_view id);
bool is_known_identity(std::string_view id);
/// Empty when the identity applies at this n, otherwise the reason.
std::string dimension_excludes(const IdentityInfo& info, int n);

/// Slot reading of the unbalanced coefficient group in the nabla Q formula:
/// A applies (2n+3) to the first two Q terms, B only to the first.
enum class Reading { A, B };

struct SuiteOptions {
  std::uint64_t seed = 1;
  int tuples = 24;
  int plane_samples = 200;
  /// Overrides the calibrated chart tolerance for every identity.
  std::optional<double> tolerance;
  std::map<std::string, double> tolerances;
  /// Restricts evaluation; empty means all.
  std::set<std::string> identities;
  Reading reading = Reading::A;
  std::string chart_label;
};

/// Tangent data at one point, in an orthonormal frame.
///   A(v, x, y)      = (nabla_{e_v} omega)(e_x, e_y) = g((nabla_{e_v} J) e_x, e_y)
///   nabla_Q(v, x, y) = (nabla_{e_v} Q)(e_x, e_y)
///   nabla_R(v, ...)  = (nabla_{e_v} R)(...)
/// `refresh` recomputes the contractions cached from R.
struct PointData {
  HermitianSpace space;
  Curv4 R;
  Tensor<5> nabla_R;
  Bilinear Q;
  Tensor<3> nabla_Q;
  ConstrainedA A;
  double nu = 0;
  double tau = 0;
  Vector dnu;
  Vector dtau;

  Bilinear rho;
  Bilinear rho_star_sym;  // rho*(R + L3 R)
  Bilinear P;             // rho*(R - L3 R)
  double tau_star = 0;

  int n() const { return space.n; }
  int dim() const { return space.dim(); }
  void refresh();
};

/// Pointwise data of a p.c.a.s.c. almost Kaehler curvature model, generated
/// without a chart: Q satisfies Q(JX, JY) = Q(Y, X), A every nabla J
/// constraint, nabla_Q the differentiated Q constraint, dtau = 6 tr nabla_Q.
struct AlgebraInstance {
  HermitianSpace space;
  Bilinear Q;
  ConstrainedA A;
  Tensor<3> nabla_Q;
  Vector dnu;
  Vector dtau;
  double nu = 0;
  double tau = 0;
};

struct InstanceOptions {
  bool zero_A = false;
  bool zero_dnu = false;
  bool zero_nabla_Q = false;
  /// Rotate the frame so J_frame is not the standard block form.
  bool rotate = true;
};

AlgebraInstance random_algebra_instance(int n, std::uint64_t seed, const InstanceOptions& options = {});

/// nabla R obtained by differentiating R = psi(Q) + nu pi1 - (2n-1)/3 nu pi2
/// through Q, nu and J (product rule, computed independently of any
/// transcribed expansion).
Tensor<5> formal_nabla_R(const AlgebraInstance& inst);

PointData point_data(const JetPoint& jet, double nu);
PointData point_data(const AlgebraInstance& inst);
/// Kaehler space form R = nu (pi1 + pi2) with vanishing derivatives.
PointData space_form_point(int n, double nu);

/// Signed terms whose sum vanishes when the identity holds.
std::vector<double> identity_terms(std::string_view id, const PointData& p, std::span<const Vector> args,
                                   Reading reading = Reading::A);

struct Sampled {
  double residual = 0;
  double term_magnitude = 0;
};
/// Sup over `tuples` random unit argument tuples.
Sampled sample_identity(std::string_view id, const PointData& p, int tuples, std::uint64_t seed,
                        Reading reading = Reading::A);

/// Chart-level tolerance: max(1e-6, 100 x Bianchi noise floor).
double calibrated_tolerance(const JetPoint& jet);

/// Almost Kaehler residual and p.c.a.s.c. estimate used for hypothesis checks.
struct HypothesisState {
  double almost_kahler = 0;
  double pcasc_spread = 0;
  double pcasc_nu = 0;
};
HypothesisState hypothesis_state(const JetPoint& jet, int plane_samples, std::uint64_t seed);

/// Identities of the preliminary section (eq_1_6 ... eq_1_10).
IdentityReport preliminary_residuals(const JetPoint& jet, double nu, const SuiteOptions& options = {});
/// eq_2_2 ... eq_2_19. Throws HypothesisViolated.
IdentityReport lemma_residuals(const JetPoint& jet, double nu, const SuiteOptions& options = {});
/// eq_3_1 ... eq_3_4. Throws HypothesisViolated.
IdentityReport section3_residuals(const JetPoint& jet, double nu, const SuiteOptions& options = {});

struct EinsteinHolomorphic {
  double einstein_defect = 0;
  double holo_spread = 0;
};
EinsteinHolomorphic einstein_holomorphic_defects(const HermitianSpace& space, const Curv4& R, int samples,
                                                 std::uint64_t seed);
/// Co-vanishing residual: max(e, h) unless both exceed tol, then 0.
double co_vanishing_residual(const EinsteinHolomorphic& eh, double tol);
/// prop_1_2 on chart jets. Throws HypothesisViolated.
IdentityReport einstein_vs_holomorphic(std::span<const JetPoint> jets, const SuiteOptions& options = {});

/// thm_1 at the given points. Throws HypothesisViolated, or
/// ConclusionViolated when a hypothesis-satisfying chart is not a space form.
IdentityReport theorem1_instance_check(const Chart& chart, const std::vector<Vector>& points, double h,
                                       const SuiteOptions& options = {});

/// Pure-algebra derivation checks on one instance.
IdentityReport algebra_checks(const AlgebraInstance& inst, const SuiteOptions& options = {});

/// T(V, X, Y) = Q(V, (nabla_X J)Y - (nabla_Y J)X) and its W1 part q1(T).
double t_tensor(const PointData& p, const Vector& v, const Vector& x, const Vector& y);
double q1_tensor(const PointData& p, const Vector& v, const Vector& x, const Vector& y);
/// H built from rho*(R - L3 R) and nabla omega, and the symmetrized H'.
double h_tensor(const PointData& p, const Vector& v, const Vector& x, const Vector& y, const Vector& z,
                const Vector& w);
double h_prime_tensor(const PointData& p, const Vector& v, const Vector& x, const Vector& y, const Vector& z,
                      const Vector& w);

/// S tensor with its leading coefficient as a parameter.
double s_tensor(const PointData& p, double lead, const Vector& w, const Vector& x, const Vector& y);

/// Linear systems of the second Bianchi identity at fixed A: the dimension of
/// the solution space in (Q, nu, nabla Q, dnu) and one random solution.
struct BianchiClosure {
  int unknowns = 0;
  int null_dim = 0;
  double q_weight = 0;  // max |Q| over the normalized solution
  std::optional<AlgebraInstance> instance;
};
BianchiClosure bianchi_closed_instance(int n, std::uint64_t seed);

/// Every tensor identity, and S for both candidate leading coefficients, on a
/// Bianchi-closed instance. Entries are exploratory findings.
IdentityReport bianchi_closure_checks(int n, const SuiteOptions& options = {});

/// Observable conclusion of thm_1 at one point.
struct SpaceFormSample {
  HermitianSpace space;
  Curv4 R;
  double nabla_j = 0;
  double nu = 0;
  std::vector<double> point;
};
/// Entries for the nabla J, space form and constant nu checks.
IdentityReport theorem1_conclusions(const std::vector<SpaceFormSample>& samples, double tol,
                                    const SuiteOptions& options = {});

/// Thrown with the report assembled so far.
class ReportError : public Error {
 public:
  ReportError(ErrorCode code, const std::string& what, IdentityReport report)
      : Error(code, what), report_(std::move(report)) {}
  const IdentityReport& report() const { return report_; }

 private:
  IdentityReport report_;
};

/// Every catalog identity evaluated on documented corruptions of exact
/// inputs; an entry passes when some corruption exceeds 10 x tolerance.
IdentityReport negative_controls(int n, std::uint64_t seed, double tolerance = 1e-6);

}  // namespace curvlab
