#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "curvlab/tensor.hpp"

namespace curvlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Single tangent space (R^{2n}, g, J) together with a g-orthonormal frame.
///
/// `g` and `J` are components in the working basis; `frame` holds the frame
/// vectors as columns in that basis. Every tensor produced by this module is
/// expressed in the frame, where the metric is the identity and the complex
/// structure is `J_frame = frame^{-1} J frame` (orthogonal and skew).
/// Vector arguments are frame components as well.
struct HermitianSpace {
  int n = 0;
  Matrix g;
  Matrix J;
  Matrix frame;
  Matrix J_frame;

  int dim() const { return 2 * n; }
  Vector apply_J(const Vector& x) const { return J_frame * x; }
  /// Fundamental 2-form omega(X, Y) = g(JX, Y).
  double omega(const Vector& x, const Vector& y) const { return (J_frame * x).dot(y); }
  /// Frame components of a working-basis vector.
  Vector to_frame(const Vector& coord) const;
};

enum class FrameKind { JAdapted, GramSchmidt };

/// Validates (g, J) and builds the frame. Defaults: Euclidean g and the block
/// structure J e_{2k-1} = e_{2k}. Throws NonPositiveDefiniteMetric / IncompatibleJ.
HermitianSpace make_space(int n, const std::optional<Matrix>& g = std::nullopt,
                          const std::optional<Matrix>& J = std::nullopt,
                          FrameKind kind = FrameKind::JAdapted, double tol = 1e-10);

/// Same (g, J) with the frame replaced by `frame * rotation` (rotation orthogonal).
HermitianSpace rotate_frame(const HermitianSpace& space, const Matrix& rotation);

/// Standard block complex structure on R^{2n}.
Matrix standard_complex_structure(int n);

/// Residuals of the HermitianSpace invariants.
struct SpaceDefects {
  double j_squared;
  double compatibility;
  double frame_orthonormality;
};
SpaceDefects space_defects(const HermitianSpace& space);

/// Rank-4 covariant tensor in the frame; slots are (X, Y, Z, W).
class Curv4 : public Tensor<4> {
 public:
  using Tensor<4>::Tensor;
  Curv4(Tensor<4> t) : Tensor<4>(std::move(t)) {}  // NOLINT(google-explicit-constructor)

  double operator()(const Vector& x, const Vector& y, const Vector& z, const Vector& w) const;
  using Tensor<4>::operator();
};

/// Rank-2 covariant tensor in the frame, not necessarily symmetric.
struct Bilinear {
  Matrix m;

  Bilinear() = default;
  explicit Bilinear(Matrix mat) : m(std::move(mat)) {}
  static Bilinear zero(int dim) { return Bilinear(Matrix::Zero(dim, dim)); }

  int dim() const { return static_cast<int>(m.rows()); }
  double operator()(int i, int j) const { return m(i, j); }
  double operator()(const Vector& x, const Vector& y) const { return x.dot(m * y); }
  Bilinear symmetric_part() const { return Bilinear(0.5 * (m + m.transpose())); }
  Bilinear skew_part() const { return Bilinear(0.5 * (m - m.transpose())); }
  double max_abs() const { return m.cwiseAbs().maxCoeff(); }
};

/// Rank-3 array A[v][x][y] = g((nabla_{e_v} J) e_x, e_y) at a point.
class ConstrainedA : public Tensor<3> {
 public:
  using Tensor<3>::Tensor;
  ConstrainedA(Tensor<3> t) : Tensor<3>(std::move(t)) {}  // NOLINT(google-explicit-constructor)

  /// (nabla_V J) as an endomorphism of the tangent space.
  Matrix endomorphism(const Vector& v) const;
  double operator()(const Vector& v, const Vector& x, const Vector& y) const;
  using Tensor<3>::operator();
};

/// Orthonormal pair spanning a 2-plane.
struct TwoPlane {
  Vector x;
  Vector y;
};

/// Orthonormalizes (x, y); throws DegeneratePlane below the pivot threshold.
TwoPlane make_plane(const Vector& x, const Vector& y, double pivot_tol = 1e-8);

enum class Canonical { Pi1, Pi2 };
enum class Lift { Phi, Psi };
enum class PlaneKind { Antiholomorphic, Holomorphic, Generic };

Curv4 canonical(const HermitianSpace& space, Canonical kind);
Curv4 lift(const HermitianSpace& space, const Bilinear& S, Lift kind);
/// L3 R (X, Y, Z, W) = R(JX, JY, JZ, JW).
Curv4 l3(const HermitianSpace& space, const Curv4& R);

struct Contractions {
  Bilinear rho;
  Bilinear rho_star;
  double tau;
  double tau_star;
};
/// rho(X,Y) = sum_i R(e_i, X, e_i, Y); rho*(X,Y) = sum_i R(X, e_i, JY, J e_i).
Contractions contractions(const HermitianSpace& space, const Curv4& R);
Bilinear ricci(const Curv4& R);
Bilinear star_ricci(const HermitianSpace& space, const Curv4& R);

/// nu from tau and tau*: 8 n (n^2 - 1) nu = (2n + 1) tau - 3 tau*. Requires n >= 2.
double nu_from_scalars(int n, double tau, double tau_star);
double nu_from_curvature(const HermitianSpace& space, const Curv4& R);

double sectional(const Curv4& R, const TwoPlane& plane);

struct PlaneDefects {
  double antiholomorphic_defect;
  double holomorphic_defect;
};
PlaneDefects plane_defects(const HermitianSpace& space, const TwoPlane& plane);

std::vector<TwoPlane> sample_planes(const HermitianSpace& space, PlaneKind kind, int count,
                                    std::uint64_t seed);

struct PcascEstimate {
  double mean_nu;
  double spread;
};
/// Throws NotAntiholomorphic listing offending sample indices.
PcascEstimate pcasc_estimate(const HermitianSpace& space, const Curv4& R,
                             const std::vector<TwoPlane>& samples, double tol = 1e-10);

/// Mean and max-minus-min of sectional curvature over arbitrary planes.
PcascEstimate sectional_spread(const Curv4& R, const std::vector<TwoPlane>& samples);

/// Right-hand side of Ganchev's p.c.a.s.c. characterization. nu defaults to
/// the value extracted from tau and tau*.
Curv4 ganchev_reconstruct(const HermitianSpace& space, const Curv4& R,
                          std::optional<double> nu = std::nullopt);

/// Q = rho(R)/6 + rho*(R - L3 R) / (4(n+1)).
Bilinear q_tensor(const HermitianSpace& space, const Curv4& R);
/// R = psi(Q) + nu pi1 - (2n-1)/3 nu pi2.
Curv4 reconstruct_from_q(const HermitianSpace& space, const Bilinear& Q, double nu);

struct ScalarIdentities {
  double res_1_6;
  double res_1_7;
  double res_2_2;
};
ScalarIdentities scalar_identities(const HermitianSpace& space, const Curv4& R, double nu);

struct ConstrainedADefects {
  double skew;
  double j_anticommute;
  double almost_kahler_1_9;
  double cyclic_1_8;
  double trace_1_10;
  double max() const;
};
ConstrainedADefects constrained_a_defects(const HermitianSpace& space, const ConstrainedA& A);

/// Orthonormal basis (columns, length dim^3) of the linear space of rank-3
/// arrays satisfying every ConstrainedA invariant for the given J_frame.
Matrix constrained_a_basis(const Matrix& J_frame);

ConstrainedA random_constrained_a(const HermitianSpace& space, std::uint64_t seed);

/// Orthogonal projection onto bilinear forms with Q(JX, JY) = Q(Y, X).
Bilinear project_q_constraint(const HermitianSpace& space, const Bilinear& S);
Bilinear random_constrained_q(const HermitianSpace& space, std::uint64_t seed);

struct SymmetryDefect {
  double antisym12;
  double antisym34;
  double pair;
  double bianchi1;
  double max() const;
};
SymmetryDefect symmetry_defect(const Curv4& R);

/// Gaussian tensor projected onto algebraic curvature tensors.
Curv4 random_curvature_tensor(int dim, std::uint64_t seed);
/// Projection onto the algebraic curvature tensors (antisymmetries, pair symmetry, first Bianchi).
Curv4 project_curvature_symmetries(const Tensor<4>& T);

}  // namespace curvlab
