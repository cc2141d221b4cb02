#pragma once

#include <optional>

#include "curvlab/chart.hpp"
#include "curvlab/hermitian_algebra.hpp"
#include "curvlab/tensor.hpp"

namespace curvlab {

enum class Precision { Double, Quad };

/// Adds `delta` to one Christoffel component Gamma^a_{bc} at every lattice
/// point. Only meant for negative controls.
struct GammaCorruption {
  int a = 0, b = 0, c = 0;
  double delta = 0.01;
};

struct JetOptions {
  double h = 1e-3;
  int order = 4;  // 2 or 4
  Precision precision = Precision::Quad;
  /// Skip nabla R, nabla Q and the scalar gradients (they need curvature at
  /// every neighbouring stencil point).
  bool curvature_derivatives = true;
  std::optional<GammaCorruption> corrupt_gamma;
};

/// Stencil reach of the nested differencing, in units of h per axis.
int stencil_reach(int order);

/// Pointwise derivative data of a chart.
///
/// `gamma` is in coordinates. Every other tensor is expressed in the
/// J-adapted orthonormal frame of `space`:
///   nabla_omega(v, x, y) = (nabla_{e_v} omega)(e_x, e_y)
///   nabla_J(v, a, b)     = e_a-component of (nabla_{e_v} J) e_b
///   nabla_R(v, x, y, z, w) = (nabla_{e_v} R)(e_x, e_y, e_z, e_w)
///   nabla_Q(v, x, y)     = (nabla_{e_v} Q)(e_x, e_y)
struct JetPoint {
  Vector point;
  double h = 0;
  int order = 0;
  HermitianSpace space;
  Tensor<3> gamma;
  Curv4 R;
  Tensor<3> nabla_omega;
  Tensor<3> nabla_J;
  Tensor<5> nabla_R;
  Bilinear Q;
  Tensor<3> nabla_Q;
  double tau = 0, tau_star = 0, nu = 0;
  Vector dnu;
  Vector dtau;
  /// max |nabla g| over coordinate components.
  double metric_compatibility = 0;
  bool has_curvature_derivatives = false;
};

/// Throws OutOfDomain (point outside the box), StepTooLarge (inside but
/// closer than stencil_reach * h to the boundary) or BadParams.
JetPoint jet(const Chart& chart, const Vector& point, const JetOptions& options = {});

struct AlmostKahlerResiduals {
  double r_1_8;
  double r_1_9;
  double r_1_10;
};
AlmostKahlerResiduals almost_kahler_residuals(const JetPoint& jet);

/// max |nabla J| over frame components.
double nabla_j_norm(const JetPoint& jet);

/// sup over frame 5-tuples of |sum_cyc (nabla_V R)(X, Y, Z, W)|.
double second_bianchi_residual(const JetPoint& jet);

/// Second Bianchi residual, floored at double roundoff of the frame
/// conversion (64 eps max(1, |R|)), as the scheme-noise scale of a jet.
double bianchi_noise_floor(const JetPoint& jet);

/// max |nabla_omega(v, x, y) - nabla_J(v, y, x)|: the two independently
/// differenced forms of nabla J must agree since the frame is orthonormal.
double omega_j_consistency(const JetPoint& jet);

/// nabla Q assembled from nabla R and nabla J by differentiating the Q
/// formula through its contractions.
Tensor<3> nabla_q_from_curvature(const HermitianSpace& space, const Curv4& R, const Tensor<5>& nabla_R,
                                 const Tensor<3>& nabla_J);

/// Endomorphism (nabla_{e_v} J) in the frame, from nabla_J.
Matrix nabla_j_matrix(const Tensor<3>& nabla_J, int v);

}  // namespace curvlab
