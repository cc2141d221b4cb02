#include "curvlab/hermitian_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "curvlab/errors.hpp"
#include "curvlab/rng.hpp"

namespace curvlab {

namespace {

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double g_dot(const Matrix& g, const Vector& a, const Vector& b) { return a.dot(g * b); }

// Orthonormalizes candidate columns in the g inner product. In J-adapted mode
// each accepted vector e is immediately followed by Je.
Matrix build_frame(const Matrix& g, const Matrix& J, FrameKind kind, double pivot_tol = 1e-8) {
  const int d = static_cast<int>(g.rows());
  Matrix frame(d, d);
  int filled = 0;
  auto orthogonalize = [&](Vector v) {
    for (int pass = 0; pass < 2; ++pass)
      for (int k = 0; k < filled; ++k) v -= g_dot(g, frame.col(k), v) * frame.col(k);
    return v;
  };
  for (int c = 0; c < d && filled < d; ++c) {
    Vector v = orthogonalize(Vector::Unit(d, c));
    const double nrm = std::sqrt(std::max(0.0, g_dot(g, v, v)));
    const double ref = std::sqrt(g(c, c));
    if (nrm < pivot_tol * ref) continue;
    frame.col(filled++) = v / nrm;
    if (kind == FrameKind::JAdapted) {
      Vector jv = orthogonalize(J * frame.col(filled - 1));
      const double jn = std::sqrt(std::max(0.0, g_dot(g, jv, jv)));
      frame.col(filled++) = jv / jn;
    }
  }
  if (filled != d) throw Error(ErrorCode::NonPositiveDefiniteMetric, "frame construction lost rank");
  return frame;
}

}  // namespace

Vector HermitianSpace::to_frame(const Vector& coord) const { return frame.transpose() * (g * coord); }

Matrix standard_complex_structure(int n) {
  Matrix J = Matrix::Zero(2 * n, 2 * n);
  for (int k = 0; k < n; ++k) {
    J(2 * k + 1, 2 * k) = 1.0;
    J(2 * k, 2 * k + 1) = -1.0;
  }
  return J;
}

HermitianSpace make_space(int n, const std::optional<Matrix>& g_in, const std::optional<Matrix>& J_in,
                          FrameKind kind, double tol) {
  if (n < 1) throw Error(ErrorCode::DimensionTooSmall, "complex dimension must be positive");
  const int d = 2 * n;
  HermitianSpace s;
  s.n = n;
  s.g = g_in ? *g_in : Matrix::Identity(d, d);
  s.J = J_in ? *J_in : standard_complex_structure(n);
  if (s.g.rows() != d || s.g.cols() != d || s.J.rows() != d || s.J.cols() != d)
    throw Error(ErrorCode::BadParams, "metric and complex structure must be 2n x 2n");

  const double scale = std::max(1.0, max_abs(s.g));
  if (max_abs(s.g - s.g.transpose()) > tol * scale)
    throw Error(ErrorCode::NonPositiveDefiniteMetric, "metric is not symmetric");
  Eigen::LLT<Matrix> llt(s.g);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::NonPositiveDefiniteMetric, "metric is not positive definite");

  const double jj = max_abs(s.J * s.J + Matrix::Identity(d, d));
  if (jj > tol * std::max(1.0, max_abs(s.J) * max_abs(s.J))) {
    std::ostringstream os;
    os << "J^2 = -I violated, residual " << jj;
    throw Error(ErrorCode::IncompatibleJ, os.str());
  }
  const double compat = max_abs(s.J.transpose() * s.g * s.J - s.g);
  if (compat > tol * scale * std::max(1.0, max_abs(s.J) * max_abs(s.J))) {
    std::ostringstream os;
    os << "g(JX, JY) = g(X, Y) violated, residual " << compat;
    throw Error(ErrorCode::IncompatibleJ, os.str());
  }

  s.frame = build_frame(s.g, s.J, kind);
  s.J_frame = s.frame.transpose() * s.g * s.J * s.frame;
  return s;
}

HermitianSpace rotate_frame(const HermitianSpace& space, const Matrix& rotation) {
  HermitianSpace s = space;
  s.frame = space.frame * rotation;
  s.J_frame = rotation.transpose() * space.J_frame * rotation;
  return s;
}

SpaceDefects space_defects(const HermitianSpace& s) {
  const int d = s.dim();
  return {max_abs(s.J * s.J + Matrix::Identity(d, d)), max_abs(s.J.transpose() * s.g * s.J - s.g),
          max_abs(s.frame.transpose() * s.g * s.frame - Matrix::Identity(d, d))};
}

double Curv4::operator()(const Vector& x, const Vector& y, const Vector& z, const Vector& w) const {
  const int d = dim();
  double acc = 0.0;
  for (int a = 0; a < d; ++a) {
    if (x(a) == 0.0) continue;
    for (int b = 0; b < d; ++b) {
      const double xy = x(a) * y(b);
      if (xy == 0.0) continue;
      for (int c = 0; c < d; ++c) {
        const double xyz = xy * z(c);
        if (xyz == 0.0) continue;
        for (int e = 0; e < d; ++e) acc += xyz * w(e) * (*this)(a, b, c, e);
      }
    }
  }
  return acc;
}

Matrix ConstrainedA::endomorphism(const Vector& v) const {
  const int d = dim();
  Matrix M = Matrix::Zero(d, d);
  for (int k = 0; k < d; ++k) {
    if (v(k) == 0.0) continue;
    for (int x = 0; x < d; ++x)
      for (int y = 0; y < d; ++y) M(y, x) += v(k) * (*this)(k, x, y);
  }
  return M;
}

double ConstrainedA::operator()(const Vector& v, const Vector& x, const Vector& y) const {
  return y.dot(endomorphism(v) * x);
}

TwoPlane make_plane(const Vector& x, const Vector& y, double pivot_tol) {
  const double nx = x.norm();
  if (nx < pivot_tol) throw Error(ErrorCode::DegeneratePlane, "first vector vanishes");
  Vector e1 = x / nx;
  Vector v = y - e1.dot(y) * e1;
  v -= e1.dot(v) * e1;
  const double nv = v.norm();
  if (nv < pivot_tol * std::max(1.0, y.norm())) throw Error(ErrorCode::DegeneratePlane, "vectors are parallel");
  return {e1, v / nv};
}

Curv4 canonical(const HermitianSpace& space, Canonical kind) {
  const int d = space.dim();
  Curv4 out(d);
  const Matrix& J = space.J_frame;
  auto om = [&](int a, int b) { return J(b, a); };  // g(J e_a, e_b)
  auto del = [](int a, int b) { return a == b ? 1.0 : 0.0; };
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c)
        for (int e = 0; e < d; ++e) {
          if (kind == Canonical::Pi1)
            out(a, b, c, e) = del(a, c) * del(b, e) - del(b, c) * del(a, e);
          else
            out(a, b, c, e) = 2.0 * om(a, b) * om(c, e) + om(a, c) * om(b, e) - om(b, c) * om(a, e);
        }
  return out;
}

Curv4 lift(const HermitianSpace& space, const Bilinear& S, Lift kind) {
  const int d = space.dim();
  Curv4 out(d);
  const Matrix& J = space.J_frame;
  const Matrix& s = S.m;
  if (kind == Lift::Phi) {
    auto del = [](int a, int b) { return a == b ? 1.0 : 0.0; };
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        for (int c = 0; c < d; ++c)
          for (int e = 0; e < d; ++e)
            out(a, b, c, e) = del(a, c) * s(b, e) + del(b, e) * s(a, c) - del(a, e) * s(b, c) - del(b, c) * s(a, e);
    return out;
  }
  // theta(a, b) = g(e_a, J e_b); sj(a, b) = S(e_a, J e_b).
  const Matrix& theta = J;
  const Matrix sj = s * J;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c)
        for (int e = 0; e < d; ++e)
          out(a, b, c, e) = 2.0 * theta(a, b) * sj(c, e) + 2.0 * theta(c, e) * sj(a, b) + theta(a, c) * sj(b, e) +
                            theta(b, e) * sj(a, c) - theta(a, e) * sj(b, c) - theta(b, c) * sj(a, e);
  return out;
}

Curv4 l3(const HermitianSpace& space, const Curv4& R) {
  const Matrix& J = space.J_frame;
  return R.pullback([&](int a, int i) { return J(a, i); });
}

Bilinear ricci(const Curv4& R) {
  const int d = R.dim();
  Matrix rho = Matrix::Zero(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int i = 0; i < d; ++i) rho(a, b) += R(i, a, i, b);
  return Bilinear(rho);
}

Bilinear star_ricci(const HermitianSpace& space, const Curv4& R) {
  const int d = R.dim();
  const Matrix& J = space.J_frame;
  // Pull slots 3 and 4 back through J, then trace slots 2 and 4.
  const Curv4 RJ = R.pullback_slot(2, [&](int r, int b) { return J(r, b); })
                       .pullback_slot(3, [&](int s, int i) { return J(s, i); });
  Matrix rs = Matrix::Zero(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int i = 0; i < d; ++i) rs(a, b) += RJ(a, i, b, i);
  return Bilinear(rs);
}

Contractions contractions(const HermitianSpace& space, const Curv4& R) {
  Contractions c{ricci(R), star_ricci(space, R), 0.0, 0.0};
  c.tau = c.rho.m.trace();
  c.tau_star = c.rho_star.m.trace();
  return c;
}

double nu_from_scalars(int n, double tau, double tau_star) {
  if (n < 2) throw Error(ErrorCode::DimensionTooSmall, "nu extraction needs n >= 2");
  return ((2.0 * n + 1.0) * tau - 3.0 * tau_star) / (8.0 * n * (n * n - 1.0));
}

double nu_from_curvature(const HermitianSpace& space, const Curv4& R) {
  const Contractions c = contractions(space, R);
  return nu_from_scalars(space.n, c.tau, c.tau_star);
}

double sectional(const Curv4& R, const TwoPlane& p) { return R(p.x, p.y, p.x, p.y); }

PlaneDefects plane_defects(const HermitianSpace& space, const TwoPlane& p) {
  const double c = std::min(1.0, std::abs(space.omega(p.x, p.y)));
  return {c, 1.0 - c};
}

std::vector<TwoPlane> sample_planes(const HermitianSpace& space, PlaneKind kind, int count, std::uint64_t seed) {
  if (count < 1) throw Error(ErrorCode::BadParams, "count must be >= 1");
  const int d = space.dim();
  if (kind == PlaneKind::Antiholomorphic && d < 4)
    throw Error(ErrorCode::DimensionTooSmall, "antiholomorphic planes need 2n >= 4");
  Rng rng(seed);
  std::vector<TwoPlane> out;
  out.reserve(static_cast<std::size_t>(count));
  constexpr int kRetries = 100;
  for (int k = 0; k < count; ++k) {
    bool ok = false;
    for (int attempt = 0; attempt < kRetries && !ok; ++attempt) {
      Vector x = rng.normal_vector(d);
      const double nx = x.norm();
      if (nx < 1e-8) continue;
      x /= nx;
      const Vector jx = space.apply_J(x);
      if (kind == PlaneKind::Holomorphic) {
        out.push_back({x, jx / jx.norm()});
        ok = true;
        break;
      }
      Vector y = rng.normal_vector(d);
      const double ny = y.norm();
      for (int pass = 0; pass < 2; ++pass) {
        y -= x.dot(y) * x;
        if (kind == PlaneKind::Antiholomorphic) y -= jx.dot(y) * jx;
      }
      const double nrm = y.norm();
      if (nrm < 1e-8 * ny) continue;
      out.push_back({x, y / nrm});
      ok = true;
    }
    if (!ok) throw Error(ErrorCode::DegeneratePlane, "plane sampler exhausted retries");
  }
  return out;
}

PcascEstimate sectional_spread(const Curv4& R, const std::vector<TwoPlane>& samples) {
  if (samples.empty()) return {0.0, 0.0};
  double lo = 0.0, hi = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double k = sectional(R, samples[i]);
    sum += k;
    if (i == 0 || k < lo) lo = k;
    if (i == 0 || k > hi) hi = k;
  }
  return {sum / static_cast<double>(samples.size()), hi - lo};
}

PcascEstimate pcasc_estimate(const HermitianSpace& space, const Curv4& R, const std::vector<TwoPlane>& samples,
                             double tol) {
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (plane_defects(space, samples[i]).antiholomorphic_defect > tol) bad.push_back(i);
  if (!bad.empty()) {
    std::ostringstream os;
    os << "samples not antiholomorphic:";
    for (std::size_t i : bad) os << ' ' << i;
    throw Error(ErrorCode::NotAntiholomorphic, os.str());
  }
  return sectional_spread(R, samples);
}

Curv4 ganchev_reconstruct(const HermitianSpace& space, const Curv4& R, std::optional<double> nu_in) {
  const int n = space.n;
  const Contractions c = contractions(space, R);
  const double nu = nu_in ? *nu_in : nu_from_scalars(n, c.tau, c.tau_star);
  const double np1 = n + 1.0;
  Curv4 out = lift(space, c.rho_star, Lift::Psi) * (1.0 / (2.0 * np1));
  out += canonical(space, Canonical::Pi1) * nu;
  out -= canonical(space, Canonical::Pi2) * ((2.0 * np1 * nu + c.tau_star) / (2.0 * np1 * (2.0 * n + 1.0)));
  return out;
}

Bilinear q_tensor(const HermitianSpace& space, const Curv4& R) {
  const double np1 = space.n + 1.0;
  const Bilinear rho = ricci(R);
  const Bilinear skew = star_ricci(space, R - l3(space, R));
  return Bilinear(rho.m / 6.0 + skew.m / (4.0 * np1));
}

Curv4 reconstruct_from_q(const HermitianSpace& space, const Bilinear& Q, double nu) {
  const int n = space.n;
  Curv4 out = lift(space, Q, Lift::Psi);
  out += canonical(space, Canonical::Pi1) * nu;
  out -= canonical(space, Canonical::Pi2) * ((2.0 * n - 1.0) / 3.0 * nu);
  return out;
}

ScalarIdentities scalar_identities(const HermitianSpace& space, const Curv4& R, double nu) {
  const int n = space.n;
  const int d = space.dim();
  const Contractions c = contractions(space, R);
  const Bilinear lhs16 = star_ricci(space, R + l3(space, R));
  const Matrix rhs16 = (2.0 / 3.0) * (n + 1.0) * c.rho.m -
                       ((n + 1.0) * c.tau - 3.0 * c.tau_star) / (3.0 * n) * Matrix::Identity(d, d);
  const double res17 = std::abs(8.0 * n * (n * n - 1.0) * nu - (2.0 * n + 1.0) * c.tau + 3.0 * c.tau_star);
  const Bilinear Q = q_tensor(space, R);
  const Matrix& J = space.J_frame;
  const double res22 = max_abs(J.transpose() * Q.m * J - Q.m.transpose());
  return {max_abs(lhs16.m - rhs16), res17, res22};
}

double ConstrainedADefects::max() const {
  return std::max({skew, j_anticommute, almost_kahler_1_9, cyclic_1_8, trace_1_10});
}

ConstrainedADefects constrained_a_defects(const HermitianSpace& space, const ConstrainedA& A) {
  const int d = space.dim();
  const Matrix& J = space.J_frame;
  ConstrainedADefects out{0, 0, 0, 0, 0};
  auto upd = [](double& m, double v) { m = std::max(m, std::abs(v)); };
  const Tensor<3> AJx = A.pullback_slot(1, [&](int p, int x) { return J(p, x); });
  const Tensor<3> AJy = A.pullback_slot(2, [&](int q, int y) { return J(q, y); });
  const Tensor<3> AJvx =
      A.pullback_slot(0, [&](int p, int v) { return J(p, v); }).pullback_slot(1, [&](int q, int x) { return J(q, x); });
  for (int v = 0; v < d; ++v)
    for (int x = 0; x < d; ++x)
      for (int y = 0; y < d; ++y) {
        upd(out.skew, A(v, x, y) + A(v, y, x));
        upd(out.j_anticommute, AJx(v, x, y) - AJy(v, x, y));
        upd(out.almost_kahler_1_9, A(v, x, y) + AJvx(v, x, y));
        upd(out.cyclic_1_8, A(v, x, y) + A(x, y, v) + A(y, v, x));
      }
  for (int z = 0; z < d; ++z) {
    double t = 0.0;
    for (int i = 0; i < d; ++i) t += A(i, i, z);
    upd(out.trace_1_10, t);
  }
  return out;
}

Matrix constrained_a_basis(const Matrix& J) {
  const int d = static_cast<int>(J.rows());
  const int N = d * d * d;
  auto col = [d](int v, int x, int y) { return (v * d + x) * d + y; };
  std::vector<Vector> rows;
  auto push = [&](Vector r) {
    if (r.cwiseAbs().maxCoeff() > 0.0) rows.push_back(std::move(r));
  };
  for (int v = 0; v < d; ++v)
    for (int x = 0; x < d; ++x)
      for (int y = 0; y < d; ++y) {
        Vector r = Vector::Zero(N);
        r(col(v, x, y)) += 1.0;
        r(col(v, y, x)) += 1.0;
        push(r);

        // A(V; JX, Y) - A(V; X, JY)
        r.setZero();
        for (int p = 0; p < d; ++p) {
          r(col(v, p, y)) += J(p, x);
          r(col(v, x, p)) -= J(p, y);
        }
        push(r);

        // A(X; Y, Z) + A(JX; JY, Z) with (X, Y, Z) = (e_v, e_x, e_y)
        r.setZero();
        r(col(v, x, y)) += 1.0;
        for (int p = 0; p < d; ++p)
          for (int q = 0; q < d; ++q) r(col(p, q, y)) += J(p, v) * J(q, x);
        push(r);

        r.setZero();
        r(col(v, x, y)) += 1.0;
        r(col(x, y, v)) += 1.0;
        r(col(y, v, x)) += 1.0;
        push(r);
      }
  for (int z = 0; z < d; ++z) {
    Vector r = Vector::Zero(N);
    for (int i = 0; i < d; ++i) r(col(i, i, z)) += 1.0;
    push(r);
  }
  Matrix C(static_cast<Eigen::Index>(rows.size()), N);
  for (std::size_t i = 0; i < rows.size(); ++i) C.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(C.transpose() * C);
  const Vector& ev = es.eigenvalues();
  const double cut = 1e-9 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  int k = 0;
  while (k < N && ev(k) < cut) ++k;
  if (k == 0) throw Error(ErrorCode::EmptyConstraintSpace, "no nonzero array satisfies the almost Kaehler constraints");
  return es.eigenvectors().leftCols(k);
}

namespace {

const Matrix& standard_a_basis(int n) {
  static std::mutex mu;
  static std::map<int, Matrix> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, constrained_a_basis(standard_complex_structure(n))).first;
  return it->second;
}

// Orthogonal O with O^T J O equal to the standard block structure.
Matrix adapted_rotation(const Matrix& J) {
  const int d = static_cast<int>(J.rows());
  return build_frame(Matrix::Identity(d, d), J, FrameKind::JAdapted);
}

}  // namespace

ConstrainedA random_constrained_a(const HermitianSpace& space, std::uint64_t seed) {
  const int d = space.dim();
  if (d < 4) throw Error(ErrorCode::DimensionTooSmall, "constrained nabla J needs 2n >= 4");
  const Matrix& B = standard_a_basis(space.n);
  Rng rng(seed);
  const Vector coeffs = rng.normal_vector(static_cast<int>(B.cols()));
  const Vector flat = B * coeffs;
  ConstrainedA std_a(d);
  std::copy(flat.data(), flat.data() + flat.size(), std_a.data().begin());
  // Components relative to the adapted basis o_i; e_a = sum_i O(a, i) o_i.
  const Matrix O = adapted_rotation(space.J_frame);
  return ConstrainedA(std_a.pullback([&](int i, int a) { return O(a, i); }));
}

Bilinear project_q_constraint(const HermitianSpace& space, const Bilinear& S) {
  const Matrix& J = space.J_frame;
  return Bilinear(0.5 * (S.m + J.transpose() * S.m.transpose() * J));
}

Bilinear random_constrained_q(const HermitianSpace& space, std::uint64_t seed) {
  Rng rng(seed);
  return project_q_constraint(space, Bilinear(rng.normal_matrix(space.dim(), space.dim())));
}

double SymmetryDefect::max() const { return std::max({antisym12, antisym34, pair, bianchi1}); }

SymmetryDefect symmetry_defect(const Curv4& R) {
  const int d = R.dim();
  SymmetryDefect out{0, 0, 0, 0};
  auto upd = [](double& m, double v) { m = std::max(m, std::abs(v)); };
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c)
        for (int e = 0; e < d; ++e) {
          const double r = R(a, b, c, e);
          upd(out.antisym12, r + R(b, a, c, e));
          upd(out.antisym34, r + R(a, b, e, c));
          upd(out.pair, r - R(c, e, a, b));
          upd(out.bianchi1, r + R(b, c, a, e) + R(c, a, b, e));
        }
  return out;
}

Curv4 project_curvature_symmetries(const Tensor<4>& T) {
  Tensor<4> t1 = (T - T.permuted({1, 0, 2, 3}) - T.permuted({0, 1, 3, 2}) + T.permuted({1, 0, 3, 2})) * 0.25;
  Tensor<4> t2 = (t1 + t1.permuted({2, 3, 0, 1})) * 0.5;
  Tensor<4> b = (t2 + t2.permuted({1, 2, 0, 3}) + t2.permuted({2, 0, 1, 3})) * (1.0 / 3.0);
  return Curv4(t2 - b);
}

Curv4 random_curvature_tensor(int dim, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<4> t(dim);
  for (double& v : t.data()) v = rng.normal();
  return project_curvature_symmetries(t);
}

}  // namespace curvlab
