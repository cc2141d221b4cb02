#pragma once

// Brute-force reference implementations used only by the test suites. Every
// routine here evaluates the defining formulas on explicit frame vectors, so it
// shares no code path with the component formulas in the library.

#include <cmath>
#include <cstdint>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>

#include "curvlab/hermitian_algebra.hpp"
#include "curvlab/rng.hpp"

namespace curvlab::oracle {

inline Vector e(int d, int i) { return Vector::Unit(d, i); }

inline double g(const Vector& x, const Vector& y) { return x.dot(y); }

struct Ops {
  const HermitianSpace& s;
  Vector J(const Vector& x) const { return s.J_frame * x; }
  double gJ(const Vector& x, const Vector& y) const { return g(x, J(y)); }  // g(X, JY)
};

inline double pi1(const Vector& X, const Vector& Y, const Vector& Z, const Vector& W) {
  return g(X, Z) * g(Y, W) - g(Y, Z) * g(X, W);
}

inline double pi2(const Ops& o, const Vector& X, const Vector& Y, const Vector& Z, const Vector& W) {
  return 2 * g(o.J(X), Y) * g(o.J(Z), W) + g(o.J(X), Z) * g(o.J(Y), W) - g(o.J(Y), Z) * g(o.J(X), W);
}

inline double S(const Matrix& m, const Vector& x, const Vector& y) { return x.dot(m * y); }

inline double phi(const Matrix& s, const Vector& X, const Vector& Y, const Vector& Z, const Vector& W) {
  return g(X, Z) * S(s, Y, W) + g(Y, W) * S(s, X, Z) - g(X, W) * S(s, Y, Z) - g(Y, Z) * S(s, X, W);
}

inline double psi(const Ops& o, const Matrix& s, const Vector& X, const Vector& Y, const Vector& Z,
                  const Vector& W) {
  return 2 * o.gJ(X, Y) * S(s, Z, o.J(W)) + 2 * o.gJ(Z, W) * S(s, X, o.J(Y)) + o.gJ(X, Z) * S(s, Y, o.J(W)) +
         o.gJ(Y, W) * S(s, X, o.J(Z)) - o.gJ(X, W) * S(s, Y, o.J(Z)) - o.gJ(Y, Z) * S(s, X, o.J(W));
}

template <class F>
Curv4 tabulate(int d, F&& f) {
  Curv4 out(d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c)
        for (int w = 0; w < d; ++w) out(a, b, c, w) = f(e(d, a), e(d, b), e(d, c), e(d, w));
  return out;
}

inline Curv4 pi1_tensor(const HermitianSpace& s) { return tabulate(s.dim(), pi1); }

inline Curv4 pi2_tensor(const HermitianSpace& s) {
  Ops o{s};
  return tabulate(s.dim(), [&](const auto&... v) { return pi2(o, v...); });
}

inline Curv4 phi_tensor(const HermitianSpace& s, const Matrix& m) {
  return tabulate(s.dim(), [&](const auto&... v) { return phi(m, v...); });
}

inline Curv4 psi_tensor(const HermitianSpace& s, const Matrix& m) {
  Ops o{s};
  return tabulate(s.dim(), [&](const auto&... v) { return psi(o, m, v...); });
}

// Quadruple-loop evaluation of a rank-4 tensor on arbitrary vectors.
inline double eval4(const Curv4& R, const Vector& X, const Vector& Y, const Vector& Z, const Vector& W) {
  double acc = 0;
  const int d = R.dim();
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c)
        for (int w = 0; w < d; ++w) acc += R(a, b, c, w) * X(a) * Y(b) * Z(c) * W(w);
  return acc;
}

inline Curv4 l3_tensor(const HermitianSpace& s, const Curv4& R) {
  Ops o{s};
  return tabulate(s.dim(), [&](const Vector& X, const Vector& Y, const Vector& Z, const Vector& W) {
    return eval4(R, o.J(X), o.J(Y), o.J(Z), o.J(W));
  });
}

inline Matrix ricci(const HermitianSpace& s, const Curv4& R) {
  const int d = s.dim();
  Matrix m = Matrix::Zero(d, d);
  for (int x = 0; x < d; ++x)
    for (int y = 0; y < d; ++y)
      for (int i = 0; i < d; ++i) m(x, y) += eval4(R, e(d, i), e(d, x), e(d, i), e(d, y));
  return m;
}

inline Matrix star_ricci(const HermitianSpace& s, const Curv4& R) {
  Ops o{s};
  const int d = s.dim();
  Matrix m = Matrix::Zero(d, d);
  for (int x = 0; x < d; ++x)
    for (int y = 0; y < d; ++y)
      for (int i = 0; i < d; ++i) m(x, y) += eval4(R, e(d, x), e(d, i), o.J(e(d, y)), o.J(e(d, i)));
  return m;
}

/// Random SPD metric with a compatible complex structure, built from an
/// explicit g-orthonormal basis B: J = B J0 B^{-1}.
struct RandomHermitian {
  Matrix g;
  Matrix J;
};

inline RandomHermitian random_hermitian(int n, std::uint64_t seed) {
  Rng rng(seed);
  const int d = 2 * n;
  const Matrix M = rng.normal_matrix(d, d);
  Matrix g = M.transpose() * M + 0.5 * Matrix::Identity(d, d);
  g = 0.5 * (g + g.transpose());
  const Eigen::LLT<Matrix> llt(g);
  const Matrix L = llt.matrixL();
  const Matrix O = Eigen::HouseholderQR<Matrix>(rng.normal_matrix(d, d)).householderQ();
  const Matrix B = L.transpose().inverse() * O;
  const Matrix J = B * standard_complex_structure(n) * B.inverse();
  return {g, J};
}

inline Matrix random_rotation(int d, std::uint64_t seed) {
  Rng rng(seed);
  return Eigen::HouseholderQR<Matrix>(rng.normal_matrix(d, d)).householderQ();
}

inline double max_abs_diff(const Tensor<4>& a, const Tensor<4>& b) { return (a - b).max_abs(); }

}  // namespace curvlab::oracle
