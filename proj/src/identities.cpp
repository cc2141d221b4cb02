#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "curvlab/errors.hpp"
#include "curvlab/identity_suite.hpp"
#include "curvlab/rng.hpp"

namespace curvlab {

namespace {

double contract3(const Tensor<3>& t, const Vector& a, const Vector& b, const Vector& c) {
  const int d = t.dim();
  const double* p = t.data().data();
  double acc = 0;
  for (int i = 0; i < d; ++i) {
    if (a(i) == 0.0) continue;
    double s = 0;
    for (int j = 0; j < d; ++j) {
      const double* row = p + (static_cast<std::size_t>(i) * d + j) * d;
      double r = 0;
      for (int k = 0; k < d; ++k) r += row[k] * c(k);
      s += b(j) * r;
    }
    acc += a(i) * s;
  }
  return acc;
}

double contract5(const Tensor<5>& t, const Vector& v, const Vector& x, const Vector& y, const Vector& z,
                 const Vector& w) {
  const int d = t.dim();
  const double* p = t.data().data();
  double acc = 0;
  std::size_t off = 0;
  for (int a = 0; a < d; ++a) {
    double sa = 0;
    for (int b = 0; b < d; ++b) {
      double sb = 0;
      for (int c = 0; c < d; ++c) {
        double sc = 0;
        for (int e = 0; e < d; ++e) {
          const double* row = p + off;
          off += static_cast<std::size_t>(d);
          double r = 0;
          for (int f = 0; f < d; ++f) r += row[f] * w(f);
          sc += z(e) * r;
        }
        sb += y(c) * sc;
      }
      sa += x(b) * sb;
    }
    acc += v(a) * sa;
  }
  return acc;
}

/// Multilinear building blocks on frame vectors.
struct Ops {
  const PointData& p;
  double N;
  int d;

  explicit Ops(const PointData& pd) : p(pd), N(pd.n()), d(pd.dim()) {}

  Vector e(int i) const { return Vector::Unit(d, i); }
  Vector J(const Vector& x) const { return p.space.J_frame * x; }
  static double g(const Vector& x, const Vector& y) { return x.dot(y); }
  double om(const Vector& x, const Vector& y) const { return J(x).dot(y); }
  double Q(const Vector& x, const Vector& y) const { return p.Q(x, y); }
  Matrix dJm(const Vector& v) const { return p.A.endomorphism(v); }
  Vector dJ(const Vector& v, const Vector& x) const { return dJm(v) * x; }
  double dw(const Vector& v, const Vector& x, const Vector& y) const { return y.dot(dJ(v, x)); }
  double DQ(const Vector& v, const Vector& x, const Vector& y) const { return contract3(p.nabla_Q, v, x, y); }
  double DR(const Vector& v, const Vector& x, const Vector& y, const Vector& z, const Vector& w) const {
    return contract5(p.nabla_R, v, x, y, z, w);
  }
  double R(const Vector& x, const Vector& y, const Vector& z, const Vector& w) const { return p.R(x, y, z, w); }
  double dnu(const Vector& x) const { return p.dnu.dot(x); }
  double dtau(const Vector& x) const { return p.dtau.dot(x); }
  /// sum_i Q(J e_i, (nabla_V J) e_i)
  double sQ(const Vector& v) const { return (p.space.J_frame.transpose() * p.Q.m * dJm(v)).trace(); }
  double P(const Vector& x, const Vector& y) const { return p.P(x, y); }
  static double pi1(const Vector& x, const Vector& y, const Vector& z, const Vector& w) {
    return g(x, z) * g(y, w) - g(y, z) * g(x, w);
  }
  double pi2(const Vector& x, const Vector& y, const Vector& z, const Vector& w) const {
    return 2 * om(x, y) * om(z, w) + om(x, z) * om(y, w) - om(y, z) * om(x, w);
  }
  double psiQ(const Vector& x, const Vector& y, const Vector& z, const Vector& w) const {
    return 2 * g(x, J(y)) * Q(z, J(w)) + 2 * g(z, J(w)) * Q(x, J(y)) + g(x, J(z)) * Q(y, J(w)) +
           g(y, J(w)) * Q(x, J(z)) - g(x, J(w)) * Q(y, J(z)) - g(y, J(z)) * Q(x, J(w));
  }
  /// (nabla_X J)Y - (nabla_Y J)X
  Vector torsion(const Vector& x, const Vector& y) const { return dJ(x, y) - dJ(y, x); }
  double H(const Vector& v, const Vector& x, const Vector& y, const Vector& z, const Vector& w) const {
    return P(x, z) * dw(w, J(y), v) - P(y, z) * dw(w, J(x), v) - P(J(x), z) * dw(w, y, v) +
           P(J(y), z) * dw(w, x, v) - P(x, w) * dw(z, J(y), v) + P(y, w) * dw(z, J(x), v) +
           P(J(x), w) * dw(z, y, v) - P(J(y), w) * dw(z, x, v);
  }
};

using Terms = std::vector<double>;
using Args = std::span<const Vector>;
using Evaluator = std::function<Terms(const Ops&, Args, Reading)>;

Terms eq_1_6(const Ops& o, Args a, Reading) {
  const Vector &X = a[0], &Y = a[1];
  const PointData& p = o.p;
  const double N = o.N;
  return {p.rho_star_sym(X, Y), -2.0 / 3.0 * (N + 1) * p.rho(X, Y),
          ((N + 1) * p.tau - 3 * p.tau_star) / (3 * N) * o.g(X, Y)};
}

Terms eq_1_7(const Ops& o, Args, Reading) {
  const double N = o.N;
  return {8 * N * (N * N - 1) * o.p.nu, -(2 * N + 1) * o.p.tau, 3 * o.p.tau_star};
}

Terms eq_1_8(const Ops& o, Args a, Reading) {
  const Vector &V = a[0], &X = a[1], &Y = a[2];
  return {o.dw(V, X, Y), o.dw(X, Y, V), o.dw(Y, V, X)};
}

Terms eq_1_9(const Ops& o, Args a, Reading) {
  const Vector &X = a[0], &Y = a[1], &W = a[2];
  return {W.dot(o.dJ(X, Y)), W.dot(o.dJ(o.J(X), o.J(Y)))};
}

Terms eq_1_10(const Ops& o, Args a, Reading) {
  Terms t;
  for (int i = 0; i < o.d; ++i) t.push_back(a[0].dot(o.dJ(o.e(i), o.e(i))));
  return t;
}

Terms eq_2_2(const Ops& o, Args a, Reading) {
  const Vector &X = a[0], &Y = a[1];
  return {o.Q(o.J(X), o.J(Y)), -o.Q(Y, X)};
}

Terms eq_2_3(const Ops& o, Args a, Reading) {
  const Vector &V = a[0], &X = a[1], &Y = a[2];
  return {o.Q(o.dJ(V, X), o.J(Y)), -o.Q(Y, o.dJ(V, o.J(X)))};
}

Terms eq_2_4(const Ops& o, Args a, Reading) {
  const Vector &V = a[0], &X = a[1], &Y = a[2];
  return {o.DQ(V, o.J(X), o.J(Y)), -o.DQ(V, Y, X), o.Q(o.dJ(V, X), o.J(Y)), o.Q(o.J(X), o.dJ(V, Y))};
}

Terms eq_2_5(const Ops& o, Args a, Reading) {
  const Vector& V = a[0];
  const Matrix M = o.dJm(V);
  double l = 0, r = 0;
  for (int i = 0; i < o.d; ++i) {
    const Vector ei = o.e(i);
    l += o.Q(M * ei, o.J(ei));
    r += o.Q(o.J(ei), M * ei);
  }
  return {l, r};
}

Terms eq_2_6(const Ops& o, Args a, Reading) {
  const Vector &V = a[0], &X = a[1], &Y = a[2];
  double l = 0;
  for (int i = 0; i < o.d; ++i) l += o.Q(V, o.e(i)) * o.dw(o.e(i), Y, X);
  return {l, -o.Q(V, o.torsion(X, Y))};
}

Terms eq_2_7(const Ops& o, Args a, Reading) {
  const Vector& V = a[0];
  double l = 0;
  for (int i = 0; i < o.d; ++i) l += o.Q(o.J(o.e(i)), o.dJ(o.e(i), V));
  return {2 * l, -o.sQ(V)};
}

Terms eq_2_8(const Ops& o, Args a, Reading) {
  const Vector &X = a[0], &Y = a[1], &Z = a[2], &W = a[3];
  const double nu = o.p.nu;
  return {o.R(X, Y, Z, W), -o.psiQ(X, Y, Z, W), -nu * o.pi1(X, Y, Z, W),
          (2 * o.N - 1) / 3 * nu * o.pi2(X, Y, Z, W)};
}

Terms eq_2_9(const Ops& o, Args a, Reading) {
  const Vector &V = a[0], &X = a[1], &Y = a[2], &Z = a[3], &W = a[4];
  const double c = (2 * o.N - 1) / 3;
  const double nu = o.p.nu;
  auto J = [&](const Vector& u) { return o.J(u); };
  auto blk = [&](const Vector& s, const Vector& t) { return o.DQ(V, s, J(t)) + o.Q(s, o.dJ(V, t)); };
  Terms t{o.DR(V, X, Y, Z, W)};
  t.push_back(-2 * o.g(X, J(Y)) * blk(Z, W));
  t.push_back(-2 * o.g(Z, J(W)) * blk(X, Y));
  t.push_back(-o.g(X, J(Z)) * blk(Y, W));
  t.push_back(-o.g(Y, J(W)) * blk(X, Z));
  t.push_back(o.g(Y, J(Z)) * blk(X, W));
  t.push_back(o.g(X, J(W)) * blk(Y, Z));
  t.push_back(-2 * o.dw(V, Y, X) * o.Q(Z, J(W)));
  t.push_back(-2 * o.dw(V, W, Z) * o.Q(X, J(Y)));
  t.push_back(-o.dw(V, Z, X) * o.Q(Y, J(W)));
  t.push_back(-o.dw(V, W, Y) * o.Q(X, J(Z)));
  t.push_back(o.dw(V, Z, Y) * o.Q(X, J(W)));
  t.push_back(o.dw(V, W, X) * o.Q(Y, J(Z)));
  t.push_back(-o.dnu(V) * (o.pi1(X, Y, Z, W) - c * o.pi2(X, Y, Z, W)));
  t.push_back(c * nu *
              (2 * o.g(X, J(Y)) * o.dw(V, W, Z) + 2 * o.g(Z, J(W)) * o.dw(V, Y, X) +
               o.g(X, J(Z)) * o.dw(V, W, Y) + o.g(Y, J(W)) * o.dw(V, Z, X) - o.g(X, J(W)) * o.dw(V, Z, Y) -
               o.g(Y, J(Z)) * o.dw(V, W, X)));
  return t;
}

Terms eq_2_10(const Ops& o, Args a, Reading reading) {
  const Vector &V = a[0], &X = a[1], &Y = a[2];
  const double N = o.N;
  auto J = [&](const Vector& u) { return o.J(u); };
  Terms t{2 * (N + 1) * (2 * N - 1) * o.DQ(V, X, J(Y))};
  const double q1 = o.Q(Y, o.dJ(X, V)), q2 = o.Q(X, o.dJ(Y, V));
  if (reading == Reading::A) {
    t.push_back(-(2 * N + 3) * q1);
    t.push_back((2 * N + 3) * q2);
  } else {
    t.push_back(-(2 * N + 3) * q1);
    t.push_back(q2);
  }
  t.push_back(-(4 * N + 3) * o.Q(V, o.torsion(X, Y)));
  t.push_back(o.Q(Y, o.dJ(V, X)));
  t.push_back((4 * N * N + 2 * N - 3) * o.Q(X, o.dJ(V, Y)));
  t.push_back(-o.g(X, J(Y)) *
              (2 * N * o.sQ(V) + 4.0 / 3.0 * (N + 1) * (N - 2) * o.dnu(V) + (2 * N - 1) / 6 * o.dtau(V)));
  auto group = [&](const Vector& u) {
    return (4 * N - 1) / 2 * o.sQ(u) - 2.0 / 3.0 * (N + 1) * (2 * N * N - 4 * N + 3) * o.dnu(u) +
           (2 * N - 1) / 6 * o.dtau(u);
  };
  t.push_back(-o.g(X, J(V)) * group(Y));
  t.push_back(o.g(Y, J(V)) * group(X));
  t.push_back(2 * (N + 1) * (o.dnu(J(X)) * o.g(Y, V) - o.dnu(J(Y)) * o.g(X, V)));
  t.push_back(-(N + 1) / 3 * (o.p.tau - 2 * (2 * N - 1) * (2 * N - 1) * o.p.nu) * o.dw(V, X, Y));
  return t;
}

Terms eq_2_11(const Ops& o, Args a, Reading) {
  const double N = o.N;
  Terms t;
  for (int k = 0; k < 3; ++k) {
    const Vector& V = a[k];
    const Vector& X = a[(k + 1) % 3];
    const Vector& Y = a[(k + 2) % 3];
    t.push_back(2 * (N + 1) * o.DQ(V, X, o.J(Y)));
    t.push_back(-o.Q(Y, o.dJ(V, X)));
    t.push_back((2 * N + 3) * o.Q(X, o.dJ(V, Y)));
    t.push_back(-o.g(o.J(X), Y) * (o.dtau(V) / 6 - 4.0 / 3.0 * (N * N - 1) * o.dnu(V) + o.sQ(V)));
  }
  return t;
}

Terms eq_2_12(const Ops& o, Args a, Reading) {
  const Vector& V = a[0];
  const double N = o.N;
  double l = 0;
  for (int i = 0; i < o.d; ++i) l += o.DQ(o.e(i), V, o.e(i));
  return {l, -(4 * N + 1) / (4 * (N + 1)) * o.sQ(V), -N / (6 * (N + 1)) * o.dtau(V),
          2.0 / 3.0 * (N - 1) * (N - 1) * o.dnu(V)};
}

Terms eq_2_13(const Ops& o, Args a, Reading) {
  const double N = o.N;
  return {o.sQ(a[0]), -4.0 / 3.0 * (N * N - 1) * o.dnu(a[0])};
}

/// Left side of the n >= 3 identity with leading coefficient `lead`; also the
/// bracket of the final S expression.
Terms e14_terms(const Ops& o, const Vector& W, const Vector& X, const Vector& Y, double lead) {
  const double N = o.N;
  auto J = [&](const Vector& u) { return o.J(u); };
  return {lead * (o.Q(X, o.dJ(Y, W)) - o.Q(Y, o.dJ(X, W))),
          4 * N * (o.Q(X, o.dJ(W, Y)) - o.Q(Y, o.dJ(W, X))),
          -4 * (N - 3) * o.Q(W, o.torsion(X, Y)),
          o.p.tau * o.dw(W, X, Y),
          -8.0 / 3.0 * (2 * N * N - 4 * N + 3) *
              (o.dnu(X) * o.g(J(Y), W) - o.dnu(Y) * o.g(J(X), W) + 2 * o.dnu(W) * o.g(X, J(Y))),
          8 * N * (N - 2) * (o.dnu(J(X)) * o.g(Y, W) - o.dnu(J(Y)) * o.g(X, W))};
}

Terms eq_2_14(const Ops& o, Args a, Reading) { return e14_terms(o, a[0], a[1], a[2], 4 * (2 * o.N - 3)); }

Terms eq_2_15(const Ops& o, Args a, Reading) {
  const Vector &W = a[0], &X = a[1], &Y = a[2];
  const double N = o.N;
  const Vector T = o.torsion(X, Y);
  const Vector yw = o.dJ(Y, W), xw = o.dJ(X, W), wy = o.dJ(W, Y), wx = o.dJ(W, X);
  return {2 * (N - 3) * (o.Q(W, T) + o.Q(T, W)),
          -2 * (2 * N - 3) * (o.Q(X, yw) + o.Q(yw, X) - o.Q(Y, xw) - o.Q(xw, Y)),
          -2 * N * (o.Q(X, wy) + o.Q(wy, X) - o.Q(Y, wx) - o.Q(wx, Y)), -o.p.tau * o.dw(W, X, Y)};
}

Terms eq_2_16(const Ops& o, Args a, Reading) {
  const Vector &W = a[0], &X = a[1], &Y = a[2];
  const double N = o.N, k = N - 3;
  auto J = [&](const Vector& u) { return o.J(u); };
  const Vector T = o.dJ(Y, X) - o.dJ(X, Y);
  return {k * o.Q(W, T), -k * o.Q(T, W),
          k * 2.0 / 3.0 * (N + 1) *
              (o.dnu(X) * o.g(J(Y), W) - o.dnu(Y) * o.g(J(X), W) + o.dnu(J(X)) * o.g(Y, W) -
               o.dnu(J(Y)) * o.g(X, W))};
}

Terms eq_2_17(const Ops& o, Args a, Reading) {
  const Vector &W = a[0], &X = a[1], &Y = a[2];
  const double N = o.N;
  auto J = [&](const Vector& u) { return o.J(u); };
  return {o.Q(o.dJ(W, X), Y),
          -o.Q(o.dJ(W, Y), X),
          -o.Q(o.dJ(X, W), Y),
          o.Q(o.dJ(Y, W), X),
          -o.Q(Y, o.dJ(W, X) - o.dJ(X, W)),
          o.Q(X, o.dJ(W, Y) - o.dJ(Y, W)),
          -2.0 / 3.0 * (N + 1) *
              (o.dnu(X) * o.g(Y, J(W)) - o.dnu(Y) * o.g(X, J(W)) + 2 * o.dnu(W) * o.g(X, J(Y)) +
               o.dnu(J(X)) * o.g(Y, W) - o.dnu(J(Y)) * o.g(X, W))};
}

Terms eq_2_18(const Ops& o, Args a, Reading) {
  const Vector &W = a[0], &X = a[1], &Y = a[2];
  const double N = o.N;
  auto J = [&](const Vector& u) { return o.J(u); };
  return {6 * (N - 1) * (o.Q(o.dJ(X, W), Y) - o.Q(o.dJ(Y, W), X)),
          -2 * (N - 3) * (o.Q(X, o.dJ(Y, W)) - o.Q(Y, o.dJ(X, W))),
          -4 * N * (o.Q(X, o.dJ(W, Y)) - o.Q(Y, o.dJ(W, X))),
          4 * (N - 3) * o.Q(W, o.torsion(X, Y)),
          -o.p.tau * o.dw(W, X, Y),
          -4.0 / 3.0 * (N + 1) *
              ((2 * N - 3) * (o.dnu(X) * o.g(J(Y), W) - o.dnu(Y) * o.g(J(X), W)) -
               2 * N * o.dnu(W) * o.g(X, J(Y))),
          4 * (N + 1) * (o.dnu(J(X)) * o.g(Y, W) - o.dnu(J(Y)) * o.g(X, W))};
}

Terms eq_2_19(const Ops& o, Args a, Reading) {
  const Vector &V = a[0], &X = a[1], &Y = a[2];
  const double N = o.N;
  auto J = [&](const Vector& u) { return o.J(u); };
  const Vector yv = o.dJ(Y, V);
  return {o.Q(X, yv), -o.Q(yv, X),
          -2.0 / 3.0 * (2 * N - 1) * (o.dnu(Y) * o.g(J(V), X) + o.dnu(J(Y)) * o.g(V, X)),
          -2.0 / 3.0 * (N - 2) * (o.dnu(V) * o.g(J(Y), X) + o.dnu(J(V)) * o.g(Y, X))};
}

Terms eq_3_1(const Ops& o, Args a, Reading) {
  const Vector &V = a[0], &X = a[1], &Y = a[2], &Z = a[3], &W = a[4];
  const Vector JZ = o.J(Z), JW = o.J(W), JX = o.J(X), JY = o.J(Y);
  Terms t;
  auto cyc = [&](const Vector& p, const Vector& q, const Vector& r) {
    const Vector* s[3] = {&p, &q, &r};
    for (int k = 0; k < 3; ++k) {
      const Vector &u = *s[k], &v = *s[(k + 1) % 3], &w = *s[(k + 2) % 3];
      t.push_back(o.DR(u, v, w, Z, W));
      t.push_back(o.DR(u, v, w, JZ, JW));
    }
  };
  cyc(V, X, Y);
  cyc(V, JX, JY);
  return t;
}

Terms eq_3_2(const Ops& o, Args a, Reading) {
  const Vector &V = a[0], &X = a[1], &Y = a[2], &Z = a[3], &W = a[4];
  const double N = o.N;
  auto J = [&](const Vector& u) { return o.J(u); };
  auto pi1 = [&](const Vector& p, const Vector& q, const Vector& r, const Vector& s) { return o.pi1(p, q, r, s); };
  auto g = [&](const Vector& p, const Vector& q) { return o.g(p, q); };
  const double k = 3.0 / (4 * (N + 1));
  auto P = [&](const Vector& p, const Vector& q) { return o.P(p, q); };
  auto dw = [&](const Vector& u, const Vector& p, const Vector& q) { return o.dw(u, p, q); };
  Terms t{k * (P(X, Z) * dw(W, J(Y), V) - P(Y, Z) * dw(W, J(X), V) - P(J(X), Z) * dw(W, Y, V) +
               P(J(Y), Z) * dw(W, X, V) - P(X, W) * dw(Z, J(Y), V) + P(Y, W) * dw(Z, J(X), V) +
               P(J(X), W) * dw(Z, Y, V) - P(J(Y), W) * dw(Z, X, V))};
  t.push_back(-o.dnu(X) * (pi1(V, Y, Z, W) + pi1(V, Y, J(Z), J(W)) + 2 * g(Y, J(V)) * g(Z, J(W))));
  t.push_back(o.dnu(Y) * (pi1(V, X, Z, W) + pi1(V, X, J(Z), J(W)) + 2 * g(X, J(V)) * g(Z, J(W))));
  t.push_back(-o.dnu(J(X)) * (pi1(V, J(Y), Z, W) - pi1(J(V), Y, Z, W) + 2 * g(Y, V) * g(Z, J(W))));
  t.push_back(o.dnu(J(Y)) * (pi1(V, J(X), Z, W) - pi1(J(V), X, Z, W) + 2 * g(X, V) * g(Z, J(W))));
  t.push_back(2 * o.dnu(V) * (pi1(X, Y, Z, W) + pi1(X, Y, J(Z), J(W)) - 2 * g(X, J(Y)) * g(Z, J(W))));
  t.push_back(2 * o.dnu(W) * (pi1(X, Y, Z, V) + pi1(X, Y, J(Z), J(V)) - 2 * g(X, J(Y)) * g(Z, J(V))));
  t.push_back(-2 * o.dnu(Z) * (pi1(X, Y, W, V) + pi1(X, Y, J(W), J(V)) - 2 * g(X, J(Y)) * g(W, J(V))));
  t.push_back(-2 * o.dnu(J(W)) * (pi1(X, Y, Z, J(V)) - pi1(X, Y, J(Z), V) + 2 * g(X, J(Y)) * g(Z, V)));
  t.push_back(2 * o.dnu(J(Z)) * (pi1(X, Y, W, J(V)) - pi1(X, Y, J(W), V) + 2 * g(X, J(Y)) * g(W, V)));
  return t;
}

Terms eq_3_3(const Ops& o, Args a, Reading) {
  const Vector &V = a[0], &Y = a[1];
  const double N = o.N;
  return {8.0 / 3.0 * (N + 1) * o.dnu(V) * o.g(Y, Y) * o.g(V, V), -o.P(o.J(V), Y) * o.dw(V, V, Y),
          o.P(V, Y) * o.dw(V, V, o.J(Y))};
}

Terms eq_3_4(const Ops& o, Args a, Reading) {
  const Vector &V = a[0], &X = a[1], &Y = a[2], &Z = a[3], &W = a[4];
  auto J = [&](const Vector& u) { return o.J(u); };
  return {o.P(X, Z) * o.dw(V, J(Y), W), -o.P(Y, Z) * o.dw(V, J(X), W), -o.P(J(X), Z) * o.dw(V, Y, W),
          o.P(J(Y), Z) * o.dw(V, X, W)};
}

const std::map<std::string, Evaluator, std::less<>>& evaluators() {
  static const std::map<std::string, Evaluator, std::less<>> table = {
      {"eq_1_6", eq_1_6},   {"eq_1_7", eq_1_7},   {"eq_1_8", eq_1_8},   {"eq_1_9", eq_1_9},
      {"eq_1_10", eq_1_10}, {"eq_2_2", eq_2_2},   {"eq_2_3", eq_2_3},   {"eq_2_4", eq_2_4},
      {"eq_2_5", eq_2_5},   {"eq_2_6", eq_2_6},   {"eq_2_7", eq_2_7},   {"eq_2_8", eq_2_8},
      {"eq_2_9", eq_2_9},   {"eq_2_10", eq_2_10}, {"eq_2_11", eq_2_11}, {"eq_2_12", eq_2_12},
      {"eq_2_13", eq_2_13}, {"eq_2_14", eq_2_14}, {"eq_2_15", eq_2_15}, {"eq_2_16", eq_2_16},
      {"eq_2_17", eq_2_17}, {"eq_2_18", eq_2_18}, {"eq_2_19", eq_2_19}, {"eq_3_1", eq_3_1},
      {"eq_3_2", eq_3_2},   {"eq_3_3", eq_3_3},   {"eq_3_4", eq_3_4},
  };
  return table;
}

Matrix random_orthogonal(int d, Rng& rng) {
  Eigen::HouseholderQR<Matrix> qr(rng.normal_matrix(d, d));
  return qr.householderQ() * Matrix::Identity(d, d);
}

Vector unit(Rng& rng, int d) {
  Vector v = rng.normal_vector(d);
  return v / v.norm();
}

}  // namespace

const std::vector<IdentityInfo>& identity_catalog() {
  static const std::vector<IdentityInfo> cat = [] {
    std::vector<IdentityInfo> c;
    auto add = [&](std::string id, std::string summary, std::string group, int arity, int min_n, bool ak,
                   bool pcasc, std::string note = {}) {
      IdentityInfo info;
      info.id = std::move(id);
      info.summary = std::move(summary);
      info.group = std::move(group);
      info.arity = arity;
      info.min_n = min_n;
      info.needs_almost_kahler = ak;
      info.needs_pcasc = pcasc;
      info.note = std::move(note);
      c.push_back(std::move(info));
    };
    add("eq_1_6", "rho*(R + L3 R) in terms of rho, tau and tau*", "preliminary", 2, 2, false, true);
    add("eq_1_7", "8n(n^2-1) nu = (2n+1) tau - 3 tau*", "preliminary", 0, 2, false, true);
    add("eq_1_8", "cyclic sum of nabla omega vanishes", "preliminary", 3, 1, true, false);
    add("eq_1_9", "(nabla_X J)Y + (nabla_JX J)JY = 0", "preliminary", 3, 1, true, false);
    add("eq_1_10", "sum_i (nabla_ei J)ei = 0", "preliminary", 1, 1, true, false);
    add("eq_2_2", "Q(JX, JY) = Q(Y, X)", "lemma", 2, 2, false, true);
    add("eq_2_3", "Q((nabla_V J)X, JY) = Q(Y, (nabla_V J)JX)", "lemma", 3, 2, false, true);
    add("eq_2_4", "nabla Q against the Q constraint", "lemma", 3, 2, false, true);
    add("eq_2_5", "trace pairing of Q with nabla J is antisymmetric", "lemma", 1, 2, false, true);
    add("eq_2_6", "Q contracted with nabla omega", "lemma", 3, 2, true, true);
    add("eq_2_7", "2 sum_i Q(J ei, (nabla_ei J)V) = sum_i Q(J ei, (nabla_V J)ei)", "lemma", 1, 2, true, true,
        "frame index of the first sum read as J e_i");
    add("eq_2_8", "R = psi(Q) + nu pi1 - (2n-1)/3 nu pi2", "lemma", 4, 2, false, true);
    add("eq_2_9", "expansion of nabla R", "lemma", 5, 2, false, true);
    add("eq_2_10", "nabla Q in terms of Q, nabla J, dnu and dtau", "lemma", 3, 2, true, true,
        "unbalanced coefficient group; reading selectable");
    add("eq_2_11", "cyclic sum of nabla Q", "lemma", 3, 2, true, true);
    add("eq_2_12", "divergence of Q", "lemma", 1, 2, true, true);
    add("eq_2_13", "sum_i Q(J ei, (nabla_V J)ei) = 4/3 (n^2-1) V(nu)", "lemma", 1, 2, true, true);
    add("eq_2_14", "vanishing combination of Q, nabla J and dnu", "lemma", 3, 3, true, true);
    add("eq_2_15", "first J-combination of S", "lemma", 3, 3, true, true);
    add("eq_2_16", "second J-combination of S", "lemma", 3, 3, true, true);
    add("eq_2_17", "transposition relation for Q(nabla J)", "lemma", 3, 3, true, true);
    add("eq_2_18", "reduced first J-combination", "lemma", 3, 3, true, true,
        "(2n-3) group read as multiplying the antisymmetric pair X(nu)g(JY,W) - Y(nu)g(JX,W)");
    add("eq_2_19", "skew part of Q against nabla J in terms of dnu", "lemma", 3, 4, true, true);
    add("eq_3_1", "second Bianchi identity, J-symmetrized", "section3", 5, 2, true, true);
    add("eq_3_2", "reduced Bianchi condition in rho*(R - L3 R), nabla omega and dnu", "section3", 5, 4, true,
        true);
    add("eq_3_3", "V(nu) from rho*(R - L3 R) for Y orthogonal to V and JV", "section3", 2, 4, true, true);
    add("eq_3_4", "rho*(R - L3 R) against nabla omega", "section3", 5, 4, true, true);
    add("prop_1_2", "Einstein iff pointwise constant holomorphic sectional curvature", "proposition", 0, 2,
        false, true);
    add("thm_1", "almost Kaehler with p.c.a.s.c. and n >= 4 is a complex space form", "theorem", 0, 4, true,
        true);
    for (IdentityInfo& info : c)
      if (info.id == "eq_2_13") info.excluded_n = 3;
    return c;
  }();
  return cat;
}

const IdentityInfo& identity_info(std::string_view id) {
  for (const IdentityInfo& info : identity_catalog())
    if (info.id == id) return info;
  throw Error(ErrorCode::ConfigError, "unknown identity id '" + std::string(id) + "'");
}

bool is_known_identity(std::string_view id) {
  const auto& cat = identity_catalog();
  return std::any_of(cat.begin(), cat.end(), [&](const IdentityInfo& i) { return i.id == id; });
}

std::string dimension_excludes(const IdentityInfo& info, int n) {
  if (n < info.min_n) return info.id + ": requires n >= " + std::to_string(info.min_n);
  if (info.excluded_n != 0 && n == info.excluded_n)
    return info.id + ": requires n != " + std::to_string(info.excluded_n);
  return {};
}

void PointData::refresh() {
  rho = ricci(R);
  const Curv4 L = l3(space, R);
  rho_star_sym = star_ricci(space, R + L);
  P = star_ricci(space, R - L);
  tau_star = star_ricci(space, R).m.trace();
}

std::vector<double> identity_terms(std::string_view id, const PointData& p, std::span<const Vector> args,
                                   Reading reading) {
  const auto& table = evaluators();
  const auto it = table.find(id);
  if (it == table.end()) throw Error(ErrorCode::ConfigError, "no tensor evaluator for '" + std::string(id) + "'");
  const IdentityInfo& info = identity_info(id);
  if (static_cast<int>(args.size()) != info.arity)
    throw Error(ErrorCode::BadParams, std::string(id) + " takes " + std::to_string(info.arity) + " vectors");
  return it->second(Ops(p), args, reading);
}

Sampled sample_identity(std::string_view id, const PointData& p, int tuples, std::uint64_t seed, Reading reading) {
  const IdentityInfo& info = identity_info(id);
  const int d = p.dim();
  Rng rng = Rng(seed).split(id);
  Sampled out;
  const int count = info.arity == 0 ? 1 : std::max(1, tuples);
  std::vector<Vector> args(static_cast<std::size_t>(info.arity));
  for (int k = 0; k < count; ++k) {
    for (Vector& v : args) v = unit(rng, d);
    if (id == "eq_3_3") {
      const Vector jv = p.space.apply_J(args[0]);
      Vector& y = args[1];
      for (int pass = 0; pass < 2; ++pass) {
        y -= args[0].dot(y) * args[0];
        y -= jv.dot(y) * jv;
      }
      y /= y.norm();
    }
    const std::vector<double> t = identity_terms(id, p, args, reading);
    double sum = 0;
    for (double v : t) {
      sum += v;
      out.term_magnitude = std::max(out.term_magnitude, std::abs(v));
    }
    if (!std::isfinite(sum)) {
      out.residual = std::numeric_limits<double>::infinity();
      return out;
    }
    out.residual = std::max(out.residual, std::abs(sum));
  }
  return out;
}

PointData point_data(const JetPoint& jet, double nu) {
  if (!jet.has_curvature_derivatives)
    throw Error(ErrorCode::BadParams, "identity evaluation needs a jet with curvature derivatives");
  PointData p;
  p.space = jet.space;
  p.R = jet.R;
  p.nabla_R = jet.nabla_R;
  p.Q = jet.Q;
  p.nabla_Q = jet.nabla_Q;
  p.A = ConstrainedA(jet.nabla_omega);
  p.nu = nu;
  p.tau = jet.tau;
  p.dnu = jet.dnu;
  p.dtau = jet.dtau;
  p.refresh();
  return p;
}

Tensor<5> formal_nabla_R(const AlgebraInstance& inst) {
  const HermitianSpace& s = inst.space;
  const int d = s.dim();
  const double c = (2.0 * s.n - 1.0) / 3.0;
  auto model = [&](const Matrix& J, const Bilinear& Q, double nu) {
    HermitianSpace t = s;
    t.J_frame = J;
    return lift(t, Q, Lift::Psi) + canonical(t, Canonical::Pi1) * nu - canonical(t, Canonical::Pi2) * (c * nu);
  };
  Tensor<5> out(d);
  auto dst = out.data();
  const std::size_t block = static_cast<std::size_t>(d) * d * d * d;
  for (int v = 0; v < d; ++v) {
    Matrix DQv(d, d);
    for (int x = 0; x < d; ++x)
      for (int y = 0; y < d; ++y) DQv(x, y) = inst.nabla_Q(v, x, y);
    const Matrix M = inst.A.endomorphism(Vector::Unit(d, v));
    // The model is quadratic in J, so the central difference with unit step is exact.
    const Curv4 dv = model(s.J_frame, Bilinear(DQv), inst.dnu(v)) +
                     (model(s.J_frame + M, inst.Q, inst.nu) - model(s.J_frame - M, inst.Q, inst.nu)) * 0.5;
    std::copy(dv.data().begin(), dv.data().end(), dst.begin() + static_cast<std::ptrdiff_t>(v * block));
  }
  return out;
}

AlgebraInstance random_algebra_instance(int n, std::uint64_t seed, const InstanceOptions& options) {
  if (n < 2) throw Error(ErrorCode::DimensionTooSmall, "algebra instances need n >= 2");
  const int d = 2 * n;
  Rng rng(seed);
  AlgebraInstance inst;
  inst.space = make_space(n);
  if (options.rotate) {
    Rng r = rng.split("frame");
    inst.space = rotate_frame(inst.space, random_orthogonal(d, r));
  }
  const HermitianSpace& s = inst.space;
  const Matrix& J = s.J_frame;
  inst.Q = random_constrained_q(s, rng.split("Q").next_u64());
  inst.A = options.zero_A ? ConstrainedA(d) : random_constrained_a(s, rng.split("A").next_u64());
  Rng sc = rng.split("scalars");
  inst.nu = sc.normal();
  inst.dnu = options.zero_dnu ? Vector::Zero(d) : sc.normal_vector(d);
  inst.tau = 6.0 * inst.Q.m.trace();
  inst.nabla_Q = Tensor<3>(d);
  inst.dtau = Vector::Zero(d);
  Rng dq = rng.split("nabla_Q");
  for (int v = 0; v < d; ++v) {
    const Matrix M = inst.A.endomorphism(Vector::Unit(d, v));
    // Differentiated constraint: L(DQ) = B with B = -M^T Q J - J^T Q M; -B^T/2 is a particular solution.
    const Matrix B = -M.transpose() * inst.Q.m * J - J.transpose() * inst.Q.m * M;
    Matrix DQv = -0.5 * B.transpose();
    if (!options.zero_nabla_Q) DQv += project_q_constraint(s, Bilinear(dq.normal_matrix(d, d))).m;
    for (int x = 0; x < d; ++x)
      for (int y = 0; y < d; ++y) inst.nabla_Q(v, x, y) = DQv(x, y);
    inst.dtau(v) = 6.0 * DQv.trace();
  }
  return inst;
}

PointData point_data(const AlgebraInstance& inst) {
  PointData p;
  p.space = inst.space;
  p.Q = inst.Q;
  p.nu = inst.nu;
  p.R = reconstruct_from_q(inst.space, inst.Q, inst.nu);
  p.nabla_R = formal_nabla_R(inst);
  p.nabla_Q = inst.nabla_Q;
  p.A = inst.A;
  p.tau = inst.tau;
  p.dnu = inst.dnu;
  p.dtau = inst.dtau;
  p.refresh();
  return p;
}

PointData space_form_point(int n, double nu) {
  const int d = 2 * n;
  PointData p;
  p.space = make_space(n);
  p.R = (canonical(p.space, Canonical::Pi1) + canonical(p.space, Canonical::Pi2)) * nu;
  p.nabla_R = Tensor<5>(d);
  p.Q = Bilinear(Matrix::Identity(d, d) * ((n + 1.0) * nu / 3.0));
  p.nabla_Q = Tensor<3>(d);
  p.A = ConstrainedA(d);
  p.nu = nu;
  p.tau = 4.0 * n * (n + 1.0) * nu;
  p.dnu = Vector::Zero(d);
  p.dtau = Vector::Zero(d);
  p.refresh();
  return p;
}

double t_tensor(const PointData& p, const Vector& v, const Vector& x, const Vector& y) {
  const Ops o(p);
  return o.Q(v, o.torsion(x, y));
}

double q1_tensor(const PointData& p, const Vector& v, const Vector& x, const Vector& y) {
  const Ops o(p);
  const Vector* s[3] = {&v, &x, &y};
  double acc = 0;
  for (int k = 0; k < 3; ++k) {
    const Vector &a = *s[k], &b = *s[(k + 1) % 3], &c = *s[(k + 2) % 3];
    acc += t_tensor(p, a, b, c) - t_tensor(p, o.J(a), o.J(b), c);
  }
  return acc / 6.0;
}

double h_tensor(const PointData& p, const Vector& v, const Vector& x, const Vector& y, const Vector& z,
                const Vector& w) {
  return Ops(p).H(v, x, y, z, w);
}

double h_prime_tensor(const PointData& p, const Vector& v, const Vector& x, const Vector& y, const Vector& z,
                      const Vector& w) {
  auto H = [&](const Vector& a, const Vector& b, const Vector& c, const Vector& e) {
    return h_tensor(p, v, a, b, c, e);
  };
  return 2 * (H(x, y, z, w) + H(z, w, x, y)) - H(y, z, x, w) - H(x, w, y, z) - H(z, x, y, w) - H(y, w, z, x);
}

double s_tensor(const PointData& p, double lead, const Vector& W, const Vector& X, const Vector& Y) {
  const Ops o(p);
  const double N = o.N;
  auto J = [&](const Vector& u) { return o.J(u); };
  const Vector T = o.torsion(X, Y);
  double s = lead * (o.Q(X, o.dJ(Y, W)) - o.Q(Y, o.dJ(X, W)));
  s -= 4 * N * (o.Q(o.dJ(Y, W), X) - o.Q(o.dJ(X, W), Y));
  s += 2 * (2 * N * N + 3 * N + 3) * (o.Q(X, o.dJ(W, Y)) - o.Q(Y, o.dJ(W, X)));
  s -= 2 * (N + 3) * (o.Q(o.dJ(W, Y), X) - o.Q(o.dJ(W, X), Y));
  s += 2 * (N - 3) * (o.Q(W, T) - (2 * N + 3) * o.Q(T, W));
  s += (N + 1) * p.tau * o.dw(W, X, Y);
  s -= 4 * (N + 1) * (2 * N * N - 2 * N - 3) * (o.dnu(X) * o.g(J(Y), W) - o.dnu(Y) * o.g(J(X), W));
  s += 4.0 / 3.0 * (N + 1) * (4 * N * N - 4 * N + 3) *
       (o.dnu(J(X)) * o.g(Y, W) - o.dnu(J(Y)) * o.g(X, W) - 2 * o.dnu(W) * o.g(X, J(Y)));
  return s;
}

}  // namespace curvlab

namespace curvlab {

BianchiClosure bianchi_closed_instance(int n, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorCode::DimensionTooSmall, "Bianchi closure needs n >= 2");
  const int d = 2 * n;
  AlgebraInstance base = random_algebra_instance(n, seed);
  const Matrix& J = base.space.J_frame;
  const int nq = d * d, ndq = d * d * d;
  const int cols = nq + 1 + ndq + d;
  std::vector<Matrix> Ms;
  for (int v = 0; v < d; ++v) Ms.push_back(base.A.endomorphism(Vector::Unit(d, v)));

  auto unpack = [&](const Vector& u) {
    AlgebraInstance inst = base;
    inst.Q = Bilinear(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        u.data(), d, d));
    inst.nu = u(nq);
    std::copy(u.data() + nq + 1, u.data() + nq + 1 + ndq, inst.nabla_Q.data().begin());
    inst.dnu = u.segment(nq + 1 + ndq, d);
    inst.tau = 6.0 * inst.Q.m.trace();
    for (int v = 0; v < d; ++v) {
      double tr = 0;
      for (int x = 0; x < d; ++x) tr += inst.nabla_Q(v, x, x);
      inst.dtau(v) = 6.0 * tr;
    }
    return inst;
  };
  auto residual = [&](const Vector& u) {
    const AlgebraInstance inst = unpack(u);
    std::vector<double> r;
    const Matrix& Q = inst.Q.m;
    const Matrix c = J.transpose() * Q * J - Q.transpose();
    r.insert(r.end(), c.data(), c.data() + c.size());
    for (int v = 0; v < d; ++v) {
      Matrix DQv(d, d);
      for (int x = 0; x < d; ++x)
        for (int y = 0; y < d; ++y) DQv(x, y) = inst.nabla_Q(v, x, y);
      const Matrix B = -Ms[v].transpose() * Q * J - J.transpose() * Q * Ms[v];
      const Matrix e = J.transpose() * DQv * J - DQv.transpose() - B;
      r.insert(r.end(), e.data(), e.data() + e.size());
    }
    const Tensor<5> DR = formal_nabla_R(inst);
    for (int a = 0; a < d; ++a)
      for (int b = a + 1; b < d; ++b)
        for (int c2 = b + 1; c2 < d; ++c2)
          for (int z = 0; z < d; ++z)
            for (int w = z + 1; w < d; ++w)
              r.push_back(DR(a, b, c2, z, w) + DR(b, c2, a, z, w) + DR(c2, a, b, z, w));
    return Eigen::Map<Vector>(r.data(), static_cast<Eigen::Index>(r.size())).eval();
  };

  Vector probe = Vector::Zero(cols);
  const Eigen::Index rows = residual(probe).size();
  Matrix M(rows, cols);
  for (int k = 0; k < cols; ++k) {
    probe.setZero();
    probe(k) = 1.0;
    M.col(k) = residual(probe);
  }
  Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double cut = 1e-9 * sv(0);
  BianchiClosure out;
  out.unknowns = cols;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) <= cut) ++out.null_dim;
  out.null_dim += static_cast<int>(cols - sv.size());
  if (out.null_dim == 0) return out;
  const Matrix null = svd.matrixV().rightCols(out.null_dim);
  Rng rng = Rng(seed).split("closure");
  Vector u = null * rng.normal_vector(out.null_dim);
  u /= u.cwiseAbs().maxCoeff();
  out.q_weight = u.head(nq).cwiseAbs().maxCoeff();
  out.instance = unpack(u);
  return out;
}

}  // namespace curvlab
