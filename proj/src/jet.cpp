#include "curvlab/chart_geometry.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include "curvlab/errors.hpp"

namespace curvlab {

namespace {

struct StencilTap {
  int k;
  double w;
};

std::vector<StencilTap> first_derivative_stencil(int order) {
  if (order == 2) return {{-1, -0.5}, {1, 0.5}};
  if (order == 4) return {{-2, 1.0 / 12}, {-1, -8.0 / 12}, {1, 8.0 / 12}, {2, -1.0 / 12}};
  throw Error(ErrorCode::BadParams, "stencil order must be 2 or 4");
}

template <class Real>
Real real_abs(const Real& x) {
  return x < Real(0) ? -x : x;
}

// Gauss-Jordan with partial pivoting; metrics here are SPD and well scaled.
template <class Real>
std::vector<Real> invert(std::vector<Real> a, int d) {
  std::vector<Real> inv(d * d, Real(0));
  for (int i = 0; i < d; ++i) inv[i * d + i] = Real(1);
  for (int col = 0; col < d; ++col) {
    int piv = col;
    for (int r = col + 1; r < d; ++r)
      if (real_abs(a[r * d + col]) > real_abs(a[piv * d + col])) piv = r;
    if (a[piv * d + col] == Real(0)) throw Error(ErrorCode::NonPositiveDefiniteMetric, "singular metric");
    if (piv != col)
      for (int k = 0; k < d; ++k) {
        std::swap(a[piv * d + k], a[col * d + k]);
        std::swap(inv[piv * d + k], inv[col * d + k]);
      }
    const Real s = Real(1) / a[col * d + col];
    for (int k = 0; k < d; ++k) {
      a[col * d + k] *= s;
      inv[col * d + k] *= s;
    }
    for (int r = 0; r < d; ++r) {
      if (r == col) continue;
      const Real f = a[r * d + col];
      if (f == Real(0)) continue;
      for (int k = 0; k < d; ++k) {
        a[r * d + k] -= f * a[col * d + k];
        inv[r * d + k] -= f * inv[col * d + k];
      }
    }
  }
  return inv;
}

// Lattice of points p + h * offset with memoized fields. Fields are flat
// row-major arrays in coordinate components.
template <class Real>
class Pipeline {
 public:
  using Key = std::string;
  using Field = std::vector<Real>;

  Pipeline(const Chart& chart, const Vector& p, const JetOptions& opt)
      : fns_(chart.fns<Real>()), d_(chart.dim()), n_(chart.n), h_(Real(opt.h)),
        stencil_(first_derivative_stencil(opt.order)), corrupt_(opt.corrupt_gamma) {
    p_.resize(d_);
    for (int i = 0; i < d_; ++i) p_[i] = Real(p(i));
    centre_ = Key(d_, char(0));
  }

  const Key& centre() const { return centre_; }
  int d() const { return d_; }

  const Field& g(const Key& o) { return metric(o).g; }
  const Field& ginv(const Key& o) { return metric(o).ginv; }

  const Field& J(const Key& o) {
    auto it = j_.find(o);
    if (it != j_.end()) return it->second;
    Field out(d_ * d_);
    fns_.J(coords(o), out);
    return j_.emplace(o, std::move(out)).first->second;
  }

  // omega_ab = g(J d_a, d_b) = J^e_a g_eb
  const Field& omega(const Key& o) {
    auto it = omega_.find(o);
    if (it != omega_.end()) return it->second;
    const Field& gg = g(o);
    const Field& jj = J(o);
    Field w(d_ * d_, Real(0));
    for (int a = 0; a < d_; ++a)
      for (int b = 0; b < d_; ++b) {
        Real acc(0);
        for (int e = 0; e < d_; ++e) acc += jj[e * d_ + a] * gg[e * d_ + b];
        w[a * d_ + b] = acc;
      }
    return omega_.emplace(o, std::move(w)).first->second;
  }

  // Gamma^a_{bc} at index (a * d + b) * d + c.
  const Field& gamma(const Key& o) {
    auto it = gamma_.find(o);
    if (it != gamma_.end()) return it->second;
    const int d = d_;
    std::vector<Field> dg(d);
    for (int c = 0; c < d; ++c) dg[c] = diff(o, c, [&](const Key& k) -> const Field& { return g(k); });
    Field low(d * d * d);
    for (int e = 0; e < d; ++e)
      for (int b = 0; b < d; ++b)
        for (int c = 0; c < d; ++c)
          low[(e * d + b) * d + c] = Real(0.5) * (dg[b][e * d + c] + dg[c][e * d + b] - dg[e][b * d + c]);
    const Field& G = ginv(o);
    Field out(d * d * d, Real(0));
    for (int a = 0; a < d; ++a)
      for (int e = 0; e < d; ++e) {
        const Real gae = G[a * d + e];
        if (gae == Real(0)) continue;
        for (int bc = 0; bc < d * d; ++bc) out[a * d * d + bc] += gae * low[e * d * d + bc];
      }
    if (corrupt_) out[(corrupt_->a * d + corrupt_->b) * d + corrupt_->c] += Real(corrupt_->delta);
    return gamma_.emplace(o, std::move(out)).first->second;
  }

  // Lowered R_{abcd} = g_ae R^e_{bcd},
  // R^a_{bcd} = d_c Gamma^a_{db} - d_d Gamma^a_{cb} + Gamma^a_{ce} Gamma^e_{db} - Gamma^a_{de} Gamma^e_{cb}.
  const Field& riemann(const Key& o) {
    auto it = riemann_.find(o);
    if (it != riemann_.end()) return it->second;
    const int d = d_;
    auto I3 = [d](int a, int b, int c) { return (a * d + b) * d + c; };
    const Field& Gm = gamma(o);
    std::vector<Field> dG(d);
    for (int c = 0; c < d; ++c) dG[c] = diff(o, c, [&](const Key& k) -> const Field& { return gamma(k); });
    Field up(d * d * d * d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        for (int c = 0; c < d; ++c)
          for (int w = 0; w < d; ++w) {
            Real acc = dG[c][I3(a, w, b)] - dG[w][I3(a, c, b)];
            for (int e = 0; e < d; ++e) acc += Gm[I3(a, c, e)] * Gm[I3(e, w, b)] - Gm[I3(a, w, e)] * Gm[I3(e, c, b)];
            up[((a * d + b) * d + c) * d + w] = acc;
          }
    const Field& gg = g(o);
    const int d3 = d * d * d;
    Field low(d * d3, Real(0));
    for (int a = 0; a < d; ++a)
      for (int e = 0; e < d; ++e) {
        const Real gae = gg[a * d + e];
        if (gae == Real(0)) continue;
        for (int r = 0; r < d3; ++r) low[a * d3 + r] += gae * up[e * d3 + r];
      }
    return riemann_.emplace(o, std::move(low)).first->second;
  }

  struct Scalars {
    Field Q;
    Real tau, tau_star, nu;
  };

  // Q = rho / 6 + rho*(R - L3 R) / (4(n + 1)) in coordinates, with
  // rho_bd = G^ac R_abcd and rho*(T)_xy = G^ij T_{x i r s} J^r_y J^s_j.
  const Scalars& scalars(const Key& o) {
    auto it = scalars_.find(o);
    if (it != scalars_.end()) return it->second;
    const int d = d_;
    const Field& R = riemann(o);
    const Field& G = ginv(o);
    const Field& jj = J(o);
    auto I4 = [d](int a, int b, int c, int w) { return ((a * d + b) * d + c) * d + w; };

    // L3 R: pull back every slot through J (J^p_a at jj[p * d + a]).
    Field L = R;
    for (int slot = 0; slot < 4; ++slot) {
      Field next(L.size(), Real(0));
      std::array<int, 4> idx{};
      for (idx[0] = 0; idx[0] < d; ++idx[0])
        for (idx[1] = 0; idx[1] < d; ++idx[1])
          for (idx[2] = 0; idx[2] < d; ++idx[2])
            for (idx[3] = 0; idx[3] < d; ++idx[3]) {
              std::array<int, 4> src = idx;
              Real acc(0);
              for (int p = 0; p < d; ++p) {
                const Real m = jj[p * d + idx[slot]];
                if (m == Real(0)) continue;
                src[slot] = p;
                acc += m * L[I4(src[0], src[1], src[2], src[3])];
              }
              next[I4(idx[0], idx[1], idx[2], idx[3])] = acc;
            }
      L = std::move(next);
    }
    auto rho_star = [&](const Field& T) {
      // M_{x i r j} = T_{x i r s} J^s_j, then rho*_xy = G^ij M_{x i r j} J^r_y.
      Field M(d * d * d * d, Real(0));
      for (int x = 0; x < d; ++x)
        for (int i = 0; i < d; ++i)
          for (int r = 0; r < d; ++r)
            for (int j = 0; j < d; ++j) {
              Real acc(0);
              for (int s = 0; s < d; ++s) acc += T[I4(x, i, r, s)] * jj[s * d + j];
              M[I4(x, i, r, j)] = acc;
            }
      Field out(d * d, Real(0));
      for (int x = 0; x < d; ++x)
        for (int y = 0; y < d; ++y) {
          Real acc(0);
          for (int r = 0; r < d; ++r) {
            const Real jr = jj[r * d + y];
            if (jr == Real(0)) continue;
            Real inner(0);
            for (int i = 0; i < d; ++i)
              for (int j = 0; j < d; ++j) inner += G[i * d + j] * M[I4(x, i, r, j)];
            acc += inner * jr;
          }
          out[x * d + y] = acc;
        }
      return out;
    };
    Field rho(d * d, Real(0));
    for (int b = 0; b < d; ++b)
      for (int w = 0; w < d; ++w) {
        Real acc(0);
        for (int a = 0; a < d; ++a)
          for (int c = 0; c < d; ++c) acc += G[a * d + c] * R[I4(a, b, c, w)];
        rho[b * d + w] = acc;
      }
    Field T(R.size());
    for (std::size_t i = 0; i < R.size(); ++i) T[i] = R[i] - L[i];
    const Field rs_R = rho_star(R);
    const Field rs_T = rho_star(T);
    Scalars s;
    s.Q.resize(d * d);
    s.tau = Real(0);
    s.tau_star = Real(0);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        s.Q[a * d + b] = rho[a * d + b] / Real(6) + rs_T[a * d + b] / Real(4 * (n_ + 1));
        s.tau += G[a * d + b] * rho[a * d + b];
        s.tau_star += G[a * d + b] * rs_R[a * d + b];
      }
    s.nu = n_ >= 2 ? (Real(2 * n_ + 1) * s.tau - Real(3) * s.tau_star) / Real(8 * n_ * (n_ * n_ - 1)) : Real(0);
    return scalars_.emplace(o, std::move(s)).first->second;
  }

  template <class Get>
  Field diff(const Key& o, int axis, Get&& get) {
    Field acc;
    for (const StencilTap& t : stencil_) {
      const Field& f = get(shift(o, axis, t.k));
      if (acc.empty()) acc.assign(f.size(), Real(0));
      const Real w(t.w);
      for (std::size_t i = 0; i < f.size(); ++i) acc[i] += w * f[i];
    }
    for (Real& a : acc) a /= h_;
    return acc;
  }

  template <class Get>
  Real diff_scalar(const Key& o, int axis, Get&& get) {
    Real acc(0);
    for (const StencilTap& t : stencil_) acc += Real(t.w) * get(shift(o, axis, t.k));
    return acc / h_;
  }

 private:
  struct Metric {
    Field g, ginv;
  };

  const Metric& metric(const Key& o) {
    auto it = metric_.find(o);
    if (it != metric_.end()) return it->second;
    Metric m;
    m.g.resize(d_ * d_);
    fns_.metric(coords(o), m.g);
    m.ginv = invert(m.g, d_);
    return metric_.emplace(o, std::move(m)).first->second;
  }

  std::vector<Real> coords(const Key& o) const {
    std::vector<Real> x(d_);
    for (int i = 0; i < d_; ++i) x[i] = p_[i] + Real(static_cast<int>(static_cast<signed char>(o[i]))) * h_;
    return x;
  }

  static Key shift(Key o, int axis, int k) {
    o[axis] = static_cast<char>(static_cast<signed char>(o[axis]) + k);
    return o;
  }

  const ChartFns<Real>& fns_;
  int d_, n_;
  Real h_;
  std::vector<StencilTap> stencil_;
  std::optional<GammaCorruption> corrupt_;
  std::vector<Real> p_;
  Key centre_;
  std::map<Key, Metric> metric_;
  std::map<Key, Field> j_, omega_, gamma_, riemann_;
  std::map<Key, Scalars> scalars_;
};

template <int Rank, class Real>
Tensor<Rank> to_tensor(const std::vector<Real>& f, int d) {
  Tensor<Rank> t(d);
  auto out = t.data();
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = static_cast<double>(f[i]);
  return t;
}

template <class Real>
JetPoint run_jet(const Chart& chart, const Vector& point, const JetOptions& opt) {
  JetPoint out;
  out.point = point;
  out.h = opt.h;
  out.order = opt.order;
  out.space = chart.space_at(point);
  const int d = chart.dim();
  const Matrix& F = out.space.frame;
  const Matrix Finv = F.transpose() * out.space.g;
  auto to_frame = [&F](auto t) { return t.pullback([&F](int a, int i) { return F(a, i); }); };

  Pipeline<Real> P(chart, point, opt);
  const auto& o = P.centre();
  const auto& Gm = P.gamma(o);
  auto I3 = [d](int a, int b, int c) { return (a * d + b) * d + c; };
  out.gamma = to_tensor<3>(Gm, d);

  const auto& Rc = P.riemann(o);
  out.R = to_frame(to_tensor<4>(Rc, d));

  // Coordinate covariant derivatives at the centre: slot c is the direction.
  std::vector<Real> nomega(d * d * d), nJ(d * d * d);
  const auto& gc = P.g(o);
  const auto& jc = P.J(o);
  const auto& wc = P.omega(o);
  Real compat(0);
  for (int c = 0; c < d; ++c) {
    const auto dw = P.diff(o, c, [&](const std::string& k) -> const std::vector<Real>& { return P.omega(k); });
    const auto dj = P.diff(o, c, [&](const std::string& k) -> const std::vector<Real>& { return P.J(k); });
    const auto dg = P.diff(o, c, [&](const std::string& k) -> const std::vector<Real>& { return P.g(k); });
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        Real w = dw[a * d + b], j = dj[a * d + b], gg = dg[a * d + b];
        for (int e = 0; e < d; ++e) {
          w -= Gm[I3(e, c, a)] * wc[e * d + b] + Gm[I3(e, c, b)] * wc[a * d + e];
          j += Gm[I3(a, c, e)] * jc[e * d + b] - Gm[I3(e, c, b)] * jc[a * d + e];
          gg -= Gm[I3(e, c, a)] * gc[e * d + b] + Gm[I3(e, c, b)] * gc[a * d + e];
        }
        nomega[I3(c, a, b)] = w;
        nJ[I3(c, a, b)] = j;
        if (real_abs(gg) > compat) compat = real_abs(gg);
      }
  }
  out.metric_compatibility = static_cast<double>(compat);
  out.nabla_omega = to_frame(to_tensor<3>(nomega, d));
  {
    // Mixed slot a is contravariant: transform it with the inverse frame.
    Tensor<3> t = to_tensor<3>(nJ, d);
    t = t.pullback_slot(0, [&F](int a, int i) { return F(a, i); });
    t = t.pullback_slot(2, [&F](int a, int i) { return F(a, i); });
    t = t.pullback_slot(1, [&Finv](int a, int i) { return Finv(i, a); });
    out.nabla_J = t;
  }

  const auto& sc = P.scalars(o);
  out.tau = static_cast<double>(sc.tau);
  out.tau_star = static_cast<double>(sc.tau_star);
  out.nu = static_cast<double>(sc.nu);
  {
    Tensor<2> q(d);
    for (int i = 0; i < d * d; ++i) q.data()[i] = static_cast<double>(sc.Q[i]);
    q = to_frame(q);
    Matrix m(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) m(a, b) = q(a, b);
    out.Q = Bilinear(m);
  }

  if (!opt.curvature_derivatives) return out;
  out.has_curvature_derivatives = true;
  const int d4 = d * d * d * d;
  std::vector<Real> nR(d * d4), nQ(d * d * d);
  Vector dnu(d), dtau(d);
  for (int e = 0; e < d; ++e) {
    const auto dR = P.diff(o, e, [&](const std::string& k) -> const std::vector<Real>& { return P.riemann(k); });
    auto I4 = [d](int a, int b, int c, int w) { return ((a * d + b) * d + c) * d + w; };
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        for (int c = 0; c < d; ++c)
          for (int w = 0; w < d; ++w) {
            Real acc = dR[I4(a, b, c, w)];
            for (int f = 0; f < d; ++f)
              acc -= Gm[I3(f, e, a)] * Rc[I4(f, b, c, w)] + Gm[I3(f, e, b)] * Rc[I4(a, f, c, w)] +
                     Gm[I3(f, e, c)] * Rc[I4(a, b, f, w)] + Gm[I3(f, e, w)] * Rc[I4(a, b, c, f)];
            nR[e * d4 + I4(a, b, c, w)] = acc;
          }
    const auto dQ =
        P.diff(o, e, [&](const std::string& k) -> const std::vector<Real>& { return P.scalars(k).Q; });
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        Real acc = dQ[a * d + b];
        for (int f = 0; f < d; ++f) acc -= Gm[I3(f, e, a)] * sc.Q[f * d + b] + Gm[I3(f, e, b)] * sc.Q[a * d + f];
        nQ[I3(e, a, b)] = acc;
      }
    dnu(e) = static_cast<double>(P.diff_scalar(o, e, [&](const std::string& k) { return P.scalars(k).nu; }));
    dtau(e) = static_cast<double>(P.diff_scalar(o, e, [&](const std::string& k) { return P.scalars(k).tau; }));
  }
  out.nabla_R = to_frame(to_tensor<5>(nR, d));
  out.nabla_Q = to_frame(to_tensor<3>(nQ, d));
  out.dnu = F.transpose() * dnu;
  out.dtau = F.transpose() * dtau;
  return out;
}

}  // namespace

int stencil_reach(int order) { return 3 * (order / 2); }

JetPoint jet(const Chart& chart, const Vector& point, const JetOptions& opt) {
  if (!(opt.h > 0) || !std::isfinite(opt.h)) throw Error(ErrorCode::BadParams, "step h must be positive");
  if (opt.order != 2 && opt.order != 4) throw Error(ErrorCode::BadParams, "stencil order must be 2 or 4");
  if (point.size() != chart.dim())
    throw Error(ErrorCode::OutOfDomain, "point has dimension " + std::to_string(point.size()) + ", chart has " +
                                            std::to_string(chart.dim()));
  const double m = chart.margin(point);
  if (!(m > 0)) throw Error(ErrorCode::OutOfDomain, "point outside the domain of chart '" + chart.name + "'");
  const double need = stencil_reach(opt.order) * opt.h;
  if (m < need) {
    std::ostringstream os;
    os << "boundary distance " << m << " is below the stencil reach " << need;
    throw Error(ErrorCode::StepTooLarge, os.str());
  }
  if (opt.corrupt_gamma) {
    const auto& c = *opt.corrupt_gamma;
    for (int i : {c.a, c.b, c.c})
      if (i < 0 || i >= chart.dim()) throw Error(ErrorCode::BadParams, "corruption index out of range");
  }
  return opt.precision == Precision::Quad ? run_jet<Quad>(chart, point, opt) : run_jet<double>(chart, point, opt);
}

Matrix nabla_j_matrix(const Tensor<3>& nJ, int v) {
  const int d = nJ.dim();
  Matrix m(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) m(a, b) = nJ(v, a, b);
  return m;
}

double nabla_j_norm(const JetPoint& jet) { return jet.nabla_J.max_abs(); }

AlmostKahlerResiduals almost_kahler_residuals(const JetPoint& jet) {
  const Tensor<3>& A = jet.nabla_omega;
  const Tensor<3>& NJ = jet.nabla_J;
  const Matrix& J = jet.space.J_frame;
  const int d = A.dim();
  AlmostKahlerResiduals r{0, 0, 0};
  for (int v = 0; v < d; ++v)
    for (int x = 0; x < d; ++x)
      for (int y = 0; y < d; ++y) r.r_1_8 = std::max(r.r_1_8, std::abs(A(v, x, y) + A(x, y, v) + A(y, v, x)));
  // (nabla_X J) Y + (nabla_{JX} J) J Y, component a, for X = e_x, Y = e_y.
  for (int x = 0; x < d; ++x)
    for (int y = 0; y < d; ++y)
      for (int a = 0; a < d; ++a) {
        double acc = NJ(x, a, y);
        for (int k = 0; k < d; ++k) {
          if (J(k, x) == 0.0) continue;
          for (int b = 0; b < d; ++b) acc += J(k, x) * NJ(k, a, b) * J(b, y);
        }
        r.r_1_9 = std::max(r.r_1_9, std::abs(acc));
      }
  for (int a = 0; a < d; ++a) {
    double acc = 0;
    for (int i = 0; i < d; ++i) acc += NJ(i, a, i);
    r.r_1_10 = std::max(r.r_1_10, std::abs(acc));
  }
  return r;
}

double second_bianchi_residual(const JetPoint& jet) {
  const Tensor<5>& D = jet.nabla_R;
  const int d = D.dim();
  double worst = 0;
  for (int v = 0; v < d; ++v)
    for (int x = 0; x < d; ++x)
      for (int y = 0; y < d; ++y)
        for (int z = 0; z < d; ++z)
          for (int w = 0; w < d; ++w)
            worst = std::max(worst, std::abs(D(v, x, y, z, w) + D(x, y, v, z, w) + D(y, v, x, z, w)));
  return worst;
}

double bianchi_noise_floor(const JetPoint& jet) {
  const double eps_floor = 64 * std::numeric_limits<double>::epsilon() * std::max(1.0, jet.R.max_abs());
  return std::max(jet.has_curvature_derivatives ? second_bianchi_residual(jet) : 0.0, eps_floor);
}

double omega_j_consistency(const JetPoint& jet) {
  const int d = jet.nabla_omega.dim();
  double worst = 0;
  for (int v = 0; v < d; ++v)
    for (int x = 0; x < d; ++x)
      for (int y = 0; y < d; ++y) worst = std::max(worst, std::abs(jet.nabla_omega(v, x, y) - jet.nabla_J(v, y, x)));
  return worst;
}

Tensor<3> nabla_q_from_curvature(const HermitianSpace& space, const Curv4& R, const Tensor<5>& DR,
                                 const Tensor<3>& NJ) {
  const int d = space.dim();
  const int n = space.n;
  const Matrix& J = space.J_frame;
  auto jv = [&](int a, int b) { return J(a, b); };
  Tensor<3> out(d);
  // Per direction v: DT = nabla_v (R - L3 R) with the product rule through J in
  // every slot, then nabla_v rho*(T) picks up nabla J in the two J slots.
  for (int v = 0; v < d; ++v) {
    const Matrix DJ = nabla_j_matrix(NJ, v);
    Tensor<4> DRv(d);
    DRv.for_each_index([&](const std::array<int, 4>& i, const double&) { DRv.at(i) = DR(v, i[0], i[1], i[2], i[3]); });
    Tensor<4> DL = DRv.pullback(jv);
    for (int slot = 0; slot < 4; ++slot) {
      Tensor<4> t = R;
      for (int s = 0; s < 4; ++s) {
        if (s == slot)
          t = t.pullback_slot(s, [&DJ](int a, int b) { return DJ(a, b); });
        else
          t = t.pullback_slot(s, jv);
      }
      DL += t;
    }
    const Tensor<4> DT = DRv - DL;
    const Tensor<4> T = R - l3(space, R);
    for (int x = 0; x < d; ++x)
      for (int y = 0; y < d; ++y) {
        double rho = 0, rs = 0;
        for (int i = 0; i < d; ++i) {
          rho += DRv(i, x, i, y);
          for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
              rs += DT(x, i, a, b) * J(a, y) * J(b, i);
              rs += T(x, i, a, b) * (DJ(a, y) * J(b, i) + J(a, y) * DJ(b, i));
            }
        }
        out(v, x, y) = rho / 6.0 + rs / (4.0 * (n + 1));
      }
  }
  return out;
}

}  // namespace curvlab
