#pragma once

// Perturbed (2,1) ADHM vortex equations on the flat torus C / Z^2 with U(1)
// gauge group and deg W = 0, in the extended form carrying the extra field
// zeta. Fields are trigonometric polynomials e^{2 pi i (m x + n y)} with
// |m|, |n| <= N/2; c is the (0,1) part of the connection form
// a = c dzbar - conj(c) dz, alpha is a row in C^2 (charge +1), beta a column
// in C^2 (charge -1), and P in M_2(C) the homogeneous perturbation acting by
// alpha -> alpha P, beta -> -P beta.
//
//   F1 = dbar alpha + c alpha + alpha P + zeta beta^*        = 0
//   F2 = dbar beta  - c beta  - P beta  + zeta alpha^*       = 0
//   F3 = d zeta + alpha beta - eta_C                         = 0
//   F4 = 4 d c + |alpha|^2 - |beta|^2 - (eta_R + top)        = 0
//
// Re F4 is the curvature equation and Im F4 the Coulomb condition; the
// constant mode of Im F4 vanishes identically and is replaced by fixing the
// phase of the mean of alpha.

#include "core.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>
#include <array>
#include <functional>
#include <optional>
#include <nlohmann/json.hpp>

namespace crlab::vortex {

// ------------------------------------------------------------------ fields

struct Field {
  int K = 0;  // modes |m|, |n| <= K
  CMat a;     // a(m + K, n + K)

  Field() : a(CMat::Zero(1, 1)) {}
  explicit Field(int k) : K(k), a(CMat::Zero(2 * k + 1, 2 * k + 1)) {}

  static Field constant(int k, cplx v) {
    Field f(k);
    f.a(k, k) = v;
    return f;
  }

  cplx at(int m, int n) const {
    if (std::abs(m) > K || std::abs(n) > K) return 0;
    return a(m + K, n + K);
  }
  cplx& ref(int m, int n) { return a(m + K, n + K); }

  double norm() const { return a.norm(); }  // L2 on the unit torus

  Field conj() const {
    Field f(K);
    for (int m = -K; m <= K; ++m)
      for (int n = -K; n <= K; ++n) f.ref(m, n) = std::conj(at(-m, -n));
    return f;
  }

  Field resized(int k) const {
    Field f(k);
    int w = std::min(k, K);
    for (int m = -w; m <= w; ++m)
      for (int n = -w; n <= w; ++n) f.ref(m, n) = at(m, n);
    return f;
  }

  cplx eval(double x, double y) const {
    cplx s = 0;
    for (int m = -K; m <= K; ++m)
      for (int n = -K; n <= K; ++n)
        if (at(m, n) != cplx(0)) s += at(m, n) * std::exp(2 * pi * I * (m * x + n * y));
    return s;
  }
};

inline Field operator+(const Field& f, const Field& g) {
  int k = std::max(f.K, g.K);
  Field h = f.resized(k);
  h.a += g.resized(k).a;
  return h;
}
inline Field operator-(const Field& f, const Field& g) {
  int k = std::max(f.K, g.K);
  Field h = f.resized(k);
  h.a -= g.resized(k).a;
  return h;
}
inline Field operator*(cplx s, const Field& f) {
  Field h = f;
  h.a *= s;
  return h;
}

// Full product of two trigonometric polynomials (no truncation).
inline Field product(const Field& f, const Field& g) {
  Field h(f.K + g.K);
  for (int m = -f.K; m <= f.K; ++m)
    for (int n = -f.K; n <= f.K; ++n) {
      cplx x = f.at(m, n);
      if (x == cplx(0)) continue;
      for (int p = -g.K; p <= g.K; ++p)
        for (int q = -g.K; q <= g.K; ++q) h.ref(m + p, n + q) += x * g.at(p, q);
    }
  return h;
}

// Symbols of d/dzbar and d/dz on e^{2 pi i (m x + n y)}.
inline cplx dbar_symbol(int m, int n) { return pi * I * cplx(m, n); }
inline cplx d_symbol(int m, int n) { return pi * I * cplx(m, -n); }

inline Field apply_symbol(const Field& f, cplx (*sym)(int, int), cplx scale = 1) {
  Field h(f.K);
  for (int m = -f.K; m <= f.K; ++m)
    for (int n = -f.K; n <= f.K; ++n) h.ref(m, n) = scale * sym(m, n) * f.at(m, n);
  return h;
}

// ---------------------------------------------------------------- problem

enum class VortexCase { adhm21, adhm12_abelian };

struct VortexProblem {
  VortexCase kind = VortexCase::adhm21;
  int N = 8;  // modes |m|, |n| <= N / 2
  CMat P = CMat::Zero(2, 2);
  cplx eta_c = 0;  // coefficient of dz
  double eta_r = 0;
  int degree = 0;  // deg W for (2,1), deg H for the (1,2) harness

  int K() const { return N / 2; }

  // eta_R + 2 pi deg W, or eta_R + pi deg H for the (1,2) harness.
  double level() const {
    return eta_r + (kind == VortexCase::adhm21 ? 2 * pi : pi) * degree;
  }

  void validate() const {
    require(N >= 2 && N % 2 == 0, "truncation N must be a positive even integer", ErrorKind::usage);
    require(P.rows() == 2 && P.cols() == 2, "perturbation must be a 2x2 matrix", ErrorKind::usage);
    require(degree == 0, "only the flat background deg = 0 is implemented", ErrorKind::usage);
  }

  bool irreducibility_possible() const { return eta_r != 0 || eta_c != cplx(0); }
};

struct VortexState {
  Field c, zeta;
  std::array<Field, 2> alpha, beta;

  static VortexState zero(int K) {
    VortexState s;
    s.c = s.zeta = Field(K);
    s.alpha = {Field(K), Field(K)};
    s.beta = {Field(K), Field(K)};
    return s;
  }

  int K() const { return c.K; }

  double matter_norm() const {
    return std::sqrt(std::pow(alpha[0].norm(), 2) + std::pow(alpha[1].norm(), 2) + std::pow(beta[0].norm(), 2) +
                     std::pow(beta[1].norm(), 2));
  }
  double norm() const {
    return std::sqrt(std::pow(matter_norm(), 2) + std::pow(c.norm(), 2) + std::pow(zeta.norm(), 2));
  }
};

// ------------------------------------------------------------- residuals

struct ResidualFields {
  std::array<Field, 2> f1, f2;
  Field f3, f4;
};

inline ResidualFields residual_fields(const VortexProblem& p, const VortexState& s) {
  ResidualFields r;
  std::array<Field, 2> ac{s.alpha[0].conj(), s.alpha[1].conj()}, bc{s.beta[0].conj(), s.beta[1].conj()};
  for (int j = 0; j < 2; ++j) {
    Field f = apply_symbol(s.alpha[j], dbar_symbol) + product(s.c, s.alpha[j]) + product(s.zeta, bc[j]);
    for (int i = 0; i < 2; ++i) f = f + p.P(i, j) * s.alpha[i];
    r.f1[j] = f;
    Field g = apply_symbol(s.beta[j], dbar_symbol) - product(s.c, s.beta[j]) + product(s.zeta, ac[j]);
    for (int i = 0; i < 2; ++i) g = g - p.P(j, i) * s.beta[i];
    r.f2[j] = g;
  }
  r.f3 = apply_symbol(s.zeta, d_symbol) + product(s.alpha[0], s.beta[0]) + product(s.alpha[1], s.beta[1]) -
         Field::constant(0, p.eta_c);
  r.f4 = apply_symbol(s.c, d_symbol, 4.0) + product(s.alpha[0], ac[0]) + product(s.alpha[1], ac[1]) -
         product(s.beta[0], bc[0]) - product(s.beta[1], bc[1]) - Field::constant(0, p.level());
  return r;
}

struct ResidualNorms {
  double dirac = 0;      // F1, F2
  double mu_c = 0;       // F3
  double curvature = 0;  // Re F4
  double gauge = 0;      // Im F4 (Coulomb condition)
  double total() const { return std::sqrt(dirac * dirac + mu_c * mu_c + curvature * curvature + gauge * gauge); }
};

inline ResidualNorms vortex_residual(const VortexProblem& p, const VortexState& s) {
  p.validate();
  auto r = residual_fields(p, s);
  ResidualNorms out;
  out.dirac = std::sqrt(std::pow(r.f1[0].norm(), 2) + std::pow(r.f1[1].norm(), 2) + std::pow(r.f2[0].norm(), 2) +
                        std::pow(r.f2[1].norm(), 2));
  out.mu_c = r.f3.norm();
  // real and imaginary parts of the function F4
  Field fc = r.f4.conj();
  Field re = 0.5 * (r.f4 + fc), im = cplx(0, -0.5) * (r.f4 - fc);
  out.curvature = re.norm();
  out.gauge = im.norm();
  return out;
}

// Pointwise evaluation of the same equations at (x, y), for cross-checks.
struct PointResidual {
  std::array<cplx, 2> f1, f2;
  cplx f3, f4;
};

inline PointResidual point_residual(const VortexProblem& p, const VortexState& s, double x, double y) {
  PointResidual r;
  cplx c = s.c.eval(x, y), z = s.zeta.eval(x, y);
  std::array<cplx, 2> a{s.alpha[0].eval(x, y), s.alpha[1].eval(x, y)};
  std::array<cplx, 2> b{s.beta[0].eval(x, y), s.beta[1].eval(x, y)};
  for (int j = 0; j < 2; ++j) {
    cplx da = apply_symbol(s.alpha[j], dbar_symbol).eval(x, y);
    cplx db = apply_symbol(s.beta[j], dbar_symbol).eval(x, y);
    r.f1[j] = da + c * a[j] + p.P(0, j) * a[0] + p.P(1, j) * a[1] + z * std::conj(b[j]);
    r.f2[j] = db - c * b[j] - p.P(j, 0) * b[0] - p.P(j, 1) * b[1] + z * std::conj(a[j]);
  }
  r.f3 = apply_symbol(s.zeta, d_symbol).eval(x, y) + a[0] * b[0] + a[1] * b[1] - p.eta_c;
  r.f4 = apply_symbol(s.c, d_symbol, 4.0).eval(x, y) + std::norm(a[0]) + std::norm(a[1]) - std::norm(b[0]) -
         std::norm(b[1]) - p.level();
  return r;
}

// Gauge transformation e^{2 pi i (k x + l y) + i theta0}: alpha -> u alpha,
// beta -> conj(u) beta, c -> c - u^{-1} dbar u.
inline VortexState gauge_transform(const VortexState& s, int k, int l, double theta0) {
  VortexState t = s;
  int K = s.K();
  auto shift = [&](const Field& f, int sk, int sl, cplx ph) {
    Field g(K);
    for (int m = -K; m <= K; ++m)
      for (int n = -K; n <= K; ++n) {
        cplx v = f.at(m - sk, n - sl);
        g.ref(m, n) = ph * v;
      }
    return g;
  };
  cplx ph = std::exp(I * theta0);
  for (int j = 0; j < 2; ++j) {
    t.alpha[j] = shift(s.alpha[j], k, l, ph);
    t.beta[j] = shift(s.beta[j], -k, -l, std::conj(ph));
  }
  t.c.ref(0, 0) -= dbar_symbol(k, l);
  return t;
}

// ------------------------------------------------------- unknown layout

// Per mode: [c, alpha_1, alpha_2, beta_1, beta_2, zeta]; equations per mode:
// [F4, F1_1, F1_2, F2_1, F2_2, F3].
struct Layout {
  int K;
  int side() const { return 2 * K + 1; }
  int modes() const { return side() * side(); }
  int mode(int m, int n) const { return (m + K) * side() + (n + K); }
  Eigen::Index complex_dim() const { return Eigen::Index(6) * modes(); }
  Eigen::Index real_dim() const { return 2 * complex_dim(); }
  Eigen::Index cidx(int m, int n, int slot) const { return Eigen::Index(6) * mode(m, n) + slot; }
  // real row replaced by the phase condition
  Eigen::Index phase_row() const { return 2 * cidx(0, 0, 0) + 1; }
};

enum Slot { sC = 0, sA1 = 1, sA2 = 2, sB1 = 3, sB2 = 4, sZ = 5 };

inline RVec state_to_vector(const VortexState& s) {
  Layout L{s.K()};
  CVec v(L.complex_dim());
  for (int m = -L.K; m <= L.K; ++m)
    for (int n = -L.K; n <= L.K; ++n) {
      v(L.cidx(m, n, sC)) = s.c.at(m, n);
      v(L.cidx(m, n, sA1)) = s.alpha[0].at(m, n);
      v(L.cidx(m, n, sA2)) = s.alpha[1].at(m, n);
      v(L.cidx(m, n, sB1)) = s.beta[0].at(m, n);
      v(L.cidx(m, n, sB2)) = s.beta[1].at(m, n);
      v(L.cidx(m, n, sZ)) = s.zeta.at(m, n);
    }
  return to_real(v);
}

inline VortexState vector_to_state(const RVec& x, int K) {
  Layout L{K};
  CVec v = to_complex(x);
  VortexState s = VortexState::zero(K);
  for (int m = -K; m <= K; ++m)
    for (int n = -K; n <= K; ++n) {
      s.c.ref(m, n) = v(L.cidx(m, n, sC));
      s.alpha[0].ref(m, n) = v(L.cidx(m, n, sA1));
      s.alpha[1].ref(m, n) = v(L.cidx(m, n, sA2));
      s.beta[0].ref(m, n) = v(L.cidx(m, n, sB1));
      s.beta[1].ref(m, n) = v(L.cidx(m, n, sB2));
      s.zeta.ref(m, n) = v(L.cidx(m, n, sZ));
    }
  return s;
}

// Phase reference: the mean of alpha (or e_1 when alpha has mean zero).
inline CVec phase_reference(const VortexState& s) {
  CVec r(2);
  r << s.alpha[0].at(0, 0), s.alpha[1].at(0, 0);
  if (r.norm() < 1e-12) r << 1, 0;
  return r / r.norm();
}

inline double phase_condition(const VortexState& s, const CVec& ref) {
  cplx v = std::conj(ref(0)) * s.alpha[0].at(0, 0) + std::conj(ref(1)) * s.alpha[1].at(0, 0);
  return v.imag();
}

// Galerkin residual on |m|, |n| <= K with the phase row.
inline RVec galerkin_residual(const VortexProblem& p, const VortexState& s, const CVec& ref) {
  auto r = residual_fields(p, s);
  Layout L{s.K()};
  CVec v(L.complex_dim());
  for (int m = -L.K; m <= L.K; ++m)
    for (int n = -L.K; n <= L.K; ++n) {
      v(L.cidx(m, n, 0)) = r.f4.at(m, n);
      v(L.cidx(m, n, 1)) = r.f1[0].at(m, n);
      v(L.cidx(m, n, 2)) = r.f1[1].at(m, n);
      v(L.cidx(m, n, 3)) = r.f2[0].at(m, n);
      v(L.cidx(m, n, 4)) = r.f2[1].at(m, n);
      v(L.cidx(m, n, 5)) = r.f3.at(m, n);
    }
  RVec x = to_real(v);
  x(L.phase_row()) = phase_condition(s, ref);
  return x;
}

// ---------------------------------------------------------------- Jacobian

// Scales for the homotopy L_t: coupling terms Gamma_Psi, Gamma_Psi^* and the
// perturbation P are multiplied by t; derivative terms, the connection
// coupling and the gauge rows are not.
struct HomotopyScale {
  double gamma = 1;
  double upsilon = 1;
};

inline RSparse jacobian(const VortexProblem& p, const VortexState& s, const CVec& ref, HomotopyScale hs = {}) {
  const int K = s.K();
  Layout L{K};
  Triplets t;
  auto lin = [&](int em, int en, int eq, int um, int un, int slot, cplx v) {
    if (v == cplx(0)) return;
    push_linear(t, L.cidx(em, en, eq), L.cidx(um, un, slot), v);
  };
  auto anti = [&](int em, int en, int eq, int um, int un, int slot, cplx v) {
    if (v == cplx(0)) return;
    push_antilinear(t, L.cidx(em, en, eq), L.cidx(um, un, slot), v);
  };
  const double g = hs.gamma, u = hs.upsilon;
  const std::array<int, 2> sa{sA1, sA2}, sb{sB1, sB2};
  for (int pm = -K; pm <= K; ++pm)
    for (int pn = -K; pn <= K; ++pn) {
      // derivative terms
      lin(pm, pn, 0, pm, pn, sC, 4.0 * d_symbol(pm, pn));
      lin(pm, pn, 5, pm, pn, sZ, d_symbol(pm, pn));
      for (int j = 0; j < 2; ++j) {
        lin(pm, pn, 1 + j, pm, pn, sa[j], dbar_symbol(pm, pn));
        lin(pm, pn, 3 + j, pm, pn, sb[j], dbar_symbol(pm, pn));
        for (int i = 0; i < 2; ++i) {
          lin(pm, pn, 1 + j, pm, pn, sa[i], u * p.P(i, j));
          lin(pm, pn, 3 + j, pm, pn, sb[i], -u * p.P(j, i));
        }
      }
      for (int qm = -K; qm <= K; ++qm)
        for (int qn = -K; qn <= K; ++qn) {
          int dm = pm - qm, dn = pn - qn;  // for linear convolution coefficients
          int sm = pm + qm, sn = pn + qn;  // for antilinear ones
          cplx cd = s.c.at(dm, dn), zs = s.zeta.at(sm, sn);
          for (int j = 0; j < 2; ++j) {
            cplx ad = s.alpha[j].at(dm, dn), bd = s.beta[j].at(dm, dn);
            cplx as = s.alpha[j].at(sm, sn), bs = s.beta[j].at(sm, sn);
            cplx acd = std::conj(s.alpha[j].at(-dm, -dn)), bcd = std::conj(s.beta[j].at(-dm, -dn));
            // F1_j: c alpha_j + zeta conj(beta_j)
            lin(pm, pn, 1 + j, qm, qn, sa[j], cd);
            lin(pm, pn, 1 + j, qm, qn, sC, g * ad);
            lin(pm, pn, 1 + j, qm, qn, sZ, g * bcd);
            anti(pm, pn, 1 + j, qm, qn, sb[j], zs);
            // F2_j: -c beta_j + zeta conj(alpha_j)
            lin(pm, pn, 3 + j, qm, qn, sb[j], -cd);
            lin(pm, pn, 3 + j, qm, qn, sC, -g * bd);
            lin(pm, pn, 3 + j, qm, qn, sZ, g * acd);
            anti(pm, pn, 3 + j, qm, qn, sa[j], zs);
            // F3: alpha_j beta_j
            lin(pm, pn, 5, qm, qn, sa[j], g * bd);
            lin(pm, pn, 5, qm, qn, sb[j], g * ad);
            // F4: |alpha_j|^2 - |beta_j|^2
            lin(pm, pn, 0, qm, qn, sa[j], g * acd);
            anti(pm, pn, 0, qm, qn, sa[j], g * as);
            lin(pm, pn, 0, qm, qn, sb[j], -g * bcd);
            anti(pm, pn, 0, qm, qn, sb[j], -g * bs);
          }
        }
    }
  // phase row
  const Eigen::Index pr = L.phase_row();
  Triplets kept;
  kept.reserve(t.size() + 4);
  for (const auto& e : t)
    if (e.row() != pr) kept.push_back(e);
  for (int j = 0; j < 2; ++j) {
    Eigen::Index col = 2 * L.cidx(0, 0, sa[j]);
    // Im(conj(r) (x + i y)) = r_re y - r_im x
    kept.emplace_back(pr, col, -ref(j).imag());
    kept.emplace_back(pr, col + 1, ref(j).real());
  }
  RSparse J(L.real_dim(), L.real_dim());
  J.setFromTriplets(kept.begin(), kept.end());
  return J;
}

// -------------------------------------------------------- linear algebra

struct Factored {
  Eigen::PartialPivLU<RMat> lu;
  double norm = 0;
};

// Smallest singular value estimate by inverse iteration on J^T J.
inline double sigma_min_lu(const Eigen::PartialPivLU<RMat>& lu, Eigen::Index n, int iters = 30) {
  RVec x = RVec::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) += 0.1 * std::sin(0.7 * i);
  x.normalize();
  double s = 0;
  for (int k = 0; k < iters; ++k) {
    RVec y = lu.solve(x);
    RVec z = lu.transpose().solve(y);
    double nz = z.norm();
    if (!std::isfinite(nz) || nz == 0) return 0;
    s = 1 / std::sqrt(nz);
    x = z / nz;
  }
  return s;
}

// ------------------------------------------------------------ constants

// Constant solution built on eigenvalue `which` of P: alpha = a l, beta = b r
// with l P = lambda l, P r = lambda r, c = -lambda, zeta = 0, and
// |a|^2 - |b|^2 = level, a b (l r) = eta_C.
inline VortexState constant_solution(const VortexProblem& p, int which = 0) {
  p.validate();
  require(which == 0 || which == 1, "eigenvalue index must be 0 or 1", ErrorKind::usage);
  Eigen::ComplexEigenSolver<CMat> right(p.P), left(CMat(p.P.transpose()));
  cplx lambda = right.eigenvalues()(which);
  CVec r = right.eigenvectors().col(which);
  Eigen::Index li;
  (left.eigenvalues().array() - lambda).abs().minCoeff(&li);
  require(std::abs(left.eigenvalues()(li) - lambda) < 1e-9 * (1 + std::abs(lambda)),
          "left and right eigenvalues do not match");
  require(std::abs(right.eigenvalues()(0) - right.eigenvalues()(1)) > 1e-8,
          "perturbation P must have simple eigenvalues", ErrorKind::degenerate);
  CVec l = left.eigenvectors().col(li);
  l.normalize();
  r.normalize();
  cplx lr = (l.transpose() * r)(0, 0);
  double level = p.level();
  double s = std::abs(p.eta_c) / std::abs(lr);
  double a2 = 0.5 * (level + std::sqrt(level * level + 4 * s * s));
  double b2 = a2 - level;
  double a = std::sqrt(std::max(a2, 0.0));
  cplx b = 0;
  if (a > 0)
    b = p.eta_c / (a * lr);
  else
    b = std::sqrt(std::max(b2, 0.0));
  VortexState st = VortexState::zero(p.K());
  st.c.ref(0, 0) = -lambda;
  for (int j = 0; j < 2; ++j) {
    st.alpha[j].ref(0, 0) = a * l(j);
    st.beta[j].ref(0, 0) = b * r(j);
  }
  return st;
}

// ------------------------------------------------------------------ Newton

struct NewtonOptions {
  int max_iter = 30;
  double tol = 1e-8;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 20;
  double obstruction_tol = 1e-10;
};

struct NewtonStep {
  int iter;
  double residual;
  double step;
};

struct SolveResult {
  VortexState state;
  bool converged = false;
  std::vector<NewtonStep> history;
  double sigma_min = 0;  // at the final iterate
  double moved = 0;      // |x - x0| / max(1, |x0|)
  bool alpha_branch = true;
};

inline SolveResult solve_vortex(const VortexProblem& p, const VortexState& initial, const NewtonOptions& opt = {}) {
  p.validate();
  require(initial.K() == p.K(), "initial state truncation differs from the problem", ErrorKind::usage);
  CVec ref = phase_reference(initial);
  const int K = p.K();
  RVec x0 = state_to_vector(initial), x = x0;
  SolveResult res;
  auto resid = [&](const RVec& v) { return galerkin_residual(p, vector_to_state(v, K), ref); };
  RVec r = resid(x);
  double phi = r.squaredNorm();
  res.history.push_back({0, std::sqrt(phi), 0.0});
  {
    RMat J(jacobian(p, initial, ref));
    Eigen::PartialPivLU<RMat> lu(J);
    double smin = sigma_min_lu(lu, J.rows());
    if (smin < opt.obstruction_tol)
      fail(ErrorKind::degenerate, "linearization at the initial state is singular (sigma_min = " +
                                      std::to_string(smin) + "): obstructed or reducible point");
  }
  for (int it = 1; it <= opt.max_iter && std::sqrt(phi) > opt.tol; ++it) {
    RMat J(jacobian(p, vector_to_state(x, K), ref));
    Eigen::PartialPivLU<RMat> lu(J);
    double smin = sigma_min_lu(lu, J.rows());
    if (smin < opt.obstruction_tol)
      fail(ErrorKind::degenerate, "Newton system is singular (sigma_min = " + std::to_string(smin) +
                                      "): obstructed or reducible point");
    RVec dx = lu.solve(-r);
    double a = 1;
    RVec xn;
    RVec rn;
    double phin = 0;
    int k = 0;
    for (; k <= opt.max_backtracks; ++k) {
      xn = x + a * dx;
      rn = resid(xn);
      phin = rn.squaredNorm();
      if (phin <= (1 - 2 * opt.armijo * a) * phi) break;
      a *= opt.backtrack;
    }
    if (k > opt.max_backtracks) break;
    x = xn;
    r = rn;
    phi = phin;
    res.history.push_back({it, std::sqrt(phi), a});
  }
  res.converged = std::sqrt(phi) <= opt.tol;
  res.state = vector_to_state(x, K);
  {
    RMat J(jacobian(p, res.state, ref));
    Eigen::PartialPivLU<RMat> lu(J);
    res.sigma_min = sigma_min_lu(lu, J.rows());
  }
  res.moved = (x - x0).norm() / std::max(1.0, x0.norm());
  double an = std::hypot(res.state.alpha[0].norm(), res.state.alpha[1].norm());
  double bn = std::hypot(res.state.beta[0].norm(), res.state.beta[1].norm());
  res.alpha_branch = an >= bn;
  return res;
}

inline VortexState perturbed(const VortexState& s, double size, Rng& rng) {
  RVec x = state_to_vector(s);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += size * rng.normal();
  return vector_to_state(x, s.K());
}

// ------------------------------------------------------- extra field check

struct ZetaReport {
  double dbar_zeta = 0;
  double rho_zeta_psi = 0;
  double zeta_norm = 0;
  bool reducible = false;
  bool vanishes = false;  // meaningful only when irreducible
  std::string note;
};

inline ZetaReport zeta_vanishing_check(const VortexProblem& p, const VortexState& s, double tol = 1e-8) {
  auto rn = vortex_residual(p, s);
  require(rn.dirac + rn.mu_c + rn.curvature <= 1e3 * tol,
          "state does not solve the extended system (residual " + std::to_string(rn.total()) + ")");
  ZetaReport z;
  z.dbar_zeta = apply_symbol(s.zeta, dbar_symbol).norm();
  double acc = 0;
  for (int j = 0; j < 2; ++j)
    acc += std::pow(product(s.zeta, s.alpha[j]).norm(), 2) + std::pow(product(s.zeta, s.beta[j]).norm(), 2);
  z.rho_zeta_psi = std::sqrt(acc);
  z.zeta_norm = s.zeta.norm();
  z.reducible = s.matter_norm() < 1e-12;
  if (z.reducible) {
    z.note = "reducible configuration: the stabilizer is nontrivial and zeta need not vanish";
    z.vanishes = false;
  } else {
    z.vanishes = z.zeta_norm <= 1e-7 * (1 + s.matter_norm());
  }
  return z;
}

// ---------------------------------------------------- deformation operator

struct DeformationOperator {
  RSparse matrix;
  Layout layout;
  double sigma_min = 0;
  double sigma_max = 0;
  bool square = false;
  double antilinear_fraction = 0;  // size of the C-antilinear part
  std::string method;
};

// Complex structure on the realified unknowns (multiplication by i).
inline RSparse complex_structure(Eigen::Index real_dim) {
  Triplets t;
  for (Eigen::Index k = 0; k < real_dim / 2; ++k) {
    t.emplace_back(2 * k, 2 * k + 1, -1.0);
    t.emplace_back(2 * k + 1, 2 * k, 1.0);
  }
  RSparse J(real_dim, real_dim);
  J.setFromTriplets(t.begin(), t.end());
  return J;
}

// C-antilinear part (A + J A J) / 2.
inline RSparse antilinear_part(const RSparse& A) {
  RSparse Jc = complex_structure(A.rows());
  RSparse B = Jc * A * Jc;
  return RSparse(0.5 * (A + B));
}

inline double sigma_min_dense_or_sparse(const RSparse& M, std::string& method) {
  if (M.rows() <= 1600) {
    method = "dense-svd";
    Eigen::BDCSVD<RMat> svd((RMat(M)));
    return svd.singularValues().minCoeff();
  }
  method = "sparse-inverse-iteration";
  Eigen::SparseLU<RSparse> lu;
  lu.compute(M);
  if (lu.info() != Eigen::Success) return 0;
  RVec x = RVec::Ones(M.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += 0.1 * std::sin(0.7 * i);
  x.normalize();
  double s = 0;
  for (int k = 0; k < 60; ++k) {
    RVec y = lu.solve(x);
    RVec z = lu.transpose().solve(y);
    double nz = z.norm();
    if (!std::isfinite(nz) || nz == 0) return 0;
    s = 1 / std::sqrt(nz);
    x = z / nz;
  }
  return s;
}

inline DeformationOperator deformation_operator(const VortexProblem& p, const VortexState& s,
                                                HomotopyScale hs = {}) {
  DeformationOperator d{jacobian(p, s, phase_reference(s), hs), Layout{s.K()}, 0, 0, false, 0, {}};
  d.square = d.matrix.rows() == d.matrix.cols();
  d.sigma_min = sigma_min_dense_or_sparse(d.matrix, d.method);
  RVec x = RVec::Ones(d.matrix.cols()).normalized();
  for (int k = 0; k < 60; ++k) {
    RVec y = d.matrix.transpose() * (d.matrix * x);
    double n = y.norm();
    if (n == 0) break;
    d.sigma_max = std::sqrt(n);
    x = y / n;
  }
  d.antilinear_fraction = antilinear_part(d.matrix).norm() / std::max(1e-300, d.matrix.norm());
  return d;
}

// ---------------------------------------------------- orientation transport

struct TransportOptions {
  int grid = 64;
  double t_min = 1e-3;
  double degeneracy_tol = 1e-10;  // relative to sigma_max
  int bisections = 40;
};

struct TransportReport {
  int sign = 1;
  std::vector<double> crossings;
  std::vector<std::array<double, 3>> trace;  // t, sigma_min, det sign
};

inline int det_sign(const RMat& A, double* smin = nullptr) {
  Eigen::PartialPivLU<RMat> lu(A);
  if (smin) *smin = sigma_min_lu(lu, A.rows());
  double s = lu.permutationP().determinant();
  const auto& U = lu.matrixLU();
  for (Eigen::Index i = 0; i < U.rows(); ++i) {
    if (U(i, i) == 0) return 0;
    if (U(i, i) < 0) s = -s;
  }
  return s > 0 ? 1 : -1;
}

// Orientation transport along t -> L(t) on [t0, t1]: the sign relative to the
// orientation at t0 is (-1)^(number of det sign changes).
inline TransportReport transport_sign(const std::function<RMat(double)>& L, double t0, double t1,
                                      const TransportOptions& opt = {}) {
  TransportReport rep;
  std::vector<double> ts(opt.grid + 1), sm(opt.grid + 1);
  std::vector<int> ds(opt.grid + 1);
  double smax = 0;
  for (int i = 0; i <= opt.grid; ++i) {
    ts[i] = t0 + (t1 - t0) * double(i) / opt.grid;
    RMat A = L(ts[i]);
    ds[i] = det_sign(A, &sm[i]);
    if (i > 0 && i < opt.grid && (ds[i] == 0 || sm[i] < 1e-12 * std::max(1.0, A.norm()))) {
      // grid point lands on a zero: nudge it inside the cell
      ts[i] += 1e-3 * (t1 - t0) / opt.grid;
      A = L(ts[i]);
      ds[i] = det_sign(A, &sm[i]);
    }
    smax = std::max(smax, A.norm());
    rep.trace.push_back({ts[i], sm[i], double(ds[i])});
  }
  const double tol = opt.degeneracy_tol * std::max(1.0, smax);
  require(sm.front() > tol && sm.back() > tol, "homotopy endpoint is singular");
  for (int i = 0; i <= opt.grid; ++i)
    if (ds[i] == 0 || sm[i] < tol)
      fail(ErrorKind::degenerate, "homotopy is singular at t = " + std::to_string(ts[i]));
  for (int i = 0; i < opt.grid; ++i) {
    if (ds[i] != ds[i + 1]) {
      // locate the crossing by bisection on the det sign
      double a = ts[i], b = ts[i + 1];
      int sa = ds[i];
      for (int k = 0; k < opt.bisections; ++k) {
        double m = 0.5 * (a + b);
        int sm_ = det_sign(L(m));
        if (sm_ == sa)
          a = m;
        else
          b = m;
      }
      rep.crossings.push_back(0.5 * (a + b));
      rep.sign = -rep.sign;
    }
  }
  // sigma_min dips below tol without a det sign change: not transversal
  for (int i = 1; i < opt.grid; ++i) {
    if (!(sm[i] <= sm[i - 1] && sm[i] <= sm[i + 1])) continue;
    if (ds[i - 1] != ds[i] || ds[i] != ds[i + 1]) continue;
    double a = ts[i - 1], b = ts[i + 1];
    const double g = 0.5 * (std::sqrt(5.0) - 1);
    for (int k = 0; k < opt.bisections; ++k) {
      double c = b - g * (b - a), d = a + g * (b - a);
      double sc, sd;
      det_sign(L(c), &sc);
      det_sign(L(d), &sd);
      if (sc <= sd)
        b = d;
      else
        a = c;
    }
    double smid;
    int dmid = det_sign(L(0.5 * (a + b)), &smid);
    if (smid < tol && dmid == ds[i])
      fail(ErrorKind::degenerate, "homotopy meets a non-transversal degeneracy near t = " + std::to_string(0.5 * (a + b)));
  }
  return rep;
}

struct PlantedTerm {
  RVec u, v;      // rank-one term s(t) u v^T
  double weight;  // s(t) = weight * t
};

// Sign of (A, Psi) by transport along L_{A,Psi;t}, t in [t_min, 1]; the
// orientation just above t = 0 is the +1 reference.
inline TransportReport orientation_sign(const VortexProblem& p, const VortexState& s,
                                        const TransportOptions& opt = {},
                                        std::optional<PlantedTerm> planted = std::nullopt) {
  require(s.matter_norm() > 1e-12, "orientation transport needs an irreducible state");
  CVec ref = phase_reference(s);
  auto L = [&](double t) {
    RMat A(jacobian(p, s, ref, HomotopyScale{t, t}));
    if (planted) A += planted->weight * t * planted->u * planted->v.transpose();
    return A;
  };
  {
    double smin;
    det_sign(L(1.0), &smin);
    require(smin > opt.degeneracy_tol, "state is obstructed: L has a kernel");
  }
  return transport_sign(L, opt.t_min, 1.0, opt);
}

// ------------------------------------------------------------------ JSON

inline nlohmann::json field_to_json(const Field& f) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < f.a.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < f.a.cols(); ++j) row.push_back({f.a(i, j).real(), f.a(i, j).imag()});
    rows.push_back(row);
  }
  return rows;
}

inline Field field_from_json(const nlohmann::json& j, int K) {
  Field f(K);
  require(j.is_array() && int(j.size()) == 2 * K + 1, "field has the wrong number of rows", ErrorKind::usage);
  for (int i = 0; i <= 2 * K; ++i) {
    require(j[i].is_array() && int(j[i].size()) == 2 * K + 1, "field has the wrong number of columns",
            ErrorKind::usage);
    for (int k = 0; k <= 2 * K; ++k) f.a(i, k) = cplx(j[i][k][0].get<double>(), j[i][k][1].get<double>());
  }
  return f;
}

inline nlohmann::json state_to_json(const VortexState& s) {
  return {{"K", s.K()},
          {"c", field_to_json(s.c)},
          {"zeta", field_to_json(s.zeta)},
          {"alpha", {field_to_json(s.alpha[0]), field_to_json(s.alpha[1])}},
          {"beta", {field_to_json(s.beta[0]), field_to_json(s.beta[1])}}};
}

inline VortexState state_from_json(const nlohmann::json& j) {
  for (const auto& [k, v] : j.items())
    require(k == "K" || k == "c" || k == "zeta" || k == "alpha" || k == "beta",
            "unknown key '" + k + "' in vortex state", ErrorKind::usage);
  int K = j.at("K").get<int>();
  VortexState s = VortexState::zero(K);
  s.c = field_from_json(j.at("c"), K);
  s.zeta = field_from_json(j.at("zeta"), K);
  for (int i = 0; i < 2; ++i) {
    s.alpha[i] = field_from_json(j.at("alpha").at(i), K);
    s.beta[i] = field_from_json(j.at("beta").at(i), K);
  }
  return s;
}

inline nlohmann::json matrix2_to_json(const CMat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json problem_to_json(const VortexProblem& p) {
  return {{"case", p.kind == VortexCase::adhm21 ? "2,1" : "1,2-abelian"},
          {"N", p.N},
          {"P", matrix2_to_json(p.P)},
          {"eta_c", {p.eta_c.real(), p.eta_c.imag()}},
          {"eta_r", p.eta_r},
          {"degree", p.degree}};
}

inline VortexProblem problem_from_json(const nlohmann::json& j) {
  for (const auto& [k, v] : j.items())
    require(k == "case" || k == "N" || k == "P" || k == "eta_c" || k == "eta_r" || k == "degree",
            "unknown key '" + k + "' in vortex problem", ErrorKind::usage);
  VortexProblem p;
  std::string c = j.value("case", "2,1");
  require(c == "2,1" || c == "1,2-abelian", "vortex case must be '2,1' or '1,2-abelian'", ErrorKind::usage);
  p.kind = c == "2,1" ? VortexCase::adhm21 : VortexCase::adhm12_abelian;
  p.N = j.value("N", 8);
  if (j.contains("P")) {
    const auto& m = j.at("P");
    require(m.is_array() && m.size() == 2, "P must be a 2x2 matrix of [re, im]", ErrorKind::usage);
    for (int r = 0; r < 2; ++r)
      for (int k = 0; k < 2; ++k) p.P(r, k) = cplx(m[r][k][0].get<double>(), m[r][k][1].get<double>());
  }
  if (j.contains("eta_c")) p.eta_c = cplx(j["eta_c"][0].get<double>(), j["eta_c"][1].get<double>());
  p.eta_r = j.value("eta_r", 0.0);
  p.degree = j.value("degree", 0);
  p.validate();
  return p;
}

}  // namespace crlab::vortex
