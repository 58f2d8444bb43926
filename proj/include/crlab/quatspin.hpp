#pragma once

// Quaternions, the Pauli model of Cl(3), the 2D Dirac operator on
// exponential-polynomial data, and real structures on E (x) S.

#include "core.hpp"

#include <map>
#include <tuple>

namespace crlab::quatspin {

using Mat2 = Eigen::Matrix2cd;
using Vec2 = Eigen::Vector2cd;

// ---------------------------------------------------------------- quaternions

struct Quaternion {
  double a = 0, b = 0, c = 0, d = 0;  // a + bi + cj + dk

  static constexpr Quaternion one() { return {1, 0, 0, 0}; }
  static constexpr Quaternion qi() { return {0, 1, 0, 0}; }
  static constexpr Quaternion qj() { return {0, 0, 1, 0}; }
  static constexpr Quaternion qk() { return {0, 0, 0, 1}; }

  constexpr Quaternion conj() const { return {a, -b, -c, -d}; }
  constexpr double norm2() const { return a * a + b * b + c * c + d * d; }
  double norm() const { return std::sqrt(norm2()); }

  constexpr Quaternion operator+(const Quaternion& o) const {
    return {a + o.a, b + o.b, c + o.c, d + o.d};
  }
  constexpr Quaternion operator-(const Quaternion& o) const {
    return {a - o.a, b - o.b, c - o.c, d - o.d};
  }
  constexpr Quaternion operator*(double s) const { return {a * s, b * s, c * s, d * s}; }
  constexpr bool operator==(const Quaternion&) const = default;

  // Complex pair (z, w) with q = z + w j.
  Vec2 spinor() const { return {cplx{a, b}, cplx{c, d}}; }
  static Quaternion from_spinor(const Vec2& s) {
    return {s(0).real(), s(0).imag(), s(1).real(), s(1).imag()};
  }
};

constexpr Quaternion quat_mul(const Quaternion& p, const Quaternion& q) {
  return {p.a * q.a - p.b * q.b - p.c * q.c - p.d * q.d,
          p.a * q.b + p.b * q.a + p.c * q.d - p.d * q.c,
          p.a * q.c - p.b * q.d + p.c * q.a + p.d * q.b,
          p.a * q.d + p.b * q.c - p.c * q.b + p.d * q.a};
}

constexpr Quaternion operator*(const Quaternion& p, const Quaternion& q) {
  return quat_mul(p, q);
}

inline double distance(const Quaternion& p, const Quaternion& q) { return (p - q).norm(); }

// Left multiplication by j on z + wj.
inline Vec2 j_action(const Vec2& s) { return {-std::conj(s(1)), std::conj(s(0))}; }

// ------------------------------------------------------------------ Clifford

inline Mat2 gamma_e1() {
  Mat2 g;
  g << I, 0, 0, -I;
  return g;
}
inline Mat2 gamma_e2() {
  Mat2 g;
  g << 0, -1, 1, 0;
  return g;
}
inline Mat2 gamma_e3() {
  Mat2 g;
  g << 0, I, I, 0;
  return g;
}

inline Mat2 clifford_gamma(const Eigen::Vector3d& v) {
  return v(0) * gamma_e1() + v(1) * gamma_e2() + v(2) * gamma_e3();
}

// ------------------------------------------------------------- Dirac in 2D
//
// Fields are finite sums of  c * t^nt x^nx y^ny * exp(i(k t + p x + q y))
// with complex frequencies and a value in C^2.  This class is closed under
// differentiation, so D acts exactly.

struct DiracTerm {
  int nt = 0, nx = 0, ny = 0;
  cplx k{}, p{}, q{};
  Vec2 value = Vec2::Zero();
};

class SpinorField {
 public:
  SpinorField() = default;
  explicit SpinorField(std::vector<DiracTerm> terms) {
    for (auto& t : terms) add(t);
  }

  void add(const DiracTerm& t) {
    auto key = std::make_tuple(t.nt, t.nx, t.ny, t.k.real(), t.k.imag(), t.p.real(),
                               t.p.imag(), t.q.real(), t.q.imag());
    auto it = terms_.find(key);
    if (it == terms_.end())
      terms_.emplace(key, t);
    else
      it->second.value += t.value;
  }

  std::vector<DiracTerm> terms() const {
    std::vector<DiracTerm> out;
    for (auto& [key, t] : terms_)
      if (t.value.cwiseAbs().maxCoeff() > 0) out.push_back(t);
    return out;
  }

  Vec2 eval(double t, double x, double y) const {
    Vec2 acc = Vec2::Zero();
    for (auto& [key, term] : terms_) {
      cplx f = std::pow(t, term.nt) * std::pow(x, term.nx) * std::pow(y, term.ny) *
               std::exp(I * (term.k * t + term.p * x + term.q * y));
      acc += f * term.value;
    }
    return acc;
  }

  double max_coeff() const {
    double m = 0;
    for (auto& [key, t] : terms_) m = std::max(m, t.value.cwiseAbs().maxCoeff());
    return m;
  }

  // axis 0 = t, 1 = x, 2 = y; `mix` maps the value before accumulation.
  SpinorField derivative(int axis, const Mat2& mix) const {
    SpinorField out;
    for (auto& [key, term] : terms_) {
      cplx freq = axis == 0 ? term.k : axis == 1 ? term.p : term.q;
      int power = axis == 0 ? term.nt : axis == 1 ? term.nx : term.ny;
      DiracTerm a = term;
      a.value = I * freq * (mix * term.value);
      out.add(a);
      if (power > 0) {
        DiracTerm b = term;
        (axis == 0 ? b.nt : axis == 1 ? b.nx : b.ny) -= 1;
        b.value = double(power) * (mix * term.value);
        out.add(b);
      }
    }
    return out;
  }

  SpinorField& operator+=(const SpinorField& o) {
    for (auto& [key, t] : o.terms_) add(t);
    return *this;
  }

 private:
  using Key = std::tuple<int, int, int, double, double, double, double, double, double>;
  std::map<Key, DiracTerm> terms_;
};

// D = [[i d_t, -(d_x - i d_y)], [d_x + i d_y, -i d_t]].
inline SpinorField dirac2d_apply(const SpinorField& f) {
  Mat2 mt, mx, my;
  mt << I, 0, 0, -I;
  mx << 0, -1, 1, 0;
  my << 0, I, I, 0;
  SpinorField out = f.derivative(0, mt);
  out += f.derivative(1, mx);
  out += f.derivative(2, my);
  return out;
}

// ------------------------------------------------- real structure on E (x) S
//
// E = C^{2m} with j_E(v) = J conj(v), J = blockdiag([[0,-1],[1,0]]).
// An antilinear map is the matrix M of v -> M conj(v).

inline CMat standard_jE(int rankE) {
  require(rankE > 0 && rankE % 2 == 0, "quaternionic E needs even complex rank");
  CMat J = CMat::Zero(rankE, rankE);
  for (int b = 0; b < rankE; b += 2) {
    J(b, b + 1) = -1;
    J(b + 1, b) = 1;
  }
  return J;
}

// psi = (alpha, beta) with alpha in E (x) S+, beta in E (x) S-.
struct TensorSpinor {
  CVec plus, minus;
};

class RealStructure {
 public:
  explicit RealStructure(int rankE) : J_(standard_jE(rankE)) {}
  explicit RealStructure(CMat J) : J_(std::move(J)) {
    require(J_.rows() == J_.cols() && J_.rows() % 2 == 0, "j_E must be square of even size");
    require(max_abs(CMat(J_ * J_.conjugate() + CMat::Identity(J_.rows(), J_.cols()))) < 1e-12,
            "j_E must square to -1");
  }

  const CMat& J() const { return J_; }
  int rank() const { return int(J_.rows()); }

  CVec gbar(const CVec& v) const { return J_ * v.conjugate(); }

  TensorSpinor tau(const TensorSpinor& s) const { return {-gbar(s.minus), gbar(s.plus)}; }

  // Split into the +1 and -1 eigencomponents of tau.
  std::pair<TensorSpinor, TensorSpinor> re_project(const TensorSpinor& s) const {
    TensorSpinor t = tau(s);
    return {{0.5 * (s.plus + t.plus), 0.5 * (s.minus + t.minus)},
            {0.5 * (s.plus - t.plus), 0.5 * (s.minus - t.minus)}};
  }

  // Inverse of the projection Re(E (x) S) -> E (x) S+.
  TensorSpinor real_from_plus(const CVec& alpha) const { return {alpha, gbar(alpha)}; }

 private:
  CMat J_;
};

inline TensorSpinor tau_apply(const RealStructure& rs, const TensorSpinor& s) { return rs.tau(s); }
inline std::pair<TensorSpinor, TensorSpinor> re_project(const RealStructure& rs,
                                                        const TensorSpinor& s) {
  return rs.re_project(s);
}

// Real-linear map E (x) S+ -> E (x) S- as v -> C v + A conj(v).
struct RealLinearMap {
  CMat linear;
  CMat antilinear;

  CVec apply(const CVec& v) const { return linear * v + antilinear * v.conjugate(); }
};

// Blocks indexed (source, target): up_pm maps S+ -> S-, etc.
struct SpinorEndomorphism {
  CMat pp, mp, pm, mm;  // pp: +->+, mp: - -> +, pm: + -> -, mm: - -> -

  CMat full() const {
    Eigen::Index n = pp.rows();
    CMat m(2 * n, 2 * n);
    m << pp, mp, pm, mm;
    return m;
  }

  TensorSpinor apply(const TensorSpinor& s) const {
    return {pp * s.plus + mp * s.minus, pm * s.plus + mm * s.minus};
  }
};

inline SpinorEndomorphism upsilon_reconstruct(const RealStructure& rs, const RealLinearMap& ur) {
  const CMat& J = rs.J();
  SpinorEndomorphism u;
  u.pp = -J * ur.antilinear.conjugate();
  u.mp = J * ur.linear.conjugate() * J;
  u.pm = ur.linear;
  u.mm = -ur.antilinear * J;
  return u;
}

inline RealLinearMap upsilon_restrict(const RealStructure& rs, const SpinorEndomorphism& u) {
  return {u.pm, u.mm * rs.J()};
}

// Largest entry of the two tau-commutation residuals:
// pp gbar - gbar mm and mp gbar + gbar pm (as linear matrices).
inline double tau_commutation_defect(const RealStructure& rs, const SpinorEndomorphism& u) {
  const CMat& J = rs.J();
  CMat r1 = u.pp * J - J * u.mm.conjugate();
  CMat r2 = u.mp * J + J * u.pm.conjugate();
  return std::max(max_abs(r1), max_abs(r2));
}

// gbar o Upsilon_R as a real matrix on C^{2m} = R^{4m}.
inline RMat gbar_upsilon_real(const RealStructure& rs, const RealLinearMap& ur) {
  const CMat& J = rs.J();
  return realify(J * ur.antilinear.conjugate(), J * ur.linear.conjugate());
}

inline double hermitian_defect(const SpinorEndomorphism& u) {
  CMat f = u.full();
  return max_abs(CMat(f - f.adjoint()));
}

inline double symmetric_defect(const RMat& m) { return max_abs(RMat(m - m.transpose())); }

// Decompose a real matrix on R^{2n} (interleaved) into v -> C v + A conj(v).
inline RealLinearMap split_real(const RMat& m) {
  Eigen::Index n = m.rows() / 2;
  RealLinearMap out{CMat(n, n), CMat(n, n)};
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      double a = m(2 * i, 2 * j), b = m(2 * i, 2 * j + 1);
      double c = m(2 * i + 1, 2 * j), d = m(2 * i + 1, 2 * j + 1);
      out.linear(i, j) = {0.5 * (a + d), 0.5 * (c - b)};
      out.antilinear(i, j) = {0.5 * (a - d), 0.5 * (b + c)};
    }
  return out;
}

}  // namespace crlab::quatspin
