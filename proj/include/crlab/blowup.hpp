#pragma once

// Fibrewise Eguchi-Hanson geometry on V^x / {+-1} for a rank 2 Hermitian V,
// evaluated in the V^x chart, plus the topological bookkeeping for sections.

#include "core.hpp"

#include <limits>
#include <string>

namespace crlab::blowup {

struct EHParams {
  double t = 0;
  CMat metric = CMat::Identity(2, 2);  // Hermitian, positive definite

  void validate() const {
    require(t >= 0, "deformation parameter t must be nonnegative", ErrorKind::usage);
    require(metric.rows() == 2 && metric.cols() == 2, "fibre metric must be 2x2", ErrorKind::usage);
    require(max_abs(CMat(metric - metric.adjoint())) < 1e-12, "fibre metric must be Hermitian", ErrorKind::usage);
    Eigen::SelfAdjointEigenSolver<CMat> es(metric);
    require(es.eigenvalues().minCoeff() > 0, "fibre metric must be positive definite", ErrorKind::usage);
  }
};

inline double eh_potential(double u, double t) {
  require(u > 0, "the potential is defined for u > 0");
  double q = std::sqrt(u * u + t * t * t * t);
  if (t == 0) return u;
  return q + t * t * std::log(u) - t * t * std::log(q + t * t);
}

struct PotentialDerivative {
  double closed = 0;  // sqrt(u^2 + t^4) / u
  double naive = 0;   // term by term
  double second = 0;  // f''
};

inline PotentialDerivative eh_potential_derivative(double u, double t) {
  require(u > 0, "the potential is defined for u > 0");
  double t2 = t * t, q = std::sqrt(u * u + t2 * t2);
  PotentialDerivative d;
  d.closed = q / u;
  d.naive = u / q + t2 / u - t2 * (u / q) / (q + t2);
  d.second = -t2 * t2 / (u * u * q);
  return d;
}

struct FiberPoint {
  CVec v;     // in C^2, nonzero
  CVec x, y;  // tangent vectors
};

struct FormValue {
  double omega = 0;      // Omega(X, Y)
  double hermitian = 0;  // Omega(X, IX)
  double hermitian_y = 0;
};

namespace detail {

// Hessian of f(rho^2) at v, as a real bilinear form on C^2.
struct Hessian {
  CVec Hv;
  double f1, f2;
  CMat metric;
  double operator()(const CVec& X, const CVec& Y) const {
    double a = 2 * (Hv.adjoint() * X)(0, 0).real();
    double b = 2 * (Hv.adjoint() * Y)(0, 0).real();
    return f2 * a * b + 2 * f1 * (X.adjoint() * metric * Y)(0, 0).real();
  }
};

inline Hessian hessian(const CVec& v, const EHParams& p) {
  double u = (v.adjoint() * p.metric * v)(0, 0).real();
  auto d = eh_potential_derivative(u, p.t);
  return Hessian{p.metric * v, d.closed, d.second, p.metric};
}

}  // namespace detail

// Omega(X, Y) = -1/4 (Hess F(X, IY) - Hess F(Y, IX)) for F = f_t(rho^2).
inline FormValue fibrewise_form_eval(const FiberPoint& pt, const EHParams& p) {
  require(pt.v.size() == 2 && pt.x.size() == 2 && pt.y.size() == 2, "fibre points live in C^2", ErrorKind::usage);
  require(pt.v.norm() > 0, "the form is evaluated away from the zero section");
  auto hess = detail::hessian(pt.v, p);
  auto omega = [&](const CVec& X, const CVec& Y) {
    return -0.25 * (hess(X, (I * Y).eval()) - hess(Y, (I * X).eval()));
  };
  FormValue out;
  out.omega = omega(pt.x, pt.y);
  out.hermitian = omega(pt.x, (I * pt.x).eval());
  out.hermitian_y = omega(pt.y, (I * pt.y).eval());
  return out;
}

// Real 4x4 coefficient matrix of Omega in the coordinates
// (Re v1, Im v1, Re v2, Im v2).
inline RMat form_matrix(const CVec& v, const EHParams& p) {
  RMat w(4, 4);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      RVec ea = RVec::Unit(4, a), eb = RVec::Unit(4, b);
      w(a, b) = fibrewise_form_eval({v, to_complex(ea), to_complex(eb)}, p).omega;
    }
  return w;
}

// Largest component of d Omega at v, by Richardson-extrapolated central
// differences of the coefficients.
inline double closedness_defect(const CVec& v, const EHParams& p, double h = 1e-4) {
  RVec x = to_real(v);
  std::array<RMat, 4> dw;
  for (int c = 0; c < 4; ++c) {
    auto diff = [&](double s) {
      RVec xp = x, xm = x;
      xp(c) += s;
      xm(c) -= s;
      return RMat((form_matrix(to_complex(xp), p) - form_matrix(to_complex(xm), p)) / (2 * s));
    };
    dw[c] = (4 * diff(h / 2) - diff(h)) / 3;
  }
  double defect = 0;
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b)
      for (int c = b + 1; c < 4; ++c)
        defect = std::max(defect, std::abs(dw[a](b, c) + dw[b](c, a) + dw[c](a, b)));
  return defect;
}

// ---------------------------------------------------------------- topology

struct ChernVertical {
  int deg_v = 0;
  std::string descriptor;
  // <c1(T^vert), a S + b F> = a deg V; fibres of PV map to points of C.
  int evaluate(int s_coeff, int f_coeff) const {
    (void)f_coeff;
    return s_coeff * deg_v;
  }
};

inline ChernVertical chern_vertical(int deg_v) { return {deg_v, "q^* c1(V)"}; }

struct SectionClass {
  int s_coeff = 1;
  int f_coeff = 0;
  bool operator==(const SectionClass&) const = default;
};

inline SectionClass section_class(int deg_v, int deg_s) { return {1, deg_v + deg_s}; }

// Intersection form on H_2(PV): S.S = -deg V, S.F = 1, F.F = 0.
inline int intersect(const SectionClass& a, const SectionClass& b, int deg_v) {
  return -deg_v * a.s_coeff * b.s_coeff + a.s_coeff * b.f_coeff + a.f_coeff * b.s_coeff;
}

// Genus of the double cover of a genus g surface branched at n points.
inline int cover_genus(int g, int n_branch) {
  require(g >= 0 && n_branch >= 0, "genus and branch count must be nonnegative", ErrorKind::usage);
  require(n_branch % 2 == 0, "a double cover branches at an even number of points", ErrorKind::usage);
  require(g > 0 || n_branch > 0, "the unbranched double cover of a sphere is disconnected", ErrorKind::usage);
  return 2 * g - 1 + n_branch / 2;
}

// ------------------------------------------------------------ sampled checks

inline CMat random_metric(Rng& rng) {
  CMat A = rng.cmat(2, 2);
  return A.adjoint() * A + 0.5 * CMat::Identity(2, 2);
}

// max over samples of |Omega_t(Rv; RX, RY) / R^2 - Omega_{t/R}(v; X, Y)|,
// relative to 1 + |Omega_{t/R}|.
inline double scaling_check(int samples, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0;
  for (int k = 0; k < samples; ++k) {
    EHParams p{rng.uniform(0, 2), random_metric(rng)};
    double R = std::exp(rng.uniform(-1.5, 1.5));
    CVec v = rng.cmat(2, 1).col(0), x = rng.cmat(2, 1).col(0), y = rng.cmat(2, 1).col(0);
    double lhs = fibrewise_form_eval({(R * v).eval(), (R * x).eval(), (R * y).eval()}, p).omega / (R * R);
    double rhs = fibrewise_form_eval({v, x, y}, EHParams{p.t / R, p.metric}).omega;
    worst = std::max(worst, std::abs(lhs - rhs) / (1 + std::abs(rhs)));
  }
  return worst;
}

// min over samples of Omega(X, IX) / |X|_h^2; positive for a Kahler form.
inline double positivity_margin(double t, int samples, std::uint64_t seed) {
  Rng rng(seed);
  double margin = std::numeric_limits<double>::infinity();
  for (int k = 0; k < samples; ++k) {
    EHParams p{t, k % 2 ? random_metric(rng) : CMat::Identity(2, 2)};
    double scale = std::exp(rng.uniform(-3, 3));
    CVec v = scale * rng.cmat(2, 1).col(0), x = rng.cmat(2, 1).col(0);
    double h = (x.adjoint() * p.metric * x)(0, 0).real();
    margin = std::min(margin, fibrewise_form_eval({v, x, x}, p).hermitian / h);
  }
  return margin;
}

}  // namespace crlab::blowup
