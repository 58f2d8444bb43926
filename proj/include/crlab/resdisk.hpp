#pragma once

// Local model at a branch point: sections of C^r (x) m over the punctured
// disk written as s = sum_kappa c_kappa(r) e^{i kappa alpha}, kappa in Z + 1/2.
// Mode indices are stored doubled (k2 = 2 kappa, odd).

#include "core.hpp"

#include <nlohmann/json.hpp>
#include <optional>

namespace crlab::resdisk {

// --------------------------------------------------------------- grid

struct RadialGrid {
  RVec r;
  RVec u;  // log r
  double h = 0;

  Eigen::Index size() const { return r.size(); }
  double r_min() const { return r(0); }

  static RadialGrid log_spaced(double r_min = 1e-4, Eigen::Index n = 2048) {
    require(r_min > 0 && r_min < 1, "r_min must lie in (0, 1)", ErrorKind::usage);
    require(n >= 8, "radial grid needs at least 8 points", ErrorKind::usage);
    RadialGrid g;
    g.u = RVec::LinSpaced(n, std::log(r_min), 0.0);
    g.u(n - 1) = 0.0;
    g.r = g.u.array().exp();
    g.r(n - 1) = 1.0;
    g.h = -std::log(r_min) / double(n - 1);
    return g;
  }

  // Index of the grid point closest to radius rho.
  Eigen::Index locate(double rho) const {
    double x = (std::log(rho) - u(0)) / h;
    return std::clamp<Eigen::Index>(Eigen::Index(std::lround(x)), 0, size() - 1);
  }
};

namespace detail {

// Integral over [u_i, u_{i+1}] of the cubic through four neighbouring samples.
template <class V>
auto interval_integral(const V& f, Eigen::Index i, double h) {
  Eigen::Index n = f.size();
  if (n < 4) return 0.5 * h * (f(i) + f(i + 1));
  if (i == 0) return h / 24 * (9. * f(0) + 19. * f(1) - 5. * f(2) + f(3));
  if (i == n - 2) return h / 24 * (f(n - 4) - 5. * f(n - 3) + 19. * f(n - 2) + 9. * f(n - 1));
  return h / 24 * (-f(i - 1) + 13. * f(i) + 13. * f(i + 1) - f(i + 2));
}

// Fourth-order derivative in u.
inline CVec d_du(const CVec& f, double h) {
  Eigen::Index n = f.size();
  CVec d(n);
  for (Eigen::Index i = 2; i + 2 < n; ++i) d(i) = (f(i - 2) - 8. * f(i - 1) + 8. * f(i + 1) - f(i + 2)) / (12 * h);
  d(0) = (-25. * f(0) + 48. * f(1) - 36. * f(2) + 16. * f(3) - 3. * f(4)) / (12 * h);
  d(1) = (-3. * f(0) - 10. * f(1) + 18. * f(2) - 6. * f(3) + f(4)) / (12 * h);
  d(n - 1) = (25. * f(n - 1) - 48. * f(n - 2) + 36. * f(n - 3) - 16. * f(n - 4) + 3. * f(n - 5)) / (12 * h);
  d(n - 2) = (3. * f(n - 1) + 10. * f(n - 2) - 18. * f(n - 3) + 6. * f(n - 4) - f(n - 5)) / (12 * h);
  return d;
}

// Integral in u of f from index a to b.
template <class V>
auto integrate(const V& f, Eigen::Index a, Eigen::Index b, double h) {
  decltype(interval_integral(f, 0, h)) s{};
  for (Eigen::Index i = a; i < b; ++i) s += interval_integral(f, i, h);
  return s;
}

inline bool half_integer(int lambda2) { return lambda2 % 2 != 0; }

}  // namespace detail

// ------------------------------------------------------------- 1D model

struct RadialProblem {
  int lambda2 = -1;  // 2 lambda, odd
  CVec psi;          // (d_r - lambda / r) phi on the grid
  std::optional<cplx> boundary;  // phi(1)
  RadialGrid grid;
};

struct RadialSolution {
  cplx leading{};      // coefficient of r^{-1/2}; zero unless lambda = -1/2
  cplx homogeneous{};  // coefficient of r^lambda in phi
  CVec phi_tilde;
  CVec phi;
};

// phi = a r^lambda + phi_tilde with phi_tilde given by the integral formulas
// of the 1D model lemma, integrated in u = log r.
inline RadialSolution radial_solve(const RadialProblem& p) {
  require(detail::half_integer(p.lambda2), "lambda must be a half-integer");
  const auto& g = p.grid;
  require(p.psi.size() == g.size(), "source and grid sizes differ", ErrorKind::usage);
  const double lam = 0.5 * p.lambda2;
  const Eigen::Index n = g.size();
  // integrand of s^{-lambda} psi(s) ds in u
  CVec f(n);
  for (Eigen::Index i = 0; i < n; ++i) f(i) = std::pow(g.r(i), 1 - lam) * p.psi(i);
  RadialSolution sol;
  sol.phi_tilde.resize(n);
  if (lam < 0) {
    // Tail on (0, r_min) from a power-law fit of the first two samples.
    cplx tail = 0;
    double a0 = std::abs(f(0)), a1 = std::abs(f(1));
    if (a0 > 0) {
      double q = a1 > 0 ? std::log(a1 / a0) / g.h : 0.0;  // f ~ r^q
      require(q > 0, "source is too singular at the origin for the lambda < 0 formula");
      tail = f(0) / q;
    }
    cplx acc = tail;
    sol.phi_tilde(0) = std::pow(g.r(0), lam) * acc;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      acc += detail::interval_integral(f, i, g.h);
      sol.phi_tilde(i + 1) = std::pow(g.r(i + 1), lam) * acc;
    }
  } else {
    cplx acc = 0;
    sol.phi_tilde(n - 1) = 0;
    for (Eigen::Index i = n - 2; i >= 0; --i) {
      acc += detail::interval_integral(f, i, g.h);
      sol.phi_tilde(i) = -std::pow(g.r(i), lam) * acc;
    }
  }
  cplx end = sol.phi_tilde(n - 1);
  if (p.lambda2 <= -3) {
    // r^lambda is not square integrable against r dr
    sol.homogeneous = 0;
    if (p.boundary)
      require(std::abs(*p.boundary - end) <= 1e-8 * (1 + std::abs(end)),
              "boundary value is incompatible with square integrability for lambda <= -3/2");
  } else {
    sol.homogeneous = p.boundary ? *p.boundary - end : cplx(0);
  }
  if (p.lambda2 == -1) sol.leading = sol.homogeneous;
  sol.phi = sol.phi_tilde;
  for (Eigen::Index i = 0; i < n; ++i) sol.phi(i) += sol.homogeneous * std::pow(g.r(i), lam);
  return sol;
}

// ---------------------------------------------------------- sections

struct AnnulusSection {
  int rank = 1;
  RadialGrid grid;
  std::map<int, CMat> modes;  // 2 kappa -> (grid size x rank)

  AnnulusSection() = default;
  AnnulusSection(int r, RadialGrid g) : rank(r), grid(std::move(g)) {}

  const CMat& mode(int k2) const {
    static const CMat empty;
    auto it = modes.find(k2);
    return it == modes.end() ? empty : it->second;
  }

  CMat& mode_mut(int k2) {
    require(detail::half_integer(k2), "angular modes of a twisted section are half-integers");
    auto it = modes.find(k2);
    if (it == modes.end()) it = modes.emplace(k2, CMat::Zero(grid.size(), rank)).first;
    return it->second;
  }

  // += v r^p e^{i kappa alpha}
  AnnulusSection& add_monomial(const CVec& v, int k2, double p) {
    require(v.size() == rank, "vector has the wrong rank", ErrorKind::usage);
    CMat& m = mode_mut(k2);
    for (Eigen::Index i = 0; i < grid.size(); ++i) m.row(i) += std::pow(grid.r(i), p) * v.transpose();
    return *this;
  }

  // += v z^{k/2}
  AnnulusSection& add_power(const CVec& v, int k2) { return add_monomial(v, k2, 0.5 * k2); }

  CVec value(Eigen::Index i, double alpha) const {
    CVec out = CVec::Zero(rank);
    for (const auto& [k2, m] : modes) out += std::exp(I * (0.5 * k2 * alpha)) * m.row(i).transpose();
    return out;
  }

  AnnulusSection operator+(const AnnulusSection& o) const { return axpy(1.0, o); }

  AnnulusSection axpy(cplx a, const AnnulusSection& o) const {
    require(o.rank == rank && o.grid.size() == grid.size(), "sections live on different grids");
    AnnulusSection s = *this;
    for (const auto& [k2, m] : o.modes) s.mode_mut(k2) += a * m;
    return s;
  }

  AnnulusSection scaled(cplx a) const {
    AnnulusSection s = *this;
    for (auto& [k2, m] : s.modes) m *= a;
    return s;
  }

  // Multiply by a radial function.
  AnnulusSection times(const RVec& chi) const {
    AnnulusSection s = *this;
    for (auto& [k2, m] : s.modes) m = chi.asDiagonal() * m;
    return s;
  }
};

// Zeroth-order perturbation d = dbar + beta0 z B0 (acting on the dz-bar
// coefficient). It preserves angular modes; B0 in sp(gamma) keeps the model
// gamma-self-adjoint.
struct ModelOperator {
  int rank = 2;
  double beta0 = 0;
  CMat B0;

  static ModelOperator dbar(int r) { return ModelOperator{r, 0.0, CMat::Zero(r, r)}; }
};

// d_zbar s = e^{i alpha} sum_kappa f_kappa e^{i kappa alpha} with
// f = (c' - kappa c / r) / 2 + beta0 r B0 c.
inline std::map<int, CMat> dbar_coefficients(const AnnulusSection& s, const ModelOperator& op) {
  std::map<int, CMat> out;
  const auto& g = s.grid;
  for (const auto& [k2, m] : s.modes) {
    CMat f(m.rows(), m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      CVec du = detail::d_du(m.col(c), g.h);
      for (Eigen::Index i = 0; i < m.rows(); ++i) f(i, c) = 0.5 * (du(i) - 0.5 * k2 * m(i, c)) / g.r(i);
    }
    if (op.beta0 != 0) f += op.beta0 * g.r.asDiagonal() * (m * op.B0.transpose());
    out[k2] = f;
  }
  return out;
}

// ----------------------------------------------------------- residues

struct ResidueFit {
  CVec residue;
  double residual = 0;  // relative misfit over the window
  double r_lo = 0, r_hi = 0;
};

// Least squares of the kappa = -1/2 mode against r^{-1/2}, r^{1/2}, r^{3/2}.
inline ResidueFit residue_extract(const AnnulusSection& s, double window_factor = 10.0) {
  ResidueFit fit;
  fit.residue = CVec::Zero(s.rank);
  const auto& g = s.grid;
  fit.r_lo = g.r_min();
  fit.r_hi = std::min(1.0, window_factor * g.r_min());
  const CMat& m = s.mode(-1);
  if (m.size() == 0) return fit;
  Eigen::Index hi = g.locate(fit.r_hi);
  Eigen::Index n = hi + 1;
  require(n >= 4, "residue fit window holds too few grid points");
  RMat A(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    double x = g.r(i) / fit.r_hi;
    A(i, 0) = 1.0 / std::sqrt(x);
    A(i, 1) = std::sqrt(x);
    A(i, 2) = x * std::sqrt(x);
  }
  Eigen::ColPivHouseholderQR<RMat> qr(A);
  double misfit = 0, scale = 0;
  for (Eigen::Index c = 0; c < s.rank; ++c) {
    CVec y = m.col(c).head(n);
    RVec re = y.real(), im = y.imag();
    RVec xr = qr.solve(re), xi = qr.solve(im);
    // undo the window scaling of r^{-1/2}
    fit.residue(c) = cplx(xr(0), xi(0)) * std::sqrt(fit.r_hi);
    misfit += (A * xr - re).squaredNorm() + (A * xi - im).squaredNorm();
    scale += y.squaredNorm();
  }
  fit.residual = scale > 0 ? std::sqrt(misfit / scale) : 0.0;
  if (fit.residual > 0.1)
    fail(ErrorKind::nonconvergence, "residue fit is ill-conditioned (relative misfit " +
                                        std::to_string(fit.residual) + ")");
  return fit;
}

// ------------------------------------------------------------ energies

inline double l2_norm2(const AnnulusSection& s, Eigen::Index from = 0) {
  const auto& g = s.grid;
  RVec dens = RVec::Zero(g.size());
  for (const auto& [k2, m] : s.modes) dens += m.rowwise().squaredNorm();
  // int |s|^2 r dr dalpha = 2 pi int |c|^2 r^2 du
  dens.array() *= g.r.array().square();
  return 2 * pi * detail::integrate(dens, from, g.size() - 1, g.h);
}

// int |grad s|^2 over r > r(from).
inline double gradient_norm2(const AnnulusSection& s, Eigen::Index from = 0) {
  const auto& g = s.grid;
  RVec dens = RVec::Zero(g.size());
  for (const auto& [k2, m] : s.modes)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      CVec du = detail::d_du(m.col(c), g.h);
      double k = 0.5 * k2;
      for (Eigen::Index i = 0; i < g.size(); ++i) dens(i) += std::norm(du(i)) + k * k * std::norm(m(i, c));
    }
  // |c'|^2 r dr = |dc/du|^2 du, and kappa^2 |c|^2 / r^2 * r dr = kappa^2 |c|^2 du
  return 2 * pi * detail::integrate(dens, from, g.size() - 1, g.h);
}

// int |dbar s|^2 with |d zbar|^2 = 2.
inline double dbar_norm2(const AnnulusSection& s, const ModelOperator& op, Eigen::Index from = 0) {
  const auto& g = s.grid;
  RVec dens = RVec::Zero(g.size());
  for (const auto& [k2, f] : dbar_coefficients(s, op)) dens += f.rowwise().squaredNorm();
  dens.array() *= g.r.array().square();
  return 2 * 2 * pi * detail::integrate(dens, from, g.size() - 1, g.h);
}

struct W12Diagnostic {
  std::vector<double> r_min;
  std::vector<double> norms;
  double sup = 0;
  bool bounded = true;
  double tail_ratio = 0;  // last increment over the previous one
  double power_rate = 0;  // d log E / d log(1/r_min) over the last step
  double log_rate = 0;    // d E / d log(1/r_min) over the last step
};

// Gradient energy on [r_min, 1] along a decreasing r_min sequence.
inline W12Diagnostic w12_membership(const AnnulusSection& s, std::vector<double> r_mins = {}) {
  const auto& g = s.grid;
  if (r_mins.empty())
    for (double r = 0.1; r >= g.r_min() * 0.999; r /= 2) r_mins.push_back(r);
  require(r_mins.size() >= 3, "need at least three radii");
  W12Diagnostic d;
  d.r_min = r_mins;
  for (double r : r_mins) d.norms.push_back(gradient_norm2(s, g.locate(r)));
  d.sup = *std::max_element(d.norms.begin(), d.norms.end());
  std::size_t k = d.norms.size() - 1;
  double inc1 = d.norms[k] - d.norms[k - 1], inc0 = d.norms[k - 1] - d.norms[k - 2];
  double step = std::log(r_mins[k - 1] / r_mins[k]);
  d.tail_ratio = inc0 > 0 ? inc1 / inc0 : 0.0;
  d.log_rate = inc1 / step;
  d.power_rate = d.norms[k] > 0 && d.norms[k - 1] > 0 ? std::log(d.norms[k] / d.norms[k - 1]) / step : 0.0;
  d.bounded = d.sup == 0 || d.tail_ratio < 0.75;
  return d;
}

// -------------------------------------------------------- Green's form

inline CMat standard_symplectic(int r) {
  require(r % 2 == 0, "a symplectic pairing needs even rank");
  CMat J = CMat::Zero(r, r);
  for (int i = 0; i < r / 2; ++i) {
    J(2 * i, 2 * i + 1) = 1;
    J(2 * i + 1, 2 * i) = -1;
  }
  return J;
}

// G on residues: pi Re(v^T gamma w).
inline double residue_form(const CVec& v, const CVec& w, const CMat& gamma) {
  return pi * (v.transpose() * gamma * w)(0, 0).real();
}

// Smooth cutoff: 1 on [0, 1/2], 0 at r = 1.
inline RVec outer_cutoff(const RadialGrid& g) {
  RVec chi(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    double x = std::clamp((g.r(i) - 0.5) / 0.5, 0.0, 1.0);
    chi(i) = 1 - x * x * x * (10 - 15 * x + 6 * x * x);
  }
  return chi;
}

struct GreenReport {
  double value = 0;     // area integral over the annulus
  double boundary = 0;  // inner-boundary term at r_min
  double mismatch = 0;
};

// Inner boundary term pi rho sum_kappa Re w(c_kappa, d_{-1-kappa}) at grid index i.
inline double inner_boundary(const AnnulusSection& s, const AnnulusSection& t, const CMat& gamma, Eigen::Index i) {
  cplx acc = 0;
  for (const auto& [k2, m] : s.modes) {
    const CMat& d = t.mode(-2 - k2);
    if (d.size() == 0) continue;
    acc += (m.row(i) * gamma * d.row(i).transpose())(0, 0);
  }
  return pi * s.grid.r(i) * acc.real();
}

inline void require_domain(const AnnulusSection& s, const ModelOperator& op, const std::string& name) {
  const auto& g = s.grid;
  Eigen::Index mid = g.locate(2 * g.r_min());
  double total = l2_norm2(s), inner = total - l2_norm2(s, mid);
  double dt = dbar_norm2(s, op), dinner = dt - dbar_norm2(s, op, mid);
  double floor = 1e-10 * (1 + total);
  bool ok = inner <= 0.1 * total + floor && dinner <= 0.1 * dt + floor;
  require(ok, name + " is not in the extended domain of the model operator");
}

// Ghat(s, t) = int Re<gamma d s, t> - Re<s, gamma d t>, both sections cut off
// near r = 1 so only the puncture contributes.
inline GreenReport greens_form(const AnnulusSection& s0, const AnnulusSection& t0, const CMat& gamma,
                               const ModelOperator& op = ModelOperator::dbar(2)) {
  require(s0.rank == t0.rank && gamma.rows() == s0.rank, "rank mismatch in the Green's form");
  require(max_abs(CMat(gamma + gamma.transpose())) < 1e-12, "the Green's form needs an antisymmetric gamma");
  require_domain(s0, op, "first section");
  require_domain(t0, op, "second section");
  RVec chi = outer_cutoff(s0.grid);
  AnnulusSection s = s0.times(chi), t = t0.times(chi);
  auto fs = dbar_coefficients(s, op), ft = dbar_coefficients(t, op);
  const auto& g = s.grid;
  RVec dens = RVec::Zero(g.size());
  // (gamma f)^T t pairs e^{i alpha} f_kappa with t_{-1-kappa}
  auto add = [&](const std::map<int, CMat>& f, const AnnulusSection& other, double sign) {
    for (const auto& [k2, fk] : f) {
      const CMat& d = other.mode(-2 - k2);
      if (d.size() == 0) continue;
      for (Eigen::Index i = 0; i < g.size(); ++i)
        dens(i) += sign * ((gamma * fk.row(i).transpose()).transpose() * d.row(i).transpose())(0, 0).real();
    }
  };
  add(fs, t, 1.0);
  add(ft, s, -1.0);
  dens.array() *= g.r.array().square();
  GreenReport rep;
  rep.value = 2 * pi * detail::integrate(dens, 0, g.size() - 1, g.h);
  rep.boundary = inner_boundary(s, t, gamma, 0);
  rep.mismatch = std::abs(rep.value - rep.boundary);
  return rep;
}

// ---------------------------------------------------- model kernels and Lagrangian check

// Solve c' = (kappa / r) c - 2 beta0 r B0 c inward from c(1), by RK4 in u.
inline CMat solve_mode(const ModelOperator& op, const RadialGrid& g, int k2, const CVec& c1) {
  const Eigen::Index n = g.size();
  CMat out(n, op.rank);
  CVec c = c1;
  out.row(n - 1) = c.transpose();
  auto rhs = [&](double u, const CVec& x) -> CVec {
    double r2 = std::exp(2 * u);
    return 0.5 * k2 * x - 2 * op.beta0 * r2 * (op.B0 * x);
  };
  for (Eigen::Index i = n - 1; i > 0; --i) {
    double u = g.u(i), h = g.u(i - 1) - g.u(i);
    CVec a = rhs(u, c), b = rhs(u + h / 2, c + h / 2 * a), d = rhs(u + h / 2, c + h / 2 * b),
         e = rhs(u + h, c + h * d);
    c += h / 6 * (a + 2 * b + 2 * d + e);
    out.row(i - 1) = c.transpose();
  }
  return out;
}

// Kernel on the disk with an APS-type outer condition: positive modes vanish
// at r = 1, modes kappa <= -3/2 are excluded by square integrability, and the
// kappa = -1/2 trace lies in the real span of lambda_basis.
inline std::vector<AnnulusSection> model_kernel(const ModelOperator& op, const RadialGrid& g,
                                                const std::vector<CVec>& lambda_basis) {
  std::vector<AnnulusSection> ker;
  for (const auto& v : lambda_basis) {
    require(v.size() == op.rank, "boundary vector has the wrong rank", ErrorKind::usage);
    AnnulusSection s(op.rank, g);
    s.mode_mut(-1) = solve_mode(op, g, -1, v);
    ker.push_back(std::move(s));
  }
  return ker;
}

inline std::vector<CVec> canonical_lagrangian(int r) {
  CVec e = CVec::Zero(r);
  std::vector<CVec> out;
  for (int i = 0; i < r / 2; ++i) {
    e.setZero();
    e(2 * i) = 1;
    out.push_back(e);
    out.push_back(I * e);
  }
  return out;
}

struct LagrangianReport {
  double isotropy_defect = 0;
  double dimension_ratio = 0;
  int image_rank = 0;
  std::vector<CVec> residues;
};

inline LagrangianReport lagrangian_check(const std::vector<AnnulusSection>& kernel, const CMat& gamma) {
  LagrangianReport rep;
  if (kernel.empty()) return rep;
  int r = kernel[0].rank;
  for (const auto& s : kernel) rep.residues.push_back(residue_extract(s).residue);
  RMat R(2 * r, rep.residues.size());
  for (std::size_t j = 0; j < rep.residues.size(); ++j) R.col(j) = to_real(rep.residues[j]);
  for (std::size_t i = 0; i < rep.residues.size(); ++i)
    for (std::size_t j = 0; j < rep.residues.size(); ++j)
      rep.isotropy_defect =
          std::max(rep.isotropy_defect, std::abs(residue_form(rep.residues[i], rep.residues[j], gamma)));
  Eigen::JacobiSVD<RMat> svd(R);
  const auto& sv = svd.singularValues();
  for (Eigen::Index i = 0; i < sv.size(); ++i) rep.image_rank += sv(i) > 1e-8 * std::max(1.0, sv(0));
  rep.dimension_ratio = rep.image_rank / (0.5 * 2 * r);
  return rep;
}

// Random element of sp(gamma): gamma^{-1} S with S complex symmetric.
inline CMat random_sp(const CMat& gamma, Rng& rng) {
  CMat S = rng.cmat(gamma.rows(), gamma.cols());
  S = 0.5 * (S + S.transpose()).eval();
  return gamma.inverse() * S;
}

// --------------------------------------------------------------- JSON

inline nlohmann::json section_to_json(const AnnulusSection& s) {
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& [k2, m] : s.modes)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      nlohmann::json samples = nlohmann::json::array();
      for (Eigen::Index i = 0; i < m.rows(); ++i) samples.push_back({m(i, c).real(), m(i, c).imag()});
      modes.push_back({k2, c, samples});
    }
  return {{"rank", s.rank}, {"r_min", s.grid.r_min()}, {"n", s.grid.size()}, {"modes", modes}};
}

inline AnnulusSection section_from_json(const nlohmann::json& j) {
  for (const auto& [k, v] : j.items())
    require(k == "rank" || k == "r_min" || k == "n" || k == "modes", "unknown key '" + k + "' in section",
            ErrorKind::usage);
  AnnulusSection s(j.at("rank").get<int>(),
                   RadialGrid::log_spaced(j.at("r_min").get<double>(), j.at("n").get<Eigen::Index>()));
  for (const auto& e : j.at("modes")) {
    require(e.is_array() && e.size() == 3, "mode entries are [kappa2, component, samples]", ErrorKind::usage);
    int k2 = e[0].get<int>(), c = e[1].get<int>();
    require(c >= 0 && c < s.rank, "component out of range", ErrorKind::usage);
    const auto& smp = e[2];
    require(smp.is_array() && Eigen::Index(smp.size()) == s.grid.size(), "sample count differs from grid",
            ErrorKind::usage);
    CMat& m = s.mode_mut(k2);
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, c) = cplx(smp[i][0].get<double>(), smp[i][1].get<double>());
  }
  return s;
}

}  // namespace crlab::resdisk
