#pragma once

// Pointwise algebra of the (r,k) ADHM representations
//   V = H (x) End(C^k)  +  H (x) Hom(C^r, C^k),
// stored as xi = (xi1, xi2), alpha (k x r), beta (r x k).

#include "core.hpp"
#include "quatspin.hpp"

#include <array>
#include <optional>

namespace crlab::adhm {

struct ADHMRep {
  int r = 1;
  int k = 1;

  int real_dim() const { return 4 * k * k + 4 * k * r; }
  int lie_dim() const { return k * k; }
};

struct ADHMConfig {
  CMat xi1, xi2, alpha, beta;

  static ADHMConfig zero(const ADHMRep& rep) {
    return {CMat::Zero(rep.k, rep.k), CMat::Zero(rep.k, rep.k), CMat::Zero(rep.k, rep.r),
            CMat::Zero(rep.r, rep.k)};
  }

  ADHMConfig operator+(const ADHMConfig& o) const {
    return {xi1 + o.xi1, xi2 + o.xi2, alpha + o.alpha, beta + o.beta};
  }
  ADHMConfig operator*(double s) const { return {s * xi1, s * xi2, s * alpha, s * beta}; }
  ADHMConfig operator*(cplx s) const { return {s * xi1, s * xi2, s * alpha, s * beta}; }
};

struct MomentValue {
  CMat muR;  // Hermitian
  CMat muC;
};

inline void check_shape(const ADHMRep& rep, const ADHMConfig& c) {
  bool ok = c.xi1.rows() == rep.k && c.xi1.cols() == rep.k && c.xi2.rows() == rep.k &&
            c.xi2.cols() == rep.k && c.alpha.rows() == rep.k && c.alpha.cols() == rep.r &&
            c.beta.rows() == rep.r && c.beta.cols() == rep.k;
  require(ok, "ADHM configuration does not match (r,k) = (" + std::to_string(rep.r) + "," +
                  std::to_string(rep.k) + ")");
}

inline MomentValue moment_maps(const ADHMRep& rep, const ADHMConfig& c) {
  check_shape(rep, c);
  MomentValue m;
  m.muC = c.xi1 * c.xi2 - c.xi2 * c.xi1 + c.alpha * c.beta;
  m.muR = c.xi1 * c.xi1.adjoint() - c.xi1.adjoint() * c.xi1 + c.xi2 * c.xi2.adjoint() -
          c.xi2.adjoint() * c.xi2 + c.alpha * c.alpha.adjoint() - c.beta.adjoint() * c.beta;
  return m;
}

// --------------------------------------------------- representation pieces

// Real inner product Re tr(x^* y), summed over the four blocks.
inline double inner(const ADHMConfig& x, const ADHMConfig& y) {
  return (x.xi1.adjoint() * y.xi1).trace().real() + (x.xi2.adjoint() * y.xi2).trace().real() +
         (x.alpha.adjoint() * y.alpha).trace().real() + (x.beta.adjoint() * y.beta).trace().real();
}

inline double norm(const ADHMConfig& x) { return std::sqrt(inner(x, x)); }

inline ADHMConfig act_i(const ADHMConfig& x) { return x * I; }

inline ADHMConfig act_j(const ADHMConfig& x) {
  return {-x.xi2.adjoint(), x.xi1.adjoint(), -x.beta.adjoint(), x.alpha.adjoint()};
}

inline ADHMConfig act_k(const ADHMConfig& x) { return act_i(act_j(x)); }

// q = 0, 1, 2 for i, j, k.
inline ADHMConfig act_quat(int q, const ADHMConfig& x) {
  return q == 0 ? act_i(x) : q == 1 ? act_j(x) : act_k(x);
}

// Infinitesimal action of X in u(k).
inline ADHMConfig rho(const CMat& X, const ADHMConfig& c) {
  return {X * c.xi1 - c.xi1 * X, X * c.xi2 - c.xi2 * X, X * c.alpha, -c.beta * X};
}

inline ADHMConfig gauge(const CMat& g, const ADHMConfig& c) {
  CMat gi = g.inverse();
  return {g * c.xi1 * gi, g * c.xi2 * gi, g * c.alpha, c.beta * gi};
}

// Orthonormal basis of u(k) for <A,B> = Re tr(A^* B).
inline std::vector<CMat> lie_basis(int k) {
  std::vector<CMat> out;
  double s = 1.0 / std::sqrt(2.0);
  for (int a = 0; a < k; ++a) {
    CMat m = CMat::Zero(k, k);
    m(a, a) = I;
    out.push_back(m);
  }
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b) {
      CMat m = CMat::Zero(k, k);
      m(a, b) = s;
      m(b, a) = -s;
      out.push_back(m);
      CMat n = CMat::Zero(k, k);
      n(a, b) = I * s;
      n(b, a) = I * s;
      out.push_back(n);
    }
  return out;
}

inline double lie_inner(const CMat& A, const CMat& B) { return (A.adjoint() * B).trace().real(); }

inline RVec flatten(const ADHMConfig& c) {
  std::vector<cplx> z;
  for (const CMat* m : {&c.xi1, &c.xi2, &c.alpha, &c.beta})
    for (Eigen::Index j = 0; j < m->cols(); ++j)
      for (Eigen::Index i = 0; i < m->rows(); ++i) z.push_back((*m)(i, j));
  RVec x(2 * z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    x(2 * i) = z[i].real();
    x(2 * i + 1) = z[i].imag();
  }
  return x;
}

inline ADHMConfig unflatten(const ADHMRep& rep, const RVec& x) {
  ADHMConfig c = ADHMConfig::zero(rep);
  Eigen::Index p = 0;
  for (CMat* m : {&c.xi1, &c.xi2, &c.alpha, &c.beta})
    for (Eigen::Index j = 0; j < m->cols(); ++j)
      for (Eigen::Index i = 0; i < m->rows(); ++i, p += 2) (*m)(i, j) = {x(p), x(p + 1)};
  return c;
}

inline ADHMConfig random_config(const ADHMRep& rep, Rng& rng) {
  return {rng.cmat(rep.k, rep.k), rng.cmat(rep.k, rep.k), rng.cmat(rep.k, rep.r),
          rng.cmat(rep.r, rep.k)};
}

inline CMat random_lie(int k, Rng& rng) {
  CMat g = rng.cmat(k, k);
  return 0.5 * (g - g.adjoint());
}

// ------------------------------------------------------------ moment maps

// Brute-force pairings <q rho(X) phi, phi> for q = i, j, k.
inline Eigen::Vector3d moment_pairing_oracle(const ADHMRep& rep, const ADHMConfig& c,
                                             const CMat& X) {
  check_shape(rep, c);
  ADHMConfig v = rho(X, c);
  return {inner(act_i(v), c), inner(act_j(v), c), inner(act_k(v), c)};
}

// Components (mu_i, mu_j, mu_k) in u(k) with <mu_q, X> = <q rho(X) phi, phi>.
inline std::array<CMat, 3> hyperkahler_components(const MomentValue& m) {
  return {CMat(-I * m.muR), CMat(m.muC.adjoint() - m.muC), CMat(I * (m.muC + m.muC.adjoint()))};
}

inline Eigen::Vector3d moment_pairing_explicit(const MomentValue& m, const CMat& X) {
  auto mu = hyperkahler_components(m);
  return {lie_inner(mu[0], X), lie_inner(mu[1], X), lie_inner(mu[2], X)};
}

// |mu|^2 = |mu_R|^2 + 4 |mu_C|^2 in the chosen normalisation.
inline double moment_norm(const MomentValue& m) {
  return std::sqrt(m.muR.squaredNorm() + 4.0 * m.muC.squaredNorm());
}

// Coordinates of mu in the basis {q (x) e_a} of Im H (x) u(k).
inline RVec moment_coords(const ADHMRep& rep, const MomentValue& m) {
  auto mu = hyperkahler_components(m);
  auto basis = lie_basis(rep.k);
  RVec x(3 * basis.size());
  for (int q = 0; q < 3; ++q)
    for (std::size_t a = 0; a < basis.size(); ++a) x(q * basis.size() + a) = lie_inner(basis[a], mu[q]);
  return x;
}

// Gamma_Psi(q (x) X) = q rho(X) Psi, columns ordered as in moment_coords.
inline RMat gamma_psi(const ADHMRep& rep, const ADHMConfig& c) {
  check_shape(rep, c);
  auto basis = lie_basis(rep.k);
  RMat G(rep.real_dim(), 3 * basis.size());
  for (int q = 0; q < 3; ++q)
    for (std::size_t a = 0; a < basis.size(); ++a)
      G.col(q * basis.size() + a) = flatten(act_quat(q, rho(basis[a], c)));
  return G;
}

// Adjoint action on Im H (x) u(k) in the same coordinates.
inline RMat adjoint_coords(int k, const CMat& g) {
  auto basis = lie_basis(k);
  Eigen::Index n = basis.size();
  RMat A = RMat::Zero(3 * n, 3 * n);
  for (Eigen::Index a = 0; a < n; ++a) {
    CMat ga = g * basis[a] * g.adjoint();
    for (Eigen::Index b = 0; b < n; ++b) {
      double v = lie_inner(basis[b], ga);
      for (int q = 0; q < 3; ++q) A(q * n + b, q * n + a) = v;
    }
  }
  return A;
}

inline RVec grad_moment_norm2(const ADHMRep& rep, const ADHMConfig& c) {
  return 4.0 * gamma_psi(rep, c) * moment_coords(rep, moment_maps(rep, c));
}

// ------------------------------------------------------ compactness ratio

struct RatioSample {
  std::size_t attempt = 0;
  double mu_norm = 0;
  double gamma_mu_norm = 0;
  double ratio = 0;
};

struct CompactnessResult {
  double c = 0;  // supremum of |mu| / |Gamma_Psi mu| over accepted samples
  std::optional<ADHMConfig> worst;
  std::size_t attempts = 0;
  std::size_t accepted = 0;
  std::size_t excluded_zero = 0;
  double mean_ratio = 0;
  std::vector<RatioSample> samples;

  bool empty() const { return accepted == excluded_zero; }
};

struct CompactnessOptions {
  double delta = 0.1;
  std::size_t n_samples = 10000;
  std::size_t max_attempts = 0;  // 0: 20 * n_samples
  bool fixed_attempts = false;   // use exactly max_attempts draws, keep all in band
  int steps = 20;
  double step = 0.1;
  unsigned threads = 1;
  bool keep_samples = false;
};

// Gaussian seed, then normalised gradient steps on |mu|^2.
inline ADHMConfig band_candidate(const ADHMRep& rep, std::uint64_t seed, std::size_t attempt,
                                 const CompactnessOptions& opt) {
  Rng rng(seed, attempt);
  RVec x = rng.rvec(rep.real_dim());
  x.normalize();
  for (int s = 0; s < opt.steps; ++s) {
    ADHMConfig c = unflatten(rep, x);
    x -= opt.step * grad_moment_norm2(rep, c);
    double n = x.norm();
    if (n == 0) break;
    x /= n;
  }
  return unflatten(rep, x);
}

inline CompactnessResult compactness_ratio(const ADHMRep& rep, std::uint64_t seed,
                                           const CompactnessOptions& opt) {
  require(opt.delta > 0, "delta must be positive");
  require((rep.r == 1 && rep.k == 2) || (rep.r == 2 && rep.k == 1),
          "compactness ratio is implemented for (r,k) = (1,2) and (2,1)");
  std::size_t cap = opt.max_attempts ? opt.max_attempts : 20 * opt.n_samples;

  struct Slot {
    bool in_band = false;
    RatioSample s;
  };

  CompactnessResult res;
  std::vector<RatioSample> accepted;
  std::size_t next = 0;
  const std::size_t chunk = 512;
  while (next < cap && (opt.fixed_attempts || accepted.size() < opt.n_samples)) {
    std::size_t n = std::min(chunk, cap - next);
    std::vector<Slot> slots(n);
    parallel_for(n, opt.threads, [&](std::size_t i) {
      ADHMConfig c = band_candidate(rep, seed, next + i, opt);
      MomentValue m = moment_maps(rep, c);
      double mn = moment_norm(m);
      if (mn > opt.delta) return;
      slots[i].in_band = true;
      slots[i].s.attempt = next + i;
      slots[i].s.mu_norm = mn;
      slots[i].s.gamma_mu_norm = (gamma_psi(rep, c) * moment_coords(rep, m)).norm();
    });
    for (std::size_t i = 0; i < n; ++i) {
      res.attempts = next + i + 1;
      if (!slots[i].in_band) continue;
      accepted.push_back(slots[i].s);
      if (!opt.fixed_attempts && accepted.size() == opt.n_samples) break;
    }
    next += n;
  }

  double sum = 0;
  std::size_t used = 0;
  std::size_t worst_attempt = 0;
  for (auto& s : accepted) {
    if (s.mu_norm == 0.0) {
      ++res.excluded_zero;
      continue;
    }
    s.ratio = s.mu_norm / s.gamma_mu_norm;
    sum += s.ratio;
    ++used;
    if (s.ratio > res.c) {
      res.c = s.ratio;
      worst_attempt = s.attempt;
    }
  }
  res.accepted = accepted.size();
  res.mean_ratio = used ? sum / used : 0.0;
  if (used) res.worst = band_candidate(rep, seed, worst_attempt, opt);
  if (opt.keep_samples) res.samples = std::move(accepted);
  return res;
}

// ------------------------------------------------ (1,2) zero-locus algebra

struct ZeroLocus12 {
  double alpha_norm = 0, beta_norm = 0;
  double mu_norm = 0;
  bool matter_vanishes = false;
  Eigen::Vector2cd lambda = Eigen::Vector2cd::Zero();  // xi_hat_a e_+ = lambda_a e_+
  CMat frame;                                          // columns e_+, e_-
  bool degenerate = false;
  cplx tr1{}, tr2{};  // half traces removed from xi
};

inline ZeroLocus12 adhm12_zero_locus_analyze(const ADHMConfig& c, double tol = 1e-8) {
  ADHMRep rep{1, 2};
  check_shape(rep, c);
  MomentValue m = moment_maps(rep, c);
  ZeroLocus12 z;
  z.mu_norm = moment_norm(m);
  require(z.mu_norm <= tol, "configuration is not on the zero locus (|mu| = " +
                                std::to_string(z.mu_norm) + ")");
  z.alpha_norm = c.alpha.norm();
  z.beta_norm = c.beta.norm();
  z.matter_vanishes = std::max(z.alpha_norm, z.beta_norm) <= std::sqrt(tol);

  CMat id = CMat::Identity(2, 2);
  z.tr1 = 0.5 * c.xi1.trace();
  z.tr2 = 0.5 * c.xi2.trace();
  CMat h1 = c.xi1 - z.tr1 * id, h2 = c.xi2 - z.tr2 * id;

  // A fixed generic combination separates the joint eigenvalues.
  const cplx w{0.6180339887, 0.3141592654};
  CMat comb = h1 + w * h2;
  Eigen::ComplexEigenSolver<CMat> es(comb);
  CMat V = es.eigenvectors();
  Eigen::Index ip = std::real(es.eigenvalues()(0)) >= std::real(es.eigenvalues()(1)) ? 0 : 1;
  CVec ep = V.col(ip).normalized();
  CVec em(2);
  em << -std::conj(ep(1)), std::conj(ep(0));  // unitary completion
  z.frame.resize(2, 2);
  z.frame << ep, em;
  z.lambda << ep.dot(h1 * ep), ep.dot(h2 * ep);
  if (z.lambda.norm() < 1e-8) {
    z.degenerate = true;
    z.frame = id;
  }
  return z;
}

// lambda_a (e+ e+^* - e- e-^*) for a = 1, 2.
inline std::pair<CMat, CMat> adhm12_reconstruct_tracefree(const ZeroLocus12& z) {
  CVec ep = z.frame.col(0), em = z.frame.col(1);
  CMat P = ep * ep.adjoint() - em * em.adjoint();
  return {z.lambda(0) * P, z.lambda(1) * P};
}

// ----------------------------------------------------- (2,1) realification

// Psi = (alpha, beta^*) as an element of C^2 (x) H = E (x) S+  +  E (x) S-.
inline quatspin::TensorSpinor psi21(const ADHMConfig& c) {
  return {c.alpha.row(0).transpose(), c.beta.col(0).conjugate()};
}

inline ADHMConfig from_psi21(const quatspin::TensorSpinor& s, const ADHMConfig& base) {
  ADHMConfig c = base;
  c.alpha = s.plus.transpose();
  c.beta = s.minus.conjugate();
  return c;
}

struct Realify21 {
  cplx lambda{1.0, 0.0};
  std::array<cplx, 2> alternatives{};  // lambda and -lambda both realify
  ADHMConfig realified;
  double real_residual = 0;
  double mu_norm = 0;
};

inline Realify21 adhm21_realify(const ADHMConfig& c, double tol = 1e-8) {
  ADHMRep rep{2, 1};
  check_shape(rep, c);
  Realify21 out;
  out.mu_norm = moment_norm(moment_maps(rep, c));
  require(out.mu_norm <= tol, "configuration is not on the zero locus (|mu| = " +
                                  std::to_string(out.mu_norm) + ")");
  quatspin::RealStructure rs(2);
  quatspin::TensorSpinor s = psi21(c);
  double n2 = s.plus.squaredNorm() + s.minus.squaredNorm();
  require(n2 > 0, "Psi = 0 has no realifying phase", ErrorKind::degenerate);

  // lambda Psi real  <=>  lambda^2 = conj(<tau Psi, Psi>) / |Psi|^2.
  quatspin::TensorSpinor t = rs.tau(s);
  cplx pairing = t.plus.dot(s.plus) + t.minus.dot(s.minus);
  require(std::abs(pairing) > 1e-12 * n2, "no realifying phase for this Psi",
          ErrorKind::degenerate);
  cplx l2 = std::conj(pairing) / std::abs(pairing);
  cplx l = std::sqrt(l2);
  out.lambda = l;
  out.alternatives = {l, -l};
  quatspin::TensorSpinor ls{l * s.plus, l * s.minus};
  quatspin::TensorSpinor tl = rs.tau(ls);
  out.real_residual = std::sqrt((tl.plus - ls.plus).squaredNorm() +
                                (tl.minus - ls.minus).squaredNorm()) /
                      std::sqrt(n2);
  auto [re, im] = rs.re_project(ls);
  out.realified = from_psi21(re, c);
  return out;
}

}  // namespace crlab::adhm
