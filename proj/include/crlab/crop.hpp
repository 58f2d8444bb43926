#pragma once

// Real Cauchy-Riemann operators  d = dbar + b + a(conj)  on the square torus
// C/(Z + iZ), discretised in Fourier modes.  Sections of the twisted bundle
// V (x) l live on the shifted lattice Z^2 + eps; a mode kappa is stored in
// doubled coordinates K = 2 kappa so every sector uses integer keys.

#include "core.hpp"

#include <Eigen/SparseLU>
#include <nlohmann/json.hpp>

#include <array>
#include <limits>
#include <map>
#include <optional>

namespace crlab::crop {

using Mode = std::array<int, 2>;  // 2 * kappa

struct Twist {
  int e1 = 0;  // 2 * eps_1
  int e2 = 0;

  bool trivial() const { return e1 == 0 && e2 == 0; }
  bool operator==(const Twist&) const = default;
  std::string label() const {
    auto h = [](int e) { return e ? std::string("1/2") : std::string("0"); };
    return "(" + h(e1) + "," + h(e2) + ")";
  }
  static std::array<Twist, 3> nontrivial() { return {Twist{1, 0}, Twist{0, 1}, Twist{1, 1}}; }
  static std::array<Twist, 4> all() { return {Twist{0, 0}, Twist{1, 0}, Twist{0, 1}, Twist{1, 1}}; }
};

inline Twist parse_twist(const std::string& s) {
  if (s == "(0,0)" || s == "0,0") return {0, 0};
  if (s == "(1/2,0)" || s == "1/2,0") return {1, 0};
  if (s == "(0,1/2)" || s == "0,1/2") return {0, 1};
  if (s == "(1/2,1/2)" || s == "1/2,1/2") return {1, 1};
  fail(ErrorKind::usage, "unknown twist '" + s + "'");
}

using CoeffTable = std::map<std::pair<int, int>, CMat>;

struct CROperatorSpec {
  int rank = 1;
  CoeffTable linear;      // b_q, q in Z^2
  CoeffTable antilinear;  // a_q, acting on conj(s)
  std::optional<CMat> gamma;

  static CROperatorSpec dolbeault(int r) { return CROperatorSpec{r, {}, {}, std::nullopt}; }

  int bandwidth() const {
    int w = 0;
    for (const auto* t : {&linear, &antilinear})
      for (const auto& [q, m] : *t) w = std::max({w, std::abs(q.first), std::abs(q.second)});
    return w;
  }

  void add_linear(int m, int n, const CMat& c) { accumulate(linear, m, n, c); }
  void add_antilinear(int m, int n, const CMat& c) { accumulate(antilinear, m, n, c); }

  double coeff_norm() const {
    double s = 0;
    for (const auto* t : {&linear, &antilinear})
      for (const auto& [q, m] : *t) s += m.norm();
    return s;
  }

 private:
  void accumulate(CoeffTable& t, int m, int n, const CMat& c) {
    auto it = t.find({m, n});
    if (it == t.end())
      t.emplace(std::pair{m, n}, c);
    else
      it->second += c;
  }
};

inline CoeffTable combine(const CoeffTable& x, double sx, const CoeffTable& y, double sy) {
  CoeffTable out;
  for (const auto& [q, m] : x) out[q] = sx * m;
  for (const auto& [q, m] : y) {
    auto it = out.find(q);
    if (it == out.end())
      out[q] = sy * m;
    else
      it->second += sy * m;
  }
  return out;
}

// (1 - t) p + t q on the zeroth-order coefficients.
inline CROperatorSpec lerp(const CROperatorSpec& p, const CROperatorSpec& q, double t) {
  require(p.rank == q.rank, "path endpoints have different ranks", ErrorKind::usage);
  CROperatorSpec s{p.rank, combine(p.linear, 1 - t, q.linear, t),
                   combine(p.antilinear, 1 - t, q.antilinear, t), p.gamma};
  return s;
}

inline bool coeff_tables_close(const CoeffTable& x, const CoeffTable& y, double tol) {
  auto d = combine(x, 1.0, y, -1.0);
  for (const auto& [q, m] : d)
    if (max_abs(m) > tol) return false;
  return true;
}

// ---------------------------------------------------------- index formula

inline int index_formula(int genus, int degV, int rank, int n_branch) {
  require(genus >= 0 && rank >= 1, "genus must be >= 0 and rank >= 1", ErrorKind::usage);
  require(n_branch >= 0 && n_branch % 2 == 0,
          "branch count must be even and non-negative (got " + std::to_string(n_branch) + ")",
          ErrorKind::usage);
  return 2 * degV + rank * (2 - 2 * genus) - n_branch * rank;
}

// ------------------------------------------------------------- mode bases

struct ModeBasis {
  int rank = 1;
  std::vector<Mode> modes;
  std::map<Mode, int> lookup;

  int find(const Mode& k) const {
    auto it = lookup.find(k);
    return it == lookup.end() ? -1 : it->second;
  }
  Eigen::Index complex_dim() const { return static_cast<Eigen::Index>(modes.size()) * rank; }
  Eigen::Index real_dim() const { return 2 * complex_dim(); }
  Eigen::Index cindex(int mode, int comp) const { return Eigen::Index(mode) * rank + comp; }
};

template <class Pred>
ModeBasis make_basis(int N, int r, Pred keep) {
  ModeBasis b;
  b.rank = r;
  for (int K1 = -2 * N; K1 <= 2 * N; ++K1)
    for (int K2 = -2 * N; K2 <= 2 * N; ++K2) {
      if (!keep(K1, K2)) continue;
      b.lookup[{K1, K2}] = static_cast<int>(b.modes.size());
      b.modes.push_back({K1, K2});
    }
  return b;
}

inline bool congruent(int K, int e) { return ((K % 2) + 2) % 2 == e; }

// {kappa in Z^2 + eps : |kappa_i| <= N}; closed under kappa -> -kappa.
inline ModeBasis sector_basis(Twist tw, int N, int r) {
  return make_basis(N, r, [&](int K1, int K2) { return congruent(K1, tw.e1) && congruent(K2, tw.e2); });
}

// Dual lattice of the double cover: the union of the sectors 0 and eps.
inline ModeBasis cover_basis(Twist tw, int N, int r) {
  require(!tw.trivial(), "the trivial twist has a disconnected double cover");
  return make_basis(N, r, [&](int K1, int K2) {
    bool zero = congruent(K1, 0) && congruent(K2, 0);
    bool eps = congruent(K1, tw.e1) && congruent(K2, tw.e2);
    return zero || eps;
  });
}

// dbar e^{2 pi i kappa.x} = pi i (kappa_1 + i kappa_2) e^{2 pi i kappa.x}
inline cplx dbar_symbol(const Mode& K) { return pi * I * cplx(0.5 * K[0], 0.5 * K[1]); }

// ---------------------------------------------------------------- assembly

struct RealLinearMatrix {
  RSparse matrix;
  ModeBasis basis;
  int N = 0;
  Twist twist;
  bool cover = false;

  RMat dense() const { return RMat(matrix); }
  Eigen::Index rows() const { return matrix.rows(); }
  Eigen::Index cols() const { return matrix.cols(); }

  CVec apply(const CVec& s) const { return to_complex(matrix * to_real(s)); }
};

inline RealLinearMatrix assemble_on(const CROperatorSpec& spec, ModeBasis basis, bool with_dbar = true) {
  require(spec.rank == basis.rank, "spec rank does not match the mode basis");
  const int r = spec.rank;
  Triplets t;
  for (int i = 0; i < static_cast<int>(basis.modes.size()); ++i) {
    const Mode& out = basis.modes[i];
    if (with_dbar) {
      cplx d = dbar_symbol(out);
      for (int c = 0; c < r; ++c) push_linear(t, basis.cindex(i, c), basis.cindex(i, c), d);
    }
    // (b s)_out = sum_q b_q s_{out - q}
    for (const auto& [q, b] : spec.linear) {
      int j = basis.find({out[0] - 2 * q.first, out[1] - 2 * q.second});
      if (j < 0) continue;
      for (int c = 0; c < r; ++c)
        for (int d = 0; d < r; ++d) push_linear(t, basis.cindex(i, c), basis.cindex(j, d), b(c, d));
    }
    // (a conj s)_out = sum_q a_q conj(s_{q - out})
    for (const auto& [q, a] : spec.antilinear) {
      int j = basis.find({2 * q.first - out[0], 2 * q.second - out[1]});
      if (j < 0) continue;
      for (int c = 0; c < r; ++c)
        for (int d = 0; d < r; ++d) push_antilinear(t, basis.cindex(i, c), basis.cindex(j, d), a(c, d));
    }
  }
  RealLinearMatrix out;
  out.matrix.resize(basis.real_dim(), basis.real_dim());
  out.matrix.setFromTriplets(t.begin(), t.end());
  out.basis = std::move(basis);
  return out;
}

inline RealLinearMatrix assemble_operator(const CROperatorSpec& spec, Twist tw, int N) {
  require(N >= spec.bandwidth() + 2, "truncation N = " + std::to_string(N) +
                                         " must be at least coefficient bandwidth + 2");
  auto m = assemble_on(spec, sector_basis(tw, N, spec.rank));
  m.N = N;
  m.twist = tw;
  return m;
}

// ----------------------------------------------------------- kernel report

struct KernelOptions {
  double rank_tol = 1e-8;
  double min_gap = 100.0;
  Eigen::Index dense_limit = 1600;
  bool want_vectors = false;
  bool check_gap = true;
};

struct KernelReport {
  std::vector<double> singular_values;  // ascending; only the low end when partial
  bool partial = false;
  int dim_ker = 0;
  int dim_coker = 0;
  double rank_tol = 1e-8;
  double sigma_max = 0;
  double gap = std::numeric_limits<double>::infinity();
  RMat kernel;    // columns, real coordinates
  RMat cokernel;
  std::string method;

  int index() const { return dim_ker - dim_coker; }
  double sigma_min() const { return singular_values.empty() ? 0.0 : singular_values.front(); }
};

namespace detail {

inline double power_sigma_max(const RSparse& A, int iters = 80) {
  RVec x = RVec::Constant(A.cols(), 1.0);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += 1e-3 * std::sin(1.0 + i);
  x.normalize();
  double s = 0;
  for (int k = 0; k < iters; ++k) {
    RVec y = A.transpose() * (A * x);
    double n = y.norm();
    if (n == 0) return 0;
    s = std::sqrt(n);
    x = y / n;
  }
  return std::max(s, (A * x).norm());
}

struct LowSpectrum {
  RVec sigma;  // ascending
  RMat right;  // right singular vectors, columns
};

inline RMat orthonormal_columns(const RMat& Z) {
  Eigen::HouseholderQR<RMat> qr(Z);
  RMat Q = RMat::Identity(Z.rows(), Z.cols());
  Q.applyOnTheLeft(qr.householderQ());
  return Q;
}

// Shifted sparse LU of M, shared by the kernel and cokernel sides:
// (M^T M)^{-1} ~ L^{-1} L^{-T} and (M M^T)^{-1} ~ L^{-T} L^{-1}, L = M + delta.
class ShiftedLU {
 public:
  ShiftedLU(const RSparse& M, double sigma_max) : n_(M.cols()) {
    double delta = 1e-9 * sigma_max;
    for (int attempt = 0; attempt < 4; ++attempt, delta *= 10) {
      RSparse id(n_, n_);
      id.setIdentity();
      RSparse L = M + delta * id;
      L.makeCompressed();
      lu_.analyzePattern(L);
      lu_.factorize(L);
      if (lu_.info() == Eigen::Success) return;
    }
    fail(ErrorKind::nonconvergence, "sparse factorisation failed");
  }

  RMat inv_normal(const RMat& Q, bool transposed) {
    if (!transposed) {
      RMat y = lu_.transpose().solve(Q);
      return lu_.solve(y);
    }
    RMat y = lu_.solve(Q);
    return lu_.transpose().solve(y);
  }

 private:
  Eigen::Index n_;
  Eigen::SparseLU<RSparse, Eigen::COLAMDOrdering<int>> lu_;
};

// Subspace iteration with the shifted inverse, then Rayleigh-Ritz with A Q
// so that tiny singular values are not lost to squaring.  Iterates until
// the values below `cut` and the first one above it have settled.
inline LowSpectrum low_singular(const RSparse& A, ShiftedLU& lu, bool transposed, int block,
                                double sigma_max, double cut) {
  const Eigen::Index n = A.cols();
  block = static_cast<int>(std::min<Eigen::Index>(block, n));
  Rng rng(0x5eed, static_cast<std::uint64_t>(n) + (transposed ? 1 : 0));
  RMat Q(n, block);
  for (int j = 0; j < block; ++j) Q.col(j) = rng.rvec(n);
  Q = orthonormal_columns(Q);

  RVec prev = RVec::Constant(block, -1.0);
  LowSpectrum out;
  for (int it = 0; it < 100; ++it) {
    Q = orthonormal_columns(lu.inv_normal(Q, transposed));
    Eigen::JacobiSVD<RMat> svd(A * Q, Eigen::ComputeThinV);
    RVec s = svd.singularValues().reverse();
    Q = Q * svd.matrixV().rowwise().reverse();
    out.sigma = s;
    out.right = Q;
    bool done = it >= 1;
    for (Eigen::Index i = 0; i < s.size() && done; ++i) {
      if (s(i) < cut) {
        done = std::abs(s(i) - prev(i)) <= 1e-10 * sigma_max;
      } else {
        done = std::abs(s(i) - prev(i)) <= 1e-4 * s(i);
        break;
      }
    }
    if (done) break;
    prev = s;
  }
  return out;
}

}  // namespace detail

inline void fill_gap(KernelReport& rep, const KernelOptions& opt, const std::vector<double>& sv) {
  const int k = rep.dim_ker;
  if (k > 0 && k < static_cast<int>(sv.size())) {
    rep.gap = sv[k] / std::max(sv[k - 1], std::numeric_limits<double>::min());
    if (opt.check_gap && rep.gap < opt.min_gap)
      fail(ErrorKind::degenerate, "kernel decision has spectral gap " + std::to_string(rep.gap) +
                                      " < " + std::to_string(opt.min_gap));
  }
}

inline KernelReport kernel_report(const RSparse& M, const KernelOptions& opt = {}) {
  require(M.rows() > 0 && M.cols() > 0, "kernel_report of an empty matrix");
  require(opt.rank_tol > 0 && opt.rank_tol < 1, "rank_tol must lie in (0,1)");
  KernelReport rep;
  rep.rank_tol = opt.rank_tol;

  if (std::max(M.rows(), M.cols()) <= opt.dense_limit) {
    rep.method = "dense-svd";
    RMat D(M);
    unsigned flags = opt.want_vectors ? (Eigen::ComputeFullU | Eigen::ComputeFullV) : 0;
    Eigen::BDCSVD<RMat> svd(D, flags);
    RVec s = svd.singularValues();
    rep.sigma_max = s.size() ? s(0) : 0.0;
    double cut = opt.rank_tol * rep.sigma_max;
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) rank += s(i) >= cut && s(i) > 0;
    rep.dim_ker = static_cast<int>(M.cols()) - rank;
    rep.dim_coker = static_cast<int>(M.rows()) - rank;
    rep.singular_values.assign(s.data(), s.data() + s.size());
    std::reverse(rep.singular_values.begin(), rep.singular_values.end());
    // Pad with the zeros implied by a rectangular shape.
    rep.singular_values.insert(rep.singular_values.begin(),
                               std::max(M.rows(), M.cols()) - s.size(), 0.0);
    if (opt.want_vectors) {
      rep.kernel = svd.matrixV().rightCols(rep.dim_ker);
      rep.cokernel = svd.matrixU().rightCols(rep.dim_coker);
    }
    fill_gap(rep, opt, rep.singular_values);
    return rep;
  }

  rep.method = "sparse-shift-invert";
  rep.partial = true;
  rep.sigma_max = detail::power_sigma_max(M);
  double cut = opt.rank_tol * rep.sigma_max;
  detail::ShiftedLU lu(M, rep.sigma_max);
  auto count_small = [&](const RSparse& A, bool transposed, detail::LowSpectrum& ls) {
    int block = 16;
    for (;;) {
      ls = detail::low_singular(A, lu, transposed, block, rep.sigma_max, cut);
      int small = 0;
      for (Eigen::Index i = 0; i < ls.sigma.size(); ++i) small += ls.sigma(i) < cut;
      if (small < ls.sigma.size() || block >= A.cols()) return small;
      block *= 2;
    }
  };
  detail::LowSpectrum right, left;
  rep.dim_ker = count_small(M, false, right);
  RSparse Mt = M.transpose();
  rep.dim_coker = count_small(Mt, true, left);
  rep.singular_values.assign(right.sigma.data(), right.sigma.data() + right.sigma.size());
  if (opt.want_vectors) {
    rep.kernel = right.right.leftCols(rep.dim_ker);
    rep.cokernel = left.right.leftCols(rep.dim_coker);
  }
  fill_gap(rep, opt, rep.singular_values);
  return rep;
}

inline KernelReport kernel_report(const RealLinearMatrix& M, const KernelOptions& opt = {}) {
  return kernel_report(M.matrix, opt);
}

// Smallest singular value, scaled tolerance-free.
inline double sigma_min(const RealLinearMatrix& M, Eigen::Index dense_limit = 1600) {
  if (M.cols() <= dense_limit) {
    Eigen::BDCSVD<RMat> svd(M.dense());
    return svd.singularValues().minCoeff();
  }
  double smax = detail::power_sigma_max(M.matrix);
  detail::ShiftedLU lu(M.matrix, smax);
  return detail::low_singular(M.matrix, lu, false, 4, smax, 0.0).sigma(0);
}

// --------------------------------------------------------------- adjoints

// d^dagger = dbar - b^T - a^H (conj), characterised by
//   Re sum (d^dagger sigma)^T t = - Re sum sigma^T (d t)
// for the bilinear pairing of V^* with V.
inline CROperatorSpec adjoint_spec(const CROperatorSpec& s) {
  CROperatorSpec out = CROperatorSpec::dolbeault(s.rank);
  for (const auto& [q, b] : s.linear) out.linear[q] = -b.transpose();
  for (const auto& [q, a] : s.antilinear) out.antilinear[{-q.first, -q.second}] = -a.adjoint();
  return out;
}

// d^gamma = gamma o d o gamma^{-1} for a constant pairing gamma.
inline CROperatorSpec gamma_conjugate(const CROperatorSpec& s, const CMat& G) {
  require(G.rows() == s.rank && G.cols() == s.rank, "gamma has the wrong size");
  Eigen::FullPivLU<CMat> lu(G);
  require(lu.isInvertible(), "gamma is not invertible");
  CMat Gi = lu.inverse();
  CMat Gbi = G.conjugate().inverse();
  CROperatorSpec out = CROperatorSpec::dolbeault(s.rank);
  for (const auto& [q, b] : s.linear) out.linear[q] = G * b * Gi;
  for (const auto& [q, a] : s.antilinear) out.antilinear[q] = G * a * Gbi;
  out.gamma = s.gamma;
  return out;
}

// Zeroth-order difference x - y as a spec (the dbar parts cancel).
inline CROperatorSpec difference(const CROperatorSpec& x, const CROperatorSpec& y) {
  return CROperatorSpec{x.rank, combine(x.linear, 1, y.linear, -1),
                        combine(x.antilinear, 1, y.antilinear, -1), std::nullopt};
}

inline double operator_norm(const RSparse& A) {
  if (A.nonZeros() == 0) return 0.0;
  if (A.cols() <= 1600) return Eigen::BDCSVD<RMat>(RMat(A)).singularValues()(0);
  return detail::power_sigma_max(A, 400);
}

// || d^dagger - d^gamma || on the truncated untwisted space.
inline double selfadjoint_defect(const CROperatorSpec& s, const CMat& G, int N = -1) {
  if (N < 0) N = 2 * s.bandwidth() + 2;
  auto D = difference(adjoint_spec(s), gamma_conjugate(s, G));
  return operator_norm(assemble_on(D, sector_basis(Twist{}, N, s.rank), false).matrix);
}

// 1/2 (d + gamma^{-1} d^dagger gamma); gamma-self-adjoint when G^T = +-G.
inline CROperatorSpec symmetrize(const CROperatorSpec& s, const CMat& G) {
  require(max_abs(CMat(G - G.transpose())) < 1e-12 * (1 + max_abs(G)) ||
              max_abs(CMat(G + G.transpose())) < 1e-12 * (1 + max_abs(G)),
          "gamma must be symmetric or antisymmetric");
  CMat Gi = G.inverse();
  CROperatorSpec adj = adjoint_spec(s);
  CROperatorSpec back = CROperatorSpec::dolbeault(s.rank);
  for (const auto& [q, b] : adj.linear) back.linear[q] = Gi * b * G;
  for (const auto& [q, a] : adj.antilinear) back.antilinear[q] = Gi * a * G.conjugate();
  CROperatorSpec out{s.rank, combine(s.linear, 0.5, back.linear, 0.5),
                     combine(s.antilinear, 0.5, back.antilinear, 0.5), G};
  return out;
}

// Re sum_kappa sigma_{-kappa}^T t_kappa on a sector basis.
inline double bilinear_pairing(const ModeBasis& B, const CVec& sigma, const CVec& t) {
  cplx acc = 0;
  for (int i = 0; i < static_cast<int>(B.modes.size()); ++i) {
    int j = B.find({-B.modes[i][0], -B.modes[i][1]});
    if (j < 0) continue;
    for (int c = 0; c < B.rank; ++c) acc += sigma(B.cindex(j, c)) * t(B.cindex(i, c));
  }
  return acc.real();
}

// -------------------------------------------------------------- sections

// Pointwise value of a sector section and its x/y derivatives.
struct PointValue {
  CVec s, sx, sy;
};

inline PointValue evaluate(const ModeBasis& B, const CVec& c, double x, double y) {
  PointValue p{CVec::Zero(B.rank), CVec::Zero(B.rank), CVec::Zero(B.rank)};
  for (int i = 0; i < static_cast<int>(B.modes.size()); ++i) {
    double k1 = 0.5 * B.modes[i][0], k2 = 0.5 * B.modes[i][1];
    cplx e = std::exp(2 * pi * I * (k1 * x + k2 * y));
    for (int a = 0; a < B.rank; ++a) {
      cplx v = c(B.cindex(i, a)) * e;
      p.s(a) += v;
      p.sx(a) += 2 * pi * I * k1 * v;
      p.sy(a) += 2 * pi * I * k2 * v;
    }
  }
  return p;
}

inline CMat eval_coeff(const CoeffTable& t, int r, double x, double y) {
  CMat m = CMat::Zero(r, r);
  for (const auto& [q, c] : t) m += c * std::exp(2 * pi * I * (q.first * x + q.second * y));
  return m;
}

// Multiply a section by a real trigonometric polynomial f (modes in Z^2),
// dropping modes outside the basis.
inline CVec multiply(const ModeBasis& B, const std::map<std::pair<int, int>, cplx>& f, const CVec& s) {
  CVec out = CVec::Zero(s.size());
  for (int i = 0; i < static_cast<int>(B.modes.size()); ++i)
    for (const auto& [q, fq] : f) {
      int j = B.find({B.modes[i][0] - 2 * q.first, B.modes[i][1] - 2 * q.second});
      if (j < 0) continue;
      for (int a = 0; a < B.rank; ++a) out(B.cindex(i, a)) += fq * s(B.cindex(j, a));
    }
  return out;
}

// --------------------------------------------------------------- the cover

struct CoverReport {
  int dim_cover = 0;
  int dim_base = 0;
  int dim_twisted = 0;
  int invariant = 0;       // deck-invariant part of the cover kernel
  int anti_invariant = 0;  // deck-anti-invariant part
  bool splitting_holds = false;
  RealLinearMatrix matrix;
};

// Pull d back to the double cover determined by the twist and compare
// kernels.  The deck transformation acts by -1 on the eps-sector modes.
inline CoverReport pullback_cover(const CROperatorSpec& spec, Twist tw, int N,
                                  const KernelOptions& opt = {}) {
  require(!tw.trivial(), "pullback_cover needs a nontrivial twist (the trivial cover is disconnected)");
  require(N >= spec.bandwidth() + 2, "truncation too small for the coefficients");
  CoverReport rep;
  rep.matrix = assemble_on(spec, cover_basis(tw, N, spec.rank));
  rep.matrix.N = N;
  rep.matrix.twist = tw;
  rep.matrix.cover = true;
  KernelOptions o = opt;
  o.want_vectors = true;
  auto kc = kernel_report(rep.matrix, o);
  rep.dim_cover = kc.dim_ker;
  rep.dim_base = kernel_report(assemble_operator(spec, Twist{}, N), opt).dim_ker;
  rep.dim_twisted = kernel_report(assemble_operator(spec, tw, N), opt).dim_ker;

  if (kc.dim_ker > 0) {
    const ModeBasis& B = rep.matrix.basis;
    RVec deck(B.real_dim());
    for (int i = 0; i < static_cast<int>(B.modes.size()); ++i) {
      bool eps = !(congruent(B.modes[i][0], 0) && congruent(B.modes[i][1], 0));
      for (int k = 0; k < 2 * B.rank; ++k) deck(2 * B.rank * i + k) = eps ? -1.0 : 1.0;
    }
    // Eigenvalues of the deck action restricted to the kernel.
    RMat K = kc.kernel;
    RMat A = K.transpose() * deck.asDiagonal() * K;
    Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (A + A.transpose()));
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
      (es.eigenvalues()(i) > 0 ? rep.invariant : rep.anti_invariant)++;
  }
  rep.splitting_holds = rep.dim_cover == rep.dim_base + rep.dim_twisted;
  return rep;
}

// ------------------------------------------------ J-holomorphic sections

struct JHoloReport {
  double defect = 0;         // sup of the V-part of 1/2 (Ts + J Ts j)
  double base_part = 0;      // sup of the TC-part, zero by construction
  double fourier_value = 0;  // sup of (d s) from the assembled matrix
  double mismatch = 0;       // sup |pointwise - Fourier|
  double c1_norm = 0;        // sup |s| + |ds|
};

// Evaluates the homogeneous almost complex structure J = [[j, 0], [a, i]] on
// T(total space) = TC + V along s.  With a_s(Y) = 2i n(s) dzbar(Y), where n is
// the zeroth-order part of d, the V-part of 1/2 (Ts + J o Ts o j) at d/dx is
// (d s) itself.
inline JHoloReport j_holomorphy_defect(const CROperatorSpec& spec, const ModeBasis& B, const CVec& s,
                                       int grid = 16) {
  require(spec.rank == B.rank, "section rank does not match the spec");
  const int r = B.rank;
  const int n = 2 + 2 * r;
  CVec ds_f = assemble_on(spec, B).apply(s);
  JHoloReport rep;
  for (int gx = 0; gx < grid; ++gx)
    for (int gy = 0; gy < grid; ++gy) {
      double x = double(gx) / grid, y = double(gy) / grid;
      PointValue p = evaluate(B, s, x, y);
      CVec nz = eval_coeff(spec.linear, r, x, y) * p.s +
                eval_coeff(spec.antilinear, r, x, y) * p.s.conjugate();
      // J as a real n x n matrix in the basis (dx, dy, Re/Im of V).
      RMat J = RMat::Zero(n, n);
      J(1, 0) = 1;
      J(0, 1) = -1;
      for (int a = 0; a < r; ++a) {
        J(2 + 2 * a + 1, 2 + 2 * a) = 1;
        J(2 + 2 * a, 2 + 2 * a + 1) = -1;
        // a_s(Y) = 2i n dzbar(Y), dzbar(Y) = Y1 - i Y2.
        cplx col_x = 2.0 * I * nz(a), col_y = 2.0 * I * nz(a) * (-I);
        J(2 + 2 * a, 0) = col_x.real();
        J(2 + 2 * a + 1, 0) = col_x.imag();
        J(2 + 2 * a, 1) = col_y.real();
        J(2 + 2 * a + 1, 1) = col_y.imag();
      }
      auto Ts = [&](const Eigen::Vector2d& Y) {
        RVec v(n);
        v(0) = Y(0);
        v(1) = Y(1);
        for (int a = 0; a < r; ++a) {
          cplx d = Y(0) * p.sx(a) + Y(1) * p.sy(a);
          v(2 + 2 * a) = d.real();
          v(2 + 2 * a + 1) = d.imag();
        }
        return v;
      };
      Eigen::Vector2d X(1, 0), jX(0, 1);
      RVec out = 0.5 * (Ts(X) + J * Ts(jX));
      rep.base_part = std::max(rep.base_part, out.head<2>().norm());
      CVec vpart(r);
      for (int a = 0; a < r; ++a) vpart(a) = {out(2 + 2 * a), out(2 + 2 * a + 1)};
      // Fourier evaluation of d s at the same point.
      CVec dsf = CVec::Zero(r);
      for (int i = 0; i < static_cast<int>(B.modes.size()); ++i) {
        cplx e = std::exp(2 * pi * I * (0.5 * B.modes[i][0] * x + 0.5 * B.modes[i][1] * y));
        for (int a = 0; a < r; ++a) dsf(a) += ds_f(B.cindex(i, a)) * e;
      }
      rep.defect = std::max(rep.defect, vpart.norm());
      rep.fourier_value = std::max(rep.fourier_value, dsf.norm());
      rep.mismatch = std::max(rep.mismatch, (vpart - dsf).norm());
      rep.c1_norm = std::max(rep.c1_norm, p.s.norm() + p.sx.norm() + p.sy.norm());
    }
  return rep;
}

// ------------------------------------------------------------- sampling

// Random coefficients on modes |q_i| <= band with total norm `size`.
inline CROperatorSpec random_spec(int r, int band, double size, Rng& rng, bool with_linear = true,
                                  bool with_antilinear = true) {
  CROperatorSpec s = CROperatorSpec::dolbeault(r);
  for (int m = -band; m <= band; ++m)
    for (int n = -band; n <= band; ++n) {
      if (with_linear) s.linear[{m, n}] = rng.cmat(r, r);
      if (with_antilinear) s.antilinear[{m, n}] = rng.cmat(r, r);
    }
  double nrm = s.coeff_norm();
  if (nrm > 0)
    for (auto* t : {&s.linear, &s.antilinear})
      for (auto& [q, c] : *t) c *= size / nrm;
  return s;
}

// --------------------------------------------------------------- JSON

inline nlohmann::json matrix_to_json(const CMat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(row);
  }
  return rows;
}

inline CMat matrix_from_json(const nlohmann::json& j, int r, const std::string& what) {
  require(j.is_array() && static_cast<int>(j.size()) == r, what + ": expected " + std::to_string(r) + " rows",
          ErrorKind::usage);
  CMat m(r, r);
  for (int i = 0; i < r; ++i) {
    require(j[i].is_array() && static_cast<int>(j[i].size()) == r, what + ": bad row", ErrorKind::usage);
    for (int k = 0; k < r; ++k) {
      const auto& e = j[i][k];
      require(e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number(),
              what + ": entries are [re, im] pairs", ErrorKind::usage);
      m(i, k) = {e[0].get<double>(), e[1].get<double>()};
    }
  }
  return m;
}

inline nlohmann::json spec_to_json(const CROperatorSpec& s) {
  nlohmann::json j;
  j["rank"] = s.rank;
  for (const auto& [key, table] : {std::pair{"linear_coeff", &s.linear}, {"antilinear_coeff", &s.antilinear}}) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [q, m] : *table) arr.push_back({q.first, q.second, matrix_to_json(m)});
    j[key] = arr;
  }
  if (s.gamma) j["gamma"] = matrix_to_json(*s.gamma);
  return j;
}

inline CROperatorSpec spec_from_json(const nlohmann::json& j) {
  require(j.is_object(), "operator spec must be an object", ErrorKind::usage);
  for (const auto& [k, v] : j.items())
    require(k == "rank" || k == "linear_coeff" || k == "antilinear_coeff" || k == "gamma",
            "unknown key '" + k + "' in operator spec", ErrorKind::usage);
  require(j.contains("rank") && j["rank"].is_number_integer() && j["rank"].get<int>() >= 1,
          "operator spec needs a positive integer rank", ErrorKind::usage);
  CROperatorSpec s = CROperatorSpec::dolbeault(j["rank"].get<int>());
  for (const auto& [key, table] : {std::pair{"linear_coeff", &s.linear}, {"antilinear_coeff", &s.antilinear}}) {
    if (!j.contains(key)) continue;
    require(j[key].is_array(), std::string(key) + " must be an array", ErrorKind::usage);
    for (const auto& e : j[key]) {
      require(e.is_array() && e.size() == 3 && e[0].is_number_integer() && e[1].is_number_integer(),
              std::string(key) + " entries are [m, n, matrix]", ErrorKind::usage);
      CMat m = matrix_from_json(e[2], s.rank, key);
      std::pair q{e[0].get<int>(), e[1].get<int>()};
      auto it = table->find(q);
      if (it == table->end())
        table->emplace(q, m);
      else
        it->second += m;
    }
  }
  if (j.contains("gamma")) s.gamma = matrix_from_json(j["gamma"], s.rank, "gamma");
  return s;
}

}  // namespace crlab::crop
