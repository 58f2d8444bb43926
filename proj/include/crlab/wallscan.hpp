#pragma once

// Wall crossings of 2-rigidity along affine paths of operators
//   d_t = dbar + B + t D,   t in [t0, t1],
// detected per twisted sector through the smallest singular value.

#include "crop.hpp"

#include <functional>
#include <nlohmann/json.hpp>

namespace crlab::wallscan {

using crop::CROperatorSpec;
using crop::RealLinearMatrix;
using crop::Twist;

struct OperatorPath {
  CROperatorSpec base;       // value at t = 0
  CROperatorSpec direction;  // derivative in t
  double t0 = 0, t1 = 1;
  std::vector<Twist> sectors{Twist{1, 0}, Twist{0, 1}, Twist{1, 1}};
  std::function<CROperatorSpec(double)> custom;  // overrides the affine rule

  int rank() const { return base.rank; }

  CROperatorSpec at(double t) const {
    if (custom) return custom(t);
    return CROperatorSpec{base.rank, crop::combine(base.linear, 1, direction.linear, t),
                          crop::combine(base.antilinear, 1, direction.antilinear, t), base.gamma};
  }

  // Same operators, traversed from t1 to t0 (reparametrised on [t0, t1]).
  OperatorPath reversed() const {
    OperatorPath p = *this;
    double s = t0 + t1;
    if (custom) {
      auto f = custom;
      p.custom = [f, s](double t) { return f(s - t); };
      return p;
    }
    p.base = at(s);
    p.direction = CROperatorSpec{direction.rank, crop::combine(direction.linear, -1, {}, 0),
                                 crop::combine(direction.antilinear, -1, {}, 0), std::nullopt};
    return p;
  }

  OperatorPath restricted(double a, double b) const {
    OperatorPath p = *this;
    p.t0 = a;
    p.t1 = b;
    return p;
  }

  // Straight segment from p (at t0) to q (at t1).
  static OperatorPath segment(const CROperatorSpec& p, const CROperatorSpec& q, double t0, double t1) {
    require(t1 > t0, "path interval must have t1 > t0", ErrorKind::usage);
    OperatorPath path;
    double w = 1.0 / (t1 - t0);
    auto dir = crop::difference(q, p);
    for (auto* tbl : {&dir.linear, &dir.antilinear})
      for (auto& [k, m] : *tbl) m *= w;
    path.direction = dir;
    path.base = CROperatorSpec{p.rank, crop::combine(p.linear, 1, dir.linear, -t0),
                               crop::combine(p.antilinear, 1, dir.antilinear, -t0), p.gamma};
    path.t0 = t0;
    path.t1 = t1;
    return path;
  }
};

struct ScanOptions {
  int grid_n = 32;
  double refine_tol = 1e-9;
  int N = 4;
  double wall_tol_rel = 1e-7;     // wall_tol = wall_tol_rel * sigma_max
  double bracket_factor = 10.0;   // accept refined minima below bracket_factor * wall_tol
  unsigned threads = 1;
};

struct Crossing {
  double t_star = 0;
  Twist sector;
  int kernel_dim = 0;  // real
  int sign = 0;        // filled by crossing_sign
  bool degenerate = false;
  bool cluster = false;
  double width = 0;      // final golden-section bracket
  double isolation = 0;  // sigma_min exceeds wall_tol at t* +- isolation
  double sigma_at = 0;
  double wall_tol = 0;
};

struct TracePoint {
  double t;
  Twist sector;
  double sigma_min;
};

struct ScanResult {
  std::vector<Crossing> crossings;
  std::vector<TracePoint> trace;
};

struct SectorSpectrum {
  double sigma_min = 0;
  double sigma_max = 0;
  RVec sigma;  // ascending
};

inline SectorSpectrum sector_spectrum(const OperatorPath& path, Twist tw, double t, int N) {
  auto M = crop::assemble_operator(path.at(t), tw, N);
  Eigen::BDCSVD<RMat> svd(M.dense());
  SectorSpectrum s;
  s.sigma = svd.singularValues().reverse();
  s.sigma_min = s.sigma(0);
  s.sigma_max = s.sigma(s.sigma.size() - 1);
  return s;
}

// Golden-section search. With a Lipschitz bound lip on f it gives up as soon
// as f provably stays above floor on [a, b], returning NaN.
inline double golden_min(const std::function<double(double)>& f, double a, double b, double tol,
                         double& width, double lip = INFINITY, double floor = 0) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > 0.5 * tol) {
    if (std::min(fc, fd) - lip * (b - a) > floor) {
      width = b - a;
      return NAN;
    }
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  width = b - a;
  return fc <= fd ? c : d;
}

inline ScanResult scan_path(const OperatorPath& path, const ScanOptions& opt = {}) {
  require(opt.grid_n >= 16, "grid_n must be at least 16", ErrorKind::usage);
  require(path.t1 > path.t0, "path interval must have t1 > t0", ErrorKind::usage);
  require(opt.refine_tol > 0, "refine_tol must be positive", ErrorKind::usage);
  ScanResult res;
  const int n = opt.grid_n;
  // |d sigma_min / dt| is bounded by the norm of the direction's multiplier.
  const double lip = path.custom ? INFINITY : path.direction.coeff_norm();
  for (Twist tw : path.sectors) {
    std::vector<SectorSpectrum> grid(n + 1);
    parallel_for(n + 1, opt.threads, [&](std::size_t i) {
      double t = path.t0 + (path.t1 - path.t0) * double(i) / n;
      grid[i] = sector_spectrum(path, tw, t, opt.N);
    });
    double smax = 0;
    for (const auto& g : grid) smax = std::max(smax, g.sigma_max);
    double wall_tol = opt.wall_tol_rel * smax;
    for (int end : {0, n})
      require(grid[end].sigma_min > wall_tol,
              "path endpoint t = " + std::to_string(end ? path.t1 : path.t0) + " lies on the wall in sector " +
                  tw.label() + " (sigma_min = " + std::to_string(grid[end].sigma_min) + ")");
    for (int i = 0; i <= n; ++i)
      res.trace.push_back({path.t0 + (path.t1 - path.t0) * double(i) / n, tw, grid[i].sigma_min});

    auto sig = [&](double t) { return sector_spectrum(path, tw, t, opt.N).sigma_min; };
    std::vector<Crossing> found;
    for (int i = 0; i <= n; ++i) {
      double s = grid[i].sigma_min;
      bool left = i == 0 || s < grid[i - 1].sigma_min;
      bool right = i == n || s <= grid[i + 1].sigma_min;
      if (!left || !right) continue;
      double a = path.t0 + (path.t1 - path.t0) * double(std::max(i - 1, 0)) / n;
      double b = path.t0 + (path.t1 - path.t0) * double(std::min(i + 1, n)) / n;
      double floor = opt.bracket_factor * wall_tol;
      double lower = std::max(grid[std::max(i - 1, 0)].sigma_min, grid[std::min(i + 1, n)].sigma_min);
      if (std::min(s, lower) - lip * (b - a) > floor) continue;
      Crossing c;
      c.t_star = golden_min(sig, a, b, opt.refine_tol, c.width, lip, floor);
      if (std::isnan(c.t_star)) continue;
      auto spec = sector_spectrum(path, tw, c.t_star, opt.N);
      c.sigma_at = spec.sigma_min;
      c.wall_tol = wall_tol;
      if (c.sigma_at >= opt.bracket_factor * wall_tol) continue;
      c.sector = tw;
      for (Eigen::Index k = 0; k < spec.sigma.size(); ++k)
        c.kernel_dim += spec.sigma(k) < opt.bracket_factor * wall_tol;
      // Smallest offset at which the sector is off the wall on both sides.
      double h = std::max(c.width, opt.refine_tol);
      while (h < (path.t1 - path.t0) &&
             (sig(std::max(path.t0, c.t_star - h)) <= wall_tol || sig(std::min(path.t1, c.t_star + h)) <= wall_tol))
        h *= 2;
      c.isolation = h;
      found.push_back(c);
    }
    // Merge duplicates from neighbouring brackets.
    std::sort(found.begin(), found.end(), [](auto& x, auto& y) { return x.t_star < y.t_star; });
    std::vector<Crossing> merged;
    for (auto& c : found) {
      if (!merged.empty() && std::abs(c.t_star - merged.back().t_star) <= 10 * opt.refine_tol) {
        // Same zero reached twice.
        continue;
      }
      if (!merged.empty() && std::abs(c.t_star - merged.back().t_star) <= merged.back().isolation) {
        merged.back().cluster = true;
        merged.back().kernel_dim += c.kernel_dim;
        continue;
      }
      merged.push_back(c);
    }
    res.crossings.insert(res.crossings.end(), merged.begin(), merged.end());
  }
  std::sort(res.crossings.begin(), res.crossings.end(),
            [](auto& x, auto& y) { return x.t_star < y.t_star; });
  return res;
}

// ------------------------------------------------------------------ signs

// Norm of the C-antilinear part of a realified matrix, relative to its size.
inline double antilinear_fraction(const RSparse& M) {
  double anti = 0, total = 0;
  RMat D(M);
  for (Eigen::Index i = 0; i + 1 < D.rows(); i += 2)
    for (Eigen::Index j = 0; j + 1 < D.cols(); j += 2) {
      double p = D(i, j), q = D(i, j + 1), r = D(i + 1, j), s = D(i + 1, j + 1);
      anti += 0.25 * ((p - s) * (p - s) + (r + q) * (r + q));
      total += p * p + q * q + r * r + s * s;
    }
  return total > 0 ? std::sqrt(anti / total) : 0.0;
}

inline CMat complexify(const RSparse& M) {
  RMat D(M);
  CMat C(D.rows() / 2, D.cols() / 2);
  for (Eigen::Index i = 0; i < C.rows(); ++i)
    for (Eigen::Index j = 0; j < C.cols(); ++j)
      C(i, j) = 0.5 * cplx(D(2 * i, 2 * j) + D(2 * i + 1, 2 * j + 1), D(2 * i + 1, 2 * j) - D(2 * i, 2 * j + 1));
  return C;
}

inline int det_sign(const RMat& A) {
  Eigen::PartialPivLU<RMat> lu(A);
  double s = lu.permutationP().determinant();
  const auto& U = lu.matrixLU();
  for (Eigen::Index i = 0; i < U.rows(); ++i) {
    if (U(i, i) == 0) return 0;
    if (U(i, i) < 0) s = -s;
  }
  return s > 0 ? 1 : -1;
}

struct SignReport {
  int sign = 0;
  bool degenerate = false;
  bool complex_linear = false;
  int det_before = 0, det_after = 0;  // real track
  cplx eigen_velocity{};              // complex track
};

// Orientation convention: for C-linear families the crossing eigenvalue
// lambda(t) is coorientated by Im dlambda/dt, so dbar + t pi i crosses with +1.
// Real families use the flip of sign det across the crossing.
inline SignReport crossing_sign(const OperatorPath& path, const Crossing& c, int N, double h = 1e-4) {
  require(c.t_star - h >= path.t0 && c.t_star + h <= path.t1,
          "sign step h extends past the path endpoints");
  SignReport rep;
  auto Mm = crop::assemble_operator(path.at(c.t_star - h), c.sector, N);
  auto Mp = crop::assemble_operator(path.at(c.t_star + h), c.sector, N);
  rep.complex_linear = std::max(antilinear_fraction(Mm.matrix), antilinear_fraction(Mp.matrix)) < 1e-14;
  if (rep.complex_linear) {
    if (c.kernel_dim != 2) {
      rep.degenerate = true;
      return rep;
    }
    auto M0 = crop::assemble_operator(path.at(c.t_star), c.sector, N);
    CMat C0 = complexify(M0.matrix);
    Eigen::ComplexEigenSolver<CMat> es0(C0, false);
    Eigen::Index k0;
    es0.eigenvalues().cwiseAbs().minCoeff(&k0);
    cplx l0 = es0.eigenvalues()(k0);
    auto nearest = [&](const RSparse& M) {
      Eigen::ComplexEigenSolver<CMat> es(complexify(M), false);
      Eigen::Index k;
      (es.eigenvalues().array() - l0).abs().minCoeff(&k);
      return es.eigenvalues()(k);
    };
    rep.eigen_velocity = (nearest(Mp.matrix) - nearest(Mm.matrix)) / (2 * h);
    double im = rep.eigen_velocity.imag();
    if (std::abs(im) <= 1e-8 * std::abs(rep.eigen_velocity)) {
      rep.degenerate = true;
      return rep;
    }
    rep.sign = im > 0 ? 1 : -1;
    return rep;
  }
  rep.det_before = det_sign(Mm.dense());
  rep.det_after = det_sign(Mp.dense());
  rep.sign = (rep.det_after - rep.det_before) / 2;
  rep.degenerate = rep.sign == 0 || c.kernel_dim >= 2;
  if (rep.degenerate) rep.sign = 0;
  return rep;
}

inline void assign_signs(const OperatorPath& path, std::vector<Crossing>& xs, int N, double h = 1e-4) {
  for (auto& c : xs) {
    auto s = crossing_sign(path, c, N, h);
    c.sign = s.sign;
    c.degenerate = s.degenerate || c.cluster;
    if (c.degenerate) c.sign = 0;
  }
}

inline int sharp_sum(const std::vector<Crossing>& xs, const std::function<int(Twist)>& alpha) {
  int total = 0;
  for (const auto& c : xs) {
    if (c.degenerate || c.sign == 0)
      fail(ErrorKind::degenerate, "degenerate crossing at t = " + std::to_string(c.t_star) + " in sector " +
                                      c.sector.label() + "; perturb the path");
    total += c.sign * alpha(c.sector);
  }
  return total;
}

// -------------------------------------------------------------- the ledger

using CIValue = std::vector<int>;

inline CIValue delta_loc(const CIValue& before, const CIValue& after) {
  require(before.size() == after.size(), "chamber invariants of different length");
  CIValue d(before.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = after[i] - before[i];
  return d;
}

struct ChamberLedger {
  std::vector<Crossing> crossings;
  std::vector<CIValue> chambers;  // crossings.size() + 1 values, in path order
  std::vector<CIValue> jumps;
};

inline ChamberLedger make_ledger(std::vector<Crossing> xs, std::vector<CIValue> chambers) {
  require(chambers.size() == xs.size() + 1, "a ledger needs one chamber more than crossings");
  ChamberLedger L;
  L.crossings = std::move(xs);
  L.chambers = std::move(chambers);
  for (std::size_t i = 0; i + 1 < L.chambers.size(); ++i)
    L.jumps.push_back(delta_loc(L.chambers[i], L.chambers[i + 1]));
  return L;
}

// Evaluate a chambered invariant at the midpoints between crossings.
inline ChamberLedger build_ledger(const OperatorPath& path, std::vector<Crossing> xs,
                                  const std::function<CIValue(const CROperatorSpec&)>& ci) {
  std::vector<double> cuts{path.t0};
  for (const auto& c : xs) cuts.push_back(c.t_star);
  cuts.push_back(path.t1);
  std::vector<CIValue> vals;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) vals.push_back(ci(path.at(0.5 * (cuts[i] + cuts[i + 1]))));
  return make_ledger(std::move(xs), std::move(vals));
}

// CI(t1) - CI(t0) = sum of jumps, with the endpoint values supplied
// independently of the chamber list.
inline bool ledger_verify(const ChamberLedger& L, const CIValue& ci_start, const CIValue& ci_end) {
  require(!L.chambers.empty(), "empty ledger");
  CIValue sum(ci_start.size(), 0);
  for (const auto& j : L.jumps) {
    require(j.size() == sum.size(), "mismatched chamber adjacency");
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += j[i];
  }
  if (L.chambers.front() != ci_start || L.chambers.back() != ci_end) return false;
  return delta_loc(ci_start, ci_end) == sum;
}

inline bool ledger_verify(const ChamberLedger& L) {
  return ledger_verify(L, L.chambers.front(), L.chambers.back());
}

// Eigenvalue count of a C-linear sector matrix in the strip
// {|Re z| < pi/2, Im z < 0}; locally constant off the wall.
inline CIValue strip_count(const CROperatorSpec& s, Twist tw, int N) {
  auto M = crop::assemble_operator(s, tw, N);
  Eigen::ComplexEigenSolver<CMat> es(complexify(M.matrix), false);
  int n = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    cplx z = es.eigenvalues()(i);
    n += std::abs(z.real()) < pi / 2 && z.imag() < 0;
  }
  return {n};
}

// --------------------------------------------------------------- export

inline nlohmann::json crossings_to_json(const std::vector<Crossing>& xs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : xs)
    arr.push_back({{"t_star", c.t_star},
                   {"sector", c.sector.label()},
                   {"kernel_dim", c.kernel_dim},
                   {"sign", c.sign},
                   {"width", c.width},
                   {"degenerate", c.degenerate}});
  return arr;
}

}  // namespace crlab::wallscan
