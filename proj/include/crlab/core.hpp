#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace crlab {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using RSparse = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr cplx I{0.0, 1.0};

// Process exit codes used by the command-line driver.
enum class ErrorKind : int {
  usage = 2,
  degenerate = 3,
  precondition = 4,
  nonconvergence = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool ok, const std::string& what,
                    ErrorKind kind = ErrorKind::precondition) {
  if (!ok) fail(kind, what);
}

// Independent stream per (seed, index); splitmix64 mixes the pair.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : eng_(mix_seed(seed, stream)) {}

  // Box-Muller on the raw engine so values do not depend on the
  // standard library's distribution implementation.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double rad = std::sqrt(-2.0 * std::log(u1));
    spare_ = rad * std::sin(2.0 * pi * u2);
    has_spare_ = true;
    return rad * std::cos(2.0 * pi * u2);
  }
  double uniform() { return (eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  cplx cnormal() { return {normal(), normal()}; }

  CMat cmat(Eigen::Index rows, Eigen::Index cols) {
    CMat m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = cnormal();
    return m;
  }
  RVec rvec(Eigen::Index n) {
    RVec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Haar-ish random unitary via QR of a Gaussian matrix.
inline CMat random_unitary(Rng& rng, int n) {
  CMat g = rng.cmat(n, n);
  Eigen::HouseholderQR<CMat> qr(g);
  CMat q = qr.householderQ();
  CMat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < n; ++i) {
    cplx d = r(i, i);
    q.col(i) *= d / std::abs(d);
  }
  return q;
}

// Complex vector <-> interleaved real vector (re, im, re, im, ...).
inline RVec to_real(const CVec& z) {
  RVec x(2 * z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    x(2 * i) = z(i).real();
    x(2 * i + 1) = z(i).imag();
  }
  return x;
}

inline CVec to_complex(const RVec& x) {
  CVec z(x.size() / 2);
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = {x(2 * i), x(2 * i + 1)};
  return z;
}

// Real 2x2 blocks for w -> c*w and w -> c*conj(w).
inline void push_linear(Triplets& t, Eigen::Index row, Eigen::Index col, cplx c) {
  if (c == cplx{}) return;
  t.emplace_back(2 * row, 2 * col, c.real());
  t.emplace_back(2 * row, 2 * col + 1, -c.imag());
  t.emplace_back(2 * row + 1, 2 * col, c.imag());
  t.emplace_back(2 * row + 1, 2 * col + 1, c.real());
}

inline void push_antilinear(Triplets& t, Eigen::Index row, Eigen::Index col, cplx c) {
  if (c == cplx{}) return;
  t.emplace_back(2 * row, 2 * col, c.real());
  t.emplace_back(2 * row, 2 * col + 1, c.imag());
  t.emplace_back(2 * row + 1, 2 * col, c.imag());
  t.emplace_back(2 * row + 1, 2 * col + 1, -c.real());
}

inline RMat realify(const CMat& lin, const CMat& anti) {
  RMat m = RMat::Zero(2 * lin.rows(), 2 * lin.cols());
  for (Eigen::Index i = 0; i < lin.rows(); ++i)
    for (Eigen::Index j = 0; j < lin.cols(); ++j) {
      cplx c = lin(i, j), d = anti.size() ? anti(i, j) : cplx{};
      m(2 * i, 2 * j) = c.real() + d.real();
      m(2 * i, 2 * j + 1) = -c.imag() + d.imag();
      m(2 * i + 1, 2 * j) = c.imag() + d.imag();
      m(2 * i + 1, 2 * j + 1) = c.real() - d.real();
    }
  return m;
}

// Static partition of [0, n) over `threads` workers; results must be written
// by index so the outcome does not depend on the worker count.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += threads) body(i);
    });
  for (auto& t : pool) t.join();
}

inline double max_abs(const CMat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }
inline double max_abs(const RMat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace crlab
