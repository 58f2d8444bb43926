#include <crlab/adhm.hpp>

#include <gtest/gtest.h>

#include <chrono>

using namespace crlab;
using namespace crlab::adhm;

namespace {

double dist(const CMat& a, const CMat& b) { return max_abs(CMat(a - b)); }

}  // namespace

TEST(MomentMaps, ZeroConfiguration) {
  ADHMRep rep{1, 2};
  auto m = moment_maps(rep, ADHMConfig::zero(rep));
  EXPECT_EQ(max_abs(m.muR), 0.0);
  EXPECT_EQ(max_abs(m.muC), 0.0);
}

TEST(MomentMaps, HandComputedExample) {
  ADHMRep rep{1, 2};
  ADHMConfig c = ADHMConfig::zero(rep);
  c.alpha(0, 0) = 1;
  c.beta(0, 1) = 1;
  auto m = moment_maps(rep, c);
  CMat muC(2, 2), muR(2, 2);
  muC << 0, 1, 0, 0;
  muR << 1, 0, 0, -1;
  EXPECT_LT(dist(m.muC, muC), 1e-15);
  EXPECT_LT(dist(m.muR, muR), 1e-15);
}

TEST(MomentMaps, ShapeMismatchThrows) {
  ADHMRep rep{1, 2};
  ADHMConfig c = ADHMConfig::zero(ADHMRep{2, 2});
  EXPECT_THROW(moment_maps(rep, c), Error);
}

TEST(MomentMaps, RealMomentIsHermitian) {
  Rng rng(11);
  ADHMRep rep{2, 3};
  auto m = moment_maps(rep, random_config(rep, rng));
  EXPECT_LT(dist(m.muR, m.muR.adjoint()), 1e-12);
}

TEST(MomentMaps, Equivariance) {
  Rng rng(12);
  for (ADHMRep rep : {ADHMRep{1, 2}, ADHMRep{2, 1}, ADHMRep{2, 2}, ADHMRep{1, 3}}) {
    for (int s = 0; s < 100; ++s) {
      ADHMConfig c = random_config(rep, rng) * 0.5;
      CMat g = random_unitary(rng, rep.k);
      auto m0 = moment_maps(rep, c);
      auto m1 = moment_maps(rep, gauge(g, c));
      EXPECT_LT(dist(m1.muR, g * m0.muR * g.adjoint()), 1e-12);
      EXPECT_LT(dist(m1.muC, g * m0.muC * g.adjoint()), 1e-12);
    }
  }
}

TEST(MomentPairing, ZeroLieElement) {
  Rng rng(13);
  ADHMRep rep{1, 2};
  auto v = moment_pairing_oracle(rep, random_config(rep, rng), CMat::Zero(2, 2));
  EXPECT_EQ(v.norm(), 0.0);
}

TEST(MomentPairing, OracleMatchesExplicitFormulas) {
  Rng rng(14);
  for (ADHMRep rep : {ADHMRep{1, 1}, ADHMRep{1, 2}, ADHMRep{2, 1}, ADHMRep{2, 3}}) {
    for (int s = 0; s < 200; ++s) {
      ADHMConfig c = random_config(rep, rng);
      CMat X = random_lie(rep.k, rng);
      auto oracle = moment_pairing_oracle(rep, c, X);
      auto expl = moment_pairing_explicit(moment_maps(rep, c), X);
      EXPECT_LT((oracle - expl).norm(), 1e-10 * (1 + oracle.norm()));
    }
    // Basis elements, as stated slot by slot.
    ADHMConfig c = random_config(rep, rng);
    auto m = moment_maps(rep, c);
    for (const CMat& X : lie_basis(rep.k)) {
      auto oracle = moment_pairing_oracle(rep, c, X);
      EXPECT_NEAR(oracle(0), lie_inner(CMat(-I * m.muR), X), 1e-10);
      EXPECT_NEAR(oracle(1), 2 * (X * m.muC).trace().real(), 1e-10);
      EXPECT_NEAR(oracle(2), 2 * (X * m.muC).trace().imag(), 1e-10);
    }
  }
}

TEST(MomentPairing, QuadraticScaling) {
  Rng rng(15);
  ADHMRep rep{1, 2};
  ADHMConfig c = random_config(rep, rng);
  CMat X = random_lie(2, rng);
  double s = 1.7;
  auto a = moment_pairing_oracle(rep, c, X);
  auto b = moment_pairing_oracle(rep, c * s, X);
  EXPECT_LT((b - s * s * a).norm(), 1e-12 * (1 + b.norm()));
}

TEST(MomentPairing, NormIdentity) {
  Rng rng(16);
  ADHMRep rep{2, 2};
  auto m = moment_maps(rep, random_config(rep, rng));
  RVec x = moment_coords(rep, m);
  EXPECT_NEAR(x.norm(), moment_norm(m), 1e-12 * moment_norm(m));
}

TEST(GammaPsi, ZeroConfigurationGivesZeroMap) {
  ADHMRep rep{1, 2};
  EXPECT_EQ(max_abs(gamma_psi(rep, ADHMConfig::zero(rep))), 0.0);
}

TEST(GammaPsi, AbelianInjective) {
  Rng rng(17);
  ADHMRep rep{2, 1};
  ADHMConfig c = ADHMConfig::zero(rep);
  c.alpha = rng.cmat(1, 2);
  RMat G = gamma_psi(rep, c);
  Eigen::JacobiSVD<RMat> svd(G);
  EXPECT_EQ(G.cols(), 3);
  EXPECT_GT(svd.singularValues().minCoeff(), 1e-6);
}

TEST(GammaPsi, Equivariance) {
  Rng rng(18);
  for (ADHMRep rep : {ADHMRep{1, 2}, ADHMRep{2, 2}}) {
    ADHMConfig c = random_config(rep, rng);
    CMat g = random_unitary(rng, rep.k);
    RMat lhs = gamma_psi(rep, gauge(g, c));
    // g acting on V, as a real matrix.
    RMat gv(rep.real_dim(), rep.real_dim());
    for (int i = 0; i < rep.real_dim(); ++i) {
      RVec e = RVec::Zero(rep.real_dim());
      e(i) = 1;
      gv.col(i) = flatten(gauge(g, unflatten(rep, e)));
    }
    RMat rhs = gv * gamma_psi(rep, c) * adjoint_coords(rep.k, g.adjoint());
    EXPECT_LT(max_abs(RMat(lhs - rhs)), 1e-12);
  }
}

TEST(GammaPsi, GradientOfMomentNorm) {
  Rng rng(19);
  ADHMRep rep{1, 2};
  ADHMConfig c = random_config(rep, rng);
  RVec x = flatten(c);
  RVec g = grad_moment_norm2(rep, c);
  double h = 1e-6;
  for (int i = 0; i < x.size(); ++i) {
    RVec xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    auto f = [&](const RVec& y) {
      double n = moment_norm(moment_maps(rep, unflatten(rep, y)));
      return n * n;
    };
    EXPECT_NEAR((f(xp) - f(xm)) / (2 * h), g(i), 1e-6 * (1 + std::abs(g(i))));
  }
}

TEST(Compactness, FiniteSupremumBothCases) {
  for (ADHMRep rep : {ADHMRep{1, 2}, ADHMRep{2, 1}}) {
    CompactnessOptions opt;
    opt.n_samples = 500;
    auto r = compactness_ratio(rep, 7, opt);
    EXPECT_EQ(r.accepted, 500u);
    EXPECT_TRUE(std::isfinite(r.c));
    EXPECT_GT(r.c, 0.0);
    ASSERT_TRUE(r.worst.has_value());
    auto m = moment_maps(rep, *r.worst);
    double ratio = moment_norm(m) / (gamma_psi(rep, *r.worst) * moment_coords(rep, m)).norm();
    EXPECT_NEAR(ratio, r.c, 1e-12 * r.c);
  }
}

TEST(Compactness, DeterministicAndThreadIndependent) {
  ADHMRep rep{1, 2};
  CompactnessOptions a;
  a.n_samples = 300;
  CompactnessOptions b = a;
  b.threads = 3;
  auto r1 = compactness_ratio(rep, 42, a);
  auto r2 = compactness_ratio(rep, 42, b);
  EXPECT_EQ(r1.c, r2.c);
  EXPECT_EQ(r1.attempts, r2.attempts);
}

TEST(Compactness, MonotoneInBandWidth) {
  for (ADHMRep rep : {ADHMRep{1, 2}, ADHMRep{2, 1}}) {
    CompactnessOptions wide;
    wide.fixed_attempts = true;
    wide.max_attempts = 2000;
    CompactnessOptions narrow = wide;
    narrow.delta = 0.05;
    wide.delta = 0.1;
    auto cw = compactness_ratio(rep, 3, wide);
    auto cn = compactness_ratio(rep, 3, narrow);
    EXPECT_LE(cn.accepted, cw.accepted);
    EXPECT_LE(cn.c, cw.c);
  }
}

TEST(Compactness, EmptyBandIsReportedNotThrown) {
  CompactnessOptions opt;
  opt.delta = 1e-300;
  opt.steps = 0;
  opt.n_samples = 10;
  opt.max_attempts = 50;
  auto r = compactness_ratio(ADHMRep{1, 2}, 1, opt);
  EXPECT_EQ(r.accepted, 0u);
  EXPECT_TRUE(r.empty());
  EXPECT_FALSE(r.worst.has_value());
}

TEST(Compactness, RejectsOtherRepresentations) {
  EXPECT_THROW(compactness_ratio(ADHMRep{2, 2}, 1, CompactnessOptions{}), Error);
  CompactnessOptions bad;
  bad.delta = 0;
  EXPECT_THROW(compactness_ratio(ADHMRep{1, 2}, 1, bad), Error);
}

TEST(ZeroLocus12, DiagonalCommutingPair) {
  ADHMRep rep{1, 2};
  ADHMConfig c = ADHMConfig::zero(rep);
  c.xi1 << 1, 0, 0, -1;
  c.xi2 << 2, 0, 0, -2;
  EXPECT_EQ(moment_norm(moment_maps(rep, c)), 0.0);
  auto z = adhm12_zero_locus_analyze(c);
  EXPECT_FALSE(z.degenerate);
  EXPECT_TRUE(z.matter_vanishes);
  // +-lambda with lambda = (1,2) up to the overall sign choice.
  double s = z.lambda(0).real() > 0 ? 1 : -1;
  EXPECT_LT(std::abs(z.lambda(0) - s * 1.0), 1e-12);
  EXPECT_LT(std::abs(z.lambda(1) - s * 2.0), 1e-12);
}

TEST(ZeroLocus12, ReconstructsTraceFreePart) {
  Rng rng(20);
  ADHMRep rep{1, 2};
  for (int s = 0; s < 50; ++s) {
    CMat U = random_unitary(rng, 2);
    cplx l1 = rng.cnormal(), l2 = rng.cnormal(), t1 = rng.cnormal(), t2 = rng.cnormal();
    ADHMConfig c = ADHMConfig::zero(rep);
    CMat D = CMat::Zero(2, 2);
    D(0, 0) = 1;
    D(1, 1) = -1;
    c.xi1 = U * (l1 * D) * U.adjoint() + t1 * CMat::Identity(2, 2);
    c.xi2 = U * (l2 * D) * U.adjoint() + t2 * CMat::Identity(2, 2);
    ASSERT_LT(moment_norm(moment_maps(rep, c)), 1e-8);
    auto z = adhm12_zero_locus_analyze(c);
    auto [h1, h2] = adhm12_reconstruct_tracefree(z);
    EXPECT_LT(dist(h1, c.xi1 - z.tr1 * CMat::Identity(2, 2)), 1e-10);
    EXPECT_LT(dist(h2, c.xi2 - z.tr2 * CMat::Identity(2, 2)), 1e-10);
    EXPECT_LT(dist(CMat(z.frame.adjoint() * z.frame), CMat::Identity(2, 2)), 1e-12);
  }
}

TEST(ZeroLocus12, ZeroIsDegenerate) {
  auto z = adhm12_zero_locus_analyze(ADHMConfig::zero(ADHMRep{1, 2}));
  EXPECT_TRUE(z.degenerate);
  EXPECT_LT(z.lambda.norm(), 1e-15);
}

TEST(ZeroLocus12, OffLocusIsPrecondition) {
  ADHMConfig c = ADHMConfig::zero(ADHMRep{1, 2});
  c.alpha(0, 0) = 0.5;
  try {
    adhm12_zero_locus_analyze(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::precondition);
  }
}

namespace {

ADHMConfig real21(Rng& rng) {
  ADHMRep rep{2, 1};
  quatspin::RealStructure rs(2);
  ADHMConfig base = ADHMConfig::zero(rep);
  return from_psi21(rs.real_from_plus(rng.cmat(2, 1)), base);
}

}  // namespace

TEST(Realify21, RealInputHasUnitPhase) {
  Rng rng(21);
  ADHMConfig c = real21(rng);
  ASSERT_LT(moment_norm(moment_maps(ADHMRep{2, 1}, c)), 1e-12);
  auto r = adhm21_realify(c);
  EXPECT_LT(std::min(std::abs(r.lambda - 1.0), std::abs(r.lambda + 1.0)), 1e-12);
  EXPECT_LT(r.real_residual, 1e-10);
}

TEST(Realify21, RotatedInputIsUndone) {
  Rng rng(22);
  ADHMRep rep{2, 1};
  ADHMConfig cr = real21(rng);
  cplx ph = std::exp(I * 0.7);
  // U(1) acts on alpha by g and on beta by g^{-1}.
  ADHMConfig c = cr;
  c.alpha *= ph;
  c.beta *= std::conj(ph);
  auto r = adhm21_realify(c);
  cplx expect = std::exp(-0.7 * I);
  EXPECT_LT(std::min(std::abs(r.lambda - expect), std::abs(r.lambda + expect)), 1e-12);
  EXPECT_LT(std::abs(r.alternatives[1] + r.alternatives[0]), 1e-15);
  EXPECT_LT(r.real_residual, 1e-10);
  EXPECT_LT(std::abs(moment_norm(moment_maps(rep, r.realified)) - r.mu_norm), 1e-12);
}

TEST(Realify21, PhaseInvarianceOfMu) {
  Rng rng(23);
  ADHMRep rep{2, 1};
  for (int s = 0; s < 50; ++s) {
    ADHMConfig c = random_config(rep, rng);
    cplx ph = std::exp(I * rng.uniform(0, 6.28));
    ADHMConfig d = c;
    d.alpha *= ph;
    d.beta *= std::conj(ph);
    EXPECT_LT(std::abs(moment_norm(moment_maps(rep, c)) - moment_norm(moment_maps(rep, d))), 1e-12);
  }
}

TEST(Realify21, ErrorPaths) {
  ADHMRep rep{2, 1};
  ADHMConfig c = ADHMConfig::zero(rep);
  try {
    adhm21_realify(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate);
  }
  c.alpha(0, 0) = std::sqrt(0.5);  // mu_R = 0.5
  try {
    adhm21_realify(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::precondition);
  }
}
