#include <gtest/gtest.h>

#include <crlab/blowup.hpp>

using namespace crlab;
using namespace crlab::blowup;

namespace {

CVec rand_c2(Rng& rng) { return rng.cmat(2, 1).col(0); }

}  // namespace

TEST(Potential, FlatAtZero) {
  for (double u : {1e-3, 0.5, 1.0, 7.0}) EXPECT_DOUBLE_EQ(eh_potential(u, 0), u);
}

TEST(Potential, ValueAtTSquared) {
  for (double t : {0.3, 1.0, 2.5}) {
    double expect = t * t * (std::sqrt(2.0) - std::log(1 + std::sqrt(2.0)));
    EXPECT_NEAR(eh_potential(t * t, t), expect, 1e-13 * std::max(1.0, expect));
  }
}

TEST(Potential, DerivativeRoutesAgree) {
  Rng rng(1);
  for (int k = 0; k < 200; ++k) {
    double u = std::exp(rng.uniform(-4, 3)), t = rng.uniform(0, 3);
    auto d = eh_potential_derivative(u, t);
    EXPECT_NEAR(d.closed, d.naive, 1e-12 * d.closed);
  }
}

TEST(Potential, FiniteDifferences) {
  double h = 1e-4;
  auto fd1 = [&](double u, double t) { return (eh_potential(u + h, t) - eh_potential(u - h, t)) / (2 * h); };
  auto fd2 = [&](double u, double t) {
    return (eh_potential(u + h, t) - 2 * eh_potential(u, t) + eh_potential(u - h, t)) / (h * h);
  };
  EXPECT_NEAR(eh_potential_derivative(1, 1).closed, fd1(1, 1), 1e-8);
  EXPECT_NEAR(eh_potential_derivative(1, 1).closed, std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(eh_potential_derivative(0.7, 1.3).second, fd2(0.7, 1.3), 1e-5);
}

TEST(Potential, DomainError) {
  EXPECT_THROW(eh_potential(0, 1), Error);
  EXPECT_THROW(eh_potential_derivative(-1, 1), Error);
}

TEST(Form, FlatAtZero) {
  Rng rng(2);
  for (int k = 0; k < 50; ++k) {
    EHParams p{0.0, k % 2 ? random_metric(rng) : CMat::Identity(2, 2)};
    FiberPoint pt{rand_c2(rng), rand_c2(rng), rand_c2(rng)};
    auto f = fibrewise_form_eval(pt, p);
    double norm = (pt.x.adjoint() * p.metric * pt.x)(0, 0).real();
    EXPECT_NEAR(f.hermitian, norm, 1e-13 * norm);
    EXPECT_NEAR(f.omega, (pt.x.adjoint() * p.metric * pt.y)(0, 0).imag(), 1e-13 * (1 + std::abs(f.omega)));
  }
}

TEST(Form, Alternating) {
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    EHParams p{rng.uniform(0, 2), random_metric(rng)};
    CVec v = rand_c2(rng), x = rand_c2(rng), y = rand_c2(rng);
    EXPECT_NEAR(fibrewise_form_eval({v, x, x}, p).omega, 0.0, 1e-14);
    double a = fibrewise_form_eval({v, x, y}, p).omega, b = fibrewise_form_eval({v, y, x}, p).omega;
    EXPECT_NEAR(a, -b, 1e-13 * (1 + std::abs(a)));
  }
}

TEST(Form, Scaling) {
  Rng rng(4);
  for (int k = 0; k < 100; ++k) {
    EHParams p{rng.uniform(0, 2), random_metric(rng)};
    double R = std::exp(rng.uniform(-1.5, 1.5));
    CVec v = rand_c2(rng), x = rand_c2(rng), y = rand_c2(rng);
    double lhs = fibrewise_form_eval({(R * v).eval(), (R * x).eval(), (R * y).eval()}, p).omega / (R * R);
    EHParams q{p.t / R, p.metric};
    double rhs = fibrewise_form_eval({v, x, y}, q).omega;
    EXPECT_NEAR(lhs, rhs, 1e-10 * (1 + std::abs(rhs)));
  }
}

TEST(Form, Closed) {
  Rng rng(5);
  for (int k = 0; k < 20; ++k) {
    EHParams p{rng.uniform(0.2, 2), k % 2 ? random_metric(rng) : CMat::Identity(2, 2)};
    CVec v = rand_c2(rng);
    EXPECT_LT(closedness_defect(v, p), 1e-7);
  }
}

TEST(Form, ClosednessDetectsNonClosedForms) {
  // The same Hessian recipe with a perturbed second derivative leaves
  // Omega non-closed, so the check is not vacuous.
  CVec v(2);
  v << cplx(0.4, 0.1), cplx(-0.3, 0.8);
  EHParams p{1.0, CMat::Identity(2, 2)};
  RVec x = to_real(v);
  auto bad = [&](const RVec& y) {
    RMat w = form_matrix(to_complex(y), p);
    return RMat(w * (1 + y(0)));
  };
  double h = 1e-4, defect = 0;
  std::array<RMat, 4> dw;
  for (int c = 0; c < 4; ++c) {
    RVec xp = x, xm = x;
    xp(c) += h;
    xm(c) -= h;
    dw[c] = (bad(xp) - bad(xm)) / (2 * h);
  }
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b)
      for (int c = b + 1; c < 4; ++c) defect = std::max(defect, std::abs(dw[a](b, c) + dw[b](c, a) + dw[c](a, b)));
  EXPECT_GT(defect, 1e-2);
}

TEST(Form, PositiveForPositiveT) {
  Rng rng(6);
  for (int k = 0; k < 1000; ++k) {
    double t = rng.uniform(0.01, 3);
    EHParams p{t, CMat::Identity(2, 2)};
    CVec v = std::exp(rng.uniform(-3, 2)) * rand_c2(rng), x = rand_c2(rng);
    auto f = fibrewise_form_eval({v, x, x}, p);
    // Omega(X, IX) = f'' |<v, X>|^2 + f' |X|^2 >= |X|^2 u / sqrt(u^2 + t^4)
    double u = v.squaredNorm();
    double bound = x.squaredNorm() * u / std::sqrt(u * u + t * t * t * t);
    EXPECT_GT(f.hermitian, 0.0);
    EXPECT_GE(f.hermitian, bound * (1 - 1e-12));
  }
}

TEST(Form, PlusMinusInvariant) {
  Rng rng(7);
  for (int k = 0; k < 100; ++k) {
    EHParams p{rng.uniform(0, 2), random_metric(rng)};
    CVec v = rand_c2(rng), x = rand_c2(rng), y = rand_c2(rng);
    double a = fibrewise_form_eval({v, x, y}, p).omega;
    double b = fibrewise_form_eval({(-v).eval(), (-x).eval(), (-y).eval()}, p).omega;
    EXPECT_EQ(a, b);
  }
}

TEST(Form, Preconditions) {
  EHParams p{1.0, CMat::Identity(2, 2)};
  EXPECT_THROW(fibrewise_form_eval({CVec::Zero(2), CVec::Ones(2), CVec::Ones(2)}, p), Error);
  EXPECT_THROW((EHParams{-1.0, CMat::Identity(2, 2)}.validate()), Error);
  CMat bad = CMat::Identity(2, 2);
  bad(0, 1) = 1;
  EXPECT_THROW((EHParams{1.0, bad}.validate()), Error);
}

TEST(Topology, SectionClass) {
  EXPECT_EQ(section_class(-2, 3), (SectionClass{1, 1}));
  // s.S = deg s and s.F = 1 determine the class.
  for (int dv : {-3, -1, 0, 2})
    for (int ds : {-2, 0, 1, 4}) {
      auto s = section_class(dv, ds);
      EXPECT_EQ(intersect(s, {1, 0}, dv), ds);
      EXPECT_EQ(intersect(s, {0, 1}, dv), 1);
    }
}

TEST(Topology, ChernVertical) {
  auto c = chern_vertical(-2);
  EXPECT_EQ(c.descriptor, "q^* c1(V)");
  EXPECT_EQ(c.evaluate(0, 1), 0);
  EXPECT_EQ(c.evaluate(1, 5), -2);
}

TEST(Topology, CoverGenus) {
  EXPECT_EQ(cover_genus(1, 2), 2);
  for (int g : {1, 2, 5}) EXPECT_EQ(cover_genus(g, 0), 2 * g - 1);
  // Riemann-Hurwitz through Euler characteristics.
  for (int g = 0; g < 4; ++g)
    for (int n = 0; n <= 8; n += 2) {
      if (g == 0 && n == 0) continue;
      int chi = 2 * (2 - 2 * g) - n;
      EXPECT_EQ(cover_genus(g, n), (2 - chi) / 2);
    }
  EXPECT_THROW(cover_genus(1, 3), Error);
  EXPECT_THROW(cover_genus(0, 0), Error);
}

TEST(Form, SampledChecks) {
  EXPECT_LT(scaling_check(100, 9), 1e-10);
  for (double t : {0.1, 1.0, 10.0}) EXPECT_GT(positivity_margin(t, 1000, 10), 0.0);
}
