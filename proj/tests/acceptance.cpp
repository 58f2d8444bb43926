// Acceptance suite: one PASS/FAIL line per criterion; exit status is the
// number of failures.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "crlab/adhm.hpp"
#include "crlab/blowup.hpp"
#include "crlab/crop.hpp"
#include "crlab/quatspin.hpp"
#include "crlab/resdisk.hpp"
#include "crlab/vortex.hpp"
#include "crlab/wallscan.hpp"

using namespace crlab;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

CMat scalar(cplx c) { return CMat::Constant(1, 1, c); }

// ------------------------------------------------------------ criterion 1

void index_suite(Outcome& o) {
  auto t0 = Clock::now();
  Rng rng(101);
  auto twists = crop::Twist::all();
  int agree = 0;
  for (int s = 0; s < 20; ++s) {
    int r = 1 + s % 3;
    crop::Twist tw = twists[s % 4];
    auto spec = crop::random_spec(r, 1, 0.1, rng);
    auto rep = crop::kernel_report(crop::assemble_operator(spec, tw, 16));
    int expect = crop::index_formula(1, 0, r, 0);
    agree += rep.index() == expect;
    o.check(rep.index() == expect, "config " + std::to_string(s) + " index " + std::to_string(rep.index()));
  }
  double secs = seconds_since(t0);
  o.check(secs < 60, "time " + std::to_string(secs) + " s");
  o.detail << agree << "/20 configs with numerical index 0 at N = 16, " << secs << " s";
}

// ------------------------------------------------------------ criterion 2

void cover_splitting(Outcome& o) {
  Rng rng(202);
  int ok = 0, total = 0;
  for (crop::Twist tw : crop::Twist::nontrivial())
    for (int s = 0; s < 10; ++s) {
      auto c = crop::pullback_cover(crop::random_spec(1 + s % 2, 1, 0.5, rng), tw, 4);
      bool eq = c.dim_cover == c.dim_base + c.dim_twisted;
      ok += eq;
      ++total;
      o.check(eq, "random spec " + std::to_string(total));
    }
  auto wall_spec = crop::CROperatorSpec::dolbeault(1);
  wall_spec.linear[{0, 0}] = scalar(-pi * I / 2.0);
  auto near_spec = crop::CROperatorSpec::dolbeault(1);
  near_spec.linear[{0, 0}] = scalar(-pi * I / 2.0 + 0.3);
  auto on = crop::pullback_cover(wall_spec, crop::Twist{1, 0}, 4);
  auto off = crop::pullback_cover(near_spec, crop::Twist{1, 0}, 4);
  o.check(on.dim_cover == on.dim_base + on.dim_twisted, "on-wall splitting");
  int jump = (on.dim_base + on.dim_twisted) - (off.dim_base + off.dim_twisted);
  o.check(jump == 2, "on-wall jump " + std::to_string(jump));
  o.detail << ok << "/" << total << " random specs split exactly; on-wall jump " << jump;
}

// ------------------------------------------------------------ criterion 3

wallscan::OperatorPath translation_path() {
  wallscan::OperatorPath p;
  p.base = crop::CROperatorSpec::dolbeault(1);
  p.direction = crop::CROperatorSpec::dolbeault(1);
  p.direction.add_linear(0, 0, scalar(pi * I));
  p.t0 = 0.1;
  p.t1 = 0.9;
  return p;
}

void wall_ground_truth(Outcome& o) {
  auto res = wallscan::scan_path(translation_path());
  o.check(res.crossings.size() == 1, "translation crossings " + std::to_string(res.crossings.size()));
  double err = 1;
  if (res.crossings.size() == 1) {
    err = std::abs(res.crossings[0].t_star - 0.5);
    o.check(res.crossings[0].sector == crop::Twist{1, 0}, "sector");
    o.check(err <= 1e-6, "t* error");
  }
  // constant antilinear paths: sigma_min on the (1/2,0) sector is
  // sqrt(pi^2 |kappa|^2 + |a|^2) at |kappa| = 1/2
  int total_crossings = 0;
  double oracle_err = 0;
  for (double amp : {0.5, 2.0, 10.0}) {
    cplx a = amp * std::exp(I * 0.7);
    wallscan::OperatorPath p;
    p.base = crop::CROperatorSpec::dolbeault(1);
    p.base.add_antilinear(0, 0, scalar(a));
    p.direction = crop::CROperatorSpec::dolbeault(1);
    p.sectors = {crop::Twist{1, 0}};
    total_crossings += int(wallscan::scan_path(p).crossings.size());
    double s = wallscan::sector_spectrum(p, crop::Twist{1, 0}, 0.3, 4).sigma_min;
    oracle_err = std::max(oracle_err, std::abs(s - std::sqrt(pi * pi / 4 + amp * amp)));
  }
  o.check(total_crossings == 0, "antilinear crossings");
  o.check(oracle_err < 1e-8, "block determinant oracle");
  o.detail << "t* error " << err << ", constant-antilinear crossings " << total_crossings << ", oracle error "
           << oracle_err;
}

// ------------------------------------------------------------ criterion 4

void chamber_ledger(Outcome& o) {
  wallscan::OperatorPath p;
  p.base = crop::CROperatorSpec::dolbeault(2);
  CMat b0 = CMat::Zero(2, 2);
  b0(1, 1) = 0.25 * pi * I;
  p.base.add_linear(0, 0, b0);
  p.direction = crop::CROperatorSpec::dolbeault(2);
  p.direction.add_linear(0, 0, pi * I * CMat::Identity(2, 2));
  p.t0 = 0.1;
  p.t1 = 0.9;
  p.sectors = {crop::Twist{1, 0}};
  auto xs = wallscan::scan_path(p).crossings;
  wallscan::assign_signs(p, xs, 4);
  auto ci = [](const crop::CROperatorSpec& s) { return wallscan::strip_count(s, crop::Twist{1, 0}, 4); };
  auto L = wallscan::build_ledger(p, xs, ci);
  o.check(L.chambers.size() == 3, "chamber count");
  bool tele = wallscan::ledger_verify(L, ci(p.at(p.t0)), ci(p.at(p.t1)));
  o.check(tele, "telescoping");
  auto one = [](crop::Twist) { return 1; };
  auto q = p.reversed();
  auto rx = wallscan::scan_path(q).crossings;
  wallscan::assign_signs(q, rx, 4);
  int fwd = wallscan::sharp_sum(xs, one), bwd = wallscan::sharp_sum(rx, one);
  o.check(fwd == -bwd && fwd != 0, "reversal");
  auto tp = translation_path();
  auto tx = wallscan::scan_path(tp).crossings, trx = wallscan::scan_path(tp.reversed()).crossings;
  wallscan::assign_signs(tp, tx, 4);
  wallscan::assign_signs(tp.reversed(), trx, 4);
  o.check(wallscan::sharp_sum(tx, one) == -wallscan::sharp_sum(trx, one), "translation reversal");
  o.detail << L.chambers.size() << " chambers, telescoping " << (tele ? "exact" : "broken") << ", sharp " << fwd
           << " forward, " << bwd << " reversed";
}

// ------------------------------------------------------------ criterion 5

void moment_oracle(Outcome& o) {
  Rng rng(505);
  double pair_err = 0, equi_err = 0;
  for (int s = 0; s < 1000; ++s) {
    adhm::ADHMRep rep = s % 2 ? adhm::ADHMRep{1, 2} : adhm::ADHMRep{2, 1};
    auto c = adhm::random_config(rep, rng);
    CMat X = adhm::random_lie(rep.k, rng);
    auto oracle = adhm::moment_pairing_oracle(rep, c, X);
    auto expl = adhm::moment_pairing_explicit(adhm::moment_maps(rep, c), X);
    pair_err = std::max(pair_err, (oracle - expl).norm() / (1 + oracle.norm()));
    CMat g = random_unitary(rng, rep.k);
    auto m0 = adhm::moment_maps(rep, c), m1 = adhm::moment_maps(rep, adhm::gauge(g, c));
    equi_err = std::max(equi_err, max_abs(CMat(m1.muR - g * m0.muR * g.adjoint())));
    equi_err = std::max(equi_err, max_abs(CMat(m1.muC - g * m0.muC * g.adjoint())));
  }
  o.check(pair_err <= 1e-10, "pairing");
  o.check(equi_err <= 1e-12, "equivariance");
  o.detail << "pairing error " << pair_err << ", equivariance error " << equi_err << " over 1000 pairs";
}

// ------------------------------------------------------------ criterion 6

void compactness(Outcome& o) {
  struct Case {
    adhm::ADHMRep rep;
    double baseline;
  };
  auto t0 = Clock::now();
  for (Case cs : {Case{{1, 2}, 7.868636107}, Case{{2, 1}, 5.330041515}}) {
    adhm::CompactnessOptions opt;
    opt.delta = 0.1;
    opt.n_samples = 10000;
    opt.threads = 0;
    auto a = adhm::compactness_ratio(cs.rep, 7, opt);
    auto b = adhm::compactness_ratio(cs.rep, 7, opt);
    std::string name = "(" + std::to_string(cs.rep.r) + "," + std::to_string(cs.rep.k) + ")";
    o.check(std::isfinite(a.c) && a.c > 0, name + " finite");
    o.check(a.c == b.c, name + " rerun");
    o.check(std::abs(a.c - cs.baseline) <= 0.05 * cs.baseline, name + " baseline");
    o.detail << name << " c = " << a.c << " (baseline " << cs.baseline << "), ";
  }
  double secs = seconds_since(t0);
  o.check(secs < 30, "time");
  o.detail << secs << " s";
}

// ------------------------------------------------------------ criterion 7

void radial_model(Outcome& o) {
  auto g = resdisk::RadialGrid::log_spaced();
  auto hom = resdisk::radial_solve({-1, CVec::Zero(g.size()), cplx(1.0), g});
  double a_err = std::abs(hom.leading - 1.0);
  CVec psi = g.r.array().sqrt().cast<cplx>();
  auto inh = resdisk::radial_solve({-1, psi, std::nullopt, g});
  double err = 0;
  for (Eigen::Index i = 0; i < g.size(); ++i)
    err = std::max(err, std::abs(inh.phi_tilde(i) - 0.5 * std::pow(g.r(i), 1.5)));
  o.check(a_err <= 1e-10, "homogeneous coefficient");
  o.check(err <= 1e-8, "inhomogeneous profile");
  o.detail << "a-coefficient error " << a_err << ", r^{3/2}/2 error " << err << " on " << g.size() << " points";
}

// ------------------------------------------------------------ criterion 8

void greens_form(Outcome& o) {
  using namespace resdisk;
  auto g = RadialGrid::log_spaced();
  CMat J = standard_symplectic(2);
  Rng rng(808);
  double anti = 0, resid_only = 0;
  for (int k = 0; k < 4; ++k) {
    AnnulusSection s(2, g), t(2, g);
    s.add_power(rng.cmat(2, 1).col(0), -1).add_monomial(rng.cmat(2, 1).col(0), -1, 0.5);
    s.add_power(rng.cmat(2, 1).col(0), 1);
    t.add_power(rng.cmat(2, 1).col(0), -1).add_monomial(rng.cmat(2, 1).col(0), 1, 1.0);
    double st = greens_form(s, t, J).value, ts = greens_form(t, s, J).value;
    anti = std::max(anti, std::abs(st + ts));
    AnnulusSection h(2, g);
    h.add_power(rng.cmat(2, 1).col(0), 1).add_power(rng.cmat(2, 1).col(0), 3);
    resid_only = std::max(resid_only, std::abs(greens_form(s + h, t, J).value - st));
  }
  ModelOperator op{2, 0.4, random_sp(J, rng)};
  auto rep = lagrangian_check(model_kernel(op, g, canonical_lagrangian(2)), J);
  o.check(anti <= 1e-8, "antisymmetry");
  o.check(resid_only <= 1e-7, "residue-only dependence");
  o.check(rep.isotropy_defect <= 1e-6, "isotropy");
  o.detail << "antisymmetry " << anti << ", residue-only " << resid_only << ", isotropy defect "
           << rep.isotropy_defect;
}

// ------------------------------------------------------------ criterion 9

void blowup_geometry(Outcome& o) {
  bool flat = true;
  for (double u : {1e-3, 0.5, 1.0, 7.0, 123.0}) flat = flat && blowup::eh_potential(u, 0) == u;
  double scal = blowup::scaling_check(100, 909);
  double margin = std::numeric_limits<double>::infinity();
  for (double t : {0.1, 1.0, 10.0}) margin = std::min(margin, blowup::positivity_margin(t, 1000, 910));
  double fd = 0;
  for (double t : {0.1, 1.0, 3.0})
    for (double u : {0.05, 0.5, 2.0, 9.0}) {
      double h = 1e-4 * u;
      double num = (blowup::eh_potential(u + h, t) - blowup::eh_potential(u - h, t)) / (2 * h);
      double closed = blowup::eh_potential_derivative(u, t).closed;
      fd = std::max(fd, std::abs(num - closed) / std::max(1.0, std::abs(closed)));
    }
  o.check(flat, "f_0(u) = u");
  o.check(scal <= 1e-10, "scaling");
  o.check(margin > 0, "positivity");
  o.check(fd <= 1e-8, "derivative");
  o.detail << "f_0 exact " << (flat ? "yes" : "no") << ", scaling deviation " << scal << ", min margin " << margin
           << ", f' vs differences " << fd;
}

// ----------------------------------------------------------- criterion 10

void vortex_identities(Outcome& o) {
  using namespace vortex;
  VortexProblem p;
  p.N = 8;
  p.P << cplx(0.4, 0.1), cplx(0.2, -0.3), cplx(-0.1, 0.25), cplx(-0.5, 0.2);
  p.eta_r = 0.7;
  p.eta_c = cplx(0.2, 0.1);
  auto exact = constant_solution(p);
  Rng rng(1010);
  auto t0 = Clock::now();
  auto res = solve_vortex(p, perturbed(exact, 1e-2, rng));
  double secs = seconds_since(t0);
  auto direct = solve_vortex(p, exact);
  o.check(res.converged && res.history.back().residual <= 1e-8, "perturbed solve");
  o.check(direct.converged && direct.history.size() <= 3, "constant solve");
  o.check(secs < 10, "solve time");
  double zeta = res.converged ? zeta_vanishing_check(p, res.state).zeta_norm : 1;
  o.check(zeta <= 1e-8, "zeta");
  auto d8 = deformation_operator(p, exact);
  auto p16 = p;
  p16.N = 16;
  auto d16 = deformation_operator(p16, constant_solution(p16));
  double drift = std::abs(d16.sigma_min - d8.sigma_min) / d8.sigma_min;
  o.check(d8.square && d16.square, "square");
  o.check(d8.sigma_min > 0 && drift <= 0.1, "sigma_min stability");
  RMat A = RMat::Identity(5, 5);
  A(1, 1) = 2;
  RVec u = RVec::Unit(5, 4);
  auto one = transport_sign([&](double t) { return RMat(A - 1.6 * t * u * u.transpose()); }, 0.0, 1.0);
  auto two = transport_sign(
      [](double t) {
        RMat B = RMat::Identity(4, 4);
        B(1, 1) = 0.3 - t;
        B(2, 2) = 0.7 - t;
        return B;
      },
      0.01, 1.0);
  o.check(one.sign == -1 && one.crossings.size() == 1, "one crossing");
  o.check(two.sign == 1 && two.crossings.size() == 2, "two crossings");
  o.detail << "residual " << res.history.back().residual << " in " << secs << " s, |zeta| " << zeta
           << ", sigma_min " << d8.sigma_min << " -> " << d16.sigma_min << ", signs " << one.sign << " / "
           << two.sign;
}

// ----------------------------------------------------------- criterion 11

void spinor_algebra(Outcome& o) {
  using namespace quatspin;
  Rng rng(1111);
  double cliff = 0, tau = 0, vol = 0, round = 0;
  vol = max_abs(CMat(gamma_e1() * gamma_e2() * gamma_e3() - Mat2::Identity()));
  for (int s = 0; s < 500; ++s) {
    Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal()), w(rng.normal(), rng.normal(), rng.normal());
    Mat2 lhs = clifford_gamma(v) * clifford_gamma(w) + clifford_gamma(w) * clifford_gamma(v);
    cliff = std::max(cliff, max_abs(CMat(lhs + 2.0 * v.dot(w) * Mat2::Identity())) / (1 + v.norm() * w.norm()));
  }
  for (int rank : {2, 4}) {
    RealStructure rs(rank);
    for (int s = 0; s < 200; ++s) {
      TensorSpinor psi{rng.cmat(rank, 1).col(0), rng.cmat(rank, 1).col(0)};
      TensorSpinor tt = rs.tau(rs.tau(psi));
      tau = std::max({tau, max_abs(CMat(tt.plus - psi.plus)), max_abs(CMat(tt.minus - psi.minus))});
      RealLinearMap ur{rng.cmat(rank, rank), rng.cmat(rank, rank)};
      auto back = upsilon_restrict(rs, upsilon_reconstruct(rs, ur));
      round = std::max({round, max_abs(CMat(back.linear - ur.linear)), max_abs(CMat(back.antilinear - ur.antilinear))});
    }
  }
  o.check(cliff <= 1e-12, "Clifford");
  o.check(tau <= 1e-12, "tau");
  o.check(vol <= 1e-12, "volume");
  o.check(round <= 1e-12, "round trip");
  o.detail << "Clifford " << cliff << ", tau^2 " << tau << ", volume " << vol << ", round trip " << round;
}

// ----------------------------------------------------------- criterion 12

int shell(const std::string& cmd) {
  int st = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void determinism(Outcome& o) {
  const std::string cli = CRLAB_CLI_PATH, cfg = CRLAB_CONFIG_DIR;
  fs::path root = fs::temp_directory_path() / "crlab_acceptance";
  fs::remove_all(root);
  struct RunSpec {
    std::string name, args;
  };
  std::vector<RunSpec> runs{
      {"scan", "scan " + cfg + "/translation_wall.json"},
      {"adhm", "adhm --case 1,2 --ratio --samples 3000 --seed 7"},
      {"residue", "residue " + cfg + "/residue_perturbed.json"},
      {"blowup", "blowup --scaling-check --positivity --samples 200 --seed 3"},
      {"vortex", "vortex --solve " + cfg + "/perturbed21.json"},
  };
  int files = 0;
  for (const auto& r : runs) {
    fs::path a = root / (r.name + "_a"), b = root / (r.name + "_b");
    int ca = shell(cli + " " + r.args + " --out " + a.string());
    int cb = shell(cli + " " + r.args + " --out " + b.string());
    o.check(ca == 0 && cb == 0, r.name + " exit");
    for (const auto& e : fs::directory_iterator(a)) {
      if (e.path().filename() == "manifest.json") continue;
      ++files;
      o.check(slurp(e.path()) == slurp(b / e.path().filename()), r.name + "/" + e.path().filename().string());
    }
  }
  o.detail << files << " data files byte-identical across reruns";
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, std::function<void(Outcome&)>>> suite{
      {"index suite", index_suite},
      {"cover splitting", cover_splitting},
      {"wall scan ground truth", wall_ground_truth},
      {"chamber ledger", chamber_ledger},
      {"moment map oracle", moment_oracle},
      {"compactness constant", compactness},
      {"radial model", radial_model},
      {"Green's form", greens_form},
      {"blow-up geometry", blowup_geometry},
      {"vortex identities", vortex_identities},
      {"spinor algebra", spinor_algebra},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    Outcome o;
    try {
      suite[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << i + 1 << " " << suite[i].first << ": " << o.detail.str()
              << std::endl;
  }
  return failures;
}
