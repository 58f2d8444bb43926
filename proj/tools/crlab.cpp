// crlab: command-line driver for the crlab modules.
//
//   crlab index   --genus 1 --deg 0 --rank 2 --branch 2
//   crlab scan    configs/translation_wall.json
//   crlab adhm    --case 1,2 --ratio --samples 10000 --seed 7
//   crlab residue configs/residue_perturbed.json
//   crlab blowup  --scaling-check --samples 100
//   crlab vortex  --solve configs/constant21.json
//
// Every run writes <out>/manifest.json, including failed runs. Exit codes:
// 0 ok, 2 usage, 3 degenerate, 4 precondition, 5 nonconvergence.

#include <CLI11.hpp>

#include <iostream>
#include <thread>

#include "crlab/adhm.hpp"
#include "crlab/blowup.hpp"
#include "crlab/crop.hpp"
#include "crlab/io.hpp"
#include "crlab/resdisk.hpp"
#include "crlab/vortex.hpp"
#include "crlab/wallscan.hpp"

using namespace crlab;
using io::cell;
using nlohmann::json;

namespace {

struct Common {
  std::string out;
  std::string config;
  unsigned threads = 0;
  std::optional<std::uint64_t> seed;
};

io::RunConfig load_config(const std::string& path, const std::string& command) {
  auto c = io::parse_config(io::read_json(path));
  require(c.command == command, "config is for command '" + c.command + "', not '" + command + "'",
          ErrorKind::usage);
  return c;
}

std::string out_dir(const Common& com, const io::RunConfig* cfg) {
  if (!com.out.empty()) return com.out;
  if (cfg && !cfg->output_dir.empty()) return cfg->output_dir;
  return "crlab_out";
}

// --seed beats CRLAB_SEED, which beats the config value.
std::uint64_t seed_for(const Common& com, const io::RunConfig* cfg, std::uint64_t fallback) {
  if (com.seed) return *com.seed;
  return io::resolve_seed(cfg ? cfg->seed : std::nullopt, fallback);
}

unsigned threads_for(const Common& com) {
  return com.threads ? com.threads : std::max(1u, std::thread::hardware_concurrency());
}

double number(const json& p, const char* key, double fallback) {
  if (!p.contains(key)) return fallback;
  require(p[key].is_number(), std::string("'") + key + "' must be a number", ErrorKind::usage);
  return p[key].get<double>();
}

int integer(const json& p, const char* key, int fallback) {
  if (!p.contains(key)) return fallback;
  require(p[key].is_number_integer(), std::string("'") + key + "' must be an integer", ErrorKind::usage);
  return p[key].get<int>();
}

// ------------------------------------------------------------------- index

struct IndexArgs {
  int genus = 1, deg = 0, rank = 1, branch = 0;
};

int run_index(const IndexArgs& a, io::Manifest& m) {
  m.set_config({{"genus", a.genus}, {"deg", a.deg}, {"rank", a.rank}, {"branch", a.branch}});
  int ind = crop::index_formula(a.genus, a.deg, a.rank, a.branch);
  std::cout << ind << "\n";
  m.set_result({{"index", ind}});
  return 0;
}

// -------------------------------------------------------------------- scan

int run_scan(const std::string& path, const Common& com, io::Manifest& m, const io::RunConfig& cfg) {
  const json& p = cfg.params;
  io::check_keys(p, {"base", "direction", "t0", "t1", "sectors", "grid_n", "refine_tol", "wall_tol_rel", "weights"},
                 "scan params");
  require(p.contains("base") && p.contains("direction"), "scan needs 'base' and 'direction' operator specs",
          ErrorKind::usage);
  wallscan::OperatorPath path_{crop::spec_from_json(p["base"]), crop::spec_from_json(p["direction"]),
                               number(p, "t0", 0.0), number(p, "t1", 1.0), {}, {}};
  path_.sectors = {crop::Twist{1, 0}, crop::Twist{0, 1}, crop::Twist{1, 1}};
  require(path_.base.rank == path_.direction.rank, "base and direction ranks differ", ErrorKind::usage);
  if (p.contains("sectors")) {
    path_.sectors.clear();
    for (const auto& s : p["sectors"]) path_.sectors.push_back(crop::parse_twist(s.get<std::string>()));
  }
  wallscan::ScanOptions opt;
  opt.grid_n = integer(p, "grid_n", opt.grid_n);
  opt.refine_tol = number(p, "refine_tol", opt.refine_tol);
  opt.wall_tol_rel = number(p, "wall_tol_rel", opt.wall_tol_rel);
  opt.N = cfg.N.value_or(opt.N);
  opt.threads = threads_for(com);
  std::map<std::string, int> weights;
  if (p.contains("weights"))
    for (const auto& [k, v] : p["weights"].items()) weights[crop::parse_twist(k).label()] = v.get<int>();

  auto res = wallscan::scan_path(path_, opt);
  wallscan::assign_signs(path_, res.crossings, opt.N);

  io::Csv trace({"t", "sector", "sigma_min"});
  for (const auto& tp : res.trace) trace.row({cell(tp.t), tp.sector.label(), cell(tp.sigma_min)});
  m.output("trace.csv", trace.str());

  json report{{"config", path}, {"crossings", wallscan::crossings_to_json(res.crossings)},
              {"n_crossings", res.crossings.size()}};
  m.output("crossings.json", io::dump(report));
  int sharp = wallscan::sharp_sum(res.crossings, [&](crop::Twist tw) {
    auto it = weights.find(tw.label());
    return it == weights.end() ? 1 : it->second;
  });
  report["sharp"] = sharp;
  m.output("crossings.json", io::dump(report));
  m.set_result({{"n_crossings", res.crossings.size()}, {"sharp", sharp}});
  std::cout << "crossings " << res.crossings.size() << "\n";
  for (const auto& c : res.crossings)
    std::cout << "  t* = " << io::format_double(c.t_star) << " sector " << c.sector.label() << " sign " << c.sign
              << "\n";
  std::cout << "sharp " << sharp << "\n";
  return 0;
}

// -------------------------------------------------------------------- adhm

struct AdhmArgs {
  std::string kase = "2,1";
  bool ratio = false;
  bool pairing = false;
  std::size_t samples = 10000;
  double delta = 0.1;
};

adhm::ADHMRep parse_case(const std::string& s) {
  if (s == "1,2") return {1, 2};
  if (s == "2,1") return {2, 1};
  fail(ErrorKind::usage, "case must be '1,2' or '2,1'");
}

int run_adhm(const AdhmArgs& a, const Common& com, io::Manifest& m) {
  auto rep = parse_case(a.kase);
  std::uint64_t seed = seed_for(com, nullptr, 7);
  m.set_seed(seed);
  m.set_config({{"case", a.kase}, {"ratio", a.ratio}, {"pairing", a.pairing}, {"samples", a.samples},
                {"delta", a.delta}, {"seed", seed}});
  require(a.ratio || a.pairing, "choose --ratio and/or --pairing", ErrorKind::usage);
  json result;
  if (a.pairing) {
    Rng rng(seed, 1);
    double worst = 0;
    for (std::size_t i = 0; i < a.samples; ++i) {
      auto c = adhm::random_config(rep, rng);
      CMat X = adhm::random_lie(rep.k, rng);
      Eigen::Vector3d d =
          adhm::moment_pairing_oracle(rep, c, X) - adhm::moment_pairing_explicit(adhm::moment_maps(rep, c), X);
      worst = std::max(worst, d.cwiseAbs().maxCoeff());
    }
    result["pairing_max_deviation"] = worst;
    m.assertion("pairing within 1e-10", worst <= 1e-10, worst);
    std::cout << "pairing max deviation " << io::format_double(worst) << "\n";
  }
  if (a.ratio) {
    adhm::CompactnessOptions opt;
    opt.delta = a.delta;
    opt.n_samples = a.samples;
    opt.threads = threads_for(com);
    opt.keep_samples = true;
    auto res = adhm::compactness_ratio(rep, seed, opt);
    require(!res.empty(), "no accepted samples in the band", ErrorKind::nonconvergence);
    io::Csv csv({"attempt", "mu_norm", "gamma_mu_norm", "ratio"});
    for (const auto& s : res.samples)
      csv.row({cell(s.attempt), cell(s.mu_norm), cell(s.gamma_mu_norm), cell(s.ratio)});
    m.output("ratio.csv", csv.str());
    json summary{{"case", a.kase},        {"c", res.c},         {"accepted", res.accepted},
                 {"attempts", res.attempts}, {"mean_ratio", res.mean_ratio}, {"delta", a.delta},
                 {"seed", seed},          {"excluded_zero", res.excluded_zero}};
    m.output("ratio.json", io::dump(summary));
    result["c"] = res.c;
    result["accepted"] = res.accepted;
    m.assertion("c finite", std::isfinite(res.c), res.c);
    std::cout << "c = " << io::format_double(res.c) << " (" << res.accepted << " samples)\n";
  }
  m.set_result(result);
  return 0;
}

// ----------------------------------------------------------------- residue

int run_residue(const Common& com, io::Manifest& m, const io::RunConfig& cfg) {
  const json& p = cfg.params;
  io::check_keys(p, {"rank", "beta0", "B0", "random_B0", "r_min", "n"}, "residue params");
  int r = integer(p, "rank", 2);
  require(r >= 2 && r % 2 == 0, "rank must be even and at least 2", ErrorKind::usage);
  std::uint64_t seed = seed_for(com, &cfg, 0);
  m.set_seed(seed);
  CMat gamma = resdisk::standard_symplectic(r);
  resdisk::ModelOperator op{r, number(p, "beta0", 0.0), CMat::Zero(r, r)};
  if (p.contains("B0")) {
    op.B0 = crop::matrix_from_json(p["B0"], r, "B0");
  } else if (p.value("random_B0", false)) {
    Rng rng(seed);
    op.B0 = resdisk::random_sp(gamma, rng);
  }
  auto g = resdisk::RadialGrid::log_spaced(number(p, "r_min", 1e-4), integer(p, "n", 2048));
  auto ker = resdisk::model_kernel(op, g, resdisk::canonical_lagrangian(r));
  auto rep = resdisk::lagrangian_check(ker, gamma);
  io::Csv csv({"vector", "component", "re", "im"});
  for (std::size_t i = 0; i < rep.residues.size(); ++i)
    for (Eigen::Index c = 0; c < rep.residues[i].size(); ++c)
      csv.row({cell(i), cell(long(c)), cell(rep.residues[i](c).real()), cell(rep.residues[i](c).imag())});
  m.output("residues.csv", csv.str());
  json out{{"rank", r},
           {"beta0", op.beta0},
           {"isotropy_defect", rep.isotropy_defect},
           {"dimension_ratio", rep.dimension_ratio},
           {"image_rank", rep.image_rank}};
  m.output("residue.json", io::dump(out));
  m.assertion("isotropy defect within 1e-6", rep.isotropy_defect <= 1e-6, rep.isotropy_defect);
  m.set_result(out);
  std::cout << "isotropy defect " << io::format_double(rep.isotropy_defect) << ", dimension ratio "
            << io::format_double(rep.dimension_ratio) << "\n";
  return 0;
}

// ------------------------------------------------------------------ blowup

struct BlowupArgs {
  bool scaling = false;
  bool positivity = false;
  int samples = 100;
  std::vector<double> ts{0.1, 1.0, 10.0};
  std::vector<int> cover;
};

int run_blowup(const BlowupArgs& a, const Common& com, io::Manifest& m) {
  std::uint64_t seed = seed_for(com, nullptr, 0);
  m.set_seed(seed);
  m.set_config({{"scaling_check", a.scaling}, {"positivity", a.positivity}, {"samples", a.samples},
                {"t", a.ts}, {"cover", a.cover}, {"seed", seed}});
  require(a.scaling || a.positivity || !a.cover.empty(), "choose --scaling-check, --positivity or --cover",
          ErrorKind::usage);
  json out = json::object();
  if (a.scaling) {
    double d = blowup::scaling_check(a.samples, seed);
    out["scaling_max_deviation"] = d;
    m.assertion("scaling deviation within 1e-10", d <= 1e-10, d);
    std::cout << "scaling max deviation " << io::format_double(d) << "\n";
  }
  if (a.positivity) {
    io::Csv csv({"t", "margin"});
    for (double t : a.ts) {
      double mg = blowup::positivity_margin(t, a.samples, seed);
      csv.row({cell(t), cell(mg)});
      m.assertion("positivity at t = " + io::format_double(t), mg > 0, mg);
      out["positivity"][io::format_double(t)] = mg;
      std::cout << "t = " << io::format_double(t) << " margin " << io::format_double(mg) << "\n";
    }
    m.output("positivity.csv", csv.str());
  }
  if (!a.cover.empty()) {
    require(a.cover.size() == 2, "--cover takes genus and branch count", ErrorKind::usage);
    int g = blowup::cover_genus(a.cover[0], a.cover[1]);
    out["cover_genus"] = g;
    std::cout << "cover genus " << g << "\n";
  }
  m.output("blowup.json", io::dump(out));
  m.set_result(out);
  return 0;
}

// ------------------------------------------------------------------ vortex

int run_vortex(const Common& com, io::Manifest& m, const io::RunConfig& cfg, bool orientation) {
  json p = cfg.params;
  io::check_keys(p,
                 {"case", "N", "P", "eta_c", "eta_r", "degree", "start", "perturbation", "eigen", "tol", "max_iter"},
                 "vortex params");
  json pp = json::object();
  for (const char* k : {"case", "N", "P", "eta_c", "eta_r", "degree"})
    if (p.contains(k)) pp[k] = p[k];
  if (cfg.N) pp["N"] = *cfg.N;
  auto prob = vortex::problem_from_json(pp);
  std::string start = p.value("start", "constant");
  require(start == "constant" || start == "perturbed", "start must be 'constant' or 'perturbed'", ErrorKind::usage);
  std::uint64_t seed = seed_for(com, &cfg, 0);
  m.set_seed(seed);
  auto init = vortex::constant_solution(prob, integer(p, "eigen", 0));
  if (start == "perturbed") {
    Rng rng(seed);
    init = vortex::perturbed(init, number(p, "perturbation", 1e-2), rng);
  }
  vortex::NewtonOptions opt;
  opt.tol = number(p, "tol", opt.tol);
  opt.max_iter = integer(p, "max_iter", opt.max_iter);
  auto res = vortex::solve_vortex(prob, init, opt);

  io::Csv hist({"iter", "residual", "step"});
  for (const auto& h : res.history) hist.row({cell(h.iter), cell(h.residual), cell(h.step)});
  m.output("history.csv", hist.str());
  m.output("state.json", io::dump({{"problem", vortex::problem_to_json(prob)}, {"state", vortex::state_to_json(res.state)}}));
  auto rn = vortex::vortex_residual(prob, res.state);
  json out{{"converged", res.converged},
           {"iterations", res.history.size() - 1},
           {"galerkin_residual", res.history.back().residual},
           {"residual", {{"dirac", rn.dirac}, {"mu_c", rn.mu_c}, {"curvature", rn.curvature}, {"gauge", rn.gauge}}},
           {"sigma_min", res.sigma_min},
           {"alpha_branch", res.alpha_branch},
           {"moved", res.moved}};
  if (res.converged) {
    auto z = vortex::zeta_vanishing_check(prob, res.state, opt.tol);
    out["zeta"] = {{"norm", z.zeta_norm}, {"dbar", z.dbar_zeta}, {"reducible", z.reducible}, {"note", z.note}};
    if (!z.reducible) m.assertion("zeta vanishes", z.vanishes, z.zeta_norm);
    if (orientation) {
      auto tr = vortex::orientation_sign(prob, res.state);
      out["orientation"] = {{"sign", tr.sign}, {"crossings", tr.crossings}};
      io::Csv tc({"t", "sigma_min", "det_sign"});
      for (const auto& e : tr.trace) tc.row({cell(e[0]), cell(e[1]), cell(int(e[2]))});
      m.output("orientation.csv", tc.str());
    }
  }
  m.output("vortex.json", io::dump(out));
  m.assertion("converged", res.converged, res.history.back().residual);
  m.set_result(out);
  std::cout << (res.converged ? "converged" : "not converged") << " after " << res.history.size() - 1
            << " iterations, residual " << io::format_double(res.history.back().residual) << "\n";
  if (!res.converged)
    fail(ErrorKind::nonconvergence,
         "Newton did not converge (residual " + io::format_double(res.history.back().residual) + ")");
  if (start == "constant" && !res.alpha_branch && prob.eta_r > 0)
    fail(ErrorKind::nonconvergence, "solution left the alpha branch");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crlab: real Cauchy-Riemann operators, walls and ADHM vortex numerics"};
  app.require_subcommand(1);
  Common com;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", com.out, "output directory (default crlab_out)");
    sub->add_option("--threads", com.threads, "worker threads (default: all cores)");
    sub->add_option("--seed", com.seed, "random seed");
  };

  IndexArgs ia;
  auto* s_index = app.add_subcommand("index", "evaluate the index formula");
  s_index->add_option("--genus", ia.genus);
  s_index->add_option("--deg", ia.deg);
  s_index->add_option("--rank", ia.rank);
  s_index->add_option("--branch", ia.branch);
  add_common(s_index);

  std::string scan_cfg;
  auto* s_scan = app.add_subcommand("scan", "scan an operator path for wall crossings");
  s_scan->add_option("config", scan_cfg, "run config (JSON)")->required()->check(CLI::ExistingFile);
  add_common(s_scan);

  AdhmArgs aa;
  auto* s_adhm = app.add_subcommand("adhm", "ADHM moment maps and the compactness ratio");
  s_adhm->add_option("--case", aa.kase, "1,2 or 2,1");
  s_adhm->add_flag("--ratio", aa.ratio, "Monte-Carlo compactness ratio");
  s_adhm->add_flag("--pairing", aa.pairing, "moment map pairing check");
  s_adhm->add_option("--samples", aa.samples);
  s_adhm->add_option("--delta", aa.delta);
  add_common(s_adhm);

  std::string residue_cfg;
  auto* s_res = app.add_subcommand("residue", "kernel residues of the model operator on the disk");
  s_res->add_option("config", residue_cfg, "run config (JSON)")->required()->check(CLI::ExistingFile);
  add_common(s_res);

  BlowupArgs ba;
  auto* s_blow = app.add_subcommand("blowup", "Eguchi-Hanson fibre geometry checks");
  s_blow->add_flag("--scaling-check", ba.scaling);
  s_blow->add_flag("--positivity", ba.positivity);
  s_blow->add_option("--samples", ba.samples);
  s_blow->add_option("--t", ba.ts, "deformation parameters for --positivity");
  s_blow->add_option("--cover", ba.cover, "genus and branch count")->expected(2);
  add_common(s_blow);

  std::string vortex_cfg;
  bool orient = false;
  auto* s_vortex = app.add_subcommand("vortex", "solve the perturbed (2,1) vortex equations");
  s_vortex->add_option("--solve", vortex_cfg, "run config (JSON)")->required()->check(CLI::ExistingFile);
  s_vortex->add_flag("--orientation", orient, "transport the orientation sign along the homotopy");
  add_common(s_vortex);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    io::Manifest m(app.get_subcommands().empty() ? "" : app.get_subcommands()[0]->get_name(),
                   com.out.empty() ? "crlab_out" : com.out);
    m.finish(2, e.what());
    return 2;
  }

  CLI::App* sub = app.get_subcommands()[0];
  const std::string name = sub->get_name();
  std::optional<io::RunConfig> cfg;
  std::string dir = com.out.empty() ? "crlab_out" : com.out;
  io::Manifest* live = nullptr;
  std::optional<io::Manifest> manifest;
  try {
    const std::string& path = name == "scan" ? scan_cfg : name == "residue" ? residue_cfg : vortex_cfg;
    if (name == "scan" || name == "residue" || name == "vortex") {
      cfg = load_config(path, name);
      dir = out_dir(com, &*cfg);
    }
    manifest.emplace(name, dir);
    live = &*manifest;
    if (cfg) manifest->set_config(cfg->raw);
    int code = 0;
    if (name == "index") code = run_index(ia, *manifest);
    if (name == "scan") code = run_scan(path, com, *manifest, *cfg);
    if (name == "adhm") code = run_adhm(aa, com, *manifest);
    if (name == "residue") code = run_residue(com, *manifest, *cfg);
    if (name == "blowup") code = run_blowup(ba, com, *manifest);
    if (name == "vortex") code = run_vortex(com, *manifest, *cfg, orient);
    manifest->finish(code);
    return code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (!live) manifest.emplace(name, dir);
    manifest->finish(e.exit_code(), e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (!live) manifest.emplace(name, dir);
    manifest->finish(4, e.what());
    return 4;
  }
}
