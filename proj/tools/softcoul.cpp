// softcoul: experiment runner. Each subcommand writes one CSV table (stdout or
// -o FILE) and, with -o, a JSON manifest FILE.manifest.json next to it.
//
// Exit status: 0 ok, 2 invalid configuration, 3 numerical failure,
// 1 selftest failure.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/version.hpp>
#include <fftw3.h>
#include <json.hpp>

#include "softcoul/softcoul.hpp"

namespace {

using namespace softcoul;
using json = nlohmann::json;
using io::CsvWriter;

struct Globals {
  int jobs = 1;
  std::uint64_t seed = 0;
  std::string output;
  std::string manifest;
};

/// Runs fn(0..n-1) on up to `jobs` threads; results land by index, so the
/// merged order never depends on completion order. The first failure by
/// index is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(n, std::size_t(std::max(1, jobs))));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

json versions() {
  return {{"softcoul", std::string(kVersion)},
          {"fftw", std::string(fftw_version)},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", std::string(BOOST_LIB_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", std::string(CLI11_VERSION)}};
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw ConfigError("cannot write " + path, path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

// ---------------------------------------------------------------------------
// Subcommands. Each fills `summary` with run-level findings for the manifest.

PotentialSpec make_spec(const std::string& family, double C, double alpha, double c, double Z) {
  if (family == "softened") return PotentialSpec::softened(C, Z);
  if (family == "coulomb") return PotentialSpec::coulomb(Z);
  if (family == "yukawa") return PotentialSpec::yukawa(alpha, c, Z);
  throw ConfigError("family must be softened, coulomb or yukawa", "family");
}

struct PotentialTableArgs {
  std::string family = "softened", r = "0:10:lin101";
  double C = 1.0, alpha = 1.0, c = 1.0, Z = 1.0;
};

void potential_table(const PotentialTableArgs& a, std::ostream& os, json& summary) {
  const auto spec = make_spec(a.family, a.C, a.alpha, a.c, a.Z);
  const auto rs = io::parse_sweep(a.r, "r");
  CsvWriter csv(os, {"r", "V", "dVdr", "laplacian"});
  for (double r : rs) {
    if (r < 0.0) throw ConfigError("r must be nonnegative", "r");
    // The softened potential is flat at the origin: every derivative is 0.
    const double lap = r == 0.0 && spec.family == Family::SoftenedP ? 0.0 : laplacian(spec, r);
    csv.row({r, eval(spec, r), radial_derivative(spec, r), lap});
  }
  summary["rows"] = rs.size();
}

struct FtTableArgs {
  std::string C = "1", xi = "0.1:10:log25", method = "both";
  double k = 0.0, tol = 1e-10;
};

void ft_table(const FtTableArgs& a, const Globals& g, std::ostream& os, json& summary) {
  const auto Cs = io::parse_sweep(a.C, "C");
  const auto xis = io::parse_sweep(a.xi, "xi");
  if (a.method != "both" && a.method != "quadrature" && a.method != "closed_form")
    throw ConfigError("method must be quadrature, closed_form or both", "method");
  if (!(a.k <= 0.0)) throw ConfigError("k must be <= 0 (0 is the undamped limit)", "k");
  for (double C : Cs)
    if (!(C > 0.0)) throw ConfigError("C must be positive", "C");
  for (double x : xis)
    if (!(x > 0.0)) throw ConfigError("xi must be positive", "xi");

  const bool cf = a.method != "quadrature", quad = a.method != "closed_form";
  const std::size_t n = Cs.size() * xis.size();
  std::vector<double> v_cf(n), v_q(n);
  parallel_for(n, g.jobs, [&](std::size_t i) {
    const double C = Cs[i / xis.size()], xi = xis[i % xis.size()];
    if (cf) v_cf[i] = fourier::ft_sample(C, xi, fourier::Method::ClosedForm, a.k).value.real();
    if (quad) v_q[i] = fourier::ft_quadrature(C, xi, a.k, a.tol);
  });

  CsvWriter csv(os, {"C", "xi", "re", "im", "method"});
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double C = Cs[i / xis.size()], xi = xis[i % xis.size()];
    if (cf) csv.row({C, xi, v_cf[i], 0.0, std::string("closed_form")});
    if (quad) csv.row({C, xi, v_q[i], 0.0, std::string("quadrature")});
    if (cf && quad) worst = std::max(worst, std::abs(v_cf[i] - v_q[i]) / std::abs(v_q[i]));
  }
  if (cf && quad) summary["max_relative_gap"] = worst;
}

struct CoulombLimitArgs {
  std::string C = "1e-1,1e-2,1e-3";
  double xi = 1.0;
};

void coulomb_limit(const CoulombLimitArgs& a, std::ostream& os, json& summary) {
  const auto Cs = io::parse_sweep(a.C, "C");
  std::vector<fourier::LimitPoint> curve;
  try {
    curve = fourier::coulomb_limit_curve(a.xi, Cs);
  } catch (const DomainError& e) {
    throw ConfigError(e.what(), "C");
  }
  CsvWriter csv(os, {"C", "xi", "deviation"});
  bool decreasing = true;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    csv.row({curve[i].C, a.xi, curve[i].deviation});
    if (i > 0 && !(curve[i].deviation < curve[i - 1].deviation)) decreasing = false;
  }
  summary["strictly_decreasing"] = decreasing;
}

const std::vector<std::string> kSpectrumHeader = {"C", "ell", "theta_im", "index", "re", "im", "class"};

struct EigScanArgs {
  std::string C = "0.1,0.01,0.001";
  int ell = 0, states = 1;
  double h = 0.0, rmax = 60.0;
};

void eig_scan(const EigScanArgs& a, const Globals& g, std::ostream& os, json& summary) {
  const auto Cs = io::parse_sweep(a.C, "C");
  if (a.states < 1) throw ConfigError("states must be >= 1", "states");
  if (a.ell < 0) throw ConfigError("ell must be >= 0", "ell");
  double c_min = 1.0;
  for (double C : Cs)
    if (C > 0.0) c_min = std::min(c_min, C);
  const double h = a.h > 0.0 ? a.h : c_min / 20.0;
  spectral::RadialGrid grid;
  try {
    grid = spectral::RadialGrid::from_extent(h, a.rmax);
    spectral::require_limit_resolution(Cs, grid);
  } catch (const DomainError& e) {
    throw ConfigError(e.what(), "C");
  }
  std::vector<std::vector<double>> levels(Cs.size());
  parallel_for(Cs.size(), g.jobs, [&](std::size_t i) {
    const auto spec = Cs[i] == 0.0 ? PotentialSpec::coulomb() : PotentialSpec::softened(Cs[i]);
    levels[i] = spectral::bound_states(spectral::build_radial(spec, a.ell, grid), std::size_t(a.states));
  });
  CsvWriter csv(os, kSpectrumHeader);
  bool decreasing = true;
  for (std::size_t i = 0; i < Cs.size(); ++i) {
    for (std::size_t k = 0; k < levels[i].size(); ++k)
      csv.row({Cs[i], (long long)a.ell, 0.0, (long long)k, levels[i][k], 0.0, std::string("bound")});
    if (i > 0 && !(levels[i][0] < levels[i - 1][0])) decreasing = false;
  }
  summary["h"] = h;
  summary["n"] = grid.n;
  summary["E1_strictly_decreasing"] = decreasing;
}

struct ComplexScalingArgs {
  double C = 0.0, h = 0.05, tol_b = 1e-3, tol_c = 0.05;
  int ell = 0, n = 500;
  std::string theta = "0.2,0.3";
};

void complex_scaling(const ComplexScalingArgs& a, const Globals& g, std::ostream& os, json& summary) {
  const auto thetas = io::parse_sweep(a.theta, "theta");
  if (a.C < 0.0) throw ConfigError("C must be >= 0 (0 is Coulomb)", "C");
  const auto spec = a.C == 0.0 ? PotentialSpec::coulomb() : PotentialSpec::softened(a.C);
  spectral::ClassifyOptions opt{a.tol_b, a.tol_c, 0.0};
  std::vector<spectral::SpectrumReport> reps(thetas.size());
  try {
    const spectral::RadialGrid grid(a.h, std::size_t(std::max(a.n, 0)));
    for (double t : thetas)
      if (!(t > 0.0 && t < std::numbers::pi / 2)) throw ConfigError("theta must lie in (0, pi/2)", "theta");
    parallel_for(thetas.size(), g.jobs, [&](std::size_t i) {
      reps[i] = spectral::complex_spectrum(
          spectral::build_radial(spec, a.ell, grid, {0.0, thetas[i]}), 0, opt);
    });
  } catch (const ConfigError&) {
    throw;
  } catch (const DomainError& e) {
    throw ConfigError(e.what(), "n");
  }
  CsvWriter csv(os, kSpectrumHeader);
  json per = json::array();
  const auto ref = reps.front().bound();
  for (std::size_t i = 0; i < reps.size(); ++i) {
    const auto& r = reps[i];
    std::size_t cont = 0;
    for (std::size_t k = 0; k < r.eigenvalues.size(); ++k) {
      csv.row({a.C, (long long)a.ell, thetas[i], (long long)k, r.eigenvalues[k].real(), r.eigenvalues[k].imag(),
               spectral::to_string(r.classification[k])});
      cont += r.classification[k] == spectral::SpectralClass::RotatedContinuum;
    }
    const auto b = r.bound();
    double drift = 0.0;
    for (std::size_t k = 0; k < std::min(b.size(), ref.size()); ++k) drift = std::max(drift, std::abs(b[k] - ref[k]));
    per.push_back({{"theta_im", thetas[i]},
                   {"bound", b.size()},
                   {"rotated_continuum", cont},
                   {"unresolved", r.eigenvalues.size() - b.size() - cont},
                   {"bound_drift_vs_first", drift}});
  }
  summary["per_theta"] = per;
}

struct DilatationArgs {
  std::string C = "0.1,1,10";
  std::string beta = "0.39269908169872414,0.78539816339744828,1.1780972450961724";
};

void dilatation_check(const DilatationArgs& a, const Globals& g, std::ostream& os, json& summary) {
  const auto Cs = io::parse_sweep(a.C, "C");
  const auto betas = io::parse_sweep(a.beta, "beta");
  for (double C : Cs)
    if (!(C > 0.0)) throw ConfigError("C must be positive", "C");
  for (double b : betas)
    if (!(b >= 0.0 && b < std::numbers::pi / 2)) throw ConfigError("beta must lie in [0, pi/2)", "beta");
  std::vector<spectral::ConditionReport> reps(Cs.size() * betas.size());
  parallel_for(reps.size(), g.jobs, [&](std::size_t i) {
    reps[i] = spectral::check_dilatation_conditions(PotentialSpec::softened(Cs[i / betas.size()]),
                                                    betas[i % betas.size()]);
  });
  CsvWriter csv(os, {"C", "beta", "analytic_sector", "decay_at_infinity", "small_r_bound", "far_sup",
                     "near_weighted_sup", "passed"});
  bool all = true;
  auto flag = [](bool b) { return (long long)(b ? 1 : 0); };
  for (const auto& r : reps) {
    csv.row({r.C, r.beta, flag(r.analytic_sector), flag(r.decay_at_infinity), flag(r.small_r_bound),
             r.far_profile.back().second, r.near_profile.back().second, flag(r.passed())});
    all = all && r.passed();
  }
  summary["all_passed"] = all;
}

struct PropagateArgs {
  std::string config;
};

void propagate(const PropagateArgs& a, std::ostream& os, json& summary, json& parameters) {
  const auto rc = io::load_run_config(a.config);
  parameters["run"] = rc.raw;
  const auto& cfg = rc.propagation;
  propagator::Propagator prop(cfg.grid, 1.0, cfg.scheme);
  propagator::WaveFunction3D psi0;
  try {
    switch (rc.initial) {
      case io::InitialState::HydrogenExp:
        psi0 = propagator::make_groundstate(cfg.grid, propagator::GroundStateKind::HydrogenExp);
        break;
      case io::InitialState::HydrogenTrue:
        psi0 = propagator::make_groundstate(cfg.grid, propagator::GroundStateKind::HydrogenTrue);
        break;
      case io::InitialState::Relaxed:
        psi0 = propagator::relax_to_ground_state(
            prop, propagator::make_groundstate(cfg.grid, propagator::GroundStateKind::HydrogenTrue));
        break;
    }
  } catch (const ResolutionError& e) {
    throw ConfigError(e.what(), a.config + ":grid");
  }
  const auto res = propagator::evolve_with_diagnostics(prop, cfg, psi0);
  CsvWriter csv(os, {"t", "norm", "x2", "ynorm"});
  for (const auto& s : res.samples) csv.row({s.t, s.norm, s.x2, s.ynorm});
  summary["y_initial"] = res.y_initial;
  summary["y_max"] = res.y_max;
  summary["domain_flag"] = res.domain_flag;
  summary["boundary_warning"] = res.boundary_warning;
  if (cfg.dyson_order > 0 && cfg.C) {
    const auto d = propagator::dyson_propagate(prop, psi0, 0.0, cfg.t_final, cfg);
    summary["dyson"] = {{"order", cfg.dyson_order},
                        {"distance_to_reference", propagator::distance(d.psi, res.final_state)},
                        {"remainder_bound", d.remainder_bound},
                        {"term_norms", d.term_norms},
                        {"warnings", d.warnings}};
  }
}

struct SelftestArgs {
  std::string inject;
};

int run_selftest(const SelftestArgs& a, const Globals& g, std::ostream& os, json& summary) {
  selftest::Hooks hooks;
  if (a.inject == "laplacian-sign") {
    hooks.laplacian = [](const PotentialSpec& s, double r) { return -laplacian(s, r); };
  } else if (a.inject == "k1-seam") {
    hooks.k1 = [](std::complex<double> z) { return specfun::detail::k1_dispatch(z, 10.0); };
  } else if (!a.inject.empty()) {
    throw ConfigError("inject must be laplacian-sign or k1-seam", "inject");
  }
  const auto results = selftest::run(hooks, g.seed);
  bool ok = true;
  json suites = json::array();
  for (const auto& r : results) {
    os << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << io::format_double(r.seconds).substr(0, 5)
       << " s): " << r.detail << '\n';
    suites.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
    ok = ok && r.passed;
  }
  summary["suites"] = suites;
  return ok ? 0 : 1;
}

void error_json(const std::string& kind, const std::string& type, const std::string& message,
                const std::string& path = {}) {
  json e = {{"error", kind}, {"type", type}, {"message", message}};
  if (!path.empty()) e["path"] = path;
  std::cerr << e.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Softened Coulomb potential toolkit: tables, transforms, spectra and propagation.\n"
               "All quantities in atomic units. Lists: 'a,b,c' or 'a:b:linN' / 'a:b:logN'."};
  app.require_subcommand(1);
  Globals g;
  if (const char* env = std::getenv("SOFTCOUL_JOBS")) {
    try {
      g.jobs = std::max(1, std::stoi(env));
    } catch (...) {
      error_json("config", "ConfigError", "SOFTCOUL_JOBS must be an integer", "SOFTCOUL_JOBS");
      return 2;
    }
  }
  app.add_option("--jobs", g.jobs, "worker threads for sweeps (default $SOFTCOUL_JOBS or 1)")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "seed for randomized sample points");
  app.add_option("-o,--output", g.output, "CSV output file (default stdout)");
  app.add_option("--manifest", g.manifest, "manifest path (default OUTPUT.manifest.json when -o is given)");

  PotentialTableArgs pt;
  auto* s_pt = app.add_subcommand("potential-table", "CSV r,V,dVdr,laplacian of one potential");
  s_pt->add_option("--family", pt.family, "softened | coulomb | yukawa")->capture_default_str();
  s_pt->add_option("--C", pt.C, "softening length")->capture_default_str();
  s_pt->add_option("--alpha", pt.alpha, "Yukawa amplitude")->capture_default_str();
  s_pt->add_option("--c", pt.c, "Yukawa screening rate")->capture_default_str();
  s_pt->add_option("--Z", pt.Z, "charge")->capture_default_str();
  s_pt->add_option("--r", pt.r, "radii")->capture_default_str();

  FtTableArgs ft;
  auto* s_ft = app.add_subcommand("ft-table", "CSV C,xi,re,im,method of the softened-potential transform");
  s_ft->add_option("--C", ft.C, "softening lengths")->capture_default_str();
  s_ft->add_option("--xi", ft.xi, "|xi| values, cycles per Bohr")->capture_default_str();
  s_ft->add_option("--method", ft.method, "quadrature | closed_form | both")->capture_default_str();
  s_ft->add_option("--k", ft.k, "damping rate k <= 0; 0 is the undamped limit")->capture_default_str();
  s_ft->add_option("--tol", ft.tol, "relative quadrature tolerance")->capture_default_str();

  CoulombLimitArgs cl;
  auto* s_cl = app.add_subcommand("coulomb-limit", "CSV C,xi,deviation with deviation = |pi xi^2 FT - 1|");
  s_cl->add_option("--C", cl.C, "strictly decreasing softening lengths (0 allowed last)")->capture_default_str();
  s_cl->add_option("--xi", cl.xi, "|xi|")->capture_default_str();

  EigScanArgs es;
  auto* s_es = app.add_subcommand("eig-scan", "CSV C,ell,theta_im,index,re,im,class of radial bound states");
  s_es->add_option("--C", es.C, "strictly decreasing softening lengths, 0 = Coulomb")->capture_default_str();
  s_es->add_option("--ell", es.ell, "angular momentum")->capture_default_str();
  s_es->add_option("--states", es.states, "levels per C")->capture_default_str();
  s_es->add_option("--step", es.h, "mesh step (default min(C, 1)/20)");
  s_es->add_option("--rmax", es.rmax, "Dirichlet wall")->capture_default_str();

  ComplexScalingArgs cs;
  auto* s_cs = app.add_subcommand("complex-scaling",
                                  "CSV C,ell,theta_im,index,re,im,class of the complex-scaled operator");
  s_cs->add_option("--C", cs.C, "softening length, 0 = Coulomb")->capture_default_str();
  s_cs->add_option("--ell", cs.ell, "angular momentum")->capture_default_str();
  s_cs->add_option("--theta", cs.theta, "Im theta values in (0, pi/2)")->capture_default_str();
  s_cs->add_option("--step", cs.h, "mesh step")->capture_default_str();
  s_cs->add_option("--n", cs.n, "interior nodes (<= 2000)")->capture_default_str();
  s_cs->add_option("--tol-b", cs.tol_b, "bound if |Im| below this")->capture_default_str();
  s_cs->add_option("--tol-c", cs.tol_c, "continuum if |arg + 2 Im theta| below this")->capture_default_str();

  PropagateArgs pr;
  auto* s_pr = app.add_subcommand("propagate", "CSV t,norm,x2,ynorm of a reference propagation run");
  s_pr->add_option("--config", pr.config, "run configuration JSON")->required();

  DilatationArgs dc;
  auto* s_dc = app.add_subcommand(
      "dilatation-check",
      "CSV C,beta,analytic_sector,decay_at_infinity,small_r_bound,far_sup,near_weighted_sup,passed");
  s_dc->add_option("--C", dc.C, "softening lengths")->capture_default_str();
  s_dc->add_option("--beta", dc.beta, "sector half-angles in [0, pi/2)")->capture_default_str();

  SelftestArgs st;
  auto* s_st = app.add_subcommand("selftest", "fast invariant suites, one PASS/FAIL line each");
  s_st->add_option("--inject", st.inject, "deliberate defect to check the suites: laplacian-sign | k1-seam");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    error_json("config", "ParseError", e.what());
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  json parameters = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_name() == "--help" || opt->get_name().empty()) continue;
    if (!opt->results().empty()) parameters[opt->get_name()] = opt->as<std::string>();
  }
  json summary = json::object();
  const auto t0 = std::chrono::steady_clock::now();
  int status = 0;
  try {
    Output out(g.output);
    std::ostream& os = out.stream();
    if (sub == s_pt) potential_table(pt, os, summary);
    else if (sub == s_ft) ft_table(ft, g, os, summary);
    else if (sub == s_cl) coulomb_limit(cl, os, summary);
    else if (sub == s_es) eig_scan(es, g, os, summary);
    else if (sub == s_cs) complex_scaling(cs, g, os, summary);
    else if (sub == s_pr) propagate(pr, os, summary, parameters);
    else if (sub == s_dc) dilatation_check(dc, g, os, summary);
    else if (sub == s_st) status = run_selftest(st, g, os, summary);
    os.flush();
  } catch (const ConfigError& e) {
    error_json("config", "ConfigError", e.what(), e.path());
    return 2;
  } catch (const DomainError& e) {
    error_json("config", "DomainError", e.what());
    return 2;
  } catch (const NumericalFailure& e) {
    error_json("numerical", "NumericalFailure", e.what());
    return 3;
  } catch (const std::exception& e) {
    error_json("numerical", "Error", e.what());
    return 3;
  }

  const std::string manifest = !g.manifest.empty() ? g.manifest
                               : !g.output.empty() ? g.output + ".manifest.json"
                                                   : std::string();
  if (!manifest.empty()) {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json m = {{"experiment", name},
              {"parameters", parameters},
              {"seed", g.seed},
              {"jobs", g.jobs},
              {"output", g.output},
              {"versions", versions()},
              {"summary", summary},
              {"wall_time", wall}};
    std::ofstream mf(manifest);
    if (!mf) {
      error_json("config", "ConfigError", "cannot write manifest", manifest);
      return 2;
    }
    mf << m.dump(2) << '\n';
  }
  return status;
}
