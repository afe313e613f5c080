#pragma once

// Fast invariant suites for every module, run by `softcoul selftest`.
// The hooks let a caller swap in a modified formula and watch a suite fail.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "softcoul/error.hpp"
#include "softcoul/fourier.hpp"
#include "softcoul/potentials.hpp"
#include "softcoul/propagator.hpp"
#include "softcoul/specfun.hpp"
#include "softcoul/spectral.hpp"

namespace softcoul::selftest {

using Complex = std::complex<double>;

struct Hooks {
  std::function<double(const PotentialSpec&, double)> laplacian = [](const PotentialSpec& s, double r) {
    return softcoul::laplacian(s, r);
  };
  std::function<Complex(Complex)> k1 = [](Complex z) { return specfun::bessel_K1(z); };
};

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// K_1(z) = int_0^inf exp(-z cosh t) cosh t dt, Re z > 0, by the trapezoid
/// rule; the integrand is entire and decays doubly exponentially, so the rule
/// converges geometrically.
inline Complex k1_integral(Complex z, double step = 0.01) {
  Complex sum = 0.5 * std::exp(-z);
  for (int i = 1;; ++i) {
    const double t = i * step, c = std::cosh(t);
    if (z.real() * c > 745.0) break;
    sum += std::exp(-z * c) * c;
  }
  return sum * step;
}

namespace detail {

struct Worst {
  double err = 0.0;
  std::string where;
  void update(double e, const std::string& w) {
    if (!(e <= err)) {  // NaN counts as worst
      err = e;
      where = w;
    }
  }
};

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

inline double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace detail

// Error scales for the softened potential: the sum of the magnitudes of the
// terms in each formula. The gradient vanishes at r = C and the Laplacian at
// r = C/2, where a plain relative error is meaningless.
inline double gradient_scale(const PotentialSpec& s, const Vec3& x, int axis) {
  const double r = softcoul::detail::norm(x);
  return s.Z * std::exp(-s.C / r) * (s.C + r) / (r * r * r) * std::abs(x[axis]) / r;
}
inline double laplacian_scale(const PotentialSpec& s, double r) {
  return s.Z * std::exp(-s.C / r) * s.C * (s.C + 2.0 * r) / std::pow(r, 5);
}

namespace detail {

inline SuiteResult potentials_suite(const Hooks& hooks, std::mt19937_64& rng) {
  SuiteResult res;
  res.name = "potentials";
  std::uniform_real_distribution<double> radius(0.3, 10.0);
  Worst grad, lap, p1;
  for (double C : {0.5, 1.0, 2.0}) {
    const auto spec = PotentialSpec::softened(C);
    std::vector<double> rs;
    for (int i = 0; i < 12; ++i) rs.push_back(radius(rng));
    for (double r : rs) {
      // Off-axis point so all three components are exercised.
      const Vec3 x{r * 0.6, r * 0.48, r * 0.64};
      const double step = 1e-5;
      for (int a = 0; a < 3; ++a) {
        Vec3 xp = x, xm = x;
        xp[a] += step;
        xm[a] -= step;
        const double fd = (eval(spec, softcoul::detail::norm(xp)) - eval(spec, softcoul::detail::norm(xm))) / (2 * step);
        grad.update(std::abs(grad_component(spec, x, Axis(a)) - fd) / gradient_scale(spec, x, a),
                    "C=" + fmt(C) + " r=" + fmt(r));
      }
      const double hl = 1e-3;
      // Trace of the 7-point stencil around an off-axis point.
      double tr = -6.0 * eval(spec, r);
      for (int a = 0; a < 3; ++a) {
        Vec3 xp = x, xm = x;
        xp[a] += hl;
        xm[a] -= hl;
        tr += eval(spec, softcoul::detail::norm(xp)) + eval(spec, softcoul::detail::norm(xm));
      }
      tr /= hl * hl;
      lap.update(std::abs(hooks.laplacian(spec, r) - tr) / laplacian_scale(spec, r),
                 "C=" + fmt(C) + " r=" + fmt(r));
    }
    p1.update(radial_momentum_residual(spec, rs), "C=" + fmt(C));
  }
  res.passed = grad.err < 1e-6 && lap.err < 1e-5 && p1.err < 1e-12;
  res.detail = "gradient " + fmt(grad.err) + " (" + grad.where + "), laplacian " + fmt(lap.err) + " (" +
               lap.where + "), P1 residual " + fmt(p1.err);
  return res;
}

inline SuiteResult specfun_suite(const Hooks& hooks) {
  SuiteResult res;
  res.name = "specfun";
  Worst real, cplx;
  std::vector<double> xs;
  for (int i = 0; i <= 40; ++i) xs.push_back(1e-3 * std::pow(3e4, i / 40.0));
  for (double x : {1.9, 2.1, 4.0, 7.5, 9.9, 10.0, 24.9, 25.1}) xs.push_back(x);
  for (double x : xs) {
    const Complex z(x, 0.0);
    real.update(std::abs(hooks.k1(z) - k1_integral(z)) / std::abs(k1_integral(z)), "x=" + fmt(x));
  }
  for (double m : {0.01, 0.5, 1.9, 3.0, 8.0, 15.0, 28.0})
    for (double a : {-std::numbers::pi / 3, -0.5, 0.3, std::numbers::pi / 3}) {
      const Complex z = std::polar(m, a);
      const Complex ref = k1_integral(z);
      cplx.update(std::abs(hooks.k1(z) - ref) / std::abs(ref), "|z|=" + fmt(m) + " arg=" + fmt(a));
    }
  res.passed = real.err < 1e-8 && cplx.err < 1e-6;
  res.detail = "real " + fmt(real.err) + " (" + real.where + "), complex " + fmt(cplx.err) + " (" +
               cplx.where + ")";
  return res;
}

inline SuiteResult fourier_suite() {
  SuiteResult res;
  res.name = "fourier";
  Worst cross;
  for (double C : {0.5, 1.0})
    for (double xi : {0.5, 5.0}) {
      const double cf = fourier::ft_regularized(C, fourier::Regularizer(-1.0), xi).value;
      const double q = fourier::ft_quadrature(C, xi, -1.0);
      cross.update(rel(cf, q), "C=" + fmt(C) + " xi=" + fmt(xi));
    }
  const double yuk = fourier::radial_ft_quadrature([](double r) { return std::exp(-r) / r; }, 1.0, 60.0, 1e-10);
  const double yuk_exact = 4 * std::numbers::pi / (1 + 4 * std::numbers::pi * std::numbers::pi);
  const double gauss =
      fourier::radial_ft_quadrature([](double r) { return std::exp(-std::numbers::pi * r * r); }, 1.0, 8.0, 1e-12);
  const double g_err = std::abs(gauss - std::exp(-std::numbers::pi));
  res.passed = cross.err < 1e-6 && rel(yuk, yuk_exact) < 1e-8 && g_err < 1e-8;
  res.detail = "closed form vs quadrature " + fmt(cross.err) + " (" + cross.where + "), Yukawa " +
               fmt(rel(yuk, yuk_exact)) + ", Gaussian " + fmt(g_err);
  return res;
}

inline SuiteResult spectral_suite() {
  SuiteResult res;
  res.name = "spectral";
  using namespace spectral;
  const auto grid = RadialGrid::from_extent(0.02, 40.0);
  const auto e = bound_states(build_radial(PotentialSpec::coulomb(), 0, grid), 2);
  const double e_soft = bound_states(build_radial(PotentialSpec::softened(0.1), 0, grid), 1).front();
  const auto reps = theta_scan(PotentialSpec::coulomb(), 0, RadialGrid(0.1, 200), {0.2, 0.3});
  const auto b0 = reps[0].bound(), b1 = reps[1].bound();
  const double drift = b0.empty() || b1.empty() ? 1.0 : std::abs(b0[0] - b1[0]);
  const auto cond = check_dilatation_conditions(PotentialSpec::softened(1.0), std::numbers::pi / 4);
  res.passed = std::abs(e[0] + 0.25) < 1e-3 && std::abs(e[1] + 0.0625) < 1e-3 && e_soft > -0.25 &&
               e_soft > e[0] && drift < 1e-4 && cond.passed();
  res.detail = "E1 " + fmt(e[0]) + ", E2 " + fmt(e[1]) + ", E1(C=0.1) " + fmt(e_soft) + ", theta drift " +
               fmt(drift) + ", dilatation " + (cond.passed() ? "ok" : "failed");
  return res;
}

inline SuiteResult propagator_suite() {
  SuiteResult res;
  res.name = "propagator";
  using namespace propagator;
  const auto g = Grid3D::cube(40, 20.0);
  Propagator prop(g);
  auto psi = make_groundstate(g, GroundStateKind::HydrogenTrue);
  PropagationConfig cfg;
  cfg.grid = g;
  cfg.dt = 0.01;
  cfg.C = 1.0;
  auto p = reference_propagate(prop, psi, 0.0, 1.0, cfg);
  const double norm_err = std::abs(p.norm() - 1.0);
  auto back = reference_propagate(prop, p, 1.0, 0.0, cfg);
  const double rev = distance(back, psi);
  PropagationConfig off = cfg;
  off.C.reset();
  off.dyson_order = 2;
  const auto d_off = dyson_propagate(prop, psi, 0.0, 0.5, off);
  PropagationConfig j0 = cfg;
  j0.dyson_order = 0;
  const auto d_j0 = dyson_propagate(prop, psi, 0.0, 0.5, j0);
  const double same = distance(d_off.psi, d_j0.psi);
  res.passed = norm_err < 1e-12 && rev < 1e-8 && same == 0.0;
  res.detail = "norm " + fmt(norm_err) + ", time reversal " + fmt(rev) + ", V_P off vs J=0 " + fmt(same);
  return res;
}

}  // namespace detail

inline std::vector<SuiteResult> run(const Hooks& hooks = {}, std::uint64_t seed = 0) {
  std::mt19937_64 rng(seed);
  std::vector<SuiteResult> out;
  auto timed = [&](auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    SuiteResult r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  };
  out.push_back(timed([&] { return detail::potentials_suite(hooks, rng); }));
  out.back().name = "potentials";
  out.push_back(timed([&] { return detail::specfun_suite(hooks); }));
  out.back().name = "specfun";
  out.push_back(timed([] { return detail::fourier_suite(); }));
  out.back().name = "fourier";
  out.push_back(timed([] { return detail::spectral_suite(); }));
  out.back().name = "spectral";
  out.push_back(timed([] { return detail::propagator_suite(); }));
  out.back().name = "propagator";
  return out;
}

}  // namespace softcoul::selftest
