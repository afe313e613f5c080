#pragma once

// Radial Fourier transforms in three dimensions, convention
//
//   F^(xi) = int_{R^3} F(|x|) e^{-2 pi i x.xi} dx = (2/|xi|) int_0^inf sin(2 pi r |xi|) r F(r) dr.
//
// Two independent routes are provided for the softened potential: oscillatory
// quadrature of the defining integral, and the closed form through K_1.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <utility>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "softcoul/error.hpp"
#include "softcoul/potentials.hpp"
#include "softcoul/specfun.hpp"

namespace softcoul::fourier {

using Complex = std::complex<double>;

enum class Method { Quadrature, ClosedForm };

inline std::string to_string(Method m) {
  return m == Method::Quadrature ? "quadrature" : "closed_form";
}

struct FTSample {
  double C = 0.0;
  double xi = 0.0;    // |xi| in cycles per Bohr
  Complex value{};    // transform of a real radial profile: imaginary part 0
  Method method = Method::ClosedForm;
};

/// Exponential damping e^{k r}, k < 0, that makes the softened profile integrable.
struct Regularizer {
  double k = -1.0;

  explicit Regularizer(double rate) : k(rate) {
    if (!(k < 0.0) || !std::isfinite(k)) throw DomainError("regularizer: k must be negative");
  }
};

// Shift off the branch cut used for the undamped (k -> 0) closed form.
inline constexpr double kBranchShift = 1e-12;
// e^{-C/r} is exactly 0 below r = C / kInteriorCutoff in quadrature integrands.
inline constexpr double kInteriorCutoff = 700.0;

namespace detail {

struct NeumaierSum {
  double sum = 0.0, comp = 0.0;
  void add(double v) {
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

/// K-fold repeated averaging of the tail partial sums (Euler transform for
/// alternating series). Returns the best estimate and its error indicator.
inline std::pair<double, double> euler_accelerate(const std::vector<double>& partial,
                                                  int max_levels) {
  const int levels = std::min<int>(max_levels, static_cast<int>(partial.size()) - 1);
  std::vector<double> row(partial.end() - (levels + 1), partial.end());
  double best = row.back(), best_err = std::numeric_limits<double>::infinity();
  double prev = row.back();
  for (int lvl = 1; lvl <= levels; ++lvl) {
    for (std::size_t i = 0; i + 1 < row.size(); ++i) row[i] = 0.5 * (row[i] + row[i + 1]);
    row.pop_back();
    const double cur = row.back();
    const double err = std::abs(cur - prev);
    if (err < best_err) {
      best_err = err;
      best = cur;
    }
    prev = cur;
  }
  return {best, best_err};
}

}  // namespace detail

/// (2/xi) int_0^inf sin(2 pi r xi) r f(r) dr by half-period panels.
///
/// Each panel is integrated with adaptive Gauss-Kronrod in a panel-local phase
/// variable, so the sine never sees a large argument. If the panel terms have
/// not decayed by r_max the alternating tail is summed by repeated averaging.
/// `tol` is relative to the result.
template <class F>
double radial_ft_quadrature(F&& f, double xi, double r_max, double tol) {
  if (!(xi > 0.0) || !std::isfinite(xi)) throw DomainError("radial_ft_quadrature: xi must be > 0");
  if (!(r_max > 0.0) || !(tol > 0.0)) throw DomainError("radial_ft_quadrature: bad r_max/tol");
  // below a few ulps no stopping test can be trusted
  if (tol < 8.0 * std::numeric_limits<double>::epsilon())
    throw NonConvergence("radial_ft_quadrature: tolerance below attainable double precision");
  using boost::math::quadrature::gauss_kronrod;

  const double half = 0.5 / xi;
  const double w = 2.0 * std::numbers::pi * xi;
  const long panels = std::max<long>(8, static_cast<long>(std::ceil(r_max / half)));
  if (panels > 4'000'000) throw DomainError("radial_ft_quadrature: r_max * xi too large");

  std::vector<double> partial;
  partial.reserve(static_cast<std::size_t>(panels));
  detail::NeumaierSum acc;
  double last_abs = 0.0, prev_abs = 0.0;
  for (long n = 0; n < panels; ++n) {
    const double r0 = n * half;
    auto integrand = [&](double u) {
      const double r = r0 + u;
      return r == 0.0 ? 0.0 : std::sin(w * u) * r * f(r);
    };
    const double a = gauss_kronrod<double, 31>::integrate(integrand, 0.0, half, 12, 1e-13);
    acc.add((n % 2 == 0) ? a : -a);
    partial.push_back(acc.value());
    prev_abs = last_abs;
    last_abs = std::abs(a);
  }
  const double direct = partial.back();
  const double scale = 2.0 / xi;
  // Damped integrands: the last panels no longer contribute.
  if (last_abs + prev_abs <= 0.1 * tol * std::abs(direct)) return scale * direct;

  const auto [est, err] = detail::euler_accelerate(partial, 40);
  if (!(err <= tol * std::abs(est)))
    throw NonConvergence("radial_ft_quadrature: tail acceleration stalled at relative error " +
                         std::to_string(err / std::abs(est)));
  return scale * est;
}

/// r -> e^{-C/r} e^{k r} / r, the (optionally damped) softened profile used as
/// a quadrature integrand; k = 0 is undamped.
inline auto softened_profile(double C, double k = 0.0) {
  return [C, k](double r) {
    if (r < C / kInteriorCutoff) return 0.0;
    return std::exp(-C / r + k * r) / r;
  };
}

struct RegularizedFT {
  double value = 0.0;  // (2/xi) Im L
  Complex laplace{};   // L = int_0^inf exp(-C/r - b r) dr
  Complex b{};         // -(k + 2 pi i xi)
};

/// Closed-form transform of e^{-C/r} e^{k r} / r:
///   (2/xi) Im[ 2 sqrt(C/b) K_1(2 sqrt(C b)) ],  b = -(k + 2 pi i xi).
inline RegularizedFT ft_regularized(double C, const Regularizer& reg, double xi) {
  if (!(C > 0.0)) throw DomainError("ft_regularized: C must be positive");
  if (!(xi > 0.0)) throw DomainError("ft_regularized: xi must be positive");
  RegularizedFT out;
  out.b = Complex(-reg.k, -2.0 * std::numbers::pi * xi);
  out.laplace = specfun::laplace_integral(C, out.b);
  out.value = (2.0 / xi) * out.laplace.imag();
  return out;
}

/// Transform of the undamped softened potential as the k -> 0- limit of
/// ft_regularized, evaluated at b = kBranchShift - 2 pi i xi.
inline double ft_VP(double C, double xi) {
  if (!(C > 0.0)) throw DomainError("ft_VP: C must be positive");
  if (!(xi > 0.0)) throw DomainError("ft_VP: xi must be positive");
  const Complex b(kBranchShift, -2.0 * std::numbers::pi * xi);
  return (2.0 / xi) * specfun::laplace_integral(C, b).imag();
}

/// Transform of the Coulomb potential 1/r under the same convention.
inline double ft_coulomb(double xi) { return 1.0 / (std::numbers::pi * xi * xi); }

/// Quadrature counterpart of ft_regularized / ft_VP (k = 0).
inline double ft_quadrature(double C, double xi, double k, double tol = 1e-10) {
  if (!(C > 0.0) || !(k <= 0.0)) throw DomainError("ft_quadrature: need C > 0, k <= 0");
  // Damping e^{kr} below 1e-18 past r = 42/|k|; the undamped tail is accelerated.
  double r_max = 200.0 / xi + 20.0 * C;
  if (k < 0.0) r_max = std::min(r_max, 42.0 / -k + 20.0 * C);
  return radial_ft_quadrature(softened_profile(C, k), xi, r_max, tol);
}

inline FTSample ft_sample(double C, double xi, Method method, double k = 0.0) {
  FTSample s;
  s.C = C;
  s.xi = xi;
  s.method = method;
  if (method == Method::Quadrature) {
    s.value = ft_quadrature(C, xi, k);
  } else {
    s.value = k < 0.0 ? ft_regularized(C, Regularizer(k), xi).value : ft_VP(C, xi);
  }
  return s;
}

struct LimitPoint {
  double C;
  double deviation;  // | pi xi^2 ft_VP(C, xi) - 1 |
};

/// Distance of the softened transform from the Coulomb transform 1/(pi xi^2)
/// along a decreasing sequence of C. C = 0 is the Coulomb potential itself.
inline std::vector<LimitPoint> coulomb_limit_curve(double xi, const std::vector<double>& C_list) {
  if (!(xi > 0.0)) throw DomainError("coulomb_limit_curve: xi must be positive");
  std::vector<LimitPoint> out;
  out.reserve(C_list.size());
  for (std::size_t i = 0; i < C_list.size(); ++i) {
    const double C = C_list[i];
    if (C < 0.0 || (i > 0 && !(C < C_list[i - 1])))
      throw DomainError("coulomb_limit_curve: C values must be nonnegative, strictly decreasing");
    const double dev =
        C == 0.0 ? 0.0 : std::abs(std::numbers::pi * xi * xi * ft_VP(C, xi) - 1.0);
    out.push_back({C, dev});
  }
  return out;
}

}  // namespace softcoul::fourier
