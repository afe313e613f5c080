#pragma once

// Reference values computed independently of the library code paths.

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace oracle {

using Complex = std::complex<double>;

/// K_1(z) = int_0^inf exp(-z cosh t) cosh t dt for Re z > 0, split into real
/// and imaginary parts, each by exp-sinh quadrature.
inline Complex k1_integral(Complex z) {
  boost::math::quadrature::exp_sinh<double> q;
  auto part = [&](bool imag) {
    return q.integrate(
        [&](double t) {
          const double c = std::cosh(t);
          if (z.real() * c > 745.0) return 0.0;
          const Complex v = std::exp(-z * c) * c;
          return imag ? v.imag() : v.real();
        },
        1e-14);
  };
  return {part(false), part(true)};
}

/// I_n(x) = (1/pi) int_0^pi e^{x cos t} cos(n t) dt.
inline double bessel_I_int(int n, double x) {
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 61>::integrate(
             [&](double t) { return std::exp(x * std::cos(t)) * std::cos(n * t); }, 0.0,
             std::numbers::pi, 10, 1e-15) /
         std::numbers::pi;
}

/// J_n(x) = (1/pi) int_0^pi cos(n t - x sin t) dt.
inline double bessel_J_int(int n, double x) {
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 61>::integrate(
             [&](double t) { return std::cos(n * t - x * std::sin(t)); }, 0.0, std::numbers::pi,
             10, 1e-15) /
         std::numbers::pi;
}

/// int_0^inf exp(-a/r - b r) dr for real a, b > 0.
inline double laplace_real(double a, double b) {
  boost::math::quadrature::exp_sinh<double> q;
  return q.integrate(
      [&](double r) {
        if (r <= 0.0 || a / r > 745.0) return 0.0;
        return std::exp(-a / r - b * r);
      },
      1e-14);
}

/// Central difference of f at x.
inline double central(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// k-th derivative by the central difference stencil of order 2 in h.
inline double central_k(const std::function<double(double)>& f, double x, double h, int k) {
  switch (k) {
    case 1: return (f(x + h) - f(x - h)) / (2 * h);
    case 2: return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h);
    case 3: return (f(x + 2 * h) - 2 * f(x + h) + 2 * f(x - h) - f(x - 2 * h)) / (2 * h * h * h);
    case 4: return (f(x + 2 * h) - 4 * f(x + h) + 6 * f(x) - 4 * f(x - h) + f(x - 2 * h)) / (h * h * h * h);
    default: return NAN;
  }
}

/// Exact k-th r-derivative of e^{-C/r}/r, kept as e^{-C u} P(u) with u = 1/r:
/// d/dr u^m = -m u^{m+1} and d/dr e^{-C u} = C u^2 e^{-C u}.
inline double softened_derivative(double C, double r, int k) {
  std::vector<double> p(2 + 2 * k + 2, 0.0);
  p[1] = 1.0;  // u^1
  for (int it = 0; it < k; ++it) {
    std::vector<double> q(p.size(), 0.0);
    for (std::size_t m = 0; m + 2 < p.size(); ++m) {
      if (p[m] == 0.0) continue;
      q[m + 1] += -double(m) * p[m];
      q[m + 2] += C * p[m];
    }
    p = q;
  }
  const double u = 1.0 / r;
  double s = 0.0, pw = 1.0;
  for (double c : p) {
    s += c * pw;
    pw *= u;
  }
  return s * std::exp(-C * u);
}

}  // namespace oracle
