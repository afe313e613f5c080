#pragma once

// Modified Bessel functions of complex argument and the Laplace-type integral
//
//   int_0^inf exp(-a/r - b r) dr = 2 sqrt(a/b) K_1(2 sqrt(a b)),   a > 0, Re b > 0,
//
// which carries the closed-form Fourier transform of the softened potential.

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>

#include "softcoul/error.hpp"

namespace softcoul::specfun {

using Complex = std::complex<double>;

// |z| at or below which K_1 uses the logarithmic power series.
inline constexpr double kK1SeriesRadius = 2.0;
// |z| at or above which K_1 uses the Hankel asymptotic expansion. The optimal
// truncation error there is ~exp(-2|z|), below double precision.
inline constexpr double kK1AsymptoticRadius = 25.0;
// Largest |z| accepted by the I_nu power series; beyond it the alternating
// terms for imaginary z lose more than ~1e-5 to cancellation.
inline constexpr double kISeriesRadius = 40.0;
inline constexpr int kMaxSeriesTerms = 200;

namespace detail {

inline void require_finite(const Complex& v, const char* what) {
  if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
    throw NumericalFailure(std::string(what) + ": non-finite result");
}

// 1/Gamma(x), exactly 0 at the poles x = 0, -1, -2, ...
inline double rgamma(double x) {
  if (x <= 0.0 && x == std::nearbyint(x)) return 0.0;
  return 1.0 / std::tgamma(x);
}

inline double digamma_int(int n) {  // psi(n) for n >= 1
  double s = -std::numbers::egamma_v<double>;
  for (int k = 1; k < n; ++k) s += 1.0 / k;
  return s;
}

inline void require_principal(const Complex& z, const char* what) {
  if (z == Complex{}) throw SingularEvaluation(std::string(what) + ": pole at z = 0");
  if (z.imag() == 0.0 && z.real() < 0.0)
    throw BranchCutError(std::string(what) + ": z on the negative real axis");
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
    throw DomainError(std::string(what) + ": non-finite argument");
}

/// K_1 by the ascending series with the logarithmic term (A&S 9.6.11, n = 1):
///   K_1(z) = 1/z + ln(z/2) I_1(z)
///            - (z/4) sum_k [psi(k+1) + psi(k+2)] (z^2/4)^k / (k! (k+1)!)
inline Complex k1_series(Complex z) {
  const Complex half = 0.5 * z;
  const Complex q = half * half;
  Complex i1{}, tail{};
  Complex term = half;  // (z/2)^{2k+1} / (k! (k+1)!)
  double psi_k1 = digamma_int(1), psi_k2 = digamma_int(2);
  for (int k = 0; k < kMaxSeriesTerms; ++k) {
    i1 += term;
    const Complex t2 = (psi_k1 + psi_k2) * term;
    tail += t2;
    if (k > 2 && std::abs(term) <= 1e-17 * std::abs(i1) &&
        std::abs(t2) <= 1e-17 * std::abs(tail))
      return 1.0 / z + std::log(half) * i1 - 0.5 * tail;
    term *= q / (double(k + 1) * double(k + 2));
    psi_k1 += 1.0 / (k + 1);
    psi_k2 += 1.0 / (k + 2);
  }
  throw NonConvergence("bessel_K1: power series did not stagnate");
}

/// K_1 from Steed's continued fraction CF2 (Temme's form, order mu = 0),
/// which yields K_0 and K_1 together; convergent for |z| >~ 1 off the cut.
inline Complex k1_cf2(Complex z) {
  constexpr int kMaxIt = 20000;
  const double a1 = 0.25;  // 1/4 - mu^2
  Complex b = 2.0 * (1.0 + z);
  Complex d = 1.0 / b;
  Complex h = d, delh = d;
  Complex q1{0.0}, q2{1.0};
  Complex q{a1}, c{a1};
  double a = -a1;
  Complex s = 1.0 + q * delh;
  int i = 1;
  for (; i < kMaxIt; ++i) {
    a -= 2 * i;
    c = -a * c / (i + 1.0);
    const Complex qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const Complex dels = q * delh;
    s += dels;
    if (std::abs(dels) < 1e-17 * std::abs(s) && std::abs(delh) < 1e-17 * std::abs(h)) break;
  }
  if (i == kMaxIt) throw NonConvergence("bessel_K1: continued fraction did not converge");
  h *= a1;
  const Complex k0 = std::sqrt(std::numbers::pi / (2.0 * z)) * std::exp(-z) / s;
  return k0 * (z + 0.5 - h) / z;
}

/// Hankel expansion e^{-z} sqrt(pi/2z) (1 + 3/(8z) - 15/(128 z^2) + ...),
/// summed up to its smallest term.
inline Complex k1_asymptotic(Complex z) {
  const double mu = 4.0;  // 4 nu^2
  Complex term{1.0}, sum{1.0};
  double prev = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= (mu - odd * odd) / (k * 8.0 * z);
    const double mag = std::abs(term);
    if (mag > prev) break;
    sum += term;
    prev = mag;
    if (mag < 1e-17 * std::abs(sum)) break;
  }
  return std::sqrt(std::numbers::pi / (2.0 * z)) * std::exp(-z) * sum;
}

/// Region dispatch with a caller-chosen series/continued-fraction seam.
inline Complex k1_dispatch(Complex z, double series_radius) {
  const double r = std::abs(z);
  Complex v;
  if (r <= series_radius)
    v = k1_series(z);
  else if (r >= kK1AsymptoticRadius)
    v = k1_asymptotic(z);
  else
    v = k1_cf2(z);
  require_finite(v, "bessel_K1");
  return v;
}

}  // namespace detail

/// Modified Bessel function of the first kind,
///   I_nu(z) = sum_k (z/2)^{nu+2k} / (k! Gamma(nu+1+k)),
/// summed until the terms stagnate at machine precision. Principal branch of
/// (z/2)^nu; negative integer orders give I_{-n} = I_n through the vanishing
/// 1/Gamma factors.
inline Complex bessel_I(double nu, Complex z) {
  if (!std::isfinite(nu)) throw DomainError("bessel_I: non-finite order");
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
    throw DomainError("bessel_I: non-finite argument");
  if (std::abs(z) > kISeriesRadius)
    throw DomainError("bessel_I: |z| beyond the series validity radius");
  const bool integer_order = nu == std::nearbyint(nu);
  if (z == Complex{}) {
    if (nu == 0.0) return 1.0;
    if (nu > 0.0 || integer_order) return 0.0;
    throw SingularEvaluation("bessel_I: z = 0 with negative non-integer order");
  }
  const Complex half = 0.5 * z;
  const Complex q = half * half;
  // For integer nu the exponent nu + 2k is an integer, so use integer powers
  // and stay off the branch cut of log.
  Complex power = integer_order ? std::pow(half, static_cast<int>(nu)) : std::pow(half, nu);
  Complex sum{};
  int small_run = 0;
  for (int k = 0; k < kMaxSeriesTerms; ++k) {
    const Complex term = power * detail::rgamma(nu + 1.0 + k);
    sum += term;
    if (k > std::abs(z) && std::abs(term) <= 1e-17 * std::abs(sum)) {
      if (++small_run >= 2) {
        detail::require_finite(sum, "bessel_I");
        return sum;
      }
    } else {
      small_run = 0;
    }
    power *= q / double(k + 1);
  }
  throw NonConvergence("bessel_I: series did not stagnate within 200 terms");
}

/// Modified Bessel function of the second kind, order 1, principal branch.
/// Series for |z| <= 2, continued fraction in between, Hankel asymptotics
/// for |z| >= 25. Rejects z = 0 and the negative real axis.
inline Complex bessel_K1(Complex z) {
  detail::require_principal(z, "bessel_K1");
  return detail::k1_dispatch(z, kK1SeriesRadius);
}

/// int_0^inf exp(-a/r - b r) dr = 2 sqrt(a/b) K_1(2 sqrt(a b)),  a > 0, Re b > 0.
inline Complex laplace_integral(double a, Complex b) {
  if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("laplace_integral: a must be positive");
  if (!(b.real() > 0.0) || !std::isfinite(b.imag()))
    throw DomainError("laplace_integral: requires Re(b) > 0");
  const double sa = std::sqrt(a);
  const Complex sb = std::sqrt(b);
  const Complex v = 2.0 * (sa / sb) * bessel_K1(2.0 * sa * sb);
  detail::require_finite(v, "laplace_integral");
  return v;
}

}  // namespace softcoul::specfun
