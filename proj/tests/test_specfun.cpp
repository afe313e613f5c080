#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "oracles.hpp"
#include "softcoul/specfun.hpp"

using namespace softcoul;
using namespace softcoul::specfun;

namespace {
double rel(Complex a, Complex b) { return std::abs(a - b) / std::abs(b); }
}  // namespace

TEST(BesselI, ZeroArgument) {
  EXPECT_EQ(bessel_I(0.0, 0.0), Complex(1.0));
  EXPECT_EQ(bessel_I(1.0, 0.0), Complex(0.0));
  EXPECT_THROW(bessel_I(-0.5, 0.0), SingularEvaluation);
}

TEST(BesselI, MatchesIntegralOracle) {
  EXPECT_NEAR(bessel_I(1.0, 1.0).real(), oracle::bessel_I_int(1, 1.0), 1e-14);
  EXPECT_NEAR(bessel_I(1.0, 1.0).real(), 0.5651591, 1e-7);
  for (int n : {0, 1, 2, 3})
    for (double x : {0.1, 2.0, 7.5, 20.0})
      // the oracle's integrand is of size e^x, so its error is absolute on that scale
      EXPECT_LT(std::abs(bessel_I(n, x).real() - oracle::bessel_I_int(n, x)), 1e-14 * std::exp(x)) << n << " " << x;
}

TEST(BesselI, ImaginaryArgumentGivesJ) {
  const Complex v = bessel_I(1.0, Complex(0.0, 1.0));
  EXPECT_NEAR(v.real(), 0.0, 1e-16);
  EXPECT_NEAR(v.imag(), oracle::bessel_J_int(1, 1.0), 1e-14);
  EXPECT_NEAR(v.imag(), 0.4400506, 1e-7);
}

TEST(BesselI, NegativeIntegerOrderSymmetry) {
  for (double x : {0.5, 3.0}) EXPECT_LT(rel(bessel_I(-1.0, x), bessel_I(1.0, x)), 1e-14);
}

TEST(BesselI, NearIntegerOrdersAreContinuous) {
  for (double d : {1e-4, -1e-4})
    EXPECT_LT(rel(bessel_I(1.0 + d, 1.5), bessel_I(1.0, 1.5)), 1e-3);
  EXPECT_LT(rel(bessel_I(-1.0 + 1e-6, 1.5), bessel_I(-1.0, 1.5)), 1e-5);
}

TEST(BesselI, RejectsLargeArguments) {
  EXPECT_THROW(bessel_I(1.0, 100.0), DomainError);
  EXPECT_THROW(bessel_I(1.0, Complex(NAN, 0)), DomainError);
}

TEST(BesselK1, Examples) {
  EXPECT_NEAR(bessel_K1(1.0).real(), 0.6019072, 1e-7);
  EXPECT_NEAR(bessel_K1(10.0).real(), 1.8649e-5, 1e-9);
  EXPECT_LT(rel(bessel_K1(1.0), oracle::k1_integral(1.0)), 1e-12);
  EXPECT_LT(rel(bessel_K1(10.0), oracle::k1_integral(10.0)), 1e-10);
}

TEST(BesselK1, SmallArgumentLaw) {
  EXPECT_LT(std::abs(0.05 * bessel_K1(0.05).real() - 1.0), 0.02);
  for (double w = 1e-4; w <= 1e-2; w *= 1.2) EXPECT_LT(std::abs(w * bessel_K1(w).real() - 1.0), 1e-3) << w;
}

TEST(BesselK1, RealAxisAgainstIntegral) {
  double worst = 0.0;
  for (int i = 0; i <= 80; ++i) {
    const double x = 1e-3 * std::pow(3e4, i / 80.0);
    worst = std::max(worst, rel(bessel_K1(x), oracle::k1_integral(x)));
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(BesselK1, ComplexAgainstIntegral) {
  double worst = 0.0;
  for (double m : {1e-3, 0.1, 1.0, 1.99, 2.01, 5.0, 12.0, 24.9, 25.1, 30.0})
    for (double a = -std::numbers::pi / 3; a <= std::numbers::pi / 3 + 1e-12; a += std::numbers::pi / 24) {
      const Complex z = std::polar(m, a);
      worst = std::max(worst, rel(bessel_K1(z), oracle::k1_integral(z)));
    }
  EXPECT_LT(worst, 1e-6);
}

TEST(BesselK1, RegionSeamsAreContinuous) {
  for (double r : {kK1SeriesRadius, kK1AsymptoticRadius})
    for (double a : {0.0, 0.7, -1.2}) {
      const Complex lo = std::polar(r * (1 - 1e-12), a), hi = std::polar(r * (1 + 1e-12), a);
      EXPECT_LT(rel(bessel_K1(lo), bessel_K1(hi)), 1e-9) << r << " " << a;
    }
}

TEST(BesselK1, ConjugateSymmetry) {
  for (Complex z : {Complex(0.3, 0.4), Complex(3, -2), Complex(-1, 0.5), Complex(20, 15), Complex(-5, -40)})
    EXPECT_LT(rel(bessel_K1(std::conj(z)), std::conj(bessel_K1(z))), 1e-14) << z;
}

TEST(BesselK1, BeyondRightHalfPlane) {
  // Principal branch continues into Re z < 0 away from the cut.
  const Complex z(-0.5, 1.0);
  const Complex w = bessel_K1(z);
  EXPECT_TRUE(std::isfinite(w.real()) && std::isfinite(w.imag()));
  EXPECT_LT(rel(w, detail::k1_series(z)), 1e-14);
}

TEST(BesselK1, BranchErrors) {
  EXPECT_THROW(bessel_K1(Complex(-1.0, 0.0)), BranchCutError);
  EXPECT_THROW(bessel_K1(Complex(0.0, 0.0)), SingularEvaluation);
  EXPECT_THROW(bessel_K1(Complex(INFINITY, 0.0)), DomainError);
}

TEST(LaplaceIntegral, Examples) {
  EXPECT_NEAR(laplace_integral(1.0, 1.0).real(), 0.2797318, 1e-7);
  EXPECT_LT(rel(laplace_integral(1.0, 1.0), oracle::laplace_real(1.0, 1.0)), 1e-10);
  EXPECT_LT(rel(laplace_integral(1.0, 2.0), oracle::laplace_real(1.0, 2.0)), 1e-8);
}

TEST(LaplaceIntegral, SmallALimit) {
  double prev = 1.0;
  for (double a : {1e-2, 1e-4, 1e-6, 1e-8}) {
    const double dev = std::abs(laplace_integral(a, 2.0).real() - 0.5) / 0.5;
    EXPECT_LT(dev, prev);
    prev = dev;
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(LaplaceIntegral, RandomComplexAgainstQuadrature) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ua(0.01, 5.0), ur(0.1, 10.0), ui(-10.0, 10.0);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double a = ua(rng);
    const Complex b(ur(rng), ui(rng));
    // panels short against both the decay and the oscillation of e^{-br}
    const double len = 60.0 / b.real() + 50.0;
    const int panels = 20000;
    const double w = len / panels;
    auto part = [&](bool im) {
      double s = 0.0;
      for (int k = 0; k < panels; ++k)
        s += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            [&](double r) {
              if (r <= 0.0 || a / r > 745.0) return 0.0;
              const Complex v = std::exp(-a / r - b * r);
              return im ? v.imag() : v.real();
            },
            k * w, (k + 1) * w, 0);
      return s;
    };
    const Complex ref(part(false), part(true));
    worst = std::max(worst, rel(laplace_integral(a, b), ref));
  }
  EXPECT_LT(worst, 1e-7);
}

TEST(LaplaceIntegral, DomainErrors) {
  EXPECT_THROW(laplace_integral(1.0, Complex(0.0, 1.0)), DomainError);
  EXPECT_THROW(laplace_integral(1.0, Complex(-1.0, 0.0)), DomainError);
  EXPECT_THROW(laplace_integral(0.0, 1.0), DomainError);
}
