#include <gtest/gtest.h>

#include <chrono>

#include "oracles.hpp"
#include "softcoul/selftest.hpp"

using namespace softcoul;

namespace {

const selftest::SuiteResult& find(const std::vector<selftest::SuiteResult>& rs, const std::string& name) {
  for (const auto& r : rs)
    if (r.name == name) return r;
  throw std::runtime_error("no suite " + name);
}

}  // namespace

TEST(Selftest, CleanRunPasses) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rs = selftest::run();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ASSERT_EQ(rs.size(), 5u);
  for (const auto& r : rs) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
  EXPECT_LT(secs, 60.0);
}

TEST(Selftest, SeedsAllPass) {
  for (std::uint64_t seed : {1u, 42u, 12345u}) {
    const auto rs = selftest::run({}, seed);
    EXPECT_TRUE(find(rs, "potentials").passed) << seed;
  }
}

TEST(Selftest, LaplacianSignFlipIsCaught) {
  selftest::Hooks h;
  h.laplacian = [](const PotentialSpec& s, double r) { return -laplacian(s, r); };
  const auto rs = selftest::run(h);
  EXPECT_FALSE(find(rs, "potentials").passed);
  EXPECT_NE(find(rs, "potentials").detail.find("laplacian"), std::string::npos);
  EXPECT_TRUE(find(rs, "specfun").passed);
}

TEST(Selftest, K1SeamAtTenIsCaught) {
  selftest::Hooks h;
  h.k1 = [](std::complex<double> z) { return specfun::detail::k1_dispatch(z, 10.0); };
  const auto rs = selftest::run(h);
  EXPECT_FALSE(find(rs, "specfun").passed);
  EXPECT_TRUE(find(rs, "potentials").passed);
}

TEST(Selftest, TrapezoidK1MatchesExpSinhOracle) {
  for (std::complex<double> z : {std::complex<double>(1e-3, 0), {1, 0}, {2, 1.5}, {30, -10}})
    EXPECT_LT(std::abs(selftest::k1_integral(z) - oracle::k1_integral(z)) / std::abs(oracle::k1_integral(z)), 1e-12)
        << z;
}

TEST(Selftest, ErrorScalesBoundTheTerms) {
  const auto s = PotentialSpec::softened(1.0);
  for (double r : {0.4, 0.5, 1.0, 3.0}) {
    EXPECT_GE(selftest::laplacian_scale(s, r), std::abs(laplacian(s, r)));
    const Vec3 x{r, 0, 0};
    EXPECT_GE(selftest::gradient_scale(s, x, 0) * (1 + 1e-15), std::abs(grad_component(s, x, Axis::x)));
  }
  // at the roots the scale stays positive
  EXPECT_GT(selftest::laplacian_scale(s, 0.5), 0.0);
  EXPECT_GT(selftest::gradient_scale(s, {1, 0, 0}, 0), 0.0);
}
