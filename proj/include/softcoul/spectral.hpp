#pragma once

// Radial Schrodinger operators -u'' + l(l+1)/r^2 u - V(r) u on a uniform mesh
// with Dirichlet ends, their complex-scaled versions, and spectral studies.
//
// Mesh: interior nodes r_j = (j+1) h, j = 0..n-1, with u(0) = u((n+1) h) = 0.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "softcoul/error.hpp"
#include "softcoul/potentials.hpp"

namespace softcoul::spectral {

using Complex = std::complex<double>;

struct RadialGrid {
  double h = 0.01;
  std::size_t n = 0;

  RadialGrid() = default;
  RadialGrid(double step, std::size_t nodes) : h(step), n(nodes) {
    if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("RadialGrid: h must be positive");
    if (n < 3) throw DomainError("RadialGrid: need at least 3 interior nodes");
  }
  /// Mesh with the Dirichlet wall at (approximately) r_max.
  static RadialGrid from_extent(double step, double r_max) {
    if (!(step > 0.0) || !(r_max > step)) throw DomainError("RadialGrid: need 0 < h < r_max");
    const auto nodes = static_cast<std::size_t>(std::llround(r_max / step)) - 1;
    return RadialGrid(step, nodes);
  }

  double r(std::size_t j) const noexcept { return double(j + 1) * h; }
  double r_max() const noexcept { return double(n + 1) * h; }
};

/// Complex-symmetric tridiagonal matrix of the scaled radial Hamiltonian
///   -e^{-2 theta} d^2/dr^2 + e^{-2 theta} l(l+1)/r^2 - V(e^theta r).
struct RadialOperator {
  int ell = 0;
  RadialGrid grid;
  Complex theta{};
  std::vector<Complex> diag;     // n entries
  std::vector<Complex> offdiag;  // n-1 entries (sub = super)

  bool is_real() const noexcept { return theta == Complex{}; }
  std::size_t size() const noexcept { return diag.size(); }

  Eigen::MatrixXcd dense() const {
    const auto n = static_cast<Eigen::Index>(diag.size());
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) m(i, i) = diag[i];
    for (Eigen::Index i = 0; i + 1 < n; ++i) m(i, i + 1) = m(i + 1, i) = offdiag[i];
    return m;
  }
};

inline RadialOperator build_radial(const PotentialSpec& spec, int ell, const RadialGrid& grid,
                                   Complex theta = {}) {
  spec.validate();
  if (ell < 0) throw DomainError("build_radial: ell must be nonnegative");
  if (grid.n < 3 || !(grid.h > 0.0)) throw DomainError("build_radial: bad grid");
  if (!(std::abs(theta.imag()) < std::numbers::pi / 2))
    throw DomainError("build_radial: |Im theta| must stay below pi/2 (analyticity sector)");

  RadialOperator op;
  op.ell = ell;
  op.grid = grid;
  op.theta = theta;
  op.diag.resize(grid.n);
  op.offdiag.resize(grid.n - 1);

  const bool real = theta == Complex{};
  const Complex kin = real ? Complex(1.0) : std::exp(-2.0 * theta);
  const Complex scale = real ? Complex(1.0) : std::exp(theta);
  const double h2 = grid.h * grid.h;
  const double centrifugal = double(ell) * (ell + 1);
  for (std::size_t j = 0; j < grid.n; ++j) {
    const double r = grid.r(j);
    Complex v;
    if (real)
      v = eval(spec, r);
    else if (spec.family == Family::Coulomb)
      v = spec.Z * std::exp(-theta) / r;
    else
      v = eval(spec, scale * r);
    op.diag[j] = kin * (2.0 / h2 + centrifugal / (r * r)) - v;
  }
  std::fill(op.offdiag.begin(), op.offdiag.end(), -kin / h2);
  return op;
}

namespace detail {

/// Number of eigenvalues of the symmetric tridiagonal (d, e) strictly below x.
inline std::size_t sturm_count(const std::vector<double>& d, const std::vector<double>& e2,
                               double x) {
  constexpr double tiny = 1e-300;
  std::size_t count = 0;
  double q = d[0] - x;
  if (q < 0.0) ++count;
  for (std::size_t i = 1; i < d.size(); ++i) {
    if (q == 0.0) q = tiny;
    q = d[i] - x - e2[i - 1] / q;
    if (q < 0.0) ++count;
  }
  return count;
}

}  // namespace detail

/// The `count` lowest eigenvalues of an unscaled operator, ascending, by
/// bisection on Sturm sequences.
inline std::vector<double> bound_states(const RadialOperator& op, std::size_t count) {
  if (!op.is_real()) throw DomainError("bound_states: operator is complex-scaled");
  const std::size_t n = op.size();
  if (count == 0 || count > n) throw DomainError("bound_states: count outside [1, n]");

  std::vector<double> d(n), e2(n - 1);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = op.diag[i].real();
    double radius = 0.0;
    if (i > 0) radius += std::abs(op.offdiag[i - 1].real());
    if (i + 1 < n) radius += std::abs(op.offdiag[i].real());
    lo = std::min(lo, d[i] - radius);
    hi = std::max(hi, d[i] + radius);
  }
  for (std::size_t i = 0; i + 1 < n; ++i) e2[i] = op.offdiag[i].real() * op.offdiag[i].real();

  std::vector<double> out(count);
  double left = lo;
  for (std::size_t k = 0; k < count; ++k) {
    double a = left, b = hi;
    // invariant: count(a) <= k < count(b)
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (a + b);
      if (mid == a || mid == b) break;
      if (detail::sturm_count(d, e2, mid) > k)
        b = mid;
      else
        a = mid;
      if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b)))
        break;
    }
    out[k] = 0.5 * (a + b);
    left = a;
  }
  return out;
}

enum class SpectralClass { Bound, RotatedContinuum, Unresolved };

inline std::string to_string(SpectralClass c) {
  switch (c) {
    case SpectralClass::Bound: return "bound";
    case SpectralClass::RotatedContinuum: return "rotated_continuum";
    default: return "unresolved";
  }
}

struct ClassifyOptions {
  double tol_b = 1e-3;      // |Im lambda| below this and Re below threshold: bound
  double tol_c = 0.05;      // radians, continuum ray tolerance
  double threshold = 0.0;   // continuum threshold Sigma_min
};

struct SpectrumReport {
  Complex theta{};
  std::vector<Complex> eigenvalues;  // ascending real part
  std::vector<SpectralClass> classification;
  std::vector<double> stability;     // per bound eigenvalue, filled by theta scans

  std::vector<Complex> bound() const {
    std::vector<Complex> out;
    for (std::size_t i = 0; i < eigenvalues.size(); ++i)
      if (classification[i] == SpectralClass::Bound) out.push_back(eigenvalues[i]);
    return out;
  }
};

inline SpectralClass classify(Complex lambda, Complex theta, const ClassifyOptions& opt) {
  if (std::abs(lambda.imag()) < opt.tol_b && lambda.real() < opt.threshold)
    return SpectralClass::Bound;
  const Complex shifted = lambda - opt.threshold;
  if (shifted != Complex{} && std::abs(std::arg(shifted) + 2.0 * theta.imag()) < opt.tol_c)
    return SpectralClass::RotatedContinuum;
  return SpectralClass::Unresolved;
}

inline constexpr std::size_t kMaxDenseSize = 2000;

/// Eigenvalues of a complex-scaled operator, classified against the rotated
/// continuum. count = 0 keeps every eigenvalue; otherwise the `count` with
/// smallest real part.
inline SpectrumReport complex_spectrum(const RadialOperator& op, std::size_t count = 0,
                                       const ClassifyOptions& opt = {}) {
  const double phi = op.theta.imag();
  if (!(phi > 0.0 && phi < std::numbers::pi / 2))
    throw DomainError("complex_spectrum: Im theta must lie in (0, pi/2)");
  if (op.size() > kMaxDenseSize)
    throw DomainError("complex_spectrum: dense solver limited to n <= 2000");

  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(op.dense(), false);
  if (solver.info() != Eigen::Success) throw NonConvergence("complex_spectrum: QR iteration failed");

  SpectrumReport rep;
  rep.theta = op.theta;
  const auto& ev = solver.eigenvalues();
  rep.eigenvalues.assign(ev.data(), ev.data() + ev.size());
  std::sort(rep.eigenvalues.begin(), rep.eigenvalues.end(), [](Complex a, Complex b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  if (count > 0 && count < rep.eigenvalues.size()) rep.eigenvalues.resize(count);
  rep.classification.reserve(rep.eigenvalues.size());
  for (const Complex& l : rep.eigenvalues) rep.classification.push_back(classify(l, op.theta, opt));
  return rep;
}

/// Complex spectra along a list of theta values. stability[i] of every report
/// is the drift |lambda_i(theta) - lambda_i(theta_0)| of its i-th bound
/// eigenvalue against the first report (NaN when the first has fewer).
inline std::vector<SpectrumReport> theta_scan(const PotentialSpec& spec, int ell,
                                              const RadialGrid& grid,
                                              const std::vector<double>& theta_im,
                                              const ClassifyOptions& opt = {}) {
  std::vector<SpectrumReport> out;
  out.reserve(theta_im.size());
  for (double phi : theta_im)
    out.push_back(complex_spectrum(build_radial(spec, ell, grid, Complex(0.0, phi)), 0, opt));
  if (out.empty()) return out;
  const auto ref = out.front().bound();
  for (auto& rep : out) {
    const auto b = rep.bound();
    rep.stability.clear();
    for (std::size_t i = 0; i < b.size(); ++i)
      rep.stability.push_back(i < ref.size() ? std::abs(b[i] - ref[i])
                                             : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dilatation analyticity of the softened potential

struct DilatationSamples {
  // Far radii for the decay condition; increasing.
  std::vector<double> far{10.0, 100.0, 1e3, 1e4};
  // Near radii for the small-r bound, as multiples of C cos(beta); decreasing.
  // Below 2 C cos(phi) the weighted modulus is monotone in r on every ray.
  std::vector<double> near_rel{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  int rays = 33;             // angles phi spread uniformly over [-beta, beta]
  double far_tol = 1e-3;     // sup |V| at the largest far radius
  double near_tol = 1e-12;   // r^{2-eps} sup |V| at the smallest near radius
};

struct ConditionReport {
  double C = 0.0;
  double beta = 0.0;
  double epsilon = 0.5;
  // Analytic in the sector |arg r| < pi/2 away from 0; recorded, not computed.
  bool analytic_sector = true;
  bool decay_at_infinity = false;
  bool small_r_bound = false;
  std::vector<std::pair<double, double>> far_profile;   // (|r|, sup_phi |V(r e^{i phi})|)
  std::vector<std::pair<double, double>> near_profile;  // (|r|, sup_phi |r|^{2-eps} |V|)

  bool passed() const noexcept { return analytic_sector && decay_at_infinity && small_r_bound; }
};

inline double ray_sup(const PotentialSpec& spec, double r, double beta, int rays, double weight) {
  double best = 0.0;
  for (int i = 0; i < rays; ++i) {
    const double phi = rays == 1 ? 0.0 : -beta + 2.0 * beta * i / (rays - 1);
    best = std::max(best, weight * std::abs(eval(spec, std::polar(r, phi))));
  }
  return best;
}

inline ConditionReport check_dilatation_conditions(const PotentialSpec& spec, double beta_max,
                                                   const DilatationSamples& samples = {}) {
  if (spec.family != Family::SoftenedP)
    throw DomainError("check_dilatation_conditions: softened potential required");
  spec.validate();
  if (!(beta_max >= 0.0 && beta_max < std::numbers::pi / 2))
    throw DomainError("check_dilatation_conditions: beta must lie in [0, pi/2)");
  if (samples.rays < 1 || samples.far.empty() || samples.near_rel.empty())
    throw DomainError("check_dilatation_conditions: empty sample set");

  ConditionReport rep;
  rep.C = spec.C;
  rep.beta = beta_max;

  bool ok = true;
  double prev = std::numeric_limits<double>::infinity();
  for (double r : samples.far) {
    const double s = ray_sup(spec, r, beta_max, samples.rays, 1.0);
    rep.far_profile.emplace_back(r, s);
    if (!(s < prev)) ok = false;
    prev = s;
  }
  rep.decay_at_infinity = ok && prev < samples.far_tol;

  ok = true;
  prev = std::numeric_limits<double>::infinity();
  const double unit = spec.C * std::cos(beta_max);
  for (double rel : samples.near_rel) {
    const double r = rel * unit;
    const double s = ray_sup(spec, r, beta_max, samples.rays, std::pow(r, 2.0 - rep.epsilon));
    rep.near_profile.emplace_back(r, s);
    if (!(s <= prev)) ok = false;
    prev = s;
  }
  rep.small_r_bound = ok && prev < samples.near_tol;
  return rep;
}

// ---------------------------------------------------------------------------
// C -> 0 approach to the Coulomb ground state

struct LimitRow {
  double C;
  double E1;
  double gap;  // E1 + 1/4
};

/// Rejects C lists that are not strictly decreasing and nonnegative, and
/// meshes coarser than min(C, 1)/20 for the smallest positive C.
inline void require_limit_resolution(const std::vector<double>& C_list, const RadialGrid& grid) {
  double c_min = 1.0;
  for (std::size_t i = 0; i < C_list.size(); ++i) {
    const double C = C_list[i];
    if (C < 0.0 || (i > 0 && !(C < C_list[i - 1])))
      throw DomainError("eigenvalue_limit_study: C values must be nonnegative, strictly decreasing");
    if (C > 0.0) c_min = std::min(c_min, C);
  }
  if (grid.h > c_min / 20.0 * (1.0 + 1e-12))
    throw ResolutionError("eigenvalue_limit_study: h = " + std::to_string(grid.h) +
                          " exceeds min(C, 1)/20 = " + std::to_string(c_min / 20.0));
}

/// Ground-state energy for each C (C = 0 is Coulomb).
inline std::vector<LimitRow> eigenvalue_limit_study(const std::vector<double>& C_list, int ell,
                                                    const RadialGrid& grid) {
  require_limit_resolution(C_list, grid);
  std::vector<LimitRow> rows;
  rows.reserve(C_list.size());
  for (double C : C_list) {
    const auto spec = C == 0.0 ? PotentialSpec::coulomb() : PotentialSpec::softened(C);
    const double e1 = bound_states(build_radial(spec, ell, grid), 1).front();
    rows.push_back({C, e1, e1 + 0.25});
  }
  return rows;
}

}  // namespace softcoul::spectral
