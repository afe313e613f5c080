#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "softcoul/error.hpp"

namespace softcoul {

using Vec3 = std::array<double, 3>;

enum class Axis : int { x = 0, y = 1, z = 2 };

enum class Family { Coulomb, Yukawa, SoftenedP };

// exp(-C/r) underflows for C/r above this; such factors are treated as exactly 0.
inline constexpr double kExpUnderflow = 745.0;

/// One member of the radial potential family.
///
///   Coulomb     Z / r
///   Yukawa      Z * alpha^2 * exp(-c r) / r
///   SoftenedP   Z * exp(-C / r) / r        (extended by 0 at r = 0)
///
/// All lengths in Bohr, energies in Hartree.
struct PotentialSpec {
  Family family = Family::SoftenedP;
  double C = 1.0;      // softening length (SoftenedP)
  double alpha = 1.0;  // Yukawa amplitude
  double c = 1.0;      // Yukawa screening rate
  double Z = 1.0;      // nuclear charge

  static PotentialSpec coulomb(double Z = 1.0) {
    PotentialSpec s;
    s.family = Family::Coulomb;
    s.Z = Z;
    s.validate();
    return s;
  }
  static PotentialSpec yukawa(double alpha, double c, double Z = 1.0) {
    PotentialSpec s;
    s.family = Family::Yukawa;
    s.alpha = alpha;
    s.c = c;
    s.Z = Z;
    s.validate();
    return s;
  }
  static PotentialSpec softened(double C, double Z = 1.0) {
    PotentialSpec s;
    s.family = Family::SoftenedP;
    s.C = C;
    s.Z = Z;
    s.validate();
    return s;
  }

  void validate() const {
    if (!(Z > 0.0) || !std::isfinite(Z)) throw DomainError("potential: Z must be positive");
    if (family == Family::SoftenedP && (!(C > 0.0) || !std::isfinite(C)))
      throw DomainError("potential: softening C must be positive");
    if (family == Family::Yukawa && (!(c > 0.0) || !std::isfinite(c) || !std::isfinite(alpha)))
      throw DomainError("potential: Yukawa rate c must be positive");
  }

  bool has_pole() const noexcept { return family != Family::SoftenedP; }
};

inline std::string to_string(Family f) {
  switch (f) {
    case Family::Coulomb: return "coulomb";
    case Family::Yukawa: return "yukawa";
    case Family::SoftenedP: return "softened";
  }
  return "?";
}

namespace detail {

// exp(-u) for u >= 0 with the underflow region flushed to exactly 0.
inline double exp_neg(double u) noexcept { return u > kExpUnderflow ? 0.0 : std::exp(-u); }

inline double norm(const Vec3& v) noexcept { return std::hypot(v[0], v[1], v[2]); }

inline void require_radius(double r) {
  if (!(r >= 0.0) || std::isnan(r)) throw DomainError("potential: radius must be >= 0");
}

inline void throw_pole(const PotentialSpec& spec) {
  throw SingularEvaluation("potential: " + to_string(spec.family) + " has a pole at r = 0");
}

}  // namespace detail

/// Potential value at radius r.
inline double eval(const PotentialSpec& spec, double r) {
  detail::require_radius(r);
  switch (spec.family) {
    case Family::SoftenedP: {
      if (r == 0.0) return 0.0;
      const double u = spec.C / r;
      if (u > kExpUnderflow) return 0.0;
      return (spec.Z / r) * std::exp(-u);
    }
    case Family::Coulomb:
      if (r == 0.0) detail::throw_pole(spec);
      return spec.Z / r;
    case Family::Yukawa:
      if (r == 0.0) detail::throw_pole(spec);
      return spec.Z * spec.alpha * spec.alpha / r * std::exp(-spec.c * r);
  }
  return 0.0;
}

/// Analytic continuation to complex radius (principal branch of every factor).
/// SoftenedP at z = 0 returns 0; it is only a removable point inside the
/// sector |arg z| < pi/2.
inline std::complex<double> eval(const PotentialSpec& spec, std::complex<double> z) {
  using cd = std::complex<double>;
  if (z == cd{}) {
    if (spec.family == Family::SoftenedP) return {};
    detail::throw_pole(spec);
  }
  const cd inv = 1.0 / z;
  switch (spec.family) {
    case Family::SoftenedP: {
      const cd u = spec.C * inv;
      if (u.real() > kExpUnderflow) return {};
      return spec.Z * inv * std::exp(-u);
    }
    case Family::Coulomb:
      return spec.Z * inv;
    case Family::Yukawa:
      return spec.Z * spec.alpha * spec.alpha * inv * std::exp(-spec.c * z);
  }
  return {};
}

/// dV/dr.
inline double radial_derivative(const PotentialSpec& spec, double r) {
  detail::require_radius(r);
  switch (spec.family) {
    case Family::SoftenedP: {
      if (r == 0.0) return 0.0;
      const double e = detail::exp_neg(spec.C / r);
      if (e == 0.0) return 0.0;
      // d/dr [e^{-C/r}/r] = e^{-C/r} (C - r) / r^3
      return spec.Z * ((spec.C - r) / (r * r * r)) * e;
    }
    case Family::Coulomb:
      if (r == 0.0) detail::throw_pole(spec);
      return -spec.Z / (r * r);
    case Family::Yukawa:
      if (r == 0.0) detail::throw_pole(spec);
      return -spec.Z * spec.alpha * spec.alpha * (1.0 + spec.c * r) / (r * r) *
             std::exp(-spec.c * r);
  }
  return 0.0;
}

/// Cartesian gradient component d V(|x|) / d x_j.
///
/// For SoftenedP this is  e^{-C/|x|} (C x_j / |x|^4 - x_j / |x|^3),  which is 0
/// at the origin. The C-term enters with a plus sign: d(-C/|x|)/dx_j = C x_j/|x|^3.
inline double grad_component(const PotentialSpec& spec, const Vec3& x, Axis j) {
  const double r = detail::norm(x);
  if (r == 0.0) {
    if (spec.family == Family::SoftenedP) return 0.0;
    detail::throw_pole(spec);
  }
  return radial_derivative(spec, r) * (x[static_cast<int>(j)] / r);
}

/// 3D Laplacian of V(|x|) at radius r > 0.
///
/// SoftenedP:  e^{-C/r} C (C - 2r) / r^5.  Coulomb: 0.  Yukawa: c^2 V.
inline double laplacian(const PotentialSpec& spec, double r) {
  if (!(r > 0.0)) throw DomainError("laplacian: requires r > 0");
  switch (spec.family) {
    case Family::SoftenedP: {
      const double e = detail::exp_neg(spec.C / r);
      if (e == 0.0) return 0.0;
      const double r2 = r * r;
      return spec.Z * (spec.C * (spec.C - 2.0 * r) / (r2 * r2 * r)) * e;
    }
    case Family::Coulomb:
      return 0.0;
    case Family::Yukawa:
      return spec.c * spec.c * eval(spec, r);
  }
  return 0.0;
}

/// Continuous nuclear path r(t), piecewise linear between knots.
///
/// A single knot means a nucleus at rest for all t.
class NucleusTrajectory {
 public:
  struct Knot {
    double t;
    Vec3 r;
  };

  NucleusTrajectory() : NucleusTrajectory(std::vector<Knot>{{0.0, {0.0, 0.0, 0.0}}}) {}

  explicit NucleusTrajectory(std::vector<Knot> knots) : knots_(std::move(knots)) {
    if (knots_.empty()) throw DomainError("trajectory: needs at least one knot");
    for (std::size_t i = 0; i < knots_.size(); ++i) {
      const auto& k = knots_[i];
      if (!std::isfinite(k.t) || !std::isfinite(k.r[0]) || !std::isfinite(k.r[1]) ||
          !std::isfinite(k.r[2]))
        throw DomainError("trajectory: non-finite knot");
      if (i > 0 && !(k.t > knots_[i - 1].t))
        throw DomainError("trajectory: knot times must be strictly increasing");
    }
  }

  static NucleusTrajectory stationary(const Vec3& r) { return NucleusTrajectory({{0.0, r}}); }

  /// Samples f on a uniform time grid [t0, t1] with `segments` linear pieces.
  template <class F>
  static NucleusTrajectory sampled(F&& f, double t0, double t1, int segments) {
    if (segments < 1 || !(t1 > t0)) throw DomainError("trajectory: bad sampling span");
    std::vector<Knot> k;
    k.reserve(static_cast<std::size_t>(segments) + 1);
    for (int i = 0; i <= segments; ++i) {
      const double t = t0 + (t1 - t0) * i / segments;
      k.push_back({t, f(t)});
    }
    return NucleusTrajectory(std::move(k));
  }

  bool is_stationary() const noexcept { return knots_.size() == 1; }
  double t_begin() const noexcept {
    return is_stationary() ? -std::numeric_limits<double>::infinity() : knots_.front().t;
  }
  double t_end() const noexcept {
    return is_stationary() ? std::numeric_limits<double>::infinity() : knots_.back().t;
  }
  bool covers(double t) const noexcept {
    if (is_stationary()) return true;
    const double slack = 1e-12 * std::max(1.0, std::abs(knots_.back().t - knots_.front().t));
    return t >= knots_.front().t - slack && t <= knots_.back().t + slack;
  }
  const std::vector<Knot>& knots() const noexcept { return knots_; }

  Vec3 position(double t) const {
    if (is_stationary()) return knots_.front().r;
    if (!covers(t))
      throw OutOfSpanError("trajectory: t = " + std::to_string(t) + " outside [" +
                           std::to_string(knots_.front().t) + ", " +
                           std::to_string(knots_.back().t) + "]");
    if (t <= knots_.front().t) return knots_.front().r;
    if (t >= knots_.back().t) return knots_.back().r;
    auto hi = std::upper_bound(knots_.begin(), knots_.end(), t,
                               [](double v, const Knot& k) { return v < k.t; });
    auto lo = hi - 1;
    const double w = (t - lo->t) / (hi->t - lo->t);
    Vec3 out;
    for (int a = 0; a < 3; ++a) out[a] = (1.0 - w) * lo->r[a] + w * hi->r[a];
    return out;
  }

 private:
  std::vector<Knot> knots_;
};

/// V(x - r(t)) for a moving nucleus.
inline double eval_moving(const PotentialSpec& spec, const Vec3& x, double t,
                          const NucleusTrajectory& traj) {
  const Vec3 c = traj.position(t);
  return eval(spec, detail::norm(Vec3{x[0] - c[0], x[1] - c[1], x[2] - c[2]}));
}

struct Nucleus {
  PotentialSpec spec;
  NucleusTrajectory trajectory;
};

/// Total attraction -sum_j sum_m V_m(|x_j - r_m(t)|) felt by N electrons from
/// M nuclei; each nucleus carries its charge in its spec.
inline double eval_multicenter(std::span<const Nucleus> nuclei, std::span<const Vec3> electrons,
                               double t) {
  double sum = 0.0;
  for (const auto& n : nuclei) {
    const Vec3 c = n.trajectory.position(t);
    for (const auto& x : electrons)
      sum += eval(n.spec, detail::norm(Vec3{x[0] - c[0], x[1] - c[1], x[2] - c[2]}));
  }
  return -sum;
}

/// sup_r V(r). SoftenedP peaks at r = C with value Z / (e C); the pole
/// families are rejected.
inline double sup_norm(const PotentialSpec& spec) {
  if (spec.family != Family::SoftenedP)
    throw UnboundedPotential("sup_norm: " + to_string(spec.family) + " is unbounded near r = 0");
  return spec.Z / (std::exp(1.0) * spec.C);
}

/// max_i | r d/dr (r V(r)) - C V(r) | over the samples, with the analytic
/// derivative. Zero for SoftenedP: V is an eigenfunction of r d/dr r.
inline double radial_momentum_residual(const PotentialSpec& spec, std::span<const double> r) {
  if (spec.family != Family::SoftenedP)
    throw DomainError("radial_momentum_residual: requires the softened family");
  double worst = 0.0;
  for (double ri : r) {
    if (!(ri > 0.0)) throw DomainError("radial_momentum_residual: samples must be positive");
    const double v = eval(spec, ri);
    const double p1 = ri * (v + ri * radial_derivative(spec, ri));
    worst = std::max(worst, std::abs(p1 - spec.C * v));
  }
  return worst;
}

/// Same residual with d/dr(rV) from a central difference of step `step`.
inline double radial_momentum_residual_fd(const PotentialSpec& spec, std::span<const double> r,
                                          double step) {
  if (spec.family != Family::SoftenedP)
    throw DomainError("radial_momentum_residual: requires the softened family");
  if (!(step > 0.0)) throw DomainError("radial_momentum_residual: step must be positive");
  double worst = 0.0;
  for (double ri : r) {
    if (!(ri > step)) throw DomainError("radial_momentum_residual: samples must exceed the step");
    auto rv = [&](double s) { return s * eval(spec, s); };
    const double d = (rv(ri + step) - rv(ri - step)) / (2.0 * step);
    worst = std::max(worst, std::abs(ri * d - spec.C * eval(spec, ri)));
  }
  return worst;
}

}  // namespace softcoul
