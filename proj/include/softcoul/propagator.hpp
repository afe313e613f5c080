#pragma once

// Time propagation for i d/dt psi = (H0 + V_P(x - r(t))) psi with
// H0 = -Delta - Z/|x| on a periodic Cartesian box.
//
// Grid nodes sit at -L/2 + (i + 1/2) h, so the Coulomb center at the origin
// is never a node. Kinetic factors are applied in discrete-frequency space
// (FFTW); diagnostics use the 7-point Laplacian with zero Dirichlet data.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <mutex>
#include <new>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <fftw3.h>

#include "softcoul/error.hpp"
#include "softcoul/potentials.hpp"

namespace softcoul::propagator {

using Complex = std::complex<double>;

template <class T>
struct FftwAllocator {
  using value_type = T;
  FftwAllocator() = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) {
    void* p = fftw_malloc(n * sizeof(T));
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }
  template <class U>
  bool operator==(const FftwAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<Complex, FftwAllocator<Complex>>;

struct Grid3D {
  int n = 48;
  double h = 0.5;

  Grid3D() = default;
  Grid3D(int nodes, double spacing) : n(nodes), h(spacing) {
    if (n < 8) throw DomainError("Grid3D: need n >= 8");
    if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("Grid3D: h must be positive");
  }
  static Grid3D cube(int nodes, double box) { return Grid3D(nodes, box / nodes); }

  double box() const noexcept { return n * h; }
  double coord(int i) const noexcept { return -0.5 * box() + (i + 0.5) * h; }
  std::size_t size() const noexcept { return std::size_t(n) * n * n; }
  std::size_t index(int i, int j, int k) const noexcept {
    return (std::size_t(i) * n + j) * n + k;
  }
  double cell() const noexcept { return h * h * h; }
};

inline bool operator==(const Grid3D& a, const Grid3D& b) { return a.n == b.n && a.h == b.h; }

class WaveFunction3D {
 public:
  WaveFunction3D() = default;
  explicit WaveFunction3D(const Grid3D& g) : grid_(g), data_(g.size(), Complex{}) {}

  template <class F>  // f(x, y, z) -> Complex
  static WaveFunction3D sample(const Grid3D& g, F&& f) {
    WaveFunction3D w(g);
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j)
        for (int k = 0; k < g.n; ++k)
          w.data_[g.index(i, j, k)] = f(g.coord(i), g.coord(j), g.coord(k));
    return w;
  }

  const Grid3D& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return data_.size(); }
  Complex* data() noexcept { return data_.data(); }
  const Complex* data() const noexcept { return data_.data(); }
  Complex& operator[](std::size_t i) noexcept { return data_[i]; }
  const Complex& operator[](std::size_t i) const noexcept { return data_[i]; }

  double norm_sq() const noexcept {
    double s = 0.0;
    for (const Complex& v : data_) s += std::norm(v);
    return s * grid_.cell();
  }
  double norm() const noexcept { return std::sqrt(norm_sq()); }

  void normalize() {
    const double nv = norm();
    if (!(nv > 0.0) || !std::isfinite(nv)) throw NumericalFailure("normalize: zero or non-finite norm");
    const double inv = 1.0 / nv;
    for (Complex& v : data_) v *= inv;
  }

  /// <x^2> = <psi| |x|^2 |psi> / <psi|psi>.
  double expect_x2() const {
    double num = 0.0, den = 0.0;
    for (int i = 0; i < grid_.n; ++i) {
      const double x = grid_.coord(i);
      for (int j = 0; j < grid_.n; ++j) {
        const double y = grid_.coord(j);
        for (int k = 0; k < grid_.n; ++k) {
          const double z = grid_.coord(k);
          const double p = std::norm(data_[grid_.index(i, j, k)]);
          num += (x * x + y * y + z * z) * p;
          den += p;
        }
      }
    }
    if (!(den > 0.0)) throw NumericalFailure("expect_x2: zero state");
    return num / den;
  }

  Complex inner(const WaveFunction3D& o) const {  // <this|o>
    check_same(o);
    Complex s{};
    for (std::size_t i = 0; i < data_.size(); ++i) s += std::conj(data_[i]) * o.data_[i];
    return s * grid_.cell();
  }

  WaveFunction3D& operator+=(const WaveFunction3D& o) {
    check_same(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  WaveFunction3D& operator-=(const WaveFunction3D& o) {
    check_same(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  WaveFunction3D& operator*=(Complex a) {
    for (Complex& v : data_) v *= a;
    return *this;
  }
  void axpy(Complex a, const WaveFunction3D& x) {
    check_same(x);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * x.data_[i];
  }

 private:
  void check_same(const WaveFunction3D& o) const {
    if (!(grid_ == o.grid_)) throw DomainError("WaveFunction3D: grid mismatch");
  }

  Grid3D grid_;
  Buffer data_;
};

inline double distance(const WaveFunction3D& a, const WaveFunction3D& b) {
  WaveFunction3D d = a;
  d -= b;
  return d.norm();
}

// ---------------------------------------------------------------------------
// FFTW plans

namespace detail {

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

/// Forward/backward in-place plan pair for one grid. Planning goes through a
/// process-wide mutex (the FFTW planner is not reentrant); execution is not
/// serialized. FFTW_ESTIMATE keeps results independent of timing.
class FftPlan {
 public:
  explicit FftPlan(const Grid3D& g) : n_(g.n) {
    Buffer scratch(g.size());
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    std::lock_guard lock(detail::planner_mutex());
    fwd_ = fftw_plan_dft_3d(n_, n_, n_, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_3d(n_, n_, n_, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!fwd_ || !bwd_) throw NumericalFailure("FftPlan: planner failed");
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;
  ~FftPlan() {
    std::lock_guard lock(detail::planner_mutex());
    if (fwd_) fftw_destroy_plan(fwd_);
    if (bwd_) fftw_destroy_plan(bwd_);
  }

  void forward(Complex* a) const { fftw_execute_dft(fwd_, cast(a), cast(a)); }
  void backward(Complex* a) const { fftw_execute_dft(bwd_, cast(a), cast(a)); }

 private:
  static fftw_complex* cast(Complex* a) { return reinterpret_cast<fftw_complex*>(a); }
  int n_;
  fftw_plan fwd_ = nullptr, bwd_ = nullptr;
};

// ---------------------------------------------------------------------------
// Ground states

enum class GroundStateKind { HydrogenExp, HydrogenTrue };

inline void require_resolution(const Grid3D& g) {
  if (g.h > 0.5 || g.box() < 20.0)
    throw ResolutionError("ground state needs h <= 0.5 and box >= 20 Bohr (h = " +
                          std::to_string(g.h) + ", box = " + std::to_string(g.box()) + ")");
}

/// Normalized samples of e^{-r} (HydrogenExp) or e^{-r/2} (HydrogenTrue, the
/// ground state of -Delta - 1/|x| with energy -1/4).
inline WaveFunction3D make_groundstate(const Grid3D& g, GroundStateKind kind) {
  require_resolution(g);
  const double decay = kind == GroundStateKind::HydrogenExp ? 1.0 : 0.5;
  auto w = WaveFunction3D::sample(g, [decay](double x, double y, double z) {
    return Complex(std::exp(-decay * std::sqrt(x * x + y * y + z * z)), 0.0);
  });
  w.normalize();
  return w;
}

// ---------------------------------------------------------------------------
// Split-step propagator

enum class Scheme { Strang, CrankNicolson };

inline std::string to_string(Scheme s) { return s == Scheme::Strang ? "strang" : "crank_nicolson"; }

/// Moving softened nucleus, V_P(x - r(t)). Absent means V_P is switched off.
struct Perturbation {
  PotentialSpec spec;
  NucleusTrajectory trajectory;
};

class Propagator {
 public:
  explicit Propagator(const Grid3D& g, double coulomb_charge = 1.0, Scheme scheme = Scheme::Strang)
      : grid_(g), charge_(coulomb_charge), scheme_(scheme), plan_(g), k2_(g.size()), vc_(g.size()) {
    const int n = g.n;
    std::vector<double> k(n);
    for (int i = 0; i < n; ++i) {
      const int m = i <= (n - 1) / 2 ? i : i - n;
      k[i] = 2.0 * std::numbers::pi * m / g.box();
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) {
          const std::size_t idx = g.index(i, j, l);
          k2_[idx] = k[i] * k[i] + k[j] * k[j] + k[l] * k[l];
          const double x = g.coord(i), y = g.coord(j), z = g.coord(l);
          vc_[idx] = -charge_ / std::sqrt(x * x + y * y + z * z);
        }
  }

  const Grid3D& grid() const noexcept { return grid_; }
  Scheme scheme() const noexcept { return scheme_; }
  double coulomb_charge() const noexcept { return charge_; }
  const std::vector<double>& coulomb_potential() const noexcept { return vc_; }

  /// V_P(x - r(t)) on the grid.
  std::vector<double> perturbation(const Perturbation& p, double t) const {
    std::vector<double> v(grid_.size());
    const Vec3 c = p.trajectory.position(t);
    const int n = grid_.n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) {
          const double dx = grid_.coord(i) - c[0], dy = grid_.coord(j) - c[1],
                       dz = grid_.coord(l) - c[2];
          v[grid_.index(i, j, l)] = eval(p.spec, std::sqrt(dx * dx + dy * dy + dz * dz));
        }
    return v;
  }

  /// One step of size dt (negative dt runs backward) for H0, or for H0 + V_P
  /// with V_P frozen at t + dt/2.
  void step(WaveFunction3D& psi, double t, double dt, const Perturbation* p = nullptr) const {
    check(psi);
    if (p) {
      auto v = perturbation(*p, t + 0.5 * dt);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += vc_[i];
      step_with(psi, dt, v);
    } else {
      step_with(psi, dt, vc_);
    }
  }

  /// U0(d): exp(-i d H0) by ceil(|d| / dt_max) equal steps.
  void free_evolve(WaveFunction3D& psi, double d, double dt_max) const {
    if (d == 0.0) return;
    const int m = std::max(1, static_cast<int>(std::ceil(std::abs(d) / dt_max - 1e-9)));
    const double dt = d / m;
    for (int i = 0; i < m; ++i) step_with(psi, dt, vc_);
  }

  /// Imaginary-time split step exp(-dt H0), renormalized.
  void imaginary_step(WaveFunction3D& psi, double dt) const {
    check(psi);
    Complex* a = psi.data();
    const std::size_t n = psi.size();
    for (std::size_t i = 0; i < n; ++i) a[i] *= std::exp(-0.5 * dt * vc_[i]);
    plan_.forward(a);
    const double inv = 1.0 / double(n);
    for (std::size_t i = 0; i < n; ++i) a[i] *= std::exp(-dt * k2_[i]) * inv;
    plan_.backward(a);
    for (std::size_t i = 0; i < n; ++i) a[i] *= std::exp(-0.5 * dt * vc_[i]);
    psi.normalize();
  }

 private:
  void check(const WaveFunction3D& psi) const {
    if (!(psi.grid() == grid_)) throw DomainError("Propagator: wavefunction on a different grid");
  }

  Complex potential_factor(double v, double dt) const {
    if (scheme_ == Scheme::Strang) return std::polar(1.0, -0.5 * dt * v);
    const Complex a(0.0, 0.25 * dt * v);  // Cayley form of exp(-i dt v / 2)
    return (1.0 - a) / (1.0 + a);
  }
  Complex kinetic_factor(double k2, double dt) const {
    if (scheme_ == Scheme::Strang) return std::polar(1.0, -dt * k2);
    const Complex a(0.0, 0.5 * dt * k2);
    return (1.0 - a) / (1.0 + a);
  }

  void step_with(WaveFunction3D& psi, double dt, const std::vector<double>& v) const {
    Complex* a = psi.data();
    const std::size_t n = psi.size();
    for (std::size_t i = 0; i < n; ++i) a[i] *= potential_factor(v[i], dt);
    plan_.forward(a);
    const double inv = 1.0 / double(n);
    for (std::size_t i = 0; i < n; ++i) a[i] *= kinetic_factor(k2_[i], dt) * inv;
    plan_.backward(a);
    for (std::size_t i = 0; i < n; ++i) a[i] *= potential_factor(v[i], dt);
  }

  Grid3D grid_;
  double charge_;
  Scheme scheme_;
  FftPlan plan_;
  std::vector<double> k2_;
  std::vector<double> vc_;
};

struct RelaxStage {
  int steps;
  double dt;
};

/// Default imaginary-time schedule: coarse steps to converge, fine steps to
/// remove the splitting bias of the coarse ones.
inline std::vector<RelaxStage> default_relax_schedule() { return {{2000, 0.05}, {3000, 0.005}}; }

/// Ground state of the discrete H0 by imaginary-time split steps from psi.
inline WaveFunction3D relax_to_ground_state(const Propagator& prop, WaveFunction3D psi,
                                            const std::vector<RelaxStage>& schedule =
                                                default_relax_schedule()) {
  for (const auto& st : schedule) {
    if (st.steps < 0 || !(st.dt > 0.0)) throw DomainError("relax_to_ground_state: bad schedule");
    for (int i = 0; i < st.steps; ++i) prop.imaginary_step(psi, st.dt);
  }
  return psi;
}

// ---------------------------------------------------------------------------
// Y-norm

/// H0 psi = -Delta_h psi - Z psi/|x| with the 7-point Laplacian, zero outside
/// the box.
inline WaveFunction3D apply_H0_fd(const WaveFunction3D& psi, double charge = 1.0) {
  const Grid3D& g = psi.grid();
  const int n = g.n;
  const double ih2 = 1.0 / (g.h * g.h);
  WaveFunction3D out(g);
  auto at = [&](int i, int j, int k) -> Complex {
    if (i < 0 || j < 0 || k < 0 || i >= n || j >= n || k >= n) return {};
    return psi[g.index(i, j, k)];
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const Complex c = at(i, j, k);
        const Complex lap = (at(i - 1, j, k) + at(i + 1, j, k) + at(i, j - 1, k) + at(i, j + 1, k) +
                             at(i, j, k - 1) + at(i, j, k + 1) - 6.0 * c) * ih2;
        const double x = g.coord(i), y = g.coord(j), z = g.coord(k);
        out[g.index(i, j, k)] = -lap - charge / std::sqrt(x * x + y * y + z * z) * c;
      }
  return out;
}

/// Probability mass within `layers` nodes of the box faces.
inline double boundary_mass(const WaveFunction3D& psi, int layers = 2) {
  const Grid3D& g = psi.grid();
  const int n = g.n;
  double m = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const int edge = std::min({i, j, k, n - 1 - i, n - 1 - j, n - 1 - k});
        if (edge < layers) m += std::norm(psi[g.index(i, j, k)]);
      }
  return m * g.cell();
}

inline constexpr double kBoundaryMassWarning = 1e-6;

struct YNorm {
  double value = 0.0;
  double boundary_mass = 0.0;
  bool contaminated = false;  // boundary_mass > kBoundaryMassWarning
};

/// sqrt(||(H0 + x^2) psi||^2 + ||psi||^2) with the boundary-mass warning.
inline YNorm y_norm_report(const WaveFunction3D& psi, double charge = 1.0) {
  const Grid3D& g = psi.grid();
  WaveFunction3D hp = apply_H0_fd(psi, charge);
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j)
      for (int k = 0; k < g.n; ++k) {
        const double x = g.coord(i), y = g.coord(j), z = g.coord(k);
        const std::size_t idx = g.index(i, j, k);
        hp[idx] += (x * x + y * y + z * z) * psi[idx];
      }
  YNorm out;
  out.value = std::sqrt(hp.norm_sq() + psi.norm_sq());
  out.boundary_mass = boundary_mass(psi);
  out.contaminated = out.boundary_mass > kBoundaryMassWarning;
  return out;
}

inline double y_norm(const WaveFunction3D& psi, double charge = 1.0) {
  return y_norm_report(psi, charge).value;
}

// ---------------------------------------------------------------------------
// Runs

struct PropagationConfig {
  Grid3D grid = Grid3D::cube(48, 24.0);
  double dt = 0.005;
  double t_final = 1.0;
  int dyson_order = 2;
  int quadrature_nodes = 8;        // Gauss-Legendre nodes per panel and level
  double quadrature_panel = 0.25;  // longest panel of the outer time integral
  std::optional<double> C;         // softening; empty switches V_P off
  double Z = 1.0;                  // charge of the moving softened nucleus
  NucleusTrajectory trajectory = NucleusTrajectory::stationary({0.0, 0.0, 0.0});
  int diagnostics_stride = 20;
  Scheme scheme = Scheme::Strang;
  double truncation_ceiling = std::numeric_limits<double>::infinity();

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive", "dt");
    if (!(t_final >= 0.0) || !std::isfinite(t_final))
      throw ConfigError("t_final must be nonnegative", "t_final");
    if (dyson_order < 0 || dyson_order > 6)
      throw ConfigError("dyson_order must lie in [0, 6]", "dyson_order");
    if (quadrature_nodes < 1 || quadrature_nodes > 64)
      throw ConfigError("quadrature_nodes must lie in [1, 64]", "quadrature_nodes");
    if (!(quadrature_panel > 0.0)) throw ConfigError("quadrature_panel must be positive", "quadrature_panel");
    if (C && !(*C > 0.0)) throw ConfigError("C must be positive", "C");
    if (!(Z > 0.0)) throw ConfigError("Z must be positive", "Z");
    if (diagnostics_stride < 1) throw ConfigError("diagnostics_stride must be >= 1", "diagnostics_stride");
  }

  std::optional<Perturbation> perturbation() const {
    if (!C) return std::nullopt;
    return Perturbation{PotentialSpec::softened(*C, Z), trajectory};
  }
};

/// Reference propagation from s to t in steps of config.dt (the last step is
/// shortened to land on t; t < s runs backward).
inline WaveFunction3D reference_propagate(const Propagator& prop, WaveFunction3D psi, double s,
                                          double t, const PropagationConfig& cfg) {
  const auto pert = cfg.perturbation();
  const double span = t - s;
  const int m = std::max(1, static_cast<int>(std::ceil(std::abs(span) / cfg.dt - 1e-9)));
  const double dt = span / m;
  for (int i = 0; i < m; ++i) prop.step(psi, s + i * dt, dt, pert ? &*pert : nullptr);
  return psi;
}

/// One reference step from t.
inline WaveFunction3D reference_step(const Propagator& prop, WaveFunction3D psi, double t,
                                     const PropagationConfig& cfg) {
  const auto pert = cfg.perturbation();
  prop.step(psi, t, cfg.dt, pert ? &*pert : nullptr);
  return psi;
}

// ---------------------------------------------------------------------------
// Dyson series

inline constexpr int kDysonWarnOrder = 3;

/// sum_{j > J} x^j / j!, x = (t - s) sup|V_P|.
inline double dyson_remainder_bound(double x, int J) {
  double term = 1.0, partial = 1.0;
  for (int j = 1; j <= J; ++j) {
    term *= x / j;
    partial += term;
  }
  return std::max(0.0, std::exp(x) - partial);
}

struct DysonResult {
  WaveFunction3D psi;
  std::vector<double> term_norms;  // ||F_j(t)||, j = 0..J
  double remainder_bound = 0.0;
  std::vector<std::string> warnings;
};

namespace detail {

struct Nodes {
  std::vector<double> x, w;  // on [-1, 1]
};

inline Nodes gauss_legendre(int n) {
  Nodes r;
  auto fill = [&](const auto& absc, const auto& wts) {
    for (std::size_t i = 0; i < absc.size(); ++i) {
      const double a = absc[i], w = wts[i];
      if (a == 0.0) {
        r.x.push_back(0.0);
        r.w.push_back(w);
      } else {
        r.x.push_back(-a);
        r.w.push_back(w);
        r.x.push_back(a);
        r.w.push_back(w);
      }
    }
  };
  using boost::math::quadrature::gauss;
  switch (n) {
    case 1: r.x = {0.0}; r.w = {2.0}; break;
    case 2: r.x = {-1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0)}; r.w = {1.0, 1.0}; break;
    case 4: fill(gauss<double, 4>::abscissa(), gauss<double, 4>::weights()); break;
    case 8: fill(gauss<double, 8>::abscissa(), gauss<double, 8>::weights()); break;
    case 16: fill(gauss<double, 16>::abscissa(), gauss<double, 16>::weights()); break;
    default: break;
  }
  if (r.x.empty()) {
    // Newton on P_n from the Chebyshev guesses.
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      r.x[i] = x;
      r.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }
  std::vector<std::size_t> order(r.x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return r.x[a] < r.x[b]; });
  Nodes s;
  for (auto i : order) {
    s.x.push_back(r.x[i]);
    s.w.push_back(r.w[i]);
  }
  return s;
}

/// Terms F_j(tau) of the Dyson series inside one panel [a, b]:
///   F_j(tau) = U0(tau - a) F_j(a) - i int_a^tau U0(tau - sigma) V(sigma) F_{j-1}(sigma) dsigma.
/// The integral is Gauss-Legendre on [a, tau]; all orders are swept together,
/// so each node costs one short propagation of every accumulator.
class PanelSweep {
 public:
  PanelSweep(const Propagator& prop, const Perturbation& pert, const Nodes& nodes, double dt_max)
      : prop_(prop), pert_(pert), nodes_(nodes), dt_max_(dt_max) {}

  /// F_0..F_jmax at tau, from the panel-start values `start` (time a).
  std::vector<WaveFunction3D> terms(const std::vector<WaveFunction3D>& start, double a,
                                    double tau, int jmax) const {
    std::vector<WaveFunction3D> acc(start.begin(), start.begin() + jmax + 1);
    if (jmax == 0 || tau == a) {
      for (auto& f : acc) prop_.free_evolve(f, tau - a, dt_max_);
      return acc;
    }
    const double half = 0.5 * (tau - a), mid = 0.5 * (tau + a);
    double cur = a;
    for (std::size_t k = 0; k < nodes_.x.size(); ++k) {
      const double sigma = mid + half * nodes_.x[k];
      for (auto& f : acc) prop_.free_evolve(f, sigma - cur, dt_max_);
      cur = sigma;
      // Lower orders at sigma; F_0(sigma) is the running accumulator itself.
      std::vector<WaveFunction3D> lower;
      if (jmax >= 2) lower = terms(start, a, sigma, jmax - 1);
      const auto v = prop_.perturbation(pert_, sigma);
      const Complex coef(0.0, -half * nodes_.w[k]);
      for (int j = jmax; j >= 1; --j) {
        const WaveFunction3D& src = j == 1 ? acc[0] : lower[j - 1];
        Complex* dst = acc[j].data();
        const Complex* s = src.data();
        for (std::size_t i = 0; i < v.size(); ++i) dst[i] += coef * v[i] * s[i];
      }
    }
    for (auto& f : acc) prop_.free_evolve(f, tau - cur, dt_max_);
    return acc;
  }

 private:
  const Propagator& prop_;
  const Perturbation& pert_;
  const Nodes& nodes_;
  double dt_max_;
};

}  // namespace detail

/// Interaction-picture Dyson series truncated at order J:
///   psi(t) = sum_{j <= J} F_j(t),  F_0(t) = U0(t - s) psi0,
///   F_j(t) = -i int_s^t U0(t - sigma) V_P(. - r(sigma)) F_{j-1}(sigma) dsigma,
/// which unrolls to e^{-i(t-s)H0} sum_j (-i)^j int..int V~(t_1)..V~(t_j) psi0
/// over the time simplex. The outer interval is split into panels no longer
/// than cfg.quadrature_panel and each nested integral uses
/// cfg.quadrature_nodes Gauss-Legendre nodes. U0 is a sequence of reference
/// steps with V_P off, never longer than cfg.dt.
inline DysonResult dyson_propagate(const Propagator& prop, const WaveFunction3D& psi0, double s,
                                   double t, const PropagationConfig& cfg) {
  cfg.validate();
  if (!(t >= s)) throw DomainError("dyson_propagate: need t >= s");
  const int J = cfg.dyson_order;
  const auto pert = cfg.perturbation();

  DysonResult out;
  const double x = pert ? (t - s) * sup_norm(pert->spec) : 0.0;
  out.remainder_bound = dyson_remainder_bound(x, J);
  if (out.remainder_bound > cfg.truncation_ceiling)
    throw TruncationBudgetError("dyson_propagate: remainder bound " +
                                std::to_string(out.remainder_bound) + " exceeds ceiling " +
                                std::to_string(cfg.truncation_ceiling));
  if (J > kDysonWarnOrder)
    out.warnings.push_back("dyson order " + std::to_string(J) +
                           " is expensive; reference propagation is recommended");
  if (pert && !(pert->trajectory.covers(s) && pert->trajectory.covers(t)))
    throw OutOfSpanError("dyson_propagate: [s, t] not covered by the trajectory");

  const int jmax = pert ? J : 0;
  std::vector<WaveFunction3D> F;
  F.push_back(psi0);
  for (int j = 1; j <= jmax; ++j) F.emplace_back(psi0.grid());

  const int panels = std::max(1, static_cast<int>(std::ceil((t - s) / cfg.quadrature_panel - 1e-9)));
  const double len = (t - s) / panels;
  const auto nodes = detail::gauss_legendre(cfg.quadrature_nodes);
  for (int p = 0; p < panels && t > s; ++p) {
    const double a = s + p * len, b = p + 1 == panels ? t : s + (p + 1) * len;
    if (jmax == 0) {
      prop.free_evolve(F[0], b - a, cfg.dt);
      continue;
    }
    detail::PanelSweep sweep(prop, *pert, nodes, cfg.dt);
    auto next = sweep.terms(F, a, b, jmax);
    // F_0 is carried by whole-panel steps, the same ones the reference takes.
    prop.free_evolve(F[0], b - a, cfg.dt);
    next[0] = std::move(F[0]);
    F = std::move(next);
  }

  out.psi = WaveFunction3D(psi0.grid());
  for (int j = 0; j <= J; ++j) {
    if (j <= jmax) {
      out.term_norms.push_back(F[j].norm());
      out.psi += F[j];
    } else {
      out.term_norms.push_back(0.0);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics

struct DiagnosticSample {
  double t, norm, x2, ynorm;
};

struct EvolutionResult {
  std::vector<DiagnosticSample> samples;
  WaveFunction3D final_state;
  double y_initial = 0.0;
  double y_max = 0.0;
  bool domain_flag = false;      // y_norm left 10x its initial value
  bool boundary_warning = false;  // some sample had boundary mass above 1e-6
};

inline constexpr double kDomainGrowthFlag = 10.0;
// <x^2> of a uniform fill of the box is L^2/4; half of it means the packet
// is on the walls.
inline constexpr double kBlowUpFill = 0.5;

/// Reference propagation over [0, t_final] sampling (t, norm, <x^2>, y_norm)
/// every cfg.diagnostics_stride steps and at the end.
inline EvolutionResult evolve_with_diagnostics(const Propagator& prop, const PropagationConfig& cfg,
                                               const WaveFunction3D& psi0) {
  cfg.validate();
  const auto pert = cfg.perturbation();
  const double capacity = kBlowUpFill * cfg.grid.box() * cfg.grid.box() / 4.0;
  const int steps = static_cast<int>(std::llround(cfg.t_final / cfg.dt));

  EvolutionResult res;
  WaveFunction3D psi = psi0;
  auto sample = [&](double t) {
    const double nv = psi.norm();
    const double x2 = psi.expect_x2();
    const auto y = y_norm_report(psi, prop.coulomb_charge());
    if (!std::isfinite(nv) || !std::isfinite(x2) || !std::isfinite(y.value))
      throw BlowUpError("evolve_with_diagnostics: non-finite diagnostics at t = " + std::to_string(t));
    if (x2 > capacity)
      throw BlowUpError("evolve_with_diagnostics: <x^2> = " + std::to_string(x2) +
                        " exceeds box capacity " + std::to_string(capacity));
    res.samples.push_back({t, nv, x2, y.value});
    res.y_max = std::max(res.y_max, y.value);
    res.boundary_warning = res.boundary_warning || y.contaminated;
  };
  sample(0.0);
  res.y_initial = res.samples.front().ynorm;
  for (int i = 0; i < steps; ++i) {
    prop.step(psi, i * cfg.dt, cfg.dt, pert ? &*pert : nullptr);
    if ((i + 1) % cfg.diagnostics_stride == 0 || i + 1 == steps) sample((i + 1) * cfg.dt);
  }
  res.domain_flag = res.y_max > kDomainGrowthFlag * res.y_initial;
  res.final_state = std::move(psi);
  return res;
}

}  // namespace softcoul::propagator
