#pragma once

// Equilibrium particle sampling by inverse transform on the Boltzmann-tilted energy law,
// plus weighted moment estimators.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <vector>

#include "polyquant/energy_law.hpp"
#include "polyquant/equilibrium.hpp"

namespace polyquant {

struct Particle {
  std::array<double, 3> v{0.0, 0.0, 0.0};
  double e_int = 0.0;
  double w = 0.0;
};

struct ParticleEnsemble {
  std::vector<Particle> particles;
  std::uint64_t seed = 0;
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

struct Moments {
  double rho = 0.0;
  std::array<double, 3> u{0.0, 0.0, 0.0};
  double E = 0.0;
};

namespace detail {

inline std::uint64_t splitmix_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// SplitMix64 as a standard uniform random bit generator. One instance per
/// (seed, particle index) makes every particle independent of evaluation order.
class StreamEngine {
 public:
  using result_type = std::uint64_t;
  StreamEngine(std::uint64_t seed, std::uint64_t index)
      : state_(splitmix_mix(seed ^ 0x9e3779b97f4a7c15ULL) ^ splitmix_mix(index + 0x632be59bd9b4e019ULL)) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix_mix(state_);
  }
  /// Uniform in the open interval (0, 1).
  double open_unit() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

inline double g1(double y) { return -std::expm1(-y); }

/// 1 - e^{-y}(1 + y), with a series near zero.
inline double g2(double y) {
  if (y < 0.1) {
    double term = y * y / 2.0;
    double sum = 0.0;
    for (int n = 2; n < 14; ++n) {
      sum += (n - 1) * term;
      term *= -y / (n + 1);
    }
    return sum;
  }
  return 1.0 - std::exp(-y) * (1.0 + y);
}

/// Inverse-transform table for exp(-beta I) dmu restricted to a finite window.
class TiltedTable {
 public:
  TiltedTable(const EnergyLaw& law, double beta) : beta_(beta) {
    const auto add = [&](Piece p) {
      acc_.add(p.mass);
      p.cum = acc_.value();
      if (p.mass > 0.0) pieces_.push_back(p);
    };
    std::size_t ai = 0;
    const auto& atoms = law.atoms();
    const double pw = 1.0 / (8.0 * beta);
    for (const auto& s : law.segments()) {
      const auto cells = static_cast<long long>(std::max(1.0, std::ceil(s.length() / pw)));
      const double w = s.length() / static_cast<double>(cells);
      for (long long c = 0; c < cells; ++c) {
        const double a = s.lo + static_cast<double>(c) * w;
        const double b = c + 1 == cells ? s.hi : a + w;
        while (ai < atoms.size() && atoms[ai].location <= a) add(atom_piece(atoms[ai++]));
        add(panel_piece(a, b, s.value_at(a), s.value_at(b)));
      }
    }
    while (ai < atoms.size()) add(atom_piece(atoms[ai++]));
    if (pieces_.empty() || !(total() > 0.0)) {
      throw DomainError("sampling: tilted law has zero mass");
    }
  }

  double total() const { return pieces_.empty() ? 0.0 : pieces_.back().cum; }
  std::size_t size() const { return pieces_.size(); }

  /// Energy whose tilted cumulative first reaches u * total.
  double invert(double u) const {
    const double t = u * total();
    auto it = std::lower_bound(pieces_.begin(), pieces_.end(), t,
                               [](const Piece& p, double x) { return p.cum < x; });
    if (it == pieces_.end()) it = std::prev(pieces_.end());
    const Piece& p = *it;
    if (p.atom) return p.a;
    const double before = p.cum - p.mass;
    return p.a + solve_panel(p, std::clamp(t - before, 0.0, p.mass));
  }

 private:
  struct Piece {
    bool atom = false;
    double a = 0.0;
    double b = 0.0;
    double fa = 0.0;
    double k = 0.0;
    double mass = 0.0;
    double cum = 0.0;
  };

  Piece atom_piece(const Atom& at) const {
    Piece p;
    p.atom = true;
    p.a = p.b = at.location;
    p.mass = at.weight * std::exp(-beta_ * at.location);
    return p;
  }

  double panel_mass(const Piece& p, double s) const {
    const double y = beta_ * s;
    return std::exp(-beta_ * p.a) * (p.fa * g1(y) / beta_ + p.k * g2(y) / (beta_ * beta_));
  }

  Piece panel_piece(double a, double b, double fa, double fb) const {
    Piece p;
    p.a = a;
    p.b = b;
    p.fa = fa;
    p.k = (fb - fa) / (b - a);
    p.mass = panel_mass(p, b - a);
    return p;
  }

  /// Offset s in [0, b - a] with tilted mass of [a, a + s] equal to r.
  double solve_panel(const Piece& p, double r) const {
    const double len = p.b - p.a;
    double lo = 0.0;
    double hi = len;
    double s = len * (r / p.mass);
    for (int it = 0; it < 100; ++it) {
      const double g = panel_mass(p, s) - r;
      if (g > 0.0) {
        hi = s;
      } else {
        lo = s;
      }
      const double dg = (p.fa + p.k * s) * std::exp(-beta_ * (p.a + s));
      double next = dg > 0.0 ? s - g / dg : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - s) <= 1e-15 * std::max(1.0, p.a + len) || hi - lo <= 1e-15 * len) {
        return next;
      }
      s = next;
    }
    return s;
  }

  double beta_;
  std::vector<Piece> pieces_;
  CompensatedSum acc_;
};

inline constexpr std::size_t kSamplerPieceBudget = 4'000'000;

}  // namespace detail

/// Window on which the tilted law is tabulated: the moment horizon, limited to the
/// numeric window of untagged laws.
inline EnergyLaw sampling_window(const EnergyLaw& law, double beta) {
  const auto m = boltzmann_moments(law, beta);
  if (!law.has_form()) return law;
  if (std::holds_alternative<ShiftedPowerSum>(law.form())) {
    // Tilted mass past 80/beta is below e^-60 of the total.
    const double h = std::min(m.horizon, 80.0 / beta);
    return law.with_window(h, h / 8192.0);
  }
  if (!std::isfinite(m.horizon)) {
    throw UnsupportedOperation("sampling: temperature too high for a tabulated tilted law "
                               "at this level spacing");
  }
  const double step = std::holds_alternative<PowerDensity>(law.form()) ? m.horizon / 8192.0 : 0.0;
  return law.with_window(m.horizon, step);
}

/// n particles with Maxwellian velocities and internal energies drawn from the tilted law.
inline ParticleEnsemble sample_equilibrium(const EnergyLaw& law, const EquilibriumParams& p,
                                           std::size_t n, std::uint64_t seed,
                                           const UnitsConfig& units = {}) {
  if (n == 0) throw DomainError("sample_equilibrium: n must be at least 1");
  check_params(p);
  const double beta = detail::beta_of(p.T, units);
  const EnergyLaw window = sampling_window(law, beta);
  if (window.atoms().size() + window.segments().size() > detail::kSamplerPieceBudget) {
    throw UnsupportedOperation("sampling: tilted table exceeds the piece budget");
  }
  const detail::TiltedTable table(window, beta);
  const double sd = std::sqrt(units.k_B * p.T);
  const double w = p.rho / static_cast<double>(n);

  ParticleEnsemble ens;
  ens.seed = seed;
  ens.particles.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    detail::StreamEngine eng(seed, i);
    Particle& q = ens.particles[i];
    q.e_int = table.invert(eng.open_unit());
    std::normal_distribution<double> normal(0.0, sd);
    for (int k = 0; k < 3; ++k) q.v[k] = p.u[k] + normal(eng);
    q.w = w;
  }
  return ens;
}

/// rho = sum w, u = sum w v / rho, E = sum w (|v - u|^2 / 2 + e_int) + rho * ground.
inline Moments moments(const ParticleEnsemble& ens, double ground = 0.0) {
  if (ens.particles.empty()) throw DomainError("moments: empty ensemble");
  detail::CompensatedSum rho;
  std::array<detail::CompensatedSum, 3> mom;
  for (const auto& q : ens.particles) {
    rho.add(q.w);
    for (int k = 0; k < 3; ++k) mom[k].add(q.w * q.v[k]);
  }
  Moments m;
  m.rho = rho.value();
  for (int k = 0; k < 3; ++k) m.u[k] = mom[k].value() / m.rho;
  detail::CompensatedSum e;
  for (const auto& q : ens.particles) {
    double c2 = 0.0;
    for (int k = 0; k < 3; ++k) c2 += (q.v[k] - m.u[k]) * (q.v[k] - m.u[k]);
    e.add(q.w * (0.5 * c2 + q.e_int));
  }
  m.E = e.value() + m.rho * ground;
  return m;
}

namespace detail {

/// Per-particle (|v - u|^2 / 2 + e_int) / (k_B T), u taken from the parameters.
inline std::vector<double> scaled_energies(const ParticleEnsemble& ens, const EquilibriumParams& p,
                                           const UnitsConfig& units) {
  check_params(p);
  const double kT = units.k_B * p.T;
  std::vector<double> x;
  x.reserve(ens.particles.size());
  for (const auto& q : ens.particles) {
    double c2 = 0.0;
    for (int k = 0; k < 3; ++k) c2 += (q.v[k] - p.u[k]) * (q.v[k] - p.u[k]);
    x.push_back((0.5 * c2 + q.e_int) / kT);
  }
  return x;
}

struct WeightedStats {
  double mean = 0.0;
  double m2 = 0.0;  // central moments
  double m4 = 0.0;
  double n_eff = 0.0;
};

inline WeightedStats weighted_stats(const ParticleEnsemble& ens, const std::vector<double>& x) {
  CompensatedSum sw;
  CompensatedSum sw2;
  CompensatedSum sx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = ens.particles[i].w;
    sw.add(w);
    sw2.add(w * w);
    sx.add(w * x[i]);
  }
  WeightedStats s;
  s.mean = sx.value() / sw.value();
  CompensatedSum c2;
  CompensatedSum c4;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - s.mean;
    const double w = ens.particles[i].w;
    c2.add(w * d * d);
    c4.add(w * d * d * d * d);
  }
  s.m2 = c2.value() / sw.value();
  s.m4 = c4.value() / sw.value();
  s.n_eff = sw.value() * sw.value() / sw2.value();
  return s;
}

}  // namespace detail

/// Estimates 3 + delta(T) as the mean of 2 (|v - u|^2 / 2 + e_int) / (k_B T).
inline Estimate empirical_dof(const ParticleEnsemble& ens, const EquilibriumParams& p,
                              const UnitsConfig& units = {}) {
  if (ens.particles.empty()) throw DomainError("empirical_dof: empty ensemble");
  const auto x = detail::scaled_energies(ens, p, units);
  const auto s = detail::weighted_stats(ens, x);
  return {2.0 * s.mean, 2.0 * std::sqrt(s.m2 / s.n_eff)};
}

/// Estimates c_V(T) as the variance of (|v - u|^2 / 2 + e_int) / (k_B T).
inline Estimate empirical_cv(const ParticleEnsemble& ens, const EquilibriumParams& p,
                             const UnitsConfig& units = {}) {
  if (ens.particles.size() < 2) throw DomainError("empirical_cv: need at least two particles");
  const auto x = detail::scaled_energies(ens, p, units);
  const auto s = detail::weighted_stats(ens, x);
  return {s.m2, std::sqrt(std::max(0.0, s.m4 - s.m2 * s.m2) / s.n_eff)};
}

inline void write_ensemble_csv(std::ostream& os, const ParticleEnsemble& ens) {
  using detail::format_double;
  os << "vx,vy,vz,e_int,w\n";
  for (const auto& q : ens.particles) {
    os << format_double(q.v[0]) << ',' << format_double(q.v[1]) << ',' << format_double(q.v[2])
       << ',' << format_double(q.e_int) << ',' << format_double(q.w) << '\n';
  }
}

}  // namespace polyquant
