#pragma once

// Rigid rotor plus harmonic oscillator in closed form.

#include <cmath>
#include <numbers>

#include "polyquant/energy_law.hpp"
#include "polyquant/state_models.hpp"

namespace polyquant::diatomic {

struct DiatomicParams {
  double inertia = 2.0 * std::numbers::pi;
  double delta_eps = 1.0;
};

inline void check(const DiatomicParams& p) {
  if (!(p.inertia > 0.0 && std::isfinite(p.inertia))) throw DomainError("inertia must be positive");
  if (!(p.delta_eps > 0.0 && std::isfinite(p.delta_eps))) {
    throw DomainError("delta_eps must be positive");
  }
}

/// 2 pi / J: density of the rotational law.
inline double rot_density(const DiatomicParams& p) { return 2.0 * std::numbers::pi / p.inertia; }

/// (2 pi / J) ceil(I / delta_eps).
inline double phi_total(double energy, const DiatomicParams& p) {
  check(p);
  if (!(energy >= 0.0)) throw DomainError("phi_total: energy must be >= 0");
  return rot_density(p) * std::ceil(energy / p.delta_eps);
}

/// Cumulative of the staircase density, by summing whole stairs.
inline double cdf_total(double energy, const DiatomicParams& p) {
  check(p);
  if (!(energy >= 0.0)) throw DomainError("cdf_total: energy must be >= 0");
  const double y = energy / p.delta_eps;
  const double m = std::floor(y);
  return rot_density(p) * p.delta_eps * (0.5 * m * (m + 1.0) + (m + 1.0) * (y - m));
}

/// Stair index l(qh) = floor(4 qh / (sqrt(1 + 8 qh) + 1)): the number of whole stairs
/// below the requested mass, with a one-unit floating-point guard.
inline long long stair_count(double q_hat) {
  auto l = static_cast<long long>(std::floor(4.0 * q_hat / (std::sqrt(1.0 + 8.0 * q_hat) + 1.0)));
  const auto tri = [](long long n) { return 0.5 * static_cast<double>(n) * static_cast<double>(n + 1); };
  if (l > 0 && tri(l) > q_hat) --l;
  if (tri(l + 1) < q_hat) ++l;
  return l;
}

inline double quantile_total(double q, const DiatomicParams& p) {
  check(p);
  if (!(q > 0.0)) throw DomainError("quantile_total: q must be > 0");
  const double q_hat = p.inertia * q / (2.0 * std::numbers::pi * p.delta_eps);
  const auto l = static_cast<double>(stair_count(q_hat));
  return p.delta_eps * (q_hat / (l + 1.0) + 0.5 * l);
}

inline double quantile_rot(double q, const DiatomicParams& p) {
  check(p);
  if (!(q > 0.0)) throw DomainError("quantile_rot: q must be > 0");
  return p.inertia / (2.0 * std::numbers::pi) * q;
}

/// delta_eps * floor(q); differs from the left inverse only at integer q.
inline double quantile_vib(double q, const DiatomicParams& p) {
  check(p);
  if (!(q > 0.0)) throw DomainError("quantile_vib: q must be > 0");
  return p.delta_eps * std::floor(q);
}

inline EnergyLaw rot_law(const DiatomicParams& p, double horizon) {
  check(p);
  return EnergyLaw::constant_density(rot_density(p), horizon);
}

inline EnergyLaw vib_law(const DiatomicParams& p, double horizon) {
  check(p);
  return EnergyLaw::dirac_comb(p.delta_eps, 1.0, horizon);
}

inline EnergyLaw total_staircase(const DiatomicParams& p, double horizon) {
  check(p);
  return EnergyLaw::staircase(p.delta_eps, rot_density(p), horizon);
}

inline InternalModel model(const DiatomicParams& p) {
  check(p);
  return make_model({ClassicalQuadratic{2, {p.inertia, p.inertia}},
                     HarmonicOscillator{p.delta_eps}});
}

/// Vibrational contribution 2x / (e^x - 1), x = delta_eps / kT.
inline double vib_dof(double x) {
  if (x == 0.0) return 2.0;
  return 2.0 * x / std::expm1(x);
}

/// 3 + delta(T): translation 3, rotation 2, vibration 2x / (e^x - 1).
inline double dof_closed_form(double kT, const DiatomicParams& p) {
  return 3.0 + 2.0 + vib_dof(p.delta_eps / kT);
}

/// c_V(T) = 3/2 + 1 + x^2 e^x / (e^x - 1)^2.
inline double cv_closed_form(double kT, const DiatomicParams& p) {
  const double x = p.delta_eps / kT;
  double vib = 1.0;
  if (x > 0.0) {
    const double em = std::expm1(x);
    // x^2 e^x / (e^x-1)^2 = x^2 e^{-x} / (1-e^{-x})^2 avoids overflow at large x.
    const double emn = -std::expm1(-x);
    vib = x > 1.0 ? x * x * std::exp(-x) / (emn * emn) : x * x * (em + 1.0) / (em * em);
  }
  return 1.5 + 1.0 + vib;
}

}  // namespace polyquant::diatomic
