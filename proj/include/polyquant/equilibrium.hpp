#pragma once

// Equilibrium thermodynamics of an energy law: Boltzmann moments, partition function,
// degrees of freedom, heat capacity, Maxwellian, temperature from energy.

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "polyquant/energy_law.hpp"

namespace polyquant {

struct UnitsConfig {
  double k_B = 1.0;
};

struct EquilibriumParams {
  double rho = 1.0;
  std::array<double, 3> u{0.0, 0.0, 0.0};
  double T = 1.0;
};

struct ThermoCurve {
  std::string quantity;
  std::string units;
  std::vector<std::pair<double, double>> samples;  // (T, value)
};

/// m_k = integral of I^k exp(-beta I) dmu, k = 0, 1, 2.
struct BoltzmannMoments {
  double m0 = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
  double horizon = 0.0;
  std::string route;  // "quadrature" or "laplace"
};

namespace detail {

inline void check_units(const UnitsConfig& u) {
  if (!(u.k_B > 0.0 && std::isfinite(u.k_B))) throw DomainError("k_B must be positive");
}

inline double beta_of(double T, const UnitsConfig& units) {
  check_units(units);
  if (!(T > 0.0 && std::isfinite(T))) throw DomainError("temperature must be positive");
  return 1.0 / (units.k_B * T);
}

// Laplace-transform moments of the tagged forms.
inline BoltzmannMoments laplace_power(double coef, double p, double beta) {
  BoltzmannMoments m;
  const auto mk = [&](int k) {
    return coef * std::exp(std::lgamma(p + k + 1.0) - (p + k + 1.0) * std::log(beta));
  };
  m.m0 = mk(0);
  m.m1 = mk(1);
  m.m2 = mk(2);
  return m;
}

inline BoltzmannMoments laplace_comb(double spacing, double weight, double beta) {
  const double r = std::exp(-beta * spacing);
  const double om = -std::expm1(-beta * spacing);
  BoltzmannMoments m;
  m.m0 = weight / om;
  m.m1 = weight * spacing * r / (om * om);
  m.m2 = weight * spacing * spacing * r * (1.0 + r) / (om * om * om);
  return m;
}

inline BoltzmannMoments laplace_staircase(const StaircaseDensity& s, double beta) {
  // slope * ceil(I/step) is the constant density slope convolved with a unit comb.
  const BoltzmannMoments a = laplace_power(s.slope, 0.0, beta);
  const BoltzmannMoments b = laplace_comb(s.step, 1.0, beta);
  BoltzmannMoments m;
  m.m0 = a.m0 * b.m0;
  m.m1 = a.m1 * b.m0 + a.m0 * b.m1;
  m.m2 = a.m2 * b.m0 + 2.0 * a.m1 * b.m1 + a.m0 * b.m2;
  return m;
}

/// Shifted copies of one power law: each shift a contributes e^{-beta a} times the
/// moments of the unshifted power law re-centred at a.
inline BoltzmannMoments laplace_shifted_power(const ShiftedPowerSum& f, double beta) {
  const BoltzmannMoments P = laplace_power(f.coefficient, f.exponent, beta);
  CompensatedSum m0, m1, m2;
  for (const auto& s : f.shifts) {
    const double w = s.weight * std::exp(-beta * s.location);
    const double a = s.location;
    m0.add(w * P.m0);
    m1.add(w * (P.m1 + a * P.m0));
    m2.add(w * (P.m2 + 2.0 * a * P.m1 + a * a * P.m0));
  }
  BoltzmannMoments m;
  m.m0 = m0.value();
  m.m1 = m1.value();
  m.m2 = m2.value();
  return m;
}

inline Vec<3> integrate_moments(const EnergyLaw& law, double beta, double horizon) {
  IntegrationOptions opt;
  opt.abs_tol = 1e-16;
  opt.rel_tol = 1e-14;
  opt.panel_width = 2.0 / beta;
  return integrate_vec<3>(
      law,
      [beta](double x) {
        const double w = std::exp(-beta * x);
        return Vec<3>{w, x * w, x * x * w};
      },
      horizon, opt);
}

inline constexpr double kPieceBudget = 1e5;
inline constexpr double kTailRel = 1e-14;

}  // namespace detail

/// Boltzmann moments with automatic horizon control.
inline BoltzmannMoments boltzmann_moments(const EnergyLaw& law, double beta) {
  if (!(beta > 0.0 && std::isfinite(beta))) throw DomainError("beta must be positive");

  // Pieces a quadrature pass would visit out to the starting horizon.
  double step = 0.0;
  if (const auto* s = std::get_if<StaircaseDensity>(&law.form())) step = s->step;
  if (const auto* c = std::get_if<DiracComb>(&law.form())) step = c->spacing;
  if (step > 0.0 && 80.0 / (beta * step) > detail::kPieceBudget) {
    BoltzmannMoments m;
    if (const auto* s = std::get_if<StaircaseDensity>(&law.form())) {
      m = detail::laplace_staircase(*s, beta);
    } else {
      const auto& c = std::get<DiracComb>(law.form());
      m = detail::laplace_comb(c.spacing, c.weight, beta);
    }
    m.horizon = std::numeric_limits<double>::infinity();
    m.route = "laplace";
    return m;
  }

  if (const auto* sp = std::get_if<ShiftedPowerSum>(&law.form())) {
    BoltzmannMoments m = detail::laplace_shifted_power(*sp, beta);
    m.route = "laplace";
    m.horizon = sp->exact_below;
    if (std::isfinite(sp->exact_below)) {
      // Shifts beyond exact_below are unknown; judge them by the weight of the last stretch.
      const double lo = std::max(0.0, sp->exact_below - 2.0 / beta);
      double last = 0.0;
      double all = 0.0;
      for (const auto& s : sp->shifts) {
        const double w = s.weight * std::exp(-beta * s.location);
        all += w;
        if (s.location > lo) last += w;
      }
      if (last >= 0.5 * all) {
        throw DivergenceError("Boltzmann-weighted shifts are not decaying at " +
                              detail::fmt(sp->exact_below));
      }
      if (last > 1e-9 * all) {
        throw TruncationError("window i_max=" + detail::fmt(sp->exact_below) +
                              " is too short for beta=" + detail::fmt(beta) +
                              "; increase i_max or beta_min");
      }
    }
    return m;
  }

  BoltzmannMoments out;
  out.route = "quadrature";
  const auto store = [&](const detail::Vec<3>& v, double h) {
    if (!(std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]))) {
      throw DivergenceError("partition function diverges (non-finite Boltzmann moments)");
    }
    out.m0 = v[0];
    out.m1 = v[1];
    out.m2 = v[2];
    out.horizon = h;
  };

  if (!law.has_form()) {
    if (law.tail() == Tail::closed) {
      const double h = law.i_max() * 2.0 + 1.0;
      store(detail::integrate_moments(law, beta, h), h);
      return out;
    }
    // Truncated window: integrate what exists, then judge the missing tail.
    const double top = law.i_max();
    const double h = std::min(top, 40.0 / beta);
    store(detail::integrate_moments(law, beta, h), h);
    if (h < top) {
      const auto wider = detail::integrate_moments(law, beta, std::min(top, 2.0 * h));
      if (std::abs(wider[0] - out.m0) <= detail::kTailRel * out.m0 &&
          std::abs(wider[2] - out.m2) <= detail::kTailRel * out.m2) {
        return out;
      }
      store(detail::integrate_moments(law, beta, top), top);
    }
    const double lo = std::max(0.0, top - 2.0 / beta);
    const double last = (law.window_cdf(top) - law.window_cdf(lo)) * std::exp(-beta * lo);
    if (!(out.m0 > 0.0)) throw DivergenceError("partition function vanishes on the window");
    if (last >= 0.5 * out.m0) {
      throw DivergenceError("Boltzmann-weighted mass is not decaying at the window end i_max=" +
                            detail::fmt(top) + "; the partition function likely diverges");
    }
    if (last > 1e-9 * out.m0) {
      throw TruncationError("window i_max=" + detail::fmt(top) +
                            " is too short for beta=" + detail::fmt(beta) +
                            "; increase i_max or beta_min");
    }
    return out;
  }

  double h = 40.0 / beta;
  store(detail::integrate_moments(law, beta, h), h);
  for (int iter = 0; iter < 8; ++iter) {
    const double h2 = 2.0 * h;
    const auto wider = detail::integrate_moments(law, beta, h2);
    const bool settled = std::abs(wider[0] - out.m0) <= detail::kTailRel * std::abs(wider[0]) &&
                         std::abs(wider[1] - out.m1) <= detail::kTailRel * std::abs(wider[1]) &&
                         std::abs(wider[2] - out.m2) <= detail::kTailRel * std::abs(wider[2]);
    store(wider, h2);
    if (settled) return out;
    h = h2;
  }
  throw DivergenceError("partition function tail does not settle");
}

inline double partition_function(const EnergyLaw& law, double beta) {
  return boltzmann_moments(law, beta).m0;
}

/// 3 + delta(T), delta = 2 beta <I> under the tilted law.
inline double degrees_of_freedom(const EnergyLaw& law, double T, const UnitsConfig& units = {}) {
  const double beta = detail::beta_of(T, units);
  const auto m = boltzmann_moments(law, beta);
  return 3.0 + 2.0 * beta * m.m1 / m.m0;
}

/// 3 - 2 beta (log Z)'(beta) with a central difference, relative step 1e-5.
inline double degrees_of_freedom_log_derivative(const EnergyLaw& law, double T,
                                                const UnitsConfig& units = {}) {
  const double beta = detail::beta_of(T, units);
  const double eta = 1e-5;
  const double bp = beta * (1.0 + eta);
  const double bm = beta * (1.0 - eta);
  const double dlog = (std::log(partition_function(law, bp)) - std::log(partition_function(law, bm))) /
                      (bp - bm);
  return 3.0 - 2.0 * beta * dlog;
}

/// c_V = 3/2 + 1/2 d(T delta)/dT by a central difference with step 1e-4 T.
inline double heat_capacity(const EnergyLaw& law, double T, const UnitsConfig& units = {}) {
  detail::beta_of(T, units);
  const double h = 1e-4 * T;
  const auto t_delta = [&](double t) { return t * (degrees_of_freedom(law, t, units) - 3.0); };
  return 1.5 + 0.5 * (t_delta(T + h) - t_delta(T - h)) / (2.0 * h);
}

/// c_V = 3/2 + beta^2 Var(I) under the tilted law.
inline double heat_capacity_fluctuation(const EnergyLaw& law, double T,
                                        const UnitsConfig& units = {}) {
  const double beta = detail::beta_of(T, units);
  const auto m = boltzmann_moments(law, beta);
  const double mean = m.m1 / m.m0;
  const double var = std::max(0.0, m.m2 / m.m0 - mean * mean);
  return 1.5 + beta * beta * var;
}

inline void check_params(const EquilibriumParams& p) {
  if (!(p.rho > 0.0 && std::isfinite(p.rho))) throw DomainError("rho must be positive");
  if (!(p.T > 0.0 && std::isfinite(p.T))) throw DomainError("temperature must be positive");
  for (double c : p.u) {
    if (!std::isfinite(c)) throw DomainError("bulk velocity must be finite");
  }
}

inline double maxwellian_density(const std::array<double, 3>& v, const EquilibriumParams& p,
                                 const UnitsConfig& units = {}) {
  check_params(p);
  detail::check_units(units);
  const double kT = units.k_B * p.T;
  double c2 = 0.0;
  for (int i = 0; i < 3; ++i) c2 += (v[i] - p.u[i]) * (v[i] - p.u[i]);
  return p.rho * std::pow(2.0 * std::numbers::pi * kT, -1.5) * std::exp(-c2 / (2.0 * kT));
}

/// Mean energy per particle (3 + delta(T)) k_B T / 2, plus ground unless grounded.
inline double mean_energy(const EnergyLaw& law, double T, const UnitsConfig& units = {},
                          double ground = 0.0) {
  return 0.5 * degrees_of_freedom(law, T, units) * units.k_B * T + ground;
}

/// Inverts the grounded mean energy per particle by bisection.
inline double temperature_from_energy(const EnergyLaw& law, double e_per_particle,
                                      const UnitsConfig& units = {}) {
  detail::check_units(units);
  if (!(e_per_particle > 0.0 && std::isfinite(e_per_particle))) {
    throw DomainError("energy per particle must be positive");
  }
  const auto f = [&](double T) { return mean_energy(law, T, units) - e_per_particle; };
  // delta >= 0 gives e >= 3/2 k_B T.
  double hi = 2.0 * e_per_particle / (3.0 * units.k_B);
  double fhi = f(hi);
  double lo = hi;
  double flo = fhi;
  int halvings = 0;
  while (flo >= 0.0) {
    if (++halvings > 200) {
      throw SolverError("temperature_from_energy: no lower bracket below T=" + detail::fmt(hi));
    }
    hi = lo;
    fhi = flo;
    lo *= 0.5;
    flo = f(lo);
  }
  if (fhi < 0.0) {
    throw SolverError("temperature_from_energy: bracket [" + detail::fmt(lo) + ", " +
                      detail::fmt(hi) + "] does not enclose the root");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (std::abs(fm) <= 1e-12 * e_per_particle || hi - lo <= 1e-15 * hi) return mid;
    if (fm < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double T = 0.5 * (lo + hi);
  if (std::abs(f(T)) > 1e-10 * e_per_particle) {
    throw SolverError("temperature_from_energy: bisection stalled in [" + detail::fmt(lo) + ", " +
                      detail::fmt(hi) + "]");
  }
  return T;
}

template <class F>
ThermoCurve thermo_curve(std::string quantity, std::string units_label,
                         const std::vector<double>& temps, F&& value) {
  ThermoCurve c{std::move(quantity), std::move(units_label), {}};
  for (std::size_t i = 0; i < temps.size(); ++i) {
    if (!(temps[i] > 0.0) || (i > 0 && !(temps[i - 1] < temps[i]))) {
      throw DomainError("curve temperatures must be positive and strictly increasing");
    }
    c.samples.emplace_back(temps[i], value(temps[i]));
  }
  return c;
}

inline std::vector<double> log_spaced(double start, double stop, int points) {
  if (!(start > 0.0 && stop >= start) || points < 1) {
    throw DomainError("log_spaced: need 0 < start <= stop and at least one point");
  }
  std::vector<double> out;
  if (points == 1) return {start};
  const double a = std::log(start);
  const double b = std::log(stop);
  for (int i = 0; i < points; ++i) {
    out.push_back(i == 0 ? start : i + 1 == points ? stop : std::exp(a + (b - a) * i / (points - 1)));
  }
  return out;
}

}  // namespace polyquant
