#pragma once

// Internal-state building blocks and their independent combination.

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "polyquant/energy_law.hpp"

namespace polyquant {

/// Quadratic kinetic energy 1/2 * sum c_i w_i^2 over d continuous coordinates.
struct ClassicalQuadratic {
  int dof = 2;
  std::vector<double> coeffs;
  friend bool operator==(const ClassicalQuadratic&, const ClassicalQuadratic&) = default;
};

/// Levels (n + 1/2) * delta_eps, n = 0, 1, ...
struct HarmonicOscillator {
  double delta_eps = 1.0;
  friend bool operator==(const HarmonicOscillator&, const HarmonicOscillator&) = default;
};

struct Level {
  double energy = 0.0;
  double degeneracy = 1.0;
  friend bool operator==(const Level&, const Level&) = default;
};

struct CustomDiscrete {
  std::vector<Level> levels;
  friend bool operator==(const CustomDiscrete&, const CustomDiscrete&) = default;
};

/// Grounded density given as (I, phi) knots; ground is the minimum energy.
struct CustomContinuous {
  std::vector<std::pair<double, double>> knots;
  double ground = 0.0;
  friend bool operator==(const CustomContinuous&, const CustomContinuous&) = default;
};

using StateComponent =
    std::variant<ClassicalQuadratic, HarmonicOscillator, CustomDiscrete, CustomContinuous>;

struct InternalModel {
  std::vector<StateComponent> components;
  double ground = 0.0;
  friend bool operator==(const InternalModel&, const InternalModel&) = default;
};

/// Numeric truncation settings for laws of infinite mass.
struct NumericPolicy {
  double i_max = 0.0;      // 0: chosen from beta_min
  double grid_step = 0.0;  // power-law windows and density*density grids; 0: automatic
  double beta_min = 0.1;   // smallest inverse temperature the caller will use

  /// Horizon where exp(-beta_min I) drops below 1e-14.
  double horizon() const {
    if (i_max > 0.0) return i_max;
    return -std::log(1e-14) / beta_min;
  }
  friend bool operator==(const NumericPolicy&, const NumericPolicy&) = default;
};

inline std::string component_name(const StateComponent& c) {
  switch (c.index()) {
    case 0:
      return "classical_quadratic";
    case 1:
      return "harmonic_oscillator";
    case 2:
      return "custom_discrete";
    default:
      return "custom_continuous";
  }
}

/// Empty string when valid, otherwise the violated invariant.
inline std::string check_component(const StateComponent& c) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, ClassicalQuadratic>) {
          if (x.dof < 1) return "dof must be at least 1";
          if (x.coeffs.size() != static_cast<std::size_t>(x.dof)) {
            return "coeffs must have exactly dof entries";
          }
          for (double v : x.coeffs) {
            if (!(std::isfinite(v) && v > 0.0)) return "coeffs must be positive";
          }
        } else if constexpr (std::is_same_v<T, HarmonicOscillator>) {
          if (!(std::isfinite(x.delta_eps) && x.delta_eps > 0.0)) {
            return "delta_eps must be positive";
          }
        } else if constexpr (std::is_same_v<T, CustomDiscrete>) {
          if (x.levels.empty()) return "levels must not be empty";
          for (std::size_t i = 0; i < x.levels.size(); ++i) {
            const auto& l = x.levels[i];
            if (!std::isfinite(l.energy)) return "level energies must be finite";
            if (!(std::isfinite(l.degeneracy) && l.degeneracy > 0.0)) {
              return "degeneracy must be positive";
            }
            if (i > 0 && !(x.levels[i - 1].energy < l.energy)) {
              return "levels must be strictly increasing";
            }
          }
        } else {
          if (x.knots.size() < 2) return "knots need at least two points";
          if (!std::isfinite(x.ground)) return "ground must be finite";
          if (x.knots.front().first != 0.0) return "knots must start at I = 0";
          for (std::size_t i = 0; i < x.knots.size(); ++i) {
            const auto& [e, f] = x.knots[i];
            if (!std::isfinite(e) || !std::isfinite(f)) return "knots must be finite";
            if (f < 0.0) return "density values must be nonnegative";
            if (i > 0 && !(x.knots[i - 1].first < e)) return "knots must be strictly increasing";
          }
        }
        return {};
      },
      c);
}

inline double ground_energy(const StateComponent& c) {
  return std::visit(
      [](const auto& x) -> double {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, ClassicalQuadratic>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, HarmonicOscillator>) {
          return 0.5 * x.delta_eps;
        } else if constexpr (std::is_same_v<T, CustomDiscrete>) {
          return x.levels.front().energy;
        } else {
          return x.ground;
        }
      },
      c);
}

/// Coefficient of I^(d/2 - 1) in the energy density of 1/2 * sum c_i w_i^2.
inline double quadratic_density_coefficient(const ClassicalQuadratic& q) {
  const double half = 0.5 * q.dof;
  double log_prod = 0.0;
  for (double c : q.coeffs) log_prod += std::log(c);
  return std::exp(half * std::log(2.0 * std::numbers::pi) - std::lgamma(half) - 0.5 * log_prod);
}

/// Grounded energy law of one component.
inline EnergyLaw component_law(const StateComponent& c, const NumericPolicy& policy = {}) {
  if (auto msg = check_component(c); !msg.empty()) {
    throw DomainError(component_name(c) + ": " + msg);
  }
  const double horizon = policy.horizon();
  return std::visit(
      [&](const auto& x) -> EnergyLaw {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, ClassicalQuadratic>) {
          const double coef = quadratic_density_coefficient(x);
          if (x.dof == 2) return EnergyLaw::constant_density(coef, horizon);
          return EnergyLaw::power_density(coef, 0.5 * x.dof - 1.0, horizon, policy.grid_step);
        } else if constexpr (std::is_same_v<T, HarmonicOscillator>) {
          return EnergyLaw::dirac_comb(x.delta_eps, 1.0, horizon);
        } else if constexpr (std::is_same_v<T, CustomDiscrete>) {
          std::vector<Atom> atoms;
          const double e0 = x.levels.front().energy;
          for (const auto& l : x.levels) atoms.push_back({l.energy - e0, l.degeneracy});
          return EnergyLaw::discrete(std::move(atoms));
        } else {
          return EnergyLaw::piecewise_linear(x.knots);
        }
      },
      c);
}

inline InternalModel make_model(std::vector<StateComponent> components) {
  if (components.empty()) throw DomainError("at least one component required");
  InternalModel m;
  m.components = std::move(components);
  for (const auto& c : m.components) m.ground += ground_energy(c);
  return m;
}

/// Independent combination: component lists concatenated, grounds added.
inline InternalModel combine(const std::vector<InternalModel>& models) {
  if (models.empty()) throw DomainError("combine: at least one model required");
  if (models.size() == 1) return models.front();
  InternalModel out;
  for (const auto& m : models) {
    out.components.insert(out.components.end(), m.components.begin(), m.components.end());
    out.ground += m.ground;
  }
  return out;
}

inline ConvolutionOptions convolution_options(const NumericPolicy& policy) {
  ConvolutionOptions opt;
  opt.grid_step = policy.grid_step;
  opt.max_horizon = policy.horizon();
  return opt;
}

/// Energy law of the whole model: left fold of convolutions over the components.
inline EnergyLaw total_law(const InternalModel& m, const NumericPolicy& policy = {}) {
  if (m.components.empty()) throw DomainError("at least one component required");
  EnergyLaw law = component_law(m.components.front(), policy);
  const auto opt = convolution_options(policy);
  for (std::size_t i = 1; i < m.components.size(); ++i) {
    law = convolve(law, component_law(m.components[i], policy), opt);
  }
  return law;
}

/// Sum of per-component quantiles plus the total ground energy.
inline double separated_quantile_energy(const InternalModel& m, const std::vector<double>& qs,
                                        const NumericPolicy& policy = {}) {
  if (qs.size() != m.components.size()) {
    throw DomainError("separated_quantile_energy: expected " +
                      std::to_string(m.components.size()) + " quantile values");
  }
  detail::CompensatedSum e;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    e.add(quantile(component_law(m.components[i], policy), qs[i]));
  }
  e.add(m.ground);
  return e.value();
}

}  // namespace polyquant
