#pragma once

// Energy laws: nonnegative measures on [0, +inf) made of weighted Dirac atoms plus a
// piecewise-linear density, optionally tagged with an exact closed form.
//
// Cumulative convention is half-open: cdf(I) = mu([0, I)), so an atom located at I is
// not counted in cdf(I). The quantile is the left generalized inverse of cdf.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "polyquant/detail/numerics.hpp"
#include "polyquant/errors.hpp"

namespace polyquant {

struct Atom {
  double location = 0.0;
  double weight = 0.0;
  friend bool operator==(const Atom&, const Atom&) = default;
};

/// Linear density piece on [lo, hi] with endpoint values f_lo, f_hi.
/// Neighbouring segments need not agree at shared ends, which lets jumps be exact.
struct Segment {
  double lo = 0.0;
  double hi = 0.0;
  double f_lo = 0.0;
  double f_hi = 0.0;

  double length() const { return hi - lo; }
  double slope() const { return (f_hi - f_lo) / (hi - lo); }
  double value_at(double x) const { return f_lo + (f_hi - f_lo) * ((x - lo) / (hi - lo)); }
  double mass() const { return 0.5 * (f_lo + f_hi) * (hi - lo); }
  /// Mass of [lo, x].
  double mass_below(double x) const {
    if (x <= lo) return 0.0;
    if (x >= hi) return mass();
    return 0.5 * (f_lo + value_at(x)) * (x - lo);
  }
  /// Smallest offset t in [0, length] with mass of [lo, lo + t] equal to r.
  double invert_mass(double r) const {
    if (r <= 0.0) return 0.0;
    const double k = slope();
    const double disc = f_lo * f_lo + 2.0 * k * r;
    const double root = std::sqrt(std::max(0.0, disc));
    const double denom = f_lo + root;
    if (!(denom > 0.0)) return length();
    return std::min(length(), 2.0 * r / denom);
  }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// phi(I) = value.
struct ConstantDensity {
  double value = 0.0;
};
/// phi(I) = slope * ceil(I / step).
struct StaircaseDensity {
  double step = 0.0;
  double slope = 0.0;
};
/// phi(I) = coefficient * I^exponent, exponent > -1.
struct PowerDensity {
  double coefficient = 0.0;
  double exponent = 0.0;
};
/// Sum over n >= 0 of weight * delta_{n * spacing}.
struct DiracComb {
  double spacing = 0.0;
  double weight = 1.0;
};

/// phi(I) = coefficient * sum_j w_j (I - a_j)_+^exponent: a power density convolved with
/// atoms. Exact for I <= exact_below; beyond it the shift list may be incomplete.
struct ShiftedPowerSum {
  double coefficient = 0.0;
  double exponent = 0.0;
  std::vector<Atom> shifts;
  double exact_below = std::numeric_limits<double>::infinity();
};

using AnalyticForm = std::variant<std::monostate, ConstantDensity, StaircaseDensity, PowerDensity,
                                  DiracComb, ShiftedPowerSum>;

/// Whether the measure is known to vanish beyond the numeric window (closed) or the
/// window is a truncation of a measure that continues past i_max (truncated).
enum class Tail { closed, truncated };

/// Extended nonnegative mass. lower_bound is set when only a truncated window is known.
struct MassValue {
  double value = 0.0;
  bool lower_bound = false;
  bool is_infinite() const { return std::isinf(value); }
};

struct Diagnostics {
  bool ok = true;
  std::string message;
  std::vector<std::string> notes;
};

namespace detail {

inline std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

/// Number of n >= 0 with n * spacing < x - tol(x).
inline long long comb_count_below(double spacing, double x) {
  const double bound = x - location_tolerance(x);
  if (!(bound > 0.0)) return 0;
  long long k = static_cast<long long>(std::ceil(bound / spacing));
  while (k > 0 && static_cast<double>(k - 1) * spacing >= bound) --k;
  while (static_cast<double>(k) * spacing < bound) ++k;
  return k;
}

/// m with m * step <= x < (m + 1) * step.
inline long long stair_index(double step, double x) {
  long long m = static_cast<long long>(std::floor(x / step));
  while (m > 0 && static_cast<double>(m) * step > x) --m;
  while (static_cast<double>(m + 1) * step <= x) ++m;
  return m;
}

inline double stair_cdf_at_index(const StaircaseDensity& s, long long m) {
  const double md = static_cast<double>(m);
  return s.slope * s.step * 0.5 * md * (md + 1.0);
}

}  // namespace detail

class EnergyLaw {
 public:
  /// The zero measure.
  EnergyLaw() : EnergyLaw({}, {}, 0.0, Tail::closed) {}

  /// Raw constructor; does not validate. Use validate() before trusting the value.
  EnergyLaw(std::vector<Atom> atoms, std::vector<Segment> segments, double i_max, Tail tail,
            AnalyticForm form = {}, std::vector<std::string> notes = {})
      : atoms_(std::move(atoms)),
        segments_(std::move(segments)),
        i_max_(i_max),
        tail_(tail),
        form_(std::move(form)),
        notes_(std::move(notes)) {
    build_index();
  }

  static EnergyLaw dirac(double location, double weight = 1.0) {
    return EnergyLaw({{location, weight}}, {}, location, Tail::closed);
  }

  /// Finite discrete law; atoms must be sorted.
  static EnergyLaw discrete(std::vector<Atom> atoms) {
    double top = 0.0;
    for (const auto& a : atoms) top = std::max(top, a.location);
    return EnergyLaw(std::move(atoms), {}, top, Tail::closed);
  }

  /// Continuous piecewise-linear density through (I, phi) knots, zero beyond the last knot.
  static EnergyLaw piecewise_linear(std::span<const std::pair<double, double>> knots) {
    std::vector<Segment> segs;
    for (std::size_t i = 1; i < knots.size(); ++i) {
      const auto& [x0, f0] = knots[i - 1];
      const auto& [x1, f1] = knots[i];
      if (f0 == 0.0 && f1 == 0.0 && x1 > x0) continue;
      segs.push_back({x0, x1, f0, f1});
    }
    const double top = knots.empty() ? 0.0 : knots.back().first;
    return EnergyLaw({}, std::move(segs), top, Tail::closed);
  }

  static EnergyLaw constant_density(double value, double horizon) {
    std::vector<Segment> segs;
    if (horizon > 0.0) segs.push_back({0.0, horizon, value, value});
    return EnergyLaw({}, std::move(segs), horizon, Tail::truncated, ConstantDensity{value},
                     {window_note(horizon)});
  }

  static EnergyLaw staircase(double step, double slope, double horizon) {
    std::vector<Segment> segs;
    for (long long m = 0; static_cast<double>(m) * step < horizon; ++m) {
      const double lo = static_cast<double>(m) * step;
      const double hi = std::min(static_cast<double>(m + 1) * step, horizon);
      const double v = slope * static_cast<double>(m + 1);
      if (hi > lo) segs.push_back({lo, hi, v, v});
    }
    return EnergyLaw({}, std::move(segs), horizon, Tail::truncated,
                     StaircaseDensity{step, slope}, {window_note(horizon)});
  }

  /// Window is exact for exponent 0 or 1; otherwise interpolated on a uniform grid.
  /// For negative exponents the first cell carries its exact mass as a constant value.
  static EnergyLaw power_density(double coefficient, double exponent, double horizon,
                                 double grid_step) {
    std::vector<Segment> segs;
    std::vector<std::string> notes{window_note(horizon)};
    const auto phi = [&](double x) { return coefficient * std::pow(x, exponent); };
    if (horizon > 0.0) {
      if (exponent == 0.0 || exponent == 1.0) {
        segs.push_back({0.0, horizon, phi(0.0), phi(horizon)});
      } else {
        const double h = grid_step > 0.0 ? grid_step : horizon / 4096.0;
        const auto cells = static_cast<long long>(std::ceil(horizon / h));
        for (long long i = 0; i < cells; ++i) {
          const double lo = static_cast<double>(i) * h;
          const double hi = std::min(static_cast<double>(i + 1) * h, horizon);
          if (!(hi > lo)) continue;
          if (i == 0 && exponent < 0.0) {
            const double m = coefficient * std::pow(hi, exponent + 1.0) / (exponent + 1.0);
            segs.push_back({lo, hi, m / hi, m / hi});
          } else {
            segs.push_back({lo, hi, phi(lo), phi(hi)});
          }
        }
        notes.push_back("power-law window interpolated on uniform grid h=" + detail::fmt(h));
      }
    }
    return EnergyLaw({}, std::move(segs), horizon, Tail::truncated,
                     PowerDensity{coefficient, exponent}, std::move(notes));
  }

  static EnergyLaw dirac_comb(double spacing, double weight, double horizon) {
    std::vector<Atom> atoms;
    for (long long n = 0;; ++n) {
      const double x = static_cast<double>(n) * spacing;
      if (x > horizon + detail::location_tolerance(horizon)) break;
      atoms.push_back({x, weight});
    }
    return EnergyLaw(std::move(atoms), {}, horizon, Tail::truncated, DiracComb{spacing, weight},
                     {window_note(horizon)});
  }

  /// Window nodes are the union of a uniform grid and the shift locations, with exact
  /// form values at every node. Limited to exact_below.
  static EnergyLaw shifted_power_sum(ShiftedPowerSum form, double horizon, double grid_step,
                                     std::vector<std::string> notes = {}) {
    const double top = std::min(horizon, form.exact_below);
    std::vector<Segment> segs;
    if (top > 0.0) {
      const double h = grid_step > 0.0 ? grid_step : top / 4096.0;
      std::vector<double> nodes;
      const auto cells = static_cast<long long>(std::ceil(top / h));
      for (long long i = 0; i <= cells; ++i) nodes.push_back(std::min(top, static_cast<double>(i) * h));
      for (const auto& a : form.shifts) {
        if (a.location < top) nodes.push_back(a.location);
      }
      std::sort(nodes.begin(), nodes.end());
      nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
      const double C = form.coefficient;
      const double p = form.exponent;
      // Left and right limits of the density at x.
      const auto limits = [&](double x, double& left, double& right) {
        left = right = 0.0;
        for (const auto& a : form.shifts) {
          if (a.location > x) break;
          const double d = x - a.location;
          const double v = (d == 0.0) ? (p == 0.0 ? 1.0 : 0.0) : std::pow(d, p);
          right += a.weight * v;
          if (d > 0.0) left += a.weight * v;
        }
        left *= C;
        right *= C;
      };
      for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        const double lo = nodes[i];
        const double hi = nodes[i + 1];
        double l0 = 0, r0 = 0, l1 = 0, r1 = 0;
        limits(lo, l0, r0);
        limits(hi, l1, r1);
        if (p < 0.0) {
          // Singular start after a shift: use the exact cell mass.
          double mass = 0.0;
          for (const auto& a : form.shifts) {
            if (a.location >= hi) break;
            const double top_d = hi - a.location;
            const double lo_d = std::max(0.0, lo - a.location);
            mass += a.weight * (std::pow(top_d, p + 1.0) - std::pow(lo_d, p + 1.0));
          }
          mass *= C / (p + 1.0);
          bool singular = false;
          for (const auto& a : form.shifts) singular = singular || a.location == lo;
          if (singular) {
            segs.push_back({lo, hi, mass / (hi - lo), mass / (hi - lo)});
            continue;
          }
        }
        if (r0 > 0.0 || l1 > 0.0) segs.push_back({lo, hi, r0, l1});
      }
    }
    notes.push_back("numeric window truncated at i_max=" + detail::fmt(top));
    return EnergyLaw({}, std::move(segs), top, Tail::truncated, std::move(form), std::move(notes));
  }

  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<Segment>& segments() const { return segments_; }
  double i_max() const { return i_max_; }
  Tail tail() const { return tail_; }
  const AnalyticForm& form() const { return form_; }
  bool has_form() const { return !std::holds_alternative<std::monostate>(form_); }
  const std::vector<std::string>& notes() const { return notes_; }

  /// Same numeric window without the closed form.
  EnergyLaw numeric_only() const {
    if (!has_form()) return *this;
    auto notes = notes_;
    notes.push_back("analytic form dropped");
    return EnergyLaw(atoms_, segments_, i_max_, Tail::truncated, {}, std::move(notes));
  }

  EnergyLaw with_note(std::string note) const {
    auto notes = notes_;
    notes.push_back(std::move(note));
    return EnergyLaw(atoms_, segments_, i_max_, tail_, form_, std::move(notes));
  }

  EnergyLaw scaled(double factor) const {
    auto atoms = atoms_;
    for (auto& a : atoms) a.weight *= factor;
    auto segs = segments_;
    for (auto& s : segs) {
      s.f_lo *= factor;
      s.f_hi *= factor;
    }
    AnalyticForm form = std::visit(
        [factor](auto f) -> AnalyticForm {
          using T = decltype(f);
          if constexpr (std::is_same_v<T, ConstantDensity>) {
            f.value *= factor;
          } else if constexpr (std::is_same_v<T, StaircaseDensity>) {
            f.slope *= factor;
          } else if constexpr (std::is_same_v<T, PowerDensity>) {
            f.coefficient *= factor;
          } else if constexpr (std::is_same_v<T, DiracComb>) {
            f.weight *= factor;
          } else if constexpr (std::is_same_v<T, ShiftedPowerSum>) {
            f.coefficient *= factor;
          }
          return f;
        },
        form_);
    return EnergyLaw(std::move(atoms), std::move(segs), i_max_, tail_, form, notes_);
  }

  /// Rebuilds the numeric window of a tagged law on [0, horizon]. Untagged laws are
  /// returned unchanged.
  EnergyLaw with_window(double horizon, double grid_step = 0.0) const {
    return std::visit(
        [&](const auto& f) -> EnergyLaw {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, ConstantDensity>) {
            return constant_density(f.value, horizon);
          } else if constexpr (std::is_same_v<T, StaircaseDensity>) {
            return staircase(f.step, f.slope, horizon);
          } else if constexpr (std::is_same_v<T, PowerDensity>) {
            return power_density(f.coefficient, f.exponent, horizon, grid_step);
          } else if constexpr (std::is_same_v<T, DiracComb>) {
            return dirac_comb(f.spacing, f.weight, horizon);
          } else if constexpr (std::is_same_v<T, ShiftedPowerSum>) {
            return shifted_power_sum(f, horizon, grid_step);
          } else {
            return *this;
          }
        },
        form_);
  }

  // ---- numeric-window evaluation (ignores the analytic form) ----

  double window_mass() const { return bp_x_.empty() ? 0.0 : bp_right_.back(); }

  /// mu([0, x)) from the window. x beyond i_max returns the window mass.
  double window_cdf(double x) const {
    if (!(x > 0.0) || bp_x_.empty()) return 0.0;
    const auto it = std::lower_bound(bp_x_.begin(), bp_x_.end(), x);
    if (it == bp_x_.begin()) return 0.0;
    const auto j = static_cast<std::size_t>(it - bp_x_.begin()) - 1;
    double c = bp_left_[j];
    if (x - bp_x_[j] > detail::location_tolerance(x)) c += bp_atom_[j];
    if (bp_seg_[j] >= 0) {
      const Segment& s = segments_[static_cast<std::size_t>(bp_seg_[j])];
      const double upper = std::min(x, bp_x_[j + 1]);
      c += s.mass_below(upper) - s.mass_below(bp_x_[j]);
    }
    return c;
  }

  /// Density from the window, left-continuous; at x = 0 the right value.
  double window_density(double x) const {
    if (x < 0.0 || bp_x_.empty()) return 0.0;
    if (x == 0.0) {
      for (const auto& s : segments_) {
        if (s.lo == 0.0) return s.f_lo;
      }
      return 0.0;
    }
    const auto it = std::lower_bound(bp_x_.begin(), bp_x_.end(), x);
    if (it == bp_x_.begin()) return 0.0;
    const auto j = static_cast<std::size_t>(it - bp_x_.begin()) - 1;
    if (bp_seg_[j] < 0) return 0.0;
    return segments_[static_cast<std::size_t>(bp_seg_[j])].value_at(x);
  }

  /// Left generalized inverse on the window; nullopt when q exceeds the window mass.
  std::optional<double> window_quantile(double q) const {
    if (bp_x_.empty()) return std::nullopt;
    const auto it = std::lower_bound(bp_right_.begin(), bp_right_.end(), q);
    if (it == bp_right_.end()) return std::nullopt;
    const auto j = static_cast<std::size_t>(it - bp_right_.begin());
    if (j > 0 && q <= bp_left_[j]) {
      const int si = bp_seg_[j - 1];
      if (si < 0) return bp_x_[j];
      const Segment& s = segments_[static_cast<std::size_t>(si)];
      const double start = bp_x_[j - 1];
      const double r = q - bp_right_[j - 1];
      const double base = s.mass_below(start);
      // Invert within the part of the segment that starts at this breakpoint.
      const double t = s.invert_mass(base + r);
      return std::clamp(s.lo + t, start, bp_x_[j]);
    }
    return bp_x_[j];
  }

 private:
  static std::string window_note(double horizon) {
    return "numeric window truncated at i_max=" + detail::fmt(horizon);
  }

  void build_index() {
    bp_x_.clear();
    for (const auto& a : atoms_) bp_x_.push_back(a.location);
    for (const auto& s : segments_) {
      bp_x_.push_back(s.lo);
      bp_x_.push_back(s.hi);
    }
    std::sort(bp_x_.begin(), bp_x_.end());
    bp_x_.erase(std::unique(bp_x_.begin(), bp_x_.end()), bp_x_.end());
    const std::size_t n = bp_x_.size();
    bp_atom_.assign(n, 0.0);
    bp_seg_.assign(n, -1);
    bp_left_.assign(n, 0.0);
    bp_right_.assign(n, 0.0);
    for (const auto& a : atoms_) {
      const auto it = std::lower_bound(bp_x_.begin(), bp_x_.end(), a.location);
      if (it != bp_x_.end() && *it == a.location) {
        bp_atom_[static_cast<std::size_t>(it - bp_x_.begin())] += a.weight;
      }
    }
    for (std::size_t si = 0; si < segments_.size(); ++si) {
      const Segment& s = segments_[si];
      auto it = std::lower_bound(bp_x_.begin(), bp_x_.end(), s.lo);
      for (auto j = static_cast<std::size_t>(it - bp_x_.begin()); j + 1 < n && bp_x_[j] < s.hi;
           ++j) {
        if (bp_seg_[j] < 0) bp_seg_[j] = static_cast<int>(si);
      }
    }
    detail::CompensatedSum acc;
    for (std::size_t j = 0; j < n; ++j) {
      bp_left_[j] = acc.value();
      acc.add(bp_atom_[j]);
      bp_right_[j] = acc.value();
      if (j + 1 < n && bp_seg_[j] >= 0) {
        const Segment& s = segments_[static_cast<std::size_t>(bp_seg_[j])];
        acc.add(s.mass_below(bp_x_[j + 1]) - s.mass_below(bp_x_[j]));
      }
    }
  }

  std::vector<Atom> atoms_;
  std::vector<Segment> segments_;
  double i_max_ = 0.0;
  Tail tail_ = Tail::closed;
  AnalyticForm form_;
  std::vector<std::string> notes_;

  // Sorted breakpoints with cumulative masses: left excludes the atom at the
  // breakpoint, right includes it. bp_seg_[j] covers (bp_x_[j], bp_x_[j + 1]).
  std::vector<double> bp_x_;
  std::vector<double> bp_atom_;
  std::vector<int> bp_seg_;
  std::vector<double> bp_left_;
  std::vector<double> bp_right_;
};

// ---------------------------------------------------------------------------
// Closed-form evaluation of the analytic tags.

namespace detail {

inline double sps_cdf(const ShiftedPowerSum& f, double x) {
  CompensatedSum c;
  for (const auto& a : f.shifts) {
    if (!(a.location < x)) break;
    c.add(a.weight * std::pow(x - a.location, f.exponent + 1.0));
  }
  return f.coefficient / (f.exponent + 1.0) * c.value();
}

inline double sps_density(const ShiftedPowerSum& f, double x) {
  CompensatedSum c;
  for (const auto& a : f.shifts) {
    if (!(a.location < x)) break;
    c.add(a.weight * std::pow(x - a.location, f.exponent));
  }
  return f.coefficient * c.value();
}

/// Right limit of the density at x.
inline double sps_density_right(const ShiftedPowerSum& f, double x) {
  CompensatedSum c;
  for (const auto& a : f.shifts) {
    if (a.location > x) break;
    const double d = x - a.location;
    c.add(a.weight * (d == 0.0 ? (f.exponent == 0.0 ? 1.0 : 0.0) : std::pow(d, f.exponent)));
  }
  return f.coefficient * c.value();
}

/// cdf is continuous and strictly increasing past the first shift: bracket, then
/// Newton steps kept inside the bracket.
inline double sps_quantile(const ShiftedPowerSum& f, double q) {
  if (f.shifts.empty()) return std::numeric_limits<double>::quiet_NaN();
  double lo = f.shifts.front().location;
  double hi = lo + 1.0;
  while (sps_cdf(f, hi) < q) {
    lo = hi;
    hi = f.shifts.front().location + 2.0 * (hi - f.shifts.front().location);
    if (hi > f.exact_below) {
      hi = f.exact_below;
      if (!(sps_cdf(f, hi) >= q)) return std::numeric_limits<double>::infinity();
      break;
    }
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double g = sps_cdf(f, x) - q;
    if (g >= 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    if (hi - lo <= 4e-16 * std::max(1.0, hi)) break;
    const double d = sps_density(f, x);
    double next = d > 0.0 ? x - g / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == x) break;
    x = next;
  }
  return hi;
}

inline double form_cdf(const AnalyticForm& form, double x) {
  return std::visit(
      [x](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ConstantDensity>) {
          return f.value * x;
        } else if constexpr (std::is_same_v<T, StaircaseDensity>) {
          const long long m = stair_index(f.step, x);
          return stair_cdf_at_index(f, m) +
                 f.slope * static_cast<double>(m + 1) * (x - static_cast<double>(m) * f.step);
        } else if constexpr (std::is_same_v<T, PowerDensity>) {
          return f.coefficient * std::pow(x, f.exponent + 1.0) / (f.exponent + 1.0);
        } else if constexpr (std::is_same_v<T, DiracComb>) {
          return f.weight * static_cast<double>(comb_count_below(f.spacing, x));
        } else if constexpr (std::is_same_v<T, ShiftedPowerSum>) {
          return sps_cdf(f, x);
        } else {
          return std::numeric_limits<double>::quiet_NaN();
        }
      },
      form);
}

inline double form_quantile(const AnalyticForm& form, double q) {
  return std::visit(
      [q](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ConstantDensity>) {
          return q / f.value;
        } else if constexpr (std::is_same_v<T, StaircaseDensity>) {
          // Smallest m >= 1 with cdf(m * step) >= q, by doubling then bisection.
          long long hi = 1;
          while (stair_cdf_at_index(f, hi) < q) hi *= 2;
          long long lo = hi / 2;  // cdf(lo * step) < q, or lo == 0
          while (hi - lo > 1) {
            const long long mid = lo + (hi - lo) / 2;
            if (stair_cdf_at_index(f, mid) >= q) {
              hi = mid;
            } else {
              lo = mid;
            }
          }
          const long long m = hi - 1;
          const double rest = q - stair_cdf_at_index(f, m);
          return static_cast<double>(m) * f.step + rest / (f.slope * static_cast<double>(m + 1));
        } else if constexpr (std::is_same_v<T, PowerDensity>) {
          return std::pow((f.exponent + 1.0) * q / f.coefficient, 1.0 / (f.exponent + 1.0));
        } else if constexpr (std::is_same_v<T, DiracComb>) {
          auto k = static_cast<long long>(std::ceil(q / f.weight));
          while (k > 1 && f.weight * static_cast<double>(k - 1) >= q) --k;
          while (f.weight * static_cast<double>(k) < q) ++k;
          return static_cast<double>(k - 1) * f.spacing;
        } else if constexpr (std::is_same_v<T, ShiftedPowerSum>) {
          return sps_quantile(f, q);
        } else {
          return std::numeric_limits<double>::quiet_NaN();
        }
      },
      form);
}

inline double form_density(const AnalyticForm& form, double x) {
  return std::visit(
      [x](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ConstantDensity>) {
          return f.value;
        } else if constexpr (std::is_same_v<T, StaircaseDensity>) {
          if (x <= 0.0) return 0.0;
          const long long m = stair_index(f.step, x);
          const bool on_step = static_cast<double>(m) * f.step == x;
          return f.slope * static_cast<double>(on_step ? m : m + 1);
        } else if constexpr (std::is_same_v<T, PowerDensity>) {
          return f.coefficient * std::pow(x, f.exponent);
        } else if constexpr (std::is_same_v<T, ShiftedPowerSum>) {
          return sps_density(f, x);
        } else {
          return 0.0;
        }
      },
      form);
}

/// Energy beyond which the closed form is not known, +inf if none.
inline double form_limit(const AnalyticForm& form) {
  if (const auto* f = std::get_if<ShiftedPowerSum>(&form)) return f->exact_below;
  return std::numeric_limits<double>::infinity();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations

/// mu([0, I)).
inline double cdf(const EnergyLaw& law, double energy) {
  if (!(energy >= 0.0)) throw DomainError("cdf: energy must be >= 0");
  if (law.has_form()) {
    if (energy > detail::form_limit(law.form())) {
      throw TruncationError("cdf: energy " + detail::fmt(energy) + " beyond exact range " +
                            detail::fmt(detail::form_limit(law.form())));
    }
    return detail::form_cdf(law.form(), energy);
  }
  if (energy > law.i_max() + detail::location_tolerance(law.i_max()) &&
      law.tail() == Tail::truncated) {
    throw TruncationError("cdf: energy " + detail::fmt(energy) + " beyond truncation window i_max=" +
                          detail::fmt(law.i_max()));
  }
  return law.window_cdf(energy);
}

/// Density of the absolutely continuous part (left-continuous at breakpoints).
inline double density(const EnergyLaw& law, double energy) {
  if (!(energy >= 0.0)) throw DomainError("density: energy must be >= 0");
  if (law.has_form()) {
    if (energy > detail::form_limit(law.form())) {
      throw TruncationError("density: energy beyond exact range");
    }
    return detail::form_density(law.form(), energy);
  }
  if (energy > law.i_max() + detail::location_tolerance(law.i_max())) {
    if (law.tail() == Tail::truncated) {
      throw TruncationError("density: energy beyond truncation window");
    }
    return 0.0;
  }
  return law.window_density(energy);
}

inline MassValue total_mass(const EnergyLaw& law) {
  if (law.has_form()) return {std::numeric_limits<double>::infinity(), false};
  return {law.window_mass(), law.tail() == Tail::truncated};
}

/// Left generalized inverse: inf { I >= 0 : cdf(I) >= q }.
inline double quantile(const EnergyLaw& law, double q) {
  if (!(q > 0.0)) throw DomainError("quantile: q must be > 0");
  const MassValue total = total_mass(law);
  if (!total.lower_bound && !(q < total.value)) {
    throw DomainError("quantile: q=" + detail::fmt(q) + " must be below total mass " +
                      detail::fmt(total.value));
  }
  if (law.has_form()) {
    const double x = detail::form_quantile(law.form(), q);
    if (std::isinf(x)) {
      throw TruncationError("quantile: q=" + detail::fmt(q) + " needs energies beyond exact range " +
                            detail::fmt(detail::form_limit(law.form())));
    }
    return x;
  }
  const auto r = law.window_quantile(q);
  if (!r) {
    throw TruncationError("quantile: q=" + detail::fmt(q) +
                          " needs energies beyond truncation window i_max=" +
                          detail::fmt(law.i_max()));
  }
  return *r;
}

// ---------------------------------------------------------------------------
// Integration

struct IntegrationOptions {
  double abs_tol = 1e-10;  // per unit interval
  double rel_tol = 1e-13;
  double panel_width = 1.0;
};

namespace detail {

template <std::size_t N, class F>
void integrate_interval(F&& f, double a, double b, const IntegrationOptions& opt,
                        std::array<CompensatedSum, N>& acc) {
  if (!(b > a)) return;
  const double pw = opt.panel_width > 0.0 ? opt.panel_width : (b - a);
  const auto panels = static_cast<long long>(std::max(1.0, std::ceil((b - a) / pw)));
  const double w = (b - a) / static_cast<double>(panels);
  const RombergOptions ro{opt.abs_tol, opt.rel_tol, 3, 22};
  for (long long i = 0; i < panels; ++i) {
    const double lo = a + static_cast<double>(i) * w;
    const double hi = (i + 1 == panels) ? b : a + static_cast<double>(i + 1) * w;
    const Vec<N> r = romberg<N>(f, lo, hi, ro);
    for (std::size_t k = 0; k < N; ++k) acc[k].add(r[k]);
  }
}

template <std::size_t N, class F>
Vec<N> checked(F& f, double x) {
  const Vec<N> v = f(x);
  for (double c : v) {
    if (!std::isfinite(c)) {
      throw EvaluationError("integrand is not finite at I=" + fmt(x));
    }
  }
  return v;
}

/// Integral over [0, horizon) against the law, for a vector-valued integrand.
template <std::size_t N, class F>
Vec<N> integrate_vec(const EnergyLaw& law, F&& f, double horizon, const IntegrationOptions& opt) {
  if (!(horizon >= 0.0)) throw DomainError("integrate: horizon must be >= 0");
  std::array<CompensatedSum, N> acc{};
  auto g = [&f](double x) { return checked<N>(f, x); };
  const auto add_atom = [&](double loc, double w) {
    const Vec<N> v = g(loc);
    for (std::size_t k = 0; k < N; ++k) acc[k].add(w * v[k]);
  };
  const double atom_bound = horizon - location_tolerance(horizon);
  // C (x - shift)^p on [shift, horizon); x = shift + t^2 on the first panel removes
  // the algebraic endpoint behaviour.
  const auto shifted_power = [&](double C, double p, double shift) {
    const double span = horizon - shift;
    if (!(span > 0.0)) return;
    const double first = std::min(span, opt.panel_width > 0.0 ? opt.panel_width : span);
    const double e = 2.0 * p + 1.0;
    integrate_interval<N>(
        [&](double t) {
          Vec<N> v = g(shift + t * t);
          const double jac = t > 0.0 ? 2.0 * C * std::pow(t, e) : (e == 0.0 ? 2.0 * C : 0.0);
          for (auto& x : v) x *= jac;
          return v;
        },
        0.0, std::sqrt(first), IntegrationOptions{opt.abs_tol, opt.rel_tol, 0.0}, acc);
    integrate_interval<N>(
        [&](double x) {
          Vec<N> v = g(x);
          const double phi = C * std::pow(x - shift, p);
          for (auto& y : v) y *= phi;
          return v;
        },
        shift + first, horizon, opt, acc);
  };

  if (law.has_form()) {
    std::visit(
        [&](const auto& form) {
          using T = std::decay_t<decltype(form)>;
          if constexpr (std::is_same_v<T, ConstantDensity>) {
            const double c = form.value;
            integrate_interval<N>(
                [&](double x) {
                  Vec<N> v = g(x);
                  for (auto& e : v) e *= c;
                  return v;
                },
                0.0, horizon, opt, acc);
          } else if constexpr (std::is_same_v<T, StaircaseDensity>) {
            for (long long m = 0; static_cast<double>(m) * form.step < horizon; ++m) {
              const double lo = static_cast<double>(m) * form.step;
              const double hi = std::min(static_cast<double>(m + 1) * form.step, horizon);
              const double c = form.slope * static_cast<double>(m + 1);
              integrate_interval<N>(
                  [&](double x) {
                    Vec<N> v = g(x);
                    for (auto& e : v) e *= c;
                    return v;
                  },
                  lo, hi, opt, acc);
            }
          } else if constexpr (std::is_same_v<T, PowerDensity>) {
            shifted_power(form.coefficient, form.exponent, 0.0);
          } else if constexpr (std::is_same_v<T, ShiftedPowerSum>) {
            if (horizon > form.exact_below) {
              throw TruncationError("integrate: horizon " + fmt(horizon) + " beyond exact range " +
                                    fmt(form.exact_below));
            }
            for (const auto& a : form.shifts) {
              if (!(a.location < horizon)) break;
              shifted_power(form.coefficient * a.weight, form.exponent, a.location);
            }
          } else if constexpr (std::is_same_v<T, DiracComb>) {
            for (long long n = 0;; ++n) {
              const double x = static_cast<double>(n) * form.spacing;
              if (!(x < atom_bound)) break;
              add_atom(x, form.weight);
            }
          }
        },
        law.form());
  } else {
    if (law.tail() == Tail::truncated &&
        horizon > law.i_max() + location_tolerance(law.i_max())) {
      throw TruncationError("integrate: horizon " + fmt(horizon) +
                            " beyond truncation window i_max=" + fmt(law.i_max()));
    }
    for (const auto& a : law.atoms()) {
      if (!(a.location < atom_bound)) break;
      add_atom(a.location, a.weight);
    }
    for (const auto& s : law.segments()) {
      if (s.lo >= horizon) break;
      const double hi = std::min(s.hi, horizon);
      integrate_interval<N>(
          [&](double x) {
            Vec<N> v = g(x);
            const double phi = s.value_at(x);
            for (auto& y : v) y *= phi;
            return v;
          },
          s.lo, hi, opt, acc);
    }
  }
  Vec<N> out;
  for (std::size_t k = 0; k < N; ++k) out[k] = acc[k].value();
  return out;
}

}  // namespace detail

/// Integral of the integrand over [0, horizon) against the law: atoms are summed,
/// the density part uses panelled Romberg quadrature.
inline double integrate(const EnergyLaw& law, const std::function<double(double)>& integrand,
                        double horizon, const IntegrationOptions& opt = {}) {
  return detail::integrate_vec<1>(
      law, [&](double x) { return detail::Vec<1>{integrand(x)}; }, horizon, opt)[0];
}

// ---------------------------------------------------------------------------
// Convolution

struct ConvolutionOptions {
  double grid_step = 0.0;  // density x density grid; 0 = half the smallest knot spacing
  double max_horizon = std::numeric_limits<double>::infinity();
  std::size_t max_pieces = 4'000'000;
  std::size_t max_grid_nodes = 200'000;
};

namespace detail {

/// Pointwise sum of piecewise-linear pieces, as a sorted non-overlapping segment list.
inline std::vector<Segment> sum_segments(const std::vector<Segment>& pieces) {
  struct Event {
    double x;
    double jump;
    double slope;
  };
  std::vector<Event> events;
  events.reserve(2 * pieces.size());
  double scale = 0.0;
  for (const auto& p : pieces) {
    if (!(p.hi > p.lo)) continue;
    const double k = p.slope();
    events.push_back({p.lo, p.f_lo, k});
    events.push_back({p.hi, -p.f_hi, -k});
    scale = std::max({scale, std::abs(p.f_lo), std::abs(p.f_hi)});
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.x < b.x; });
  std::vector<Segment> out;
  const double zero = 1e-13 * scale;
  double v = 0.0;
  double s = 0.0;
  std::size_t i = 0;
  const std::size_t n = events.size();
  while (i < n) {
    const double x = events[i].x;
    const double tol = location_tolerance(x);
    while (i < n && events[i].x <= x + tol) {
      v += events[i].jump;
      s += events[i].slope;
      ++i;
    }
    if (i == n) break;
    const double xn = events[i].x;
    double vn = v + s * (xn - x);
    if (std::abs(v) <= zero) v = 0.0;
    if (std::abs(vn) <= zero) vn = 0.0;
    if (v != 0.0 || vn != 0.0) out.push_back({x, xn, std::max(v, 0.0), std::max(vn, 0.0)});
    v = vn;
  }
  return out;
}

inline std::vector<Atom> merge_atoms(std::vector<Atom> atoms) {
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& a, const Atom& b) { return a.location < b.location; });
  std::vector<Atom> out;
  for (const auto& a : atoms) {
    if (!out.empty() && a.location - out.back().location <= location_tolerance(a.location)) {
      out.back().weight += a.weight;
    } else {
      out.push_back(a);
    }
  }
  return out;
}

/// (fa * fb)(x) for piecewise-linear densities, integrating the piecewise-quadratic
/// product exactly with Simpson's rule on every overlap.
inline double density_convolution_at(const std::vector<Segment>& a, const std::vector<Segment>& b,
                                     double x) {
  CompensatedSum sum;
  std::size_t i = 0;
  std::size_t jr = 0;  // index from the back of b
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  while (i < na && jr < nb) {
    const Segment& sa = a[i];
    const Segment& sb = b[nb - 1 - jr];
    const double bl = x - sb.hi;
    const double br = x - sb.lo;
    const double l = std::max(sa.lo, bl);
    const double r = std::min(sa.hi, br);
    if (r > l) {
      const double m = 0.5 * (l + r);
      const auto p = [&](double t) { return sa.value_at(t) * sb.value_at(x - t); };
      sum.add((r - l) / 6.0 * (p(l) + 4.0 * p(m) + p(r)));
    }
    if (sa.hi < br) {
      ++i;
    } else {
      ++jr;
    }
  }
  return sum.value();
}

inline bool is_unit_like_dirac_at_zero(const EnergyLaw& law) {
  return !law.has_form() && law.tail() == Tail::closed && law.segments().empty() &&
         law.atoms().size() == 1 && std::abs(law.atoms()[0].location) <= location_tolerance(0.0);
}

inline bool power_like(const AnalyticForm& f, double& coefficient, double& exponent) {
  if (const auto* c = std::get_if<ConstantDensity>(&f)) {
    coefficient = c->value;
    exponent = 0.0;
    return true;
  }
  if (const auto* p = std::get_if<PowerDensity>(&f)) {
    coefficient = p->coefficient;
    exponent = p->exponent;
    return true;
  }
  return false;
}

/// Power-type density written as a shifted power sum.
inline bool as_shifted_power(const EnergyLaw& law, ShiftedPowerSum& out) {
  const auto inf = std::numeric_limits<double>::infinity();
  if (const auto* c = std::get_if<ConstantDensity>(&law.form())) {
    out = {c->value, 0.0, {{0.0, 1.0}}, inf};
    return true;
  }
  if (const auto* p = std::get_if<PowerDensity>(&law.form())) {
    out = {p->coefficient, p->exponent, {{0.0, 1.0}}, inf};
    return true;
  }
  if (const auto* st = std::get_if<StaircaseDensity>(&law.form())) {
    out = {st->slope, 0.0, {}, law.i_max()};
    for (long long n = 0; static_cast<double>(n) * st->step <= law.i_max(); ++n) {
      out.shifts.push_back({static_cast<double>(n) * st->step, 1.0});
    }
    return true;
  }
  if (const auto* sp = std::get_if<ShiftedPowerSum>(&law.form())) {
    out = *sp;
    return true;
  }
  return false;
}

/// Purely atomic law: its atoms and the energy below which the list is complete.
inline bool as_atoms(const EnergyLaw& law, const std::vector<Atom>*& atoms, double& complete) {
  if (std::holds_alternative<DiracComb>(law.form()) ||
      (!law.has_form() && law.segments().empty() && !law.atoms().empty())) {
    atoms = &law.atoms();
    complete = law.tail() == Tail::closed && !law.has_form()
                   ? std::numeric_limits<double>::infinity()
                   : law.i_max();
    return true;
  }
  return false;
}

inline double smallest_segment(const std::vector<Segment>& segs) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& s : segs) m = std::min(m, s.length());
  return m;
}

inline bool on_lattice(double x, double h) {
  const double r = x / h;
  return std::abs(r - std::round(r)) <= 1e-9;
}

}  // namespace detail

/// Measure convolution a * b.
///
/// Atoms with atoms and atoms with densities are combined exactly. Two densities are
/// convolved numerically: exact values on a uniform grid, linear in between. Closed
/// forms are kept for constant/power with constant/power, constant with comb, and any
/// sum of shifted powers with atoms or with another such sum.
/// Truncated windows stay exact on the part of [0, i_max] they determine.
inline EnergyLaw convolve(const EnergyLaw& a, const EnergyLaw& b,
                          const ConvolutionOptions& opt = {}) {
  if (detail::is_unit_like_dirac_at_zero(a)) return b.scaled(a.atoms()[0].weight);
  if (detail::is_unit_like_dirac_at_zero(b)) return a.scaled(b.atoms()[0].weight);

  const double window_tr = std::min(a.i_max(), b.i_max());
  const bool a_inf = total_mass(a).is_infinite();
  const bool b_inf = total_mass(b).is_infinite();

  double ca = 0, pa = 0, cb = 0, pb = 0;
  if (detail::power_like(a.form(), ca, pa) && detail::power_like(b.form(), cb, pb)) {
    const double coef = ca * cb * std::exp(std::lgamma(pa + 1.0) + std::lgamma(pb + 1.0) -
                                           std::lgamma(pa + pb + 2.0));
    const double h = opt.grid_step > 0.0 ? opt.grid_step : 0.0;
    return EnergyLaw::power_density(coef, pa + pb + 1.0, std::min(window_tr, opt.max_horizon), h);
  }
  {
    const auto* cst = std::get_if<ConstantDensity>(&a.form());
    const auto* comb = std::get_if<DiracComb>(&b.form());
    if (!cst) {
      cst = std::get_if<ConstantDensity>(&b.form());
      comb = std::get_if<DiracComb>(&a.form());
    }
    if (cst && comb) {
      return EnergyLaw::staircase(comb->spacing, cst->value * comb->weight,
                                  std::min(window_tr, opt.max_horizon));
    }
  }
  {
    // Two power-type densities: every pair of shifts gives one Beta-weighted power term.
    ShiftedPowerSum sa, sb;
    if (detail::as_shifted_power(a, sa) && detail::as_shifted_power(b, sb)) {
      if (sa.shifts.size() * sb.shifts.size() > opt.max_pieces) {
        throw UnsupportedOperation("convolve: shift products exceed the configured budget");
      }
      const double exact = std::min(sa.exact_below, sb.exact_below);
      std::vector<Atom> shifts;
      for (const auto& x : sa.shifts) {
        for (const auto& y : sb.shifts) {
          const double loc = x.location + y.location;
          if (loc > exact + detail::location_tolerance(exact)) break;
          shifts.push_back({loc, x.weight * y.weight});
        }
      }
      ShiftedPowerSum out;
      out.coefficient = sa.coefficient * sb.coefficient *
                        std::exp(std::lgamma(sa.exponent + 1.0) + std::lgamma(sb.exponent + 1.0) -
                                 std::lgamma(sa.exponent + sb.exponent + 2.0));
      out.exponent = sa.exponent + sb.exponent + 1.0;
      out.shifts = detail::merge_atoms(std::move(shifts));
      out.exact_below = exact;
      const double window = std::min({exact, opt.max_horizon, window_tr});
      return EnergyLaw::shifted_power_sum(std::move(out), window, opt.grid_step);
    }
  }
  {
    // Power-type density with atoms: shifted copies of the same power law.
    ShiftedPowerSum sp;
    const std::vector<Atom>* atoms = nullptr;
    double complete = 0.0;
    const EnergyLaw* power_side = nullptr;
    const EnergyLaw* atom_side = nullptr;
    if (detail::as_shifted_power(a, sp) && detail::as_atoms(b, atoms, complete)) {
      power_side = &a;
      atom_side = &b;
    } else if (detail::as_shifted_power(b, sp) && detail::as_atoms(a, atoms, complete)) {
      power_side = &b;
      atom_side = &a;
    }
    if (power_side) {
      const double exact = std::min(sp.exact_below, complete);
      if (a_inf && b_inf && !(exact > 0.0)) {
        throw UnsupportedOperation(
            "convolve: both laws have infinite mass and the atom side has an empty window");
      }
      if (sp.shifts.size() * atoms->size() > opt.max_pieces) {
        throw UnsupportedOperation("convolve: shift products exceed the configured budget");
      }
      std::vector<Atom> shifts;
      for (const auto& x : sp.shifts) {
        for (const auto& y : *atoms) {
          const double loc = x.location + y.location;
          if (loc > exact + detail::location_tolerance(exact)) break;
          shifts.push_back({loc, x.weight * y.weight});
        }
      }
      sp.shifts = detail::merge_atoms(std::move(shifts));
      sp.exact_below = exact;
      const double window =
          std::min({exact, opt.max_horizon, power_side->i_max() + atom_side->i_max()});
      return EnergyLaw::shifted_power_sum(std::move(sp), window, opt.grid_step);
    }
  }

  std::vector<std::string> notes;
  double window = 0.0;
  Tail tail = Tail::closed;
  if (a.tail() == Tail::closed && b.tail() == Tail::closed) {
    window = a.i_max() + b.i_max();
  } else if (a.tail() == Tail::closed) {
    window = b.i_max();
    tail = Tail::truncated;
  } else if (b.tail() == Tail::closed) {
    window = a.i_max();
    tail = Tail::truncated;
  } else {
    window = window_tr;
    tail = Tail::truncated;
  }
  if (a_inf && b_inf && !(window > 0.0)) {
    throw UnsupportedOperation(
        "convolve: both laws have infinite mass, no closed form applies and no numeric window");
  }
  if (window > opt.max_horizon) {
    window = opt.max_horizon;
    tail = Tail::truncated;
    notes.push_back("convolution window capped at " + detail::fmt(window));
  }
  if (tail == Tail::truncated) {
    notes.push_back("numeric window truncated at i_max=" + detail::fmt(window));
  }
  const double wtol = detail::location_tolerance(window);

  const std::size_t work = a.atoms().size() * (b.atoms().size() + b.segments().size()) +
                           b.atoms().size() * a.segments().size();
  if (work > opt.max_pieces) {
    throw UnsupportedOperation("convolve: " + std::to_string(work) +
                               " pieces exceed the configured budget; reduce i_max");
  }

  std::vector<Atom> atoms;
  for (const auto& x : a.atoms()) {
    for (const auto& y : b.atoms()) {
      const double loc = x.location + y.location;
      if (loc > window + wtol) break;
      atoms.push_back({loc, x.weight * y.weight});
    }
  }
  atoms = detail::merge_atoms(std::move(atoms));

  std::vector<Segment> pieces;
  const auto shift_in = [&](const Atom& at, const std::vector<Segment>& segs) {
    for (const auto& s : segs) {
      Segment t{s.lo + at.location, s.hi + at.location, s.f_lo * at.weight, s.f_hi * at.weight};
      if (t.lo >= window) break;
      if (t.hi > window) {
        t.f_hi = t.value_at(window);
        t.hi = window;
      }
      if (t.hi > t.lo) pieces.push_back(t);
    }
  };
  for (const auto& at : a.atoms()) shift_in(at, b.segments());
  for (const auto& at : b.atoms()) shift_in(at, a.segments());

  if (!a.segments().empty() && !b.segments().empty()) {
    const double top = std::min(window, a.segments().back().hi + b.segments().back().hi);
    double h = opt.grid_step;
    if (!(h > 0.0)) {
      h = 0.5 * std::min(detail::smallest_segment(a.segments()),
                         detail::smallest_segment(b.segments()));
    }
    auto nodes = static_cast<std::size_t>(std::ceil(top / h));
    if (nodes > opt.max_grid_nodes) {
      nodes = opt.max_grid_nodes;
      h = top / static_cast<double>(nodes);
      notes.push_back("density*density grid coarsened to h=" + detail::fmt(h));
    }
    bool aligned = true;
    for (const auto* segs : {&a.segments(), &b.segments()}) {
      for (const auto& s : *segs) {
        aligned = aligned && detail::on_lattice(s.lo, h) && detail::on_lattice(s.hi, h);
      }
    }
    if (!aligned) {
      notes.push_back("density*density: knots resampled onto uniform grid h=" + detail::fmt(h));
    }
    double x0 = 0.0;
    double g0 = detail::density_convolution_at(a.segments(), b.segments(), 0.0);
    for (std::size_t i = 1; i <= nodes; ++i) {
      const double x1 = std::min(top, static_cast<double>(i) * h);
      const double g1 = detail::density_convolution_at(a.segments(), b.segments(), x1);
      if (x1 > x0) pieces.push_back({x0, x1, g0, g1});
      x0 = x1;
      g0 = g1;
    }
  }

  return EnergyLaw(std::move(atoms), detail::sum_segments(pieces), window, tail, {},
                   std::move(notes));
}

// ---------------------------------------------------------------------------
// Validation

inline Diagnostics validate(const EnergyLaw& law) {
  Diagnostics d;
  d.notes = law.notes();
  const auto fail = [&](std::string msg) {
    if (d.ok) {
      d.ok = false;
      d.message = std::move(msg);
    }
  };
  const double imax = law.i_max();
  const double itol = detail::location_tolerance(imax);
  if (!(std::isfinite(imax) && imax >= 0.0)) fail("i_max must be finite and nonnegative");

  const auto& atoms = law.atoms();
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const auto& a = atoms[i];
    if (!(std::isfinite(a.location) && a.location >= 0.0)) fail("atom location must be nonnegative");
    if (!(std::isfinite(a.weight) && a.weight > 0.0)) fail("atom weight must be positive");
    if (i > 0 && !(atoms[i - 1].location < a.location)) fail("atoms must be strictly increasing");
    if (a.location > imax + itol) fail("atoms must lie within [0, i_max]");
  }
  const auto& segs = law.segments();
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto& s = segs[i];
    if (!(std::isfinite(s.lo) && std::isfinite(s.hi) && s.lo < s.hi)) {
      fail("segment bounds must satisfy lo < hi");
    }
    if (s.lo < 0.0 || s.hi > imax + itol) fail("density support must lie in [0, i_max]");
    if (!(std::isfinite(s.f_lo) && std::isfinite(s.f_hi) && s.f_lo >= 0.0 && s.f_hi >= 0.0)) {
      fail("density values must be nonnegative");
    }
    if (i > 0 && segs[i - 1].hi > s.lo) fail("density segments must be sorted and non-overlapping");
  }

  const auto close = [](double x, double y) {
    return std::abs(x - y) <= 1e-12 * std::max({1.0, std::abs(x), std::abs(y)});
  };
  const auto disagree = [&](double x) {
    fail("numeric window disagrees with analytic form at I=" + detail::fmt(x));
  };
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ConstantDensity>) {
          if (!(f.value > 0.0 && std::isfinite(f.value))) fail("constant density must be positive");
          if (!atoms.empty()) fail("constant density law must not carry atoms");
          for (const auto& s : segs) {
            if (!close(s.f_lo, f.value) || !close(s.f_hi, f.value)) disagree(s.lo);
          }
        } else if constexpr (std::is_same_v<T, StaircaseDensity>) {
          if (!(f.step > 0.0 && f.slope > 0.0)) fail("staircase step and slope must be positive");
          if (!atoms.empty()) fail("staircase law must not carry atoms");
          for (const auto& s : segs) {
            const double v = detail::form_density(f, 0.5 * (s.lo + s.hi));
            if (!close(s.f_lo, v) || !close(s.f_hi, v)) disagree(s.lo);
          }
        } else if constexpr (std::is_same_v<T, PowerDensity>) {
          if (!(f.coefficient > 0.0)) fail("power density coefficient must be positive");
          if (!(f.exponent > -1.0)) fail("power density exponent must exceed -1");
          if (!atoms.empty()) fail("power density law must not carry atoms");
          for (std::size_t i = 0; i < segs.size(); ++i) {
            const auto& s = segs[i];
            if (i == 0 && f.exponent < 0.0) continue;
            if (!close(s.f_lo, detail::form_density(f, s.lo)) ||
                !close(s.f_hi, detail::form_density(f, s.hi))) {
              disagree(s.lo);
            }
          }
        } else if constexpr (std::is_same_v<T, ShiftedPowerSum>) {
          if (!(f.coefficient > 0.0)) fail("power density coefficient must be positive");
          if (!(f.exponent > -1.0)) fail("power density exponent must exceed -1");
          if (!atoms.empty()) fail("shifted power law must not carry atoms");
          for (std::size_t i = 0; i < f.shifts.size(); ++i) {
            if (!(f.shifts[i].weight > 0.0)) fail("shift weight must be positive");
            if (i > 0 && !(f.shifts[i - 1].location < f.shifts[i].location)) {
              fail("shifts must be strictly increasing");
            }
          }
          std::size_t next = 0;
          for (const auto& s : segs) {
            while (next < f.shifts.size() && f.shifts[next].location < s.lo) ++next;
            const bool starts_at_shift = next < f.shifts.size() && f.shifts[next].location == s.lo;
            if (f.exponent < 0.0 && starts_at_shift) continue;
            if (!close(s.f_hi, detail::sps_density(f, s.hi))) disagree(s.hi);
            if (!close(s.f_lo, detail::sps_density_right(f, s.lo))) disagree(s.lo);
          }
        } else if constexpr (std::is_same_v<T, DiracComb>) {
          if (!(f.spacing > 0.0 && f.weight > 0.0)) fail("comb spacing and weight must be positive");
          if (!segs.empty()) fail("Dirac comb law must not carry a density");
          for (std::size_t n = 0; n < atoms.size(); ++n) {
            const double x = static_cast<double>(n) * f.spacing;
            if (!close(atoms[n].location, x) || !close(atoms[n].weight, f.weight)) disagree(x);
          }
        }
      },
      law.form());
  return d;
}

}  // namespace polyquant
