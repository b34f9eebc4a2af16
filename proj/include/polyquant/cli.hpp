#pragma once

// Command-line driver. run() is kept separate from main() so tests can call it.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polyquant/energy_law.hpp"
#include "polyquant/equilibrium.hpp"
#include "polyquant/io_config.hpp"
#include "polyquant/particles.hpp"
#include "polyquant/state_models.hpp"

namespace polyquant::cli {

struct Grid {
  double start = 0.0;
  double stop = 0.0;
  double step = 0.0;
};

inline std::vector<double> split_triple(const std::string& text, const std::string& what,
                                         const std::string& third) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw CLI::ValidationError(what, "bad number '" + item + "'");
    parts.push_back(v);
  }
  if (parts.size() != 3) throw CLI::ValidationError(what, "expected START:STOP:" + third);
  return parts;
}

inline Grid parse_grid(const std::string& text) {
  const auto p = split_triple(text, "--grid", "STEP");
  if (!(p[2] > 0.0) || !(p[1] >= p[0])) {
    throw CLI::ValidationError("--grid", "need STOP >= START and STEP > 0");
  }
  return {p[0], p[1], p[2]};
}

inline std::vector<double> grid_points(const Grid& g) {
  const auto n = static_cast<long long>(std::floor((g.stop - g.start) / g.step + 1e-9));
  std::vector<double> xs;
  for (long long i = 0; i <= n; ++i) xs.push_back(g.start + static_cast<double>(i) * g.step);
  return xs;
}

inline std::vector<double> parse_t_range(const std::string& text) {
  const auto p = split_triple(text, "--T-range", "POINTS");
  if (!(p[0] > 0.0) || !(p[1] >= p[0]) || p[2] < 1.0 || p[2] != std::floor(p[2])) {
    throw CLI::ValidationError("--T-range", "need 0 < START <= STOP and integer POINTS >= 1");
  }
  return log_spaced(p[0], p[1], static_cast<int>(p[2]));
}

/// Writes to the file when a path is given, otherwise to the stream.
inline void deliver(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty()) {
    out << content;
  } else {
    write_text_file(path, content);
  }
}

/// Scales used by the figure rescalings: J from the first rotor-like component,
/// delta_eps from the first oscillator. Missing parts fall back to J = 2 pi, 1.
struct FigureScales {
  double inertia = 2.0 * std::numbers::pi;
  double delta_eps = 1.0;
};

inline FigureScales figure_scales(const InternalModel& m) {
  FigureScales s;
  bool have_rot = false;
  bool have_vib = false;
  for (const auto& c : m.components) {
    if (const auto* q = std::get_if<ClassicalQuadratic>(&c); q && q->dof == 2 && !have_rot) {
      s.inertia = std::sqrt(q->coeffs[0] * q->coeffs[1]);
      have_rot = true;
    }
    if (const auto* h = std::get_if<HarmonicOscillator>(&c); h && !have_vib) {
      s.delta_eps = h->delta_eps;
      have_vib = true;
    }
  }
  return s;
}

inline std::string csv(const std::string& xn, const std::string& yn,
                       const std::vector<std::pair<double, double>>& rows) {
  std::ostringstream os;
  emit_curve(os, xn, yn, rows);
  return os.str();
}

inline void write_figures(const ModelConfig& cfg, const std::filesystem::path& dir,
                          const Grid& energy_grid, const Grid& qhat_grid,
                          const std::vector<double>& kt_over_deps) {
  std::filesystem::create_directories(dir / "components");
  const FigureScales sc = figure_scales(cfg.model);
  const double two_pi = 2.0 * std::numbers::pi;
  const double y_phi = sc.inertia / (two_pi * sc.delta_eps);
  const double q_unit = two_pi * sc.delta_eps / sc.inertia;

  const EnergyLaw total = total_law(cfg.model, cfg.numeric);
  const auto density_rows = [&](const EnergyLaw& law) {
    std::vector<std::pair<double, double>> rows;
    for (double x : grid_points(energy_grid)) {
      rows.emplace_back(x, density(law, x * sc.delta_eps) * y_phi);
    }
    return rows;
  };
  const auto quantile_rows = [&](const EnergyLaw& law) {
    std::vector<std::pair<double, double>> rows;
    for (double qh : grid_points(qhat_grid)) {
      if (!(qh > 0.0)) continue;
      rows.emplace_back(qh, quantile(law, qh * q_unit) / sc.delta_eps);
    }
    return rows;
  };
  write_text_file(dir / "fig2a_phi_total.csv",
                  csv("I_over_deps", "phi_rescaled", density_rows(total)));
  write_text_file(dir / "fig2b_quantile_total.csv",
                  csv("q_hat", "quantile_rescaled", quantile_rows(total)));

  for (std::size_t i = 0; i < cfg.model.components.size(); ++i) {
    const auto& c = cfg.model.components[i];
    const EnergyLaw law = component_law(c, cfg.numeric);
    const std::string stem = "c" + std::to_string(i) + "_" + component_name(c);
    if (law.segments().empty() && !law.atoms().empty()) {
      std::vector<std::pair<double, double>> atoms;
      for (const auto& a : law.atoms()) {
        const double x = a.location / sc.delta_eps;
        if (x > energy_grid.stop + 1e-12) break;
        if (x >= energy_grid.start) atoms.emplace_back(x, a.weight);
      }
      if (!atoms.empty()) {
        write_text_file(dir / "components" / (stem + "_atoms.csv"),
                        csv("I_over_deps", "weight", atoms));
      }
    } else {
      write_text_file(dir / "components" / (stem + "_density.csv"),
                      csv("I_over_deps", "phi_rescaled", density_rows(law)));
    }
    write_text_file(dir / "components" / (stem + "_quantile.csv"),
                    csv("q_hat", "quantile_rescaled", quantile_rows(law)));
  }

  std::vector<std::pair<double, double>> dof;
  std::vector<std::pair<double, double>> cv;
  for (double r : kt_over_deps) {
    const double T = r * sc.delta_eps / cfg.units.k_B;
    dof.emplace_back(r, degrees_of_freedom(total, T, cfg.units));
    cv.emplace_back(r, heat_capacity_fluctuation(total, T, cfg.units));
  }
  write_text_file(dir / "fig3a_dof.csv", csv("kT_over_deps", "dof_total", dof));
  write_text_file(dir / "fig3b_cv.csv", csv("kT_over_deps", "cv", cv));
}

inline std::string moments_report(const ParticleEnsemble& ens, const EquilibriumParams& p,
                                  const UnitsConfig& units, double ground) {
  const Moments m = moments(ens, ground);
  const Estimate d = empirical_dof(ens, p, units);
  std::ostringstream os;
  using detail::format_double;
  os << "quantity,value\n";
  os << "n," << ens.particles.size() << '\n';
  os << "seed," << ens.seed << '\n';
  os << "rho," << format_double(m.rho) << '\n';
  os << "u_x," << format_double(m.u[0]) << '\n';
  os << "u_y," << format_double(m.u[1]) << '\n';
  os << "u_z," << format_double(m.u[2]) << '\n';
  os << "E," << format_double(m.E) << '\n';
  os << "dof," << format_double(d.value) << '\n';
  os << "dof_std_error," << format_double(d.std_error) << '\n';
  if (ens.particles.size() >= 2) {
    const Estimate c = empirical_cv(ens, p, units);
    os << "cv," << format_double(c.value) << '\n';
    os << "cv_std_error," << format_double(c.std_error) << '\n';
  }
  return os.str();
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Internal energy laws, equilibrium thermodynamics and sampling", "polyquant"};
  app.require_subcommand(1, 1);

  std::string model_path;
  std::string out_path;
  std::optional<double> k_b;
  const auto common = [&](CLI::App* sub, bool model_required = true) {
    auto* opt = sub->add_option("--model", model_path, "model JSON document");
    if (model_required) opt->required();
    sub->add_option("--kB", k_b, "Boltzmann constant (overrides the model units)");
  };

  auto* law_cmd = app.add_subcommand("law", "evaluate density, cdf or quantile on a grid");
  common(law_cmd);
  std::string what = "cdf";
  std::string grid_text;
  law_cmd->add_option("--what", what, "density | cdf | quantile")
      ->check(CLI::IsMember({"density", "cdf", "quantile"}));
  law_cmd->add_option("--grid", grid_text, "START:STOP:STEP");
  law_cmd->add_option("--out", out_path, "output CSV (default: stdout)");

  auto* eq_cmd = app.add_subcommand("equilibrium", "Z, 3+delta and c_V at one or more temperatures");
  common(eq_cmd);
  std::optional<double> temperature;
  std::string t_range;
  auto* t_opt = eq_cmd->add_option("--T", temperature, "temperature");
  auto* tr_opt = eq_cmd->add_option("--T-range", t_range, "START:STOP:POINTS, log-spaced");
  t_opt->excludes(tr_opt);
  eq_cmd->add_option("--out", out_path, "output CSV (default: stdout)");

  auto* sample_cmd = app.add_subcommand("sample", "equilibrium particle sampling");
  common(sample_cmd);
  double sample_t = 1.0;
  std::size_t n = 100000;
  std::uint64_t seed = 0;
  double rho = 1.0;
  bool want_moments = false;
  std::string ensemble_path;
  sample_cmd->add_option("--T", sample_t, "temperature")->required();
  sample_cmd->add_option("--n", n, "number of particles");
  sample_cmd->add_option("--seed", seed, "random seed");
  sample_cmd->add_option("--rho", rho, "number density");
  sample_cmd->add_flag("--moments", want_moments, "report moments and empirical 3+delta, c_V");
  sample_cmd->add_option("--ensemble", ensemble_path, "write particles as CSV");
  sample_cmd->add_option("--out", out_path, "moments output (default: stdout)");

  auto* fig_cmd = app.add_subcommand("figures", "write figure datasets for the model");
  common(fig_cmd);
  std::string energy_grid_text = "0:6:0.01";
  std::string qhat_grid_text = "0:21:0.01";
  std::string fig_t_range = "0.05:10:200";
  fig_cmd->add_option("--out", out_path, "output directory")->required();
  fig_cmd->add_option("--grid", energy_grid_text, "I/delta_eps grid START:STOP:STEP");
  fig_cmd->add_option("--q-grid", qhat_grid_text, "rescaled quantile grid START:STOP:STEP");
  fig_cmd->add_option("--T-range", fig_t_range, "kT/delta_eps START:STOP:POINTS, log-spaced");

  auto* val_cmd = app.add_subcommand("validate", "check a model document and its energy law");
  common(val_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    ModelConfig cfg = load_model(model_path);
    if (k_b) {
      if (!(*k_b > 0.0)) throw DomainError("--kB must be positive");
      cfg.units.k_B = *k_b;
    }

    if (law_cmd->parsed()) {
      const EnergyLaw law = total_law(cfg.model, cfg.numeric);
      Grid g;
      if (!grid_text.empty()) {
        g = parse_grid(grid_text);
      } else if (what == "quantile") {
        g = {0.01, 10.0, 0.01};
      } else {
        g = {0.0, 6.0, 0.01};
      }
      std::vector<std::pair<double, double>> rows;
      for (double x : grid_points(g)) {
        if (what == "density") {
          rows.emplace_back(x, density(law, x));
        } else if (what == "cdf") {
          rows.emplace_back(x, cdf(law, x));
        } else {
          rows.emplace_back(x, quantile(law, x));
        }
      }
      const bool q = what == "quantile";
      deliver(out_path, csv(q ? "q" : "I", q ? "I" : (what == "cdf" ? "cdf" : "phi"), rows), out);
      return 0;
    }

    if (eq_cmd->parsed()) {
      std::vector<double> temps;
      if (temperature) {
        temps = {*temperature};
      } else if (!t_range.empty()) {
        temps = parse_t_range(t_range);
      } else {
        throw CLI::RequiredError("--T or --T-range");
      }
      const EnergyLaw law = total_law(cfg.model, cfg.numeric);
      std::ostringstream os;
      using detail::format_double;
      os << "T,Z,dof,cv\n";
      for (double T : temps) {
        const double beta = detail::beta_of(T, cfg.units);
        os << format_double(T) << ',' << format_double(partition_function(law, beta)) << ','
           << format_double(degrees_of_freedom(law, T, cfg.units)) << ','
           << format_double(heat_capacity(law, T, cfg.units)) << '\n';
      }
      deliver(out_path, os.str(), out);
      return 0;
    }

    if (sample_cmd->parsed()) {
      const EnergyLaw law = total_law(cfg.model, cfg.numeric);
      EquilibriumParams p;
      p.rho = rho;
      p.T = sample_t;
      const ParticleEnsemble ens = sample_equilibrium(law, p, n, seed, cfg.units);
      if (!ensemble_path.empty()) {
        std::ostringstream os;
        write_ensemble_csv(os, ens);
        write_text_file(ensemble_path, os.str());
      }
      if (want_moments || ensemble_path.empty()) {
        deliver(out_path, moments_report(ens, p, cfg.units, cfg.model.ground), out);
      }
      return 0;
    }

    if (fig_cmd->parsed()) {
      write_figures(cfg, out_path, parse_grid(energy_grid_text), parse_grid(qhat_grid_text),
                    parse_t_range(fig_t_range));
      out << "wrote figure data to " << out_path << '\n';
      return 0;
    }

    if (val_cmd->parsed()) {
      const EnergyLaw law = total_law(cfg.model, cfg.numeric);
      const Diagnostics d = validate(law);
      out << "components: " << cfg.model.components.size() << '\n';
      for (std::size_t i = 0; i < cfg.model.components.size(); ++i) {
        out << "  [" << i << "] " << component_name(cfg.model.components[i]) << '\n';
      }
      out << "ground: " << detail::format_double(cfg.model.ground) << '\n';
      const MassValue mass = total_mass(law);
      out << "total mass: "
          << (mass.is_infinite() ? std::string("inf")
                                 : (mass.lower_bound ? ">= " : "") + detail::format_double(mass.value))
          << '\n';
      for (const auto& note : d.notes) out << "note: " << note << '\n';
      if (!d.ok) {
        err << "error: " << d.message << '\n';
        return 1;
      }
      out << "ok\n";
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace polyquant::cli
