#pragma once

// JSON model documents and CSV emission.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "polyquant/equilibrium.hpp"
#include "polyquant/state_models.hpp"

namespace polyquant {

struct ModelConfig {
  UnitsConfig units;
  InternalModel model;
  NumericPolicy numeric;
};

namespace detail {

using json = nlohmann::json;

inline void expect_keys(const json& obj, const std::string& path,
                        std::initializer_list<std::string_view> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (auto a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(path + ": unknown field '" + it.key() + "'");
  }
}

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline const json& require(const json& obj, const std::string& path, const std::string& key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(join(path, key) + ": required field missing");
  return *it;
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(path + ": number must be finite");
  return x;
}

inline std::vector<std::pair<double, double>> pairs(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path + ": expected an array of [x, y] pairs");
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    if (!v[i].is_array() || v[i].size() != 2) throw ConfigError(p + ": expected [x, y]");
    out.emplace_back(number(v[i][0], p + "[0]"), number(v[i][1], p + "[1]"));
  }
  return out;
}

inline StateComponent parse_component(const json& c, const std::string& path) {
  if (!c.is_object()) throw ConfigError(path + ": expected an object");
  const json& type = require(c, path, "type");
  if (!type.is_string()) throw ConfigError(path + ".type: expected a string");
  const auto tag = type.get<std::string>();
  if (tag == "classical_quadratic") {
    expect_keys(c, path, {"type", "dof", "coeffs"});
    const json& dof = require(c, path, "dof");
    if (!dof.is_number_integer()) throw ConfigError(path + ".dof: expected an integer");
    ClassicalQuadratic q;
    q.dof = dof.get<int>();
    const json& coeffs = require(c, path, "coeffs");
    if (!coeffs.is_array()) throw ConfigError(path + ".coeffs: expected an array");
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      q.coeffs.push_back(number(coeffs[i], path + ".coeffs[" + std::to_string(i) + "]"));
    }
    return q;
  }
  if (tag == "harmonic_oscillator") {
    expect_keys(c, path, {"type", "delta_eps"});
    return HarmonicOscillator{number(require(c, path, "delta_eps"), path + ".delta_eps")};
  }
  if (tag == "custom_discrete") {
    expect_keys(c, path, {"type", "levels"});
    CustomDiscrete d;
    for (const auto& [e, g] : pairs(require(c, path, "levels"), path + ".levels")) {
      d.levels.push_back({e, g});
    }
    return d;
  }
  if (tag == "custom_continuous") {
    expect_keys(c, path, {"type", "knots", "ground"});
    CustomContinuous k;
    k.knots = pairs(require(c, path, "knots"), path + ".knots");
    if (c.contains("ground")) k.ground = number(c["ground"], path + ".ground");
    return k;
  }
  throw ConfigError(path + ".type: unknown component type '" + tag + "'");
}

}  // namespace detail

/// Parses and validates a model document.
inline ModelConfig parse_model(std::string_view text) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("syntax error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("document: expected a JSON object");
  detail::expect_keys(doc, "document", {"units", "components", "numeric"});

  ModelConfig cfg;
  if (doc.contains("units")) {
    const json& u = doc["units"];
    if (!u.is_object()) throw ConfigError("units: expected an object");
    detail::expect_keys(u, "units", {"k_B"});
    if (u.contains("k_B")) cfg.units.k_B = detail::number(u["k_B"], "units.k_B");
    if (!(cfg.units.k_B > 0.0)) throw ConfigError("units.k_B: k_B must be positive");
  }
  if (doc.contains("numeric")) {
    const json& n = doc["numeric"];
    if (!n.is_object()) throw ConfigError("numeric: expected an object");
    detail::expect_keys(n, "numeric", {"i_max", "grid_step", "beta_min"});
    if (n.contains("i_max")) cfg.numeric.i_max = detail::number(n["i_max"], "numeric.i_max");
    if (n.contains("grid_step")) {
      cfg.numeric.grid_step = detail::number(n["grid_step"], "numeric.grid_step");
    }
    if (n.contains("beta_min")) {
      cfg.numeric.beta_min = detail::number(n["beta_min"], "numeric.beta_min");
    }
    if (cfg.numeric.i_max < 0.0) throw ConfigError("numeric.i_max: must be nonnegative");
    if (cfg.numeric.grid_step < 0.0) throw ConfigError("numeric.grid_step: must be nonnegative");
    if (!(cfg.numeric.beta_min > 0.0)) throw ConfigError("numeric.beta_min: must be positive");
  }

  const json& comps = detail::require(doc, "", "components");
  if (!comps.is_array()) throw ConfigError("components: expected an array");
  if (comps.empty()) throw ConfigError("components: at least one component required");
  std::vector<StateComponent> list;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const std::string path = "components[" + std::to_string(i) + "]";
    StateComponent c = detail::parse_component(comps[i], path);
    if (auto msg = check_component(c); !msg.empty()) throw ConfigError(path + ": " + msg);
    list.push_back(std::move(c));
  }
  cfg.model = make_model(std::move(list));
  return cfg;
}

inline ModelConfig load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read model file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

/// Serializes a model so that parse_model(emit_model(c)) reproduces it.
inline std::string emit_model(const ModelConfig& cfg) {
  using detail::json;
  json comps = json::array();
  for (const auto& c : cfg.model.components) {
    json j;
    j["type"] = component_name(c);
    std::visit(
        [&j](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, ClassicalQuadratic>) {
            j["dof"] = x.dof;
            j["coeffs"] = x.coeffs;
          } else if constexpr (std::is_same_v<T, HarmonicOscillator>) {
            j["delta_eps"] = x.delta_eps;
          } else if constexpr (std::is_same_v<T, CustomDiscrete>) {
            json lv = json::array();
            for (const auto& l : x.levels) lv.push_back({l.energy, l.degeneracy});
            j["levels"] = lv;
          } else {
            json kn = json::array();
            for (const auto& [e, f] : x.knots) kn.push_back({e, f});
            j["knots"] = kn;
            j["ground"] = x.ground;
          }
        },
        c);
    comps.push_back(std::move(j));
  }
  json doc;
  doc["units"] = {{"k_B", cfg.units.k_B}};
  doc["components"] = comps;
  doc["numeric"] = {{"i_max", cfg.numeric.i_max},
                    {"grid_step", cfg.numeric.grid_step},
                    {"beta_min", cfg.numeric.beta_min}};
  return doc.dump(2) + "\n";
}

/// Two-column CSV with a header row and round-trip decimals.
inline void emit_curve(std::ostream& os, const std::string& x_name, const std::string& y_name,
                       const std::vector<std::pair<double, double>>& samples) {
  if (samples.empty()) throw DomainError("nothing to emit");
  os << x_name << ',' << y_name << '\n';
  for (const auto& [x, y] : samples) {
    os << detail::format_double(x) << ',' << detail::format_double(y) << '\n';
  }
}

inline void emit_curve(std::ostream& os, const std::string& x_name, const ThermoCurve& curve) {
  emit_curve(os, x_name, curve.quantity, curve.samples);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

/// Reads a CSV written by emit_curve back into (x, y) samples.
inline std::vector<std::pair<double, double>> read_curve(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty CSV");
  std::vector<std::pair<double, double>> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError("CSV row without a comma: " + line);
    double x = 0.0;
    double y = 0.0;
    const auto r1 = std::from_chars(line.data(), line.data() + comma, x);
    const auto r2 = std::from_chars(line.data() + comma + 1, line.data() + line.size(), y);
    if (r1.ec != std::errc{} || r2.ec != std::errc{}) throw ConfigError("bad CSV number: " + line);
    out.emplace_back(x, y);
  }
  return out;
}

}  // namespace polyquant
