#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "polyquant/diatomic.hpp"
#include "polyquant/io_config.hpp"

using namespace polyquant;

namespace {
const std::filesystem::path kModels = POLYQUANT_MODELS_DIR;

std::string error_of(const std::string& text) {
  try {
    parse_model(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }
}  // namespace

TEST(ParseModel, DiatomicFile) {
  const auto cfg = load_model(kModels / "diatomic.json");
  ASSERT_EQ(cfg.model.components.size(), 2u);
  EXPECT_EQ(cfg.model.ground, 0.5);
  EXPECT_EQ(cfg.units.k_B, 1.0);
  const auto* rot = std::get_if<ClassicalQuadratic>(&cfg.model.components[0]);
  ASSERT_NE(rot, nullptr);
  EXPECT_EQ(rot->dof, 2);
  EXPECT_EQ(rot->coeffs[0], 2.0 * std::numbers::pi);
  EXPECT_EQ(std::get<HarmonicOscillator>(cfg.model.components[1]).delta_eps, 1.0);
}

TEST(ParseModel, ShippedModelsAreValid) {
  for (const char* name : {"diatomic.json", "triatomic.json", "rotor.json"}) {
    const auto cfg = load_model(kModels / name);
    const auto law = total_law(cfg.model, cfg.numeric);
    EXPECT_TRUE(validate(law).ok) << name << ": " << validate(law).message;
  }
}

TEST(ParseModel, AllComponentTypes) {
  const auto cfg = parse_model(R"({
    "units": {"k_B": 2.0},
    "components": [
      {"type": "classical_quadratic", "dof": 3, "coeffs": [1, 2, 3]},
      {"type": "harmonic_oscillator", "delta_eps": 0.25},
      {"type": "custom_discrete", "levels": [[1.0, 1], [2.5, 3]]},
      {"type": "custom_continuous", "knots": [[0, 1], [2, 0]], "ground": 0.75}
    ],
    "numeric": {"i_max": 40, "grid_step": 0.01, "beta_min": 0.2}
  })");
  EXPECT_EQ(cfg.units.k_B, 2.0);
  EXPECT_EQ(cfg.numeric.i_max, 40.0);
  EXPECT_EQ(cfg.numeric.grid_step, 0.01);
  EXPECT_EQ(cfg.numeric.beta_min, 0.2);
  ASSERT_EQ(cfg.model.components.size(), 4u);
  EXPECT_EQ(cfg.model.ground, 0.125 + 1.0 + 0.75);
}

TEST(ParseModel, EmptyComponents) {
  EXPECT_TRUE(contains(error_of(R"({"components": []})"), "at least one component required"));
}

TEST(ParseModel, NegativeDeltaEps) {
  const auto msg = error_of(R"({"components": [{"type": "harmonic_oscillator", "delta_eps": -1}]})");
  EXPECT_TRUE(contains(msg, "delta_eps must be positive")) << msg;
  EXPECT_TRUE(contains(msg, "components[0]")) << msg;
}

TEST(ParseModel, SyntaxErrorReportsPosition) {
  const auto msg = error_of(R"({"components": [}")");
  EXPECT_TRUE(contains(msg, "syntax error at byte 17")) << msg;
}

TEST(ParseModel, SchemaErrorsReportFieldPath) {
  EXPECT_TRUE(contains(error_of(R"({"components": [{"type": "harmonic_oscillator", "delta_eps": "x"}]})"),
                       "components[0].delta_eps"));
  EXPECT_TRUE(contains(error_of(R"({"components": [{"type": "harmonic_oscillator"}, {"type": "rigid_top"}]})"),
                       "components[0].delta_eps"));
  EXPECT_TRUE(contains(error_of(R"({"components": [{"type": "harmonic_oscillator", "delta_eps": 1},
                                                    {"type": "rigid_top"}]})"),
                       "components[1].type: unknown component type 'rigid_top'"));
  EXPECT_TRUE(contains(error_of(R"({"components": [{"type": "harmonic_oscillator", "delta_eps": 1, "x": 0}]})"),
                       "components[0]"));
  EXPECT_TRUE(contains(error_of(R"({"components": [{"type": "classical_quadratic", "dof": 2.5, "coeffs": []}]})"),
                       "components[0].dof"));
  EXPECT_TRUE(contains(error_of(R"({"components": [{"type": "custom_discrete", "levels": [[1]]}]})"),
                       "components[0].levels[0]"));
  EXPECT_TRUE(contains(error_of(R"({"bogus": 1, "components": []})"), "bogus"));
  EXPECT_TRUE(contains(error_of(R"({"units": {"k_B": 0}, "components": []})"), "units.k_B"));
  EXPECT_FALSE(error_of("[]").empty());
}

TEST(ParseModel, InvariantErrorsAreIndexed) {
  const auto msg = error_of(R"({"components": [{"type": "harmonic_oscillator", "delta_eps": 1},
                                               {"type": "classical_quadratic", "dof": 2, "coeffs": [1]}]})");
  EXPECT_TRUE(contains(msg, "components[1]:")) << msg;
}

TEST(ParseModel, MissingFile) { EXPECT_THROW(load_model(kModels / "missing.json"), ConfigError); }

TEST(EmitModel, RoundTrips) {
  for (const char* name : {"diatomic.json", "triatomic.json", "rotor.json"}) {
    const auto cfg = load_model(kModels / name);
    const auto back = parse_model(emit_model(cfg));
    EXPECT_EQ(back.model, cfg.model) << name;
    EXPECT_EQ(back.units.k_B, cfg.units.k_B);
    EXPECT_EQ(back.numeric.i_max, cfg.numeric.i_max);
    EXPECT_EQ(back.numeric.grid_step, cfg.numeric.grid_step);
    EXPECT_EQ(back.numeric.beta_min, cfg.numeric.beta_min);
    EXPECT_EQ(emit_model(back), emit_model(cfg));
  }
  ModelConfig odd;
  odd.model = make_model({CustomDiscrete{{{0.1, 1.0}, {1.0 / 3.0, 2.0}}},
                          CustomContinuous{{{0.0, 0.3}, {0.7, 1e-17}}, 0.2}});
  EXPECT_EQ(parse_model(emit_model(odd)).model, odd.model);
}

TEST(EmitCurve, FormatAndRoundTrip) {
  const std::vector<std::pair<double, double>> s{{0.05, 5.0}, {0.1, 1.0 / 3.0}, {10.0, 6.901666388960115}};
  std::stringstream ss;
  emit_curve(ss, "kT_over_deps", "dof_total", s);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "kT_over_deps,dof_total");
  EXPECT_EQ(text.find('\r'), std::string::npos);
  std::stringstream again;
  emit_curve(again, "kT_over_deps", "dof_total", s);
  EXPECT_EQ(again.str(), text);
  EXPECT_EQ(read_curve(ss), s);
}

TEST(EmitCurve, ThermoCurveUsesQuantityName) {
  const auto law = total_law(diatomic::model({}));
  const auto c = thermo_curve("dof_total", "1", log_spaced(0.05, 10.0, 5),
                              [&](double T) { return degrees_of_freedom(law, T); });
  std::stringstream ss;
  emit_curve(ss, "kT_over_deps", c);
  const auto rows = read_curve(ss);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows.back().first, 10.0);
  EXPECT_NEAR(rows.back().second, diatomic::dof_closed_form(10.0, {}), 1e-10);
  std::stringstream head;
  emit_curve(head, "kT_over_deps", c);
  EXPECT_EQ(head.str().substr(0, 23), "kT_over_deps,dof_total\n");
}

TEST(EmitCurve, EmptyIsAnError) {
  std::stringstream ss;
  try {
    emit_curve(ss, "x", "y", {});
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_STREQ(e.what(), "nothing to emit");
  }
}

TEST(WriteTextFile, ReportsIoFailure) {
  EXPECT_THROW(write_text_file("/nonexistent-dir/x.csv", "a"), Error);
  const auto p = std::filesystem::temp_directory_path() / "polyquant_io_test.txt";
  write_text_file(p, "abc\n");
  std::ifstream in(p);
  std::string s;
  std::getline(in, s);
  EXPECT_EQ(s, "abc");
  std::filesystem::remove(p);
}
