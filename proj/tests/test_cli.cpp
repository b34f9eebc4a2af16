#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>

#include "polyquant/cli.hpp"
#include "polyquant/diatomic.hpp"

using namespace polyquant;
namespace fs = std::filesystem;

namespace {
const fs::path kModels = POLYQUANT_MODELS_DIR;
const std::string kDiatomic = (kModels / "diatomic.json").string();

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "polyquant");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("polyquant_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<std::pair<double, double>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  return read_curve(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, double> parse_report(const std::string& text) {
  std::map<std::string, double> m;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto c = line.find(',');
    m[line.substr(0, c)] = std::stod(line.substr(c + 1));
  }
  return m;
}
}  // namespace

TEST(Cli, FiguresSpotValues) {
  const auto dir = scratch("figs");
  const auto r = run_cli({"figures", "--model", kDiatomic, "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"fig2a_phi_total.csv", "fig2b_quantile_total.csv", "fig3a_dof.csv", "fig3b_cv.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(slurp(dir / "fig3a_dof.csv").substr(0, 23), "kT_over_deps,dof_total\n");
  EXPECT_EQ(slurp(dir / "fig2a_phi_total.csv").substr(0, 25), "I_over_deps,phi_rescaled\n");

  const auto phi = read_csv(dir / "fig2a_phi_total.csv");
  ASSERT_EQ(phi.size(), 601u);
  EXPECT_EQ(phi[50].first, 0.5);
  EXPECT_EQ(phi[50].second, 1.0);

  const auto q = read_csv(dir / "fig2b_quantile_total.csv");
  bool seen = false;
  for (const auto& [qh, v] : q) {
    if (qh == 2.0) {
      EXPECT_NEAR(v, 1.5, 1e-12);
      seen = true;
    }
  }
  EXPECT_TRUE(seen);

  const auto dof = read_csv(dir / "fig3a_dof.csv");
  ASSERT_EQ(dof.size(), 200u);
  EXPECT_EQ(dof.front().first, 0.05);
  EXPECT_EQ(dof.back().first, 10.0);
  EXPECT_NEAR(dof.back().second, 6.90166, 1e-5);
  EXPECT_NEAR(dof.back().second - 3.0, 3.90166, 1e-5);
  for (const auto& [t, v] : dof) EXPECT_NEAR(v, diatomic::dof_closed_form(t, {}), 1e-9) << t;
  for (const auto& [t, v] : read_csv(dir / "fig3b_cv.csv")) {
    EXPECT_NEAR(v, diatomic::cv_closed_form(t, {}), 1e-9) << t;
  }
  EXPECT_TRUE(fs::exists(dir / "components" / "c0_classical_quadratic_density.csv"));
  EXPECT_TRUE(fs::exists(dir / "components" / "c1_harmonic_oscillator_atoms.csv"));
  fs::remove_all(dir);
}

TEST(Cli, FiguresAreDeterministic) {
  const auto a = scratch("figs_a");
  const auto b = scratch("figs_b");
  ASSERT_EQ(run_cli({"figures", "--model", kDiatomic, "--out", a.string(), "--T-range", "0.1:5:20"}).code, 0);
  ASSERT_EQ(run_cli({"figures", "--model", kDiatomic, "--out", b.string(), "--T-range", "0.1:5:20"}).code, 0);
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    EXPECT_EQ(slurp(e.path()), slurp(b / fs::relative(e.path(), a))) << e.path();
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, EquilibriumHighTemperatureLimits) {
  const auto r = run_cli({"equilibrium", "--model", kDiatomic, "--T", "1e9"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string header;
  std::string row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "T,Z,dof,cv");
  std::vector<double> v;
  std::stringstream cells(row);
  for (std::string c; std::getline(cells, c, ',');) v.push_back(std::stod(c));
  ASSERT_EQ(v.size(), 4u);
  EXPECT_NEAR(v[2], 7.0, 1e-6);
  EXPECT_NEAR(v[3], 3.5, 1e-5);
}

TEST(Cli, EquilibriumRange) {
  const auto r = run_cli({"equilibrium", "--model", kDiatomic, "--T-range", "0.1:10:5"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 5);
}

TEST(Cli, SampleIsReproducible) {
  const std::vector<std::string> args{"sample", "--model", kDiatomic, "--T", "1", "--n", "20000", "--seed", "42",
                                      "--moments"};
  const auto a = run_cli(args);
  const auto b = run_cli(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const auto m = parse_report(a.out);
  EXPECT_EQ(m.at("n"), 20000.0);
  EXPECT_NEAR(m.at("rho"), 1.0, 1e-13);
  EXPECT_NEAR(m.at("dof"), diatomic::dof_closed_form(1.0, {}), 3.0 * m.at("dof_std_error"));
  EXPECT_NEAR(m.at("cv"), diatomic::cv_closed_form(1.0, {}), 3.0 * m.at("cv_std_error"));
  const auto c = run_cli({"sample", "--model", kDiatomic, "--T", "1", "--n", "20000", "--seed", "43", "--moments"});
  EXPECT_NE(a.out, c.out);
}

TEST(Cli, SampleWritesEnsemble) {
  const auto p = scratch("ens.csv");
  const auto r = run_cli({"sample", "--model", kDiatomic, "--T", "0.5", "--n", "10", "--ensemble", p.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "vx,vy,vz,e_int,w");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 10);
  fs::remove(p);
}

TEST(Cli, LawEvaluation) {
  const auto r = run_cli({"law", "--model", kDiatomic, "--what", "cdf", "--grid", "0:3:0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  const auto rows = read_curve(in);
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_NEAR(rows[3].second, 2.0, 1e-14);  // I = 1.5
  const auto q = run_cli({"law", "--model", kDiatomic, "--what", "quantile", "--grid", "2:2:1"});
  ASSERT_EQ(q.code, 0) << q.err;
  EXPECT_NE(q.out.find("2,1.5"), std::string::npos) << q.out;
}

TEST(Cli, Validate) {
  const auto r = run_cli({"validate", "--model", kDiatomic});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("ground: 0.5"), std::string::npos);
  EXPECT_NE(r.out.find("ok"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"bogus"}).code, 2);
  EXPECT_EQ(run_cli({"equilibrium", "--model", kDiatomic}).code, 2);
  EXPECT_EQ(run_cli({"equilibrium", "--model", kDiatomic, "--T", "1", "--T-range", "1:2:3"}).code, 2);
  EXPECT_EQ(run_cli({"sample", "--model", kDiatomic}).code, 2);

  const auto bad_t = run_cli({"equilibrium", "--model", kDiatomic, "--T", "-1"});
  EXPECT_EQ(bad_t.code, 1);
  EXPECT_EQ(bad_t.err.rfind("error: ", 0), 0u);
  EXPECT_EQ(std::count(bad_t.err.begin(), bad_t.err.end(), '\n'), 1);

  EXPECT_EQ(run_cli({"validate", "--model", (kModels / "missing.json").string()}).code, 1);
  EXPECT_EQ(run_cli({"sample", "--model", kDiatomic, "--T", "1", "--n", "0"}).code, 1);
  EXPECT_EQ(run_cli({"equilibrium", "--model", kDiatomic, "--T", "1", "--kB", "0"}).code, 1);
}

TEST(Cli, BadConfigIsDomainFailure) {
  const auto p = scratch("bad.json");
  std::ofstream(p) << R"({"components": [{"type": "harmonic_oscillator", "delta_eps": -1}]})";
  const auto r = run_cli({"validate", "--model", p.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("delta_eps must be positive"), std::string::npos) << r.err;
  fs::remove(p);
}

TEST(Cli, BinaryExitStatus) {
  const std::string bin = POLYQUANT_CLI;
  const auto status = [&](const std::string& args) {
    const int s = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(status("validate --model " + kDiatomic), 0);
  EXPECT_EQ(status("equilibrium --model " + kDiatomic + " --T -1"), 1);
  EXPECT_EQ(status("--no-such-flag"), 2);
}
