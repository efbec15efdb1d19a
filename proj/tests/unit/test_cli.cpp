#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "decaylab/cli/config.hpp"
#include "decaylab/cli/report.hpp"
#include "decaylab/cli/runner.hpp"

using namespace decaylab;
using namespace decaylab::cli;
namespace fs = std::filesystem;

namespace {

json minimal() {
  return json::parse(R"({
    "name": "tiny",
    "sigma": {"mean_m": 1.5, "sin_coeffs": [0.2]},
    "phase": {"family": "PowerLaw", "param": 2},
    "time": {"t_end": 20, "samples": 40},
    "suites": []
  })");
}

std::string config_error(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("decaylab_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

struct Proc {
  int rc;
  std::string out;
};

Proc run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string("\"") + DECAYLAB_CLI_PATH + "\" " + args + " 2>&1";
  Proc p{-1, {}};
  FILE* f = popen(cmd.c_str(), "r");
  if (!f) return p;
  std::array<char, 512> buf;
  while (fgets(buf.data(), buf.size(), f)) p.out += buf.data();
  const int st = pclose(f);
  p.rc = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return p;
}

}  // namespace

TEST(ConfigParse, MinimalDefaults) {
  const auto c = parse_config(minimal());
  EXPECT_EQ(c.name, "tiny");
  EXPECT_TRUE(c.suites.empty());
  EXPECT_DOUBLE_EQ(c.coeff.sigma.mean_m, 1.5);
  EXPECT_FALSE(c.has_data);
}

TEST(ConfigParse, ErrorsNameTheField) {
  auto j = minimal();
  j["solver"] = {{"tol", -1e-9}};
  EXPECT_EQ(config_error(j), "config/solver/tol: must be > 0");

  j = minimal();
  j["sigma"]["bogus"] = 1;
  EXPECT_EQ(config_error(j), "config/sigma/bogus: unknown key");

  j = minimal();
  j["suites"] = {"simulate", "dance"};
  EXPECT_NE(config_error(j).find("config/suites/1"), std::string::npos);

  j = minimal();
  j["phase"]["family"] = "Exponential";
  EXPECT_NE(config_error(j).find("config/phase/family"), std::string::npos);

  j = minimal();
  j.erase("phase");
  EXPECT_EQ(config_error(j), "config/phase: missing");

  j = minimal();
  j["time"]["samples"] = 1;
  EXPECT_NE(config_error(j).find("config/time/samples"), std::string::npos);

  j = minimal();
  j["data"] = {{"u0", {{"shape", "CompactBump"}, {"r_min", 3}, {"r_max", 1}}}};
  EXPECT_NE(config_error(j).find("config/data/u0"), std::string::npos);
}

TEST(ConfigParse, CrossFieldRules) {
  auto j = minimal();
  j["sigma"] = {{"mean_m", 0.0}};
  j["suites"] = {"verify-bounds"};
  EXPECT_NE(config_error(j).find("config/sigma/mean_m"), std::string::npos);

  j = minimal();
  j["suites"] = {"verify-bounds"};
  j["targets"] = {{"thm1", {{"m_bar", 1.6}}}};
  EXPECT_NE(config_error(j).find("config/targets/thm1/m_bar"), std::string::npos);
  j["targets"]["thm1"]["m_bar"] = 1.5;
  EXPECT_EQ(config_error(j), "");

  j = minimal();
  j["fit"] = {{"total", {{"window", {1, 10}}}}};
  EXPECT_EQ(config_error(j), "config/fit/total: needs a data section");

  j = minimal();
  j["fit"] = {{"modes", {{{"xi", 1}, {"window", {1, 30}}}}}};
  EXPECT_NE(config_error(j).find("extends past"), std::string::npos);

  j = minimal();
  j["simulate"] = {{"m2_identity", true}};
  EXPECT_NE(config_error(j).find("config/simulate/m2_identity"), std::string::npos);
}

TEST(ConfigParse, NonNegativeRegimeChecksSigma) {
  auto j = minimal();
  j["sigma"]["mean_m"] = -0.5;
  j["suites"] = {"simulate"};
  EXPECT_NE(config_error(j).find("config/sigma: NonNegative"), std::string::npos);
  j["sigma"] = {{"mean_m", 0.1}, {"sin_coeffs", {0.1}}};
  EXPECT_EQ(config_error(j), "");
}

TEST(Presets, AllShippedPresetsParse) {
  const auto ps = list_presets();
  ASSERT_GE(ps.size(), 8u);
  for (const auto& [name, desc] : ps) {
    EXPECT_NO_THROW(load_config(name)) << name;
    EXPECT_FALSE(desc.empty()) << name;
  }
}

TEST(Presets, InheritanceOverridesFields) {
  const auto d = scratch("inherit");
  const auto f = d / "child.json";
  std::ofstream(f) << R"({"preset": "m2-conservation", "name": "child", "time": {"t_end": 50}})";
  const auto c = load_config(f.string());
  EXPECT_EQ(c.name, "child");
  EXPECT_DOUBLE_EQ(c.t_end, 50.0);
  EXPECT_EQ(c.t_samples, 400);
  EXPECT_TRUE(c.m2_identity);

  std::ofstream(f) << R"({"preset": "no-such-preset"})";
  EXPECT_THROW(load_config(f.string()), ConfigError);
  EXPECT_THROW(load_config((d / "missing.json").string()), ConfigError);
}

TEST(Report, EmptySuitesPass) {
  const auto rep = run_experiment(parse_config(minimal()), 1);
  EXPECT_TRUE(rep.suites.empty());
  EXPECT_EQ(rep.exit_code(), 0);
  const auto j = report_json(rep);
  EXPECT_EQ(j["status"], "pass");
  EXPECT_EQ(j["suites"].size(), 0u);
  EXPECT_EQ(j["schema_version"], kSchemaVersion);
}

TEST(Report, DeterministicApartFromTiming) {
  auto j = minimal();
  j["suites"] = {"simulate", "fit-decay"};
  j["simulate"] = {{"modes", {{{"xi", 0.5}}, {{"xi", 2}, {"v0", 0}, {"v1", 1}}}}};
  j["data"] = {{"grid", {{"count", 24}}}, {"u0", {{"shape", "Gaussian"}}}};
  j["fit"] = {{"total", {{"window", {2, 20}}}}};
  const auto cfg = parse_config(j);
  auto a = report_json(run_experiment(cfg, 1));
  auto b = report_json(run_experiment(cfg, 3));
  ASSERT_TRUE(a.contains("timing"));
  a.erase("timing");
  b.erase("timing");
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(Report, NonFiniteSamplesFailClosed) {
  RunReport rep;
  SuiteOutcome s;
  s.suite = "verify-bounds";
  CheckResult c;
  c.bound_id = "probe";
  c.record(1.0, 2.0);
  c.record(std::numeric_limits<double>::quiet_NaN(), 1.0);
  s.checks.push_back(c);
  rep.suites.push_back(s);
  EXPECT_TRUE(rep.violated());
  EXPECT_EQ(rep.exit_code(), 2);
  ASSERT_EQ(rep.violation_ledger().size(), 1u);
  EXPECT_NE(rep.violation_ledger()[0].find("non-finite"), std::string::npos);
  EXPECT_TRUE(num(std::numeric_limits<double>::infinity()).is_null());
}

TEST(Report, CsvWritesNaNAsEmpty) {
  const auto d = scratch("csv");
  CsvTable t{"probe", {"a", "b"}, {{0.1, std::numeric_limits<double>::quiet_NaN()}}};
  write_csv(t, d / "probe.csv");
  std::ifstream in(d / "probe.csv");
  std::string head, row;
  std::getline(in, head);
  std::getline(in, row);
  EXPECT_EQ(head, "a,b");
  EXPECT_EQ(row, "0.10000000000000001,");
}

TEST(Report, EmitHonoursFormats) {
  auto j = minimal();
  j["output"] = {{"formats", {"json"}}};
  j["suites"] = {"simulate"};
  j["simulate"] = {{"modes", {{{"xi", 1}}}}};
  const auto rep = run_experiment(parse_config(j), 1);
  const auto d = scratch("formats");
  const auto files = emit_report(rep, d);
  ASSERT_EQ(files.size(), 1u);
  EXPECT_EQ(files[0].filename(), "report.json");
  EXPECT_TRUE(report_json(rep)["csv_files"].empty());
}

TEST(CliBinary, PresetsAndUsage) {
  auto p = run_cli("presets");
  EXPECT_EQ(p.rc, 0);
  EXPECT_NE(p.out.find("m2-conservation"), std::string::npos);
  EXPECT_EQ(run_cli("").rc, 1);
  EXPECT_EQ(run_cli("run").rc, 1);
  EXPECT_EQ(run_cli("--help").rc, 0);
}

TEST(CliBinary, BadConfigExitsOneWithFieldPath) {
  const auto d = scratch("badcfg");
  auto j = minimal();
  j["solver"] = {{"tol", -1}};
  std::ofstream(d / "bad.json") << j.dump();
  const auto p = run_cli("run \"" + (d / "bad.json").string() + "\" --out \"" + (d / "o").string() + "\"");
  EXPECT_EQ(p.rc, 1);
  EXPECT_NE(p.out.find("config/solver/tol"), std::string::npos);
  EXPECT_FALSE(fs::exists(d / "o" / "report.json"));
}

TEST(CliBinary, OutputDirectoryPrecedence) {
  const auto d = scratch("outdir");
  auto j = minimal();
  j["output"] = {{"dir", (d / "from_config").string()}};
  std::ofstream(d / "c.json") << j.dump();
  const std::string cfg = "\"" + (d / "c.json").string() + "\"";

  EXPECT_EQ(run_cli("run " + cfg).rc, 0);
  EXPECT_TRUE(fs::exists(d / "from_config" / "report.json"));

  EXPECT_EQ(run_cli("run " + cfg, "DECAYLAB_OUT=\"" + (d / "from_env").string() + "\"").rc, 0);
  EXPECT_TRUE(fs::exists(d / "from_env" / "report.json"));

  EXPECT_EQ(run_cli("run " + cfg + " --out \"" + (d / "from_flag").string() + "\"",
                    "DECAYLAB_OUT=\"" + (d / "from_env2").string() + "\"")
                .rc,
            0);
  EXPECT_TRUE(fs::exists(d / "from_flag" / "report.json"));
  EXPECT_FALSE(fs::exists(d / "from_env2"));

  std::ifstream in(d / "from_flag" / "report.json");
  const auto rep = json::parse(in);
  EXPECT_EQ(rep["name"], "tiny");
  EXPECT_EQ(rep["exit_code"], 0);
}

TEST(CliBinary, ViolationExitsTwo) {
  const auto d = scratch("violation");
  auto j = minimal();
  j["suites"] = {"fit-decay"};
  j["fit"] = {{"modes", {{{"xi", 1}, {"window", {2, 20}}, {"band", {5, 6}}}}}};
  std::ofstream(d / "c.json") << j.dump();
  const auto p = run_cli("run \"" + (d / "c.json").string() + "\" --out \"" + (d / "o").string() + "\"");
  EXPECT_EQ(p.rc, 2);
  EXPECT_NE(p.out.find("FAIL fit-decay/mode_xi_1"), std::string::npos);
  std::ifstream in(d / "o" / "report.json");
  const auto rep = json::parse(in);
  EXPECT_EQ(rep["status"], "violation");
  EXPECT_EQ(rep["violation_ledger"].size(), 1u);
}

TEST(Report, DegenerateFitFailsClosed) {
  auto j = minimal();
  j["suites"] = {"fit-decay"};
  j["fit"] = {{"modes", {{{"xi", 1}, {"v0", 0}, {"v1", 0}, {"window", {2, 20}}}}}};
  const auto rep = run_experiment(parse_config(j), 1);
  EXPECT_EQ(rep.exit_code(), 2);
  ASSERT_EQ(rep.violation_ledger().size(), 1u);
  EXPECT_NE(rep.violation_ledger()[0].find("non-finite fit"), std::string::npos);
  EXPECT_TRUE(report_json(rep)["suites"][0]["fits"][0]["exponent"].is_null());
}

TEST(CliBinary, UnwritableOutputExitsOne) {
  const auto d = scratch("unwritable");
  std::ofstream(d / "c.json") << minimal().dump();
  std::ofstream(d / "blocker") << "x";
  const auto p = run_cli("run \"" + (d / "c.json").string() + "\" --out \"" + (d / "blocker" / "sub").string() + "\"");
  EXPECT_EQ(p.rc, 1);
  EXPECT_NE(p.out.find("cannot create output directory"), std::string::npos);
}
