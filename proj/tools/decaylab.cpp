// decaylab command line: run experiments, list presets, certify the auxiliary estimates.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "decaylab/cli/config.hpp"
#include "decaylab/cli/report.hpp"
#include "decaylab/cli/runner.hpp"

namespace dl = decaylab;
namespace cli = decaylab::cli;

namespace {

std::filesystem::path output_dir(const std::string& flag, const std::string& from_config, const std::string& name) {
  if (!flag.empty()) return flag;
  if (const char* e = std::getenv("DECAYLAB_OUT"); e && *e) return e;
  if (!from_config.empty()) return from_config;
  return std::filesystem::path("decaylab-out") / name;
}

void print_summary(const cli::RunReport& r) {
  for (const auto& s : r.suites) {
    for (const auto& c : s.checks)
      std::cout << (c.passed() ? "PASS " : "FAIL ") << s.suite << "/" << c.bound_id
                << (c.zone.empty() ? "" : " [" + c.zone + "]") << "  samples=" << c.samples
                << " violations=" << c.violations << " nonfinite=" << c.nonfinite
                << " worst_margin=" << c.worst_margin() << "\n";
    for (const auto& f : s.fits) {
      std::cout << (f.passed ? "PASS " : "FAIL ") << s.suite << "/" << f.target.id << "  exponent=" << f.fit.exponent
                << " rms=" << f.fit.residual_rms;
      if (f.target.has_band) std::cout << " band=[" << f.target.lo << ", " << f.target.hi << "]";
      std::cout << "\n";
    }
  }
  for (const auto& w : r.warnings) std::cout << "warning: " << w << "\n";
}

int cmd_run(const std::string& config, unsigned jobs, const std::string& out) {
  const auto cfg = cli::load_config(config);
  const auto rep = cli::run_experiment(cfg, jobs, &std::cerr);
  print_summary(rep);
  for (const auto& p : cli::emit_report(rep, output_dir(out, cfg.out_dir, cfg.name))) std::cout << p.string() << "\n";
  return rep.exit_code();
}

int cmd_presets() {
  const auto ps = cli::list_presets();
  if (ps.empty()) std::cout << "no presets found\n";
  for (const auto& [name, desc] : ps) std::cout << name << (desc.empty() ? "" : "  " + desc) << "\n";
  return 0;
}

int cmd_verify_lemmas(const std::string& sweep, unsigned jobs, const std::string& out) {
  cli::ExperimentConfig cfg;
  cfg.name = "verify-lemmas";
  cfg.coeff.sigma.mean_m = 0.8;
  cfg.coeff.sigma.sin_coeffs = {0.5};
  cfg.coeff.phase = dl::PhaseFunction::power_law(2);
  cfg.suites = {"verify-lemmas"};
  cfg.lemma_sweep = sweep;
  cfg.emit_csv = false;
  cfg.resolved = {{"name", cfg.name},
                  {"sigma", {{"mean_m", 0.8}, {"sin_coeffs", {0.5}}}},
                  {"phase", {{"family", "PowerLaw"}, {"param", 2}}},
                  {"suites", {"verify-lemmas"}},
                  {"lemmas", {{"sweep", sweep}}}};
  const auto rep = cli::run_experiment(cfg, jobs, &std::cerr);
  print_summary(rep);
  const bool want_files = !out.empty() || std::getenv("DECAYLAB_OUT");
  if (want_files)
    for (const auto& p : cli::emit_report(rep, output_dir(out, "", cfg.name))) std::cout << p.string() << "\n";
  return rep.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decaylab: energy decay experiments for wave equations with oscillating weak dissipation"};
  app.require_subcommand(1);

  std::string config, out, sweep = "small";
  unsigned jobs = dl::numerics::default_jobs();

  auto* run = app.add_subcommand("run", "run an experiment config (file path or preset name)");
  run->add_option("config", config, "config file or preset name")->required();
  run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  run->add_option("--out", out, "output directory (overrides DECAYLAB_OUT and the config)");

  app.add_subcommand("presets", "list shipped presets");

  auto* vl = app.add_subcommand("verify-lemmas", "certify the oscillatory-integral and stabilization lemmas");
  vl->add_option("--sweep", sweep, "small or full")->check(CLI::IsMember({"small", "full"}));
  vl->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  vl->add_option("--out", out, "output directory for report.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) return cmd_run(config, jobs, out);
    if (app.got_subcommand("presets")) return cmd_presets();
    if (vl->parsed()) return cmd_verify_lemmas(sweep, jobs, out);
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
