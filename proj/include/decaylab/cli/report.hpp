#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "decaylab/cli/runner.hpp"

namespace decaylab::cli {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

/// Non-finite numbers become null; JSON has no inf.
inline json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json check_json(const CheckResult& c) {
  json j;
  j["bound_id"] = c.bound_id;
  j["zone"] = c.zone;
  j["passed"] = c.passed();
  j["samples"] = c.samples;
  j["violations"] = c.violations;
  j["nonfinite"] = c.nonfinite;
  j["worst_margin"] = num(c.worst_margin());
  j["worst_log_headroom"] = num(c.worst_log_headroom);
  j["worst_t"] = num(c.worst_t);
  j["worst_xi"] = num(c.worst_xi);
  json k = json::object();
  for (const auto& [n, v] : c.constants_used) k[n] = num(v);
  j["constants"] = k;
  j["notes"] = c.notes;
  return j;
}

inline json fit_json(const FitOutcome& f) {
  json j;
  j["id"] = f.target.id;
  j["exponent"] = num(f.fit.exponent);
  j["intercept"] = num(f.fit.intercept);
  j["window"] = {f.target.t_lo, f.target.t_hi};
  j["samples"] = f.fit.samples;
  j["residual_rms"] = num(f.fit.residual_rms);
  j["accepted_band"] = f.target.has_band ? json{f.target.lo, f.target.hi} : json(nullptr);
  j["passed"] = f.passed;
  return j;
}

/// Everything except "timing" is a function of the config alone.
inline json report_json(const RunReport& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["tool"] = {{"name", "decaylab"}, {"version", kVersion}};
  j["name"] = r.config.name;
  j["status"] = r.violated() ? "violation" : "pass";
  j["exit_code"] = r.exit_code();
  j["config"] = r.config.resolved;
  const double m = r.config.coeff.sigma.mean_m;
  j["theory"] = {{"m", m}, {"m_bar0", m > 0 ? num(m_bar0(r.config.coeff.sigma.regime, m)) : json(nullptr)}};
  json k = json::object();
  for (const auto& [n, v] : r.constants) k[n] = num(v);
  j["constants"] = k;
  json suites = json::array();
  for (const auto& s : r.suites) {
    json sj;
    sj["suite"] = s.suite;
    json cs = json::array();
    for (const auto& c : s.checks) cs.push_back(check_json(c));
    sj["checks"] = cs;
    json fs = json::array();
    for (const auto& f : s.fits) fs.push_back(fit_json(f));
    sj["fits"] = fs;
    sj["warnings"] = s.warnings;
    suites.push_back(sj);
  }
  j["suites"] = suites;
  j["warnings"] = r.warnings;
  j["violation_ledger"] = r.violation_ledger();
  json files = json::array();
  if (r.config.emit_csv)
    for (const auto& t : r.tables) files.push_back(t.name + ".csv");
  j["csv_files"] = files;
  json timing;
  timing["timestamp"] = r.timestamp;
  timing["wall_clock_seconds"] = r.wall_seconds;
  json st = json::object();
  for (const auto& s : r.suites) st[s.suite] = s.seconds;
  timing["suite_seconds"] = st;
  j["timing"] = timing;
  return j;
}

inline std::string format_double(double x) {
  if (std::isnan(x)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_csv(const CsvTable& t, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
  out << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
    out << "\n";
  }
  if (!out) throw Error("failed writing " + file.string());
}

/// Writes report.json and the CSV bundle into dir; returns the written paths.
inline std::vector<std::filesystem::path> emit_report(const RunReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw Error("cannot create output directory " + dir.string());
  std::vector<std::filesystem::path> written;
  if (r.config.emit_json) {
    const auto p = dir / "report.json";
    std::ofstream out(p);
    if (!out) throw Error("cannot write " + p.string());
    out << report_json(r).dump(2) << "\n";
    if (!out) throw Error("failed writing " + p.string());
    written.push_back(p);
  }
  if (r.config.emit_csv)
    for (const auto& t : r.tables) {
      const auto p = dir / (t.name + ".csv");
      write_csv(t, p);
      written.push_back(p);
    }
  return written;
}

}  // namespace decaylab::cli
