#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "decaylab/bounds.hpp"
#include "decaylab/coeffs.hpp"
#include "decaylab/error.hpp"
#include "decaylab/spectral.hpp"

namespace decaylab::cli {

using json = nlohmann::ordered_json;

class ConfigError : public Error {
 public:
  using Error::Error;
};

inline const std::vector<std::string>& known_suites() {
  static const std::vector<std::string> s = {"simulate", "verify-bounds", "verify-lemmas", "fit-decay"};
  return s;
}

struct ModeSpec {
  double xi = 1.0, v0 = 1.0, v1 = 0.0;
};

struct FitTarget {
  std::string id;
  double t_lo = 0.0, t_hi = 0.0;
  bool has_band = false;
  double lo = 0.0, hi = 0.0;  // accepted exponent band when has_band
};

struct ModeFit {
  ModeSpec mode;
  FitTarget target;
};

struct ExperimentConfig {
  std::string name;
  std::string description;
  json resolved;  // after preset merge; embedded in the report
  std::uint64_t seed = 0;

  DissipativeCoefficient coeff;
  double N = 1.0;
  bool thm1 = false;
  double thm1_m_bar = 0.0, thm1_eps = 1.0;
  bool thm2 = false;
  double thm2_eps = 1.0;
  double bounds_eps = 1.0;  // eps used for the zone constants
  double horizon = 1e7;
  double tail_tol = 1e-4;

  double tol = 1e-9;
  double spectral_tol = 1e-8;
  double t_end = 1e3;
  int t_samples = 200;

  bool has_data = false;
  SpectralConfig spectral;
  RadialSpectrum u0 = RadialSpectrum::zero(), u1 = RadialSpectrum::zero();

  LatticeSpec lattice;
  bool lattice_enabled = true;
  bool thm1_lattice = true;
  int cross_solver_problems = 0;

  std::vector<std::string> suites;
  std::vector<ModeSpec> modes;
  bool m2_identity = false;
  double m2_threshold = 1e-6;

  bool fit_total = false;
  FitTarget total_fit;
  std::vector<ModeFit> mode_fits;

  std::string lemma_sweep = "small";

  std::string out_dir;
  bool emit_json = true, emit_csv = true;

  bool wants(const std::string& suite) const {
    for (const auto& s : suites)
      if (s == suite) return true;
    return false;
  }
};

// ---------------------------------------------------------------------------
// preset lookup

inline std::vector<std::filesystem::path> preset_dirs() {
  std::vector<std::filesystem::path> d;
  if (const char* e = std::getenv("DECAYLAB_PRESETS")) d.emplace_back(e);
#ifdef DECAYLAB_PRESET_DIR
  d.emplace_back(DECAYLAB_PRESET_DIR);
#endif
  d.emplace_back("presets");
  return d;
}

inline std::optional<std::filesystem::path> find_preset(const std::string& name) {
  for (const auto& dir : preset_dirs()) {
    const auto p = dir / (name + ".json");
    if (std::filesystem::is_regular_file(p)) return p;
  }
  return std::nullopt;
}

inline std::vector<std::pair<std::string, std::string>> list_presets() {
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::string> seen;
  for (const auto& dir : preset_dirs()) {
    if (!std::filesystem::is_directory(dir)) continue;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const auto name = f.stem().string();
      if (!seen.insert(name).second) continue;
      std::string desc;
      try {
        std::ifstream in(f);
        const auto j = json::parse(in);
        desc = j.value("description", "");
      } catch (const std::exception&) {
        desc = "(unreadable)";
      }
      out.emplace_back(name, desc);
    }
  }
  return out;
}

inline json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read config file " + p.string());
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

/// Loads a config file, or a preset by name, and applies "preset" inheritance.
inline json load_config_json(const std::string& path_or_name, int depth = 0) {
  if (depth > 8) throw ConfigError("preset inheritance too deep");
  json j;
  if (std::filesystem::is_regular_file(path_or_name)) {
    j = read_json_file(path_or_name);
  } else if (auto p = find_preset(path_or_name)) {
    j = read_json_file(*p);
  } else {
    throw ConfigError("config '" + path_or_name + "' is neither a file nor a known preset");
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  if (j.contains("preset")) {
    if (!j["preset"].is_string()) throw ConfigError("config/preset: must be a string");
    const auto base_name = j["preset"].get<std::string>();
    auto p = find_preset(base_name);
    if (!p) throw ConfigError("config/preset: unknown preset '" + base_name + "'");
    json base = load_config_json(p->string(), depth + 1);
    j.erase("preset");
    base.merge_patch(j);
    return base;
  }
  return j;
}

// ---------------------------------------------------------------------------
// schema-checked reading

class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  bool has(const std::string& k) const { return j_.contains(k) && !j_[k].is_null(); }

  void only(std::initializer_list<const char*> keys) const {
    if (!j_.is_object()) fail(path_, "must be an object");
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool ok = false;
      for (const char* k : keys) ok = ok || it.key() == k;
      if (!ok) fail(path_ + "/" + it.key(), "unknown key");
    }
  }

  Node child(const std::string& k) const {
    if (!has(k)) fail(path_ + "/" + k, "missing");
    if (!j_[k].is_object()) fail(path_ + "/" + k, "must be an object");
    return Node(j_[k], path_ + "/" + k);
  }

  double number(const std::string& k, std::optional<double> def = std::nullopt) const {
    if (!has(k)) {
      if (def) return *def;
      fail(path_ + "/" + k, "missing");
    }
    const auto& v = j_[k];
    if (!v.is_number()) fail(path_ + "/" + k, "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(path_ + "/" + k, "must be finite");
    return x;
  }
  double positive(const std::string& k, std::optional<double> def = std::nullopt) const {
    const double x = number(k, def);
    if (!(x > 0.0)) fail(path_ + "/" + k, "must be > 0");
    return x;
  }
  double nonnegative(const std::string& k, std::optional<double> def = std::nullopt) const {
    const double x = number(k, def);
    if (!(x >= 0.0)) fail(path_ + "/" + k, "must be >= 0");
    return x;
  }
  int integer(const std::string& k, std::optional<int> def, int min_value) const {
    if (!has(k)) {
      if (def) return *def;
      fail(path_ + "/" + k, "missing");
    }
    const auto& v = j_[k];
    if (!v.is_number_integer()) fail(path_ + "/" + k, "must be an integer");
    const auto x = v.get<long long>();
    if (x < min_value || x > 100000000) fail(path_ + "/" + k, "must be >= " + std::to_string(min_value));
    return static_cast<int>(x);
  }
  std::string string(const std::string& k, std::optional<std::string> def = std::nullopt) const {
    if (!has(k)) {
      if (def) return *def;
      fail(path_ + "/" + k, "missing");
    }
    if (!j_[k].is_string()) fail(path_ + "/" + k, "must be a string");
    return j_[k].get<std::string>();
  }
  bool boolean(const std::string& k, bool def) const {
    if (!has(k)) return def;
    if (!j_[k].is_boolean()) fail(path_ + "/" + k, "must be true or false");
    return j_[k].get<bool>();
  }
  std::vector<double> numbers(const std::string& k) const {
    std::vector<double> out;
    if (!has(k)) return out;
    const auto& v = j_[k];
    if (!v.is_array()) fail(path_ + "/" + k, "must be an array of numbers");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(path_ + "/" + k + "/" + std::to_string(i), "must be a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }
  std::vector<Node> array(const std::string& k) const {
    std::vector<Node> out;
    if (!has(k)) return out;
    const auto& v = j_[k];
    if (!v.is_array()) fail(path_ + "/" + k, "must be an array");
    for (std::size_t i = 0; i < v.size(); ++i) out.emplace_back(v[i], path_ + "/" + k + "/" + std::to_string(i));
    return out;
  }
  const json& raw() const { return j_; }

  [[noreturn]] static void fail(const std::string& path, const std::string& msg) { throw ConfigError(path + ": " + msg); }

 private:
  const json& j_;
  std::string path_;
};

inline RadialSpectrum parse_spectrum(const Node& n) {
  n.only({"shape", "amplitude", "scale", "r_min", "r_max", "exponent", "cutoff"});
  const auto shape = n.string("shape");
  const double a = n.number("amplitude", 1.0);
  RadialSpectrum s;
  if (shape == "Gaussian") {
    s = RadialSpectrum::gaussian(n.positive("scale", 1.0), a);
  } else if (shape == "CompactBump") {
    s = RadialSpectrum::compact_bump(n.nonnegative("r_min"), n.positive("r_max"), a);
  } else if (shape == "PowerTail") {
    s = RadialSpectrum::power_tail(n.nonnegative("exponent"), n.positive("cutoff", 1.0), a);
  } else if (shape == "Zero") {
    s = RadialSpectrum::zero();
  } else {
    Node::fail(n.path() + "/shape", "must be Gaussian, CompactBump, PowerTail or Zero");
  }
  try {
    s.validate();
  } catch (const PreconditionError& e) {
    Node::fail(n.path(), e.what());
  }
  return s;
}

inline FitTarget parse_fit(const Node& n, const std::string& id, double t_end) {
  n.only({"window", "target", "tolerance", "band", "xi", "v0", "v1"});
  FitTarget f;
  f.id = id;
  const auto w = n.numbers("window");
  if (!w.empty()) {
    if (w.size() != 2 || !(w[0] >= 0.0 && w[1] > w[0])) Node::fail(n.path() + "/window", "must be [t_lo, t_hi] with t_lo < t_hi");
    f.t_lo = w[0];
    f.t_hi = w[1];
  } else {
    f.t_lo = t_end / 100.0;
    f.t_hi = t_end;
  }
  if (f.t_hi > t_end * (1.0 + 1e-12)) Node::fail(n.path() + "/window", "extends past time/t_end");
  const auto band = n.numbers("band");
  if (!band.empty()) {
    if (band.size() != 2 || !(band[1] >= band[0])) Node::fail(n.path() + "/band", "must be [lo, hi]");
    f.has_band = true;
    f.lo = band[0];
    f.hi = band[1];
  } else if (n.has("target")) {
    const double t = n.number("target"), tol = n.positive("tolerance");
    f.has_band = true;
    f.lo = t - tol;
    f.hi = t + tol;
  }
  return f;
}

inline ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  c.resolved = j;
  Node root(j, "config");
  root.only({"name", "description", "seed", "sigma", "phase", "zones", "targets", "solver", "time", "data", "lattice",
             "suites", "simulate", "fit", "lemmas", "output", "constants"});
  c.name = root.string("name", "experiment");
  c.description = root.string("description", "");
  if (root.has("seed")) {
    if (!j["seed"].is_number_integer() || j["seed"].get<long long>() < 0) Node::fail("config/seed", "must be a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }

  // coefficient
  const Node sg = root.child("sigma");
  sg.only({"mean_m", "period_T", "cos_coeffs", "sin_coeffs", "regime"});
  c.coeff.sigma.mean_m = sg.number("mean_m");
  c.coeff.sigma.period_T = sg.positive("period_T", std::numbers::pi);
  c.coeff.sigma.cos_coeffs = sg.numbers("cos_coeffs");
  c.coeff.sigma.sin_coeffs = sg.numbers("sin_coeffs");
  const auto regime = sg.string("regime", "NonNegative");
  if (regime == "NonNegative")
    c.coeff.sigma.regime = Regime::NonNegative;
  else if (regime == "NonEffective")
    c.coeff.sigma.regime = Regime::NonEffective;
  else
    Node::fail("config/sigma/regime", "must be NonNegative or NonEffective");
  const Node ph = root.child("phase");
  ph.only({"family", "param"});
  const auto fam = ph.string("family");
  const double prm = ph.positive("param");
  try {
    if (fam == "PowerLaw")
      c.coeff.phase = PhaseFunction::power_law(prm);
    else if (fam == "LogPower")
      c.coeff.phase = PhaseFunction::log_power(prm);
    else if (fam == "LogLogPower")
      c.coeff.phase = PhaseFunction::loglog_power(prm);
    else
      Node::fail("config/phase/family", "must be PowerLaw, LogPower or LogLogPower");
  } catch (const AssumptionViolation& e) {
    Node::fail("config/phase/param", e.what());
  }
  try {
    c.coeff.validate();
  } catch (const Error& e) {
    Node::fail("config/sigma", e.what());
  }

  if (root.has("zones")) {
    const Node z = root.child("zones");
    z.only({"N", "eps"});
    c.N = z.number("N", 1.0);
    if (!(c.N >= 1.0)) Node::fail("config/zones/N", "must be >= 1");
    c.bounds_eps = z.positive("eps", 1.0);
  }
  if (root.has("targets")) {
    const Node t = root.child("targets");
    t.only({"thm1", "thm2"});
    if (t.has("thm1")) {
      const Node a = t.child("thm1");
      a.only({"m_bar", "eps"});
      c.thm1 = true;
      c.thm1_m_bar = a.positive("m_bar");
      c.thm1_eps = a.positive("eps", c.bounds_eps);
    }
    if (t.has("thm2")) {
      const Node a = t.child("thm2");
      a.only({"eps"});
      c.thm2 = true;
      c.thm2_eps = a.positive("eps", c.bounds_eps);
    }
  }
  if (root.has("constants")) {
    const Node k = root.child("constants");
    k.only({"horizon", "tail_tol"});
    c.horizon = k.positive("horizon", c.horizon);
    c.tail_tol = k.positive("tail_tol", c.tail_tol);
  }
  if (root.has("solver")) {
    const Node s = root.child("solver");
    s.only({"tol", "spectral_tol"});
    c.tol = s.positive("tol", c.tol);
    c.spectral_tol = s.positive("spectral_tol", c.spectral_tol);
  }
  if (root.has("time")) {
    const Node t = root.child("time");
    t.only({"t_end", "samples"});
    c.t_end = t.positive("t_end", c.t_end);
    c.t_samples = t.integer("samples", c.t_samples, 2);
  }
  if (root.has("data")) {
    const Node d = root.child("data");
    d.only({"dimension", "grid", "u0", "u1"});
    c.has_data = true;
    c.spectral.dimension = d.integer("dimension", 1, 1);
    if (d.has("grid")) {
      const Node g = d.child("grid");
      g.only({"xi_min", "xi_max", "count"});
      c.spectral.xi_min = g.positive("xi_min", c.spectral.xi_min);
      c.spectral.xi_max = g.positive("xi_max", c.spectral.xi_max);
      c.spectral.count = g.integer("count", c.spectral.count, 3);
      if (!(c.spectral.xi_max > c.spectral.xi_min)) Node::fail("config/data/grid", "xi_max must exceed xi_min");
    }
    if (d.has("u0")) c.u0 = parse_spectrum(d.child("u0"));
    if (d.has("u1")) c.u1 = parse_spectrum(d.child("u1"));
  }
  if (root.has("lattice")) {
    const Node l = root.child("lattice");
    l.only({"enabled", "n_xi", "n_t", "t_end", "xi_min", "xi_max", "thm1_modes", "cross_solver_problems"});
    c.lattice_enabled = l.boolean("enabled", true);
    c.lattice.n_xi = l.integer("n_xi", c.lattice.n_xi, 1);
    c.lattice.n_t = l.integer("n_t", c.lattice.n_t, 2);
    c.lattice.t_end = l.positive("t_end", c.lattice.t_end);
    c.lattice.xi_min = l.positive("xi_min", c.lattice.xi_min);
    c.lattice.xi_max = l.positive("xi_max", c.lattice.xi_max);
    c.thm1_lattice = l.boolean("thm1_modes", true);
    c.cross_solver_problems = l.integer("cross_solver_problems", 0, 0);
  }
  c.lattice.tol = c.tol;

  if (root.has("suites")) {
    const auto& s = j["suites"];
    if (!s.is_array()) Node::fail("config/suites", "must be an array of suite names");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!s[i].is_string()) Node::fail("config/suites/" + std::to_string(i), "must be a string");
      const auto name = s[i].get<std::string>();
      if (std::find(known_suites().begin(), known_suites().end(), name) == known_suites().end())
        Node::fail("config/suites/" + std::to_string(i), "unknown suite '" + name + "'");
      c.suites.push_back(name);
    }
  }
  if (root.has("simulate")) {
    const Node s = root.child("simulate");
    s.only({"modes", "m2_identity", "m2_threshold"});
    for (const auto& m : s.array("modes")) {
      m.only({"xi", "v0", "v1"});
      c.modes.push_back({m.nonnegative("xi"), m.number("v0", 1.0), m.number("v1", 0.0)});
    }
    c.m2_identity = s.boolean("m2_identity", false);
    c.m2_threshold = s.positive("m2_threshold", c.m2_threshold);
    if (c.m2_identity && (c.coeff.sigma.mean_m != 2.0 || c.coeff.sigma.n_max() != 0))
      Node::fail("config/simulate/m2_identity", "needs sigma.mean_m = 2 and no oscillating terms");
  }
  if (root.has("fit")) {
    const Node f = root.child("fit");
    f.only({"total", "modes"});
    if (f.has("total")) {
      c.fit_total = true;
      c.total_fit = parse_fit(f.child("total"), "total", c.t_end);
    }
    int i = 0;
    for (const auto& m : f.array("modes")) {
      ModeFit mf;
      mf.mode = {m.nonnegative("xi"), m.number("v0", 1.0), m.number("v1", 0.0)};
      mf.target = parse_fit(m, "mode_" + std::to_string(i++), c.t_end);
      c.mode_fits.push_back(mf);
    }
  }
  if (root.has("lemmas")) {
    const Node l = root.child("lemmas");
    l.only({"sweep"});
    c.lemma_sweep = l.string("sweep", "small");
    if (c.lemma_sweep != "small" && c.lemma_sweep != "full") Node::fail("config/lemmas/sweep", "must be small or full");
  }
  if (root.has("output")) {
    const Node o = root.child("output");
    o.only({"dir", "formats"});
    c.out_dir = o.string("dir", "");
    if (o.has("formats")) {
      c.emit_json = c.emit_csv = false;
      const auto& f = j["output"]["formats"];
      if (!f.is_array()) Node::fail("config/output/formats", "must be an array");
      for (std::size_t i = 0; i < f.size(); ++i) {
        const auto v = f[i].is_string() ? f[i].get<std::string>() : "";
        if (v == "json")
          c.emit_json = true;
        else if (v == "csv_bundle")
          c.emit_csv = true;
        else
          Node::fail("config/output/formats/" + std::to_string(i), "must be json or csv_bundle");
      }
    }
  }

  // cross-field requirements
  const bool needs_bounds = c.wants("verify-bounds");
  if (needs_bounds && !(c.coeff.sigma.mean_m > 0.0)) Node::fail("config/sigma/mean_m", "verify-bounds needs m > 0");
  if (c.thm1 && needs_bounds) {
    const double mb0 = m_bar0(c.coeff.sigma.regime, c.coeff.sigma.mean_m);
    if (c.thm1_m_bar > mb0) Node::fail("config/targets/thm1/m_bar", "must not exceed " + std::to_string(mb0));
  }
  if (c.fit_total && !c.has_data) Node::fail("config/fit/total", "needs a data section");
  return c;
}

inline ExperimentConfig load_config(const std::string& path_or_name) { return parse_config(load_config_json(path_or_name)); }

}  // namespace decaylab::cli
