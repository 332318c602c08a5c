#pragma once

// Scenario configuration (JSON), the named regime templates, run
// orchestration and the CSV / JSON artifacts consumed by the plotting scripts.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "icqnls/diagnostics.hpp"
#include "icqnls/probes.hpp"
#include "json.hpp"

namespace icqnls {

using ojson = nlohmann::ordered_json;

enum ExitCode : int { kExitOk = 0, kExitBlowup = 2, kExitAssertion = 3, kExitConfig = 4 };

struct InitialDatum {
  std::string type = "gaussian";  // gaussian | harmonic_gaussian | from_checkpoint
  double amplitude = 1.0;
  std::optional<double> threshold_multiple;  // amplitude relative to the zero-energy amplitude
  double width = 1.0;
  std::array<double, 3> center{};
  std::array<double, 3> boost_velocity{};
  int degree = 0;
  int order = 0;
  std::string path;
};

struct DiagnosticsConfig {
  bool enabled = true;
  int stride = 1;
  bool hl11 = false;
  bool residuals = true;
  std::vector<double> monitor_times;                  // snapshot times for the scattering monitor
  std::optional<std::array<double, 2>> decay_window;  // potential-decay fit window
  std::optional<std::array<double, 2>> spacetime;     // (q, r)
};

struct BlowupConfig {
  double alpha = 0.0;
  double grad_factor = 10.0;
  double energy_jump = 0.01;
  bool expected = false;
  double margin_tolerance = 1e-3;  // concavity margin floor, relative to the initial variance
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::string template_name;  // conservation | blowup | scattering | nonscattering | identities | lwp
  int n_per_axis = 64;
  double half_length = 8.0;
  bool offset = false;
  CoefficientSpec coefficients;
  InitialDatum initial;
  StepperConfig stepper;
  DiagnosticsConfig diagnostics;
  std::vector<ProbeSpec> probes;
  std::string outputs = "out";
  std::uint64_t seed = 0;
  BlowupConfig blowup;
  bool write_checkpoint = false;
  bool has_run = true;      // false for probe-only configs
  std::string source_path;  // for resolving relative paths
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

/// Line of the first occurrence of "key" in the raw text, or 1.
inline int line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  if (pos == std::string::npos) return 1;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

struct ConfigReader {
  std::string path;
  std::string text;

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(path + ":" + std::to_string(line_of_key(text, key)) + ": " + msg);
  }

  const ojson& require_block(const ojson& j, const std::string& key) const {
    if (!j.contains(key)) throw ConfigError(path + ":1: missing required block '" + key + "'");
    if (!j[key].is_object()) fail(key, "'" + key + "' must be an object");
    return j[key];
  }

  template <class T>
  T get(const ojson& j, const std::string& key, T fallback) const {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
      return j[key].get<T>();
    } catch (const nlohmann::json::exception&) {
      fail(key, "field '" + key + "' has the wrong type");
    }
  }

  template <class T>
  T need(const ojson& j, const std::string& key) const {
    if (!j.contains(key)) fail(key, "missing required field '" + key + "'");
    return get<T>(j, key, T{});
  }

  double number(const ojson& j, const std::string& key, double fallback) const {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    if (j[key].is_string()) {
      const auto s = j[key].get<std::string>();
      if (s == "inf") return kInf;
      fail(key, "field '" + key + "' must be a number");
    }
    if (!j[key].is_number()) fail(key, "field '" + key + "' must be a number");
    return j[key].get<double>();
  }
};

inline ProbeSpec parse_probe(const ConfigReader& r, const ojson& j, std::uint64_t default_seed) {
  ProbeSpec p;
  if (!j.is_object()) throw ConfigError(r.path + ":" + std::to_string(line_of_key(r.text, "probes")) +
                                        ": probe entries must be objects");
  p.kind = probe_kind_from_string(r.need<std::string>(j, "kind"));
  if (j.contains("params")) {
    const auto& q = j["params"];
    p.params.s = r.number(q, "s", p.params.s);
    p.params.p = r.number(q, "p", p.params.p);
    p.params.b = r.number(q, "b", p.params.b);
    p.params.eps = r.number(q, "eps", p.params.eps);
    p.params.theta = r.number(q, "theta", p.params.theta);
    p.params.heat_t = r.number(q, "heat_t", p.params.heat_t);
    p.params.times = r.get<std::vector<double>>(q, "times", p.params.times);
    const auto m = r.get<std::string>(q, "multiplier", "heat");
    if (m == "heat") p.params.multiplier = MultiplierKind::heat;
    else if (m == "fractional") p.params.multiplier = MultiplierKind::fractional;
    else r.fail("multiplier", "unknown multiplier '" + m + "'");
  }
  p.ensemble.seed = default_seed;
  if (j.contains("ensemble")) {
    const auto& e = j["ensemble"];
    p.ensemble.generator = ensemble_generator_from_string(r.get<std::string>(e, "generator", "gaussian_harmonic"));
    p.ensemble.count = r.get<int>(e, "count", p.ensemble.count);
    p.ensemble.seed = r.get<std::uint64_t>(e, "seed", default_seed);
  }
  if (j.contains("grid")) {
    p.grid.n_per_axis = r.get<int>(j["grid"], "n_per_axis", p.grid.n_per_axis);
    p.grid.half_length = r.number(j["grid"], "half_length", p.grid.half_length);
  }
  if (j.contains("ceiling") && !j["ceiling"].is_null()) p.ceiling = r.number(j, "ceiling", kInf);
  return p;
}

inline std::array<double, 3> vec3(const ConfigReader& r, const ojson& j, const std::string& key) {
  auto v = r.get<std::vector<double>>(j, key, {0.0, 0.0, 0.0});
  if (v.size() != 3) r.fail(key, "'" + key + "' must have three entries");
  return {v[0], v[1], v[2]};
}

}  // namespace detail

/// Parses and validates a scenario from JSON text; `path` labels messages.
inline ScenarioConfig parse_scenario(const std::string& text, const std::string& path = "<config>") {
  detail::ConfigReader r{path, text};
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path + ":1: top level must be an object");

  ScenarioConfig c;
  c.source_path = path;
  c.name = r.get<std::string>(j, "name", c.name);
  c.template_name = r.get<std::string>(j, "template", "");
  c.seed = r.get<std::uint64_t>(j, "seed", 0);
  c.outputs = r.get<std::string>(j, "outputs", "out/" + c.name);
  c.write_checkpoint = r.get<bool>(j, "checkpoint", false);

  const bool probe_only = j.contains("probes") && !j.contains("stepper");
  c.has_run = !probe_only;
  if (!probe_only || j.contains("grid")) {
    const auto& g = r.require_block(j, "grid");
    c.n_per_axis = r.need<int>(g, "n_per_axis");
    c.half_length = r.number(g, "half_length", c.half_length);
    c.offset = r.get<bool>(g, "offset", false);
  }
  if (j.contains("coefficients")) {
    const auto& k = r.require_block(j, "coefficients");
    c.coefficients = {r.number(k, "lambda1", 0.0), r.number(k, "b1", 0.0), r.number(k, "lambda2", 0.0),
                      r.number(k, "b2", 0.0)};
  }
  if (j.contains("initial_datum")) {
    const auto& d = r.require_block(j, "initial_datum");
    auto& i = c.initial;
    i.type = r.need<std::string>(d, "type");
    i.width = r.number(d, "width", 1.0);
    i.amplitude = r.number(d, "amplitude", 1.0);
    if (d.contains("threshold_multiple")) i.threshold_multiple = r.number(d, "threshold_multiple", 1.0);
    i.center = detail::vec3(r, d, "center");
    i.boost_velocity = detail::vec3(r, d, "boost_velocity");
    i.degree = r.get<int>(d, "degree", 0);
    i.order = r.get<int>(d, "order", 0);
    i.path = r.get<std::string>(d, "path", "");
    if (i.type != "gaussian" && i.type != "harmonic_gaussian" && i.type != "from_checkpoint")
      r.fail("type", "unknown initial_datum type '" + i.type + "'");
    if (!(i.width > 0.0)) r.fail("width", "initial_datum width must be positive");
    if (i.type == "harmonic_gaussian" && (i.degree < 0 || i.degree > 2 || std::abs(i.order) > i.degree))
      r.fail("degree", "harmonic_gaussian needs degree in {0,1,2} and |order| <= degree");
    if (i.type == "from_checkpoint" && i.path.empty()) r.fail("path", "from_checkpoint needs a path");
    if (i.threshold_multiple && (i.type != "gaussian" || i.center != std::array<double, 3>{} ||
                                 i.boost_velocity != std::array<double, 3>{}))
      r.fail("threshold_multiple", "threshold_multiple applies to centred, unboosted gaussians only");
  }
  if (j.contains("stepper")) {
    const auto& s = r.require_block(j, "stepper");
    auto& st = c.stepper;
    st.dt = r.number(s, "dt", st.dt);
    st.t_end = r.number(s, "t_end", st.t_end);
    st.t_start = r.number(s, "t_start", st.t_start);
    st.adaptive = r.get<bool>(s, "adaptive", false);
    st.max_phase_per_step = r.number(s, "max_phase_per_step", st.max_phase_per_step);
    st.snapshot_stride = r.get<int>(s, "snapshot_stride", 0);
    st.record_stride = r.get<int>(s, "record_stride", 1);
    st.min_dt = r.number(s, "min_dt", st.min_dt);
    try {
      st.validate();
    } catch (const ConfigError& e) {
      r.fail("stepper", e.what());
    }
  }
  if (j.contains("diagnostics")) {
    const auto& d = r.require_block(j, "diagnostics");
    auto& dg = c.diagnostics;
    dg.stride = r.get<int>(d, "stride", 1);
    if (dg.stride < 1) r.fail("stride", "diagnostics stride must be >= 1");
    if (d.contains("enabled")) {
      dg.enabled = true;
      const auto set = r.get<std::vector<std::string>>(d, "enabled", {});
      dg.hl11 = std::find(set.begin(), set.end(), "hl11") != set.end();
      dg.residuals = std::find(set.begin(), set.end(), "residuals") != set.end();
      for (const auto& e : set)
        if (e != "hl11" && e != "residuals" && e != "conservation")
          r.fail("enabled", "unknown diagnostic '" + e + "'");
    }
    dg.monitor_times = r.get<std::vector<double>>(d, "monitor_times", {});
    if (d.contains("decay_window")) {
      auto w = r.get<std::vector<double>>(d, "decay_window", {});
      if (w.size() != 2) r.fail("decay_window", "decay_window must be [t1, t2]");
      dg.decay_window = std::array<double, 2>{w[0], w[1]};
    }
    if (d.contains("spacetime")) {
      auto w = r.get<std::vector<double>>(d, "spacetime", {});
      if (w.size() != 2) r.fail("spacetime", "spacetime must be [q, r]");
      dg.spacetime = std::array<double, 2>{w[0], w[1]};
    }
  }
  c.stepper.record_stride = c.diagnostics.stride;
  if (j.contains("blowup")) {
    const auto& b = r.require_block(j, "blowup");
    c.blowup.alpha = r.number(b, "alpha", 0.0);
    c.blowup.grad_factor = r.number(b, "grad_factor", 10.0);
    c.blowup.energy_jump = r.number(b, "energy_jump", 0.01);
    c.blowup.expected = r.get<bool>(b, "expected", c.template_name == "blowup");
    c.blowup.margin_tolerance = r.number(b, "margin_tolerance", 1e-3);
    if (c.blowup.alpha < 0.0) r.fail("alpha", "blowup alpha must be >= 0");
  } else {
    c.blowup.expected = c.template_name == "blowup";
  }
  if (j.contains("probes")) {
    if (!j["probes"].is_array()) r.fail("probes", "'probes' must be a list");
    std::uint64_t idx = 0;
    for (const auto& p : j["probes"]) {
      try {
        c.probes.push_back(detail::parse_probe(r, p, c.seed + idx));
      } catch (const ParameterError& e) {
        r.fail("probes", e.what());
      }
      ++idx;
    }
    for (const auto& p : c.probes) {
      try {
        p.validate();
      } catch (const ParameterError& e) {
        r.fail("probes", e.what());
      }
    }
  }

  if (!probe_only) {
    if (!j.contains("initial_datum")) throw ConfigError(path + ":1: missing required block 'initial_datum'");
    if (!j.contains("stepper")) throw ConfigError(path + ":1: missing required block 'stepper'");
    try {
      c.coefficients.validate();
      (void)make_grid(c.n_per_axis, c.half_length, c.offset);
    } catch (const ConfigError& e) {
      r.fail("grid", e.what());
    }
    const auto& k = c.coefficients;
    const auto& t = c.template_name;
    if (t == "scattering" && !(k.b1 < 2.0 / 3.0 && k.b2 < 8.0 / 3.0))
      r.fail("coefficients", "scattering template requires b1 < 2/3 and b2 < 8/3");
    if (t == "nonscattering" && !(k.b1 >= 2.0 && k.b2 > 0.0 && k.b2 < 3.0 + k.b1))
      r.fail("coefficients", "nonscattering template requires b1 >= 2 and 0 < b2 < 3 + b1");
    if ((t == "blowup" || c.blowup.expected) && !(k.lambda1 <= 0.0 && k.lambda2 <= 0.0))
      r.fail("coefficients", "blowup scenarios require lambda1, lambda2 <= 0");
    if (!t.empty() && t != "conservation" && t != "blowup" && t != "scattering" && t != "nonscattering" &&
        t != "identities" && t != "lwp")
      r.fail("template", "unknown template '" + t + "'");
    if (!c.diagnostics.monitor_times.empty() && c.stepper.adaptive)
      r.fail("monitor_times", "monitor_times require fixed-step mode");
    if (t == "scattering" && c.diagnostics.monitor_times.empty()) {
      for (double m = 1.0; m <= c.stepper.t_end * (1.0 + 1e-12); m *= 2.0)
        if (m >= c.stepper.t_start) c.diagnostics.monitor_times.push_back(m);
      if (c.stepper.adaptive) r.fail("adaptive", "scattering template requires fixed-step mode");
    }
    if (t == "scattering") c.diagnostics.hl11 = true;
    if (t == "nonscattering" && !c.diagnostics.decay_window)
      c.diagnostics.decay_window = std::array<double, 2>{std::max(1.0, c.stepper.t_start), c.stepper.t_end};
    if (t == "identities" || t == "conservation") c.diagnostics.residuals = true;
  }
  return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

// ---------------------------------------------------------------------------
// Initial data

struct InitialState {
  ComplexField field;
  double t = 0.0;
};

inline InitialState build_initial(const ScenarioConfig& c) {
  const auto& d = c.initial;
  if (d.type == "from_checkpoint") {
    std::filesystem::path p(d.path);
    if (p.is_relative() && !c.source_path.empty()) p = std::filesystem::path(c.source_path).parent_path() / p;
    auto ck = load_checkpoint(p.string());
    return {std::move(ck.field), ck.t};
  }
  auto g = make_grid(c.n_per_axis, c.half_length, c.offset);
  double amp = d.amplitude;
  if (d.threshold_multiple) {
    auto a0 = zero_energy_amplitude(c.coefficients, d.width);
    if (!a0) throw ConfigError(c.source_path + ": threshold_multiple given but the Gaussian energy never vanishes");
    amp = *d.threshold_multiple * *a0;
  }
  const double w2 = d.width * d.width;
  auto f = ComplexField::from_function(g, [&](double x, double y, double z) {
    const double dx = x - d.center[0], dy = y - d.center[1], dz = z - d.center[2];
    cplx v = amp * std::exp(-(dx * dx + dy * dy + dz * dz) / (2.0 * w2));
    if (d.type == "harmonic_gaussian") v *= solid_harmonic(d.degree, d.order, dx, dy, dz);
    const double kx = 0.5 * (d.boost_velocity[0] * x + d.boost_velocity[1] * y + d.boost_velocity[2] * z);
    if (kx != 0.0) v *= std::polar(1.0, kx);
    return v;
  });
  return {std::move(f), c.stepper.t_start};
}

// ---------------------------------------------------------------------------
// Serialization

inline const char* kCsvColumns =
    "t,mass,energy,grad_norm2,variance,dilation,potential,hl11_norm,galilean_norm2,scatter_distance,"
    "interaction_gap,overlap_H,virial_residual,dilation_residual,pconf_residual";

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17e", v);
  return buf;
}

inline void write_timeseries_csv(const std::string& path, const std::vector<DiagnosticRecord>& recs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << kCsvColumns << '\n';
  for (const auto& r : recs) {
    const double cols[] = {r.t,         r.mass,           r.energy,          r.grad_norm2,      r.variance,
                           r.dilation,  r.potential,      r.hl11_norm,       r.galilean_norm2,  r.scatter_distance,
                           r.interaction_gap, r.overlap_H, r.virial_residual, r.dilation_residual, r.pconf_residual};
    for (std::size_t i = 0; i < std::size(cols); ++i) out << (i ? "," : "") << csv_number(cols[i]);
    out << '\n';
  }
}

/// JSON number, with non-finite values as null.
inline ojson jnum(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

inline ojson jseries(const std::vector<double>& v) {
  ojson a = ojson::array();
  for (double x : v) a.push_back(jnum(x));
  return a;
}

inline void write_json(const std::string& path, const ojson& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << j.dump(2) << '\n';
}

inline ojson probe_report_json(const ProbeSpec& s, const ProbeReport& r) {
  ojson j;
  j["kind"] = to_string(r.kind);
  j["params"] = {{"s", s.params.s},         {"p", jnum(s.params.p)},   {"b", s.params.b},
                 {"eps", s.params.eps},     {"theta", s.params.theta}, {"times", s.params.times},
                 {"multiplier", s.params.multiplier == MultiplierKind::heat ? "heat" : "fractional"},
                 {"heat_t", s.params.heat_t}};
  j["ensemble"] = {{"generator", to_string(s.ensemble.generator)}, {"count", s.ensemble.count},
                   {"seed", s.ensemble.seed}};
  j["grid"] = {{"n_per_axis", s.grid.n_per_axis}, {"half_length", s.grid.half_length}};
  j["ceiling"] = jnum(r.ceiling);
  j["worst_ratio"] = jnum(r.worst_ratio);
  j["worst_case_id"] = r.worst_case_id;
  j["pass"] = r.pass;
  j["skipped"] = r.skipped;
  j["boundary_warnings"] = r.boundary_warnings;
  j["ratios"] = jseries(r.ratios);
  if (s.kind == ProbeKind::second_order_equivalence) {
    j["worst_reverse_ratio"] = jnum(r.worst_reverse_ratio);
    j["reverse_ratios"] = jseries(r.reverse_ratios);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Running

struct Assertion {
  std::string name;
  double measured = kNaN;
  double tolerance = kNaN;
  std::string relation;  // "<=" or ">="
  bool pass = false;
};

inline Assertion check_le(std::string name, double measured, double tol) {
  return {std::move(name), measured, tol, "<=", std::isfinite(measured) && measured <= tol};
}
inline Assertion check_ge(std::string name, double measured, double tol) {
  return {std::move(name), measured, tol, ">=", std::isfinite(measured) && measured >= tol};
}

struct ScenarioResult {
  int exit_code = kExitOk;
  std::string verdict;
  Trajectory trajectory;
  ojson summary;
  std::vector<Assertion> assertions;
};

struct RunOptions {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = true;
  bool write_files = true;
};

namespace detail {

inline double max_rel_drift(const std::vector<DiagnosticRecord>& recs, double DiagnosticRecord::*field, double scale) {
  double m = 0.0;
  if (recs.empty() || !(scale > 0.0)) return 0.0;
  const double v0 = recs.front().*field;
  for (const auto& r : recs) m = std::max(m, std::abs(r.*field - v0) / scale);
  return m;
}

inline double max_abs_field(const std::vector<DiagnosticRecord>& recs, double DiagnosticRecord::*field) {
  double m = 0.0;
  for (const auto& r : recs)
    if (std::isfinite(r.*field)) m = std::max(m, std::abs(r.*field));
  return m;
}

inline double energy_scale(const DiagnosticRecord& r0) {
  return std::max(0.5 * r0.grad_norm2 + std::abs(r0.potential), 1e-300);
}

inline ojson assertions_json(const std::vector<Assertion>& as) {
  ojson a = ojson::array();
  for (const auto& x : as)
    a.push_back({{"name", x.name}, {"measured", jnum(x.measured)}, {"relation", x.relation},
                 {"tolerance", jnum(x.tolerance)}, {"pass", x.pass}});
  return a;
}

inline ojson config_echo(const ScenarioConfig& c) {
  return {{"grid", {{"n_per_axis", c.n_per_axis}, {"half_length", c.half_length}, {"offset", c.offset}}},
          {"coefficients",
           {{"lambda1", c.coefficients.lambda1}, {"b1", c.coefficients.b1}, {"lambda2", c.coefficients.lambda2},
            {"b2", c.coefficients.b2}}},
          {"stepper",
           {{"dt", c.stepper.dt}, {"t_start", c.stepper.t_start}, {"t_end", c.stepper.t_end},
            {"adaptive", c.stepper.adaptive}, {"max_phase_per_step", c.stepper.max_phase_per_step}}},
          {"seed", c.seed}};
}

}  // namespace detail

/// Runs the evolution described by a scenario, evaluates the template's
/// checks and writes timeseries.csv and summary.json to the output directory.
inline ScenarioResult run_scenario(ScenarioConfig cfg, const RunOptions& opt = {}) {
  if (opt.seed) cfg.seed = *opt.seed;
  const std::string out_dir = opt.out_dir.value_or(cfg.outputs);
  ScenarioResult res;

  auto init = build_initial(cfg);
  const ComplexField& phi = init.field;
  const auto grid = phi.grid_ptr();
  StepperConfig st = cfg.stepper;
  st.t_start = init.t;
  if (!(st.t_end > st.t_start)) throw ConfigError(cfg.source_path + ": t_end must exceed the initial time");
  st.record_stride = cfg.diagnostics.stride;
  const bool blowup_run = cfg.template_name == "blowup" || cfg.blowup.expected;
  if (blowup_run) st.guard = {cfg.blowup.grad_factor, cfg.blowup.energy_jump};

  // snapshots at the monitor times
  std::vector<double> mon_times;
  std::vector<ComplexField> mon_snaps;
  const auto& wanted = cfg.diagnostics.monitor_times;
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };
  for (double m : wanted)
    if (near(st.t_start, m)) {
      mon_times.push_back(st.t_start);
      mon_snaps.push_back(phi);
    }
  std::vector<StepObserver> observers;
  if (!wanted.empty())
    observers.push_back([&](double t, const ComplexField& u) {
      for (double m : wanted)
        if (near(t, m)) {
          mon_times.push_back(t);
          mon_snaps.push_back(u);
          return;
        }
    });

  RecordFn recorder;
  if (cfg.diagnostics.enabled) recorder = make_recorder(grid, cfg.coefficients, {cfg.diagnostics.hl11});
  res.trajectory = strang_evolve(phi, cfg.coefficients, st, recorder, observers);
  auto& traj = res.trajectory;
  auto& recs = traj.records;
  if (cfg.diagnostics.residuals && !recs.empty()) fill_residuals(recs, cfg.coefficients);

  ojson s;
  s["name"] = cfg.name;
  s["template"] = cfg.template_name;
  s["status"] = to_string(traj.status);
  s["steps"] = traj.steps;
  s["final_time"] = traj.final_time;
  s["min_dt"] = jnum(traj.min_dt_used);
  s["config"] = detail::config_echo(cfg);

  std::vector<Assertion>& as = res.assertions;
  bool boundary = false;
  for (const auto& r : recs) boundary = boundary || r.boundary_warning;
  s["boundary_warning"] = boundary;

  if (!recs.empty()) {
    const auto& r0 = recs.front();
    const double mass_drift = detail::max_rel_drift(recs, &DiagnosticRecord::mass, r0.mass);
    const double energy_drift = detail::max_rel_drift(recs, &DiagnosticRecord::energy, detail::energy_scale(r0));
    s["initial"] = {{"mass", r0.mass},         {"energy", r0.energy},     {"grad_norm2", r0.grad_norm2},
                    {"variance", r0.variance}, {"dilation", r0.dilation}, {"potential", r0.potential}};
    s["conservation"] = {{"mass_drift", mass_drift}, {"energy_drift", energy_drift}};
    if (cfg.diagnostics.residuals)
      s["residuals"] = {{"virial_max", detail::max_abs_field(recs, &DiagnosticRecord::virial_residual)},
                        {"dilation_max", detail::max_abs_field(recs, &DiagnosticRecord::dilation_residual)},
                        {"pconf_max", detail::max_abs_field(recs, &DiagnosticRecord::pconf_residual)}};
    if (cfg.template_name == "conservation") as.push_back(check_le("mass_drift", mass_drift, 1e-10));
  }

  // blowup verdict against the concavity bound
  if (blowup_run && !recs.empty()) {
    const auto params = blowup_params_from(recs.front(), cfg.blowup.alpha);
    const auto bound = blowup_time_bound(params);
    const auto conc = concavity_check(recs, params);
    const double var0 = recs.front().variance;
    const double margin_rel = conc.min_margin / var0;
    const auto& ev = traj.events;
    ojson b;
    b["alpha"] = cfg.blowup.alpha;
    b["time_bound"] = bound ? ojson(*bound) : ojson(nullptr);
    b["grad_trigger_time"] = ev.grad_trigger_time ? ojson(*ev.grad_trigger_time) : ojson(nullptr);
    b["energy_jump_time"] = ev.energy_jump_time ? ojson(*ev.energy_jump_time) : ojson(nullptr);
    b["nonfinite_time"] = ev.nonfinite_time ? ojson(*ev.nonfinite_time) : ojson(nullptr);
    b["max_energy_jump"] = ev.max_energy_jump;
    b["initial_grad_norm"] = jnum(ev.initial_grad_norm);
    b["final_grad_norm"] = jnum(ev.final_grad_norm);
    b["min_concavity_margin"] = jnum(conc.min_margin);
    b["min_concavity_margin_rel"] = jnum(margin_rel);
    b["concavity_times"] = jseries(conc.times);
    b["concavity_margin"] = jseries(conc.margin);
    std::string verdict;
    const auto detected = ev.grad_trigger_time ? ev.grad_trigger_time : ev.nonfinite_time;
    if (detected && bound && *detected <= *bound * (1.0 + 1e-12)) verdict = "blowup-confirmed";
    else if (detected && bound) verdict = "blowup-after-bound";
    else if (detected) verdict = "blowup-without-bound";
    else if (bound && traj.final_time > *bound) verdict = "contradicts-concavity-bound";
    else verdict = "no-blowup-detected";
    b["verdict"] = verdict;
    res.verdict = verdict;
    s["blowup"] = b;
    if (cfg.blowup.expected) {
      as.push_back(check_le("blowup_detection_time_minus_bound",
                            detected && bound ? *detected - *bound : kNaN, 0.0));
      as.push_back(check_ge("concavity_margin_rel", margin_rel, -cfg.blowup.margin_tolerance));
    }
  }

  // interaction-picture monitor
  if (mon_snaps.size() >= 2) {
    auto mon = scattering_monitor(mon_times, mon_snaps, std::nullopt, cfg.diagnostics.hl11);
    for (auto& r : recs)
      for (std::size_t i = 0; i < mon.times.size(); ++i)
        if (near(r.t, mon.times[i])) {
          r.scatter_distance = mon.dist_l2[i];
          r.interaction_gap = mon.gap_l2[i];
          r.overlap_H = mon.overlap_H[i];
        }
    ojson m;
    m["times"] = jseries(mon.times);
    m["gap_l2"] = jseries(mon.gap_l2);
    m["gap_hl11"] = jseries(mon.gap_hl11);
    m["dist_l2"] = jseries(mon.dist_l2);
    m["dist_hl11"] = jseries(mon.dist_hl11);
    m["overlap_H"] = jseries(mon.overlap_H);
    m["boundary_warning"] = mon.boundary_warning;
    // φ₊ is w at the last monitor time, so the distance is read one monitor
    // interval earlier
    const std::size_t last = mon.times.size() - 1;
    m["final_distance_time"] = mon.times[last - 1];
    m["final_distance_l2"] = jnum(mon.dist_l2[last - 1]);
    double worst_l2 = kInf, worst_h = kInf;
    for (std::size_t i = 2; i < mon.times.size(); ++i) {
      if (mon.times[i - 2] < 2.0 - 1e-12) continue;  // compare intervals starting at t >= 2
      worst_l2 = std::min(worst_l2, mon.gap_l2[i - 1] / mon.gap_l2[i]);
      if (cfg.diagnostics.hl11) worst_h = std::min(worst_h, mon.gap_hl11[i - 1] / mon.gap_hl11[i]);
    }
    m["min_gap_decrease_l2"] = jnum(worst_l2);
    m["min_gap_decrease_hl11"] = jnum(worst_h);
    s["scattering"] = m;
    if (cfg.template_name == "scattering") {
      as.push_back(check_ge("gap_decrease_l2", worst_l2, 2.0));
      as.push_back(check_ge("gap_decrease_hl11", worst_h, 2.0));
      as.push_back(check_le("final_distance_l2", mon.dist_l2[last - 1], 1e-3));
    }
  }

  if (cfg.diagnostics.decay_window && !recs.empty()) {
    const auto [t1, t2] = *cfg.diagnostics.decay_window;
    ojson d;
    d["window"] = {t1, t2};
    try {
      const auto fit = potential_decay_fit(recs, t1, t2);
      d["valid"] = fit.valid;
      d["slope"] = jnum(fit.slope);
      d["constant"] = jnum(fit.constant);
      d["samples"] = fit.samples;
      d["bound"] = cfg.coefficients.b1 - 1.0;
      if (!fit.valid) d["reason"] = fit.reason;
      if (cfg.template_name == "nonscattering")
        as.push_back(check_le("decay_slope", fit.valid ? fit.slope : kNaN, cfg.coefficients.b1 - 1.0 + 0.2));
    } catch (const InsufficientDataError& e) {
      d["valid"] = false;
      d["reason"] = e.what();
      if (cfg.template_name == "nonscattering") as.push_back(check_le("decay_slope", kNaN, 0.0));
    }
    s["decay_fit"] = d;
  }

  if (cfg.diagnostics.spacetime && traj.snapshots.size() >= 2) {
    const auto [q, r] = *cfg.diagnostics.spacetime;
    const auto stn = spacetime_norm(traj.snapshot_times, traj.snapshots, SpaceTimeNormSpec(q, r));
    s["spacetime"] = {{"q", jnum(q)}, {"r", jnum(r)}, {"value", stn.value}, {"admissible", stn.admissible}};
  }

  // verdict and exit status
  const Assertion* failed = nullptr;
  for (const auto& a : as)
    if (!a.pass) {
      failed = &a;
      break;
    }
  if (failed) res.exit_code = kExitAssertion;
  else if (traj.status == RunStatus::blowup_detected || traj.status == RunStatus::nonfinite) res.exit_code = kExitBlowup;
  else if (traj.status == RunStatus::dt_underflow) res.exit_code = blowup_run ? kExitBlowup : kExitAssertion;
  if (res.verdict.empty()) res.verdict = failed ? "assertion-failed" : to_string(traj.status);
  s["assertions"] = detail::assertions_json(as);
  s["first_failed_assertion"] =
      failed ? ojson{{"name", failed->name}, {"measured", jnum(failed->measured)}, {"relation", failed->relation},
                     {"tolerance", jnum(failed->tolerance)}}
             : ojson(nullptr);
  s["verdict"] = res.verdict;
  s["exit_code"] = res.exit_code;
  res.summary = s;

  if (opt.write_files) {
    std::filesystem::create_directories(out_dir);
    write_timeseries_csv(out_dir + "/timeseries.csv", recs);
    write_json(out_dir + "/summary.json", s);
    if (cfg.write_checkpoint) save_checkpoint(out_dir + "/checkpoint.bin", traj.final_state, traj.final_time);
  }
  return res;
}

struct ProbeRunResult {
  int exit_code = kExitOk;
  std::vector<ProbeReport> reports;
  ojson summary;
};

/// Runs every probe of a scenario and writes probe_<i>_<kind>.json files.
inline ProbeRunResult run_probes(ScenarioConfig cfg, const RunOptions& opt = {}) {
  if (cfg.probes.empty()) throw ConfigError(cfg.source_path + ": probes list is empty");
  if (opt.seed)
    for (std::size_t i = 0; i < cfg.probes.size(); ++i) cfg.probes[i].ensemble.seed = *opt.seed + i;
  const std::string out_dir = opt.out_dir.value_or(cfg.outputs);
  if (opt.write_files) std::filesystem::create_directories(out_dir);
  ProbeRunResult res;
  ojson list = ojson::array();
  for (std::size_t i = 0; i < cfg.probes.size(); ++i) {
    const auto& spec = cfg.probes[i];
    auto rep = probe(spec);
    const std::string file = "probe_" + std::to_string(i) + "_" + to_string(spec.kind) + ".json";
    if (opt.write_files) write_json(out_dir + "/" + file, probe_report_json(spec, rep));
    list.push_back({{"file", file}, {"kind", to_string(spec.kind)}, {"worst_ratio", jnum(rep.worst_ratio)},
                    {"ceiling", jnum(rep.ceiling)}, {"pass", rep.pass}});
    if (!rep.pass) res.exit_code = kExitAssertion;
    res.reports.push_back(std::move(rep));
  }
  res.summary = {{"name", cfg.name}, {"probes", list}, {"exit_code", res.exit_code}};
  if (opt.write_files) write_json(out_dir + "/probes_summary.json", res.summary);
  return res;
}

struct LadderLevel {
  double dt = 0.0;
  double mass_drift = 0.0;
  double energy_drift = 0.0;
  double virial_max = 0.0;
  double dilation_max = 0.0;
  double pconf_max = 0.0;
};

struct LadderResult {
  int exit_code = kExitOk;
  std::vector<LadderLevel> levels;
  ojson summary;
};

/// Residual levels below this are roundoff and excluded from order checks.
inline constexpr double kLadderFloor = 1e-11;

/// Repeats a scenario with dt, dt/2, ... and checks second-order decrease
/// (ratio in [3, 5]) of the energy drift and the three identity residuals.
inline LadderResult run_identity_ladder(ScenarioConfig cfg, int levels, const RunOptions& opt = {}) {
  if (levels < 2) throw ConfigError("identities: dt ladder needs at least 2 levels");
  if (cfg.stepper.adaptive) throw ConfigError("identities: the dt ladder requires fixed-step mode");
  cfg.diagnostics.residuals = true;
  const std::string out_dir = opt.out_dir.value_or(cfg.outputs);
  LadderResult res;
  ojson lv = ojson::array();
  for (int k = 0; k < levels; ++k) {
    ScenarioConfig c = cfg;
    c.stepper.dt = cfg.stepper.dt / std::pow(2.0, k);
    c.diagnostics.monitor_times.clear();
    c.template_name = "identities";
    RunOptions o = opt;
    o.out_dir = out_dir + "/level_" + std::to_string(k);
    auto r = run_scenario(c, o);
    const auto& s = r.summary;
    LadderLevel L;
    L.dt = c.stepper.dt;
    L.mass_drift = s["conservation"]["mass_drift"].get<double>();
    L.energy_drift = s["conservation"]["energy_drift"].get<double>();
    L.virial_max = s["residuals"]["virial_max"].get<double>();
    L.dilation_max = s["residuals"]["dilation_max"].get<double>();
    L.pconf_max = s["residuals"]["pconf_max"].get<double>();
    res.levels.push_back(L);
    lv.push_back({{"dt", L.dt},
                  {"mass_drift", L.mass_drift},
                  {"energy_drift", L.energy_drift},
                  {"virial_max", L.virial_max},
                  {"dilation_max", L.dilation_max},
                  {"pconf_max", L.pconf_max}});
  }
  std::vector<Assertion> as;
  ojson ratios = ojson::array();
  for (std::size_t k = 1; k < res.levels.size(); ++k) {
    const auto& a = res.levels[k - 1];
    const auto& b = res.levels[k];
    ojson r;
    auto add = [&](const char* name, double x, double y) {
      if (x < kLadderFloor || y < kLadderFloor) {
        r[name] = nullptr;
        return;
      }
      const double q = x / y;
      r[name] = q;
      const std::string label = std::string(name) + "_ratio_" + std::to_string(k);
      as.push_back(check_ge(label, q, 3.0));
      as.push_back(check_le(label, q, 5.0));
    };
    add("energy_drift", a.energy_drift, b.energy_drift);
    add("virial", a.virial_max, b.virial_max);
    add("dilation", a.dilation_max, b.dilation_max);
    add("pconf", a.pconf_max, b.pconf_max);
    ratios.push_back(r);
  }
  double worst_mass = 0.0;
  for (const auto& L : res.levels) worst_mass = std::max(worst_mass, L.mass_drift);
  as.push_back(check_le("mass_drift", worst_mass, 1e-10));
  const Assertion* failed = nullptr;
  for (const auto& a : as)
    if (!a.pass && !failed) failed = &a;
  res.exit_code = failed ? kExitAssertion : kExitOk;
  res.summary = {{"name", cfg.name},
                 {"levels", lv},
                 {"ratios", ratios},
                 {"assertions", detail::assertions_json(as)},
                 {"first_failed_assertion",
                  failed ? ojson{{"name", failed->name}, {"measured", jnum(failed->measured)},
                                 {"relation", failed->relation}, {"tolerance", jnum(failed->tolerance)}}
                         : ojson(nullptr)},
                 {"exit_code", res.exit_code}};
  if (opt.write_files) {
    std::filesystem::create_directories(out_dir);
    write_json(out_dir + "/identities.json", res.summary);
  }
  return res;
}

}  // namespace icqnls
