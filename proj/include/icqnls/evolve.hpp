#pragma once

// Time integration of  i u_t = -Δu + K_1|u|²u + K_2|u|⁴u  on the periodic box:
// exact free propagator, exact pointwise nonlinear phase flow, Strang
// splitting, and an independent Picard iteration of the Duhamel formula.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "icqnls/model.hpp"
#include "icqnls/record.hpp"

namespace icqnls {

/// Finite triggers that turn the blowup alternative into a decision.
struct BlowupGuard {
  double grad_factor = 0.0;  // stop when ‖∇u‖₂ >= grad_factor * ‖∇φ‖₂ (0 disables)
  double energy_jump = 0.0;  // flag single-step relative energy change above this (0 disables)
};

struct StepperConfig {
  double dt = 1e-3;
  double t_end = 1.0;
  double t_start = 0.0;
  bool adaptive = false;
  double max_phase_per_step = 0.1;
  int snapshot_stride = 0;  // 0 keeps only the initial and final states
  int record_stride = 1;
  double min_dt = 1e-12;
  BlowupGuard guard;

  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("stepper: dt must be positive");
    if (!(t_end > t_start)) throw ConfigError("stepper: t_end must exceed t_start");
    if (adaptive && !(max_phase_per_step > 0.0 && max_phase_per_step <= std::numbers::pi / 4.0))
      throw ConfigError("stepper: max_phase_per_step must lie in (0, pi/4] in adaptive mode");
    if (snapshot_stride < 0) throw ConfigError("stepper: snapshot_stride must be >= 0");
    if (record_stride < 1) throw ConfigError("stepper: record_stride must be >= 1");
  }
};

enum class RunStatus { completed, blowup_detected, nonfinite, dt_underflow };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::completed: return "completed";
    case RunStatus::blowup_detected: return "blowup_detected";
    case RunStatus::nonfinite: return "nonfinite";
    case RunStatus::dt_underflow: return "dt_underflow";
  }
  return "unknown";
}

struct BlowupEvents {
  double initial_grad_norm = kNaN;
  double final_grad_norm = kNaN;
  std::optional<double> grad_trigger_time;
  std::optional<double> energy_jump_time;
  std::optional<double> nonfinite_time;
  double max_energy_jump = 0.0;
};

struct Trajectory {
  std::vector<double> times;  // every accepted step, including the start
  std::vector<double> snapshot_times;
  std::vector<ComplexField> snapshots;
  std::vector<DiagnosticRecord> records;
  RunStatus status = RunStatus::completed;
  BlowupEvents events;
  ComplexField final_state;
  double final_time = 0.0;
  std::size_t steps = 0;
  double min_dt_used = kNaN;
};

using RecordFn = std::function<DiagnosticRecord(double t, const ComplexField& u)>;
using StepObserver = std::function<void(double t, const ComplexField& u)>;

namespace detail {

inline rvector k_squared(const GridSpec& g) {
  rvector k2(g.size());
  for_each_mode(g, [&](std::size_t idx, int, int, int, double a, double b, double c) {
    k2[idx] = a * a + b * b + c * c;
  });
  return k2;
}

inline void fill_kinetic_phase(const rvector& k2, double t, cvector& out) {
  out.resize(k2.size());
  for (std::size_t i = 0; i < k2.size(); ++i) out[i] = std::polar(1.0, -t * k2[i]);
}

inline double l2_from_spectrum(const cvector& c, const GridSpec& g) {
  double acc = 0.0;
  for (const auto& v : c) acc += std::norm(v);
  return std::sqrt(acc * g.cell_volume() / static_cast<double>(g.size()));
}

}  // namespace detail

/// e^{itΔ} f: multiply the spectrum by e^{-it|k|²}. Any real t.
inline ComplexField free_propagate(const ComplexField& f, double t) {
  f.require_finite("free_propagate");
  if (t == 0.0) return f;
  auto s = forward(f);
  apply_multiplier_inplace(s, [t](double a, double b, double c) {
    return std::polar(1.0, -t * (a * a + b * b + c * c));
  });
  return inverse(std::move(s));
}

/// Exact flow of i u_t = (K_1|u|² + K_2|u|⁴)u over dt; |u| is unchanged.
inline void nonlinear_phase_inplace(ComplexField& u, double dt, const CoefficientField& k) {
  if (dt == 0.0 || k.spec.linear()) return;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double rho = std::norm(u[i]);
    const double rate = k.k1[i] * rho + k.k2[i] * rho * rho;
    u[i] *= std::polar(1.0, -dt * rate);
  }
}

inline ComplexField nonlinear_phase_step(const ComplexField& u, double dt, const CoefficientField& k) {
  u.require_finite("nonlinear_phase_step");
  ComplexField out = u;
  nonlinear_phase_inplace(out, dt, k);
  return out;
}

inline ComplexField nonlinear_phase_step(const ComplexField& u, double dt, const CoefficientSpec& c) {
  return nonlinear_phase_step(u, dt, CoefficientField(u.grid_ptr(), c));
}

/// max |K_1|u|² + K_2|u|⁴|, the pointwise nonlinear phase rate.
inline double max_phase_rate(const ComplexField& u, const CoefficientField& k) {
  double m = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double rho = std::norm(u[i]);
    m = std::max(m, std::abs(k.k1[i] * rho + k.k2[i] * rho * rho));
  }
  return m;
}

/// Strang splitting: half nonlinear phase, full free flow, half nonlinear phase.
inline Trajectory strang_evolve(const ComplexField& phi, const CoefficientSpec& c, const StepperConfig& cfg,
                                const RecordFn& record = {}, const std::vector<StepObserver>& observers = {}) {
  cfg.validate();
  phi.require_finite("strang_evolve");
  const auto& g = phi.grid();
  const CoefficientField kfield(phi.grid_ptr(), c);
  const rvector k2 = detail::k_squared(g);

  Trajectory traj;
  ComplexField u = phi;
  double t = cfg.t_start;
  traj.times.push_back(t);
  traj.snapshot_times.push_back(t);
  traj.snapshots.push_back(u);
  if (record) traj.records.push_back(record(t, u));

  const bool guard_grad = cfg.guard.grad_factor > 0.0;
  const bool guard_energy = cfg.guard.energy_jump > 0.0;
  double grad0 = 0.0, e_prev = 0.0, scale_prev = 0.0;
  if (guard_grad || guard_energy) {
    grad0 = grad_norm2(u);
    traj.events.initial_grad_norm = std::sqrt(grad0);
    const double v = potential_energy(u, kfield);
    e_prev = 0.5 * grad0 + v;
    scale_prev = 0.5 * grad0 + std::abs(v);
  }

  // Fixed mode takes exactly cfg.dt per step so that a resumed run repeats
  // the same arithmetic; only a final remainder step may be shorter.
  const double span = cfg.t_end - cfg.t_start;
  const auto full_steps = static_cast<std::int64_t>(std::floor(span / cfg.dt + 1e-9));
  const double remainder = span - static_cast<double>(full_steps) * cfg.dt;
  const bool has_remainder = remainder > 1e-12 * cfg.dt;

  cvector phase;
  double phase_dt = -1.0;
  ComplexField prev;
  std::int64_t step = 0;
  double min_dt = kInf;

  while (true) {
    double h;
    if (!cfg.adaptive) {
      if (step < full_steps) h = cfg.dt;
      else if (step == full_steps && has_remainder) h = remainder;
      else break;
    } else {
      const double left = cfg.t_end - t;
      if (left <= 1e-14 * std::max(1.0, std::abs(cfg.t_end))) break;
      h = std::min(cfg.dt, left);
      const double rate = max_phase_rate(u, kfield);
      if (rate > 0.0) h = std::min(h, cfg.max_phase_per_step / rate);
      if (h < cfg.min_dt) {
        traj.status = RunStatus::dt_underflow;
        break;
      }
    }
    min_dt = std::min(min_dt, h);

    if (h != phase_dt) {
      detail::fill_kinetic_phase(k2, h, phase);
      phase_dt = h;
    }
    prev = u;
    nonlinear_phase_inplace(u, 0.5 * h, kfield);
    auto s = forward(u);
    for (std::size_t i = 0; i < phase.size(); ++i) s.coeffs[i] *= phase[i];
    u = inverse(std::move(s));
    nonlinear_phase_inplace(u, 0.5 * h, kfield);
    ++step;
    t = cfg.adaptive ? t + h : (step <= full_steps ? cfg.t_start + static_cast<double>(step) * cfg.dt : cfg.t_end);

    if (!u.all_finite()) {
      traj.status = RunStatus::nonfinite;
      traj.events.nonfinite_time = t;
      u = prev;
      t = traj.times.back();
      break;
    }
    traj.times.push_back(t);
    for (const auto& obs : observers) obs(t, u);

    bool stop = false;
    if (guard_grad || guard_energy) {
      const double gn = grad_norm2(u);
      traj.events.final_grad_norm = std::sqrt(gn);
      if (guard_energy) {
        const double v = potential_energy(u, kfield);
        const double e = 0.5 * gn + v;
        const double jump = std::abs(e - e_prev) / std::max(scale_prev, 1e-300);
        traj.events.max_energy_jump = std::max(traj.events.max_energy_jump, jump);
        if (jump > cfg.guard.energy_jump && !traj.events.energy_jump_time) traj.events.energy_jump_time = t;
        e_prev = e;
        scale_prev = 0.5 * gn + std::abs(v);
      }
      if (guard_grad && gn >= cfg.guard.grad_factor * cfg.guard.grad_factor * grad0) {
        traj.events.grad_trigger_time = t;
        traj.status = RunStatus::blowup_detected;
        stop = true;
      }
    }

    const bool last = stop || (!cfg.adaptive && step == full_steps + (has_remainder ? 1 : 0)) ||
                      (cfg.adaptive && cfg.t_end - t <= 1e-14 * std::max(1.0, std::abs(cfg.t_end)));
    if (record && (step % cfg.record_stride == 0 || last)) traj.records.push_back(record(t, u));
    if (cfg.snapshot_stride > 0 && step % cfg.snapshot_stride == 0) {
      traj.snapshot_times.push_back(t);
      traj.snapshots.push_back(u);
    }
    if (stop) break;
  }

  traj.steps = static_cast<std::size_t>(step);
  traj.final_state = std::move(u);
  traj.final_time = t;
  traj.min_dt_used = std::isfinite(min_dt) ? min_dt : kNaN;
  return traj;
}

struct PicardResult {
  ComplexField u;
  std::vector<double> increments;  // sup over nodes of ‖v^{(k+1)} - v^{(k)}‖₂
  double last_increment = kNaN;
  int iterations = 0;
  int nodes = 0;
};

/// Fixed-point iteration of the Duhamel map
///   Ψ(u)(t) = e^{itΔ}φ - i ∫₀ᵗ e^{i(t-τ)Δ} [K_1|u|²u + K_2|u|⁴u](τ) dτ,
/// carried out in the interaction picture v(τ) = e^{-iτΔ}u(τ) with the
/// trapezoidal rule at stride quad_dt and exact propagators.
inline PicardResult picard_solve(const ComplexField& phi, const CoefficientSpec& c, double t_end, int n_iter,
                                 double quad_dt) {
  phi.require_finite("picard_solve");
  if (!(t_end > 0.0)) throw ParameterError("picard_solve: t_end must be positive");
  if (n_iter < 1) throw ParameterError("picard_solve: n_iter must be >= 1");
  if (!(quad_dt > 0.0)) throw ParameterError("picard_solve: quad_dt must be positive");

  const auto& g = phi.grid();
  const CoefficientField kfield(phi.grid_ptr(), c);
  const rvector k2 = detail::k_squared(g);
  const int m = std::max(1, static_cast<int>(std::ceil(t_end / quad_dt - 1e-9)));
  const double h = t_end / m;

  const SpectralField phi_hat = forward(phi);
  std::vector<cvector> v(static_cast<std::size_t>(m) + 1, phi_hat.coeffs);
  const double floor = 1e-13 * std::max(detail::l2_from_spectrum(phi_hat.coeffs, g), 1e-300);

  PicardResult res;
  res.nodes = m + 1;
  cvector fwd, bwd, running(g.size()), gprev(g.size()), diff(g.size());
  for (int it = 0; it < n_iter; ++it) {
    std::fill(running.begin(), running.end(), cplx{});
    double inc = 0.0;
    for (int j = 0; j <= m; ++j) {
      const double tau = j * h;
      detail::fill_kinetic_phase(k2, tau, fwd);
      SpectralField s{phi.grid_ptr(), v[j]};
      for (std::size_t i = 0; i < fwd.size(); ++i) s.coeffs[i] *= fwd[i];
      ComplexField u = inverse(std::move(s));
      ComplexField nl = nonlinear_term(u, kfield);
      SpectralField gj = forward(nl);
      for (std::size_t i = 0; i < fwd.size(); ++i) gj.coeffs[i] *= std::conj(fwd[i]);

      // new v_j = φ̂ - i h (½G_0 + G_1 + ... + G_{j-1} + ½G_j)
      const cplx minus_ih{0.0, -h};
      for (std::size_t i = 0; i < running.size(); ++i) {
        if (j > 0) running[i] += 0.5 * (gprev[i] + gj.coeffs[i]);
        const cplx nv = phi_hat.coeffs[i] + minus_ih * running[i];
        diff[i] = nv - v[j][i];
        v[j][i] = nv;
      }
      gprev = std::move(gj.coeffs);
      inc = std::max(inc, detail::l2_from_spectrum(diff, g));
    }
    if (!std::isfinite(inc)) throw DivergenceError("picard_solve: iterate became non-finite");
    res.increments.push_back(inc);
    res.iterations = it + 1;
    const auto k = res.increments.size();
    if (k >= 3 && inc > floor && res.increments[k - 1] > res.increments[k - 2] &&
        res.increments[k - 2] > res.increments[k - 3])
      throw DivergenceError("picard_solve: increments grow across iterations (outside contraction regime)");
  }
  res.last_increment = res.increments.back();

  detail::fill_kinetic_phase(k2, t_end, fwd);
  SpectralField s{phi.grid_ptr(), v[m]};
  for (std::size_t i = 0; i < fwd.size(); ++i) s.coeffs[i] *= fwd[i];
  res.u = inverse(std::move(s));
  return res;
}

// ---------------------------------------------------------------------------
// Checkpoints: one ASCII header line, then little-endian binary payload
//   int32 n, uint8 offset, float64 half_length, float64 t, n³ × (float64 re, float64 im)

inline constexpr const char* kCheckpointMagic = "ICQNLS-CHECKPOINT v1";

struct Checkpoint {
  ComplexField field;
  double t = 0.0;
};

namespace detail {

inline bool little_endian_host() {
  const std::uint16_t probe = 1;
  unsigned char b;
  std::memcpy(&b, &probe, 1);
  return b == 1;
}

template <class T>
void write_le(std::ostream& os, T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if (!little_endian_host()) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  is.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!is) throw ConfigError("checkpoint: truncated payload");
  if (!little_endian_host()) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ComplexField& u, double t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("checkpoint: cannot open " + path + " for writing");
  const auto& g = u.grid();
  char header[256];
  std::snprintf(header, sizeof header, "%s n=%d half_length=%a offset=%d t=%a\n", kCheckpointMagic, g.n_per_axis,
                g.half_length, g.offset ? 1 : 0, t);
  os << header;
  detail::write_le<std::int32_t>(os, g.n_per_axis);
  detail::write_le<std::uint8_t>(os, g.offset ? 1 : 0);
  detail::write_le<double>(os, g.half_length);
  detail::write_le<double>(os, t);
  for (const auto& v : u.values()) {
    detail::write_le<double>(os, v.real());
    detail::write_le<double>(os, v.imag());
  }
  if (!os) throw ConfigError("checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("checkpoint: cannot open " + path);
  std::string header;
  std::getline(is, header);
  if (header.rfind(kCheckpointMagic, 0) != 0) throw ConfigError("checkpoint: bad header in " + path);
  const auto n = detail::read_le<std::int32_t>(is);
  const auto off = detail::read_le<std::uint8_t>(is);
  const auto half = detail::read_le<double>(is);
  const auto t = detail::read_le<double>(is);
  auto grid = make_grid(n, half, off != 0);
  ComplexField f(grid);
  for (auto& v : f.values()) {
    const double re = detail::read_le<double>(is);
    const double im = detail::read_le<double>(is);
    v = cplx{re, im};
  }
  return {std::move(f), t};
}

}  // namespace icqnls
