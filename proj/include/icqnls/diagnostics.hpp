#pragma once

// Monitored functionals and identity residuals along a trajectory:
// variance, dilation 𝒜(t), Galilean norm ‖(x + 2it∇)u‖², the virial,
// dilation and pseudo-conformal balance laws, the concavity bound,
// potential-energy decay fits, interaction-picture scattering monitors and
// discrete space-time norms.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "icqnls/evolve.hpp"

namespace icqnls {

namespace detail {

struct GradientPack {
  SpectralField spectrum;
  std::array<ComplexField, 3> grad;
};

inline GradientPack gradient_pack(const ComplexField& u) {
  auto s = forward(u);
  auto g = gradient_from_spectrum(s);
  return {std::move(s), std::move(g)};
}

inline double dilation_from_gradient(const ComplexField& u, const std::array<ComplexField, 3>& grad) {
  const auto& g = u.grid();
  const int n = g.n_per_axis;
  cplx acc{};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const std::size_t idx = g.index(i, j, k);
        acc += std::conj(u[idx]) * (g.coords[i] * grad[0][idx] + g.coords[j] * grad[1][idx] + g.coords[k] * grad[2][idx]);
      }
  return acc.imag() * g.cell_volume();
}

inline double galilean_from_gradient(const ComplexField& u, const std::array<ComplexField, 3>& grad, double t) {
  const auto& g = u.grid();
  const int n = g.n_per_axis;
  const cplx two_it{0.0, 2.0 * t};
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const std::size_t idx = g.index(i, j, k);
        acc += std::norm(g.coords[i] * u[idx] + two_it * grad[0][idx]) +
               std::norm(g.coords[j] * u[idx] + two_it * grad[1][idx]) +
               std::norm(g.coords[k] * u[idx] + two_it * grad[2][idx]);
      }
  return acc * g.cell_volume();
}

}  // namespace detail

/// ∫|x|²|u|².
inline double variance(const ComplexField& u) {
  const auto& g = u.grid();
  const int n = g.n_per_axis;
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double x = g.coords[i], y = g.coords[j], z = g.coords[k];
        acc += (x * x + y * y + z * z) * std::norm(u[g.index(i, j, k)]);
      }
  return acc * g.cell_volume();
}

/// 𝒜 = Im ∫ ū x·∇u with the spectral gradient.
inline double dilation_A(const ComplexField& u) {
  u.require_finite("dilation_A");
  return detail::dilation_from_gradient(u, gradient(u));
}

/// ‖(x + 2it∇)u‖₂².
inline double galilean_norm(const ComplexField& u, double t) {
  u.require_finite("galilean_norm");
  if (t == 0.0) return variance(u);
  return detail::galilean_from_gradient(u, gradient(u), t);
}

struct DiagnosticsOptions {
  bool hl11 = false;  // ‖u‖_{H_L^{1,1}} costs three extra transforms per record
};

/// Builds the per-step record callback used by strang_evolve.
inline RecordFn make_recorder(const GridPtr& grid, const CoefficientSpec& c, DiagnosticsOptions opts = {}) {
  auto kfield = std::make_shared<CoefficientField>(grid, c);
  return [kfield, opts](double t, const ComplexField& u) {
    DiagnosticRecord r;
    r.t = t;
    auto pack = detail::gradient_pack(u);
    r.mass = mass(u);
    r.grad_norm2 = grad_norm2_from_spectrum(pack.spectrum);
    const auto w = weighted_integrals(u, *kfield);
    r.quartic = w.quartic;
    r.sextic = w.sextic;
    r.potential = 0.25 * w.quartic + w.sextic / 6.0;
    r.energy = 0.5 * r.grad_norm2 + r.potential;
    r.variance = variance(u);
    r.dilation = detail::dilation_from_gradient(u, pack.grad);
    r.galilean_norm2 = t == 0.0 ? r.variance : detail::galilean_from_gradient(u, pack.grad, t);
    r.boundary_warning = boundary_contaminated(u);
    if (opts.hl11) {
      std::array<ComplexField, 3> l;
      for (int comp = 0; comp < 3; ++comp) l[comp] = detail::l_component_from_gradient(u, comp, pack.grad);
      r.hl11_norm = sobolev_norm(u, 1.0, 2.0) + std::sqrt(r.mass) + sobolev_norm(l, 1.0, 2.0);
    }
    return r;
  };
}

namespace detail {

/// Cumulative trapezoidal integral of y over t.
inline std::vector<double> cumtrapz(const std::vector<double>& t, const std::vector<double>& y) {
  std::vector<double> out(t.size(), 0.0);
  for (std::size_t i = 1; i < t.size(); ++i) out[i] = out[i - 1] + 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
  return out;
}

/// Second-order finite-difference derivative on a possibly nonuniform grid.
inline std::vector<double> derivative(const std::vector<double>& t, const std::vector<double>& y) {
  const std::size_t n = t.size();
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  if (n == 2) {
    d[0] = d[1] = (y[1] - y[0]) / (t[1] - t[0]);
    return d;
  }
  auto three_point = [&](std::size_t a, std::size_t b, std::size_t c, double at) {
    // derivative at `at` of the quadratic through (t_a, t_b, t_c)
    const double ta = t[a], tb = t[b], tc = t[c];
    const double la = ((at - tb) + (at - tc)) / ((ta - tb) * (ta - tc));
    const double lb = ((at - ta) + (at - tc)) / ((tb - ta) * (tb - tc));
    const double lc = ((at - ta) + (at - tb)) / ((tc - ta) * (tc - tb));
    return la * y[a] + lb * y[b] + lc * y[c];
  };
  d[0] = three_point(0, 1, 2, t[0]);
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = three_point(i - 1, i, i + 1, t[i]);
  d[n - 1] = three_point(n - 3, n - 2, n - 1, t[n - 1]);
  return d;
}

template <class Fn>
std::vector<double> column(const std::vector<DiagnosticRecord>& recs, Fn&& fn) {
  std::vector<double> v;
  v.reserve(recs.size());
  for (const auto& r : recs) v.push_back(fn(r));
  return v;
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v)
    if (std::isfinite(x)) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace detail

/// R(t) = [‖xu(t)‖² - ‖xu(0)‖² - 4∫₀ᵗ𝒜] / ‖xu(0)‖².
inline std::vector<double> virial_residual(const std::vector<DiagnosticRecord>& recs) {
  if (recs.empty()) return {};
  const auto t = detail::column(recs, [](const auto& r) { return r.t; });
  const auto a = detail::column(recs, [](const auto& r) { return r.dilation; });
  const auto ia = detail::cumtrapz(t, a);
  const double v0 = recs.front().variance;
  std::vector<double> res(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const double raw = recs[i].variance - v0 - 4.0 * ia[i];
    res[i] = v0 > 0.0 ? raw / v0 : raw;
  }
  return res;
}

/// 𝒜(t) - [𝒜(0) + 4tE(φ) + ∫₀ᵗ(½(1-b₁)∫K₁|u|⁴ + ⅓(4-b₂)∫K₂|u|⁶)], relative
/// to max(max|𝒜|, 1).
inline std::vector<double> dilation_identity_residual(const std::vector<DiagnosticRecord>& recs,
                                                      const CoefficientSpec& c) {
  if (recs.empty()) return {};
  const double f1 = 0.5 * cubic_virial_factor(c);
  const double f2 = quintic_virial_factor(c) / 3.0;
  const auto t = detail::column(recs, [](const auto& r) { return r.t; });
  const auto src = detail::column(recs, [&](const auto& r) { return f1 * r.quartic + f2 * r.sextic; });
  const auto is = detail::cumtrapz(t, src);
  const double a0 = recs.front().dilation;
  const double e0 = recs.front().energy;
  const double t0 = recs.front().t;
  double scale = 1.0;
  for (const auto& r : recs) scale = std::max(scale, std::abs(r.dilation));
  std::vector<double> res(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i)
    res[i] = (recs[i].dilation - (a0 + 4.0 * (t[i] - t0) * e0 + is[i])) / scale;
  return res;
}

/// d/dt[‖𝐉u‖² + 8t²V] + 4t[½(1-b₁)∫K₁|u|⁴ + ⅓(4-b₂)∫K₂|u|⁶], the derivative
/// taken by finite differences, normalized by the initial left side.
inline std::vector<double> pseudoconformal_residual(const std::vector<DiagnosticRecord>& recs,
                                                    const CoefficientSpec& c) {
  if (recs.empty()) return {};
  const double f1 = 0.5 * cubic_virial_factor(c);
  const double f2 = quintic_virial_factor(c) / 3.0;
  const auto t = detail::column(recs, [](const auto& r) { return r.t; });
  const auto lhs = detail::column(recs, [](const auto& r) { return r.galilean_norm2 + 8.0 * r.t * r.t * r.potential; });
  const auto d = detail::derivative(t, lhs);
  const double norm0 = std::abs(lhs.front()) > 0.0 ? std::abs(lhs.front()) : 1.0;
  std::vector<double> res(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const double rhs = -4.0 * recs[i].t * (f1 * recs[i].quartic + f2 * recs[i].sextic);
    res[i] = (d[i] - rhs) / norm0;
  }
  return res;
}

/// Writes virial, dilation and pseudo-conformal residual columns into the records.
inline void fill_residuals(std::vector<DiagnosticRecord>& recs, const CoefficientSpec& c) {
  const auto v = virial_residual(recs);
  const auto d = dilation_identity_residual(recs, c);
  const auto p = pseudoconformal_residual(recs, c);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    recs[i].virial_residual = v[i];
    recs[i].dilation_residual = d[i];
    recs[i].pconf_residual = p[i];
  }
}

struct ConcavityCheck {
  std::vector<double> times;
  std::vector<double> margin;  // bound - measured variance
  std::vector<bool> holds;
  double min_margin = kInf;
};

inline BlowupBoundParams blowup_params_from(const DiagnosticRecord& r0, double alpha) {
  return {alpha, r0.variance, r0.dilation, r0.energy};
}

/// Compares ‖xu(t)‖² with ‖xφ‖² + 4t𝒜(0) + (8 + 4α)t²E(φ).
inline ConcavityCheck concavity_check(const std::vector<DiagnosticRecord>& recs, const BlowupBoundParams& p) {
  ConcavityCheck out;
  if (recs.empty()) return out;
  const double t0 = recs.front().t;
  for (const auto& r : recs) {
    const double m = concavity_bound(p, r.t - t0) - r.variance;
    out.times.push_back(r.t);
    out.margin.push_back(m);
    out.holds.push_back(m >= 0.0);
    out.min_margin = std::min(out.min_margin, m);
  }
  return out;
}

struct DecayFit {
  bool valid = false;
  std::string reason;
  double slope = kNaN;     // d log(t²V) / d log t
  double constant = kNaN;  // t²V ≈ constant · t^slope
  std::size_t samples = 0;
};

inline constexpr std::size_t kMinDecaySamples = 8;

/// Least-squares slope of log(t²V(u(t))) against log t over [t1, t2].
inline DecayFit potential_decay_fit(const std::vector<DiagnosticRecord>& recs, double t1, double t2) {
  if (t1 < 1.0) throw ParameterError("potential_decay_fit: window must start at t >= 1");
  if (!(t2 > t1)) throw ParameterError("potential_decay_fit: empty window");
  std::vector<const DiagnosticRecord*> in;
  for (const auto& r : recs)
    if (r.t >= t1 - 1e-12 && r.t <= t2 + 1e-12) in.push_back(&r);
  if (in.size() < kMinDecaySamples)
    throw InsufficientDataError("potential_decay_fit: " + std::to_string(in.size()) + " samples in window, need " +
                                std::to_string(kMinDecaySamples));
  DecayFit fit;
  fit.samples = in.size();
  for (const auto* r : in)
    if (!(r->potential > 0.0)) {
      fit.reason = "insufficient signal: V(u) is not positive on the window";
      return fit;
    }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(in.size());
  for (const auto* r : in) {
    const double x = std::log(r->t);
    const double y = std::log(r->t * r->t * r->potential);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  fit.slope = (n * sxy - sx * sy) / den;
  fit.constant = std::exp((sy - fit.slope * sx) / n);
  fit.valid = std::isfinite(fit.slope);
  if (!fit.valid) fit.reason = "degenerate fit";
  return fit;
}

struct ScatterMonitor {
  std::vector<double> times;
  std::vector<double> gap_l2;     // ‖w(t_i) - w(t_{i-1})‖₂, NaN at i = 0
  std::vector<double> gap_hl11;   // same in H_L^{1,1}
  std::vector<double> dist_l2;    // ‖u(t_i) - e^{it_iΔ}φ₊‖₂
  std::vector<double> dist_hl11;
  std::vector<double> overlap_H;  // -Im ∫ u(t_i) conj(e^{it_iΔ}φ₊)
  ComplexField phi_plus;
  bool boundary_warning = false;
};

/// Interaction-picture monitor w(t) = e^{-itΔ}u(t) over the given snapshots.
/// φ₊ defaults to w at the last snapshot.
inline ScatterMonitor scattering_monitor(const std::vector<double>& times, const std::vector<ComplexField>& snaps,
                                         const std::optional<ComplexField>& reference = std::nullopt,
                                         bool with_hl11 = true) {
  if (times.size() != snaps.size()) throw UsageError("scattering_monitor: times/snapshots size mismatch");
  if (snaps.empty()) throw InsufficientDataError("scattering_monitor: no snapshots");
  ScatterMonitor m;
  m.times = times;
  std::vector<ComplexField> w;
  w.reserve(snaps.size());
  for (std::size_t i = 0; i < snaps.size(); ++i) w.push_back(free_propagate(snaps[i], -times[i]));
  m.phi_plus = reference ? *reference : w.back();
  auto hl11 = [&](const ComplexField& f) {
    auto r = angular_sobolev_norm(f, 1, 1, 2.0);
    m.boundary_warning = m.boundary_warning || r.boundary_warning;
    return r.value;
  };
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    if (i == 0) {
      m.gap_l2.push_back(kNaN);
      m.gap_hl11.push_back(kNaN);
    } else {
      const ComplexField d = w[i] - w[i - 1];
      m.gap_l2.push_back(l2_norm(d));
      m.gap_hl11.push_back(with_hl11 ? hl11(d) : kNaN);
    }
    const ComplexField free_ref = free_propagate(m.phi_plus, times[i]);
    const ComplexField diff = snaps[i] - free_ref;
    m.dist_l2.push_back(l2_norm(diff));
    m.dist_hl11.push_back(with_hl11 ? hl11(diff) : kNaN);
    m.overlap_H.push_back(-inner(free_ref, snaps[i]).imag());
  }
  return m;
}

struct SpaceTimeNormSpec {
  double q = 2.0;
  double r = 6.0;
  bool admissible = false;

  SpaceTimeNormSpec(double q_, double r_) : q(q_), r(r_) {
    if (!(q >= 2.0) || !(r >= 2.0)) throw ParameterError("space-time norm: q and r must lie in [2, inf]");
    const double lhs = (std::isinf(q) ? 0.0 : 2.0 / q) + (std::isinf(r) ? 0.0 : 3.0 / r);
    admissible = std::abs(lhs - 1.5) < 1e-12;
  }
};

struct SpaceTimeNorm {
  double value = 0.0;
  bool admissible = false;
};

/// Discrete L^q_t L^r_x over recorded snapshots (trapezoidal in t).
inline SpaceTimeNorm spacetime_norm(const std::vector<double>& times, const std::vector<ComplexField>& snaps,
                                    const SpaceTimeNormSpec& spec) {
  if (times.size() != snaps.size() || snaps.empty()) throw InsufficientDataError("spacetime_norm: no snapshots");
  std::vector<double> lr;
  lr.reserve(snaps.size());
  for (const auto& s : snaps) lr.push_back(lp_norm(s, spec.r));
  SpaceTimeNorm out{0.0, spec.admissible};
  if (std::isinf(spec.q)) {
    out.value = *std::max_element(lr.begin(), lr.end());
    return out;
  }
  if (snaps.size() < 2) throw InsufficientDataError("spacetime_norm: need two snapshots for finite q");
  std::vector<double> pw;
  for (double v : lr) pw.push_back(std::pow(v, spec.q));
  out.value = std::pow(detail::cumtrapz(times, pw).back(), 1.0 / spec.q);
  return out;
}

}  // namespace icqnls
