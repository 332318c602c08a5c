#pragma once

// Empirical constants of the weighted and angular functional inequalities,
// measured as worst LHS/RHS ratios (or operator-identity defects) over
// deterministic test functions and seeded random ensembles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "icqnls/evolve.hpp"

namespace icqnls {

enum class ProbeKind {
  hardy,
  angular_sup,
  angular_sup_linear_weight,
  angular_interpolation,
  l_equivalence,
  second_order_equivalence,
  commute_multiplier,
  free_decay,
};

inline const char* to_string(ProbeKind k) {
  switch (k) {
    case ProbeKind::hardy: return "hardy";
    case ProbeKind::angular_sup: return "angular_sup";
    case ProbeKind::angular_sup_linear_weight: return "angular_sup_linear_weight";
    case ProbeKind::angular_interpolation: return "angular_interpolation";
    case ProbeKind::l_equivalence: return "l_equivalence";
    case ProbeKind::second_order_equivalence: return "second_order_equivalence";
    case ProbeKind::commute_multiplier: return "commute_multiplier";
    case ProbeKind::free_decay: return "free_decay";
  }
  return "unknown";
}

inline ProbeKind probe_kind_from_string(const std::string& s) {
  for (auto k : {ProbeKind::hardy, ProbeKind::angular_sup, ProbeKind::angular_sup_linear_weight,
                 ProbeKind::angular_interpolation, ProbeKind::l_equivalence, ProbeKind::second_order_equivalence,
                 ProbeKind::commute_multiplier, ProbeKind::free_decay})
    if (s == to_string(k)) return k;
  throw ConfigError("probe: unknown kind '" + s + "'");
}

enum class EnsembleGenerator { gaussian, gaussian_harmonic };

inline const char* to_string(EnsembleGenerator g) {
  return g == EnsembleGenerator::gaussian ? "gaussian" : "gaussian_harmonic";
}

inline EnsembleGenerator ensemble_generator_from_string(const std::string& s) {
  if (s == "gaussian") return EnsembleGenerator::gaussian;
  if (s == "gaussian_harmonic") return EnsembleGenerator::gaussian_harmonic;
  throw ConfigError("probe: unknown ensemble generator '" + s + "'");
}

enum class MultiplierKind { heat, fractional };

struct ProbeParams {
  double s = 1.0;
  double p = 2.0;
  double b = 0.5;
  double eps = 0.25;
  double theta = 0.5;
  std::vector<double> times{2.0, 4.0, 8.0};
  MultiplierKind multiplier = MultiplierKind::heat;
  double heat_t = 0.1;
};

struct EnsembleSpec {
  EnsembleGenerator generator = EnsembleGenerator::gaussian_harmonic;
  int count = 16;
  std::uint64_t seed = 1;
};

struct ProbeGrid {
  int n_per_axis = 64;
  double half_length = 8.0;
};

struct ProbeSpec {
  ProbeKind kind = ProbeKind::hardy;
  ProbeParams params;
  EnsembleSpec ensemble;
  ProbeGrid grid;
  std::optional<double> ceiling;  // default per kind when absent

  void validate() const {
    const auto& q = params;
    if (ensemble.count < 1) throw ParameterError("probe: ensemble count must be >= 1");
    switch (kind) {
      case ProbeKind::hardy:
        if (!(q.p >= 1.0) || std::isinf(q.p)) throw ParameterError("hardy: p must lie in [1, inf)");
        if (!(q.s > 0.0 && q.s < 3.0 / q.p)) throw ParameterError("hardy: requires 0 < s < 3/p");
        break;
      case ProbeKind::angular_sup:
        if (!(q.b > 0.0 && q.b < 1.0)) throw ParameterError("angular_sup: requires 0 < b < 1");
        break;
      case ProbeKind::angular_interpolation:
        if (!(q.b > 0.0 && q.b < 1.0)) throw ParameterError("angular_interpolation: requires 0 < b < 1");
        if (!(q.eps > 0.0 && q.eps < 1.0 - q.b))
          throw ParameterError("angular_interpolation: requires 0 < eps < 1 - b");
        if (!(q.p >= 2.0) || std::isinf(q.p)) throw ParameterError("angular_interpolation: requires 2 <= p < inf");
        break;
      case ProbeKind::commute_multiplier:
        if (q.multiplier == MultiplierKind::heat && !(q.heat_t > 0.0))
          throw ParameterError("commute_multiplier: heat_t must be positive");
        if (q.multiplier == MultiplierKind::fractional && !(q.s >= 0.0))
          throw ParameterError("commute_multiplier: s must be >= 0");
        break;
      case ProbeKind::free_decay:
        if (!(q.theta >= 0.0 && q.theta <= 1.5)) throw ParameterError("free_decay: requires 0 <= theta <= 3/2");
        if (q.times.size() < 2) throw ParameterError("free_decay: need at least two times");
        for (double t : q.times)
          if (!(t > 0.0)) throw ParameterError("free_decay: times must be positive");
        break;
      default:
        break;
    }
  }
};

/// Sharp L² Hardy constant ‖|x|^{-s}f‖₂ ≤ C‖(-Δ)^{s/2}f‖₂ in three dimensions.
inline double hardy_sharp_constant(double s) {
  return std::tgamma((3.0 - 2.0 * s) / 4.0) / (std::pow(2.0, s) * std::tgamma((3.0 + 2.0 * s) / 4.0));
}

inline double default_ceiling(const ProbeSpec& spec) {
  switch (spec.kind) {
    case ProbeKind::hardy:
      return spec.params.p == 2.0 ? 1.025 * hardy_sharp_constant(spec.params.s) : kInf;
    case ProbeKind::angular_sup:
    case ProbeKind::angular_sup_linear_weight:
    case ProbeKind::angular_interpolation: return 1.0;
    case ProbeKind::l_equivalence: return 1e-8;
    case ProbeKind::commute_multiplier:
      // |k|^s kernels decay only algebraically, so periodic images enter at 1e-3
      return spec.params.multiplier == MultiplierKind::heat ? 1e-8 : 1e-2;
    case ProbeKind::second_order_equivalence: return kInf;
    case ProbeKind::free_decay: return 0.1;
  }
  return kInf;
}

struct ProbeReport {
  ProbeKind kind = ProbeKind::hardy;
  double worst_ratio = 0.0;
  int worst_case_id = -1;
  std::vector<double> ratios;      // NaN marks a skipped sample
  std::vector<double> reverse_ratios;  // second_order_equivalence only
  double worst_reverse_ratio = kNaN;
  int skipped = 0;
  int boundary_warnings = 0;
  double ceiling = kInf;
  bool pass = false;
};

// ---------------------------------------------------------------------------
// Seeded ensembles

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits, identical on every platform.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(std::mt19937_64& rng, double a, double b) { return a + (b - a) * uniform01(rng); }

}  // namespace detail

/// Real solid harmonics spanning degree ℓ ≤ 2, in complex form.
inline cplx solid_harmonic(int degree, int order, double x, double y, double z) {
  const cplx p{x, y}, m{x, -y};
  switch (degree) {
    case 0: return 1.0;
    case 1:
      if (order == 1) return p;
      if (order == 0) return z;
      if (order == -1) return m;
      break;
    case 2:
      if (order == 2) return p * p;
      if (order == 1) return z * p;
      if (order == 0) return 2.0 * z * z - x * x - y * y;
      if (order == -1) return z * m;
      if (order == -2) return m * m;
      break;
    default: break;
  }
  throw ParameterError("solid_harmonic: need degree in {0,1,2} and |order| <= degree");
}

struct EnsembleTerm {
  double width = 1.0;
  std::array<double, 3> center{};
  int degree = 0;
  std::vector<cplx> coeffs;  // one per order -degree..degree
  cplx weight{1.0, 0.0};
};

/// Draws 1 to 3 terms: Gaussian of width in [0.5, 1.2] centred within |c| ≤ 1,
/// times a random combination of solid harmonics of one degree ≤ 2.
inline std::vector<EnsembleTerm> draw_sample(std::mt19937_64& rng) {
  const int terms = 1 + static_cast<int>(detail::uniform01(rng) * 3.0);
  std::vector<EnsembleTerm> out;
  for (int t = 0; t < terms; ++t) {
    EnsembleTerm e;
    e.width = detail::uniform(rng, 0.5, 1.2);
    std::array<double, 3> c;
    do {
      for (auto& v : c) v = detail::uniform(rng, -1.0, 1.0);
    } while (c[0] * c[0] + c[1] * c[1] + c[2] * c[2] > 1.0);
    e.center = c;
    e.degree = std::min(2, static_cast<int>(detail::uniform01(rng) * 3.0));
    for (int m = -e.degree; m <= e.degree; ++m)
      e.coeffs.emplace_back(detail::uniform(rng, -1.0, 1.0), detail::uniform(rng, -1.0, 1.0));
    e.weight = std::polar(detail::uniform(rng, 0.5, 1.0), detail::uniform(rng, 0.0, 2.0 * std::numbers::pi));
    out.push_back(std::move(e));
  }
  return out;
}

inline ComplexField realize(const GridPtr& g, const std::vector<EnsembleTerm>& terms) {
  return ComplexField::from_function(g, [&](double x, double y, double z) {
    cplx acc{};
    for (const auto& e : terms) {
      const double dx = x - e.center[0], dy = y - e.center[1], dz = z - e.center[2];
      cplx h{};
      for (int m = -e.degree; m <= e.degree; ++m)
        h += e.coeffs[static_cast<std::size_t>(m + e.degree)] * solid_harmonic(e.degree, m, dx, dy, dz);
      acc += e.weight * h * std::exp(-(dx * dx + dy * dy + dz * dz) / (2.0 * e.width * e.width));
    }
    return acc;
  });
}

/// The ensemble for a spec; the "gaussian" generator is e^{-|x|²/2} repeated.
inline std::vector<ComplexField> make_ensemble(const GridPtr& g, const EnsembleSpec& spec) {
  std::vector<ComplexField> out;
  if (spec.generator == EnsembleGenerator::gaussian) {
    auto f = ComplexField::from_function(
        g, [](double x, double y, double z) { return cplx{std::exp(-(x * x + y * y + z * z) / 2.0), 0.0}; });
    out.assign(static_cast<std::size_t>(spec.count), f);
    return out;
  }
  std::mt19937_64 rng(spec.seed);
  for (int i = 0; i < spec.count; ++i) out.push_back(realize(g, draw_sample(rng)));
  return out;
}

// ---------------------------------------------------------------------------
// Per-kind measurements

inline constexpr double kDegenerateRhs = 1e-12;

namespace detail {

struct Sample {
  double ratio = kNaN;
  double reverse = kNaN;
  bool boundary = false;
};

inline double l2_vec(const std::array<ComplexField, 3>& v) { return lp_norm(v, 2.0); }

inline Sample measure_hardy(const ComplexField& f, const ProbeParams& q) {
  const double rhs = homogeneous_sobolev_norm(f, q.s, q.p);
  if (rhs < kDegenerateRhs) return {};
  return {weighted_lp_norm(f, -q.s, q.p) / rhs, kNaN, boundary_contaminated(f)};
}

inline Sample measure_angular_sup(const ComplexField& f, double b, int ell) {
  const auto rhs = angular_sobolev_norm(f, 1, ell, 2.0);
  if (rhs.value < kDegenerateRhs) return {};
  return {weighted_lp_norm(f, b, kInf) / rhs.value, kNaN, rhs.boundary_warning};
}

inline Sample measure_interpolation(const ComplexField& f, const ProbeParams& q) {
  const auto h = angular_sobolev_norm(f, 1, 1, 2.0);
  const double lp = lp_norm(f, q.p);
  const double rhs = std::pow(h.value, 1.0 - q.eps) * std::pow(lp, q.eps);
  if (rhs < kDegenerateRhs) return {};
  return {weighted_lp_norm(f, q.b, q.p / q.eps) / rhs, kNaN, h.boundary_warning};
}

/// |‖Lf‖² / ⟨f, |L|²f⟩ - 1|.
inline Sample measure_l_equivalence(const ComplexField& f) {
  auto l = angular_momentum(f);
  const double lhs = std::pow(l2_vec(l.components), 2);
  ComplexField l2(f.grid_ptr());
  for (int c = 0; c < 3; ++c) l2 += angular_component(l.components[c], c);
  const double rhs = inner(f, l2).real();
  if (std::abs(rhs) < kDegenerateRhs) return {};
  return {std::abs(lhs / rhs - 1.0), kNaN, l.boundary_warning};
}

/// Σ_{j,k}‖L_jL_k f‖² against ‖|L|²f‖², both directions.
inline Sample measure_second_order(const ComplexField& f) {
  auto l = angular_momentum(f);
  double pairs = 0.0;
  ComplexField l2(f.grid_ptr());
  for (int k = 0; k < 3; ++k) {
    auto inner_l = angular_momentum(l.components[k]);
    for (int j = 0; j < 3; ++j) pairs += std::pow(l2_norm(inner_l.components[j]), 2);
    l2 += inner_l.components[k];
  }
  const double sq = std::pow(l2_norm(l2), 2);
  if (sq < kDegenerateRhs || pairs < kDegenerateRhs) return {};
  return {std::sqrt(pairs / sq), std::sqrt(sq / pairs), l.boundary_warning};
}

/// ‖L(ψ∗f) - ψ∗(Lf)‖ / (‖f‖ + ‖Lf‖) for a radial Fourier multiplier ψ̂.
inline Sample measure_commute(const ComplexField& f, const ProbeParams& q) {
  auto symbol = [&q](double a, double b, double c) {
    const double k2 = a * a + b * b + c * c;
    if (q.multiplier == MultiplierKind::heat) return cplx{std::exp(-q.heat_t * k2), 0.0};
    return cplx{k2 == 0.0 ? (q.s == 0.0 ? 1.0 : 0.0) : std::pow(k2, 0.5 * q.s), 0.0};
  };
  auto lf = angular_momentum(f);
  auto l_psi = angular_momentum(apply_multiplier(f, symbol));
  std::array<ComplexField, 3> diff;
  for (int c = 0; c < 3; ++c) diff[c] = l_psi.components[c] - apply_multiplier(lf.components[c], symbol);
  const double rhs = l2_norm(f) + l2_vec(lf.components);
  if (rhs < kDegenerateRhs) return {};
  return {l2_vec(diff) / rhs, kNaN, lf.boundary_warning};
}

/// Rate t^{3/2-θ}‖|x|^θ e^{itΔ}f‖_∞ at each t, through the exact far-field
/// form of the free propagator
///   e^{itΔ}f(x) = (4πit)^{-3/2} e^{i|x|²/4t} ĝ_t(x/2t),  g_t = e^{i|y|²/4t} f,
/// so the sup is taken over the points x = 2tk of the wavenumber lattice.
inline std::vector<double> free_decay_rates(const ComplexField& f, const ProbeParams& q) {
  const auto& g = f.grid();
  const auto r = radius_values(g);
  std::vector<double> rates;
  for (double t : q.times) {
    ComplexField gt(f.grid_ptr());
    for (std::size_t i = 0; i < f.size(); ++i) gt[i] = f[i] * std::polar(1.0, r[i] * r[i] / (4.0 * t));
    const auto s = forward(gt);
    double best = 0.0;
    for_each_mode(g, [&](std::size_t idx, int, int, int, double a, double b, double c) {
      const double k = std::sqrt(a * a + b * b + c * c);
      best = std::max(best, std::pow(k, q.theta) * std::abs(s.coeffs[idx]));
    });
    const double sup = std::pow(2.0 * t, q.theta) * std::pow(4.0 * std::numbers::pi * t, -1.5) * g.cell_volume() * best;
    rates.push_back(sup * std::pow(t, 1.5 - q.theta));
  }
  return rates;
}

inline Sample measure_free_decay(const ComplexField& f, const ProbeParams& q) {
  const auto rates = free_decay_rates(f, q);
  const auto [lo, hi] = std::minmax_element(rates.begin(), rates.end());
  if (*hi < kDegenerateRhs) return {};
  return {(*hi - *lo) / *hi, kNaN, boundary_contaminated(f)};
}

inline bool needs_offset(ProbeKind k) {
  return k == ProbeKind::hardy || k == ProbeKind::angular_sup || k == ProbeKind::angular_sup_linear_weight ||
         k == ProbeKind::angular_interpolation;
}

}  // namespace detail

/// Measures every ensemble member and aggregates the worst ratio.
inline ProbeReport probe(const ProbeSpec& spec) {
  spec.validate();
  auto g = make_grid(spec.grid.n_per_axis, spec.grid.half_length, detail::needs_offset(spec.kind));
  const auto fields = make_ensemble(g, spec.ensemble);

  ProbeReport rep;
  rep.kind = spec.kind;
  rep.ceiling = spec.ceiling.value_or(default_ceiling(spec));
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const auto& f = fields[i];
    detail::Sample s;
    switch (spec.kind) {
      case ProbeKind::hardy: s = detail::measure_hardy(f, spec.params); break;
      case ProbeKind::angular_sup: s = detail::measure_angular_sup(f, spec.params.b, 1); break;
      case ProbeKind::angular_sup_linear_weight: s = detail::measure_angular_sup(f, 1.0, 2); break;
      case ProbeKind::angular_interpolation: s = detail::measure_interpolation(f, spec.params); break;
      case ProbeKind::l_equivalence: s = detail::measure_l_equivalence(f); break;
      case ProbeKind::second_order_equivalence: s = detail::measure_second_order(f); break;
      case ProbeKind::commute_multiplier: s = detail::measure_commute(f, spec.params); break;
      case ProbeKind::free_decay: s = detail::measure_free_decay(f, spec.params); break;
    }
    rep.ratios.push_back(s.ratio);
    if (spec.kind == ProbeKind::second_order_equivalence) rep.reverse_ratios.push_back(s.reverse);
    if (std::isnan(s.ratio)) {
      ++rep.skipped;
      continue;
    }
    if (s.boundary) ++rep.boundary_warnings;
    if (rep.worst_case_id < 0 || s.ratio > rep.worst_ratio) {
      rep.worst_ratio = s.ratio;
      rep.worst_case_id = static_cast<int>(i);
    }
    if (!std::isnan(s.reverse))
      rep.worst_reverse_ratio = std::isnan(rep.worst_reverse_ratio) ? s.reverse : std::max(rep.worst_reverse_ratio, s.reverse);
  }
  rep.pass = rep.worst_case_id >= 0 && std::isfinite(rep.worst_ratio) && rep.worst_ratio <= rep.ceiling;
  return rep;
}

}  // namespace icqnls
