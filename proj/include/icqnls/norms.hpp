#pragma once

// L^p, Sobolev, homogeneous Sobolev and angular Sobolev norms, and the L²
// pairing, all with the equal-weight quadrature of the grid.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "icqnls/spectral.hpp"

namespace icqnls {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

namespace detail {

inline double lp_from_moduli(std::span<const double> mod, double p, double dv) {
  if (std::isinf(p)) return mod.empty() ? 0.0 : *std::max_element(mod.begin(), mod.end());
  double acc = 0.0;
  if (p == 2.0) {
    for (double m : mod) acc += m * m;
    return std::sqrt(acc * dv);
  }
  if (p == 1.0) {
    for (double m : mod) acc += m;
    return acc * dv;
  }
  for (double m : mod) acc += std::pow(m, p);
  return std::pow(acc * dv, 1.0 / p);
}

inline void check_p(double p) {
  if (!(p >= 1.0)) throw ParameterError("norm: p must lie in [1, inf]");
}

}  // namespace detail

/// ‖f‖_{L^p}; p = ∞ is the grid maximum.
inline double lp_norm(const ComplexField& f, double p) {
  detail::check_p(p);
  rvector mod(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) mod[i] = std::abs(f[i]);
  return detail::lp_from_moduli(mod, p, f.grid().cell_volume());
}

/// ‖ |F| ‖_{L^p} for a vector field, with the pointwise Euclidean modulus.
template <std::size_t N>
double lp_norm(const std::array<ComplexField, N>& f, double p) {
  detail::check_p(p);
  rvector mod(f[0].size(), 0.0);
  for (const auto& c : f)
    for (std::size_t i = 0; i < c.size(); ++i) mod[i] += std::norm(c[i]);
  for (auto& m : mod) m = std::sqrt(m);
  return detail::lp_from_moduli(mod, p, f[0].grid().cell_volume());
}

namespace detail {

/// Value and Laplacian at the origin of |f|^p, from the trigonometric
/// interpolant of f and its spectral derivatives.
inline std::array<double, 2> power_modulus_jet(const ComplexField& f, double p) {
  const auto s = forward(f);
  const cplx f0 = evaluate_at(s, 0.0, 0.0, 0.0);
  const double g0 = std::norm(f0);
  if (!(g0 > 0.0)) return {0.0, 0.0};
  double grad_g2 = 0.0, grad_f2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    const cplx d = evaluate_at(forward(partial_from_spectrum(s, a)), 0.0, 0.0, 0.0);
    const double dg = 2.0 * (std::conj(f0) * d).real();
    grad_g2 += dg * dg;
    grad_f2 += std::norm(d);
  }
  SpectralField lap = s;
  for_each_mode(f.grid(), [&](std::size_t idx, int, int, int, double a, double b, double c) {
    lap.coeffs[idx] *= -(a * a + b * b + c * c);
  });
  const cplx lf = evaluate_at(lap, 0.0, 0.0, 0.0);
  const double lap_g = 2.0 * (std::conj(f0) * lf).real() + 2.0 * grad_f2;
  // |f|^p = G^{p/2} with G = |f|²
  const double h = 0.5 * p;
  const double lap_f = h * std::pow(g0, h - 1.0) * lap_g + h * (h - 1.0) * std::pow(g0, h - 2.0) * grad_g2;
  return {std::pow(g0, h), lap_f};
}

}  // namespace detail

/// ‖|x|^b f‖_{L^p}. Negative b needs an offset grid.
///
/// For b < 0 and finite p the integrand |x|^{bp}|f|^p is singular at the
/// origin and plain lattice sums converge slowly. The radial Taylor part of
/// F = |f|^p, written as (F(0) + c|x|²)e^{-|x|²/σ²} with
/// c = ΔF(0)/6 + F(0)/σ², is integrated against |x|^{bp} in closed form and
/// only the remainder is summed on the lattice. Anisotropic quadratic terms
/// cancel on the cubic-symmetric offset lattice.
inline double weighted_lp_norm(const ComplexField& f, double b, double p) {
  detail::check_p(p);
  auto w = radial_weight(f.grid_ptr(), b);
  rvector mod(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) mod[i] = w.values[i] * std::abs(f[i]);
  const double dv = f.grid().cell_volume();
  if (b >= 0.0 || std::isinf(p)) return detail::lp_from_moduli(mod, p, dv);

  const double a = -b * p;
  if (!(a < 3.0)) throw ParameterError("weighted_lp_norm: |x|^{bp} is not integrable at the origin");
  const auto& g = f.grid();
  const double sigma = std::min(1.0, 0.25 * g.half_length);
  const auto [f0, lap0] = detail::power_modulus_jet(f, p);
  const double c2 = lap0 / 6.0 + f0 / (sigma * sigma);
  auto r = radius_values(g);
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double r2 = r[i] * r[i];
    const double cut = std::exp(-r2 / (sigma * sigma));
    acc += std::pow(mod[i], p) - (f0 + c2 * r2) * cut * std::pow(r[i], -a);
  }
  auto moment = [&](double m) {
    return 2.0 * std::numbers::pi * std::pow(sigma, m + 3.0 - a) * std::tgamma(0.5 * (m + 3.0 - a));
  };
  return std::pow(std::max(acc * dv + f0 * moment(0.0) + c2 * moment(2.0), 0.0), 1.0 / p);
}

/// ∫ conj(f) g over the box.
inline cplx inner(const ComplexField& f, const ComplexField& g) {
  f.require_same_grid(g, "inner");
  cplx acc{};
  for (std::size_t i = 0; i < f.size(); ++i) acc += std::conj(f[i]) * g[i];
  return acc * f.grid().cell_volume();
}

inline double l2_norm(const ComplexField& f) { return lp_norm(f, 2.0); }

enum class NormFamily { lebesgue, sobolev, homogeneous_sobolev, angular_sobolev };

struct NormSpec {
  NormFamily family = NormFamily::lebesgue;
  double p = 2.0;
  double order = 0.0;  // n for sobolev/angular, s for homogeneous
  int ell = 0;         // angular order, angular family only

  static NormSpec lebesgue(double p) { return {NormFamily::lebesgue, p, 0.0, 0}; }
  static NormSpec sobolev(double n, double p = 2.0) { return {NormFamily::sobolev, p, n, 0}; }
  static NormSpec homogeneous(double s, double p = 2.0) { return {NormFamily::homogeneous_sobolev, p, s, 0}; }
  static NormSpec angular(int n, int ell, double p = 2.0) {
    return {NormFamily::angular_sobolev, p, static_cast<double>(n), ell};
  }
};

namespace detail {

/// Σ (1+|k|²)^n |f̂_k|², scaled so that p = 2 Sobolev norms follow by Parseval.
inline double bessel_energy(const ComplexField& f, double n) {
  const auto s = forward(f);
  double acc = 0.0;
  for_each_mode(f.grid(), [&](std::size_t idx, int, int, int, double a, double b, double c) {
    const double q = 1.0 + a * a + b * b + c * c;
    const double w = n == 1.0 ? q : (n == 2.0 ? q * q : std::pow(q, n));
    acc += w * std::norm(s.coeffs[idx]);
  });
  return acc * f.grid().cell_volume() / static_cast<double>(f.size());
}

}  // namespace detail

/// ‖f‖_{H^n_p} = ‖Λ^n f‖_{L^p}.
inline double sobolev_norm(const ComplexField& f, double n, double p) {
  if (n < 0.0) throw ParameterError("sobolev_norm: n must be >= 0");
  if (p == 2.0 && n > 0.0) return std::sqrt(detail::bessel_energy(f, n));
  return lp_norm(bessel_potential(f, n), p);
}

/// ‖F‖_{H^n_p} for a vector field, componentwise Λ^n then Euclidean modulus.
inline double sobolev_norm(const std::array<ComplexField, 3>& f, double n, double p) {
  if (p == 2.0 && n > 0.0)
    return std::sqrt(detail::bessel_energy(f[0], n) + detail::bessel_energy(f[1], n) +
                     detail::bessel_energy(f[2], n));
  return lp_norm(std::array<ComplexField, 3>{bessel_potential(f[0], n), bessel_potential(f[1], n),
                                             bessel_potential(f[2], n)},
                 p);
}

inline double homogeneous_sobolev_norm(const ComplexField& f, double s, double p) {
  return lp_norm(fractional_derivative(f, s), p);
}

namespace detail {

struct AngularParts {
  std::array<ComplexField, 3> l;
  ComplexField l2;
  bool have_l2 = false;
};

inline double angular_norm_rec(const ComplexField& f, int n, int ell, double p, AngularParts& parts) {
  if (n == 0) return lp_norm(f, p);  // H^{0,ℓ} = L^p
  if (ell == 0) return sobolev_norm(f, n, p);
  if (ell == 1) {
    return sobolev_norm(f, n, p) + angular_norm_rec(f, n - 1, 2, p, parts) + sobolev_norm(parts.l, n, p);
  }
  // ell == 2
  if (!parts.have_l2) {
    parts.l2 = ComplexField(f.grid_ptr());
    for (int c = 0; c < 3; ++c) parts.l2 += angular_component(parts.l[c], c);
    parts.have_l2 = true;
  }
  return angular_norm_rec(f, n, 1, p, parts) + sobolev_norm(parts.l2, n, p);
}

}  // namespace detail

/// ‖f‖_{H_{L,p}^{n,ℓ}} following the recursive definition
///   H^{0,ℓ} = L^p,  H^{n,0} = H^n_p,
///   ‖f‖_{H^{n,1}} = ‖f‖_{H^n_p} + ‖f‖_{H^{n-1,2}} + ‖Lf‖_{H^n_p},
///   ‖f‖_{H^{n,2}} = ‖f‖_{H^{n,1}} + ‖|L|²f‖_{H^n_p}.
inline Flagged<double> angular_sobolev_norm(const ComplexField& f, int n, int ell, double p = 2.0) {
  if (n < 0 || n > 2 || ell < 0 || ell > 2)
    throw ParameterError("angular_sobolev: (n, ell) must lie in {0,1,2}^2");
  detail::check_p(p);
  if (n == 0) return {lp_norm(f, p), false};
  if (ell == 0) return {sobolev_norm(f, n, p), false};
  auto l = angular_momentum(f);
  detail::AngularParts parts{std::move(l.components), ComplexField{}, false};
  return {detail::angular_norm_rec(f, n, ell, p, parts), l.boundary_warning};
}

inline Flagged<double> norm_checked(const ComplexField& f, const NormSpec& spec) {
  f.require_finite("norm");
  switch (spec.family) {
    case NormFamily::lebesgue: return {lp_norm(f, spec.p), false};
    case NormFamily::sobolev: return {sobolev_norm(f, spec.order, spec.p), false};
    case NormFamily::homogeneous_sobolev:
      return {homogeneous_sobolev_norm(f, spec.order, spec.p), false};
    case NormFamily::angular_sobolev: {
      const double n = spec.order;
      if (n != std::floor(n)) throw ParameterError("angular_sobolev: n must be an integer");
      return angular_sobolev_norm(f, static_cast<int>(n), spec.ell, spec.p);
    }
  }
  throw ParameterError("norm: unknown family");
}

inline double norm(const ComplexField& f, const NormSpec& spec) { return norm_checked(f, spec).value; }

}  // namespace icqnls
