#pragma once

// Power-law coefficients K_l(x) = λ_l |x|^{b_l}, the cubic–quintic
// nonlinearity and the mass / energy / potential functionals.

#include <cmath>
#include <numbers>
#include <optional>

#include "icqnls/norms.hpp"

namespace icqnls {

struct CoefficientSpec {
  double lambda1 = 0.0;
  double b1 = 0.0;
  double lambda2 = 0.0;
  double b2 = 0.0;

  void validate() const {
    if (!(b1 >= 0.0) || !(b2 >= 0.0)) throw ConfigError("coefficients: exponents b1, b2 must be >= 0");
    if (!std::isfinite(lambda1) || !std::isfinite(lambda2))
      throw ConfigError("coefficients: lambda1, lambda2 must be finite");
  }
  bool linear() const { return lambda1 == 0.0 && lambda2 == 0.0; }
  bool focusing() const { return lambda1 <= 0.0 && lambda2 <= 0.0 && !linear(); }
};

/// K_1 and K_2 sampled on a grid; reused across steps and diagnostics.
struct CoefficientField {
  GridPtr grid;
  CoefficientSpec spec;
  rvector k1;
  rvector k2;

  CoefficientField(const GridPtr& g, const CoefficientSpec& c) : grid(g), spec(c) {
    c.validate();
    auto r = radius_values(*g);
    k1.resize(r.size());
    k2.resize(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      k1[i] = c.lambda1 == 0.0 ? 0.0 : c.lambda1 * (c.b1 == 0.0 ? 1.0 : std::pow(r[i], c.b1));
      k2[i] = c.lambda2 == 0.0 ? 0.0 : c.lambda2 * (c.b2 == 0.0 ? 1.0 : std::pow(r[i], c.b2));
    }
  }
};

/// λ1|x|^{b1}|u|²u + λ2|x|^{b2}|u|⁴u.
inline ComplexField nonlinear_term(const ComplexField& u, const CoefficientField& k) {
  u.require_finite("nonlinear_term");
  ComplexField out(u.grid_ptr());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double rho = std::norm(u[i]);
    out[i] = (k.k1[i] * rho + k.k2[i] * rho * rho) * u[i];
  }
  return out;
}

inline ComplexField nonlinear_term(const ComplexField& u, const CoefficientSpec& c) {
  return nonlinear_term(u, CoefficientField(u.grid_ptr(), c));
}

inline double mass(const ComplexField& u) {
  double acc = 0.0;
  for (const auto& v : u.values()) acc += std::norm(v);
  return acc * u.grid().cell_volume();
}

/// ∫K_1|u|⁴ and ∫K_2|u|⁶ (the signed weighted quartic and sextic integrals).
struct WeightedIntegrals {
  double quartic = 0.0;
  double sextic = 0.0;
};

inline WeightedIntegrals weighted_integrals(const ComplexField& u, const CoefficientField& k) {
  double q4 = 0.0, q6 = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double rho = std::norm(u[i]);
    const double rho2 = rho * rho;
    q4 += k.k1[i] * rho2;
    q6 += k.k2[i] * rho2 * rho;
  }
  const double dv = u.grid().cell_volume();
  return {q4 * dv, q6 * dv};
}

/// V(u) = ¼∫K_1|u|⁴ + ⅙∫K_2|u|⁶.
inline double potential_energy(const ComplexField& u, const CoefficientField& k) {
  auto w = weighted_integrals(u, k);
  return 0.25 * w.quartic + w.sextic / 6.0;
}

inline double potential_energy(const ComplexField& u, const CoefficientSpec& c) {
  return potential_energy(u, CoefficientField(u.grid_ptr(), c));
}

/// ‖∇u‖₂² as the quadratic form ⟨u, -Δu⟩ of the propagator's Laplacian.
inline double grad_norm2(const ComplexField& u) { return grad_norm2_from_spectrum(forward(u)); }

/// E(u) = ½‖∇u‖² + V(u).
inline double energy(const ComplexField& u, const CoefficientField& k) {
  u.require_finite("energy");
  return 0.5 * grad_norm2(u) + potential_energy(u, k);
}

inline double energy(const ComplexField& u, const CoefficientSpec& c) {
  return energy(u, CoefficientField(u.grid_ptr(), c));
}

/// Ratio (K - x·∇K)/K for K = λ|x|^b is the constant 1 - b; the same for the
/// quintic combination (4K - x·∇K)/K is 4 - b.
inline double cubic_virial_factor(const CoefficientSpec& c) { return 1.0 - c.b1; }
inline double quintic_virial_factor(const CoefficientSpec& c) { return 4.0 - c.b2; }

/// ∫|x|^b e^{-a|x|²} over R³.
inline double radial_gaussian_moment(double b, double a) {
  return 2.0 * std::numbers::pi * std::pow(a, -0.5 * (b + 3.0)) * std::tgamma(0.5 * (b + 3.0));
}

/// Closed-form pieces of E for the centred Gaussian A e^{-|x|²/(2w²)}.
struct GaussianEnergy {
  double grad_norm2 = 0.0;
  double quartic = 0.0;  // ∫K_1|φ|⁴
  double sextic = 0.0;   // ∫K_2|φ|⁶
  double energy() const { return 0.5 * grad_norm2 + 0.25 * quartic + sextic / 6.0; }
};

inline GaussianEnergy gaussian_energy(const CoefficientSpec& c, double amplitude, double width) {
  const double a2 = amplitude * amplitude, w2 = width * width;
  GaussianEnergy e;
  e.grad_norm2 = 1.5 * a2 * std::pow(std::numbers::pi, 1.5) * width;
  e.quartic = c.lambda1 * a2 * a2 * radial_gaussian_moment(c.b1, 2.0 / w2);
  e.sextic = c.lambda2 * a2 * a2 * a2 * radial_gaussian_moment(c.b2, 3.0 / w2);
  return e;
}

/// Smallest amplitude at which the centred Gaussian of the given width has
/// zero energy; empty when the energy stays positive.
inline std::optional<double> zero_energy_amplitude(const CoefficientSpec& c, double width) {
  const auto unit = gaussian_energy(c, 1.0, width);
  // E(A)/A² = ½G + ¼Q4·y + ⅙Q6·y², y = A²
  const double p0 = 0.5 * unit.grad_norm2, p1 = 0.25 * unit.quartic, p2 = unit.sextic / 6.0;
  std::optional<double> y;
  if (p2 == 0.0) {
    if (p1 < 0.0) y = -p0 / p1;
  } else {
    const double disc = p1 * p1 - 4.0 * p2 * p0;
    if (disc >= 0.0) {
      const double r1 = (-p1 - std::sqrt(disc)) / (2.0 * p2), r2 = (-p1 + std::sqrt(disc)) / (2.0 * p2);
      for (double r : {std::min(r1, r2), std::max(r1, r2)})
        if (r > 0.0) {
          y = r;
          break;
        }
    }
  }
  if (!y) return std::nullopt;
  return std::sqrt(*y);
}

struct BlowupBoundParams {
  double alpha = 0.0;
  double initial_variance = 0.0;
  double initial_dilation = 0.0;
  double initial_energy = 0.0;
};

/// Right-hand side of the variance bound
///   ‖xφ‖² + 4t𝒜(0) + (8 + 4α)t²E(φ).
inline double concavity_bound(const BlowupBoundParams& p, double t) {
  return p.initial_variance + 4.0 * t * p.initial_dilation + (8.0 + 4.0 * p.alpha) * t * t * p.initial_energy;
}

/// Smallest positive root of the concavity bound, if the quadratic turns
/// negative for some t > 0.
inline std::optional<double> blowup_time_bound(const BlowupBoundParams& p) {
  if (p.alpha < 0.0) throw ParameterError("blowup_time_bound: alpha must be >= 0");
  const double a = (8.0 + 4.0 * p.alpha) * p.initial_energy;
  const double b = 4.0 * p.initial_dilation;
  const double c = p.initial_variance;
  if (a < 0.0) {
    // a t² + b t + c with a < 0, c >= 0: exactly one nonnegative root.
    const double disc = b * b - 4.0 * a * c;
    const double t = (-b - std::sqrt(disc)) / (2.0 * a);
    return t > 0.0 ? std::optional<double>(t) : std::nullopt;
  }
  if (a == 0.0) {
    if (b < 0.0) return -c / b;
    return std::nullopt;
  }
  // Upward parabola: negative only between two positive roots.
  if (b >= 0.0) return std::nullopt;
  const double disc = b * b - 4.0 * a * c;
  if (disc <= 0.0) return std::nullopt;
  const double q = -0.5 * (b - std::sqrt(disc));
  const double r1 = q / a, r2 = c / q;
  return std::min(r1, r2);
}

}  // namespace icqnls
