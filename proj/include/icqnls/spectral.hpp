#pragma once

// Discrete Fourier transforms and Fourier-multiplier operators on the
// periodic box, plus the angular momentum operator L = x × (-i∇).

#include <fftw3.h>

#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "icqnls/grid.hpp"

namespace icqnls {

namespace detail {

class FftPlans {
 public:
  struct Pair {
    fftw_plan forward;
    fftw_plan backward;
  };

  static const Pair& get(int n) {
    static FftPlans cache;
    std::lock_guard lock(cache.mutex_);
    auto it = cache.plans_.find(n);
    if (it != cache.plans_.end()) return it->second;
    const std::size_t total = static_cast<std::size_t>(n) * n * n;
    auto* buf = fftw_alloc_complex(total);
    Pair p{};
    p.forward = fftw_plan_dft_3d(n, n, n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    p.backward = fftw_plan_dft_3d(n, n, n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    fftw_free(buf);
    return cache.plans_.emplace(n, p).first->second;
  }

  ~FftPlans() {
    for (auto& [n, p] : plans_) {
      fftw_destroy_plan(p.forward);
      fftw_destroy_plan(p.backward);
    }
  }

 private:
  std::mutex mutex_;
  std::map<int, Pair> plans_;
};

inline fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace detail

/// Unnormalized DFT coefficients of a field, stored in FFT order.
struct SpectralField {
  GridPtr grid;
  cvector coeffs;
};

inline SpectralField forward(const ComplexField& f) {
  SpectralField s{f.grid_ptr(), f.storage()};
  const auto& plan = detail::FftPlans::get(f.grid().n_per_axis);
  fftw_execute_dft(plan.forward, detail::as_fftw(s.coeffs.data()), detail::as_fftw(s.coeffs.data()));
  return s;
}

inline ComplexField inverse(SpectralField s) {
  const auto& plan = detail::FftPlans::get(s.grid->n_per_axis);
  fftw_execute_dft(plan.backward, detail::as_fftw(s.coeffs.data()), detail::as_fftw(s.coeffs.data()));
  const double scale = 1.0 / static_cast<double>(s.coeffs.size());
  for (auto& c : s.coeffs) c *= scale;
  return ComplexField(s.grid, std::move(s.coeffs));
}

/// Visit every spectral index with its wavevector.
template <class Fn>
void for_each_mode(const GridSpec& g, Fn&& fn) {
  const int n = g.n_per_axis;
  const auto& kv = g.wavenumbers;
  std::size_t idx = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k, ++idx) fn(idx, i, j, k, kv[i], kv[j], kv[k]);
}

/// Multiply the spectrum by m(k1, k2, k3) in place.
template <class Fn>
void apply_multiplier_inplace(SpectralField& s, Fn&& m) {
  for_each_mode(*s.grid, [&](std::size_t idx, int, int, int, double k1, double k2, double k3) {
    s.coeffs[idx] *= m(k1, k2, k3);
  });
}

template <class Fn>
ComplexField apply_multiplier(const ComplexField& f, Fn&& m) {
  auto s = forward(f);
  apply_multiplier_inplace(s, std::forward<Fn>(m));
  return inverse(std::move(s));
}

enum class DerivativeKind { partial, gradient, laplacian, fractional, bessel };

/// Selects a Fourier multiplier: ∂_j (i k_j), ∇, Δ (-|k|²), D^s (|k|^s), Λ^s ((1+|k|²)^{s/2}).
struct DerivativeSpec {
  DerivativeKind kind = DerivativeKind::laplacian;
  int axis = 0;
  double s = 0.0;

  static DerivativeSpec partial(int axis) { return {DerivativeKind::partial, axis, 0.0}; }
  static DerivativeSpec gradient() { return {DerivativeKind::gradient, 0, 0.0}; }
  static DerivativeSpec laplacian() { return {DerivativeKind::laplacian, 0, 0.0}; }
  static DerivativeSpec fractional(double s) { return {DerivativeKind::fractional, 0, s}; }
  static DerivativeSpec bessel(double s) { return {DerivativeKind::bessel, 0, s}; }
};

/// i k_j with the Nyquist mode zeroed (odd-derivative convention).
inline cplx partial_symbol(const GridSpec& g, int idx_along_axis) {
  if (idx_along_axis == g.nyquist_index) return cplx{0.0, 0.0};
  return cplx{0.0, g.wavenumbers[idx_along_axis]};
}

/// Spectral partial derivative applied to an existing spectrum.
inline ComplexField partial_from_spectrum(const SpectralField& s, int axis) {
  SpectralField d = s;
  const auto& g = *s.grid;
  for_each_mode(g, [&](std::size_t idx, int i, int j, int k, double, double, double) {
    const int a = axis == 0 ? i : (axis == 1 ? j : k);
    d.coeffs[idx] *= partial_symbol(g, a);
  });
  return inverse(std::move(d));
}

inline std::array<ComplexField, 3> gradient_from_spectrum(const SpectralField& s) {
  return {partial_from_spectrum(s, 0), partial_from_spectrum(s, 1), partial_from_spectrum(s, 2)};
}

inline std::array<ComplexField, 3> gradient(const ComplexField& f) {
  return gradient_from_spectrum(forward(f));
}

inline ComplexField partial(const ComplexField& f, int axis) {
  if (axis < 0 || axis > 2) throw ParameterError("partial: axis must be 0, 1 or 2");
  return partial_from_spectrum(forward(f), axis);
}

inline ComplexField laplacian(const ComplexField& f) {
  return apply_multiplier(f, [](double a, double b, double c) { return -(a * a + b * b + c * c); });
}

/// D^s = (-Δ)^{s/2}; the zero mode maps to zero.
inline ComplexField fractional_derivative(const ComplexField& f, double s) {
  if (s < 0.0) throw ParameterError("D^s requires s >= 0");
  if (s == 0.0) return f;
  return apply_multiplier(f, [s](double a, double b, double c) {
    const double k2 = a * a + b * b + c * c;
    return k2 == 0.0 ? 0.0 : std::pow(k2, 0.5 * s);
  });
}

/// Λ^s = (1 - Δ)^{s/2}.
inline ComplexField bessel_potential(const ComplexField& f, double s) {
  if (s < 0.0) throw ParameterError("Λ^s requires s >= 0");
  if (s == 0.0) return f;
  return apply_multiplier(f, [s](double a, double b, double c) {
    const double q = 1.0 + a * a + b * b + c * c;
    return s == 1.0 ? std::sqrt(q) : (s == 2.0 ? q : std::pow(q, 0.5 * s));
  });
}

inline std::vector<ComplexField> spectral_derivative(const ComplexField& f, const DerivativeSpec& spec) {
  f.require_finite("spectral_derivative");
  switch (spec.kind) {
    case DerivativeKind::partial: return {partial(f, spec.axis)};
    case DerivativeKind::gradient: {
      auto g = gradient(f);
      return {std::move(g[0]), std::move(g[1]), std::move(g[2])};
    }
    case DerivativeKind::laplacian: return {laplacian(f)};
    case DerivativeKind::fractional: return {fractional_derivative(f, spec.s)};
    case DerivativeKind::bessel: return {bessel_potential(f, spec.s)};
  }
  throw ParameterError("spectral_derivative: unknown kind");
}

/// Σ |k|² |f̂_k|² scaled to the continuum value of ‖∇f‖₂² (= ⟨f, -Δf⟩).
/// Trigonometric interpolant of the samples evaluated at an arbitrary point;
/// the Nyquist mode contributes its cosine (real-symmetric) part.
inline cplx evaluate_at(const SpectralField& s, double x, double y, double z) {
  const auto& g = *s.grid;
  const int n = g.n_per_axis;
  const double x0 = g.coords[0];
  auto factors = [&](double p) {
    std::vector<cplx> e(n);
    for (int m = 0; m < n; ++m) {
      const double arg = g.wavenumbers[m] * (p - x0);
      e[m] = m == g.nyquist_index ? cplx{std::cos(arg), 0.0} : std::polar(1.0, arg);
    }
    return e;
  };
  const auto ex = factors(x), ey = factors(y), ez = factors(z);
  cplx acc{};
  for_each_mode(g, [&](std::size_t idx, int i, int j, int k, double, double, double) {
    acc += s.coeffs[idx] * ex[i] * ey[j] * ez[k];
  });
  return acc / static_cast<double>(g.size());
}

inline cplx evaluate_at(const ComplexField& f, double x, double y, double z) {
  return evaluate_at(forward(f), x, y, z);
}

inline double grad_norm2_from_spectrum(const SpectralField& s) {
  double acc = 0.0;
  for_each_mode(*s.grid, [&](std::size_t idx, int, int, int, double a, double b, double c) {
    acc += (a * a + b * b + c * c) * std::norm(s.coeffs[idx]);
  });
  const auto& g = *s.grid;
  return acc * g.cell_volume() / static_cast<double>(g.size());
}

// ---------------------------------------------------------------------------
// Angular momentum

namespace detail {

/// x_a * f_b - x_b * f_a at every point, times -i.
inline ComplexField cross_component(const GridSpec& g, const GridPtr& gp, int a, int b,
                                    const ComplexField& da, const ComplexField& db) {
  ComplexField out(gp);
  const int n = g.n_per_axis;
  const auto& c = g.coords;
  const cplx minus_i{0.0, -1.0};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const std::array<double, 3> x{c[i], c[j], c[k]};
        const std::size_t idx = g.index(i, j, k);
        out[idx] = minus_i * (x[a] * db[idx] - x[b] * da[idx]);
      }
  return out;
}

inline ComplexField l_component_from_gradient(const ComplexField& f, int comp,
                                              const std::array<ComplexField, 3>& grad) {
  // L_1 = -i(x2 ∂3 - x3 ∂2), L_2 = -i(x3 ∂1 - x1 ∂3), L_3 = -i(x1 ∂2 - x2 ∂1)
  const int a = (comp + 1) % 3;
  const int b = (comp + 2) % 3;
  return cross_component(f.grid(), f.grid_ptr(), a, b, grad[a], grad[b]);
}

}  // namespace detail

/// L_comp f for a single component (0, 1, 2).
inline ComplexField angular_component(const ComplexField& f, int comp) {
  if (comp < 0 || comp > 2) throw ParameterError("angular_component: component must be 0, 1 or 2");
  const int a = (comp + 1) % 3;
  const int b = (comp + 2) % 3;
  auto s = forward(f);
  auto da = partial_from_spectrum(s, a);
  auto db = partial_from_spectrum(s, b);
  return detail::cross_component(f.grid(), f.grid_ptr(), a, b, da, db);
}

struct AngularMomentum {
  std::array<ComplexField, 3> components;
  bool boundary_warning = false;
};

/// The three fields L_j f, computed by spectral gradient followed by
/// coordinate multiplication.
inline AngularMomentum angular_momentum(const ComplexField& f) {
  f.require_finite("angular_momentum");
  auto grad = gradient(f);
  AngularMomentum out;
  for (int c = 0; c < 3; ++c) out.components[c] = detail::l_component_from_gradient(f, c, grad);
  out.boundary_warning = boundary_contaminated(f);
  return out;
}

/// |L|² f = Σ_j L_j (L_j f).
inline Flagged<ComplexField> angular_momentum_squared(const ComplexField& f) {
  auto l = angular_momentum(f);
  ComplexField acc(f.grid_ptr());
  for (int c = 0; c < 3; ++c) acc += angular_component(l.components[c], c);
  return {std::move(acc), l.boundary_warning};
}

/// L_j L_k f.
inline Flagged<ComplexField> angular_momentum_pair(const ComplexField& f, int j, int k) {
  auto inner = angular_component(f, k);
  return {angular_component(inner, j), boundary_contaminated(f)};
}

enum class AngularOrder { L, L_squared, L_pair };

/// Dispatching form: L returns three fields, L_squared one, L_pair one (L_j L_k).
inline Flagged<std::vector<ComplexField>> angular_momentum(const ComplexField& f, AngularOrder order,
                                                           int j = 0, int k = 0) {
  switch (order) {
    case AngularOrder::L: {
      auto l = angular_momentum(f);
      return {{std::move(l.components[0]), std::move(l.components[1]), std::move(l.components[2])},
              l.boundary_warning};
    }
    case AngularOrder::L_squared: {
      auto l2 = angular_momentum_squared(f);
      return {{std::move(l2.value)}, l2.boundary_warning};
    }
    case AngularOrder::L_pair: {
      if (j < 0 || j > 2 || k < 0 || k > 2) throw ParameterError("L_pair: indices must be in {0,1,2}");
      auto p = angular_momentum_pair(f, j, k);
      return {{std::move(p.value)}, p.boundary_warning};
    }
  }
  throw ParameterError("angular_momentum: unknown order");
}

}  // namespace icqnls
