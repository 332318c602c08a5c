#pragma once

// Periodic computational box [-L, L)^3 and complex sample fields bound to it.

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdlib>
#include <memory>
#include <new>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "icqnls/errors.hpp"

namespace icqnls {

using cplx = std::complex<double>;

/// Allocator returning 64-byte aligned storage so FFT plans can use SIMD
/// paths on every field.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t alignment = 64;

  AlignedAllocator() noexcept = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    std::size_t bytes = ((n * sizeof(T) + alignment - 1) / alignment) * alignment;
    if (bytes == 0) bytes = alignment;
    void* p = std::aligned_alloc(alignment, bytes);
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { std::free(p); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using cvector = std::vector<cplx, AlignedAllocator<cplx>>;
using rvector = std::vector<double>;

struct GridSpec {
  int n_per_axis = 0;
  double half_length = 0.0;
  bool offset = false;
  double spacing = 0.0;
  rvector coords;       // per-axis sample coordinates
  rvector wavenumbers;  // per-axis wavenumbers in FFT storage order
  int nyquist_index = 0;

  std::size_t size() const {
    auto n = static_cast<std::size_t>(n_per_axis);
    return n * n * n;
  }
  double cell_volume() const { return spacing * spacing * spacing; }
  std::size_t index(int i, int j, int k) const {
    auto n = static_cast<std::size_t>(n_per_axis);
    return (static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)) * n +
           static_cast<std::size_t>(k);
  }
  bool same_as(const GridSpec& o) const {
    return n_per_axis == o.n_per_axis && half_length == o.half_length && offset == o.offset;
  }
};

using GridPtr = std::shared_ptr<const GridSpec>;

inline GridPtr make_grid(int n_per_axis, double half_length, bool offset) {
  if (n_per_axis < 4 || n_per_axis % 2 != 0)
    throw ConfigError("grid: n_per_axis must be even and >= 4, got " + std::to_string(n_per_axis));
  if (!(half_length > 0.0) || !std::isfinite(half_length))
    throw ConfigError("grid: half_length must be positive and finite");

  auto g = std::make_shared<GridSpec>();
  g->n_per_axis = n_per_axis;
  g->half_length = half_length;
  g->offset = offset;
  g->spacing = 2.0 * half_length / n_per_axis;
  g->coords.resize(n_per_axis);
  g->wavenumbers.resize(n_per_axis);
  const double shift = offset ? 0.5 : 0.0;
  const double dk = std::numbers::pi / half_length;
  for (int i = 0; i < n_per_axis; ++i) {
    g->coords[i] = -half_length + (i + shift) * g->spacing;
    int m = i < n_per_axis / 2 ? i : i - n_per_axis;
    g->wavenumbers[i] = dk * m;
  }
  g->nyquist_index = n_per_axis / 2;
  return g;
}

/// Complex samples u(x) on a grid, physical-space representation.
class ComplexField {
 public:
  ComplexField() = default;
  explicit ComplexField(GridPtr grid) : grid_(std::move(grid)), values_(grid_->size(), cplx{}) {}
  ComplexField(GridPtr grid, cvector values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_->size()) throw UsageError("field: value count does not match grid");
  }

  template <class Fn>
  static ComplexField from_function(const GridPtr& grid, Fn&& fn) {
    ComplexField f(grid);
    const int n = grid->n_per_axis;
    const auto& c = grid->coords;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) f.values_[grid->index(i, j, k)] = fn(c[i], c[j], c[k]);
    return f;
  }

  const GridSpec& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::span<cplx> values() { return values_; }
  std::span<const cplx> values() const { return values_; }
  cvector& storage() { return values_; }
  const cvector& storage() const { return values_; }
  std::size_t size() const { return values_.size(); }
  cplx& operator[](std::size_t i) { return values_[i]; }
  const cplx& operator[](std::size_t i) const { return values_[i]; }

  bool all_finite() const {
    for (const auto& v : values_)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
  }
  void require_finite(const char* where) const {
    if (!all_finite()) throw NonFiniteError(std::string(where) + ": field contains NaN/Inf");
  }
  void require_same_grid(const ComplexField& o, const char* where) const {
    if (!grid_ || !o.grid_ || !grid_->same_as(*o.grid_))
      throw UsageError(std::string(where) + ": fields live on different grids");
  }

  ComplexField& operator+=(const ComplexField& o) {
    require_same_grid(o, "operator+=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  ComplexField& operator-=(const ComplexField& o) {
    require_same_grid(o, "operator-=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  ComplexField& operator*=(cplx a) {
    for (auto& v : values_) v *= a;
    return *this;
  }
  friend ComplexField operator+(ComplexField a, const ComplexField& b) { return a += b; }
  friend ComplexField operator-(ComplexField a, const ComplexField& b) { return a -= b; }
  friend ComplexField operator*(cplx a, ComplexField f) { return f *= a; }

 private:
  GridPtr grid_;
  cvector values_;
};

/// Real samples on a grid (weights |x|^b, coordinates).
struct RealField {
  GridPtr grid;
  rvector values;
};

/// Pointwise |x| at every sample point.
inline rvector radius_values(const GridSpec& g) {
  rvector r(g.size());
  const int n = g.n_per_axis;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double x = g.coords[i], y = g.coords[j], z = g.coords[k];
        r[g.index(i, j, k)] = std::sqrt(x * x + y * y + z * z);
      }
  return r;
}

/// |x|^b at every sample point.
inline RealField radial_weight(const GridPtr& grid, double b) {
  if (b < 0.0 && !grid->offset)
    throw ConfigError("radial_weight: negative exponent requires an offset grid (origin is sampled)");
  RealField w{grid, radius_values(*grid)};
  if (b == 0.0) {
    std::fill(w.values.begin(), w.values.end(), 1.0);
  } else if (b == 1.0) {
    // already |x|
  } else if (b == 2.0) {
    for (auto& v : w.values) v *= v;
  } else {
    for (auto& v : w.values) v = std::pow(v, b);
  }
  return w;
}

/// Fraction of the L2 mass sitting in the outer shell |x| > shell * L.
inline double boundary_mass_fraction(const ComplexField& f, double shell = 0.9) {
  const auto& g = f.grid();
  const double cut = shell * g.half_length;
  const int n = g.n_per_axis;
  double outer = 0.0, total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double x = g.coords[i], y = g.coords[j], z = g.coords[k];
        const double m = std::norm(f[g.index(i, j, k)]);
        total += m;
        if (x * x + y * y + z * z > cut * cut) outer += m;
      }
  return total > 0.0 ? outer / total : 0.0;
}

/// Coordinate multiplication is trusted only when less than this fraction of
/// the mass lies in the outer shell.
inline constexpr double kBoundaryMassTolerance = 0.01;

inline bool boundary_contaminated(const ComplexField& f) {
  return boundary_mass_fraction(f) > kBoundaryMassTolerance;
}

/// A value together with a boundary-contamination flag.
template <class T>
struct Flagged {
  T value;
  bool boundary_warning = false;
};

}  // namespace icqnls
