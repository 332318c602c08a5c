#pragma once

#include <cmath>
#include <limits>

namespace icqnls {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// One row of monitored functionals at time t.
struct DiagnosticRecord {
  double t = 0.0;
  double mass = 0.0;
  double energy = 0.0;
  double grad_norm2 = 0.0;   // ‖∇u‖₂²
  double variance = 0.0;     // ‖xu‖₂²
  double dilation = 0.0;     // Im∫ ū x·∇u
  double potential = 0.0;    // V(u)
  double hl11_norm = kNaN;   // ‖u‖_{H_L^{1,1}}, when enabled
  double galilean_norm2 = 0.0;  // ‖(x + 2it∇)u‖₂²
  double quartic = 0.0;      // ∫K_1|u|⁴
  double sextic = 0.0;       // ∫K_2|u|⁶
  double scatter_distance = kNaN;
  double interaction_gap = kNaN;
  double overlap_H = kNaN;
  double virial_residual = kNaN;
  double dilation_residual = kNaN;
  double pconf_residual = kNaN;
  bool boundary_warning = false;
};

}  // namespace icqnls
