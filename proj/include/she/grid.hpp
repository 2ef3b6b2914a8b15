#pragma once

#include <Eigen/Core>
#include <cmath>

#include "she/errors.hpp"

namespace she {

using Index = Eigen::Index;

enum class TimeStepRule { NtEqualsNxSquared, Explicit };

/// Lattice geometry on [0, L] x [0, T]. Sites 0 and nx-1 are Dirichlet (pinned to 0);
/// rows are indexed 0..nt, row 0 being the initial data.
struct GridConfig {
  double L = 1.0;
  double T = 1.0;
  Index nx = 128;
  Index nt = 128 * 128;
  double u0 = 6.0;
  TimeStepRule rule = TimeStepRule::NtEqualsNxSquared;

  static GridConfig make(double L, double T, Index nx, Index nt, double u0,
                         TimeStepRule rule = TimeStepRule::Explicit) {
    GridConfig g{L, T, nx, rule == TimeStepRule::NtEqualsNxSquared ? nx * nx : nt, u0, rule};
    g.validate();
    return g;
  }

  double dx() const { return L / static_cast<double>(nx); }
  double dt() const { return T / static_cast<double>(nt); }
  Index rows() const { return nt + 1; }

  void validate() const {
    if (nx < 4) throw ValidationError("grid needs nx >= 4");
    if (nt < 1) throw ValidationError("grid needs nt >= 1");
    if (!(L > 0.0) || !(T > 0.0)) throw ValidationError("grid needs L > 0 and T > 0");
    if (!std::isfinite(u0)) throw ValidationError("initial value must be finite");
    if (rule == TimeStepRule::NtEqualsNxSquared && nt != nx * nx)
      throw ValidationError("time_step_rule nt=nx^2 violated");
    // Explicit Euler stability for the (nx^2/2)-scaled second difference.
    const double dx_ = dx();
    if (dt() > dx_ * dx_ * (1.0 + 1e-12))
      throw ValidationError("unstable grid: dt = " + std::to_string(dt()) +
                            " exceeds dx^2 = " + std::to_string(dx_ * dx_));
  }
};

}  // namespace she
