#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "she/errors.hpp"
#include "she/grid.hpp"
#include "she/lattice.hpp"

namespace she {

/// Spatial scale h, window radius eps, and their lattice counterparts:
/// di = eps/dx and dj = eps/dt (window half-width and depth), sh = h/dx and
/// st = h^2/dt (stencil shifts). All four must be integers.
struct WindowSpec {
  double h = 0.0;
  double eps = 0.0;
  Index di = 0;
  Index dj = 0;
  Index sh = 0;
  Index st = 0;

  static WindowSpec make(const GridConfig& cfg, double h, double eps);

  /// Number of lattice points in the space-time window.
  Index window_size() const { return (2 * di + 1) * (dj + 1); }
  /// Rows a field must keep to evaluate a window ending at the newest row.
  Index required_depth() const { return dj + st + 1; }
  std::string label() const;
};

/// Valid conditioning points: i0 in [i_min, i_max], j0 in [0, j_max].
struct PointDomain {
  Index i_min = 0;
  Index i_max = -1;
  Index j_max = -1;
  Index sites() const { return i_max - i_min + 1; }
  Index size() const { return sites() > 0 && j_max >= 0 ? sites() * (j_max + 1) : 0; }
  bool contains(Index i0, Index j0) const {
    return i0 >= i_min && i0 <= i_max && j0 >= 0 && j0 <= j_max;
  }
};

PointDomain point_domain(const GridConfig& cfg, const WindowSpec& w);

/// Constant coefficients of the discrete operator
///   D_t^{h^2} - a D^{2,h} + b D^{1,h}.
struct LhCoefficients {
  double a = 1.0;
  double b = 0.0;

  static LhCoefficients paper_exact() { return {1.0, 0.0}; }
  /// a = 1/2, matching the simulated generator (1/2) d_xx.
  static LhCoefficients generator_matched() { return {0.5, 0.0}; }
  /// "paper", "generator", or "a=<real>[,b=<real>]".
  static LhCoefficients parse(const std::string& text);
  std::string to_string() const;

  void validate() const {
    if (!(a > 0.0) || !std::isfinite(a) || !std::isfinite(b))
      throw ValidationError("L^h coefficients need finite a > 0 and finite b");
  }
};

struct Sample {
  double u_value = 0.0;
  double sigma_tilde_sq = 0.0;
  double x0 = 0.0;
  double t0 = 0.0;
  std::int64_t realization_id = 0;
  double h = 0.0;
  double eps = 0.0;
  Index i0 = 0;
  Index j0 = 0;
};

/// (L^h u)_i(t_j) on any field view.
template <FieldView F>
double apply_Lh(const F& field, Index i, Index j, const WindowSpec& w, const LhCoefficients& coeff) {
  if (!field.resident(j) || !field.resident(j + w.st))
    throw WindowUnavailable("apply_Lh: rows " + std::to_string(j) + " and " +
                            std::to_string(j + w.st) + " must be resident");
  if (i - w.sh < 0 || i + w.sh >= field.sites())
    throw WindowUnavailable("apply_Lh: site " + std::to_string(i) + " stencil leaves the lattice");
  const auto now = field.row(j);
  const auto later = field.row(j + w.st);
  const double h2 = w.h * w.h;
  return (later(i) - now(i)) / h2 - coeff.a * (now(i - w.sh) - 2.0 * now(i) + now(i + w.sh)) / h2 +
         coeff.b * (now(i + w.sh) - now(i)) / w.h;
}

/// Squared, normalized window sum of L^h(u - u_det) for the window anchored at (i0, j0).
template <FieldView F, FieldView D>
double sigma_tilde(const F& field, const D& det, Index i0, Index j0, const WindowSpec& w,
                   const LhCoefficients& coeff, const GridConfig& cfg) {
  if (!point_domain(cfg, w).contains(i0, j0))
    throw PointSkipped("point (" + std::to_string(i0) + ", " + std::to_string(j0) +
                       ") too close to the boundary or final time for " + w.label());
  const Index j_last = j0 + w.dj + w.st;
  if (!field.resident(j0) || !field.resident(j_last) || !det.resident(j0) || !det.resident(j_last))
    throw WindowUnavailable("sigma_tilde: rows " + std::to_string(j0) + ".." +
                            std::to_string(j_last) + " must be resident");

  const Index len = 2 * w.di + 1;
  const Index lo = i0 - w.di;
  const double h2 = w.h * w.h;
  double total = 0.0;
  for (Index j = j0; j <= j0 + w.dj; ++j) {
    const auto u_now = field.row(j);
    const auto u_later = field.row(j + w.st);
    const auto d_now = det.row(j);
    const auto d_later = det.row(j + w.st);
    const auto v_now = u_now - d_now;
    const double time_part =
        (u_later.segment(lo, len) - d_later.segment(lo, len)).sum() - v_now.segment(lo, len).sum();
    const double left = v_now.segment(lo - w.sh, len).sum();
    const double mid = v_now.segment(lo, len).sum();
    const double right = v_now.segment(lo + w.sh, len).sum();
    total += time_part / h2 - coeff.a * (left - 2.0 * mid + right) / h2 +
             coeff.b * (right - mid) / w.h;
  }
  const double scale = (cfg.T * cfg.L) /
                       (static_cast<double>(cfg.nx) * static_cast<double>(cfg.nt)) /
                       (std::numbers::sqrt2 * w.eps);
  const double s = scale * total;
  return s * s;
}

/// Row j of the summed table: S_j(0) = 0, S_j(i+1) = S_j(i) + sum over j' <= j of
/// (u - u_det)(i, j'). Rows before 0 read as zero.
using SummedTable = BasicRollingField<long double>;

/// Same quantity as sigma_tilde, read from a summed table in O(1).
template <FieldView S>
double sigma_tilde_summed(const S& table, Index i0, Index j0, const WindowSpec& w,
                          const LhCoefficients& coeff, const GridConfig& cfg) {
  if (!point_domain(cfg, w).contains(i0, j0))
    throw PointSkipped("point (" + std::to_string(i0) + ", " + std::to_string(j0) +
                       ") too close to the boundary or final time for " + w.label());
  const Index j_last = j0 + w.dj + w.st;
  if ((j0 > 0 && !table.resident(j0 - 1)) || !table.resident(j_last))
    throw WindowUnavailable("sigma_tilde_summed: rows " + std::to_string(j0 - 1) + ".." +
                            std::to_string(j_last) + " must be resident");
  const Index len = 2 * w.di + 1;
  const Index lo = i0 - w.di;
  auto at = [&](Index j, Index i) -> long double { return j < 0 ? 0.0L : table.row(j)(i); };
  auto box = [&](Index ja, Index jb, Index c) {
    return (at(jb, c + len) - at(jb, c)) - (at(ja - 1, c + len) - at(ja - 1, c));
  };
  const long double mid = box(j0, j0 + w.dj, lo);
  const long double left = box(j0, j0 + w.dj, lo - w.sh);
  const long double right = box(j0, j0 + w.dj, lo + w.sh);
  const long double time_part = box(j0 + w.st, j_last, lo) - mid;
  const long double h2 = static_cast<long double>(w.h) * w.h;
  const long double total =
      time_part / h2 - coeff.a * (left - 2.0L * mid + right) / h2 + coeff.b * (right - mid) / w.h;
  const double scale = (cfg.T * cfg.L) /
                       (static_cast<double>(cfg.nx) * static_cast<double>(cfg.nt)) /
                       (std::numbers::sqrt2 * w.eps);
  const double s = scale * static_cast<double>(total);
  return s * s;
}

enum class PointSampling { Uniform, Stride };

/// Selected conditioning points in (j0, i0) lexicographic order.
std::vector<std::pair<Index, Index>> select_points(const PointDomain& domain, Index n_points,
                                                   std::uint64_t point_seed, PointSampling mode);

struct WindowPlan {
  WindowSpec window;
  Index n_points = 0;
  std::uint64_t point_seed = 0;
  PointSampling sampling = PointSampling::Uniform;
};

/// One streaming realization evaluated for every plan; result[k] belongs to plans[k].
std::vector<std::vector<Sample>> extract_realization(const GridConfig& cfg, const SigmaModel& model,
                                                     const NoiseSpec& noise,
                                                     std::span<const WindowPlan> plans,
                                                     const LhCoefficients& coeff,
                                                     const DeterministicTrajectory& det,
                                                     const StreamObserver& extra = {});

std::vector<Sample> extract_dataset(const GridConfig& cfg, const SigmaModel& model,
                                    const NoiseSpec& noise, const WindowSpec& w,
                                    const LhCoefficients& coeff, Index n_points,
                                    std::uint64_t point_seed, const DeterministicTrajectory& det,
                                    PointSampling sampling = PointSampling::Uniform);

/// Convenience overload computing the deterministic companion itself.
std::vector<Sample> extract_dataset(const GridConfig& cfg, const SigmaModel& model,
                                    const NoiseSpec& noise, const WindowSpec& w,
                                    const LhCoefficients& coeff, Index n_points,
                                    std::uint64_t point_seed);

}  // namespace she
