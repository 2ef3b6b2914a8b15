#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "she/predictor.hpp"
#include "she/sigma_models.hpp"

namespace she {

enum class Kernel { Gaussian, Epanechnikov };

struct Observation {
  double u = 0.0;
  double y = 0.0;
};

/// Nadaraya--Watson estimator of E[y | u]. Immutable once built.
class RegressionFit {
 public:
  RegressionFit(std::vector<Observation> samples, double bandwidth, Kernel kernel = Kernel::Gaussian);

  double bandwidth() const { return bandwidth_; }
  Kernel kernel() const { return kernel_; }
  std::size_t size() const { return u_.size(); }

  double predict(double u) const;

  /// Local mean and local (observation-level) variance at u.
  struct Moments {
    double mean = 0.0;
    double variance = 0.0;
  };
  Moments local_moments(double u) const;

  std::pair<double, double> prediction_interval(double u, double level = 0.95) const;

 private:
  double weight(double z) const;
  std::pair<std::size_t, std::size_t> support(double u) const;
  std::size_t nearest(double u) const;

  Eigen::VectorXd u_;  // sorted ascending
  Eigen::VectorXd y_;
  double bandwidth_;
  Kernel kernel_;
};

RegressionFit fit(std::span<const Observation> samples, double bandwidth,
                  Kernel kernel = Kernel::Gaussian);
RegressionFit fit(std::span<const Sample> samples, double bandwidth, Kernel kernel = Kernel::Gaussian);

inline double predict(const RegressionFit& f, double u) { return f.predict(u); }
inline std::pair<double, double> prediction_interval(const RegressionFit& f, double u,
                                                     double level = 0.95) {
  return f.prediction_interval(u, level);
}

/// Standard normal quantile.
double normal_quantile(double p);

Eigen::VectorXd uniform_grid(double lo, double hi, Index n);

/// Trapezoid approximation of the integral of |predict(u) - sigma^2(u)| over [u_min, u_max].
double l1_error(const RegressionFit& f, const SigmaModel& model, double u_min = 0.0,
                double u_max = 4.0, Index grid_n = 512);

struct CurveReport {
  Eigen::VectorXd u_grid, estimate, pi_lower, pi_upper, truth;
};

CurveReport curve_report(const RegressionFit& f, const SigmaModel& model, double u_min = 0.0,
                         double u_max = 4.0, Index grid_n = 512, double level = 0.95);

/// Grid indices of strict interior local maxima of `values` whose abscissa lies in
/// [lo, hi], ordered by decreasing value.
std::vector<Index> local_maxima(const Eigen::VectorXd& grid, const Eigen::VectorXd& values,
                                double lo, double hi);

struct ShiftDemoResult {
  Eigen::VectorXd x, x_tilde, y, noise;
  Eigen::VectorXd grid, fitted, truth;
};

/// Skewed-noise measurement model: y = s^2(x), x~ = x + 2 s^2(w) e with
/// 1 - e ~ chi^2(1); w = y when `literal_composition`, w = x otherwise.
/// Kernel regression of y on x~ is evaluated on `grid_n` nodes over [0, 4].
ShiftDemoResult shift_demo(Index n, std::uint64_t seed, bool literal_composition,
                           const SigmaModel& model = SigmaModel(SigmaKind::Sigma3),
                           double bandwidth = 0.05, Index grid_n = 2001);

}  // namespace she
