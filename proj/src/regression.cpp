#include "she/regression.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace she {

namespace {

// Gaussian weights beyond this many bandwidths underflow to exactly 0 in double.
constexpr double kGaussianCutoff = 40.0;

}  // namespace

RegressionFit::RegressionFit(std::vector<Observation> samples, double bandwidth, Kernel kernel)
    : bandwidth_(bandwidth), kernel_(kernel) {
  if (samples.empty()) throw ValidationError("regression needs at least one sample");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw ValidationError("regression bandwidth must be positive");
  std::stable_sort(samples.begin(), samples.end(),
                   [](const Observation& a, const Observation& b) { return a.u < b.u; });
  const auto n = static_cast<Index>(samples.size());
  u_.resize(n);
  y_.resize(n);
  for (Index k = 0; k < n; ++k) {
    if (!std::isfinite(samples[k].u) || !std::isfinite(samples[k].y))
      throw ValidationError("regression samples must be finite");
    u_(k) = samples[k].u;
    y_(k) = samples[k].y;
  }
}

double RegressionFit::weight(double z) const {
  if (kernel_ == Kernel::Gaussian) return std::exp(-0.5 * z * z);
  const double a = std::fabs(z);
  return a < 1.0 ? 0.75 * (1.0 - z * z) : 0.0;
}

std::pair<std::size_t, std::size_t> RegressionFit::support(double u) const {
  const double reach = (kernel_ == Kernel::Gaussian ? kGaussianCutoff : 1.0) * bandwidth_;
  const double* begin = u_.data();
  const double* end = begin + u_.size();
  const auto lo = std::lower_bound(begin, end, u - reach) - begin;
  const auto hi = std::upper_bound(begin, end, u + reach) - begin;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

std::size_t RegressionFit::nearest(double u) const {
  const double* begin = u_.data();
  const double* end = begin + u_.size();
  const double* it = std::lower_bound(begin, end, u);
  if (it == end) return static_cast<std::size_t>(u_.size() - 1);
  if (it != begin && std::fabs(*(it - 1) - u) <= std::fabs(*it - u)) --it;
  return static_cast<std::size_t>(it - begin);
}

RegressionFit::Moments RegressionFit::local_moments(double u) const {
  const auto [lo, hi] = support(u);
  double sw = 0.0, swy = 0.0;
  for (std::size_t k = lo; k < hi; ++k) {
    const double w = weight((u - u_(k)) / bandwidth_);
    sw += w;
    swy += w * y_(k);
  }
  if (sw == 0.0) {
    // All weights underflowed: fall back to the observations at the nearest abscissa.
    const std::size_t k = nearest(u);
    const double at = u_(k);
    double sum = 0.0;
    Index count = 0;
    for (Index m = 0; m < u_.size(); ++m)
      if (u_(m) == at) {
        sum += y_(m);
        ++count;
      }
    return {sum / static_cast<double>(count), 0.0};
  }
  const double mean = swy / sw;
  double swd = 0.0;
  for (std::size_t k = lo; k < hi; ++k) {
    const double d = y_(k) - mean;
    swd += weight((u - u_(k)) / bandwidth_) * d * d;
  }
  return {mean, swd / sw};
}

double RegressionFit::predict(double u) const { return local_moments(u).mean; }

std::pair<double, double> RegressionFit::prediction_interval(double u, double level) const {
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("prediction level must lie in (0, 1)");
  const Moments m = local_moments(u);
  const double half = normal_quantile(0.5 * (1.0 + level)) * std::sqrt(m.variance);
  const double lower = std::min(m.mean, std::max(0.0, m.mean - half));
  return {lower, m.mean + half};
}

RegressionFit fit(std::span<const Observation> samples, double bandwidth, Kernel kernel) {
  return RegressionFit(std::vector<Observation>(samples.begin(), samples.end()), bandwidth, kernel);
}

RegressionFit fit(std::span<const Sample> samples, double bandwidth, Kernel kernel) {
  std::vector<Observation> obs;
  obs.reserve(samples.size());
  for (const auto& s : samples) obs.push_back({s.u_value, s.sigma_tilde_sq});
  return RegressionFit(std::move(obs), bandwidth, kernel);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal_quantile needs p in (0, 1)");
  // Acklam's rational approximation, then one Halley step against erfc.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

Eigen::VectorXd uniform_grid(double lo, double hi, Index n) {
  if (n < 2) throw ValidationError("grid needs at least 2 nodes");
  if (!(lo < hi)) throw ValidationError("grid needs lo < hi");
  return Eigen::VectorXd::LinSpaced(n, lo, hi);
}

double l1_error(const RegressionFit& f, const SigmaModel& model, double u_min, double u_max,
                Index grid_n) {
  const Eigen::VectorXd grid = uniform_grid(u_min, u_max, grid_n);
  Eigen::VectorXd err(grid_n);
  for (Index k = 0; k < grid_n; ++k) err(k) = std::fabs(f.predict(grid(k)) - model.sigma_sq(grid(k)));
  const double step = (u_max - u_min) / static_cast<double>(grid_n - 1);
  return step * (err.sum() - 0.5 * (err(0) + err(grid_n - 1)));
}

CurveReport curve_report(const RegressionFit& f, const SigmaModel& model, double u_min, double u_max,
                         Index grid_n, double level) {
  CurveReport r;
  r.u_grid = uniform_grid(u_min, u_max, grid_n);
  r.estimate.resize(grid_n);
  r.pi_lower.resize(grid_n);
  r.pi_upper.resize(grid_n);
  r.truth.resize(grid_n);
  for (Index k = 0; k < grid_n; ++k) {
    const double u = r.u_grid(k);
    r.estimate(k) = f.predict(u);
    std::tie(r.pi_lower(k), r.pi_upper(k)) = f.prediction_interval(u, level);
    r.truth(k) = model.sigma_sq(u);
  }
  return r;
}

std::vector<Index> local_maxima(const Eigen::VectorXd& grid, const Eigen::VectorXd& values,
                                double lo, double hi) {
  std::vector<Index> peaks;
  for (Index k = 1; k + 1 < values.size(); ++k) {
    if (grid(k) < lo || grid(k) > hi) continue;
    if (values(k) > values(k - 1) && values(k) >= values(k + 1)) peaks.push_back(k);
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [&](Index a, Index b) { return values(a) > values(b); });
  return peaks;
}

ShiftDemoResult shift_demo(Index n, std::uint64_t seed, bool literal_composition,
                           const SigmaModel& model, double bandwidth, Index grid_n) {
  if (n < 10) throw ValidationError("shift_demo needs n >= 10");
  ShiftDemoResult r;
  r.x = Eigen::VectorXd::LinSpaced(n, 0.0, 4.0);
  r.y.resize(n);
  r.noise.resize(n);
  r.x_tilde.resize(n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Observation> obs(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const double z = normal(rng);
    r.y(i) = model.sigma_sq(r.x(i));
    r.noise(i) = 1.0 - z * z;
    const double w = literal_composition ? r.y(i) : r.x(i);
    r.x_tilde(i) = r.x(i) + 2.0 * model.sigma_sq(w) * r.noise(i);
    obs[static_cast<std::size_t>(i)] = {r.x_tilde(i), r.y(i)};
  }
  const RegressionFit f(std::move(obs), bandwidth);
  r.grid = uniform_grid(0.0, 4.0, grid_n);
  r.fitted.resize(grid_n);
  r.truth.resize(grid_n);
  for (Index k = 0; k < grid_n; ++k) {
    r.fitted(k) = f.predict(r.grid(k));
    r.truth(k) = model.sigma_sq(r.grid(k));
  }
  return r;
}

}  // namespace she
