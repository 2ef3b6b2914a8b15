#include "she/analysis.hpp"

#include <Eigen/Core>

#include "she/quadrature.hpp"

namespace she {

void NormalizerQuery::validate() const {
  if (!(h > 0.0 && h < 1.0)) throw ValidationError("normalizer needs 0 < h < 1");
  if (!(rho > 0.0 && rho < 1.0)) throw ValidationError("normalizer needs rho in (0, 1)");
  if (!(t0 >= 0.0)) throw ValidationError("normalizer needs t0 >= 0");
  if (!(eps() > h * h)) throw ValidationError("normalizer needs eps = h^rho > h^2");
  if (noise == NoiseKind::Riesz && !(beta > 0.0 && beta < 1.0))
    throw ValidationError("Riesz normalizer needs beta in (0, 1)");
}

double riesz_spectral_constant(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("Riesz constant needs beta in (0, 1)");
  return 2.0 * std::tgamma(1.0 - beta) * std::sin(std::numbers::pi * beta / 2.0);
}

namespace {

// Int_{tau_lo}^{tau_hi} exp(-tau xi^2 / 2) d tau.
double slab_time_integral(double xi, double tau_lo, double tau_hi) {
  const double a = 0.5 * xi * xi;
  const double width = tau_hi - tau_lo;
  if (a * width < 1e-12) return width * std::exp(-a * tau_lo);
  return std::exp(-a * tau_lo) * (-std::expm1(-a * width)) / a;
}

// sin(eps xi) / xi with its limit at 0.
double sinc_eps(double eps, double xi) {
  const double x = eps * xi;
  if (std::fabs(x) < 1e-8) return eps * (1.0 - x * x / 6.0);
  return std::sin(x) / xi;
}

}  // namespace

double window_energy(const NormalizerQuery& q, double tau_lo, double tau_hi,
                     const QuadratureSettings& settings) {
  q.validate();
  if (!(tau_lo >= 0.0 && tau_hi >= tau_lo)) throw ValidationError("window_energy needs 0 <= tau_lo <= tau_hi");
  if (tau_hi == tau_lo) return 0.0;
  const double eps = q.eps();
  const double h2 = q.h * q.h;
  const bool riesz = q.noise == NoiseKind::Riesz;
  const double beta = q.beta;
  const double cbeta = riesz ? riesz_spectral_constant(beta) : 1.0;

  // (1/pi) |2 sin(eps xi)/xi * J(xi)/h^2|^2, without the spectral weight.
  auto core = [&](double xi) {
    const double f = 2.0 * sinc_eps(eps, xi) * slab_time_integral(xi, tau_lo, tau_hi) / h2;
    return f * f / std::numbers::pi;
  };

  const double panel = std::numbers::pi / eps;
  const double scale = 2.0 * eps * ((tau_hi - tau_lo) / h2) * ((tau_hi - tau_lo) / h2);
  const double panel_abs_tol = settings.abs_tol * scale / 64.0;

  double total = 0.0;

  // First panel; for Riesz, xi = panel * v^{1/beta} removes the |xi|^{beta-1} singularity.
  QuadratureResult first;
  if (riesz) {
    const double jac = cbeta * std::pow(panel, beta) / beta;
    first = integrate_adaptive(
        [&](double v) { return core(panel * std::pow(v, 1.0 / beta)) * jac; },
        0.0, 1.0, panel_abs_tol, settings.rel_tol);
  } else {
    first = integrate_adaptive(core, 0.0, panel, panel_abs_tol, settings.rel_tol);
  }
  if (!first.converged) throw QuadratureError("window_energy: first panel did not converge", first.error);
  total += first.value;

  auto weighted = [&](double xi) { return core(xi) * (riesz ? cbeta * std::pow(xi, beta - 1.0) : 1.0); };
  // Tail bound of the integrand beyond X: 16 w(xi) / (pi h^4 xi^6).
  auto tail_bound = [&](double x) {
    const double h4 = h2 * h2;
    if (riesz) return 16.0 * cbeta * std::pow(x, beta - 6.0) / (std::numbers::pi * h4 * (6.0 - beta));
    return 16.0 / (5.0 * std::numbers::pi * h4 * std::pow(x, 5.0));
  };

  constexpr long kMaxPanels = 2'000'000;
  for (long k = 1; k < kMaxPanels; ++k) {
    const double a = k * panel;
    if (tail_bound(a) <= 1e-3 * settings.rel_tol * total) break;
    const auto r = integrate_adaptive(weighted, a, a + panel, panel_abs_tol, settings.rel_tol);
    if (!r.converged) throw QuadratureError("window_energy: panel did not converge", r.error);
    total += r.value;
    if (k == kMaxPanels - 1) throw QuadratureError("window_energy: xi tail not resolved", tail_bound(a));
  }
  return total;
}

namespace {

double normalizer_sq(const NormalizerQuery& q, const QuadratureSettings& settings) {
  q.validate();
  const double h2 = q.h * q.h;
  const double eps = q.eps();
  // Leading-order size of the result, used to express absolute tolerances.
  const double scale = 2.0 * eps * eps;
  const double full = window_energy(q, 0.0, h2, settings);
  const double middle = (eps - h2) * full;
  // r in [t0, t0 + h^2]: tau in [t0 + h^2 - r, h^2].
  const auto head = integrate_adaptive([&](double r) { return window_energy(q, h2 - r, h2, settings); },
                                       0.0, h2, settings.abs_tol * scale, settings.rel_tol);
  // r in [t0 + eps, t0 + eps + h^2]: tau in [0, t0 + eps + h^2 - r].
  const auto tail = integrate_adaptive([&](double s) { return window_energy(q, 0.0, s, settings); },
                                       0.0, h2, settings.abs_tol * scale, settings.rel_tol);
  if (!head.converged) throw QuadratureError("normalizer: r-integral (head) did not converge", head.error);
  if (!tail.converged) throw QuadratureError("normalizer: r-integral (tail) did not converge", tail.error);
  return head.value + middle + tail.value;
}

}  // namespace

double m_hat_sq(const NormalizerQuery& q, const QuadratureSettings& settings) {
  if (q.noise != NoiseKind::White) throw ValidationError("m_hat_sq needs a white-noise query");
  return normalizer_sq(q, settings);
}

double m_sq_riesz(const NormalizerQuery& q, const QuadratureSettings& settings) {
  if (q.noise != NoiseKind::Riesz) throw ValidationError("m_sq_riesz needs a Riesz query");
  return normalizer_sq(q, settings);
}

RateExponents rate_exponents(std::optional<double> beta) {
  if (!beta) return {8.0 / 9.0, 2.0 / 9.0};
  const double b = *beta;
  if (!(b > 0.0 && b < 1.0)) throw ValidationError("rate_exponents needs beta in (0, 1)");
  return {8.0 / (12.0 - b), 2.0 * (2.0 - b) / (12.0 - b)};
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("loglog_slope needs >= 2 paired values");
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::ArrayXd lx(n), ly(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) throw ValidationError("loglog_slope needs positive values");
    lx(k) = std::log(x[k]);
    ly(k) = std::log(y[k]);
  }
  const Eigen::ArrayXd dx = lx - lx.mean();
  return (dx * (ly - ly.mean())).sum() / (dx * dx).sum();
}

}  // namespace she
