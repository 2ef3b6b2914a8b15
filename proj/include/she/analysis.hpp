#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <span>

#include "she/errors.hpp"

namespace she {

struct HeatKernelParams {
  double diffusivity = 0.5;  // L = d_t - diffusivity * d_xx
};

/// Fundamental solution of d_t - D d_xx on the line: (4 pi D t)^{-1/2} exp(-x^2 / (4 D t)).
template <typename Scalar>
Scalar heat_kernel(Scalar x, Scalar t, const HeatKernelParams& params = {}) {
  using std::exp;
  using std::sqrt;
  if (!(t > Scalar(0))) throw ValidationError("heat_kernel needs t > 0");
  if (!(params.diffusivity > 0.0)) throw ValidationError("heat_kernel needs diffusivity > 0");
  const Scalar c = Scalar(2.0 * params.diffusivity);
  return exp(-x * x / (Scalar(2) * c * t)) / sqrt(Scalar(2.0 * std::numbers::pi) * c * t);
}

enum class NoiseKind { White, Riesz };

/// Normalizer query at scale h with eps = h^rho, window anchored at t0.
struct NormalizerQuery {
  double h = 0.0;
  double rho = 8.0 / 9.0;
  double t0 = 0.0;
  NoiseKind noise = NoiseKind::White;
  double beta = 0.0;  // Riesz exponent, used when noise == Riesz

  static NormalizerQuery white(double h, double rho, double t0 = 0.0) {
    return {h, rho, t0, NoiseKind::White, 0.0};
  }
  static NormalizerQuery riesz(double h, double rho, double beta, double t0 = 0.0) {
    return {h, rho, t0, NoiseKind::Riesz, beta};
  }

  double eps() const { return std::pow(h, rho); }
  void validate() const;
};

/// c(beta) in the spectral density c(beta) |xi|^{beta-1} of |x|^{-beta} on the line.
double riesz_spectral_constant(double beta);

struct QuadratureSettings {
  double abs_tol = 1e-9;  // relative to the leading-order scale 2 eps^2
  double rel_tol = 1e-7;
};

/// h^{-4} Int |A~(z)|^2 gamma-weighted over z, for the time slab tau in [tau_lo, tau_hi]
/// (tau = s + h^2 - r), evaluated in Fourier space. For White noise that is
/// h^{-4} Int A~(z)^2 dz; for Riesz, h^{-4} Int Int A~(z1) A~(z2) |z1-z2|^{-beta}.
double window_energy(const NormalizerQuery& q, double tau_lo, double tau_hi,
                     const QuadratureSettings& settings = {});

/// Squared white-noise normalizer  h^{-4} Int_{I_h} Int_R A~^2(z, r) dz dr.
double m_hat_sq(const NormalizerQuery& q, const QuadratureSettings& settings = {});

/// Squared Riesz-kernel normalizer  h^{-4} Int_{I_h} Int Int A~ A~ |z1 - z2|^{-beta} dz dr.
double m_sq_riesz(const NormalizerQuery& q, const QuadratureSettings& settings = {});

struct RateExponents {
  double rho_star = 0.0;
  double kappa_sup = 0.0;
};

/// White noise (no beta): (8/9, 2/9). Riesz: (8/(12-beta), 2(2-beta)/(12-beta)).
RateExponents rate_exponents(std::optional<double> beta = std::nullopt);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace she
