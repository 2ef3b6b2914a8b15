#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <string_view>

#include "she/errors.hpp"

namespace she {

enum class SigmaKind { Sigma1, Sigma2, Sigma3, Sigma4, Sigma5, Sigma6, Sigma7, Zero, Custom };

// Closed forms of the seven reference diffusion functions.
template <typename Scalar>
Scalar sigma_closed_form(SigmaKind kind, Scalar u) {
  using std::abs;
  using std::exp;
  using std::sin;
  const Scalar d = abs(u - Scalar(2));
  switch (kind) {
    case SigmaKind::Sigma1: return Scalar(0.1);
    case SigmaKind::Sigma2: return Scalar(2);
    case SigmaKind::Sigma3: return exp(sin(Scalar(4) * d)) / Scalar(8);
    case SigmaKind::Sigma4: return exp(sin(Scalar(4) * d)) / Scalar(32) + Scalar(1);
    case SigmaKind::Sigma5: return exp(sin(Scalar(4) / Scalar(5) * d)) / Scalar(8) + Scalar(1);
    case SigmaKind::Sigma6: return exp(sin(Scalar(4) / Scalar(10) * d)) / Scalar(8);
    case SigmaKind::Sigma7: return exp(sin(Scalar(13) * d)) / Scalar(8);
    case SigmaKind::Zero:
    case SigmaKind::Custom: break;
  }
  return Scalar(0);
}

/// A diffusion function sigma >= 0 together with its Lipschitz constant.
///
/// Built-in constants are estimated once by dense sampling of the slope on
/// [-10, 10] and are metadata only. Custom models carry a declared constant
/// that is trusted as given.
class SigmaModel {
 public:
  using Function = std::function<double(double)>;

  explicit SigmaModel(SigmaKind kind);
  static SigmaModel custom(Function fn, double lipschitz, std::string label = "custom");

  /// Parses "sigma1".."sigma7", "zero", or "custom:<expression>".
  /// A custom id requires `lipschitz`; built-ins ignore it.
  static SigmaModel from_id(std::string_view id, double lipschitz = -1.0);

  SigmaKind kind() const { return kind_; }
  double lipschitz() const { return lipschitz_; }
  const std::string& id() const { return id_; }

  double sigma(double u) const {
    const double s = kind_ == SigmaKind::Custom ? fn_(u) : sigma_closed_form(kind_, u);
    if (!(s >= 0.0)) throw NonNegativityViolation(u, s);
    return s;
  }

  double sigma_sq(double u) const {
    const double s = sigma(u);
    return s * s;
  }

 private:
  SigmaModel(SigmaKind kind, Function fn, double lipschitz, std::string id)
      : kind_(kind), fn_(std::move(fn)), lipschitz_(lipschitz), id_(std::move(id)) {}

  SigmaKind kind_;
  Function fn_;
  double lipschitz_ = 0.0;
  std::string id_;
};

inline double eval_sigma(const SigmaModel& model, double u) { return model.sigma(u); }
inline double eval_sigma_sq(const SigmaModel& model, double u) { return model.sigma_sq(u); }

/// Largest secant slope of `fn` on a uniform grid of `n` intervals over [lo, hi].
double sampled_lipschitz(const SigmaModel::Function& fn, double lo, double hi, int n);

}  // namespace she
