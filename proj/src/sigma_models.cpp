#include "she/sigma_models.hpp"

#include <algorithm>
#include <array>
#include <mutex>

#include "she/expression.hpp"

namespace she {

namespace {

constexpr std::array<std::string_view, 8> kIds = {"sigma1", "sigma2", "sigma3", "sigma4",
                                                  "sigma5", "sigma6", "sigma7", "zero"};

double builtin_lipschitz(SigmaKind kind) {
  static std::array<std::once_flag, 8> once;
  static std::array<double, 8> constants{};
  const int k = static_cast<int>(kind);
  std::call_once(once[k], [k] {
    const auto kind_k = static_cast<SigmaKind>(k);
    const double slope = sampled_lipschitz(
        [kind_k](double u) { return sigma_closed_form(kind_k, u); }, -10.0, 10.0, 400'000);
    // The secant maximum approaches the derivative supremum from below.
    constants[k] = slope * (1.0 + 1e-6);
  });
  return constants[k];
}

}  // namespace

double sampled_lipschitz(const SigmaModel::Function& fn, double lo, double hi, int n) {
  const double dx = (hi - lo) / n;
  double prev = fn(lo);
  double slope = 0.0;
  for (int k = 1; k <= n; ++k) {
    const double cur = fn(lo + k * dx);
    slope = std::max(slope, std::fabs(cur - prev) / dx);
    prev = cur;
  }
  return slope;
}

SigmaModel::SigmaModel(SigmaKind kind) : kind_(kind) {
  if (kind == SigmaKind::Custom)
    throw ValidationError("custom sigma models are built with SigmaModel::custom");
  lipschitz_ = builtin_lipschitz(kind);
  id_ = std::string(kIds[static_cast<int>(kind)]);
}

SigmaModel SigmaModel::custom(Function fn, double lipschitz, std::string label) {
  if (!fn) throw ValidationError("custom sigma model needs a function");
  if (!(lipschitz >= 0.0) || !std::isfinite(lipschitz))
    throw ValidationError("custom sigma model must declare a finite Lipschitz constant >= 0");
  return SigmaModel(SigmaKind::Custom, std::move(fn), lipschitz, std::move(label));
}

SigmaModel SigmaModel::from_id(std::string_view id, double lipschitz) {
  for (std::size_t k = 0; k < kIds.size(); ++k)
    if (id == kIds[k]) return SigmaModel(static_cast<SigmaKind>(k));
  constexpr std::string_view prefix = "custom:";
  if (id.substr(0, prefix.size()) == prefix) {
    auto expr = Expression::parse(id.substr(prefix.size()));
    if (lipschitz < 0.0)
      throw ValidationError("custom sigma '" + std::string(id) +
                            "' needs a declared Lipschitz constant (sigma_lipschitz)");
    return custom([expr](double u) { return expr(u); }, lipschitz, std::string(id));
  }
  throw ValidationError("unknown sigma id '" + std::string(id) + "'");
}

}  // namespace she
