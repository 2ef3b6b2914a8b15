#include "she/predictor.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <sstream>
#include <unordered_set>

namespace she {

namespace {

Index exact_integer(double value, const char* what) {
  const double r = std::round(value);
  if (!(std::fabs(value - r) <= 1e-9 * std::max(1.0, std::fabs(value))))
    throw ValidationError(std::string(what) + " = " + std::to_string(value) +
                          " is not an integer number of lattice steps");
  return static_cast<Index>(r);
}

}  // namespace

WindowSpec WindowSpec::make(const GridConfig& cfg, double h, double eps) {
  cfg.validate();
  if (!(h > 0.0) || !(eps > 0.0)) throw ValidationError("window needs h > 0 and eps > 0");
  WindowSpec w;
  w.h = h;
  w.eps = eps;
  const double nx = static_cast<double>(cfg.nx), nt = static_cast<double>(cfg.nt);
  w.sh = exact_integer(h * nx / cfg.L, "h*nx/L");
  w.di = exact_integer(eps * nx / cfg.L, "eps*nx/L");
  w.dj = exact_integer(eps * nt / cfg.T, "eps*nt/T");
  w.st = exact_integer(h * h * nt / cfg.T, "h^2*nt/T");
  if (w.sh < 1 || w.st < 1) throw ValidationError("window needs h*nx/L >= 1 and h^2*nt/T >= 1");
  if (w.di < 1) throw ValidationError("window needs eps*nx/L >= 1");
  if (point_domain(cfg, w).size() < 1)
    throw ValidationError("window " + w.label() + " leaves no valid conditioning point on the grid");
  return w;
}

std::string WindowSpec::label() const {
  return "h" + std::to_string(sh) + "dx_eps" + std::to_string(di) + "dx";
}

PointDomain point_domain(const GridConfig& cfg, const WindowSpec& w) {
  PointDomain d;
  d.i_min = w.di + w.sh;
  d.i_max = cfg.nx - 1 - w.di - w.sh;
  d.j_max = cfg.nt - 1 - w.dj - w.st;
  return d;
}

LhCoefficients LhCoefficients::parse(const std::string& text) {
  if (text == "paper") return paper_exact();
  if (text == "generator") return generator_matched();
  LhCoefficients c{1.0, 0.0};
  bool seen_a = false;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("bad --lh-coeff item '" + item + "'");
    const std::string key = item.substr(0, eq);
    double value = 0.0;
    try {
      value = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw ValidationError("bad --lh-coeff value in '" + item + "'");
    }
    if (key == "a") {
      c.a = value;
      seen_a = true;
    } else if (key == "b") {
      c.b = value;
    } else {
      throw ValidationError("unknown --lh-coeff key '" + key + "'");
    }
  }
  if (!seen_a) throw ValidationError("--lh-coeff needs a=<value>");
  c.validate();
  return c;
}

std::string LhCoefficients::to_string() const {
  char buf[96];
  std::snprintf(buf, sizeof buf, "a=%.17g,b=%.17g", a, b);
  return buf;
}

std::vector<std::pair<Index, Index>> select_points(const PointDomain& domain, Index n_points,
                                                   std::uint64_t point_seed, PointSampling mode) {
  const Index count = domain.size();
  if (n_points < 1) throw ValidationError("n_points must be >= 1");
  if (n_points > count)
    throw InsufficientDomain("requested " + std::to_string(n_points) + " points but only " +
                             std::to_string(count) + " valid lattice points exist");
  std::vector<Index> flat;
  flat.reserve(static_cast<std::size_t>(n_points));
  if (mode == PointSampling::Stride) {
    for (Index k = 0; k < n_points; ++k) flat.push_back(k * count / n_points);
  } else {
    // Floyd's algorithm: n_points distinct draws from [0, count).
    std::mt19937_64 rng(point_seed);
    std::unordered_set<Index> chosen;
    chosen.reserve(static_cast<std::size_t>(n_points) * 2);
    for (Index k = count - n_points; k < count; ++k) {
      const Index t = std::uniform_int_distribution<Index>(0, k)(rng);
      if (!chosen.insert(t).second) chosen.insert(k);
    }
    flat.assign(chosen.begin(), chosen.end());
    std::sort(flat.begin(), flat.end());
  }
  std::vector<std::pair<Index, Index>> points;
  points.reserve(flat.size());
  const Index ni = domain.sites();
  for (Index f : flat) points.emplace_back(f / ni, domain.i_min + f % ni);
  return points;
}

std::vector<std::vector<Sample>> extract_realization(const GridConfig& cfg, const SigmaModel& model,
                                                     const NoiseSpec& noise,
                                                     std::span<const WindowPlan> plans,
                                                     const LhCoefficients& coeff,
                                                     const DeterministicTrajectory& det,
                                                     const StreamObserver& extra) {
  coeff.validate();
  struct Pending {
    std::vector<std::pair<Index, Index>> points;  // (j0, i0), sorted
    std::size_t next = 0;
  };
  std::vector<Pending> pending(plans.size());
  std::vector<std::vector<Sample>> out(plans.size());
  Index depth = 2;
  for (std::size_t k = 0; k < plans.size(); ++k) {
    const auto& p = plans[k];
    pending[k].points = select_points(point_domain(cfg, p.window), p.n_points, p.point_seed, p.sampling);
    out[k].reserve(pending[k].points.size());
    depth = std::max(depth, p.window.required_depth() + 1);
  }

  SummedTable table(cfg.nx + 1, depth);
  SummedTable::Row summed = SummedTable::Row::Zero(cfg.nx + 1);
  DeterministicTrajectory::Cursor cursor(det);
  const double dx = cfg.dx(), dt = cfg.dt();

  auto observer = [&](Index j, const RollingField& field) {
    if (extra) extra(j, field);
    const auto u = field.row(j);
    const Vector& d = cursor.seek(j);
    long double across = 0.0L;
    for (Index i = 0; i < cfg.nx; ++i) {
      across += u(i) - d(i);
      summed(i + 1) += across;
    }
    table.push(summed);
    for (std::size_t k = 0; k < plans.size(); ++k) {
      const WindowSpec& w = plans[k].window;
      auto& pend = pending[k];
      while (pend.next < pend.points.size()) {
        const auto [j0, i0] = pend.points[pend.next];
        if (j0 + w.dj + w.st != j) break;
        Sample s;
        s.u_value = field(i0, j0);
        s.sigma_tilde_sq = sigma_tilde_summed(table, i0, j0, w, coeff, cfg);
        s.x0 = static_cast<double>(i0) * dx;
        s.t0 = static_cast<double>(j0) * dt;
        s.realization_id = static_cast<std::int64_t>(noise.realization_index);
        s.h = w.h;
        s.eps = w.eps;
        s.i0 = i0;
        s.j0 = j0;
        out[k].push_back(s);
        ++pend.next;
      }
    }
  };
  simulate_stream(cfg, model, noise, depth, observer);
  return out;
}

std::vector<Sample> extract_dataset(const GridConfig& cfg, const SigmaModel& model,
                                    const NoiseSpec& noise, const WindowSpec& w,
                                    const LhCoefficients& coeff, Index n_points,
                                    std::uint64_t point_seed, const DeterministicTrajectory& det,
                                    PointSampling sampling) {
  const WindowPlan plan{w, n_points, point_seed, sampling};
  auto result = extract_realization(cfg, model, noise, std::span<const WindowPlan>(&plan, 1), coeff, det);
  return std::move(result.front());
}

std::vector<Sample> extract_dataset(const GridConfig& cfg, const SigmaModel& model,
                                    const NoiseSpec& noise, const WindowSpec& w,
                                    const LhCoefficients& coeff, Index n_points,
                                    std::uint64_t point_seed) {
  const auto det = solve_deterministic(cfg);
  return extract_dataset(cfg, model, noise, w, coeff, n_points, point_seed, *det);
}

}  // namespace she
