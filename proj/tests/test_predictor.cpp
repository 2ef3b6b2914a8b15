#include <doctest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "she/predictor.hpp"

using namespace she;

namespace {

GridConfig grid16() { return GridConfig::make(1.0, 1.0, 16, 0, 6.0, TimeStepRule::NtEqualsNxSquared); }
GridConfig grid32() { return GridConfig::make(1.0, 1.0, 32, 0, 6.0, TimeStepRule::NtEqualsNxSquared); }

Matrix static_field(const GridConfig& cfg, double (*f)(double)) {
  Matrix m(cfg.nx, cfg.rows());
  for (Index j = 0; j < cfg.rows(); ++j)
    for (Index i = 0; i < cfg.nx; ++i) m(i, j) = f(i * cfg.dx());
  return m;
}

Matrix random_field(const GridConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  Matrix m(cfg.nx, cfg.rows());
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = N(rng);
  return m;
}

// Window sum by direct application of L^h at every lattice point of the window.
double brute_sigma_tilde(const DenseField& u, const DenseField& d, Index i0, Index j0, const WindowSpec& w,
                         const LhCoefficients& c, const GridConfig& cfg) {
  double total = 0.0;
  for (Index j = j0; j <= j0 + w.dj; ++j)
    for (Index i = i0 - w.di; i <= i0 + w.di; ++i) total += apply_Lh(u, i, j, w, c) - apply_Lh(d, i, j, w, c);
  const double s = total * cfg.T * cfg.L / (double(cfg.nx) * double(cfg.nt)) / (std::sqrt(2.0) * w.eps);
  return s * s;
}

// Summed table of u - d by direct double sums.
SummedTable summed_of(const Matrix& u, const Matrix& d) {
  SummedTable t(u.rows() + 1, u.cols());
  for (Index j = 0; j < u.cols(); ++j) {
    SummedTable::Row r = SummedTable::Row::Zero(u.rows() + 1);
    for (Index i = 0; i < u.rows(); ++i)
      for (Index jj = 0; jj <= j; ++jj)
        for (Index ii = 0; ii <= i; ++ii) r(i + 1) += u(ii, jj) - d(ii, jj);
    t.push(r);
  }
  return t;
}

}  // namespace

TEST_CASE("window spec integers") {
  const auto cfg = grid32();
  const auto w = WindowSpec::make(cfg, 2.0 / 32, 4.0 / 32);
  CHECK(w.sh == 2);
  CHECK(w.st == 4);
  CHECK(w.di == 4);
  CHECK(w.dj == 128);
  CHECK(w.window_size() == 9 * 129);
  CHECK(w.required_depth() == 133);
  CHECK(w.label() == "h2dx_eps4dx");
  CHECK_THROWS_AS(WindowSpec::make(cfg, 1.5 / 32, 4.0 / 32), ValidationError);
  CHECK_THROWS_AS(WindowSpec::make(cfg, 2.0 / 32, 4.5 / 32), ValidationError);
  CHECK_THROWS_AS(WindowSpec::make(cfg, 2.0 / 32, 0.5), ValidationError);  // no valid points
  CHECK_THROWS_AS(WindowSpec::make(cfg, 0.0, 4.0 / 32), ValidationError);
  const auto d = point_domain(cfg, w);
  CHECK(d.i_min == 6);
  CHECK(d.i_max == 25);
  CHECK(d.j_max == 1024 - 1 - 128 - 4);
}

TEST_CASE("L^h on static polynomial fields") {
  const auto cfg = grid32();
  const auto w = WindowSpec::make(cfg, 2.0 / 32, 2.0 / 32);
  const auto paper = LhCoefficients::paper_exact();
  const DenseField constant(Matrix::Constant(cfg.nx, cfg.rows(), 3.25));
  const DenseField affine(static_field(cfg, [](double x) { return 1.5 - 4.0 * x; }));
  const DenseField square(static_field(cfg, [](double x) { return x * x; }));
  for (Index i : {Index(2), Index(10), Index(29)}) {
    CHECK(apply_Lh(constant, i, 5, w, paper) == 0.0);
    CHECK(std::fabs(apply_Lh(affine, i, 5, w, paper)) <= 1e-10 * 4.0 / w.h);
    CHECK(apply_Lh(square, i, 5, w, paper) == doctest::Approx(-2.0).epsilon(1e-10));
    CHECK(apply_Lh(square, i, 5, w, LhCoefficients::generator_matched()) == doctest::Approx(-1.0).epsilon(1e-10));
    CHECK(apply_Lh(affine, i, 5, w, {1.0, 0.5}) == doctest::Approx(0.5 * -4.0).epsilon(1e-10));
  }
  CHECK_THROWS_AS(apply_Lh(square, 1, 5, w, paper), WindowUnavailable);
  CHECK_THROWS_AS(apply_Lh(square, 10, cfg.nt - 1, w, paper), WindowUnavailable);
}

TEST_CASE("L^h is linear in the field") {
  const auto cfg = grid16();
  const auto w = WindowSpec::make(cfg, 2.0 / 16, 2.0 / 16);
  const LhCoefficients c{0.7, 0.3};
  const Matrix u = random_field(cfg, 1), v = random_field(cfg, 2);
  const double alpha = 1.7, beta = -0.4;
  const DenseField U(u), V(v), W(alpha * u + beta * v);
  for (Index i = 2; i < 14; ++i)
    for (Index j : {Index(0), Index(31), Index(200)}) {
      const double lhs = apply_Lh(W, i, j, w, c);
      const double rhs = alpha * apply_Lh(U, i, j, w, c) + beta * apply_Lh(V, i, j, w, c);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10).scale(1.0 / (w.h * w.h)));
    }
}

TEST_CASE("sigma_tilde matches the brute-force window sum") {
  const auto cfg = grid16();
  const auto w = WindowSpec::make(cfg, 2.0 / 16, 3.0 / 16);
  const Matrix u = random_field(cfg, 5), d = random_field(cfg, 6);
  const DenseField U(u), D(d);
  const auto P = summed_of(u, d);
  for (auto c : {LhCoefficients::paper_exact(), LhCoefficients::generator_matched(), LhCoefficients{1.3, -0.2}}) {
    for (auto [i0, j0] : std::vector<std::pair<Index, Index>>{{5, 0}, {8, 77}, {10, 200}}) {
      const double ref = brute_sigma_tilde(U, D, i0, j0, w, c, cfg);
      CHECK(sigma_tilde(U, D, i0, j0, w, c, cfg) == doctest::Approx(ref).epsilon(1e-10));
      CHECK(sigma_tilde_summed(P, i0, j0, w, c, cfg) == doctest::Approx(ref).epsilon(1e-10));
    }
  }
}

TEST_CASE("sigma_tilde vanishes without noise and on affine static perturbations") {
  const auto cfg = grid16();
  const auto w = WindowSpec::make(cfg, 2.0 / 16, 2.0 / 16);
  const Matrix d = random_field(cfg, 8);
  const DenseField D(d);
  CHECK(sigma_tilde(D, D, 6, 40, w, LhCoefficients::paper_exact(), cfg) == 0.0);
  const DenseField bumped(d + static_field(cfg, [](double x) { return 0.25 + 2.0 * x; }));
  CHECK(sigma_tilde(bumped, D, 6, 40, w, LhCoefficients::paper_exact(), cfg) < 1e-20);
}

TEST_CASE("window count") {
  // v = kappa t makes L^h v = kappa at every point, so the sum counts the window.
  const auto cfg = grid32();
  for (auto [h, eps] : std::vector<std::pair<double, double>>{{1.0 / 32, 1.0 / 32}, {2.0 / 32, 5.0 / 32}}) {
    const auto w = WindowSpec::make(cfg, h, eps);
    const double kappa = 0.75;
    Matrix v(cfg.nx, cfg.rows());
    for (Index j = 0; j < cfg.rows(); ++j) v.col(j).setConstant(kappa * j * cfg.dt());
    const DenseField V(v), Z(Matrix::Zero(cfg.nx, cfg.rows()));
    const double s = sigma_tilde(V, Z, w.di + w.sh, 3, w, LhCoefficients::paper_exact(), cfg);
    const double count = std::sqrt(s) / (kappa / (double(cfg.nx) * double(cfg.nt)) / (std::sqrt(2.0) * eps));
    CHECK(count == doctest::Approx(double(w.window_size())).epsilon(1e-9));
    CHECK(w.window_size() == (2 * w.di + 1) * (w.dj + 1));
  }
}

TEST_CASE("translation consistency") {
  const auto cfg = grid16();
  const auto w = WindowSpec::make(cfg, 2.0 / 16, 2.0 / 16);
  Matrix idx(cfg.nx, cfg.rows());
  for (Index j = 0; j < cfg.rows(); ++j)
    for (Index i = 0; i < cfg.nx; ++i) idx(i, j) = double(i + j * cfg.nx);
  const DenseField U(idx), Z(Matrix::Zero(cfg.nx, cfg.rows()));
  const auto c = LhCoefficients::paper_exact();
  // L^h(i + j nx) = st nx / h^2 everywhere; the window sum must not depend on i0.
  const double a = sigma_tilde(U, Z, 4, 10, w, c, cfg);
  CHECK(a == sigma_tilde(U, Z, 5, 10, w, c, cfg));
  const double per_point = double(w.st * cfg.nx) / (w.h * w.h);
  const double expected = per_point * w.window_size() / (double(cfg.nx) * double(cfg.nt)) / (std::sqrt(2.0) * w.eps);
  CHECK(a == doctest::Approx(expected * expected).epsilon(1e-12));

  // A field shifted right by one site, read at i0 + 1, gives the same value bit for bit.
  const Matrix u = random_field(cfg, 12), d = random_field(cfg, 13);
  Matrix us = Matrix::Zero(cfg.nx, cfg.rows()), ds = Matrix::Zero(cfg.nx, cfg.rows());
  us.bottomRows(cfg.nx - 1) = u.topRows(cfg.nx - 1);
  ds.bottomRows(cfg.nx - 1) = d.topRows(cfg.nx - 1);
  CHECK(sigma_tilde(DenseField(us), DenseField(ds), 7, 20, w, c, cfg) ==
        sigma_tilde(DenseField(u), DenseField(d), 6, 20, w, c, cfg));
}

TEST_CASE("boundary points are skipped") {
  const auto cfg = grid16();
  const auto w = WindowSpec::make(cfg, 2.0 / 16, 2.0 / 16);
  const DenseField Z(Matrix::Zero(cfg.nx, cfg.rows()));
  const auto c = LhCoefficients::paper_exact();
  CHECK_THROWS_AS(sigma_tilde(Z, Z, 3, 0, w, c, cfg), PointSkipped);
  CHECK_THROWS_AS(sigma_tilde(Z, Z, 12, 0, w, c, cfg), PointSkipped);
  CHECK_NOTHROW(sigma_tilde(Z, Z, 4, 0, w, c, cfg));
  const Index j_max = point_domain(cfg, w).j_max;
  CHECK_NOTHROW(sigma_tilde(Z, Z, 4, j_max, w, c, cfg));
  CHECK_THROWS_AS(sigma_tilde(Z, Z, 4, j_max + 1, w, c, cfg), PointSkipped);
  RollingField shallow(cfg.nx, 4);
  for (Index j = 0; j < 40; ++j) shallow.push(Vector::Zero(cfg.nx));
  CHECK_THROWS_AS(sigma_tilde(shallow, Z, 4, 30, w, c, cfg), WindowUnavailable);
}

TEST_CASE("coefficient parsing") {
  CHECK(LhCoefficients::parse("paper").a == 1.0);
  CHECK(LhCoefficients::parse("generator").a == 0.5);
  const auto c = LhCoefficients::parse("a=0.25,b=-1");
  CHECK(c.a == 0.25);
  CHECK(c.b == -1.0);
  CHECK(LhCoefficients::parse(c.to_string()).a == 0.25);
  CHECK_THROWS_AS(LhCoefficients::parse("a=0"), ValidationError);
  CHECK_THROWS_AS(LhCoefficients::parse("b=1"), ValidationError);
  CHECK_THROWS_AS(LhCoefficients::parse("c=1"), ValidationError);
  CHECK_THROWS_AS(LhCoefficients::parse("a=x"), ValidationError);
}

TEST_CASE("point selection") {
  const PointDomain d{3, 12, 99};
  const auto pts = select_points(d, 200, 42, PointSampling::Uniform);
  CHECK(pts.size() == 200);
  std::set<std::pair<Index, Index>> seen(pts.begin(), pts.end());
  CHECK(seen.size() == 200);
  CHECK(std::is_sorted(pts.begin(), pts.end()));
  for (auto [j, i] : pts) CHECK(d.contains(i, j));
  CHECK(pts == select_points(d, 200, 42, PointSampling::Uniform));
  CHECK(pts != select_points(d, 200, 43, PointSampling::Uniform));
  CHECK(select_points(d, 1000, 1, PointSampling::Uniform).size() == 1000);
  CHECK_THROWS_AS(select_points(d, 1001, 1, PointSampling::Uniform), InsufficientDomain);
  const auto strided = select_points(d, 100, 0, PointSampling::Stride);
  CHECK(strided.front() == std::pair<Index, Index>{0, 3});
  CHECK(std::set<std::pair<Index, Index>>(strided.begin(), strided.end()).size() == 100);

  // Uniformity: each half of the time range receives about half of the draws.
  const auto many = select_points({0, 9, 9999}, 20000, 7, PointSampling::Uniform);
  const auto early = std::count_if(many.begin(), many.end(), [](auto p) { return p.first < 5000; });
  CHECK(std::abs(double(early) - 10000.0) < 5.0 * std::sqrt(20000 * 0.25));
}

TEST_CASE("streamed extraction equals direct evaluation on the recorded field") {
  const auto cfg = grid32();
  const auto w = WindowSpec::make(cfg, 2.0 / 32, 4.0 / 32);
  const SigmaModel model(SigmaKind::Sigma3);
  const NoiseSpec noise{77, 4};
  const auto coeff = LhCoefficients::generator_matched();
  const auto det = solve_deterministic(cfg);
  const auto samples = extract_dataset(cfg, model, noise, w, coeff, 300, 99, *det);
  REQUIRE(samples.size() == 300);

  Matrix rec(cfg.nx, cfg.rows()), drec(cfg.nx, cfg.rows());
  simulate_stream(cfg, model, noise, 2, [&](Index j, const RollingField& f) { rec.col(j) = f.row(j); });
  for (Index j = 0; j < cfg.rows(); ++j) drec.col(j) = det->row(j);
  const DenseField U(rec), D(drec);
  for (const auto& s : samples) {
    CHECK(s.u_value == rec(s.i0, s.j0));
    CHECK(s.x0 == s.i0 * cfg.dx());
    CHECK(s.t0 == s.j0 * cfg.dt());
    CHECK(s.realization_id == 4);
    CHECK(s.h == w.h);
    CHECK(s.eps == w.eps);
    CHECK(s.sigma_tilde_sq >= 0.0);
    CHECK(s.sigma_tilde_sq ==
          doctest::Approx(sigma_tilde(U, D, s.i0, s.j0, w, coeff, cfg)).epsilon(1e-9).scale(1e-12));
  }
}

TEST_CASE("extraction determinism, zero model and multi-window plans") {
  const auto cfg = grid32();
  const auto w1 = WindowSpec::make(cfg, 1.0 / 32, 2.0 / 32);
  const auto w2 = WindowSpec::make(cfg, 2.0 / 32, 4.0 / 32);
  const auto det = solve_deterministic(cfg);
  const auto coeff = LhCoefficients::paper_exact();
  const SigmaModel s3(SigmaKind::Sigma3);

  const auto zero = extract_dataset(cfg, SigmaModel(SigmaKind::Zero), {1, 0}, w2, coeff, 500, 3, *det);
  for (const auto& s : zero) CHECK(s.sigma_tilde_sq == 0.0);

  const auto a = extract_dataset(cfg, s3, {1, 2}, w1, coeff, 200, 3, *det);
  const auto b = extract_dataset(cfg, s3, {1, 2}, w1, coeff, 200, 3);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].sigma_tilde_sq == b[k].sigma_tilde_sq);

  const std::vector<WindowPlan> plans{{w1, 200, 3, PointSampling::Uniform}, {w2, 150, 4, PointSampling::Uniform}};
  const auto both = extract_realization(cfg, s3, {1, 2}, plans, coeff, *det);
  const auto c = extract_dataset(cfg, s3, {1, 2}, w2, coeff, 150, 4, *det);
  REQUIRE(both.size() == 2);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(both[0][k].sigma_tilde_sq == a[k].sigma_tilde_sq);
  for (std::size_t k = 0; k < c.size(); ++k) CHECK(both[1][k].sigma_tilde_sq == c[k].sigma_tilde_sq);

  CHECK_THROWS_AS(extract_dataset(cfg, s3, {1, 2}, w2, coeff, 1000000, 3, *det), InsufficientDomain);
}

TEST_CASE("Monte Carlo mean matches the exact second moment for constant sigma") {
  const auto cfg = grid16();
  const auto w = WindowSpec::make(cfg, 2.0 / 16, 2.0 / 16);
  const auto det = solve_deterministic(cfg);
  const SigmaModel s1(SigmaKind::Sigma1);
  for (auto coeff : {LhCoefficients::generator_matched(), LhCoefficients::paper_exact(), LhCoefficients{0.8, 0.3}}) {
    const int n = 10000;
    double sum = 0.0, sum_sq = 0.0;
    for (int r = 0; r < n; ++r) {
      const auto s = extract_dataset(cfg, s1, {2024, std::uint64_t(r)}, w, coeff, 1, 1000 + r, *det).front();
      const double ratio = s.sigma_tilde_sq / (0.01 * oracle::linear_window_second_moment(cfg, w, coeff, s.i0, s.j0));
      sum += ratio;
      sum_sq += ratio * ratio;
    }
    const double mean = sum / n, se = std::sqrt((sum_sq / n - mean * mean) / n);
    CAPTURE(coeff.a);
    CHECK(std::fabs(mean - 1.0) < 4.0 * se);
    CHECK(se < 0.02);
  }
  // Interior expectation on the desk lattice.
  const auto desk = GridConfig::make(1.0, 1.0, 128, 0, 6.0, TimeStepRule::NtEqualsNxSquared);
  const auto wd = WindowSpec::make(desk, 2.0 / 128, 16.0 / 128);
  const double gen = oracle::linear_window_second_moment(desk, wd, LhCoefficients::generator_matched(), 64, 8000);
  const double pap = oracle::linear_window_second_moment(desk, wd, LhCoefficients::paper_exact(), 64, 8000);
  CHECK(gen == doctest::Approx(1.00698).epsilon(1e-4));
  CHECK(pap == doctest::Approx(2.71080).epsilon(1e-4));
}
