#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "latticeopt/constraints.hpp"
#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace latticeopt;
using doctest::Approx;

namespace {

Bar make_bar(Vec3 x0, Vec3 xf, double w, std::vector<double> alpha) {
  Bar b;
  b.x0 = x0;
  b.xf = xf;
  b.width = w;
  b.alpha = std::move(alpha);
  return b;
}

const MaterialSet& two_materials() {
  static const MaterialSet mats({{10, 0.3, 0.9}, {5, 0.3, 0.45}}, {1e-6, 0.3, 1.0});
  return mats;
}

}  // namespace

TEST_CASE("continuation step") {
  ConstraintState s;
  s.eps_d = 1.0;
  s.delta_eps = 0.2;
  s.eps_d_star = 0.01;
  s.delta_f_star = 1e-3;
  CHECK(continuation_step(s, 10 * s.delta_f_star).eps_d == s.eps_d);
  CHECK(continuation_step(s, 10 * s.delta_f_star).eps_m == s.eps_m);
  CHECK(continuation_step(s, 5e-4).eps_d == Approx(0.8));
  s.eps_d = s.eps_d_star;
  CHECK(continuation_step(s, 0.0).eps_d == s.eps_d_star);

  SUBCASE("reaches the final limit in the bounded number of steps") {
    ConstraintState t;
    t.eps_d = 1.0;
    t.eps_m = 0.3;
    const int bound = static_cast<int>(std::ceil((t.eps_d - t.eps_d_star) / t.delta_eps));
    int steps = 0;
    double prev = t.eps_d;
    while (!t.at_final_limits()) {
      t = continuation_step(t, 0.0);
      CHECK(t.eps_d <= prev);
      prev = t.eps_d;
      ++steps;
    }
    CHECK(steps <= bound);
  }
}

TEST_CASE("weight fraction") {
  const auto grid = build_grid(4, 1.0);
  const auto& mats = two_materials();
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(grid.num_elements(), 2);
  CHECK(weight_fraction(rho, grid, mats) == 0.0);
  rho.col(0).setOnes();
  CHECK(weight_fraction(rho, grid, mats) == Approx(1.0).epsilon(1e-14));
  rho.col(0).setZero();
  rho.col(1).setOnes();
  CHECK(weight_fraction(rho, grid, mats) == Approx(0.5).epsilon(1e-14));

  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int e = 0; e < grid.num_elements(); ++e) {
    rho(e, 0) = u(rng);
    rho(e, 1) = u(rng);
  }
  const double wf = weight_fraction(rho, grid, mats);
  CHECK(wf == Approx((weight_fraction_gradient(grid, mats).cwiseProduct(rho)).sum()));
  CHECK(wf >= 0.0);
  CHECK(wf <= 1.0);
}

TEST_CASE("discreteness") {
  const std::vector<double> binary{0, 1, 1, 0};
  CHECK(discreteness(binary, 25) == 0.0);
  const std::vector<double> half(6, 0.5);
  CHECK(discreteness(half, 25) == Approx(1.0).epsilon(1e-14));
  const std::vector<double> one_half{0.5, 0, 0, 0};
  CHECK(discreteness(one_half, 25) ==
        Approx(4.0 / 25.0 * std::log((std::exp(6.25) + 3) / 4)).epsilon(1e-14));
  CHECK(discreteness(one_half, 25) == Approx(0.7794).epsilon(1e-3));
  CHECK(discreteness_gradient(one_half, 25)[0] == 0.0);

  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> a(8);
    for (double& v : a) {
      v = u(rng);
    }
    CHECK(discreteness(a, 25) <= 1.0);
    const Eigen::VectorXd g = discreteness_gradient(a, 25);
    for (int j = 0; j < 8; ++j) {
      auto f = [&](double x) {
        auto b = a;
        b[j] = x;
        return discreteness(b, 25);
      };
      CHECK(g[j] == Approx(oracle::central_difference(f, a[j], 1e-6)).epsilon(1e-6));
    }
  }
}

TEST_CASE("mutual exclusion") {
  std::vector<Bar> onehot{make_bar({}, {}, 0.1, {1, 0}), make_bar({}, {}, 0.1, {0, 1})};
  CHECK(mutual_exclusion(onehot, 25) == Approx(0.0));
  std::vector<Bar> voids{make_bar({}, {}, 0.1, {0, 0}), make_bar({}, {}, 0.1, {0, 0})};
  CHECK(mutual_exclusion(voids, 25) == Approx(-1.0));
  std::vector<Bar> mixed{make_bar({}, {}, 0.1, {0.5, 0.5}), make_bar({}, {}, 0.1, {1.0, 0.5})};
  CHECK(mutual_exclusion(mixed, 25) ==
        Approx(std::log((std::exp(25.0) + std::exp(37.5)) / 2) / 25 - 1).epsilon(1e-13));
  CHECK(mutual_exclusion(mixed, 25) == Approx(0.4723).epsilon(1e-4));
  const Eigen::VectorXd g = mutual_exclusion_gradient(mixed, 25);
  CHECK(g[1] > 0.0);
  CHECK(g[1] > g[0]);

  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0, 0.5);
  for (int t = 0; t < 100; ++t) {
    std::vector<Bar> bars;
    for (int q = 0; q < 4; ++q) {
      bars.push_back(make_bar({}, {}, 0.1, {u(rng), u(rng)}));
    }
    CHECK(mutual_exclusion(bars, 25) <= 0.0);
  }
}

TEST_CASE("geometric bar volume") {
  const Bar sphere = make_bar({0, 0, 0}, {0, 0, 0}, 0.1, {1});
  CHECK(geometric_bar_volume(sphere) == Approx(5.23599e-4).epsilon(1e-5));
  const Bar rod = make_bar({0, 0, 0}, {0.5, 0, 0}, 0.1, {1});
  CHECK(geometric_bar_volume(rod) == Approx(4.45059e-3).epsilon(1e-5));
  const Bar big = make_bar({0, 0, 0}, {0, 0, 0}, 0.2, {1});
  CHECK(geometric_bar_volume(big) == Approx(8 * geometric_bar_volume(sphere)));
}

TEST_CASE("no-cut constraint") {
  const Vec3 c(0.5, 0.5, 0.5);
  const auto sym = SymmetryGroup::cubic(c);
  // Clear of every wedge plane by more than w/2.
  const Bar inside = make_bar(c + Vec3(0.4, 0.25, 0.1), c + Vec3(0.3, 0.2, 0.08), 0.1, {1, 0});
  // Bisected by the plane r_z = 0.
  const Bar straddle =
      make_bar(c + Vec3(0.3, 0.2, -0.1), c + Vec3(0.3, 0.2, 0.1), 0.1, {1, 0});

  SUBCASE("no bars") {
    const auto grid = build_grid(8, 1.0);
    CHECK(std::isinf(no_cut(std::span<const Bar>{}, grid, sym, 0.1, 25)));
  }

  SUBCASE("discretization error of an uncut bar shrinks with h") {
    std::vector<double> err;
    for (int n : {8, 16, 32}) {
      const auto grid = build_grid(n, 1.0);
      const double r = SampleWindow::for_element(grid.h(), 1.0).radius;
      const NoCutConstraint nc(grid, sym, r, 25);
      err.push_back(std::abs(geometric_bar_volume(inside) - nc.numerical_volume(inside)));
      MESSAGE("n=" << n << " |V_geom - V_num| = " << err.back());
    }
    CHECK(err[2] < err[0]);
    // |error| <= C h with C fitted from the coarsest grid.
    const double c_fit = err[0] * 8;
    CHECK(err[1] <= c_fit / 16);
    CHECK(err[2] <= c_fit / 32);
  }

  SUBCASE("a bisected bar loses half its volume") {
    const auto grid = build_grid(32, 1.0);
    const double r = SampleWindow::for_element(grid.h(), 1.0).radius;
    const std::vector<Bar> one{straddle};
    const double g = no_cut(one, grid, sym, r, 25);
    CHECK(g == Approx(geometric_bar_volume(straddle) / 2).epsilon(0.05));
    CHECK(g > 50 * 1e-5);
  }

  SUBCASE("calibration zeroes the initial differences") {
    const auto grid = build_grid(16, 1.0);
    const double r = SampleWindow::for_element(grid.h(), 1.0).radius;
    NoCutConstraint nc(grid, sym, r, 25);
    const std::vector<Bar> bars{inside, straddle};
    nc.calibrate(bars);
    const auto res = nc.evaluate(bars, false);
    CHECK(std::abs(res.difference[0]) < 1e-15);
    CHECK(std::abs(res.difference[1]) < 1e-15);
    CHECK(std::abs(res.value) < 1e-15);
  }

  SUBCASE("gradient matches central differences") {
    const auto grid = build_grid(8, 1.0);
    const double r = SampleWindow::for_element(grid.h(), 1.0).radius;
    NoCutConstraint nc(grid, sym, r, 25);
    std::vector<Bar> bars{inside, straddle};
    bars[1].xf += Vec3(0.013, -0.007, 0.021);
    const auto res = nc.evaluate(bars, true);
    const double step = 1e-6;
    for (int q = 0; q < 2; ++q) {
      for (int v = 0; v < 6; ++v) {
        auto f = [&](double t) {
          auto b = bars;
          (v < 3 ? b[q].x0 : b[q].xf)[v % 3] = t;
          return nc.evaluate(b, false).value;
        };
        const double x = (v < 3 ? bars[q].x0 : bars[q].xf)[v % 3];
        const double fd = oracle::central_difference(f, x, step);
        CHECK(res.gradient(q, v) == Approx(fd).epsilon(1e-5).scale(1e-4));
      }
    }
  }
}
