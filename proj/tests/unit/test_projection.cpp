#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "latticeopt/projection.hpp"
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

ProjectionParams params_for(double r) {
  ProjectionParams p;
  p.window = {r, 1.0};
  p.heaviside_eps = r;
  p.ks_k = 25.0;
  p.heaviside_p = 2.0;
  return p;
}

}  // namespace

TEST_CASE("distance to segment branches") {
  const Vec3 o(0, 0, 0), x(1, 0, 0);
  CHECK(distance_to_segment(o, x, Vec3(0.5, 0.3, 0)) == Approx(0.3));
  CHECK(distance_to_segment(o, x, Vec3(-0.4, 0.3, 0)) == Approx(0.5));
  CHECK(distance_to_segment(o, o, Vec3(0, 0, 0.2)) == Approx(0.2));
  CHECK(distance_to_segment(o, x, Vec3(1.3, 0, 0.4)) == Approx(0.5));
}

TEST_CASE("signed distance") {
  const Bar b = make_bar({0, 0, 0}, {1, 0, 0}, 0.1, {1.0});
  CHECK(signed_distance(b, Vec3(0.5, 0, 0)) == Approx(-0.05));
  CHECK(signed_distance(b, Vec3(0.5, 0.05, 0)) == Approx(0.0));
  const Bar thick = make_bar({0, 0, 0}, {1, 0, 0}, 0.2, {1.0});
  CHECK(signed_distance(thick, Vec3(0.5, 0.3, 0)) ==
        Approx(distance_to_segment(thick.x0, thick.xf, Vec3(0.5, 0.3, 0)) - 0.1));
  CHECK(signed_distance(thick, Vec3(0.5, 0.3, 0)) == Approx(0.2));
}

TEST_CASE("bar density: cap volume formula") {
  CHECK(bar_density(0.0, 0.7) == 0.5);
  CHECK(bar_density(1.4, 0.7) == 0.0);
  CHECK(bar_density(-2.0, 0.7) == 1.0);
  CHECK(bar_density(-0.5, 1.0) == Approx(0.84375).epsilon(1e-14));

  SUBCASE("Monte-Carlo cap volume agrees") {
    for (double phi : {-0.8, -0.5, -0.1, 0.3, 0.75}) {
      const double mc = oracle::cap_fraction_mc(phi, 1.0, 400000, 7);
      CHECK(std::abs(bar_density(phi, 1.0) - mc) < 4e-3);
    }
  }

  SUBCASE("continuous and C1 at the branch points") {
    const double r = 0.3;
    for (double s : {-1.0, 1.0}) {
      const double phi = s * r;
      CHECK(std::abs(bar_density(phi + 1e-13, r) - bar_density(phi - 1e-13, r)) < 1e-12);
      CHECK(std::abs(bar_density_derivative(phi, r)) < 1e-12);
    }
  }

  SUBCASE("monotonically non-increasing") {
    double prev = 1.0;
    for (double phi = -1.5; phi <= 1.5; phi += 1e-3) {
      const double v = bar_density(phi, 1.0);
      CHECK(v <= prev + 1e-15);
      prev = v;
    }
  }
}

TEST_CASE("smooth Heaviside") {
  const double eps = 0.2;
  CHECK(smooth_heaviside(-2 * eps, eps, 2.0) == 0.0);
  CHECK(smooth_heaviside(0.0, eps, 2.0) == Approx(0.25));
  CHECK(smooth_heaviside(eps, eps, 2.0) == Approx(1.0));
  CHECK(smooth_heaviside(eps, eps, 3.5) == Approx(1.0));
  CHECK(std::abs(smooth_heaviside_derivative(eps, eps, 2.0)) < 1e-12);
  CHECK(std::abs(smooth_heaviside_derivative(-eps, eps, 2.0)) < 1e-12);
  for (double x = -0.19; x < 0.19; x += 0.013) {
    const double fd = oracle::central_difference(
        [&](double t) { return smooth_heaviside(t, eps, 2.0); }, x, 1e-7);
    CHECK(smooth_heaviside_derivative(x, eps, 2.0) == Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("KS and LKS aggregation") {
  const std::vector<double> one{0.37};
  CHECK(ks_max(one, 25.0) == Approx(0.37));
  const std::vector<double> zeros{0.0, 0.0};
  CHECK(ks_max(zeros, 25.0) == Approx(std::log(2.0) / 25.0));
  CHECK(ks_max(zeros, 25.0) == Approx(0.027726).epsilon(1e-5));
  const std::vector<double> one_zero{1.0, 0.0};
  CHECK(std::abs(ks_max(one_zero, 25.0) - 1.0) < 1e-11);

  const std::vector<double> constant{0.4, 0.4, 0.4};
  CHECK(lks_max(constant, 25.0) == Approx(0.4));
  CHECK(lks_max(zeros, 25.0) == 0.0);
  const std::vector<double> mixed{0.1, -0.5};
  const double expected = 0.1 + std::log((1 + std::exp(-15.0)) / 2) / 25.0;
  CHECK(lks_max(mixed, 25.0) == Approx(expected).epsilon(1e-14));
  CHECK(lks_max(mixed, 25.0) == Approx(0.072274).epsilon(1e-5));

  const std::vector<double> big{800.0, 799.0};
  CHECK(std::isfinite(ks_max(big, 25.0)));
  CHECK_THROWS(ks_max(std::vector<double>{}, 25.0));

  SUBCASE("gradient is the softmax") {
    const std::vector<double> x{0.1, 0.3, -0.2};
    const Eigen::VectorXd w = ks_weights(x, 25.0);
    for (int i = 0; i < 3; ++i) {
      auto f = [&](double t) {
        auto y = x;
        y[i] = t;
        return lks_max(y, 25.0);
      };
      CHECK(w[i] == Approx(oracle::central_difference(f, x[i], 1e-7)).epsilon(1e-6));
    }
  }
}

TEST_CASE("material weights") {
  const std::vector<double> a1{1.0, 0.0};
  CHECK(material_weights(a1)[0] == 1.0);
  CHECK(material_weights(a1)[1] == 0.0);
  const std::vector<double> a0{0.0, 0.0, 0.0};
  CHECK(material_weights(a0).norm() == 0.0);
  const std::vector<double> half{0.5, 0.5};
  CHECK(material_weights(half)[0] == Approx(0.25));
  CHECK(material_weights(half)[1] == Approx(0.25));

  const Eigen::MatrixXd jac = material_weights_jacobian(a1);
  CHECK(jac(0, 0) == Approx(1.0));
  CHECK(jac(1, 1) == Approx(0.0));

  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a{u(rng), u(rng), u(rng)};
    const Eigen::MatrixXd j = material_weights_jacobian(a);
    for (int c = 0; c < 3; ++c) {
      for (int r = 0; r < 3; ++r) {
        auto f = [&](double x) {
          auto b = a;
          b[c] = x;
          return material_weights(b)[r];
        };
        CHECK(j(r, c) == Approx(oracle::central_difference(f, a[c], 1e-7)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("reflection to the reference region") {
  const Vec3 c(0.5, 0.5, 0.5);
  const auto cubic = SymmetryGroup::cubic(c);
  const Vec3 p = cubic.reflect_to_reference(Vec3(0.2, 0.5, 0.5));
  CHECK((p - Vec3(0.8, 0.5, 0.5)).norm() < 1e-15);
  CHECK((cubic.reflect_to_reference(p) - p).norm() == 0.0);

  const auto at_origin = SymmetryGroup::cubic(Vec3::Zero());
  const Vec3 q = at_origin.reflect_to_reference(Vec3(-0.1, 0.3, 0.2));
  CHECK((q - Vec3(0.3, 0.2, 0.1)).norm() < 1e-15);
  CHECK((at_origin.reflect_by_planes(Vec3(-0.1, 0.3, 0.2)) - q).norm() < 1e-14);

  CHECK(cubic.normals().size() == 9);
  for (const auto& n : cubic.normals()) {
    CHECK(n.norm() == Approx(1.0));
  }
  CHECK(cubic.group_elements().size() == 48);
  CHECK(SymmetryGroup::orthotropic(c).group_elements().size() == 8);

  SUBCASE("fast path agrees with Householder products; idempotent and isometric") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 1000; ++t) {
      const Vec3 x(u(rng), u(rng), u(rng));
      const Vec3 fast = cubic.reflect_to_reference(x);
      const Vec3 slow = cubic.reflect_by_planes(x);
      CHECK((fast - slow).norm() < 1e-13);
      CHECK(cubic.in_reference(fast));
      CHECK((cubic.reflect_to_reference(fast) - fast).norm() == 0.0);
      CHECK((fast - c).norm() == Approx((x - c).norm()).epsilon(1e-14));
    }
  }

  SUBCASE("reference share on bounding planes") {
    CHECK(cubic.reference_share(c + Vec3(0.3, 0.2, 0.1)) == 1.0);
    CHECK(cubic.reference_share(c + Vec3(0.3, 0.3, 0.1)) == 0.5);
    CHECK(cubic.reference_share(c + Vec3(0.3, 0.3, 0.3)) == Approx(1.0 / 6.0));
    CHECK(cubic.reference_share(c + Vec3(0.3, 0.0, 0.0)) == Approx(1.0 / 8.0));
    CHECK(cubic.reference_share(c + Vec3(0.1, 0.3, 0.0)) == 0.0);
  }
}

TEST_CASE("effective densities at a point") {
  const auto params = params_for(0.05);
  SUBCASE("deep inside a one-hot bar") {
    std::vector<Bar> bars{make_bar({0.2, 0.5, 0.5}, {0.8, 0.5, 0.5}, 0.3, {1.0, 0.0})};
    const Eigen::VectorXd rho = effective_densities(bars, Vec3(0.5, 0.5, 0.5), params);
    CHECK(rho[0] == Approx(1.0).epsilon(1e-3));
    CHECK(rho[1] == 0.0);
  }
  SUBCASE("void point") {
    std::vector<Bar> bars{make_bar({0.2, 0.5, 0.5}, {0.8, 0.5, 0.5}, 0.1, {0.7, 0.2})};
    CHECK(effective_densities(bars, Vec3(0.5, 0.9, 0.5), params).norm() == 0.0);
  }
  SUBCASE("inside a bar with zero size variables") {
    std::vector<Bar> bars{make_bar({0.2, 0.5, 0.5}, {0.8, 0.5, 0.5}, 0.3, {0.0, 0.0})};
    CHECK(effective_densities(bars, Vec3(0.5, 0.5, 0.5), params).norm() == 0.0);
  }
}

TEST_CASE("elasticity interpolation") {
  const MaterialSet mats({{10, 0.3, 0.9}, {5, 0.3, 0.45}}, {1e-9, 0.3, 1.0});
  CHECK((interpolate_elasticity(Eigen::Vector2d(0, 0), mats) - mats.ersatz_stiffness())
            .norm() == 0.0);
  CHECK((interpolate_elasticity(Eigen::Vector2d(1, 0), mats) - mats.stiffness(0))
            .norm() < 1e-12);
  const Voigt mean = 0.5 * (mats.stiffness(0) + mats.stiffness(1));
  CHECK((interpolate_elasticity(Eigen::Vector2d(0.5, 0.5), mats) - mean).norm() < 1e-8);

  CHECK_THROWS_AS(MaterialSet({{10, 0.5, 1.0}}, {1e-6, 0.3, 1.0}), ConfigError);
  CHECK_THROWS_AS(MaterialSet({{10, 0.3, 0.0}}, {1e-6, 0.3, 1.0}), ConfigError);
  CHECK_THROWS_AS(MaterialSet({{10, 0.3, 1.0}}, {20, 0.3, 1.0}), ConfigError);
}

TEST_CASE("design vector scaling round trip") {
  std::vector<Bar> bars{make_bar({0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}, 0.1, {0.3, 0.9}),
                        make_bar({1.1, 0.0, 2.0}, {0.7, 1.9, 0.2}, 0.1, {0.0, 1.0})};
  const auto dv = DesignVector::from_bars(bars, 2, 2.0);
  CHECK(dv.size() == 2 * (6 + 2));
  CHECK(dv.scaled().minCoeff() >= 0.0);
  CHECK(dv.scaled().maxCoeff() <= 1.0);
  const auto back = dv.to_bars(0.1);
  for (int q = 0; q < 2; ++q) {
    CHECK((back[q].x0 - bars[q].x0).norm() < 1e-15);
    CHECK((back[q].xf - bars[q].xf).norm() < 1e-15);
    CHECK(back[q].alpha == bars[q].alpha);
  }
  for (int i = 0; i < dv.size(); ++i) {
    CHECK(dv.scale(i, dv.unscale(i, dv.scaled()[i])) == Approx(dv.scaled()[i]).epsilon(1e-15));
  }
  CHECK_THROWS_AS(DesignVector::from_bars(bars, 3, 2.0), ConfigError);
}

TEST_CASE("project_field") {
  const auto grid = build_grid(8, 1.0);
  const auto sym = SymmetryGroup::cubic(grid.center());
  const auto params = params_for(SampleWindow::for_element(grid.h(), 1.0).radius);

  SUBCASE("no bars gives an empty field") {
    const auto f = project_field(std::span<const Bar>{}, grid, sym, params, 2);
    CHECK(f.rho.norm() == 0.0);
  }

  SUBCASE("field is invariant under the cubic group") {
    std::vector<Bar> bars{make_bar({0.5, 0.5, 0.5}, {1.0, 0.75, 0.5}, 0.3, {1.0, 0.0})};
    const auto f = project_field(bars, grid, sym, params, 2, false);
    CHECK(f.rho.maxCoeff() > 0.5);
    const int n = grid.n();
    for (int e = 0; e < grid.num_elements(); ++e) {
      const auto ijk = grid.element_ijk(e);
      const int i = ijk[0], j = ijk[1], k = ijk[2];
      const int images[][3] = {{n - 1 - i, j, k}, {i, n - 1 - j, k}, {i, j, n - 1 - k},
                               {j, i, k},         {i, k, j},         {k, j, i},
                               {n - 1 - j, n - 1 - i, k}};
      for (const auto& im : images) {
        CHECK(f.rho(grid.element_index(im[0], im[1], im[2]), 0) ==
              Approx(f.rho(e, 0)).epsilon(1e-12));
      }
    }
  }

  SUBCASE("reflection equals explicit bar replication") {
    // Oracle: for each centroid find by brute force the group matrix that maps
    // it into the reference wedge, transform the bars by its inverse, and
    // evaluate at the unreflected centroid.
    std::vector<Bar> bars{make_bar({0.62, 0.57, 0.52}, {0.85, 0.7, 0.55}, 0.1, {0.8, 0.3}),
                          make_bar({0.7, 0.55, 0.51}, {0.9, 0.9, 0.6}, 0.1, {0.2, 0.6})};
    const auto f = project_field(bars, grid, sym, params, 2, false);
    const auto mats = sym.group_elements();
    const Vec3 c = grid.center();
    for (int e = 0; e < grid.num_elements(); ++e) {
      const Vec3 p = grid.centroid(e);
      bool found = false;
      for (const Mat3& g : mats) {
        const Vec3 r = g * (p - c);
        if (!(r[0] >= r[1] - 1e-12 && r[1] >= r[2] - 1e-12 && r[2] >= -1e-12)) {
          continue;
        }
        std::vector<Bar> images = bars;
        for (Bar& b : images) {
          b.x0 = c + g.transpose() * (b.x0 - c);
          b.xf = c + g.transpose() * (b.xf - c);
        }
        const Eigen::VectorXd rho = effective_densities(images, p, params);
        CHECK((rho.transpose() - f.rho.row(e)).norm() <= 1e-10);
        found = true;
        break;
      }
      CHECK(found);
    }
  }
}

TEST_CASE("projection gradients match central differences") {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = 0.06;
  const auto params = params_for(r);
  const double edge = 1.0, step = 1e-6;
  int checked = 0;
  while (checked < 100) {
    std::vector<Bar> bars;
    for (int q = 0; q < 3; ++q) {
      bars.push_back(make_bar({u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)}, 0.1,
                              {u(rng), u(rng)}));
    }
    // Sample near the first bar so the derivatives are not all zero.
    const double t = u(rng);
    const Vec3 axis_pt = bars[0].x0 + t * (bars[0].xf - bars[0].x0);
    const Vec3 p = axis_pt + 0.12 * Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);

    bool degenerate = false;
    for (const Bar& b : bars) {
      const double phi = signed_distance(b, p);
      if (std::abs(std::abs(phi) - r) < 1e-4 || distance_to_segment(b.x0, b.xf, p) < 1e-4) {
        degenerate = true;
      }
    }
    if (degenerate) {
      continue;
    }

    std::vector<BarDerivative> grad;
    const Eigen::VectorXd rho = effective_densities_with_gradient(bars, p, params, grad);
    if (grad.empty()) {
      continue;
    }
    const auto base = DesignVector::from_bars(bars, 2, edge);
    Eigen::MatrixXd analytic = Eigen::MatrixXd::Zero(2, base.size());
    for (const auto& bd : grad) {
      for (int v = 0; v < vars_per_bar(2); ++v) {
        analytic.col(base.bar_offset(bd.bar) + v) = bd.d_rho.col(v) * base.range(v);
      }
    }
    Eigen::MatrixXd fd(2, base.size());
    for (int i = 0; i < base.size(); ++i) {
      auto plus = base, minus = base;
      plus.scaled()[i] += step;
      minus.scaled()[i] -= step;
      const auto bp = plus.to_bars(0.1), bm = minus.to_bars(0.1);
      fd.col(i) = (effective_densities(bp, p, params) - effective_densities(bm, p, params)) /
                  (2 * step);
    }
    const double scale = fd.cwiseAbs().maxCoeff();
    if (scale == 0.0) {
      continue;
    }
    CHECK((analytic - fd).cwiseAbs().maxCoeff() <= 1e-5 * scale);
    (void)rho;
    ++checked;
  }

  SUBCASE("flat branch and product rule") {
    const auto p2 = params_for(0.05);
    std::vector<Bar> bars{make_bar({0, 0, 0}, {1, 0, 0}, 0.1, {1.0, 0.0})};
    std::vector<BarDerivative> grad;
    // phi = 2r: outside the support, no derivative entries at all.
    effective_densities_with_gradient(bars, Vec3(0.5, 0.05 + 0.1, 0), p2, grad);
    CHECK(grad.empty());
    CHECK(bar_density_derivative(0.1, 0.05) == 0.0);
    const std::vector<double> a{1.0, 0.0};
    CHECK(material_weights_jacobian(a)(0, 0) == 1.0);
  }
}

TEST_CASE("randomized aggregation properties") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 30);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> x(len(rng));
    for (double& v : x) {
      v = 4.0 * u(rng) - 2.0;
    }
    const double mx = *std::max_element(x.begin(), x.end());
    const double k = 25.0;
    const double ks = ks_max(x, k);
    CHECK(ks >= mx - 1e-15);
    CHECK(ks <= mx + std::log(static_cast<double>(x.size())) / k + 1e-15);
    CHECK(lks_max(x, k) <= mx + 1e-15);
  }
}

TEST_CASE("randomized kernel properties") {
  std::mt19937 rng(404);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto params = params_for(0.06);
  for (int t = 0; t < 1000; ++t) {
    // Heaviside monotone, cap density continuous at the branch points.
    const double eps = 0.01 + u(rng), x = 4 * eps * (u(rng) - 0.5), dx = 1e-3 * u(rng);
    CHECK(smooth_heaviside(x + dx, eps, 2.0) >= smooth_heaviside(x, eps, 2.0));
    const double r = 0.01 + u(rng);
    CHECK(std::abs(bar_density(r * (1 + 1e-15), r) - bar_density(r * (1 - 1e-15), r)) <
          1e-12);
    CHECK(std::abs(bar_density(-r * (1 + 1e-15), r) - bar_density(-r * (1 - 1e-15), r)) <
          1e-12);

    // One-hot size variables give identical weights.
    std::vector<double> onehot(1 + t % 4, 0.0);
    onehot[t % onehot.size()] = 1.0;
    const Eigen::VectorXd w = material_weights(onehot);
    for (std::size_t i = 0; i < onehot.size(); ++i) {
      CHECK(w[i] == onehot[i]);
    }

    // Sum of effective densities.
    std::vector<Bar> bars;
    const int nb = 1 + t % 5;
    for (int q = 0; q < nb; ++q) {
      bars.push_back(make_bar({u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)}, 0.1,
                              {u(rng), u(rng)}));
    }
    const Vec3 p(u(rng), u(rng), u(rng));
    const Eigen::VectorXd rho = effective_densities(bars, p, params);
    CHECK(rho.minCoeff() >= 0.0);
    CHECK(rho.sum() <= 1.0 + 1e-6);
  }
}

TEST_CASE("coincident one-hot bars exceed unit total density") {
  // Two identical solid bars: numerator 2, denominator 2 + 1 - KS(1, 1).
  const auto params = params_for(0.05);
  const Bar b = make_bar({0.2, 0.5, 0.5}, {0.8, 0.5, 0.5}, 0.3, {1.0, 0.0});
  const std::vector<Bar> bars{b, b};
  const double expected = 2.0 / (2.0 - std::log(2.0) / 25.0);
  CHECK(effective_densities(bars, Vec3(0.5, 0.5, 0.5), params)[0] ==
        Approx(expected).epsilon(1e-12));
}
