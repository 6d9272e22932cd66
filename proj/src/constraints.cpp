#include "latticeopt/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace latticeopt {

ConstraintState continuation_step(const ConstraintState& state, double delta_f) {
  ConstraintState next = state;
  if (delta_f <= state.delta_f_star) {
    next.eps_d = std::max(state.eps_d - state.delta_eps, state.eps_d_star);
    next.eps_m = std::max(state.eps_m - state.delta_eps, state.eps_m_star);
  }
  return next;
}

double weight_fraction(const Eigen::MatrixXd& rho, const UnitCellGrid& grid,
                       const MaterialSet& mats) {
  double sum = 0.0;
  for (int i = 0; i < mats.size(); ++i) {
    sum += mats.density(i) * rho.col(i).sum();
  }
  return sum * grid.element_volume() / (grid.cell_volume() * mats.max_density());
}

Eigen::MatrixXd weight_fraction_gradient(const UnitCellGrid& grid, const MaterialSet& mats) {
  Eigen::MatrixXd g(grid.num_elements(), mats.size());
  const double scale = grid.element_volume() / (grid.cell_volume() * mats.max_density());
  for (int i = 0; i < mats.size(); ++i) {
    g.col(i).setConstant(mats.density(i) * scale);
  }
  return g;
}

double discreteness(std::span<const double> alpha, double k) {
  if (alpha.empty()) {
    return 0.0;
  }
  std::vector<double> t(alpha.size());
  std::transform(alpha.begin(), alpha.end(), t.begin(), [](double a) { return a * (1 - a); });
  return 4.0 * lks_max(t, k);
}

Eigen::VectorXd discreteness_gradient(std::span<const double> alpha, double k) {
  if (alpha.empty()) {
    return {};
  }
  std::vector<double> t(alpha.size());
  std::transform(alpha.begin(), alpha.end(), t.begin(), [](double a) { return a * (1 - a); });
  Eigen::VectorXd g = ks_weights(t, k);
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    g[j] *= 4.0 * (1.0 - 2.0 * alpha[j]);
  }
  return g;
}

namespace {
std::vector<double> excess(std::span<const Bar> bars) {
  std::vector<double> s;
  s.reserve(bars.size());
  for (const Bar& b : bars) {
    double sum = -1.0;
    for (double a : b.alpha) {
      sum += a;
    }
    s.push_back(sum);
  }
  return s;
}
}  // namespace

double mutual_exclusion(std::span<const Bar> bars, double k) {
  if (bars.empty()) {
    return -1.0;
  }
  return lks_max(excess(bars), k);
}

Eigen::VectorXd mutual_exclusion_gradient(std::span<const Bar> bars, double k) {
  if (bars.empty()) {
    return {};
  }
  return ks_weights(excess(bars), k);
}

double geometric_bar_volume(const Bar& bar) {
  const double w = bar.width;
  return std::numbers::pi * w * w * bar.length() / 4.0 + std::numbers::pi * w * w * w / 6.0;
}

//---------------------------------------------------------------------------//

NoCutConstraint::NoCutConstraint(const UnitCellGrid& grid, const SymmetryGroup& sym,
                                 double window_radius, double k)
    : element_volume_(grid.element_volume()), radius_(window_radius), k_(k) {
  for (int e = 0; e < grid.num_elements(); ++e) {
    const Vec3 p = grid.centroid(e);
    const double share = sym.reference_share(p);
    if (share > 0.0) {
      points_.push_back(p);
      shares_.push_back(share);
    }
  }
}

double NoCutConstraint::numerical_volume(const Bar& bar) const {
  const double reach = 0.5 * bar.width + radius_;
  double v = 0.0;
  for (std::size_t j = 0; j < points_.size(); ++j) {
    const double d = distance_to_segment(bar.x0, bar.xf, points_[j]);
    if (d < reach) {
      v += shares_[j] * bar_density(d - 0.5 * bar.width, radius_);
    }
  }
  return v * element_volume_;
}

void NoCutConstraint::calibrate(std::span<const Bar> bars) {
  offsets_.clear();
  for (const Bar& b : bars) {
    offsets_.push_back(geometric_bar_volume(b) - numerical_volume(b));
  }
}

NoCutConstraint::Result NoCutConstraint::evaluate(std::span<const Bar> bars,
                                                  bool with_gradient) const {
  Result out;
  const int nb = static_cast<int>(bars.size());
  if (nb == 0) {
    out.value = -std::numeric_limits<double>::infinity();
    return out;
  }
  if (with_gradient) {
    out.gradient = Eigen::MatrixXd::Zero(nb, 6);
  }
  for (int q = 0; q < nb; ++q) {
    const Bar& b = bars[q];
    const double half = 0.5 * b.width;
    const double reach = half + radius_;
    double vnum = 0.0;
    Vec3 d_x0 = Vec3::Zero(), d_xf = Vec3::Zero();
    for (std::size_t j = 0; j < points_.size(); ++j) {
      if (!with_gradient) {
        const double d = distance_to_segment(b.x0, b.xf, points_[j]);
        if (d < reach) {
          vnum += shares_[j] * bar_density(d - half, radius_);
        }
        continue;
      }
      const auto sd = distance_to_segment_with_gradient(b.x0, b.xf, points_[j]);
      if (sd.value >= reach) {
        continue;
      }
      vnum += shares_[j] * bar_density(sd.value - half, radius_);
      const double slope = shares_[j] * bar_density_derivative(sd.value - half, radius_);
      d_x0 += slope * sd.d_x0;
      d_xf += slope * sd.d_xf;
    }
    vnum *= element_volume_;
    const double offset = q < static_cast<int>(offsets_.size()) ? offsets_[q] : 0.0;
    out.difference.push_back(geometric_bar_volume(b) - vnum - offset);
    if (with_gradient) {
      // dV_geom/dx: cylinder part only.
      const double len = b.length();
      Vec3 dl_xf = Vec3::Zero();
      if (len > 0.0) {
        dl_xf = (b.xf - b.x0) / len;
      }
      const double cyl = std::numbers::pi * b.width * b.width / 4.0;
      out.gradient.block<1, 3>(q, 0) = (-cyl * dl_xf - element_volume_ * d_x0).transpose();
      out.gradient.block<1, 3>(q, 3) = (cyl * dl_xf - element_volume_ * d_xf).transpose();
    }
  }
  out.value = lks_max(out.difference, k_);
  if (with_gradient) {
    const Eigen::VectorXd sigma = ks_weights(out.difference, k_);
    for (int q = 0; q < nb; ++q) {
      out.gradient.row(q) *= sigma[q];
    }
  }
  return out;
}

double no_cut(std::span<const Bar> bars, const UnitCellGrid& grid, const SymmetryGroup& sym,
              double window_radius, double k) {
  return NoCutConstraint(grid, sym, window_radius, k).evaluate(bars, false).value;
}

}  // namespace latticeopt
