#pragma once

#include "latticeopt/grid.hpp"
#include "latticeopt/projection.hpp"

#include <span>
#include <utility>
#include <vector>

namespace latticeopt {

/// Continuation limits and the remaining constraint parameters.
struct ConstraintState {
  double eps_d = 1.0;
  double eps_m = 0.3;
  double eps_d_star = 0.01;
  double eps_m_star = 0.01;
  double delta_eps = 0.1;
  double delta_f_star = 1e-3;
  double eps_n = 1e-5;
  double wf_star = 0.1;
  double k_min = 0.001;

  bool at_final_limits() const { return eps_d <= eps_d_star && eps_m <= eps_m_star; }
};

/// Lowers eps_d and eps_m by delta_eps (floored at their final values) when
/// the objective change is at most delta_f_star.
ConstraintState continuation_step(const ConstraintState& state, double delta_f);

/// Density-weighted material usage over the whole cell, normalized by the
/// heaviest material filling it.
double weight_fraction(const Eigen::MatrixXd& rho, const UnitCellGrid& grid,
                       const MaterialSet& mats);
/// d w_f / d rho(e, i); independent of rho.
Eigen::MatrixXd weight_fraction_gradient(const UnitCellGrid& grid, const MaterialSet& mats);

/// 4 * LKS of alpha (1 - alpha) over every size variable. Empty input gives 0.
double discreteness(std::span<const double> alpha, double k);
Eigen::VectorXd discreteness_gradient(std::span<const double> alpha, double k);

/// LKS over bars of (sum of size variables - 1). No bars gives -1.
double mutual_exclusion(std::span<const Bar> bars, double k);
/// Derivative per bar with respect to any one of its size variables.
Eigen::VectorXd mutual_exclusion_gradient(std::span<const Bar> bars, double k);

/// Capsule volume: cylinder plus two hemispherical caps.
double geometric_bar_volume(const Bar& bar);

/// Volume mismatch between each bar and its projection restricted to the
/// symmetry reference region.
class NoCutConstraint {
 public:
  NoCutConstraint(const UnitCellGrid& grid, const SymmetryGroup& sym, double window_radius,
                  double k);

  struct Result {
    /// -inf when there are no bars.
    double value = 0.0;
    /// V_geom - V_num - offset per bar.
    std::vector<double> difference;
    /// d value / d (x0, xf) per bar, physical units (num_bars x 6).
    Eigen::MatrixXd gradient;
  };

  /// Projected volume of one bar counted over the reference region.
  double numerical_volume(const Bar& bar) const;
  /// Stores V_geom - V_num of the given bars as per-bar offsets.
  void calibrate(std::span<const Bar> bars);
  void set_offsets(std::vector<double> offsets) { offsets_ = std::move(offsets); }
  const std::vector<double>& offsets() const { return offsets_; }

  Result evaluate(std::span<const Bar> bars, bool with_gradient = true) const;

 private:
  double element_volume_;
  double radius_;
  double k_;
  std::vector<Vec3> points_;
  std::vector<double> shares_;
  std::vector<double> offsets_;
};

/// Uncalibrated no-cut value, LKS over bars of V_geom - V_num.
double no_cut(std::span<const Bar> bars, const UnitCellGrid& grid, const SymmetryGroup& sym,
              double window_radius, double k);

}  // namespace latticeopt
