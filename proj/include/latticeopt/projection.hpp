#pragma once

#include "latticeopt/grid.hpp"
#include "latticeopt/types.hpp"

#include <span>
#include <vector>

namespace latticeopt {

//---------------------------------------------------------------------------//
// Domain types
//---------------------------------------------------------------------------//

/// Cylindrical strut with hemispherical caps: the offset surface at distance
/// width/2 of the segment [x0, xf]. One size variable per material.
struct Bar {
  Vec3 x0 = Vec3::Zero();
  Vec3 xf = Vec3::Zero();
  double width = 0.1;
  std::vector<double> alpha;

  double length() const { return (xf - x0).norm(); }
};

/// Number of design variables owned by one bar: two endpoints plus sizes.
inline int vars_per_bar(int num_materials) { return 6 + num_materials; }

/// Flat design vector scaled to [0, 1].
///
/// Per-bar layout is (x0, xf, alpha). Endpoint coordinates map affinely onto
/// [0, cell_edge]; size variables use identity scaling.
class DesignVector {
 public:
  DesignVector(int num_bars, int num_materials, double cell_edge);

  static DesignVector from_bars(const std::vector<Bar>& bars, int num_materials,
                                double cell_edge);
  std::vector<Bar> to_bars(double width) const;

  int num_bars() const { return num_bars_; }
  int num_materials() const { return num_materials_; }
  int size() const { return static_cast<int>(z_.size()); }
  int bar_offset(int q) const { return q * vars_per_bar(num_materials_); }
  bool is_size_variable(int i) const {
    return i % vars_per_bar(num_materials_) >= 6;
  }

  Eigen::VectorXd& scaled() { return z_; }
  const Eigen::VectorXd& scaled() const { return z_; }

  /// Physical value of variable i for the scaled value zhat.
  double unscale(int i, double zhat) const { return offset(i) + range(i) * zhat; }
  double scale(int i, double value) const { return (value - offset(i)) / range(i); }
  /// d(physical)/d(scaled) for variable i.
  double range(int i) const { return is_size_variable(i) ? 1.0 : edge_; }
  double offset(int /*i*/) const { return 0.0; }

 private:
  int num_bars_;
  int num_materials_;
  double edge_;
  Eigen::VectorXd z_;
};

/// Spherical sample window of radius r = c * sqrt(3) * h / 2.
struct SampleWindow {
  double radius = 0.0;
  double factor = 1.0;

  static SampleWindow for_element(double h, double factor);
};

/// Symmetry planes through the cell center. The reference region is the
/// intersection of the half-spaces n_s . (p - center) >= 0.
class SymmetryGroup {
 public:
  enum class Kind { none, orthotropic, cubic, planes };

  static SymmetryGroup none(const Vec3& center);
  /// Three mid-planes.
  static SymmetryGroup orthotropic(const Vec3& center);
  /// Three mid-planes plus six diagonal planes; reference wedge
  /// r_x >= r_y >= r_z >= 0 relative to the center.
  static SymmetryGroup cubic(const Vec3& center);
  /// Arbitrary planes; normals are normalized here.
  static SymmetryGroup from_planes(const Vec3& center, std::vector<Vec3> normals);

  Kind kind() const { return kind_; }
  const Vec3& center() const { return center_; }
  const std::vector<Vec3>& normals() const { return normals_; }

  /// Reflect p into the reference region by Householder reflections.
  Vec3 reflect_to_reference(const Vec3& p) const;
  /// Plane-by-plane reflection sweep, independent of the cubic fast path.
  Vec3 reflect_by_planes(const Vec3& p) const;
  bool in_reference(const Vec3& p, double tol = 1e-12) const;
  /// Fraction of the point that belongs to the closed reference region:
  /// 0 outside, 1 in the interior, 1/|stabilizer| on bounding planes.
  double reference_share(const Vec3& p, double tol = 1e-9) const;
  /// Orthogonal matrices (about the center) of the group generated by the
  /// plane reflections.
  std::vector<Mat3> group_elements() const;

 private:
  SymmetryGroup(Kind kind, const Vec3& center, std::vector<Vec3> normals);

  Kind kind_;
  Vec3 center_;
  std::vector<Vec3> normals_;
};

struct Material {
  double youngs_modulus = 1.0;
  double poisson_ratio = 0.3;
  double density = 1.0;
};

/// Isotropic stiffness in Voigt form.
Voigt isotropic_stiffness(double youngs_modulus, double poisson_ratio);

/// Available materials plus the weak ersatz filler.
class MaterialSet {
 public:
  MaterialSet(std::vector<Material> materials, Material ersatz);

  int size() const { return static_cast<int>(materials_.size()); }
  const Material& material(int i) const { return materials_[i]; }
  const Voigt& stiffness(int i) const { return stiffness_[i]; }
  const Voigt& ersatz_stiffness() const { return ersatz_; }
  double density(int i) const { return materials_[i].density; }
  double max_density() const { return max_density_; }

 private:
  std::vector<Material> materials_;
  std::vector<Voigt> stiffness_;
  Voigt ersatz_;
  double max_density_ = 0.0;
};

/// Parameters of the projection and aggregation.
struct ProjectionParams {
  SampleWindow window;
  double ks_k = 25.0;
  /// Heaviside half-bandwidth; defaults to the window radius.
  double heaviside_eps = 0.0;
  double heaviside_p = 2.0;

  /// Distance from a bar surface beyond which the bar has no influence.
  double support() const { return std::max(window.radius, heaviside_eps); }
};

//---------------------------------------------------------------------------//
// Scalar kernels
//---------------------------------------------------------------------------//

double distance_to_segment(const Vec3& x0, const Vec3& xf, const Vec3& p);

/// Distance and its derivatives with respect to x0 and xf. At branch
/// boundaries the derivative of the active branch is used.
struct SegmentDistance {
  double value = 0.0;
  Vec3 d_x0 = Vec3::Zero();
  Vec3 d_xf = Vec3::Zero();
};
SegmentDistance distance_to_segment_with_gradient(const Vec3& x0, const Vec3& xf,
                                                  const Vec3& p);

/// Negative inside the capsule.
double signed_distance(const Bar& bar, const Vec3& p);

/// Volume fraction of the spherical cap of height r - phi.
double bar_density(double phi, double r);
double bar_density_derivative(double phi, double r);

double smooth_heaviside(double x, double eps, double p_exp);
double smooth_heaviside_derivative(double x, double eps, double p_exp);

/// Kreisselmeier-Steinhauser maximum, evaluated with a max shift.
double ks_max(std::span<const double> values, double k);
/// Lower-bound KS: (1/k) ln(mean(exp(k x))).
double lks_max(std::span<const double> values, double k);
/// Softmax weights exp(k x_i) / sum exp(k x_j); the gradient of both KS and LKS.
Eigen::VectorXd ks_weights(std::span<const double> values, double k);

/// w_i = alpha_i * prod_{j != i} (1 - alpha_j).
Eigen::VectorXd material_weights(std::span<const double> alpha);
/// Jacobian dw_i / d alpha_j.
Eigen::MatrixXd material_weights_jacobian(std::span<const double> alpha);

//---------------------------------------------------------------------------//
// Point and field projection
//---------------------------------------------------------------------------//

/// Derivatives of the effective densities at one point with respect to the
/// variables (x0, xf, alpha) of a single bar, in physical units.
struct BarDerivative {
  int bar = 0;
  Eigen::MatrixXd d_rho;  // num_materials x vars_per_bar
};

/// Effective density per material at a point already in the reference region.
Eigen::VectorXd effective_densities(std::span<const Bar> bars, const Vec3& p,
                                    const ProjectionParams& params);

/// Same as effective_densities, additionally filling derivatives for every bar
/// whose surface lies within the projection support of p.
Eigen::VectorXd effective_densities_with_gradient(std::span<const Bar> bars,
                                                  const Vec3& p,
                                                  const ProjectionParams& params,
                                                  std::vector<BarDerivative>& grad);

/// C = C_min + sum_i (C_i - C_min) rho_i.
Voigt interpolate_elasticity(const Eigen::Ref<const Eigen::VectorXd>& rho,
                             const MaterialSet& mats);

/// Per-element effective densities and their sparse bar derivatives.
struct ProjectedField {
  Eigen::MatrixXd rho;  // num_elements x num_materials

  struct Entry {
    int element = 0;
    int bar = 0;
    Eigen::MatrixXd d_rho;  // num_materials x vars_per_bar
  };
  std::vector<Entry> derivatives;
};

/// For each bar, the elements whose reflected centroid lies within
/// width/2 + support + margin of its medial axis.
std::vector<std::vector<int>> sparsity_map(std::span<const Bar> bars,
                                           const UnitCellGrid& grid,
                                           const SymmetryGroup& sym,
                                           const ProjectionParams& params,
                                           double margin = 1e-9);

/// Project the bars onto every element centroid after reflecting it into the
/// reference region.
ProjectedField project_field(std::span<const Bar> bars, const UnitCellGrid& grid,
                             const SymmetryGroup& sym,
                             const ProjectionParams& params,
                             int num_materials, bool with_gradient = true);

}  // namespace latticeopt
