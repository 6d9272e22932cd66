#include "latticeopt/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace latticeopt {

//---------------------------------------------------------------------------//
// DesignVector
//---------------------------------------------------------------------------//

DesignVector::DesignVector(int num_bars, int num_materials, double cell_edge)
    : num_bars_(num_bars),
      num_materials_(num_materials),
      edge_(cell_edge),
      z_(Eigen::VectorXd::Zero(num_bars * vars_per_bar(num_materials))) {
  if (num_bars < 0 || num_materials < 1 || !(cell_edge > 0.0)) {
    throw ConfigError("invalid design vector dimensions");
  }
}

DesignVector DesignVector::from_bars(const std::vector<Bar>& bars, int num_materials,
                                     double cell_edge) {
  DesignVector dv(static_cast<int>(bars.size()), num_materials, cell_edge);
  for (int q = 0; q < dv.num_bars(); ++q) {
    const Bar& b = bars[q];
    if (static_cast<int>(b.alpha.size()) != num_materials) {
      throw ConfigError("bar " + std::to_string(q) + " has " +
                        std::to_string(b.alpha.size()) + " size variables, expected " +
                        std::to_string(num_materials));
    }
    const int o = dv.bar_offset(q);
    for (int d = 0; d < 3; ++d) {
      dv.z_[o + d] = dv.scale(o + d, b.x0[d]);
      dv.z_[o + 3 + d] = dv.scale(o + 3 + d, b.xf[d]);
    }
    for (int i = 0; i < num_materials; ++i) {
      dv.z_[o + 6 + i] = b.alpha[i];
    }
  }
  return dv;
}

std::vector<Bar> DesignVector::to_bars(double width) const {
  std::vector<Bar> bars(num_bars_);
  for (int q = 0; q < num_bars_; ++q) {
    const int o = bar_offset(q);
    Bar& b = bars[q];
    for (int d = 0; d < 3; ++d) {
      b.x0[d] = unscale(o + d, z_[o + d]);
      b.xf[d] = unscale(o + 3 + d, z_[o + 3 + d]);
    }
    b.width = width;
    b.alpha.resize(num_materials_);
    for (int i = 0; i < num_materials_; ++i) {
      b.alpha[i] = z_[o + 6 + i];
    }
  }
  return bars;
}

SampleWindow SampleWindow::for_element(double h, double factor) {
  return {factor * std::sqrt(3.0) * h / 2.0, factor};
}

//---------------------------------------------------------------------------//
// SymmetryGroup
//---------------------------------------------------------------------------//

SymmetryGroup::SymmetryGroup(Kind kind, const Vec3& center, std::vector<Vec3> normals)
    : kind_(kind), center_(center), normals_(std::move(normals)) {
  for (auto& n : normals_) {
    const double len = n.norm();
    if (!(len > 0.0)) {
      throw ConfigError("symmetry plane normal has zero length");
    }
    n /= len;
  }
}

SymmetryGroup SymmetryGroup::none(const Vec3& center) { return {Kind::none, center, {}}; }

SymmetryGroup SymmetryGroup::orthotropic(const Vec3& center) {
  return {Kind::orthotropic, center, {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()}};
}

SymmetryGroup SymmetryGroup::cubic(const Vec3& center) {
  // Order matters only for the plane sweep; the region is r_x >= r_y >= r_z >= 0.
  return {Kind::cubic,
          center,
          {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ(), Vec3(1, -1, 0), Vec3(0, 1, -1),
           Vec3(1, 0, -1), Vec3(1, 1, 0), Vec3(0, 1, 1), Vec3(1, 0, 1)}};
}

SymmetryGroup SymmetryGroup::from_planes(const Vec3& center, std::vector<Vec3> normals) {
  return {Kind::planes, center, std::move(normals)};
}

Vec3 SymmetryGroup::reflect_to_reference(const Vec3& p) const {
  switch (kind_) {
    case Kind::none:
      return p;
    case Kind::orthotropic:
      return center_ + (p - center_).cwiseAbs();
    case Kind::cubic: {
      Vec3 r = (p - center_).cwiseAbs();
      std::sort(r.data(), r.data() + 3, std::greater<>());
      return center_ + r;
    }
    case Kind::planes:
      break;
  }
  return reflect_by_planes(p);
}

Vec3 SymmetryGroup::reflect_by_planes(const Vec3& p) const {
  Vec3 r = p - center_;
  // Each sweep fixes at least one violated half-space; a finite reflection
  // group settles in a bounded number of sweeps.
  const int max_sweeps = 4 * static_cast<int>(normals_.size()) + 4;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool changed = false;
    for (const Vec3& n : normals_) {
      const double s = n.dot(r);
      if (s < -1e-14) {
        r -= 2.0 * s * n;
        changed = true;
      }
    }
    if (!changed) {
      break;
    }
  }
  return center_ + r;
}

bool SymmetryGroup::in_reference(const Vec3& p, double tol) const {
  const Vec3 r = p - center_;
  return std::all_of(normals_.begin(), normals_.end(),
                     [&](const Vec3& n) { return n.dot(r) >= -tol; });
}

double SymmetryGroup::reference_share(const Vec3& p, double tol) const {
  if (!in_reference(p, tol)) {
    return 0.0;
  }
  const Vec3 r = p - center_;
  if (kind_ == Kind::cubic) {
    // |stabilizer| in O_h: sign flips of zero coordinates times permutations
    // of equal magnitudes.
    Vec3 a = r.cwiseAbs();
    std::sort(a.data(), a.data() + 3, std::greater<>());
    double mult = 1.0;
    for (int d = 0; d < 3; ++d) {
      if (a[d] <= tol) {
        mult *= 2.0;
      }
    }
    int run = 1;
    for (int d = 1; d <= 3; ++d) {
      if (d < 3 && std::abs(a[d] - a[d - 1]) <= tol) {
        ++run;
      } else {
        for (int f = 2; f <= run; ++f) {
          mult *= f;
        }
        run = 1;
      }
    }
    return 1.0 / mult;
  }
  double mult = 1.0;
  for (const Vec3& n : normals_) {
    if (std::abs(n.dot(r)) <= tol) {
      mult *= 2.0;
    }
  }
  return 1.0 / mult;
}

std::vector<Mat3> SymmetryGroup::group_elements() const {
  std::vector<Mat3> gens;
  for (const Vec3& n : normals_) {
    gens.push_back(Mat3::Identity() - 2.0 * n * n.transpose());
  }
  std::vector<Mat3> elems{Mat3::Identity()};
  auto known = [&elems](const Mat3& m) {
    return std::any_of(elems.begin(), elems.end(), [&](const Mat3& e) {
      return (e - m).cwiseAbs().maxCoeff() < 1e-9;
    });
  };
  for (std::size_t head = 0; head < elems.size(); ++head) {
    for (const Mat3& g : gens) {
      Mat3 m = g * elems[head];
      if (!known(m)) {
        elems.push_back(m);
        if (elems.size() > 4096) {
          throw ConfigError("symmetry planes do not generate a finite group");
        }
      }
    }
  }
  return elems;
}

//---------------------------------------------------------------------------//
// Materials
//---------------------------------------------------------------------------//

Voigt isotropic_stiffness(double youngs_modulus, double poisson_ratio) {
  const double e = youngs_modulus, nu = poisson_ratio;
  const double lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  const double mu = e / (2.0 * (1.0 + nu));
  Voigt c = Voigt::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      c(i, j) = lambda;
    }
    c(i, i) = lambda + 2.0 * mu;
    c(i + 3, i + 3) = mu;
  }
  return c;
}

namespace {
void check_material(const Material& m, const std::string& label) {
  if (!(m.youngs_modulus > 0.0) || !(m.poisson_ratio > -1.0 && m.poisson_ratio < 0.5)) {
    throw ConfigError(label + ": elastic constants do not give a positive definite tensor");
  }
}
}  // namespace

MaterialSet::MaterialSet(std::vector<Material> materials, Material ersatz)
    : materials_(std::move(materials)) {
  if (materials_.empty()) {
    throw ConfigError("at least one material is required");
  }
  check_material(ersatz, "ersatz material");
  ersatz_ = isotropic_stiffness(ersatz.youngs_modulus, ersatz.poisson_ratio);
  for (std::size_t i = 0; i < materials_.size(); ++i) {
    const auto& m = materials_[i];
    const std::string label = "material " + std::to_string(i + 1);
    check_material(m, label);
    if (!(m.density > 0.0)) {
      throw ConfigError(label + ": density must be positive");
    }
    if (!(ersatz.youngs_modulus < m.youngs_modulus)) {
      throw ConfigError("ersatz material must be weaker than " + label);
    }
    stiffness_.push_back(isotropic_stiffness(m.youngs_modulus, m.poisson_ratio));
    max_density_ = std::max(max_density_, m.density);
  }
}

//---------------------------------------------------------------------------//
// Scalar kernels
//---------------------------------------------------------------------------//

SegmentDistance distance_to_segment_with_gradient(const Vec3& x0, const Vec3& xf,
                                                  const Vec3& p) {
  SegmentDistance out;
  const Vec3 a = xf - x0;
  const Vec3 b = p - x0;
  const double ab = a.dot(b);
  const double aa = a.dot(a);
  if (ab <= 0.0 || aa == 0.0) {
    out.value = b.norm();
    if (out.value > 0.0) {
      out.d_x0 = -b / out.value;
    }
    return out;
  }
  if (ab >= aa) {
    const Vec3 e = p - xf;
    out.value = e.norm();
    if (out.value > 0.0) {
      out.d_xf = -e / out.value;
    }
    return out;
  }
  const double t = ab / aa;
  const Vec3 g = b - t * a;
  out.value = g.norm();
  if (out.value > 0.0) {
    const Vec3 unit = g / out.value;
    out.d_x0 = -(1.0 - t) * unit;
    out.d_xf = -t * unit;
  }
  return out;
}

double distance_to_segment(const Vec3& x0, const Vec3& xf, const Vec3& p) {
  const Vec3 a = xf - x0;
  const Vec3 b = p - x0;
  const double ab = a.dot(b);
  const double aa = a.dot(a);
  if (ab <= 0.0 || aa == 0.0) {
    return b.norm();
  }
  if (ab >= aa) {
    return (p - xf).norm();
  }
  return (b - (ab / aa) * a).norm();
}

double signed_distance(const Bar& bar, const Vec3& p) {
  return distance_to_segment(bar.x0, bar.xf, p) - 0.5 * bar.width;
}

double bar_density(double phi, double r) {
  if (phi > r) {
    return 0.0;
  }
  if (phi < -r) {
    return 1.0;
  }
  const double s = phi / r;
  return 0.5 + 0.25 * s * s * s - 0.75 * s;
}

double bar_density_derivative(double phi, double r) {
  if (phi > r || phi < -r) {
    return 0.0;
  }
  const double s = phi / r;
  return (0.75 * s * s - 0.75) / r;
}

double smooth_heaviside(double x, double eps, double p_exp) {
  if (x < -eps) {
    return 0.0;
  }
  if (x > eps) {
    return 1.0;
  }
  const double base =
      0.5 + x / (2.0 * eps) + std::sin(std::numbers::pi * x / eps) / (2.0 * std::numbers::pi);
  return std::pow(base, p_exp);
}

double smooth_heaviside_derivative(double x, double eps, double p_exp) {
  if (x < -eps || x > eps) {
    return 0.0;
  }
  const double base =
      0.5 + x / (2.0 * eps) + std::sin(std::numbers::pi * x / eps) / (2.0 * std::numbers::pi);
  const double dbase = (1.0 + std::cos(std::numbers::pi * x / eps)) / (2.0 * eps);
  if (base <= 0.0) {
    return 0.0;
  }
  return p_exp * std::pow(base, p_exp - 1.0) * dbase;
}

namespace {
double shifted_log_sum_exp(std::span<const double> values, double k, double& shift) {
  if (values.empty()) {
    throw std::invalid_argument("KS aggregation of an empty set");
  }
  shift = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) {
    sum += std::exp(k * (v - shift));
  }
  return std::log(sum);
}
}  // namespace

double ks_max(std::span<const double> values, double k) {
  double shift = 0.0;
  const double lse = shifted_log_sum_exp(values, k, shift);
  return shift + lse / k;
}

double lks_max(std::span<const double> values, double k) {
  double shift = 0.0;
  const double lse = shifted_log_sum_exp(values, k, shift);
  return shift + (lse - std::log(static_cast<double>(values.size()))) / k;
}

Eigen::VectorXd ks_weights(std::span<const double> values, double k) {
  double shift = 0.0;
  shifted_log_sum_exp(values, k, shift);
  Eigen::VectorXd w(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    w[i] = std::exp(k * (values[i] - shift));
  }
  return w / w.sum();
}

Eigen::VectorXd material_weights(std::span<const double> alpha) {
  const int nm = static_cast<int>(alpha.size());
  Eigen::VectorXd w(nm);
  for (int i = 0; i < nm; ++i) {
    double prod = alpha[i];
    for (int j = 0; j < nm; ++j) {
      if (j != i) {
        prod *= 1.0 - alpha[j];
      }
    }
    w[i] = prod;
  }
  return w;
}

Eigen::MatrixXd material_weights_jacobian(std::span<const double> alpha) {
  const int nm = static_cast<int>(alpha.size());
  Eigen::MatrixXd jac(nm, nm);
  for (int i = 0; i < nm; ++i) {
    for (int j = 0; j < nm; ++j) {
      double prod = (i == j) ? 1.0 : -alpha[i];
      for (int l = 0; l < nm; ++l) {
        if (l != i && l != j) {
          prod *= 1.0 - alpha[l];
        }
      }
      jac(i, j) = prod;
    }
  }
  return jac;
}

//---------------------------------------------------------------------------//
// Effective densities
//---------------------------------------------------------------------------//

namespace {

struct ActiveBar {
  int bar;
  SegmentDistance dist;
  double phi;
  double h, dh_dphi;
  double rho, drho_dphi;
  double size_sum;
  Eigen::VectorXd weights;
};

Eigen::VectorXd evaluate_point(std::span<const Bar> bars, const Vec3& p,
                               const ProjectionParams& params,
                               std::vector<BarDerivative>* grad) {
  const int nb = static_cast<int>(bars.size());
  const int nm = nb > 0 ? static_cast<int>(bars[0].alpha.size()) : 0;
  const double r = params.window.radius;
  const double eps = params.heaviside_eps;
  const double support = params.support();

  thread_local std::vector<double> v;
  thread_local std::vector<ActiveBar> active;
  v.assign(nb, 0.0);
  active.clear();

  Eigen::VectorXd numer = Eigen::VectorXd::Zero(nm);
  double a_sum = 0.0;
  for (int q = 0; q < nb; ++q) {
    const Bar& bar = bars[q];
    ActiveBar ab;
    ab.dist = grad ? distance_to_segment_with_gradient(bar.x0, bar.xf, p)
                   : SegmentDistance{distance_to_segment(bar.x0, bar.xf, p)};
    ab.phi = ab.dist.value - 0.5 * bar.width;
    if (ab.phi >= support) {
      continue;
    }
    ab.bar = q;
    ab.h = smooth_heaviside(-ab.phi, eps, params.heaviside_p);
    ab.dh_dphi = -smooth_heaviside_derivative(-ab.phi, eps, params.heaviside_p);
    ab.rho = bar_density(ab.phi, r);
    ab.drho_dphi = bar_density_derivative(ab.phi, r);
    ab.size_sum = 0.0;
    for (double a : bar.alpha) {
      ab.size_sum += a;
    }
    ab.weights = material_weights(bar.alpha);
    v[q] = ab.h * ab.size_sum;
    a_sum += v[q];
    numer += ab.h * ab.rho * ab.weights;
    active.push_back(std::move(ab));
  }

  if (nb == 0) {
    return Eigen::VectorXd::Zero(nm);
  }
  const double ks = ks_max(v, params.ks_k);
  const double denom = a_sum + 1.0 - ks;
  const Eigen::VectorXd rho = numer / denom;

  if (grad) {
    const Eigen::VectorXd sigma = ks_weights(v, params.ks_k);
    const int nv = vars_per_bar(nm);
    for (const ActiveBar& ab : active) {
      if (ab.h == 0.0 && ab.dh_dphi == 0.0) {
        // rho_q may be nonzero when eps < r, but the Heaviside gate zeroes it.
        continue;
      }
      const Bar& bar = bars[ab.bar];
      BarDerivative bd{ab.bar, Eigen::MatrixXd::Zero(nm, nv)};
      const double one_minus_sigma = 1.0 - sigma[ab.bar];

      // Geometry: everything flows through phi.
      const Eigen::VectorXd dnumer_dphi =
          (ab.dh_dphi * ab.rho + ab.h * ab.drho_dphi) * ab.weights;
      const double ddenom_dphi = ab.dh_dphi * ab.size_sum * one_minus_sigma;
      const Eigen::VectorXd drho_dphi = (dnumer_dphi - rho * ddenom_dphi) / denom;
      for (int d = 0; d < 3; ++d) {
        bd.d_rho.col(d) = drho_dphi * ab.dist.d_x0[d];
        bd.d_rho.col(3 + d) = drho_dphi * ab.dist.d_xf[d];
      }

      // Size variables.
      const Eigen::MatrixXd wjac = material_weights_jacobian(bar.alpha);
      const double ddenom_dalpha = ab.h * one_minus_sigma;
      for (int j = 0; j < nm; ++j) {
        bd.d_rho.col(6 + j) =
            (ab.h * ab.rho * wjac.col(j) - rho * ddenom_dalpha) / denom;
      }
      grad->push_back(std::move(bd));
    }
  }
  return rho;
}

}  // namespace

Eigen::VectorXd effective_densities(std::span<const Bar> bars, const Vec3& p,
                                    const ProjectionParams& params) {
  return evaluate_point(bars, p, params, nullptr);
}

Eigen::VectorXd effective_densities_with_gradient(std::span<const Bar> bars,
                                                  const Vec3& p,
                                                  const ProjectionParams& params,
                                                  std::vector<BarDerivative>& grad) {
  grad.clear();
  return evaluate_point(bars, p, params, &grad);
}

Voigt interpolate_elasticity(const Eigen::Ref<const Eigen::VectorXd>& rho,
                             const MaterialSet& mats) {
  Voigt c = mats.ersatz_stiffness();
  for (int i = 0; i < mats.size(); ++i) {
    c += (mats.stiffness(i) - mats.ersatz_stiffness()) * rho[i];
  }
  return c;
}

std::vector<std::vector<int>> sparsity_map(std::span<const Bar> bars,
                                           const UnitCellGrid& grid,
                                           const SymmetryGroup& sym,
                                           const ProjectionParams& params,
                                           double margin) {
  std::vector<std::vector<int>> lists(bars.size());
  const double support = params.support();
  for (int e = 0; e < grid.num_elements(); ++e) {
    const Vec3 p = sym.reflect_to_reference(grid.centroid(e));
    for (std::size_t q = 0; q < bars.size(); ++q) {
      const Bar& b = bars[q];
      if (distance_to_segment(b.x0, b.xf, p) - 0.5 * b.width < support + margin) {
        lists[q].push_back(e);
      }
    }
  }
  return lists;
}

ProjectedField project_field(std::span<const Bar> bars, const UnitCellGrid& grid,
                             const SymmetryGroup& sym, const ProjectionParams& params,
                             int num_materials, bool with_gradient) {
  const int ne = grid.num_elements();
  ProjectedField field;
  field.rho = Eigen::MatrixXd::Zero(ne, num_materials);
  if (bars.empty()) {
    return field;
  }
  std::vector<std::vector<BarDerivative>> per_element(with_gradient ? ne : 0);

#pragma omp parallel for schedule(static)
  for (int e = 0; e < ne; ++e) {
    const Vec3 p = sym.reflect_to_reference(grid.centroid(e));
    if (with_gradient) {
      field.rho.row(e) =
          effective_densities_with_gradient(bars, p, params, per_element[e]).transpose();
    } else {
      field.rho.row(e) = effective_densities(bars, p, params).transpose();
    }
  }

  if (with_gradient) {
    for (int e = 0; e < ne; ++e) {
      for (auto& bd : per_element[e]) {
        field.derivatives.push_back({e, bd.bar, std::move(bd.d_rho)});
      }
    }
  }
  return field;
}

}  // namespace latticeopt
