#include "latticeopt/sensitivities.hpp"

#include <cmath>

namespace latticeopt {

ProblemKind parse_problem(const std::string& name) {
  if (name == "max_bulk") {
    return ProblemKind::max_bulk;
  }
  if (name == "max_shear") {
    return ProblemKind::max_shear;
  }
  if (name == "min_poisson") {
    return ProblemKind::min_poisson;
  }
  throw ConfigError("unknown problem '" + name + "' (max_bulk, max_shear, min_poisson)");
}

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::max_bulk:
      return "max_bulk";
    case ProblemKind::max_shear:
      return "max_shear";
    case ProblemKind::min_poisson:
      return "min_poisson";
  }
  return "?";
}

double objective_value(ProblemKind kind, const Voigt& ch) {
  switch (kind) {
    case ProblemKind::max_bulk:
      return -bulk_modulus(ch);
    case ProblemKind::max_shear:
      return -shear_modulus(ch);
    case ProblemKind::min_poisson:
      return poisson_ratio(ch);
  }
  return 0.0;
}

Voigt bulk_weights() {
  Voigt w = Voigt::Zero();
  w.topLeftCorner<3, 3>().setConstant(1.0 / 9.0);
  return w;
}

Voigt objective_weights(ProblemKind kind, const Voigt& ch) {
  Voigt w = Voigt::Zero();
  switch (kind) {
    case ProblemKind::max_bulk:
      return -bulk_weights();
    case ProblemKind::max_shear:
      for (int i = 3; i < 6; ++i) {
        w(i, i) = -1.0 / 3.0;
      }
      return w;
    case ProblemKind::min_poisson: {
      const double a = ch(0, 1), b = ch(5, 5);
      const double den = 2.0 * (a + b) * (a + b);
      if (den == 0.0) {
        throw std::domain_error("Poisson's ratio undefined: C1122 + C1212 = 0");
      }
      w(0, 1) = b / den;
      w(5, 5) = -a / den;
      return w;
    }
  }
  return w;
}

Eigen::VectorXd objective_gradient(ProblemKind kind, const Voigt& ch,
                                   const std::vector<Voigt>& dch_dz) {
  const Voigt w = objective_weights(kind, ch);
  Eigen::VectorXd g(dch_dz.size());
  for (std::size_t v = 0; v < dch_dz.size(); ++v) {
    g[v] = w.cwiseProduct(dch_dz[v]).sum();
  }
  return g;
}

Eigen::VectorXd chain_density_gradient(const ProjectedField& field,
                                       const Eigen::MatrixXd& d_rho, const DesignVector& dv) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dv.size());
  const int nv = vars_per_bar(dv.num_materials());
  for (const auto& entry : field.derivatives) {
    const int o = dv.bar_offset(entry.bar);
    g.segment(o, nv) += entry.d_rho.transpose() * d_rho.row(entry.element).transpose();
  }
  for (int i = 0; i < dv.size(); ++i) {
    g[i] *= dv.range(i);
  }
  return g;
}

bool near_projection_kink(std::span<const Bar> bars, const UnitCellGrid& grid,
                          const SymmetryGroup& sym, const ProjectionParams& params,
                          double tol) {
  const double r = params.window.radius, eps = params.heaviside_eps;
  for (int e = 0; e < grid.num_elements(); ++e) {
    const Vec3 p = sym.reflect_to_reference(grid.centroid(e));
    for (const Bar& b : bars) {
      const double d = distance_to_segment(b.x0, b.xf, p);
      const double phi = d - 0.5 * b.width;
      if (d < tol || std::abs(std::abs(phi) - r) < tol || std::abs(std::abs(phi) - eps) < tol) {
        return true;
      }
    }
  }
  return false;
}

//---------------------------------------------------------------------------//

double Evaluation::constraint(int index) const {
  switch (index) {
    case kWeight:
      return w_f;
    case kDiscreteness:
      return g_d;
    case kExclusion:
      return g_m;
    case kNoCut:
      return g_n;
    case kBulk:
      return eff.K;
    default:
      throw std::out_of_range("constraint index");
  }
}

Evaluator::Evaluator(Model model)
    : model_(std::move(model)),
      no_cut_(model_.grid, model_.symmetry, model_.projection.window.radius,
              model_.projection.ks_k) {}

Evaluation Evaluator::evaluate(const DesignVector& dv, bool with_gradient,
                               const CellProblemSolution* warm_start) const {
  const Model& m = model_;
  const int nm = m.materials.size();
  const int ne = m.grid.num_elements();
  const auto bars = dv.to_bars(m.bar_width);

  Evaluation ev;
  const ProjectedField field =
      project_field(bars, m.grid, m.symmetry, m.projection, nm, with_gradient);
  ev.rho = field.rho;

  std::vector<Voigt> elasticity(ne);
  for (int e = 0; e < ne; ++e) {
    elasticity[e] = interpolate_elasticity(field.rho.row(e).transpose(), m.materials);
  }
  ev.solution = assemble_and_solve(m.grid, elasticity, m.solver, warm_start);
  const StrainField strains = element_strains(m.grid, ev.solution);
  ev.eff = effective_tensor(elasticity, strains);
  ev.f = objective_value(m.problem, ev.eff.CH);
  ev.voigt_bound = voigt_bulk_bound(m.grid, elasticity);

  ev.w_f = weight_fraction(field.rho, m.grid, m.materials);
  std::vector<double> alpha;
  alpha.reserve(static_cast<std::size_t>(dv.num_bars()) * nm);
  for (const Bar& b : bars) {
    alpha.insert(alpha.end(), b.alpha.begin(), b.alpha.end());
  }
  ev.g_d = discreteness(alpha, m.projection.ks_k);
  ev.g_m = mutual_exclusion(bars, m.projection.ks_k);
  const auto nc = no_cut_.evaluate(bars, with_gradient);
  ev.g_n = nc.value;
  ev.no_cut_difference = nc.difference;

  if (!with_gradient) {
    return ev;
  }
  ev.has_gradient = true;
  GradientBundle& gb = ev.grad;
  const int n = dv.size();

  // Per-element derivatives of the objective and of K with respect to rho.
  const Voigt wf = objective_weights(m.problem, ev.eff.CH);
  const Voigt wk = bulk_weights();
  Eigen::MatrixXd df_drho(ne, nm), dk_drho(ne, nm);
  std::vector<Voigt> delta(nm);
  for (int i = 0; i < nm; ++i) {
    delta[i] = m.materials.stiffness(i) - m.materials.ersatz_stiffness();
  }
#pragma omp parallel for schedule(static)
  for (int e = 0; e < ne; ++e) {
    for (int i = 0; i < nm; ++i) {
      const Voigt dch = strains.element_energy(e, delta[i]) / strains.cell_volume;
      df_drho(e, i) = wf.cwiseProduct(dch).sum();
      dk_drho(e, i) = wk.cwiseProduct(dch).sum();
    }
  }
  gb.grad_f = chain_density_gradient(field, df_drho, dv);

  gb.grad_g.assign(kNumConstraints, Eigen::VectorXd::Zero(n));
  gb.grad_g[kWeight] =
      chain_density_gradient(field, weight_fraction_gradient(m.grid, m.materials), dv);
  gb.grad_g[kBulk] = chain_density_gradient(field, dk_drho, dv);

  const Eigen::VectorXd dgd = discreteness_gradient(alpha, m.projection.ks_k);
  const Eigen::VectorXd dgm = mutual_exclusion_gradient(bars, m.projection.ks_k);
  for (int q = 0; q < dv.num_bars(); ++q) {
    const int o = dv.bar_offset(q);
    for (int i = 0; i < nm; ++i) {
      gb.grad_g[kDiscreteness][o + 6 + i] = dgd[q * nm + i] * dv.range(o + 6 + i);
      gb.grad_g[kExclusion][o + 6 + i] = dgm[q] * dv.range(o + 6 + i);
    }
    for (int v = 0; v < 6; ++v) {
      gb.grad_g[kNoCut][o + v] = nc.gradient(q, v) * dv.range(o + v);
    }
  }

  gb.touched.assign(dv.num_bars(), {});
  for (const auto& entry : field.derivatives) {
    gb.touched[entry.bar].push_back(entry.element);
  }
  return ev;
}

}  // namespace latticeopt
