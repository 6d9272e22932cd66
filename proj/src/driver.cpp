#include "latticeopt/driver.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace latticeopt {

namespace {

// Smallest distance from p to the cell faces and the symmetry planes; negative
// outside the reference region.
double region_clearance(const Vec3& p, const SymmetryGroup& sym, double edge) {
  double c = std::min(p.minCoeff(), edge - p.maxCoeff());
  for (const Vec3& n : sym.normals()) {
    c = std::min(c, n.dot(p - sym.center()));
  }
  return c;
}

Vec3 random_unit(std::mt19937& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 d;
  do {
    d = Vec3(g(rng), g(rng), g(rng));
  } while (d.norm() < 1e-12);
  return d.normalized();
}

std::vector<double> default_alpha(const RunConfig& c) {
  if (!c.bar_alpha.empty()) {
    return c.bar_alpha;
  }
  return std::vector<double>(c.num_materials(), 1.0 / c.num_materials());
}

bool all_finite(const Evaluation& ev) {
  if (!std::isfinite(ev.f) || !std::isfinite(ev.w_f) || !std::isfinite(ev.g_d) ||
      !std::isfinite(ev.g_m) || !std::isfinite(ev.g_n)) {
    return false;
  }
  if (ev.has_gradient) {
    if (!ev.grad.grad_f.allFinite()) {
      return false;
    }
    for (const auto& g : ev.grad.grad_g) {
      if (!g.allFinite()) {
        return false;
      }
    }
  }
  return true;
}

// wf* times the largest base-material bulk (or shear) modulus.
double modulus_reference(const RunConfig& c, bool shear) {
  double ref = 0.0;
  for (const Material& m : c.materials) {
    const double e = m.youngs_modulus, nu = m.poisson_ratio;
    ref = std::max(ref, shear ? e / (2.0 * (1.0 + nu)) : e / (3.0 * (1.0 - 2.0 * nu)));
  }
  return c.constraints.wf_star * ref;
}

IterationRecord make_record(int it, const Evaluation& ev, const ConstraintState& s, double df,
                            double wall) {
  IterationRecord r;
  r.iteration = it;
  r.f = ev.f;
  r.K = ev.eff.K;
  r.G = ev.eff.G;
  r.nu = ev.eff.nu;
  r.w_f = ev.w_f;
  r.g_d = ev.g_d;
  r.g_m = ev.g_m;
  r.g_n = ev.g_n;
  r.eps_d = s.eps_d;
  r.eps_m = s.eps_m;
  r.delta_f = df;
  r.wall_time = wall;
  return r;
}

void setup_no_cut(Evaluator& ev, const RunConfig& c, const std::vector<Bar>& bars) {
  if (c.no_cut_offsets) {
    ev.no_cut().set_offsets(*c.no_cut_offsets);
  } else {
    ev.no_cut().calibrate(bars);
  }
}

}  // namespace

std::vector<Bar> initial_design(const RunConfig& c) {
  const SymmetryGroup sym = make_symmetry(c);
  const double edge = c.cell_edge;
  std::vector<Bar> bars;

  if (!c.bars.empty()) {
    const double tol = 1e-9 * edge;
    for (std::size_t q = 0; q < c.bars.size(); ++q) {
      Bar b = c.bars[q];
      for (const Vec3& p : {b.x0, b.xf}) {
        if (region_clearance(p, sym, edge) < -tol) {
          throw ConfigError("bar " + std::to_string(q + 1) +
                            " has an endpoint outside the symmetry reference region");
        }
      }
      if (b.alpha.empty()) {
        b.alpha = default_alpha(c);
      }
      b.width = c.bar_width;
      bars.push_back(std::move(b));
    }
    return bars;
  }

  const double length = c.bar_length * edge;
  // Whole capsule at least w/2 from every bounding plane, plus a sliver.
  const double clearance = 0.5 * c.bar_width + 0.5 * length + 1e-6 * edge;
  std::mt19937 rng(c.bar_seed);
  std::uniform_real_distribution<double> u(0.0, edge);
  const long max_attempts = 1000000;
  for (int q = 0; q < c.bar_count; ++q) {
    long attempts = 0;
    Vec3 p;
    do {
      if (++attempts > max_attempts) {
        throw ConfigError("no room for a bar of width " + std::to_string(c.bar_width) +
                          " inside the symmetry reference region");
      }
      p = Vec3(u(rng), u(rng), u(rng));
    } while (region_clearance(p, sym, edge) < clearance);
    const Vec3 d = random_unit(rng);
    Bar b;
    b.x0 = p - 0.5 * length * d;
    b.xf = p + 0.5 * length * d;
    b.width = c.bar_width;
    b.alpha = default_alpha(c);
    bars.push_back(std::move(b));
  }
  return bars;
}

std::vector<Bar> random_design(const RunConfig& c, std::mt19937& rng) {
  const SymmetryGroup sym = make_symmetry(c);
  std::uniform_real_distribution<double> u(0.0, c.cell_edge), a(0.1, 0.9);
  auto point = [&] {
    Vec3 p;
    do {
      p = Vec3(u(rng), u(rng), u(rng));
    } while (region_clearance(p, sym, c.cell_edge) < 0.0);
    return p;
  };
  std::vector<Bar> bars(c.bar_count);
  for (Bar& b : bars) {
    b.x0 = point();
    b.xf = point();
    b.width = c.bar_width;
    for (int i = 0; i < c.num_materials(); ++i) {
      b.alpha.push_back(a(rng));
    }
  }
  return bars;
}

void write_history_csv(const std::filesystem::path& path,
                       const std::vector<IterationRecord>& history) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) {
    throw std::runtime_error("cannot write " + path.string());
  }
  std::fprintf(f, "iteration,f,K,G,nu,w_f,g_d,g_m,g_n,eps_d,eps_m,delta_f,wall_time\n");
  for (const auto& r : history) {
    std::fprintf(f, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.6f\n",
                 r.iteration, r.f, r.K, r.G, r.nu, r.w_f, r.g_d, r.g_m, r.g_n, r.eps_d, r.eps_m,
                 r.delta_f, r.wall_time);
  }
  if (std::fclose(f) != 0) {
    throw std::runtime_error("error while writing " + path.string());
  }
}

double objective_change(double f, double f_prev) {
  return std::abs(f - f_prev) / std::max(std::abs(f_prev), 1e-3);
}

bool is_feasible(const Evaluation& ev, const RunConfig& c) {
  const ConstraintState& s = c.constraints;
  bool ok = ev.w_f <= s.wf_star + 1e-3 && ev.g_d <= s.eps_d_star && ev.g_m <= s.eps_m_star &&
            ev.g_n <= s.eps_n;
  if (c.problem == ProblemKind::min_poisson) {
    ok = ok && ev.eff.K >= s.k_min;
  }
  return ok;
}

ScaledProblem scale_problem(const Evaluation& ev, const RunConfig& c,
                            const ConstraintState& s) {
  const bool poisson = c.problem == ProblemKind::min_poisson;
  const int m = poisson ? 5 : 4;
  const int n = static_cast<int>(ev.grad.grad_f.size());
  const double fs =
      c.objective_scale /
      (poisson ? 1.0 : modulus_reference(c, c.problem == ProblemKind::max_shear));
  // Reference volume for the no-cut mismatch: a sphere of the bar width.
  const double vref = std::numbers::pi * std::pow(c.bar_width, 3) / 6.0;
  const auto& gg = ev.grad.grad_g;

  ScaledProblem p;
  p.f0 = fs * ev.f;
  p.df0 = fs * ev.grad.grad_f;
  p.g.resize(m);
  p.dg.resize(m, n);
  p.g[0] = ev.w_f / s.wf_star - 1.0;
  p.dg.row(0) = gg[kWeight].transpose() / s.wf_star;
  p.g[1] = ev.g_d - s.eps_d;
  p.dg.row(1) = gg[kDiscreteness].transpose();
  p.g[2] = ev.g_m - s.eps_m;
  p.dg.row(2) = gg[kExclusion].transpose();
  p.g[3] = (ev.g_n - s.eps_n) / vref;
  p.dg.row(3) = gg[kNoCut].transpose() / vref;
  if (poisson) {
    // Scaled like a bulk objective; dividing by K_min instead gives rows
    // hundreds of times larger than the others and stalls the subproblem.
    const double kref = modulus_reference(c, false);
    p.g[4] = (s.k_min - ev.eff.K) / kref;
    p.dg.row(4) = -gg[kBulk].transpose() / kref;
  }
  return p;
}

RunResult run_optimization(const RunConfig& c, const IterationCallback& on_iteration) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - t0).count(); };

  Evaluator evaluator(make_model(c));
  RunResult res;
  res.bars = initial_design(c);
  setup_no_cut(evaluator, c, res.bars);
  res.no_cut_offsets = evaluator.no_cut().offsets();
  res.design = DesignVector::from_bars(res.bars, c.num_materials(), c.cell_edge);
  res.state = c.constraints;

  int it = 0;
  try {
    res.initial = evaluator.evaluate(res.design, true);
    if (!all_finite(res.initial)) {
      throw SolverError("non-finite objective, constraint or gradient", 0.0);
    }
    Evaluation cur = res.initial;
    const int n = res.design.size();
    const int m = c.problem == ProblemKind::min_poisson ? 5 : 4;
    Mma mma(n, m);
    bool converged = false;
    for (it = 1; it <= c.max_iters && !converged; ++it) {
      const ScaledProblem sp = scale_problem(cur, c, res.state);
      const auto [lower, upper] = apply_move_limits(res.design.scaled(), c.move_limit);
      res.design.scaled() = mma.update(res.design.scaled(), sp.df0, sp.g, sp.dg, lower, upper);
      res.worst_subproblem_residual =
          std::max(res.worst_subproblem_residual, mma.subproblem_residual());
      res.subproblem_stalls += mma.subproblem_residual() > 1e-6;
      Evaluation next = evaluator.evaluate(res.design, true, &cur.solution);
      if (!all_finite(next)) {
        throw SolverError("non-finite objective, constraint or gradient", 0.0);
      }
      const double df = objective_change(next.f, cur.f);
      res.history.push_back(make_record(it, next, res.state, df, elapsed()));
      res.iterates.push_back(res.design.scaled());
      if (on_iteration) {
        on_iteration(res.history.back());
      }
      converged = it >= 2 && res.state.at_final_limits() && df <= c.objtol &&
                  is_feasible(next, c);
      res.state = continuation_step(res.state, df);
      cur = std::move(next);
    }
    res.final = std::move(cur);
    res.status = converged                       ? RunStatus::converged
                 : is_feasible(res.final, c)     ? RunStatus::max_iterations
                                                 : RunStatus::infeasible;
  } catch (const std::exception& err) {
    res.status = RunStatus::solver_failure;
    res.diagnostic = "iteration " + std::to_string(it) + ": " + err.what();
  }
  res.bars = res.design.to_bars(c.bar_width);
  return res;
}

HomogenizeResult homogenize(const RunConfig& c) {
  Evaluator evaluator(make_model(c));
  HomogenizeResult res;
  res.bars = initial_design(c);
  setup_no_cut(evaluator, c, res.bars);
  res.no_cut_offsets = evaluator.no_cut().offsets();
  res.evaluation = evaluator.evaluate(
      DesignVector::from_bars(res.bars, c.num_materials(), c.cell_edge), false);
  return res;
}

GradientCheckReport check_gradients(const RunConfig& c) {
  Evaluator evaluator(make_model(c));
  const Model& model = evaluator.model();
  std::mt19937 rng(c.fd_seed);
  GradientCheckReport report;

  auto rel_error = [](const Eigen::VectorXd& a, const Eigen::VectorXd& ref) {
    const double scale = ref.cwiseAbs().maxCoeff();
    const double diff = (a - ref).cwiseAbs().maxCoeff();
    return scale > 0.0 ? diff / scale : diff;
  };

  while (static_cast<int>(report.samples.size()) < c.fd_samples) {
    const std::vector<Bar> bars = random_design(c, rng);
    if (near_projection_kink(bars, model.grid, model.symmetry, model.projection,
                             c.fd_kink_tol)) {
      ++report.skipped_near_kink;
      continue;
    }
    evaluator.no_cut().calibrate(bars);
    const DesignVector dv = DesignVector::from_bars(bars, c.num_materials(), c.cell_edge);
    const Evaluation base = evaluator.evaluate(dv, true);

    const int n = dv.size();
    Eigen::VectorXd fd_f(n);
    std::vector<Eigen::VectorXd> fd_g(kNumConstraints, Eigen::VectorXd(n));
    for (int i = 0; i < n; ++i) {
      DesignVector plus = dv, minus = dv;
      plus.scaled()[i] += c.fd_step;
      minus.scaled()[i] -= c.fd_step;
      const Evaluation ep = evaluator.evaluate(plus, false, &base.solution);
      const Evaluation em = evaluator.evaluate(minus, false, &base.solution);
      fd_f[i] = (ep.f - em.f) / (2.0 * c.fd_step);
      for (int k = 0; k < kNumConstraints; ++k) {
        fd_g[k][i] = (ep.constraint(k) - em.constraint(k)) / (2.0 * c.fd_step);
      }
    }
    GradientSample s;
    s.objective_error = rel_error(base.grad.grad_f, fd_f);
    report.max_error = std::max(report.max_error, s.objective_error);
    for (int k = 0; k < kNumConstraints; ++k) {
      s.constraint_error.push_back(rel_error(base.grad.grad_g[k], fd_g[k]));
      report.max_error = std::max(report.max_error, s.constraint_error.back());
    }
    report.samples.push_back(std::move(s));
  }
  report.passed = report.max_error <= c.fd_tol;
  return report;
}

}  // namespace latticeopt
