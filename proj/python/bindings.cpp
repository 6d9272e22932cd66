#include "latticeopt/driver.hpp"
#include "latticeopt/export.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace latticeopt;

namespace {

py::dict tensor_dict(const Evaluation& ev) {
  py::dict d;
  d["CH"] = Eigen::MatrixXd(ev.eff.CH);
  d["K"] = ev.eff.K;
  d["G"] = ev.eff.G;
  d["nu"] = ev.eff.nu;
  d["f"] = ev.f;
  d["w_f"] = ev.w_f;
  d["g_d"] = ev.g_d;
  d["g_m"] = ev.g_m;
  d["g_n"] = ev.g_n;
  d["voigt_bound"] = ev.voigt_bound;
  d["rho"] = ev.rho;
  return d;
}

py::dict record_dict(const IterationRecord& r) {
  py::dict d;
  d["iteration"] = r.iteration;
  d["f"] = r.f;
  d["K"] = r.K;
  d["G"] = r.G;
  d["nu"] = r.nu;
  d["w_f"] = r.w_f;
  d["g_d"] = r.g_d;
  d["g_m"] = r.g_m;
  d["g_n"] = r.g_n;
  d["eps_d"] = r.eps_d;
  d["eps_m"] = r.eps_m;
  d["delta_f"] = r.delta_f;
  d["wall_time"] = r.wall_time;
  return d;
}

const char* status_name(RunStatus s) {
  switch (s) {
    case RunStatus::converged:
      return "converged";
    case RunStatus::max_iterations:
      return "max_iterations";
    case RunStatus::infeasible:
      return "infeasible";
    case RunStatus::solver_failure:
      return "solver_failure";
  }
  return "?";
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Lattice unit-cell optimization core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

  py::class_<Bar>(m, "Bar")
      .def(py::init<>())
      .def(py::init([](const Vec3& x0, const Vec3& xf, double w, std::vector<double> alpha) {
             return Bar{x0, xf, w, std::move(alpha)};
           }),
           py::arg("x0"), py::arg("xf"), py::arg("width"), py::arg("alpha"))
      .def_readwrite("x0", &Bar::x0)
      .def_readwrite("xf", &Bar::xf)
      .def_readwrite("width", &Bar::width)
      .def_readwrite("alpha", &Bar::alpha)
      .def("__repr__", [](const Bar& b) {
        return "Bar(x0=[" + std::to_string(b.x0[0]) + ", " + std::to_string(b.x0[1]) + ", " +
               std::to_string(b.x0[2]) + "], xf=[" + std::to_string(b.xf[0]) + ", " +
               std::to_string(b.xf[1]) + ", " + std::to_string(b.xf[2]) + "])";
      });

  py::class_<RunConfig>(m, "RunConfig")
      .def_property_readonly("problem", [](const RunConfig& c) { return to_string(c.problem); })
      .def_readwrite("grid_n", &RunConfig::grid_n)
      .def_readwrite("cell_edge", &RunConfig::cell_edge)
      .def_readwrite("bar_count", &RunConfig::bar_count)
      .def_readwrite("bar_width", &RunConfig::bar_width)
      .def_readwrite("bar_seed", &RunConfig::bar_seed)
      .def_readwrite("max_iters", &RunConfig::max_iters)
      .def_readwrite("objtol", &RunConfig::objtol)
      .def_readwrite("move_limit", &RunConfig::move_limit)
      .def_readwrite("output_dir", &RunConfig::output_dir)
      .def_readwrite("fd_samples", &RunConfig::fd_samples)
      .def_readwrite("bars", &RunConfig::bars)
      .def_property_readonly("num_materials", &RunConfig::num_materials)
      .def("to_text", [](const RunConfig& c) { return format_config(c); });

  m.def("parse_config", [](const std::string& text) { return parse_config(text); },
        py::arg("text"), "Parse configuration text.");
  m.def("load_config", &load_config, py::arg("path"));
  m.def("initial_design", &initial_design, py::arg("config"));

  m.def(
      "homogenize",
      [](const RunConfig& c) {
        py::gil_scoped_release release;
        HomogenizeResult r = homogenize(c);
        py::gil_scoped_acquire acquire;
        py::dict d = tensor_dict(r.evaluation);
        d["bars"] = r.bars;
        return d;
      },
      py::arg("config"), "Effective tensor and constraint values of the configured design.");

  m.def(
      "effective_tensor",
      [](int n, double edge, const Eigen::MatrixXd& rho, const std::vector<double>& youngs,
         const std::vector<double>& poisson, double ersatz_e) {
        if (rho.rows() != static_cast<Eigen::Index>(n) * n * n ||
            rho.cols() != static_cast<Eigen::Index>(youngs.size()) ||
            youngs.size() != poisson.size()) {
          throw ConfigError("rho must be n^3 x num_materials with matching material lists");
        }
        std::vector<Material> mats;
        for (std::size_t i = 0; i < youngs.size(); ++i) {
          mats.push_back({youngs[i], poisson[i], 1.0});
        }
        const MaterialSet set(mats, {ersatz_e, 0.3, 1.0});
        const UnitCellGrid grid = build_grid(n, edge);
        std::vector<Voigt> field(grid.num_elements());
        for (int e = 0; e < grid.num_elements(); ++e) {
          field[e] = interpolate_elasticity(rho.row(e).transpose(), set);
        }
        const EffectiveTensor t = effective_tensor(grid, field, assemble_and_solve(grid, field));
        py::dict d;
        d["CH"] = Eigen::MatrixXd(t.CH);
        d["K"] = t.K;
        d["G"] = t.G;
        d["nu"] = t.nu;
        return d;
      },
      py::arg("n"), py::arg("cell_edge"), py::arg("rho"), py::arg("youngs"),
      py::arg("poisson"), py::arg("ersatz_youngs") = 1e-6,
      "Homogenized tensor of a per-element density field (rows in x-fastest order).");

  m.def(
      "optimize",
      [](const RunConfig& c, const std::function<void(py::dict)>& callback) {
        IterationCallback cb;
        if (callback) {
          cb = [&callback](const IterationRecord& r) {
            py::gil_scoped_acquire acquire;
            callback(record_dict(r));
          };
        }
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_optimization(c, cb);
        }
        py::dict d;
        d["status"] = status_name(r.status);
        d["diagnostic"] = r.diagnostic;
        py::list hist;
        for (const auto& rec : r.history) {
          hist.append(record_dict(rec));
        }
        d["history"] = hist;
        d["bars"] = r.bars;
        d["no_cut_offsets"] = r.no_cut_offsets;
        d["subproblem_stalls"] = r.subproblem_stalls;
        if (r.status != RunStatus::solver_failure) {
          d["initial"] = tensor_dict(r.initial);
          d["final"] = tensor_dict(r.final);
        }
        return d;
      },
      py::arg("config"), py::arg("callback") = nullptr,
      "Run the optimizer; the callback receives one dict per iteration.");

  m.def(
      "check_gradients",
      [](const RunConfig& c) {
        GradientCheckReport r;
        {
          py::gil_scoped_release release;
          r = check_gradients(c);
        }
        py::dict d;
        d["passed"] = r.passed;
        d["max_error"] = r.max_error;
        d["skipped_near_kink"] = r.skipped_near_kink;
        py::list samples;
        for (const auto& s : r.samples) {
          py::dict sd;
          sd["objective"] = s.objective_error;
          sd["constraints"] = s.constraint_error;
          samples.append(sd);
        }
        d["samples"] = samples;
        return d;
      },
      py::arg("config"));

  m.def(
      "export_design",
      [](const RunConfig& c, const std::vector<Bar>& bars, const std::filesystem::path& out) {
        const Model model = make_model(c);
        const ProjectedField field = project_field(bars, model.grid, model.symmetry,
                                                   model.projection, c.num_materials(), false);
        export_design(bars, model.grid, model.symmetry, field.rho, out);
      },
      py::arg("config"), py::arg("bars"), py::arg("out_dir"));
  m.def(
      "read_vtk",
      [](const std::filesystem::path& p) {
        const VtkDensities v = read_vtk(p);
        py::dict d;
        d["n"] = v.n;
        d["spacing"] = v.spacing;
        d["rho"] = v.rho;
        return d;
      },
      py::arg("path"));

  // Scalar kernels.
  m.def("distance_to_segment", &distance_to_segment, py::arg("x0"), py::arg("xf"),
        py::arg("p"));
  m.def("bar_density", &bar_density, py::arg("phi"), py::arg("r"));
  m.def("smooth_heaviside", &smooth_heaviside, py::arg("x"), py::arg("eps"),
        py::arg("p_exp"));
  m.def(
      "ks_max", [](const std::vector<double>& v, double k) { return ks_max(v, k); },
      py::arg("values"), py::arg("k"));
  m.def(
      "lks_max", [](const std::vector<double>& v, double k) { return lks_max(v, k); },
      py::arg("values"), py::arg("k"));
  m.def("isotropic_stiffness", [](double e, double nu) { return Eigen::MatrixXd(isotropic_stiffness(e, nu)); },
        py::arg("youngs"), py::arg("poisson"));
}
