#include "latticeopt/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace latticeopt {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) {
    out.push_back(w);
  }
  return out;
}

class LineError {
 public:
  LineError(int line, std::string key) : line_(line), key_(std::move(key)) {}
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("line " + std::to_string(line_) + " (" + key_ + "): " + msg);
  }

 private:
  int line_;
  std::string key_;
};

double to_double(const std::string& word, const LineError& where) {
  double v = 0.0;
  const auto* end = word.data() + word.size();
  const auto res = std::from_chars(word.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    where.fail("'" + word + "' is not a number");
  }
  return v;
}

std::vector<double> to_doubles(const std::string& value, const LineError& where) {
  std::vector<double> out;
  for (const auto& w : split_words(value)) {
    out.push_back(to_double(w, where));
  }
  if (out.empty()) {
    where.fail("expected at least one number");
  }
  return out;
}

double one_double(const std::string& value, const LineError& where) {
  const auto v = to_doubles(value, where);
  if (v.size() != 1) {
    where.fail("expected a single number");
  }
  return v[0];
}

long one_integer(const std::string& value, const LineError& where) {
  const double v = one_double(value, where);
  if (v != std::floor(v)) {
    where.fail("expected an integer");
  }
  return static_cast<long>(v);
}

double positive(double v, const LineError& where) {
  if (!(v > 0.0)) {
    where.fail("must be positive");
  }
  return v;
}

double non_negative(double v, const LineError& where) {
  if (!(v >= 0.0)) {
    where.fail("must be non-negative");
  }
  return v;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::vector<double> e_list, nu_list, density_list;
  std::vector<std::pair<int, std::vector<double>>> bar_lines;
  bool eps_d_set = false;

  using Setter = std::function<void(const std::string&, const LineError&)>;
  const std::map<std::string, Setter> setters = {
      {"problem", [&](const std::string& v, const LineError& w) {
         try {
           cfg.problem = parse_problem(v);
         } catch (const ConfigError& err) {
           w.fail(err.what());
         }
       }},
      {"grid.n", [&](const std::string& v, const LineError& w) {
         cfg.grid_n = static_cast<int>(one_integer(v, w));
         if (cfg.grid_n < 2) {
           w.fail("grid needs at least 2 elements per edge");
         }
       }},
      {"cell.edge", [&](auto& v, auto& w) { cfg.cell_edge = positive(one_double(v, w), w); }},
      {"materials.E", [&](auto& v, auto& w) { e_list = to_doubles(v, w); }},
      {"materials.nu", [&](auto& v, auto& w) { nu_list = to_doubles(v, w); }},
      {"materials.density", [&](auto& v, auto& w) { density_list = to_doubles(v, w); }},
      {"ersatz.E", [&](auto& v, auto& w) { cfg.ersatz.youngs_modulus = positive(one_double(v, w), w); }},
      {"ersatz.nu", [&](auto& v, auto& w) { cfg.ersatz.poisson_ratio = one_double(v, w); }},
      {"weight_fraction", [&](auto& v, auto& w) {
         cfg.constraints.wf_star = positive(one_double(v, w), w);
         if (cfg.constraints.wf_star > 1.0) {
           w.fail("must not exceed 1");
         }
       }},
      {"k_min", [&](auto& v, auto& w) { cfg.constraints.k_min = positive(one_double(v, w), w); }},
      {"symmetry", [&](const std::string& v, const LineError& w) {
         if (v != "cubic" && v != "orthotropic" && v != "none" && v != "planes") {
           w.fail("expected cubic, orthotropic, none or planes");
         }
         cfg.symmetry = v;
       }},
      {"symmetry.planes", [&](auto& v, auto& w) {
         const auto x = to_doubles(v, w);
         if (x.size() % 3 != 0) {
           w.fail("plane normals need three components each");
         }
         cfg.symmetry_planes.clear();
         for (std::size_t i = 0; i < x.size(); i += 3) {
           cfg.symmetry_planes.emplace_back(x[i], x[i + 1], x[i + 2]);
         }
       }},
      {"bars.count", [&](auto& v, auto& w) {
         cfg.bar_count = static_cast<int>(one_integer(v, w));
         if (cfg.bar_count < 1) {
           w.fail("at least one bar is required");
         }
       }},
      {"bars.width", [&](auto& v, auto& w) { cfg.bar_width = positive(one_double(v, w), w); }},
      {"bars.seed", [&](auto& v, auto& w) { cfg.bar_seed = static_cast<unsigned>(one_integer(v, w)); }},
      {"bars.length", [&](auto& v, auto& w) { cfg.bar_length = non_negative(one_double(v, w), w); }},
      {"bars.alpha", [&](auto& v, auto& w) { cfg.bar_alpha = to_doubles(v, w); }},
      {"eps_d0", [&](auto& v, auto& w) {
         cfg.constraints.eps_d = non_negative(one_double(v, w), w);
         eps_d_set = true;
       }},
      {"eps_d_final", [&](auto& v, auto& w) { cfg.constraints.eps_d_star = non_negative(one_double(v, w), w); }},
      {"eps_m0", [&](auto& v, auto& w) { cfg.constraints.eps_m = non_negative(one_double(v, w), w); }},
      {"eps_m_final", [&](auto& v, auto& w) { cfg.constraints.eps_m_star = non_negative(one_double(v, w), w); }},
      {"eps_n", [&](auto& v, auto& w) { cfg.constraints.eps_n = non_negative(one_double(v, w), w); }},
      {"delta_eps", [&](auto& v, auto& w) { cfg.constraints.delta_eps = positive(one_double(v, w), w); }},
      {"delta_f_star", [&](auto& v, auto& w) { cfg.constraints.delta_f_star = non_negative(one_double(v, w), w); }},
      {"heaviside.p", [&](auto& v, auto& w) {
         cfg.heaviside_p = one_double(v, w);
         if (!(cfg.heaviside_p >= 1.0)) {
           w.fail("must be at least 1");
         }
       }},
      {"heaviside.eps", [&](auto& v, auto& w) { cfg.heaviside_eps = non_negative(one_double(v, w), w); }},
      {"ks.k", [&](auto& v, auto& w) { cfg.ks_k = positive(one_double(v, w), w); }},
      {"move_limit", [&](auto& v, auto& w) { cfg.move_limit = positive(one_double(v, w), w); }},
      {"window.c", [&](auto& v, auto& w) { cfg.window_c = positive(one_double(v, w), w); }},
      {"objtol", [&](auto& v, auto& w) { cfg.objtol = non_negative(one_double(v, w), w); }},
      {"max_iters", [&](auto& v, auto& w) {
         cfg.max_iters = static_cast<int>(one_integer(v, w));
         if (cfg.max_iters < 0) {
           w.fail("must be non-negative");
         }
       }},
      {"solver", [&](const std::string& v, const LineError& w) {
         if (v == "cg") {
           cfg.solver.method = SolverOptions::Method::cg;
         } else if (v == "direct") {
           cfg.solver.method = SolverOptions::Method::direct;
         } else {
           w.fail("expected cg or direct");
         }
       }},
      {"solver.tol", [&](auto& v, auto& w) { cfg.solver.tolerance = positive(one_double(v, w), w); }},
      {"solver.max_iters", [&](auto& v, auto& w) {
         cfg.solver.max_iterations = static_cast<int>(one_integer(v, w));
       }},
      {"objective_scale", [&](auto& v, auto& w) { cfg.objective_scale = positive(one_double(v, w), w); }},
      {"no_cut.offsets", [&](auto& v, auto& w) { cfg.no_cut_offsets = to_doubles(v, w); }},
      {"output.dir", [&](const std::string& v, const LineError& w) {
         if (v.empty()) {
           w.fail("empty path");
         }
         cfg.output_dir = v;
       }},
      {"fd.samples", [&](auto& v, auto& w) { cfg.fd_samples = static_cast<int>(one_integer(v, w)); }},
      {"fd.step", [&](auto& v, auto& w) { cfg.fd_step = positive(one_double(v, w), w); }},
      {"fd.tol", [&](auto& v, auto& w) { cfg.fd_tol = positive(one_double(v, w), w); }},
      {"fd.seed", [&](auto& v, auto& w) { cfg.fd_seed = static_cast<unsigned>(one_integer(v, w)); }},
      {"fd.kink_tol", [&](auto& v, auto& w) { cfg.fd_kink_tol = non_negative(one_double(v, w), w); }},
  };

  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const LineError where(line_no, key);
    if (key == "bar") {
      bar_lines.emplace_back(line_no, to_doubles(value, where));
      continue;
    }
    const auto it = setters.find(key);
    if (it == setters.end()) {
      where.fail("unknown key");
    }
    if (!seen.insert(key).second) {
      where.fail("key given twice");
    }
    it->second(value, where);
  }

  // Materials.
  if (e_list.empty()) {
    throw ConfigError("materials.E is required");
  }
  const std::size_t nm = e_list.size();
  if (nu_list.empty()) {
    nu_list.assign(nm, 0.3);
  }
  if (density_list.empty()) {
    density_list.assign(nm, 1.0);
  }
  if (nu_list.size() != nm || density_list.size() != nm) {
    throw ConfigError("materials.E, materials.nu and materials.density need one entry per material");
  }
  for (std::size_t i = 0; i < nm; ++i) {
    cfg.materials.push_back({e_list[i], nu_list[i], density_list[i]});
  }
  // Validates elastic constants and the ersatz ordering.
  MaterialSet(cfg.materials, cfg.ersatz);

  if (!cfg.bar_alpha.empty()) {
    if (cfg.bar_alpha.size() != nm) {
      throw ConfigError("bars.alpha needs one entry per material");
    }
    for (double a : cfg.bar_alpha) {
      if (a < 0.0 || a > 1.0) {
        throw ConfigError("bars.alpha entries must lie in [0, 1]");
      }
    }
  }
  for (const auto& [ln, v] : bar_lines) {
    const LineError where(ln, "bar");
    if (v.size() != 6 && v.size() != 6 + nm) {
      where.fail("expected x0 y0 z0 xf yf zf followed by " + std::to_string(nm) +
                 " optional size variables");
    }
    Bar b;
    b.x0 = Vec3(v[0], v[1], v[2]);
    b.xf = Vec3(v[3], v[4], v[5]);
    b.width = cfg.bar_width;
    if (v.size() == 6 + nm) {
      b.alpha.assign(v.begin() + 6, v.end());
    }
    for (double a : b.alpha) {
      if (a < 0.0 || a > 1.0) {
        where.fail("size variables must lie in [0, 1]");
      }
    }
    cfg.bars.push_back(std::move(b));
  }
  if (!cfg.bars.empty()) {
    if (seen.count("bars.count") && cfg.bar_count != static_cast<int>(cfg.bars.size())) {
      throw ConfigError("bars.count disagrees with the number of bar lines");
    }
    cfg.bar_count = static_cast<int>(cfg.bars.size());
  }
  if (cfg.no_cut_offsets && static_cast<int>(cfg.no_cut_offsets->size()) != cfg.bar_count) {
    throw ConfigError("no_cut.offsets needs one entry per bar");
  }

  auto& cs = cfg.constraints;
  if (!eps_d_set && cs.eps_d < cs.eps_d_star) {
    cs.eps_d = cs.eps_d_star;
  }
  if (cs.eps_d < cs.eps_d_star || cs.eps_m < cs.eps_m_star) {
    throw ConfigError("initial continuation limits must not be below their final values");
  }
  if (cfg.symmetry == "planes" && cfg.symmetry_planes.empty()) {
    throw ConfigError("symmetry = planes needs symmetry.planes");
  }
  if (cfg.symmetry != "planes" && !cfg.symmetry_planes.empty()) {
    throw ConfigError("symmetry.planes is only used with symmetry = planes");
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& err) {
    throw ConfigError(path.string() + ": " + err.what());
  }
}

std::string format_config(const RunConfig& c, const std::vector<Bar>* bars) {
  std::ostringstream o;
  o << std::setprecision(17);
  auto list = [&o](const char* key, auto get, const auto& items) {
    o << key << " =";
    for (const auto& it : items) {
      o << ' ' << get(it);
    }
    o << '\n';
  };
  o << "problem = " << to_string(c.problem) << '\n';
  o << "grid.n = " << c.grid_n << '\n';
  o << "cell.edge = " << c.cell_edge << '\n';
  list("materials.E", [](const Material& m) { return m.youngs_modulus; }, c.materials);
  list("materials.nu", [](const Material& m) { return m.poisson_ratio; }, c.materials);
  list("materials.density", [](const Material& m) { return m.density; }, c.materials);
  o << "ersatz.E = " << c.ersatz.youngs_modulus << '\n';
  o << "ersatz.nu = " << c.ersatz.poisson_ratio << '\n';
  o << "weight_fraction = " << c.constraints.wf_star << '\n';
  o << "k_min = " << c.constraints.k_min << '\n';
  o << "symmetry = " << c.symmetry << '\n';
  if (!c.symmetry_planes.empty()) {
    o << "symmetry.planes =";
    for (const auto& n : c.symmetry_planes) {
      o << ' ' << n[0] << ' ' << n[1] << ' ' << n[2];
    }
    o << '\n';
  }
  o << "bars.width = " << c.bar_width << '\n';
  o << "bars.seed = " << c.bar_seed << '\n';
  o << "bars.length = " << c.bar_length << '\n';
  if (!c.bar_alpha.empty()) {
    list("bars.alpha", [](double a) { return a; }, c.bar_alpha);
  }
  o << "eps_d0 = " << c.constraints.eps_d << '\n';
  o << "eps_d_final = " << c.constraints.eps_d_star << '\n';
  o << "eps_m0 = " << c.constraints.eps_m << '\n';
  o << "eps_m_final = " << c.constraints.eps_m_star << '\n';
  o << "eps_n = " << c.constraints.eps_n << '\n';
  o << "delta_eps = " << c.constraints.delta_eps << '\n';
  o << "delta_f_star = " << c.constraints.delta_f_star << '\n';
  o << "heaviside.p = " << c.heaviside_p << '\n';
  o << "heaviside.eps = " << c.heaviside_eps << '\n';
  o << "ks.k = " << c.ks_k << '\n';
  o << "move_limit = " << c.move_limit << '\n';
  o << "window.c = " << c.window_c << '\n';
  o << "objtol = " << c.objtol << '\n';
  o << "max_iters = " << c.max_iters << '\n';
  o << "solver = " << (c.solver.method == SolverOptions::Method::cg ? "cg" : "direct") << '\n';
  o << "solver.tol = " << c.solver.tolerance << '\n';
  o << "solver.max_iters = " << c.solver.max_iterations << '\n';
  o << "objective_scale = " << c.objective_scale << '\n';
  o << "output.dir = " << c.output_dir << '\n';
  o << "fd.samples = " << c.fd_samples << '\n';
  o << "fd.step = " << c.fd_step << '\n';
  o << "fd.tol = " << c.fd_tol << '\n';
  o << "fd.seed = " << c.fd_seed << '\n';
  o << "fd.kink_tol = " << c.fd_kink_tol << '\n';
  if (c.no_cut_offsets) {
    list("no_cut.offsets", [](double v) { return v; }, *c.no_cut_offsets);
  }
  const std::vector<Bar>& out_bars = bars ? *bars : c.bars;
  if (out_bars.empty()) {
    o << "bars.count = " << c.bar_count << '\n';
  }
  for (const Bar& b : out_bars) {
    o << "bar = " << b.x0[0] << ' ' << b.x0[1] << ' ' << b.x0[2] << ' ' << b.xf[0] << ' '
      << b.xf[1] << ' ' << b.xf[2];
    for (double a : b.alpha) {
      o << ' ' << a;
    }
    o << '\n';
  }
  return o.str();
}

SymmetryGroup make_symmetry(const RunConfig& c) {
  const Vec3 center = Vec3::Constant(0.5 * c.cell_edge);
  if (c.symmetry == "cubic") {
    return SymmetryGroup::cubic(center);
  }
  if (c.symmetry == "orthotropic") {
    return SymmetryGroup::orthotropic(center);
  }
  if (c.symmetry == "none") {
    return SymmetryGroup::none(center);
  }
  auto sym = SymmetryGroup::from_planes(center, c.symmetry_planes);
  sym.group_elements();  // rejects planes that generate an infinite group
  return sym;
}

Model make_model(const RunConfig& c) {
  Model m;
  m.problem = c.problem;
  m.grid = build_grid(c.grid_n, c.cell_edge);
  m.symmetry = make_symmetry(c);
  m.materials = MaterialSet(c.materials, c.ersatz);
  m.projection.window = SampleWindow::for_element(m.grid.h(), c.window_c);
  m.projection.ks_k = c.ks_k;
  m.projection.heaviside_p = c.heaviside_p;
  m.projection.heaviside_eps = c.heaviside_eps > 0.0 ? c.heaviside_eps : m.projection.window.radius;
  m.bar_width = c.bar_width;
  m.solver = c.solver;
  return m;
}

}  // namespace latticeopt
