#include "latticeopt/export.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace latticeopt {

namespace {

using File = std::unique_ptr<std::FILE, int (*)(std::FILE*)>;

File open_for_writing(const std::filesystem::path& path) {
  File f(std::fopen(path.c_str(), "w"), &std::fclose);
  if (!f) {
    throw std::runtime_error("cannot write " + path.string());
  }
  return f;
}

void finish(File& f, const std::filesystem::path& path) {
  if (std::ferror(f.get()) || std::fclose(f.release()) != 0) {
    throw std::runtime_error("error while writing " + path.string());
  }
}

bool same_segment(const ExportedBar& a, const ExportedBar& b, double tol) {
  if (a.material != b.material) {
    return false;
  }
  const bool direct = (a.x0 - b.x0).norm() < tol && (a.xf - b.xf).norm() < tol;
  const bool flipped = (a.x0 - b.xf).norm() < tol && (a.xf - b.x0).norm() < tol;
  return direct || flipped;
}

}  // namespace

std::vector<ExportedBar> bar_orbit(std::span<const Bar> bars, const SymmetryGroup& sym) {
  const auto group = sym.group_elements();
  const Vec3& c = sym.center();
  std::vector<ExportedBar> out;
  for (const Bar& b : bars) {
    if (b.alpha.empty()) {
      continue;
    }
    const auto best = std::max_element(b.alpha.begin(), b.alpha.end());
    if (*best < 0.5) {
      continue;
    }
    const int material = static_cast<int>(best - b.alpha.begin()) + 1;
    const double tol = 1e-9 * std::max(1.0, c.norm());
    for (const Mat3& g : group) {
      ExportedBar e{material, c + g * (b.x0 - c), c + g * (b.xf - c), b.width};
      const bool dup = std::any_of(out.begin(), out.end(),
                                   [&](const ExportedBar& o) { return same_segment(o, e, tol); });
      if (!dup) {
        out.push_back(e);
      }
    }
  }
  return out;
}

void write_vtk(const std::filesystem::path& path, const UnitCellGrid& grid,
               const Eigen::MatrixXd& rho) {
  const int n = grid.n(), ne = grid.num_elements();
  const int nm = static_cast<int>(rho.cols());
  File f = open_for_writing(path);
  std::fprintf(f.get(), "# vtk DataFile Version 3.0\nlattice densities\nASCII\n");
  std::fprintf(f.get(), "DATASET STRUCTURED_POINTS\nDIMENSIONS %d %d %d\n", n + 1, n + 1, n + 1);
  std::fprintf(f.get(), "ORIGIN 0 0 0\nSPACING %.17g %.17g %.17g\n", grid.h(), grid.h(),
               grid.h());
  std::fprintf(f.get(), "CELL_DATA %d\n", ne);
  for (int i = 0; i < nm; ++i) {
    std::fprintf(f.get(), "SCALARS rho_%d double 1\nLOOKUP_TABLE default\n", i + 1);
    for (int e = 0; e < ne; ++e) {
      std::fprintf(f.get(), "%.17g\n", rho(e, i));
    }
  }
  std::fprintf(f.get(), "SCALARS material int 1\nLOOKUP_TABLE default\n");
  for (int e = 0; e < ne; ++e) {
    int id = 0;
    if (nm > 0 && rho.row(e).sum() >= 0.5) {
      rho.row(e).maxCoeff(&id);
      ++id;
    }
    std::fprintf(f.get(), "%d\n", id);
  }
  finish(f, path);
}

VtkDensities read_vtk(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot read " + path.string());
  }
  auto fail = [&](const std::string& msg) -> void {
    throw std::runtime_error(path.string() + ": " + msg);
  };
  VtkDensities out;
  std::vector<std::vector<double>> fields;
  std::string line;
  int cells = -1;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "DIMENSIONS") {
      int nx = 0, ny = 0, nz = 0;
      ls >> nx >> ny >> nz;
      if (nx != ny || ny != nz || nx < 2) {
        fail("expected a cubic grid");
      }
      out.n = nx - 1;
    } else if (word == "SPACING") {
      ls >> out.spacing;
    } else if (word == "CELL_DATA") {
      ls >> cells;
    } else if (word == "SCALARS") {
      std::string name;
      ls >> name;
      std::getline(in, line);  // LOOKUP_TABLE
      if (cells < 0) {
        fail("SCALARS before CELL_DATA");
      }
      std::vector<double> values(cells);
      for (double& v : values) {
        if (!(in >> v)) {
          fail("truncated field " + name);
        }
      }
      if (name.rfind("rho_", 0) == 0) {
        fields.push_back(std::move(values));
      }
    }
  }
  if (out.n == 0 || cells != out.n * out.n * out.n) {
    fail("missing or inconsistent DIMENSIONS / CELL_DATA");
  }
  out.rho.resize(cells, static_cast<Eigen::Index>(fields.size()));
  for (std::size_t i = 0; i < fields.size(); ++i) {
    out.rho.col(i) = Eigen::Map<const Eigen::VectorXd>(fields[i].data(), cells);
  }
  return out;
}

void write_bars(const std::filesystem::path& path, std::span<const ExportedBar> bars) {
  File f = open_for_writing(path);
  std::fprintf(f.get(), "# material x0 y0 z0 xf yf zf width\n");
  for (const ExportedBar& b : bars) {
    std::fprintf(f.get(), "%d %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", b.material, b.x0[0],
                 b.x0[1], b.x0[2], b.xf[0], b.xf[1], b.xf[2], b.width);
  }
  finish(f, path);
}

void export_design(std::span<const Bar> bars, const UnitCellGrid& grid,
                   const SymmetryGroup& sym, const Eigen::MatrixXd& rho,
                   const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
  }
  write_vtk(out_dir / "densities.vtk", grid, rho);
  write_bars(out_dir / "bars.txt", bar_orbit(bars, sym));
}

}  // namespace latticeopt
