#pragma once

#include "latticeopt/projection.hpp"

#include <filesystem>
#include <vector>

namespace latticeopt {

/// One bar of the replicated lattice as written to bars.txt.
struct ExportedBar {
  int material = 0;  // 1-based
  Vec3 x0 = Vec3::Zero();
  Vec3 xf = Vec3::Zero();
  double width = 0.0;
};

/// Full symmetry orbit of every bar whose largest size variable is at least
/// 0.5, duplicates removed. The material is the one with the largest alpha.
std::vector<ExportedBar> bar_orbit(std::span<const Bar> bars, const SymmetryGroup& sym);

/// Legacy VTK STRUCTURED_POINTS (ASCII): CELL_DATA with one density field per
/// material (rho_1, rho_2, ...) and an integer "material" field, 0 where the
/// total density is below 0.5, otherwise the 1-based densest material.
void write_vtk(const std::filesystem::path& path, const UnitCellGrid& grid,
               const Eigen::MatrixXd& rho);

struct VtkDensities {
  int n = 0;
  double spacing = 0.0;
  Eigen::MatrixXd rho;  // num_elements x num_materials
};
VtkDensities read_vtk(const std::filesystem::path& path);

/// Columns: material x0 y0 z0 xf yf zf width.
void write_bars(const std::filesystem::path& path, std::span<const ExportedBar> bars);

/// Writes densities.vtk and bars.txt into out_dir, creating it if needed.
void export_design(std::span<const Bar> bars, const UnitCellGrid& grid,
                   const SymmetryGroup& sym, const Eigen::MatrixXd& rho,
                   const std::filesystem::path& out_dir);

}  // namespace latticeopt
