#include "latticeopt/grid.hpp"

#include <string>

namespace latticeopt {

UnitCellGrid::UnitCellGrid(int n, double cell_edge) : n_(n), edge_(cell_edge) {
  if (n < 2) {
    throw ConfigError("grid needs at least 2 elements per edge, got " +
                      std::to_string(n));
  }
  if (!(cell_edge > 0.0)) {
    throw ConfigError("cell edge must be positive");
  }
  h_ = edge_ / n_;
  // Ties for odd n resolve to the lower index; n >= 2 keeps it interior.
  const int c = n_ / 2;
  pinned_node_ = node_index(c, c, c);
}

std::array<int, 3> UnitCellGrid::element_ijk(int e) const {
  return {e % n_, (e / n_) % n_, e / (n_ * n_)};
}

Vec3 UnitCellGrid::centroid(int e) const {
  const auto ijk = element_ijk(e);
  return Vec3((ijk[0] + 0.5) * h_, (ijk[1] + 0.5) * h_, (ijk[2] + 0.5) * h_);
}

Vec3 UnitCellGrid::node_position(int node) const {
  const int m = n_ + 1;
  return Vec3((node % m) * h_, ((node / m) % m) * h_, (node / (m * m)) * h_);
}

int UnitCellGrid::periodic_master(int node) const {
  const int m = n_ + 1;
  const int i = (node % m) % n_;
  const int j = ((node / m) % m) % n_;
  const int k = (node / (m * m)) % n_;
  return i + n_ * (j + n_ * k);
}

bool UnitCellGrid::is_boundary_node(int node) const {
  const int m = n_ + 1;
  const int i = node % m, j = (node / m) % m, k = node / (m * m);
  return i == 0 || j == 0 || k == 0 || i == n_ || j == n_ || k == n_;
}

std::array<int, 8> UnitCellGrid::element_masters(int e) const {
  const auto [i, j, k] = element_ijk(e);
  const int i1 = (i + 1) % n_, j1 = (j + 1) % n_, k1 = (k + 1) % n_;
  auto id = [this](int a, int b, int c) { return a + n_ * (b + n_ * c); };
  return {id(i, j, k),   id(i1, j, k),   id(i1, j1, k),   id(i, j1, k),
          id(i, j, k1),  id(i1, j, k1),  id(i1, j1, k1),  id(i, j1, k1)};
}

UnitCellGrid build_grid(int n, double cell_edge) { return UnitCellGrid(n, cell_edge); }

}  // namespace latticeopt
