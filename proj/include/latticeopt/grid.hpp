#pragma once

#include "latticeopt/types.hpp"

#include <array>
#include <vector>

namespace latticeopt {

/// Regular cube of n^3 trilinear hexahedra with periodic node identification.
///
/// Nodes are indexed on the (n+1)^3 lattice; every node maps to a periodic
/// master on the n^3 lattice (index modulo n per axis). The master nearest the
/// cell center is pinned to remove rigid translations.
class UnitCellGrid {
 public:
  UnitCellGrid(int n, double cell_edge);

  int n() const { return n_; }
  double edge() const { return edge_; }
  double h() const { return h_; }
  double cell_volume() const { return edge_ * edge_ * edge_; }
  double element_volume() const { return h_ * h_ * h_; }
  Vec3 center() const { return Vec3::Constant(0.5 * edge_); }

  int num_elements() const { return n_ * n_ * n_; }
  int num_nodes() const { return (n_ + 1) * (n_ + 1) * (n_ + 1); }
  int num_masters() const { return n_ * n_ * n_; }

  int element_index(int i, int j, int k) const { return i + n_ * (j + n_ * k); }
  std::array<int, 3> element_ijk(int e) const;
  Vec3 centroid(int e) const;

  int node_index(int i, int j, int k) const {
    return i + (n_ + 1) * (j + (n_ + 1) * k);
  }
  Vec3 node_position(int node) const;
  int periodic_master(int node) const;
  bool is_boundary_node(int node) const;

  /// Node (on the (n+1)^3 lattice) nearest the cell center; its master is pinned.
  int pinned_node() const { return pinned_node_; }
  int pinned_master() const { return periodic_master(pinned_node_); }

  /// Master node ids of the 8 element corners in local hexahedron order.
  std::array<int, 8> element_masters(int e) const;

 private:
  int n_;
  double edge_;
  double h_;
  int pinned_node_;
};

/// Validates n >= 2 and constructs the grid.
UnitCellGrid build_grid(int n, double cell_edge);

}  // namespace latticeopt
