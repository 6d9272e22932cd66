#include "latticeopt/homogenization.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace latticeopt {

namespace {

// Local node offsets in the order used by UnitCellGrid::element_masters.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};

}  // namespace

HexElement::HexElement(double h) : weight_(h * h * h / 8.0) {
  const double gp = 1.0 / std::sqrt(3.0);
  for (int g = 0; g < 8; ++g) {
    const double xi[3] = {kCorner[g][0] ? gp : -gp, kCorner[g][1] ? gp : -gp,
                          kCorner[g][2] ? gp : -gp};
    StrainMatrix& b = b_[g];
    b.setZero();
    for (int a = 0; a < 8; ++a) {
      double s[3];
      for (int d = 0; d < 3; ++d) {
        s[d] = kCorner[a][d] ? 1.0 : -1.0;
      }
      // dN/dx = dN/dxi * 2/h
      const double dx = s[0] * (1 + s[1] * xi[1]) * (1 + s[2] * xi[2]) / 8.0 * 2.0 / h;
      const double dy = s[1] * (1 + s[0] * xi[0]) * (1 + s[2] * xi[2]) / 8.0 * 2.0 / h;
      const double dz = s[2] * (1 + s[0] * xi[0]) * (1 + s[1] * xi[1]) / 8.0 * 2.0 / h;
      const int c = 3 * a;
      b(0, c) = dx;
      b(1, c + 1) = dy;
      b(2, c + 2) = dz;
      b(3, c + 1) = dz;
      b(3, c + 2) = dy;
      b(4, c) = dz;
      b(4, c + 2) = dx;
      b(5, c) = dy;
      b(5, c + 1) = dx;
    }
  }
}

ElementMatrix HexElement::stiffness(const Voigt& c) const {
  ElementMatrix k = ElementMatrix::Zero();
  for (const auto& b : b_) {
    k.noalias() += weight_ * b.transpose() * (c * b);
  }
  return k;
}

//---------------------------------------------------------------------------//

CellProblemSolution assemble_and_solve(const UnitCellGrid& grid,
                                       std::span<const Voigt> field,
                                       const SolverOptions& options,
                                       const CellProblemSolution* warm_start) {
  const int ne = grid.num_elements();
  if (static_cast<int>(field.size()) != ne) {
    throw std::invalid_argument("elasticity field size does not match the grid");
  }
  const int ndof = 3 * grid.num_masters();
  const int pinned = grid.pinned_master();

  // Reduced numbering skips the three pinned components.
  auto reduced = [pinned](int dof) {
    const int m = dof / 3;
    if (m == pinned) {
      return -1;
    }
    return m < pinned ? dof : dof - 3;
  };
  const int nfree = ndof - 3;

  const HexElement hex(grid.h());
  Eigen::Matrix<double, 24, 6> bsum = Eigen::Matrix<double, 24, 6>::Zero();
  for (int g = 0; g < 8; ++g) {
    bsum += hex.weight() * hex.B(g).transpose();
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(ne) * 576);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nfree, 6);

  for (int e = 0; e < ne; ++e) {
    const ElementMatrix ke = hex.stiffness(field[e]);
    const Eigen::Matrix<double, 24, 6> fe = bsum * field[e];
    const auto masters = grid.element_masters(e);
    std::array<int, 24> dofs;
    for (int a = 0; a < 8; ++a) {
      for (int c = 0; c < 3; ++c) {
        dofs[3 * a + c] = reduced(3 * masters[a] + c);
      }
    }
    for (int i = 0; i < 24; ++i) {
      if (dofs[i] < 0) {
        continue;
      }
      rhs.row(dofs[i]) += fe.row(i);
      for (int j = 0; j < 24; ++j) {
        if (dofs[j] >= 0) {
          triplets.emplace_back(dofs[i], dofs[j], ke(i, j));
        }
      }
    }
  }
  Eigen::SparseMatrix<double> kmat(nfree, nfree);
  kmat.setFromTriplets(triplets.begin(), triplets.end());
  triplets.clear();
  triplets.shrink_to_fit();

  CellProblemSolution sol;
  Eigen::MatrixXd x(nfree, 6);

  auto expand_guess = [&](int a) {
    Eigen::VectorXd guess = Eigen::VectorXd::Zero(nfree);
    if (warm_start && warm_start->u[a].size() == ndof) {
      for (int dof = 0; dof < ndof; ++dof) {
        const int r = reduced(dof);
        if (r >= 0) {
          guess[r] = warm_start->u[a][dof];
        }
      }
    }
    return guess;
  };

  if (options.method == SolverOptions::Method::direct) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt(kmat);
    if (ldlt.info() != Eigen::Success) {
      throw SolverError("sparse factorization of the cell stiffness failed", NAN);
    }
    x = ldlt.solve(rhs);
    // A few refinement sweeps recover accuracy lost to high stiffness contrast.
    for (int sweep = 0; sweep < 3; ++sweep) {
      const Eigen::MatrixXd r = rhs - kmat * x;
      bool ok = true;
      for (int a = 0; a < 6; ++a) {
        const double fn = rhs.col(a).norm();
        if (r.col(a).norm() > options.tolerance * (fn > 0 ? fn : 1.0)) {
          ok = false;
        }
      }
      if (ok) {
        break;
      }
      x += ldlt.solve(r);
    }
  } else {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(options.tolerance);
    cg.setMaxIterations(options.max_iterations > 0 ? options.max_iterations
                                                   : 10 * grid.num_elements());
    cg.compute(kmat);
    for (int a = 0; a < 6; ++a) {
      if (rhs.col(a).norm() == 0.0) {
        x.col(a).setZero();
        continue;
      }
      x.col(a) = cg.solveWithGuess(rhs.col(a), expand_guess(a));
      sol.iterations += static_cast<int>(cg.iterations());
    }
  }

  for (int a = 0; a < 6; ++a) {
    const double fn = rhs.col(a).norm();
    const double rn = (rhs.col(a) - kmat * x.col(a)).norm();
    sol.residual[a] = fn > 0.0 ? rn / fn : rn;
    if (sol.residual[a] > options.tolerance) {
      std::ostringstream msg;
      msg << "cell problem " << a << " did not converge: relative residual "
          << sol.residual[a] << " > " << options.tolerance;
      throw SolverError(msg.str(), sol.residual[a]);
    }
    sol.u[a] = Eigen::VectorXd::Zero(ndof);
    for (int dof = 0; dof < ndof; ++dof) {
      const int r = reduced(dof);
      if (r >= 0) {
        sol.u[a][dof] = x(r, a);
      }
    }
  }
  return sol;
}

//---------------------------------------------------------------------------//

Voigt StrainField::element_energy(int e, const Voigt& m) const {
  Voigt out = Voigt::Zero();
  for (int g = 0; g < 8; ++g) {
    const Voigt& eg = strain[8 * e + g];
    out.noalias() += gauss_weight * eg.transpose() * (m * eg);
  }
  return out;
}

StrainField element_strains(const UnitCellGrid& grid, const CellProblemSolution& sol) {
  const HexElement hex(grid.h());
  const int ne = grid.num_elements();
  StrainField sf;
  sf.gauss_weight = hex.weight();
  sf.cell_volume = grid.cell_volume();
  sf.strain.resize(static_cast<std::size_t>(ne) * 8);

#pragma omp parallel for schedule(static)
  for (int e = 0; e < ne; ++e) {
    const auto masters = grid.element_masters(e);
    Eigen::Matrix<double, 24, 6> ue;
    for (int a = 0; a < 8; ++a) {
      for (int c = 0; c < 3; ++c) {
        for (int k = 0; k < 6; ++k) {
          ue(3 * a + c, k) = sol.u[k][3 * masters[a] + c];
        }
      }
    }
    for (int g = 0; g < 8; ++g) {
      sf.strain[8 * e + g] = Voigt::Identity() - hex.B(g) * ue;
    }
  }
  return sf;
}

EffectiveTensor effective_tensor(std::span<const Voigt> field, const StrainField& strains) {
  EffectiveTensor out;
  for (std::size_t e = 0; e < field.size(); ++e) {
    out.CH += strains.element_energy(static_cast<int>(e), field[e]);
  }
  out.CH /= strains.cell_volume;
  out.K = bulk_modulus(out.CH);
  out.G = shear_modulus(out.CH);
  const double den = out.CH(0, 1) + out.CH(5, 5);
  out.nu = den != 0.0 ? poisson_ratio(out.CH) : NAN;
  return out;
}

EffectiveTensor effective_tensor(const UnitCellGrid& grid, std::span<const Voigt> field,
                                 const CellProblemSolution& sol) {
  return effective_tensor(field, element_strains(grid, sol));
}

double bulk_modulus(const Voigt& ch) { return ch.topLeftCorner<3, 3>().sum() / 9.0; }

double shear_modulus(const Voigt& ch) {
  return (ch(3, 3) + ch(4, 4) + ch(5, 5)) / 3.0;
}

double poisson_ratio(const Voigt& ch) {
  const double den = ch(0, 1) + ch(5, 5);
  if (den == 0.0) {
    throw std::domain_error("Poisson's ratio undefined: C1122 + C1212 = 0");
  }
  return ch(0, 1) / (2.0 * den);
}

double voigt_bulk_bound(const UnitCellGrid& grid, std::span<const Voigt> field) {
  double sum = 0.0;
  for (const Voigt& c : field) {
    sum += bulk_modulus(c);
  }
  return sum * grid.element_volume() / grid.cell_volume();
}

std::vector<Voigt> tensor_sensitivities(
    const StrainField& strains,
    const std::vector<std::vector<ElasticityDerivative>>& per_variable) {
  std::vector<Voigt> out(per_variable.size(), Voigt::Zero());
  for (std::size_t v = 0; v < per_variable.size(); ++v) {
    for (const auto& d : per_variable[v]) {
      out[v] += strains.element_energy(d.element, d.d_c);
    }
    out[v] /= strains.cell_volume;
  }
  return out;
}

}  // namespace latticeopt
