#pragma once

#include <Eigen/Dense>

#include <utility>

namespace latticeopt {

/// Per-variable box [max(0, z - m), min(1, z + m)].
std::pair<Eigen::VectorXd, Eigen::VectorXd> apply_move_limits(const Eigen::VectorXd& z,
                                                              double m);

struct MmaOptions {
  double asyinit = 0.5;
  double asyincr = 1.2;
  double asydecr = 0.7;
  double albefa = 0.1;
  double raa0 = 1e-5;
  /// Interior-point stopping tolerance of the subproblem.
  double epsimin = 1e-9;
  double a0 = 1.0;
  /// Elastic-variable weights, shared by all constraints.
  double c = 1000.0;
  double d = 1.0;
};

/// Method of Moving Asymptotes for
///   min f0(x)  s.t.  f_i(x) <= 0,  lower <= x <= upper,  0 <= x <= 1.
/// The asymptotes adapt on the global [0, 1] box; the caller's bounds (move
/// limits) clip the subproblem box.
class Mma {
 public:
  Mma(int n, int m, MmaOptions options = {});

  /// One outer iteration. dg is m x n. Returns the new iterate.
  Eigen::VectorXd update(const Eigen::VectorXd& x, const Eigen::VectorXd& df0,
                         const Eigen::VectorXd& g, const Eigen::MatrixXd& dg,
                         const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

  int iteration() const { return iter_; }
  const Eigen::VectorXd& low() const { return low_; }
  const Eigen::VectorXd& upp() const { return upp_; }
  /// Lagrange multipliers of the last subproblem.
  const Eigen::VectorXd& multipliers() const { return lam_; }
  /// Scaled KKT residual the last subproblem ended with.
  double subproblem_residual() const { return residual_; }

 private:
  int n_;
  int m_;
  MmaOptions opt_;
  int iter_ = 0;
  double residual_ = 0.0;
  Eigen::VectorXd xold1_, xold2_, low_, upp_, lam_;
};

}  // namespace latticeopt
