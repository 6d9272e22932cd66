#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace latticeopt {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// 6x6 elasticity matrix in Voigt order 11, 22, 33, 23, 13, 12 with
/// engineering shear strains.
using Voigt = Eigen::Matrix<double, 6, 6>;
using Voigt6 = Eigen::Matrix<double, 6, 1>;

/// Raised for malformed run configurations and invalid inputs.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a linear or subproblem solver fails to converge.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

}  // namespace latticeopt
