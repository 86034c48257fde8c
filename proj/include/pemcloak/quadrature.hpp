#pragma once

#include <Eigen/Dense>

#include "pemcloak/error.hpp"

namespace pemcloak {

/// Quadrature rule on the reference triangle {(x,y) : x,y >= 0, x+y <= 1}.
/// Points are stored as barycentric triples (lambda0, lambda1, lambda2) with
/// lambda0 = 1-x-y; weights are positive and sum to the reference area 1/2.
struct QuadratureRule {
  Eigen::Matrix<double, Eigen::Dynamic, 3> points;  // rows: barycentric coords
  Eigen::VectorXd weights;
  int exact_degree = 0;

  int size() const { return static_cast<int>(weights.size()); }
};

constexpr int kMaxQuadratureDegree = 20;
constexpr int kAssemblyQuadratureDegree = 6;

/// Rule exact for all polynomials of total degree <= exact_degree on straight
/// triangles. Throws UNSUPPORTED_DEGREE outside [1, kMaxQuadratureDegree].
QuadratureRule quadrature(int exact_degree);

/// Gauss-Legendre nodes and weights on [0, 1]; exact for degree <= 2n-1.
void gauss_legendre_01(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights);

}  // namespace pemcloak
