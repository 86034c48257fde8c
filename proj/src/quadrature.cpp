#include "pemcloak/quadrature.hpp"

#include <cmath>
#include <numbers>

namespace pemcloak {

void gauss_legendre_01(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  nodes.resize(n);
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Newton iteration on P_n, starting from the Chebyshev-like estimate.
    double x = std::cos(std::numbers::pi * (4.0 * i + 3.0) / (4.0 * n + 2.0));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[i] = 0.5 * (x + 1.0);
    weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
}

QuadratureRule quadrature(int exact_degree) {
  if (exact_degree < 1 || exact_degree > kMaxQuadratureDegree) {
    throw Error(ErrorCode::kUnsupportedDegree,
                "requested degree " + std::to_string(exact_degree) + ", supported range is [1, " +
                    std::to_string(kMaxQuadratureDegree) + "]");
  }
  QuadratureRule rule;
  rule.exact_degree = exact_degree;
  if (exact_degree == 1) {
    rule.points.resize(1, 3);
    rule.points << 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0;
    rule.weights.resize(1);
    rule.weights << 0.5;
    return rule;
  }
  if (exact_degree == 2) {
    rule.points.resize(3, 3);
    rule.points << 4.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0,
                   1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0,
                   1.0 / 6.0, 1.0 / 6.0, 4.0 / 6.0;
    rule.weights = Eigen::VectorXd::Constant(3, 1.0 / 6.0);
    return rule;
  }

  // Conical product (Duffy) rule: x = u(1-v), y = uv with Jacobian u. The
  // integrand f(x,y)*u has u-degree <= d+1 and v-degree <= d, so Gauss-Legendre
  // with 2n-1 >= d+1 resp. 2n-1 >= d is exact for total degree d.
  const int nu = (exact_degree + 3) / 2;  // ceil((d+2)/2)
  const int nv = (exact_degree + 2) / 2;  // ceil((d+1)/2)
  Eigen::VectorXd un, uw, vn, vw;
  gauss_legendre_01(nu, un, uw);
  gauss_legendre_01(nv, vn, vw);

  rule.points.resize(nu * nv, 3);
  rule.weights.resize(nu * nv);
  int idx = 0;
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      const double x = un[i] * (1.0 - vn[j]);
      const double y = un[i] * vn[j];
      rule.points(idx, 0) = 1.0 - x - y;
      rule.points(idx, 1) = x;
      rule.points(idx, 2) = y;
      rule.weights[idx] = uw[i] * vw[j] * un[i];
      ++idx;
    }
  }
  rule.weights *= 0.5 / rule.weights.sum();
  return rule;
}

}  // namespace pemcloak
