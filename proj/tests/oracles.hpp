// Test-only oracles, independent of the library's computational paths.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "pemcloak/mesh.hpp"
#include "pemcloak/quadrature.hpp"

namespace oracles {

// Exact integral of l0^a l1^b l2^c over the reference triangle (area 1/2).
inline double tri_monomial(int a, int b, int c) {
  auto fact = [](int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
  };
  return fact(a) * fact(b) * fact(c) / fact(a + b + c + 2);
}

// Exact integral of x^a y^b over the reference triangle.
inline double tri_xy_monomial(int a, int b) { return tri_monomial(0, a, b); }

// Tensor Gauss quadrature of f over the unit disk in polar coordinates about
// a boundary point c (|c| = 1): r in (0, 2 cos(phi)), phi in (-pi/2, pi/2).
// The returned value is int_D f(x) (1/|x - c|) dx / (1/r) ... i.e. the plain
// integral of f; the 1/r Jacobian cancellation is up to the caller's f.
inline double disk_integral_about_boundary_point(
    const Eigen::Vector2d& c, const std::function<double(const Eigen::Vector2d&, double r, const Eigen::Vector2d& u)>& f,
    int n_phi = 96, int n_r = 64) {
  Eigen::VectorXd pn, pw, rn, rw;
  pemcloak::gauss_legendre_01(n_phi, pn, pw);
  pemcloak::gauss_legendre_01(n_r, rn, rw);
  const double alpha = std::atan2(-c.y(), -c.x());  // inward direction
  double total = 0.0;
  for (int i = 0; i < n_phi; ++i) {
    const double phi = -std::numbers::pi / 2 + std::numbers::pi * pn[i];
    const double rmax = 2.0 * std::cos(phi);
    const Eigen::Vector2d u(std::cos(alpha + phi), std::sin(alpha + phi));
    for (int j = 0; j < n_r; ++j) {
      const double r = rmax * rn[j];
      const Eigen::Vector2d x = c + r * u;
      total += std::numbers::pi * pw[i] * rmax * rw[j] * r * f(x, r, u);
    }
  }
  return total;
}

// Tensor quadrature over a concentric disk of radius R: Gauss in r,
// trapezoid in the periodic angle (geometric convergence for smooth f).
inline double disk_integral_concentric(double radius,
                                       const std::function<double(const Eigen::Vector2d&)>& f,
                                       int n_r = 96, int n_theta = 512) {
  Eigen::VectorXd rn, rw;
  pemcloak::gauss_legendre_01(n_r, rn, rw);
  double total = 0.0;
  for (int i = 0; i < n_r; ++i) {
    const double r = radius * rn[i];
    double ring = 0.0;
    for (int j = 0; j < n_theta; ++j) {
      const double t = 2.0 * std::numbers::pi * j / n_theta;
      ring += f({r * std::cos(t), r * std::sin(t)});
    }
    total += radius * rw[i] * r * ring * (2.0 * std::numbers::pi / n_theta);
  }
  return total;
}

// Least-squares fit of log(y) against the iteration index; returns (slope, R^2).
inline std::pair<double, double> log_linear_fit(const std::vector<double>& y) {
  const int n = static_cast<int>(y.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double ly = std::log(y[i]);
    sx += i;
    sy += ly;
    sxx += double(i) * i;
    sxy += i * ly;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double mean = sy / n;
  for (int i = 0; i < n; ++i) {
    const double ly = std::log(y[i]);
    ss_res += std::pow(ly - (intercept + slope * i), 2);
    ss_tot += std::pow(ly - mean, 2);
  }
  return {slope, ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0};
}

// Deterministic well-spread points in the disk of the given radius.
inline std::vector<Eigen::Vector2d> spiral_points(int count, double radius) {
  std::vector<Eigen::Vector2d> out;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double r = radius * std::sqrt((i + 0.5) / count);
    const double t = golden * i;
    out.emplace_back(r * std::cos(t), r * std::sin(t));
  }
  return out;
}

// Normalized von Mises density on the circle, safe for large concentration.
struct VonMises {
  double concentration;
  double norm;

  explicit VonMises(double c) : concentration(c) {
    norm = 0.0;
    const int m = 1 << 14;
    for (int i = 0; i < m; ++i) {
      norm += std::exp(c * (std::cos(2.0 * std::numbers::pi * i / m) - 1.0)) *
              (2.0 * std::numbers::pi / m);
    }
  }
  double operator()(double t) const {
    return std::exp(concentration * (std::cos(t) - 1.0)) / norm;
  }
};

// Values of the P2 interpolant at every quadrature point (column-major layout
// matching fe_gradient_at_quadrature).
inline Eigen::VectorXd sample_p2(const pemcloak::Mesh& mesh, const Eigen::VectorXd& coeffs,
                                 const pemcloak::QuadratureRule& rule) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(mesh.num_elements()) * rule.size());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto& tri = mesh.triangles[e];
    for (int q = 0; q < rule.size(); ++q) {
      const auto n = pemcloak::p2_shape_values(rule.points.row(q));
      double v = 0.0;
      for (int a = 0; a < 6; ++a) v += coeffs[tri[a]] * n[a];
      out[static_cast<Eigen::Index>(e) * rule.size() + q] = v;
    }
  }
  return out;
}

}  // namespace oracles
