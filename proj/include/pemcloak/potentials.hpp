#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <utility>
#include <vector>

#include "pemcloak/error.hpp"

namespace pemcloak {

/// Point electrodes x_0..x_N on the unit circle; x_0 is the ground electrode.
struct ElectrodeConfig {
  std::vector<double> angles;  // radians, distinct modulo 2*pi

  static ElectrodeConfig from_angles(std::vector<double> angles);
  /// theta_j = 1 deg + j/count * 360 deg, j = 0..count-1.
  static ElectrodeConfig offset_equispaced(int count);

  int n() const { return static_cast<int>(angles.size()) - 1; }
  Eigen::Vector2d position(int electrode) const;  // electrode in 0..N
};

/// Bijection k <-> (i,j), 1 <= i <= j <= N, in the row-by-row order
/// (1,1), (1,2), (2,2), (1,3), (2,3), (3,3), ...
struct PairIndex {
  int n = 0;
  int k_count = 0;

  explicit PairIndex(int n_electrodes)
      : n(n_electrodes), k_count(n_electrodes * (n_electrodes + 1) / 2) {}

  int index(int i, int j) const;             // 1-based
  std::pair<int, int> pair(int k) const;     // 1-based, first <= second
};

/// u0_n(x) = -(1/pi) [ln|x - x_n| - ln|x - x_0|], the reference potential for
/// the current pattern delta_n - delta_0 on the unit disk.
double u0_value(int n, const Eigen::Vector2d& x, const ElectrodeConfig& cfg);
Eigen::Vector2d u0_gradient(int n, const Eigen::Vector2d& x, const ElectrodeConfig& cfg);

/// All gradients grad u0_1..grad u0_N at x, one column each.
Eigen::Matrix2Xd u0_all_gradients(const Eigen::Vector2d& x, const ElectrodeConfig& cfg);

/// psi_k = grad u0_i . grad u0_j with (i,j) = pair(k).
double psi_value(int k, const Eigen::Vector2d& x, const ElectrodeConfig& cfg);
/// All K = N(N+1)/2 products at once.
Eigen::VectorXd psi_all(const Eigen::Vector2d& x, const ElectrodeConfig& cfg);

/// Conformal map Phi from the working domain onto the unit disk, given as
/// complex evaluators. The built-in family covers the disk automorphisms
/// Phi(z) = e^{i rot} (z - a) / (1 - conj(a) z), |a| < 1.
struct ConformalMap {
  std::function<std::complex<double>(std::complex<double>)> map;
  std::function<std::complex<double>(std::complex<double>)> derivative;

  static ConformalMap identity();
  static ConformalMap mobius(std::complex<double> a, double rotation = 0.0);
};

/// Potentials transported from the unit disk through a conformal map:
/// value(n, x) = u0_n(Phi(x)) for the image electrodes Phi(x_n), and the
/// gradient follows by the chain rule with the complex derivative of Phi.
class TransportedPotentials {
 public:
  TransportedPotentials(ConformalMap map, const ElectrodeConfig& cfg);

  double value(int n, const Eigen::Vector2d& x) const;
  Eigen::Vector2d gradient(int n, const Eigen::Vector2d& x) const;
  const std::vector<std::complex<double>>& image_positions() const { return images_; }

 private:
  std::complex<double> map_checked(const Eigen::Vector2d& x) const;

  ConformalMap map_;
  std::vector<std::complex<double>> images_;
};

TransportedPotentials transport_potentials(ConformalMap map, const ElectrodeConfig& cfg);

}  // namespace pemcloak
