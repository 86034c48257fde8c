#pragma once

#include <Eigen/Dense>
#include <functional>
#include <numbers>
#include <vector>

#include "pemcloak/fem.hpp"
#include "pemcloak/mesh.hpp"

namespace pemcloak {

/// Finite-size electrode arcs for the complete electrode model: centered at
/// the given angles, all with the same arc width and contact impedance.
struct CemElectrodes {
  std::vector<double> centers;  // radians
  double width = std::numbers::pi / 32.0;
  double contact_impedance = 0.01;

  int count() const { return static_cast<int>(centers.size()); }
  void validate() const;  // arcs pairwise disjoint, positive width/impedance
};

struct CemSolution {
  Eigen::VectorXd potential;  // interior P2 coefficients
  Eigen::VectorXd voltages;   // electrode voltages, grounded to sum 0
  int cg_iterations = 0;
};

/// L-1 trigonometric current patterns on L electrodes: cos(m theta_l),
/// sin(m theta_l) for m = 1, 2, ..., truncated to L-1 vectors and shifted to
/// exact zero mean.
std::vector<Eigen::VectorXd> trig_current_basis(const std::vector<double>& center_angles);

/// Complete-electrode-model forward solve with contact impedance: the coupled
/// interior/electrode-voltage system, grounded by the constraint sum U_l = 0.
/// The mesh must have been built with matching arc endpoints
/// (ARCS_NOT_RESOLVED otherwise).
CemSolution solve_cem(const Mesh& mesh, const std::function<double(const Eigen::Vector2d&)>& sigma,
                      const CemElectrodes& electrodes, const Eigen::VectorXd& current,
                      double tol = 1e-12);

/// Relative CEM discrepancy: voltages of sigma_eps stacked over all basis
/// currents against the unit-conductivity voltages, in the Euclidean norm.
double e_cem(const Mesh& mesh, const std::function<double(const Eigen::Vector2d&)>& sigma_eps,
             const CemElectrodes& electrodes, const std::vector<Eigen::VectorXd>& currents);

/// Per-current relative discrepancies plus the stacked total.
struct CemComparison {
  double total = 0.0;
  std::vector<double> per_current;
  std::vector<Eigen::VectorXd> voltages_reference;
  std::vector<Eigen::VectorXd> voltages_perturbed;
};
CemComparison compare_cem(const Mesh& mesh,
                          const std::function<double(const Eigen::Vector2d&)>& sigma_eps,
                          const CemElectrodes& electrodes,
                          const std::vector<Eigen::VectorXd>& currents);

}  // namespace pemcloak
