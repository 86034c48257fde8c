#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

#include "pemcloak/basis.hpp"
#include "pemcloak/mesh.hpp"
#include "pemcloak/solver.hpp"

namespace pemcloak {

/// Legacy ASCII VTK unstructured grid: quadratic triangles with the element
/// tags as cell data plus optional extra cell scalars.
void write_mesh_vtk(const std::string& path, const Mesh& mesh);
void write_cell_scalar_vtk(const std::string& path, const Mesh& mesh, const std::string& name,
                           const Eigen::VectorXd& cell_values);

/// Field sampled per element at the centroid.
Eigen::VectorXd sample_at_centroids(const Mesh& mesh,
                                    const std::function<double(const Eigen::Vector2d&)>& field);

/// Dense raster on [-1,1]^2 as "x,y,value" rows; NaN outside the unit disk.
void write_raster_csv(const std::string& path,
                      const std::function<double(const Eigen::Vector2d&)>& field,
                      int samples_per_axis = 201);

/// Convergence history: iteration, discrepancy, |tau|_max, min sigma_eps.
void write_convergence_csv(const std::string& path, const RunReport& report);

/// Condition estimate and duality residuals of the basis.
void write_basis_diagnostics_csv(const std::string& path, const PerturbationBasis& basis,
                                 const DualityCheck& check);

}  // namespace pemcloak
