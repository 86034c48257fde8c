#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <vector>

#include "pemcloak/error.hpp"
#include "pemcloak/quadrature.hpp"

namespace pemcloak {

/// Perturbation support region, compactly embedded in the unit disk.
struct OmegaSpec {
  enum class Shape { kConcentricDisk, kAnnulusSector, kOffsetDisk };

  Shape shape = Shape::kConcentricDisk;
  double radius = 0.5;                          // concentric / offset disk
  Eigen::Vector2d center{0.0, 0.0};             // offset disk
  double r_in = 0.25, r_out = 0.75;             // annulus sector
  double theta_min = 0.0, theta_max = 1.0;      // annulus sector, radians

  static OmegaSpec concentric_disk(double r);
  static OmegaSpec annulus_sector(double r_in, double r_out, double theta_min, double theta_max);
  static OmegaSpec offset_disk(const Eigen::Vector2d& center, double r);

  /// Min distance from closure(Omega) to the unit circle.
  double clearance() const;
  bool contains(const Eigen::Vector2d& x, double tol = 0.0) const;
  /// Throws VALIDATION_ERROR unless closure(Omega) is inside the disk with
  /// positive clearance.
  void validate() const;
};

enum class ElementTag { kInsideOmega, kOutsideOmega };

/// Curved P2 edge on the unit circle. Nodes run counterclockwise; theta1 >
/// theta0 and theta1 - theta0 is the polar-angle span of the edge.
struct BoundaryEdge {
  int n0 = -1, n1 = -1, mid = -1;
  double theta0 = 0.0, theta1 = 0.0;
};

/// Conforming quadratic triangulation of the unit disk, fitted to Omega.
/// Triangle connectivity is (v0, v1, v2, m01, m12, m20) with positive
/// orientation; midside nodes on the unit circle and on the Omega interface
/// are placed on the respective circles (isoparametric P2 geometry).
struct Mesh {
  OmegaSpec omega;
  double target_h = 0.0;
  double h_max = 0.0;

  std::vector<Eigen::Vector2d> vertices;  // all P2 nodes
  std::vector<std::array<int, 6>> triangles;
  std::vector<ElementTag> element_tags;
  std::vector<bool> element_curved;
  std::vector<BoundaryEdge> boundary_edges;

  int num_nodes() const { return static_cast<int>(vertices.size()); }
  int num_elements() const { return static_cast<int>(triangles.size()); }
};

/// Builds the structured polar-ring mesh. Boundary nodes land exactly on
/// every electrode angle and, when cem_width is given, on every electrode-arc
/// endpoint. Throws OMEGA_TOO_CLOSE_TO_BOUNDARY when the clearance cannot
/// accommodate target_h and DEGENERATE_ELEMENT if any Jacobian fails.
Mesh build_disk_mesh(const OmegaSpec& omega, double target_h,
                     const std::vector<double>& electrode_angles = {},
                     std::optional<double> cem_width = std::nullopt);

/// P2 shape values at a barycentric point, ordered (v0,v1,v2,m01,m12,m20).
Eigen::Matrix<double, 6, 1> p2_shape_values(const Eigen::Vector3d& bary);
/// P2 shape gradients with respect to reference coords (xi, eta) where
/// bary = (1-xi-eta, xi, eta).
Eigen::Matrix<double, 6, 2> p2_shape_gradients(const Eigen::Vector3d& bary);

struct PhysicalQuadPoint {
  Eigen::Vector2d x;
  double weight = 0.0;    // reference weight times |det J|
  double jacobian = 0.0;  // det J of the geometry map
};

/// Maps a reference rule through the element geometry. Weights sum to the
/// element area (exactly, for the quadratic geometry map).
std::vector<PhysicalQuadPoint> physical_quad_points(const Mesh& mesh, int element,
                                                    const QuadratureRule& rule);

/// Geometry map of one element at a barycentric point: position and Jacobian.
void element_geometry(const Mesh& mesh, int element, const Eigen::Vector3d& bary,
                      Eigen::Vector2d& x, Eigen::Matrix2d& jacobian);

double element_area(const Mesh& mesh, int element);
Eigen::Vector2d element_centroid(const Mesh& mesh, int element);

/// Locates the element containing x (straight-sided test with tolerance) and
/// returns its barycentric coordinates; -1 if not found.
int locate_point(const Mesh& mesh, const Eigen::Vector2d& x, Eigen::Vector3d& bary);

}  // namespace pemcloak
