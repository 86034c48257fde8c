#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <optional>

#include "pemcloak/mesh.hpp"

namespace pemcloak {

enum class Region { kAll, kInsideOmega };

/// Scalar field sampled per quadrature point. Callables that only depend on
/// the position may ignore the element/point indices.
using QuadFn = std::function<double(int element, int qp, const Eigen::Vector2d& x)>;
/// Gradient evaluator for analytic potentials.
using GradFn = std::function<Eigen::Vector2d(const Eigen::Vector2d& x)>;

/// Either a P2 coefficient vector (FE potentials) or a callable scalar field
/// (conductivities and perturbations).
class FieldOnMesh {
 public:
  static FieldOnMesh coefficients(Eigen::VectorXd coeffs);
  static FieldOnMesh callable(QuadFn fn);
  static FieldOnMesh constant(double value);

  bool is_coefficients() const { return coeffs_.has_value(); }
  const Eigen::VectorXd& coeffs() const;
  double sample(int element, int qp, const Eigen::Vector2d& x) const;

 private:
  std::optional<Eigen::VectorXd> coeffs_;
  QuadFn fn_;
};

/// Stiffness matrix of the pure-Neumann problem together with the mean-value
/// row used to fix the quotient-space representative.
struct SparseSystem {
  Eigen::SparseMatrix<double> matrix;
  Eigen::VectorXd mean_row;  // integral of each P2 basis function over D
  double max_abs = 0.0;
};

/// A_pq = int_D sigma grad(phi_p).grad(phi_q). Throws
/// NONPOSITIVE_CONDUCTIVITY when sigma <= 0 at a quadrature point.
SparseSystem assemble_stiffness(const Mesh& mesh, const FieldOnMesh& sigma);
SparseSystem assemble_stiffness(const Mesh& mesh, const FieldOnMesh& sigma,
                                const QuadratureRule& rule);

/// b_p = int_Omega kappa grad(u0).grad(phi_p). kappa must vanish on
/// OUTSIDE_OMEGA elements (SUPPORT_VIOLATION otherwise).
Eigen::VectorXd assemble_corrector_load(const Mesh& mesh, const FieldOnMesh& kappa,
                                        const GradFn& grad_u0);
Eigen::VectorXd assemble_corrector_load(const Mesh& mesh, const FieldOnMesh& kappa,
                                        const GradFn& grad_u0, const QuadratureRule& rule);

/// b_p = int_{boundary} g(x, nu) phi_p ds over the curved boundary edges.
Eigen::VectorXd assemble_boundary_load(
    const Mesh& mesh,
    const std::function<double(const Eigen::Vector2d& x, const Eigen::Vector2d& unit_normal)>& g,
    int gauss_points = 4);

struct NeumannSolveOptions {
  int max_iterations = 0;  // 0: scale with system size
  const Eigen::VectorXd* initial_guess = nullptr;
};

/// Solves the singular Neumann system on the quotient space, returning the
/// zero-mean representative. Projected conjugate gradients with diagonal
/// preconditioning; relative residual below tol on the constrained subspace.
FieldOnMesh solve_neumann(const SparseSystem& system, const Eigen::VectorXd& load,
                          double tol = 1e-12, const NeumannSolveOptions& options = {});

/// Gradients of the P2 interpolant at every quadrature point; column index is
/// element * rule.size() + qp.
Eigen::Matrix2Xd fe_gradient_at_quadrature(const Mesh& mesh, const Eigen::VectorXd& coeffs,
                                           const QuadratureRule& rule);

double integrate(const Mesh& mesh, const QuadratureRule& rule, Region region, const QuadFn& fn);

/// Value of the P2 interpolant at an interior point (straight-sided lookup).
double evaluate_at_point(const Mesh& mesh, const Eigen::VectorXd& coeffs,
                         const Eigen::Vector2d& x);

struct CgReport {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients projected onto the subspace
/// {x : constraint . x = 0}; the constraint must exclude the matrix kernel.
CgReport constrained_cg(const Eigen::SparseMatrix<double>& matrix, const Eigen::VectorXd& rhs,
                        const Eigen::VectorXd& constraint, Eigen::VectorXd& x, double tol,
                        int max_iterations);

}  // namespace pemcloak
