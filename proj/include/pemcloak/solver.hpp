#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pemcloak/basis.hpp"
#include "pemcloak/fem.hpp"
#include "pemcloak/mesh.hpp"

namespace pemcloak {

/// Symmetric N x N matrix stored as its pair-indexed upper triangle, so
/// symmetry holds at the storage level. Electrode indices are 1-based.
class SymMatrix {
 public:
  explicit SymMatrix(int n) : pairs_(n), tri_(Eigen::VectorXd::Zero(pairs_.k_count)) {}

  int n() const { return pairs_.n; }
  double operator()(int i, int j) const { return tri_[pairs_.index(i, j) - 1]; }
  void set(int i, int j, double v) { tri_[pairs_.index(i, j) - 1] = v; }

  Eigen::VectorXd& tri() { return tri_; }
  const Eigen::VectorXd& tri() const { return tri_; }

  double max_abs() const { return tri_.size() ? tri_.cwiseAbs().maxCoeff() : 0.0; }
  Eigen::MatrixXd dense() const;

  /// Sum of |a_ij - b_ij| over the full N x N index range (off-diagonal
  /// entries counted twice), the stopping-rule metric.
  static double full_abs_distance(const SymMatrix& a, const SymMatrix& b);

 private:
  PairIndex pairs_;
  Eigen::VectorXd tri_;
};

struct RunConfig {
  double epsilon = 1.0;
  std::optional<SymMatrix> tau0;  // defaults to the zero matrix
  double stop_tol = 1e-8;
  int max_iter = 200;
  double gamma_max = 1e3;         // divergence guard on |tau|_max
  double epsilon_backoff = 0.5;   // halving factor
  double min_sigma = 1e-3;        // positivity floor for sigma_eps
  int max_backoffs = 5;

  void validate() const;
};

struct RunReport {
  bool converged = false;
  int iterations = 0;
  std::vector<double> discrepancy_history;  // sum |tau^{k+1} - tau^k|, full range
  std::vector<double> tau_max_history;
  std::vector<double> min_sigma_history;
  SymMatrix tau_final{1};
  double measurement_max = std::numeric_limits<double>::quiet_NaN();
  double epsilon_requested = 0.0;
  double epsilon_used = 0.0;
  int backoff_count = 0;
  double min_sigma_final = std::numeric_limits<double>::quiet_NaN();
  std::string failure;  // empty, or MAX_ITER_EXCEEDED
};

struct RunResult {
  std::function<double(const Eigen::Vector2d&)> sigma_eps;
  RunReport report;
};

/// Corrector problem div(sigma_eps grad u~) = -div(kappa grad u0_n) with
/// sigma_eps = 1 + epsilon kappa(tau); zero-mean P2 solution for electrode n.
/// Throws POSITIVITY_VIOLATION when sigma_eps dips below min_sigma.
FieldOnMesh solve_corrector(const Mesh& mesh, const PerturbationBasis& basis,
                            const PsiCache& cache, const SymMatrix& tau, double epsilon, int n,
                            double min_sigma = 1e-3, double solver_tol = 1e-12);

/// One update tau -> tau - [ int kappa grad u_eps_i . grad u0_j ]_{i<=j}.
SymMatrix fixed_point_step(const Mesh& mesh, const PerturbationBasis& basis,
                           const PsiCache& cache, const SymMatrix& tau, double epsilon,
                           double min_sigma = 1e-3, double solver_tol = 1e-12);

/// Full fixed-point construction with stopping rule, divergence guard and
/// epsilon backoff. Throws MAX_BACKOFFS_EXCEEDED (carrying no report) when
/// halving epsilon max_backoffs times still diverges; an exhausted iteration
/// budget returns converged = false with failure = MAX_ITER_EXCEEDED.
RunResult run_algorithm(const Mesh& mesh, const PerturbationBasis& basis, const PsiCache& cache,
                        const RunConfig& config);

/// Relative measurement matrix of sigma_eps = 1 + epsilon kappa(tau),
/// evaluated from the first- and second-order terms; exactly zero for
/// epsilon = 0.
SymMatrix pem_measurement_matrix(const Mesh& mesh, const PerturbationBasis& basis,
                                 const PsiCache& cache, const SymMatrix& tau, double epsilon,
                                 double min_sigma = 1e-3, double solver_tol = 1e-12);

/// Applies the measurement map to a mean-free current vector of length N+1,
/// returning the mean-free relative-voltage representative.
Eigen::VectorXd measurement_map_apply(const SymMatrix& m, const Eigen::VectorXd& current);

}  // namespace pemcloak
