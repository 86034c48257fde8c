#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "pemcloak/fem.hpp"
#include "pemcloak/mesh.hpp"
#include "pemcloak/potentials.hpp"

namespace pemcloak {

/// The dual-basis identities sit on top of a Gram matrix whose conditioning
/// grows exponentially with the electrode count, so the basis linear algebra
/// runs in binary128; the double fields below are mirrors for inspection.
using Float128 = __float128;

/// Quadrature-point tables over the INSIDE_OMEGA elements: physical points,
/// weights, reference-potential gradients and the psi products. Everything
/// downstream of the dual-basis construction samples these tables.
struct PsiCache {
  std::vector<int> elements;  // inside element indices
  int points_per_element = 0;
  Eigen::VectorXd weights;    // physical weights, length Q
  Eigen::Matrix2Xd points;    // 2 x Q
  Eigen::MatrixXd grad_u0;    // 2N x Q (gradient of u0_n in rows 2n-2, 2n-1)
  Eigen::MatrixXd psi;        // K x Q

  int size() const { return static_cast<int>(weights.size()); }
};

PsiCache build_psi_cache(const Mesh& mesh, const ElectrodeConfig& cfg,
                         const QuadratureRule& rule);

/// Dual perturbation basis on Omega per the constructive scheme: Gram matrix
/// of the psi family, its inverse (the psi-coefficients of the dual functions
/// kappa~_k) and the projected seed kappa_0.
struct PerturbationBasis {
  ElectrodeConfig electrodes{{0.0, 1.0}};
  PairIndex pairs{1};

  Eigen::MatrixXd gram;           // K x K
  Eigen::MatrixXd kappa_coeffs;   // K x K; row k: coefficients of kappa~_k in the psi basis
  Eigen::VectorXd kappa0_coeffs;  // psi-expansion part of kappa_0
  std::function<double(double, double)> kappa0_seed;  // unmasked seed
  double condition_estimate = 0.0;
  double kappa0_norm2 = 0.0;       // int_Omega kappa_0^2
  double kappa0_seed_norm2 = 0.0;  // int_Omega (kappa_0^#)^2

  // binary128 master copies (row-major K x K resp. length K)
  std::vector<Float128> gram_q;
  std::vector<Float128> kappa_coeffs_q;
  std::vector<Float128> kappa0_coeffs_q;
  Eigen::VectorXd seed_values;  // seed at cache points (empty until projected)

  int k_count() const { return pairs.k_count; }
};

/// Gram matrix A_kk' = int_Omega psi_k psi_k' dx by mesh quadrature.
Eigen::MatrixXd build_gram(const PsiCache& cache);
std::vector<Float128> build_gram_q(const PsiCache& cache, int k_count);

/// Inverts the Gram matrix through its diagonally pivoted Cholesky (LDL^T)
/// factorization. Throws GRAM_SINGULAR on pivot breakdown (numerically
/// dependent psi family, e.g. a duplicated electrode); the condition estimate
/// is the pivot ratio.
std::vector<Float128> build_dual_basis_q(const std::vector<Float128>& gram, int k_count,
                                         double* condition_estimate = nullptr);
Eigen::MatrixXd build_dual_basis(const Eigen::MatrixXd& gram,
                                 double* condition_estimate = nullptr);

/// Builds gram + dual coefficients for the electrode family on this mesh.
PerturbationBasis build_basis(const Mesh& mesh, const ElectrodeConfig& cfg,
                              const PsiCache& cache);

/// Projects the seed so that every pairing int_Omega kappa_0 psi_k vanishes:
/// kappa_0 = seed - sum_k (int seed psi_k) kappa~_k. Throws SEED_IN_SPAN when
/// the residual is numerically zero.
void project_kappa0(PerturbationBasis& basis, const std::function<double(double, double)>& seed,
                    const PsiCache& cache);

/// Pointwise evaluator of kappa = kappa_0 + sum tau_ij kappa_ij; exactly zero
/// outside the closure of Omega. tau_tri holds the pair-indexed entries.
std::function<double(const Eigen::Vector2d&)> kappa_eval(const PerturbationBasis& basis,
                                                         const Mesh& mesh,
                                                         const Eigen::VectorXd& tau_tri);
/// Same perturbation sampled on the cache quadrature table.
Eigen::VectorXd kappa_values(const PerturbationBasis& basis, const PsiCache& cache,
                             const Eigen::VectorXd& tau_tri);

struct DualityCheck {
  double max_duality_error = 0.0;   // max_kl |int kappa~_k psi_l - delta_kl|
  double max_kappa0_pairing = 0.0;  // max_k |int kappa_0 psi_k|
  Eigen::MatrixXd pairings;         // K x K
  Eigen::VectorXd kappa0_pairings;  // K
};

/// Re-evaluates the duality integrals with the same quadrature that built the
/// Gram matrix.
DualityCheck duality_check(const PerturbationBasis& basis, const PsiCache& cache);

}  // namespace pemcloak
