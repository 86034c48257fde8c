#include "pemcloak/basis.hpp"

#include <cmath>
#include <numeric>

namespace pemcloak {

namespace {

using F = Float128;

// Diagonally pivoted LDL^T of a symmetric positive definite matrix, in place.
// Returns the permutation; pivots land in diag. No square roots needed.
struct Ldlt {
  int n = 0;
  std::vector<F> lower;  // unit lower-triangular factors (row-major n x n)
  std::vector<F> diag;
  std::vector<int> perm;

  void factor(std::vector<F> a, int size) {
    n = size;
    perm.resize(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int k = 0; k < n; ++k) {
      int p = k;
      for (int i = k + 1; i < n; ++i) {
        if (a[i * n + i] > a[p * n + p]) p = i;
      }
      if (p != k) {
        std::swap(perm[k], perm[p]);
        for (int j = 0; j < n; ++j) std::swap(a[k * n + j], a[p * n + j]);
        for (int i = 0; i < n; ++i) std::swap(a[i * n + k], a[i * n + p]);
      }
      const F d = a[k * n + k];
      if (!(static_cast<double>(d) > 0.0)) break;  // pivot breakdown; caller checks diag
      std::vector<F> colk(n);
      for (int i = k + 1; i < n; ++i) colk[i] = a[i * n + k];
      // full trailing-block update keeps the submatrix symmetric across swaps
      for (int i = k + 1; i < n; ++i) {
        const F lik = colk[i] / d;
        for (int j = k + 1; j < n; ++j) a[i * n + j] -= lik * colk[j];
        a[i * n + k] = lik;
      }
    }
    lower = std::move(a);
    diag.resize(n);
    for (int k = 0; k < n; ++k) diag[k] = lower[k * n + k];
  }

  // Solves A x = b through P^T L D L^T P.
  void solve(const std::vector<F>& b, std::vector<F>& x) const {
    std::vector<F> y(n);
    for (int i = 0; i < n; ++i) y[i] = b[perm[i]];
    for (int i = 0; i < n; ++i) {
      F s = y[i];
      for (int j = 0; j < i; ++j) s -= lower[i * n + j] * y[j];
      y[i] = s;
    }
    for (int i = 0; i < n; ++i) y[i] /= diag[i];
    for (int i = n - 1; i >= 0; --i) {
      F s = y[i];
      for (int j = i + 1; j < n; ++j) s -= lower[j * n + i] * y[j];
      y[i] = s;
    }
    x.resize(n);
    for (int i = 0; i < n; ++i) x[perm[i]] = y[i];
  }
};

Eigen::MatrixXd to_dense(const std::vector<F>& a, int rows, int cols) {
  Eigen::MatrixXd out(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) out(i, j) = static_cast<double>(a[i * cols + j]);
  }
  return out;
}

}  // namespace

PsiCache build_psi_cache(const Mesh& mesh, const ElectrodeConfig& cfg,
                         const QuadratureRule& rule) {
  PsiCache cache;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    if (mesh.element_tags[e] == ElementTag::kInsideOmega) cache.elements.push_back(e);
  }
  const int nq = rule.size();
  cache.points_per_element = nq;
  const int total = static_cast<int>(cache.elements.size()) * nq;
  const int n = cfg.n();
  const int k_count = n * (n + 1) / 2;
  cache.weights.resize(total);
  cache.points.resize(2, total);
  cache.grad_u0.resize(2 * n, total);
  cache.psi.resize(k_count, total);

  int col = 0;
  for (int e : cache.elements) {
    const auto qps = physical_quad_points(mesh, e, rule);
    for (const auto& qp : qps) {
      cache.weights[col] = qp.weight;
      cache.points.col(col) = qp.x;
      const Eigen::Matrix2Xd g = u0_all_gradients(qp.x, cfg);
      for (int i = 0; i < n; ++i) cache.grad_u0.block<2, 1>(2 * i, col) = g.col(i);
      int k = 0;
      for (int j = 1; j <= n; ++j) {
        for (int i = 1; i <= j; ++i) {
          cache.psi(k++, col) = g.col(i - 1).dot(g.col(j - 1));
        }
      }
      ++col;
    }
  }
  return cache;
}

std::vector<Float128> build_gram_q(const PsiCache& cache, int k_count) {
  std::vector<F> gram(static_cast<size_t>(k_count) * k_count, F(0));
  std::vector<F> psi_q(k_count);
  for (int q = 0; q < cache.size(); ++q) {
    const F w = cache.weights[q];
    for (int k = 0; k < k_count; ++k) psi_q[k] = F(cache.psi(k, q)) * w;
    for (int i = 0; i < k_count; ++i) {
      const F pi = cache.psi(i, q);
      F* row = gram.data() + static_cast<size_t>(i) * k_count;
      for (int j = 0; j <= i; ++j) row[j] += pi * psi_q[j];
    }
  }
  for (int i = 0; i < k_count; ++i) {
    for (int j = i + 1; j < k_count; ++j) {
      gram[static_cast<size_t>(i) * k_count + j] = gram[static_cast<size_t>(j) * k_count + i];
    }
  }
  return gram;
}

Eigen::MatrixXd build_gram(const PsiCache& cache) {
  const int k_count = static_cast<int>(cache.psi.rows());
  return to_dense(build_gram_q(cache, k_count), k_count, k_count);
}

std::vector<Float128> build_dual_basis_q(const std::vector<Float128>& gram, int k_count,
                                         double* condition_estimate) {
  F trace = 0;
  for (int k = 0; k < k_count; ++k) trace += gram[static_cast<size_t>(k) * k_count + k];

  Ldlt ldlt;
  ldlt.factor(gram, k_count);
  F dmin = ldlt.diag[0], dmax = ldlt.diag[0];
  for (int k = 1; k < k_count; ++k) {
    if (ldlt.diag[k] < dmin) dmin = ldlt.diag[k];
    if (ldlt.diag[k] > dmax) dmax = ldlt.diag[k];
  }
  // The psi Gram is poorly conditioned even for healthy configurations (its
  // spectrum decays geometrically with the pair count), which is why the
  // factorization runs in binary128. Genuine rank loss, e.g. a duplicated
  // electrode, drops pivots many orders further; the cutoff sits between the
  // two regimes.
  if (!(static_cast<double>(dmin) > 1e-25 * static_cast<double>(trace))) {
    throw Error(ErrorCode::kGramSingular,
                "pivot " + std::to_string(static_cast<double>(dmin)) +
                    " below 1e-25 * trace = " + std::to_string(1e-25 * static_cast<double>(trace)) +
                    " (numerically dependent psi family)");
  }
  if (condition_estimate) {
    *condition_estimate = static_cast<double>(dmax / dmin);
  }

  std::vector<F> coeffs(static_cast<size_t>(k_count) * k_count);
  std::vector<F> e(k_count, F(0)), col(k_count);
  for (int j = 0; j < k_count; ++j) {
    e[j] = 1;
    ldlt.solve(e, col);
    e[j] = 0;
    for (int i = 0; i < k_count; ++i) coeffs[static_cast<size_t>(i) * k_count + j] = col[i];
  }
  // symmetrize: the inverse of a symmetric matrix
  for (int i = 0; i < k_count; ++i) {
    for (int j = 0; j < i; ++j) {
      const F avg = (coeffs[static_cast<size_t>(i) * k_count + j] +
                     coeffs[static_cast<size_t>(j) * k_count + i]) /
                    F(2);
      coeffs[static_cast<size_t>(i) * k_count + j] = avg;
      coeffs[static_cast<size_t>(j) * k_count + i] = avg;
    }
  }
  return coeffs;
}

Eigen::MatrixXd build_dual_basis(const Eigen::MatrixXd& gram, double* condition_estimate) {
  const int k_count = static_cast<int>(gram.rows());
  std::vector<F> g(static_cast<size_t>(k_count) * k_count);
  for (int i = 0; i < k_count; ++i) {
    for (int j = 0; j < k_count; ++j) g[static_cast<size_t>(i) * k_count + j] = gram(i, j);
  }
  return to_dense(build_dual_basis_q(g, k_count, condition_estimate), k_count, k_count);
}

PerturbationBasis build_basis(const Mesh&, const ElectrodeConfig& cfg,
                              const PsiCache& cache) {
  PerturbationBasis basis;
  basis.electrodes = cfg;
  basis.pairs = PairIndex(cfg.n());
  const int k_count = basis.k_count();
  basis.gram_q = build_gram_q(cache, k_count);
  basis.gram = to_dense(basis.gram_q, k_count, k_count);
  basis.kappa_coeffs_q = build_dual_basis_q(basis.gram_q, k_count, &basis.condition_estimate);
  basis.kappa_coeffs = to_dense(basis.kappa_coeffs_q, k_count, k_count);
  return basis;
}

void project_kappa0(PerturbationBasis& basis, const std::function<double(double, double)>& seed,
                    const PsiCache& cache) {
  const int k_count = basis.k_count();
  basis.kappa0_seed = seed;
  basis.seed_values.resize(cache.size());
  std::vector<F> pairings(k_count, F(0));
  F seed_norm2 = 0;
  for (int q = 0; q < cache.size(); ++q) {
    const double s = seed(cache.points(0, q), cache.points(1, q));
    basis.seed_values[q] = s;
    const F ws = F(cache.weights[q]) * F(s);
    seed_norm2 += ws * F(s);
    for (int k = 0; k < k_count; ++k) pairings[k] += ws * F(cache.psi(k, q));
  }
  basis.kappa0_seed_norm2 = static_cast<double>(seed_norm2);

  // kappa_0 = seed - sum_k c_k kappa~_k with c_k = int seed psi_k, so the
  // psi-expansion part is -C^T c.
  basis.kappa0_coeffs_q.assign(k_count, F(0));
  for (int k = 0; k < k_count; ++k) {
    F s = 0;
    for (int l = 0; l < k_count; ++l) {
      s += basis.kappa_coeffs_q[static_cast<size_t>(l) * k_count + k] * pairings[l];
    }
    basis.kappa0_coeffs_q[k] = -s;
  }
  basis.kappa0_coeffs.resize(k_count);
  for (int k = 0; k < k_count; ++k) {
    basis.kappa0_coeffs[k] = static_cast<double>(basis.kappa0_coeffs_q[k]);
  }

  F norm2 = 0;
  for (int q = 0; q < cache.size(); ++q) {
    F v = basis.seed_values[q];
    for (int k = 0; k < k_count; ++k) v += basis.kappa0_coeffs_q[k] * F(cache.psi(k, q));
    norm2 += F(cache.weights[q]) * v * v;
  }
  basis.kappa0_norm2 = static_cast<double>(norm2);
  if (basis.kappa0_seed_norm2 == 0.0 ||
      !(basis.kappa0_norm2 > 1e-12 * basis.kappa0_seed_norm2)) {
    throw Error(ErrorCode::kSeedInSpan,
                "projected seed residual " + std::to_string(basis.kappa0_norm2) +
                    " below 1e-12 * seed norm " + std::to_string(basis.kappa0_seed_norm2));
  }
}

namespace {

Eigen::VectorXd combination_weights(const PerturbationBasis& basis,
                                    const Eigen::VectorXd& tau_tri) {
  // kappa(tau) = seed + (kappa0_coeffs + C^T tau) . psi on Omega
  const int k_count = basis.k_count();
  Eigen::VectorXd w(k_count);
  for (int k = 0; k < k_count; ++k) {
    F s = basis.kappa0_coeffs_q.empty() ? F(0) : basis.kappa0_coeffs_q[k];
    for (int l = 0; l < k_count; ++l) {
      s += basis.kappa_coeffs_q[static_cast<size_t>(l) * k_count + k] * F(tau_tri[l]);
    }
    w[k] = static_cast<double>(s);
  }
  return w;
}

}  // namespace

std::function<double(const Eigen::Vector2d&)> kappa_eval(const PerturbationBasis& basis,
                                                         const Mesh& mesh,
                                                         const Eigen::VectorXd& tau_tri) {
  const Eigen::VectorXd w = combination_weights(basis, tau_tri);
  const OmegaSpec omega = mesh.omega;
  const ElectrodeConfig cfg = basis.electrodes;
  auto seed = basis.kappa0_seed;
  return [w, omega, cfg, seed](const Eigen::Vector2d& x) -> double {
    if (!omega.contains(x)) return 0.0;
    double v = seed ? seed(x.x(), x.y()) : 0.0;
    v += w.dot(psi_all(x, cfg));
    return v;
  };
}

Eigen::VectorXd kappa_values(const PerturbationBasis& basis, const PsiCache& cache,
                             const Eigen::VectorXd& tau_tri) {
  const Eigen::VectorXd w = combination_weights(basis, tau_tri);
  Eigen::VectorXd out = cache.psi.transpose() * w;
  if (basis.seed_values.size() == out.size()) out += basis.seed_values;
  return out;
}

DualityCheck duality_check(const PerturbationBasis& basis, const PsiCache& cache) {
  const int k_count = basis.k_count();
  std::vector<F> pair_q(static_cast<size_t>(k_count) * k_count, F(0));
  std::vector<F> k0_q(k_count, F(0));
  std::vector<F> psi_q(k_count), kap_q(k_count);
  const bool have_seed = basis.seed_values.size() == cache.size();
  for (int q = 0; q < cache.size(); ++q) {
    const F w = cache.weights[q];
    for (int k = 0; k < k_count; ++k) psi_q[k] = F(cache.psi(k, q));
    for (int k = 0; k < k_count; ++k) {
      F s = 0;
      const F* row = basis.kappa_coeffs_q.data() + static_cast<size_t>(k) * k_count;
      for (int l = 0; l < k_count; ++l) s += row[l] * psi_q[l];
      kap_q[k] = s * w;
    }
    for (int k = 0; k < k_count; ++k) {
      F* row = pair_q.data() + static_cast<size_t>(k) * k_count;
      const F kv = kap_q[k];
      for (int l = 0; l < k_count; ++l) row[l] += kv * psi_q[l];
    }
    if (have_seed) {
      F v = basis.seed_values[q];
      for (int k = 0; k < k_count; ++k) v += basis.kappa0_coeffs_q[k] * psi_q[k];
      const F wv = w * v;
      for (int k = 0; k < k_count; ++k) k0_q[k] += wv * psi_q[k];
    }
  }
  DualityCheck check;
  check.pairings = to_dense(pair_q, k_count, k_count);
  check.kappa0_pairings.resize(k_count);
  for (int k = 0; k < k_count; ++k) check.kappa0_pairings[k] = static_cast<double>(k0_q[k]);
  check.max_duality_error =
      (check.pairings - Eigen::MatrixXd::Identity(k_count, k_count)).cwiseAbs().maxCoeff();
  check.max_kappa0_pairing = have_seed ? check.kappa0_pairings.cwiseAbs().maxCoeff() : 0.0;
  return check;
}

}  // namespace pemcloak
