#include "pemcloak/solver.hpp"

#include <cmath>
#include <limits>

namespace pemcloak {

Eigen::MatrixXd SymMatrix::dense() const {
  const int size = n();
  Eigen::MatrixXd out(size, size);
  for (int i = 1; i <= size; ++i) {
    for (int j = 1; j <= size; ++j) out(i - 1, j - 1) = (*this)(i, j);
  }
  return out;
}

double SymMatrix::full_abs_distance(const SymMatrix& a, const SymMatrix& b) {
  const PairIndex pairs(a.n());
  double sum = 0.0;
  for (int k = 1; k <= pairs.k_count; ++k) {
    const auto [i, j] = pairs.pair(k);
    sum += (i == j ? 1.0 : 2.0) * std::abs(a.tri()[k - 1] - b.tri()[k - 1]);
  }
  return sum;
}

void RunConfig::validate() const {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::kValidationError, "epsilon must be positive");
  if (!(stop_tol > 0.0 && stop_tol < 1.0)) {
    throw Error(ErrorCode::kValidationError, "stop_tol must lie in (0, 1)");
  }
  if (max_iter < 1) throw Error(ErrorCode::kValidationError, "max_iter must be >= 1");
  if (!(gamma_max > 0.0)) throw Error(ErrorCode::kValidationError, "gamma_max must be positive");
  if (!(epsilon_backoff > 0.0 && epsilon_backoff < 1.0)) {
    throw Error(ErrorCode::kValidationError, "epsilon_backoff must lie in (0, 1)");
  }
  if (!(min_sigma > 0.0)) throw Error(ErrorCode::kValidationError, "min_sigma must be positive");
  if (max_backoffs < 0) throw Error(ErrorCode::kValidationError, "max_backoffs must be >= 0");
}

namespace {

/// Shared machinery for the corrector solves: the conductivity is 1 outside
/// Omega, so that part of the stiffness matrix is assembled once; the inside
/// part is re-assembled from the kappa table each iteration.
class CorrectorEngine {
 public:
  CorrectorEngine(const Mesh& mesh, const PerturbationBasis& basis, const PsiCache& cache,
                  double min_sigma, double solver_tol)
      : mesh_(mesh),
        basis_(basis),
        cache_(cache),
        rule_(quadrature(kAssemblyQuadratureDegree)),
        min_sigma_(min_sigma),
        solver_tol_(solver_tol) {
    const int n_nodes = mesh.num_nodes();
    const int nq = rule_.size();
    std::vector<Eigen::Matrix<double, 6, 1>> shape_values;
    std::vector<Eigen::Matrix<double, 6, 2>> shape_grads;
    for (int q = 0; q < nq; ++q) {
      const Eigen::Vector3d bary = rule_.points.row(q);
      shape_values.push_back(p2_shape_values(bary));
      shape_grads.push_back(p2_shape_gradients(bary));
    }

    mean_row_ = Eigen::VectorXd::Zero(n_nodes);
    std::vector<Eigen::Triplet<double>> outside;
    std::vector<bool> inside_flag(mesh.num_elements(), false);
    for (int e : cache.elements) inside_flag[e] = true;

    Eigen::Matrix<double, 2, 6> coords;
    for (int e = 0; e < mesh.num_elements(); ++e) {
      const auto& tri = mesh.triangles[e];
      for (int a = 0; a < 6; ++a) coords.col(a) = mesh.vertices[tri[a]];
      const bool curved = mesh.element_curved[e];
      Eigen::Matrix2d jac = coords * shape_grads[0];
      double det = jac.determinant();
      Eigen::Matrix2d inv_t;
      Eigen::Matrix<double, 6, 6> local = Eigen::Matrix<double, 6, 6>::Zero();
      for (int q = 0; q < nq; ++q) {
        if (curved || q == 0) {
          jac = coords * shape_grads[q];
          det = jac.determinant();
          inv_t << jac(1, 1), -jac(0, 1), -jac(1, 0), jac(0, 0);
          inv_t /= det;
        }
        const double w = rule_.weights[q] * det;
        const Eigen::Matrix<double, 6, 2> grad = shape_grads[q] * inv_t;
        for (int a = 0; a < 6; ++a) mean_row_[tri[a]] += w * shape_values[q][a];
        if (inside_flag[e]) {
          inside_grad_.push_back(grad);
        } else {
          local.noalias() += w * (grad * grad.transpose());
        }
      }
      if (!inside_flag[e]) {
        for (int a = 0; a < 6; ++a) {
          for (int b = 0; b < 6; ++b) outside.emplace_back(tri[a], tri[b], local(a, b));
        }
      }
    }
    outside_matrix_.resize(n_nodes, n_nodes);
    outside_matrix_.setFromTriplets(outside.begin(), outside.end());
    outside_matrix_.makeCompressed();
  }

  struct State {
    Eigen::VectorXd kappa;            // at cache points
    double min_sigma_value = 1.0;     // min over all quadrature points (1 outside)
    std::vector<Eigen::VectorXd> u_tilde;  // P2 coefficients per electrode (1..N)
    Eigen::MatrixXd grad_ut;          // 2N x Q at cache points
  };

  /// Positivity check + stiffness + corrector solves for every electrode.
  State compute(const SymMatrix& tau, double epsilon, std::vector<Eigen::VectorXd>* warm) {
    const int n = basis_.electrodes.n();
    State st;
    st.kappa = kappa_values(basis_, cache_, tau.tri());
    st.min_sigma_value =
        std::min(1.0, 1.0 + epsilon * (st.kappa.size() ? st.kappa.minCoeff() : 0.0));
    if (!(st.min_sigma_value >= min_sigma_)) {
      throw Error(ErrorCode::kPositivityViolation,
                  "min sigma_eps = " + std::to_string(st.min_sigma_value) + " below floor " +
                      std::to_string(min_sigma_));
    }

    SparseSystem system;
    system.matrix = outside_matrix_ + inside_stiffness(st.kappa, epsilon);
    system.mean_row = mean_row_;

    st.u_tilde.resize(n);
    st.grad_ut.setZero(2 * n, cache_.size());
    const int nq = cache_.points_per_element;
    for (int i = 0; i < n; ++i) {
      // weak form of div(sigma_eps grad u~) = -div(kappa grad u0):
      //   int sigma_eps grad(u~).grad(v) = -int kappa grad(u0).grad(v)
      Eigen::VectorXd load = -corrector_load(st.kappa, i);
      NeumannSolveOptions options;
      if (warm && static_cast<int>(warm->size()) == n && (*warm)[i].size()) {
        options.initial_guess = &(*warm)[i];
      }
      st.u_tilde[i] = solve_neumann(system, load, solver_tol_, options).coeffs();
      if (warm) {
        warm->resize(n);
        (*warm)[i] = st.u_tilde[i];
      }
      // gradients at the cache points
      Eigen::Matrix<double, 6, 1> local;
      for (size_t ei = 0; ei < cache_.elements.size(); ++ei) {
        const auto& tri = mesh_.triangles[cache_.elements[ei]];
        for (int a = 0; a < 6; ++a) local[a] = st.u_tilde[i][tri[a]];
        for (int q = 0; q < nq; ++q) {
          const int col = static_cast<int>(ei) * nq + q;
          st.grad_ut.block<2, 1>(2 * i, col) =
              inside_grad_[col].transpose() * local;
        }
      }
    }
    return st;
  }

  /// I_k = int kappa grad(u_eps_i) . grad(u0_j) dx for pairs k = (i <= j),
  /// with u_eps_i = u0_i + epsilon u~_i.
  Eigen::VectorXd update_integrals(const State& st, double epsilon) const {
    const int n = basis_.electrodes.n();
    const int k_count = n * (n + 1) / 2;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(k_count);
    for (int col = 0; col < cache_.size(); ++col) {
      const double wk = cache_.weights[col] * st.kappa[col];
      if (wk == 0.0) continue;
      int k = 0;
      for (int j = 1; j <= n; ++j) {
        const Eigen::Vector2d g0j = cache_.grad_u0.block<2, 1>(2 * (j - 1), col);
        for (int i = 1; i <= j; ++i) {
          const Eigen::Vector2d ge_i =
              cache_.grad_u0.block<2, 1>(2 * (i - 1), col) +
              epsilon * st.grad_ut.block<2, 1>(2 * (i - 1), col);
          out[k++] += wk * ge_i.dot(g0j);
        }
      }
    }
    return out;
  }

  /// M_k = -eps int kappa psi_k - eps^2 int kappa grad(u~_i) . grad(u0_j).
  Eigen::VectorXd measurement_integrals(const State& st, double epsilon) const {
    const int n = basis_.electrodes.n();
    const int k_count = n * (n + 1) / 2;
    Eigen::VectorXd first = Eigen::VectorXd::Zero(k_count);
    Eigen::VectorXd second = Eigen::VectorXd::Zero(k_count);
    for (int col = 0; col < cache_.size(); ++col) {
      const double wk = cache_.weights[col] * st.kappa[col];
      if (wk == 0.0) continue;
      int k = 0;
      for (int j = 1; j <= n; ++j) {
        const Eigen::Vector2d g0j = cache_.grad_u0.block<2, 1>(2 * (j - 1), col);
        for (int i = 1; i <= j; ++i) {
          first[k] += wk * cache_.psi(k, col);
          second[k] += wk * st.grad_ut.block<2, 1>(2 * (i - 1), col).dot(g0j);
          ++k;
        }
      }
    }
    return -epsilon * first - epsilon * epsilon * second;
  }

  const PsiCache& cache() const { return cache_; }

 private:
  Eigen::SparseMatrix<double> inside_stiffness(const Eigen::VectorXd& kappa,
                                               double epsilon) const {
    const int nq = cache_.points_per_element;
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(cache_.elements.size() * 36);
    for (size_t ei = 0; ei < cache_.elements.size(); ++ei) {
      const auto& tri = mesh_.triangles[cache_.elements[ei]];
      Eigen::Matrix<double, 6, 6> local = Eigen::Matrix<double, 6, 6>::Zero();
      for (int q = 0; q < nq; ++q) {
        const int col = static_cast<int>(ei) * nq + q;
        const double ws = cache_.weights[col] * (1.0 + epsilon * kappa[col]);
        local.noalias() += ws * (inside_grad_[col] * inside_grad_[col].transpose());
      }
      for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) triplets.emplace_back(tri[a], tri[b], local(a, b));
      }
    }
    Eigen::SparseMatrix<double> m(mesh_.num_nodes(), mesh_.num_nodes());
    m.setFromTriplets(triplets.begin(), triplets.end());
    return m;
  }

  Eigen::VectorXd corrector_load(const Eigen::VectorXd& kappa, int i) const {
    const int nq = cache_.points_per_element;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh_.num_nodes());
    for (size_t ei = 0; ei < cache_.elements.size(); ++ei) {
      const auto& tri = mesh_.triangles[cache_.elements[ei]];
      for (int q = 0; q < nq; ++q) {
        const int col = static_cast<int>(ei) * nq + q;
        const double wk = cache_.weights[col] * kappa[col];
        if (wk == 0.0) continue;
        const Eigen::Vector2d g = cache_.grad_u0.block<2, 1>(2 * i, col);
        const Eigen::Matrix<double, 6, 1> contrib = inside_grad_[col] * (wk * g);
        for (int a = 0; a < 6; ++a) b[tri[a]] += contrib[a];
      }
    }
    return b;
  }

  const Mesh& mesh_;
  const PerturbationBasis& basis_;
  const PsiCache& cache_;
  QuadratureRule rule_;
  double min_sigma_;
  double solver_tol_;
  Eigen::VectorXd mean_row_;
  Eigen::SparseMatrix<double> outside_matrix_;
  std::vector<Eigen::Matrix<double, 6, 2>> inside_grad_;
};

SymMatrix tau_from_tri(int n, const Eigen::VectorXd& tri) {
  SymMatrix m(n);
  m.tri() = tri;
  return m;
}

}  // namespace

FieldOnMesh solve_corrector(const Mesh& mesh, const PerturbationBasis& basis,
                            const PsiCache& cache, const SymMatrix& tau, double epsilon, int n,
                            double min_sigma, double solver_tol) {
  if (n < 1 || n > basis.electrodes.n()) {
    throw Error(ErrorCode::kValidationError, "electrode index out of range");
  }
  CorrectorEngine engine(mesh, basis, cache, min_sigma, solver_tol);
  auto st = engine.compute(tau, epsilon, nullptr);
  return FieldOnMesh::coefficients(std::move(st.u_tilde[n - 1]));
}

SymMatrix fixed_point_step(const Mesh& mesh, const PerturbationBasis& basis,
                           const PsiCache& cache, const SymMatrix& tau, double epsilon,
                           double min_sigma, double solver_tol) {
  CorrectorEngine engine(mesh, basis, cache, min_sigma, solver_tol);
  const auto st = engine.compute(tau, epsilon, nullptr);
  return tau_from_tri(tau.n(), tau.tri() - engine.update_integrals(st, epsilon));
}

SymMatrix pem_measurement_matrix(const Mesh& mesh, const PerturbationBasis& basis,
                                 const PsiCache& cache, const SymMatrix& tau, double epsilon,
                                 double min_sigma, double solver_tol) {
  const int n = basis.electrodes.n();
  if (epsilon == 0.0) return SymMatrix(n);  // M(sigma_0) = 0 exactly
  CorrectorEngine engine(mesh, basis, cache, min_sigma, solver_tol);
  const auto st = engine.compute(tau, epsilon, nullptr);
  return tau_from_tri(n, engine.measurement_integrals(st, epsilon));
}

RunResult run_algorithm(const Mesh& mesh, const PerturbationBasis& basis, const PsiCache& cache,
                        const RunConfig& config) {
  config.validate();
  const int n = basis.electrodes.n();
  SymMatrix tau0 = config.tau0.value_or(SymMatrix(n));
  if (tau0.n() != n) {
    throw Error(ErrorCode::kValidationError, "tau0 size does not match the electrode count");
  }

  CorrectorEngine engine(mesh, basis, cache, config.min_sigma, 1e-12);

  RunReport report;
  report.epsilon_requested = config.epsilon;
  double epsilon = config.epsilon;
  SymMatrix tau = tau0;
  std::vector<Eigen::VectorXd> warm;

  for (;;) {
    report.discrepancy_history.clear();
    report.tau_max_history.clear();
    report.min_sigma_history.clear();
    report.converged = false;
    report.failure.clear();
    warm.clear();
    tau = tau0;
    bool diverged = false;
    int increases = 0;
    double prev_disc = std::numeric_limits<double>::infinity();

    for (int iter = 1; iter <= config.max_iter; ++iter) {
      CorrectorEngine::State st;
      try {
        st = engine.compute(tau, epsilon, &warm);
      } catch (const Error& err) {
        if (err.code() == ErrorCode::kPositivityViolation) {
          diverged = true;  // inadmissible iterate; shrink epsilon
          break;
        }
        throw;
      }
      const Eigen::VectorXd update = engine.update_integrals(st, epsilon);
      const SymMatrix tau_next = tau_from_tri(n, tau.tri() - update);
      const double disc = SymMatrix::full_abs_distance(tau_next, tau);
      report.discrepancy_history.push_back(disc);
      report.tau_max_history.push_back(tau_next.max_abs());
      report.min_sigma_history.push_back(st.min_sigma_value);
      report.iterations = iter;
      tau = tau_next;
      if (disc < config.stop_tol) {
        report.converged = true;
        break;
      }
      if (!std::isfinite(disc) || tau.max_abs() > config.gamma_max) {
        diverged = true;
        break;
      }
      increases = (disc >= prev_disc) ? increases + 1 : 0;
      if (increases >= 3) {
        diverged = true;
        break;
      }
      prev_disc = disc;
    }

    if (report.converged) break;
    if (diverged) {
      if (report.backoff_count >= config.max_backoffs) {
        throw Error(ErrorCode::kMaxBackoffsExceeded,
                    "still divergent after " + std::to_string(report.backoff_count) +
                        " backoffs (last epsilon " + std::to_string(epsilon) + ")");
      }
      epsilon *= config.epsilon_backoff;
      ++report.backoff_count;
      continue;
    }
    report.failure = "MAX_ITER_EXCEEDED";
    break;
  }

  report.epsilon_used = epsilon;
  report.tau_final = tau;

  const Eigen::VectorXd kappa_final = kappa_values(basis, cache, tau.tri());
  report.min_sigma_final =
      std::min(1.0, 1.0 + epsilon * (kappa_final.size() ? kappa_final.minCoeff() : 0.0));
  {
    const auto st = engine.compute(tau, epsilon, nullptr);
    report.measurement_max =
        tau_from_tri(n, engine.measurement_integrals(st, epsilon)).max_abs();
  }

  RunResult result;
  result.report = std::move(report);
  auto kappa_fn = kappa_eval(basis, mesh, tau.tri());
  const double eps_used = result.report.epsilon_used;
  result.sigma_eps = [kappa_fn, eps_used](const Eigen::Vector2d& x) {
    return 1.0 + eps_used * kappa_fn(x);
  };
  return result;
}

Eigen::VectorXd measurement_map_apply(const SymMatrix& m, const Eigen::VectorXd& current) {
  const int n = m.n();
  if (current.size() != n + 1) {
    throw Error(ErrorCode::kValidationError, "current vector must have length N+1");
  }
  const double scale = std::max(1.0, current.cwiseAbs().maxCoeff());
  if (std::abs(current.sum()) > 1e-12 * scale) {
    throw Error(ErrorCode::kNotMeanFree,
                "current sums to " + std::to_string(current.sum()) + ", expected 0 within 1e-12");
  }
  // current = sum_{j>=1} current_j (e^j - e^0); relative voltages against the
  // ground electrode, then the mean-free representative
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n + 1);
  for (int i = 1; i <= n; ++i) {
    double s = 0.0;
    for (int j = 1; j <= n; ++j) s += m(i, j) * current[j];
    w[i] = s;
  }
  w.array() -= w.mean();
  return w;
}

}  // namespace pemcloak
