#include "pemcloak/fem.hpp"

#include <cmath>
#include <vector>

namespace pemcloak {

namespace {

struct RuleTables {
  std::vector<Eigen::Matrix<double, 6, 1>> values;
  std::vector<Eigen::Matrix<double, 6, 2>> gradients;
};

RuleTables reference_tables(const QuadratureRule& rule) {
  RuleTables t;
  t.values.reserve(rule.size());
  t.gradients.reserve(rule.size());
  for (int q = 0; q < rule.size(); ++q) {
    const Eigen::Vector3d bary = rule.points.row(q);
    t.values.push_back(p2_shape_values(bary));
    t.gradients.push_back(p2_shape_gradients(bary));
  }
  return t;
}

struct ElementQuadData {
  // per qp: physical point, physical weight, physical shape gradients (6x2)
  std::vector<Eigen::Vector2d> x;
  std::vector<double> w;
  std::vector<Eigen::Matrix<double, 6, 2>> grad;
};

void element_quad_data(const Mesh& mesh, int e, const QuadratureRule& rule, const RuleTables& t,
                       ElementQuadData& out, bool with_gradients) {
  const auto& tri = mesh.triangles[e];
  Eigen::Matrix<double, 2, 6> coords;
  for (int a = 0; a < 6; ++a) coords.col(a) = mesh.vertices[tri[a]];
  const bool curved = mesh.element_curved[e];
  const int nq = rule.size();
  out.x.resize(nq);
  out.w.resize(nq);
  if (with_gradients) out.grad.resize(nq);

  Eigen::Matrix2d jac, inv_t;
  double det = 0.0;
  if (!curved) {
    jac = coords * t.gradients[0];
    det = jac.determinant();
    if (with_gradients) {
      inv_t << jac(1, 1), -jac(0, 1), -jac(1, 0), jac(0, 0);
      inv_t /= det;
    }
  }
  for (int q = 0; q < nq; ++q) {
    out.x[q] = coords * t.values[q];
    if (curved) {
      jac = coords * t.gradients[q];
      det = jac.determinant();
      if (with_gradients) {
        inv_t << jac(1, 1), -jac(0, 1), -jac(1, 0), jac(0, 0);
        inv_t /= det;
      }
    }
    out.w[q] = rule.weights[q] * det;
    if (with_gradients) out.grad[q] = t.gradients[q] * inv_t;
  }
}

}  // namespace

FieldOnMesh FieldOnMesh::coefficients(Eigen::VectorXd coeffs) {
  FieldOnMesh f;
  f.coeffs_ = std::move(coeffs);
  return f;
}

FieldOnMesh FieldOnMesh::callable(QuadFn fn) {
  FieldOnMesh f;
  f.fn_ = std::move(fn);
  return f;
}

FieldOnMesh FieldOnMesh::constant(double value) {
  return callable([value](int, int, const Eigen::Vector2d&) { return value; });
}

const Eigen::VectorXd& FieldOnMesh::coeffs() const {
  if (!coeffs_) throw Error(ErrorCode::kValidationError, "field holds no coefficient vector");
  return *coeffs_;
}

double FieldOnMesh::sample(int element, int qp, const Eigen::Vector2d& x) const {
  if (!fn_) throw Error(ErrorCode::kValidationError, "field is not callable");
  return fn_(element, qp, x);
}

SparseSystem assemble_stiffness(const Mesh& mesh, const FieldOnMesh& sigma) {
  return assemble_stiffness(mesh, sigma, quadrature(kAssemblyQuadratureDegree));
}

SparseSystem assemble_stiffness(const Mesh& mesh, const FieldOnMesh& sigma,
                                const QuadratureRule& rule) {
  const RuleTables tables = reference_tables(rule);
  const int n = mesh.num_nodes();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<size_t>(mesh.num_elements()) * 36);
  Eigen::VectorXd mean_row = Eigen::VectorXd::Zero(n);

  ElementQuadData data;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    element_quad_data(mesh, e, rule, tables, data, true);
    const auto& tri = mesh.triangles[e];
    Eigen::Matrix<double, 6, 6> local = Eigen::Matrix<double, 6, 6>::Zero();
    for (int q = 0; q < rule.size(); ++q) {
      const double s = sigma.sample(e, q, data.x[q]);
      if (!(s > 0.0)) {
        throw Error(ErrorCode::kNonpositiveConductivity,
                    "sigma = " + std::to_string(s) + " at (" + std::to_string(data.x[q].x()) +
                        ", " + std::to_string(data.x[q].y()) + ")");
      }
      local.noalias() += (data.w[q] * s) * (data.grad[q] * data.grad[q].transpose());
      for (int a = 0; a < 6; ++a) mean_row[tri[a]] += data.w[q] * tables.values[q][a];
    }
    for (int a = 0; a < 6; ++a) {
      for (int b = 0; b < 6; ++b) triplets.emplace_back(tri[a], tri[b], local(a, b));
    }
  }
  SparseSystem sys;
  sys.matrix.resize(n, n);
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  sys.matrix.makeCompressed();
  sys.mean_row = std::move(mean_row);
  sys.max_abs = 0.0;
  for (int k = 0; k < sys.matrix.nonZeros(); ++k) {
    sys.max_abs = std::max(sys.max_abs, std::abs(sys.matrix.valuePtr()[k]));
  }
  return sys;
}

Eigen::VectorXd assemble_corrector_load(const Mesh& mesh, const FieldOnMesh& kappa,
                                        const GradFn& grad_u0) {
  return assemble_corrector_load(mesh, kappa, grad_u0, quadrature(kAssemblyQuadratureDegree));
}

Eigen::VectorXd assemble_corrector_load(const Mesh& mesh, const FieldOnMesh& kappa,
                                        const GradFn& grad_u0, const QuadratureRule& rule) {
  const RuleTables tables = reference_tables(rule);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.num_nodes());
  ElementQuadData data;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const bool inside = mesh.element_tags[e] == ElementTag::kInsideOmega;
    element_quad_data(mesh, e, rule, tables, data, inside);
    for (int q = 0; q < rule.size(); ++q) {
      const double k = kappa.sample(e, q, data.x[q]);
      if (!inside) {
        if (std::abs(k) > 1e-14) {
          throw Error(ErrorCode::kSupportViolation,
                      "kappa = " + std::to_string(k) + " at an OUTSIDE_OMEGA point (" +
                          std::to_string(data.x[q].x()) + ", " + std::to_string(data.x[q].y()) +
                          ")");
        }
        continue;
      }
      if (k == 0.0) continue;
      const Eigen::Vector2d g = grad_u0(data.x[q]);
      const Eigen::Matrix<double, 6, 1> contrib = data.grad[q] * ((data.w[q] * k) * g);
      const auto& tri = mesh.triangles[e];
      for (int a = 0; a < 6; ++a) b[tri[a]] += contrib[a];
    }
  }
  return b;
}

Eigen::VectorXd assemble_boundary_load(
    const Mesh& mesh,
    const std::function<double(const Eigen::Vector2d&, const Eigen::Vector2d&)>& g,
    int gauss_points) {
  Eigen::VectorXd nodes1d, weights1d;
  gauss_legendre_01(gauss_points, nodes1d, weights1d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.num_nodes());
  for (const BoundaryEdge& edge : mesh.boundary_edges) {
    const Eigen::Vector2d p0 = mesh.vertices[edge.n0];
    const Eigen::Vector2d p1 = mesh.vertices[edge.n1];
    const Eigen::Vector2d pm = mesh.vertices[edge.mid];
    for (int q = 0; q < gauss_points; ++q) {
      const double s = nodes1d[q];
      // quadratic edge shapes at s in [0,1], nodes (n0, n1, mid)
      const double l0 = (1.0 - s) * (1.0 - 2.0 * s);
      const double l1 = s * (2.0 * s - 1.0);
      const double lm = 4.0 * s * (1.0 - s);
      const double d0 = 4.0 * s - 3.0;
      const double d1 = 4.0 * s - 1.0;
      const double dm = 4.0 - 8.0 * s;
      const Eigen::Vector2d x = l0 * p0 + l1 * p1 + lm * pm;
      const Eigen::Vector2d tangent = d0 * p0 + d1 * p1 + dm * pm;
      const double ds = tangent.norm();
      const Eigen::Vector2d normal(tangent.y() / ds, -tangent.x() / ds);
      const double gv = g(x, normal) * weights1d[q] * ds;
      b[edge.n0] += gv * l0;
      b[edge.n1] += gv * l1;
      b[edge.mid] += gv * lm;
    }
  }
  return b;
}

CgReport constrained_cg(const Eigen::SparseMatrix<double>& matrix, const Eigen::VectorXd& rhs,
                        const Eigen::VectorXd& constraint, Eigen::VectorXd& x, double tol,
                        int max_iterations) {
  const double cc = constraint.squaredNorm();
  auto project = [&](Eigen::VectorXd& v) { v -= (constraint.dot(v) / cc) * constraint; };

  Eigen::VectorXd diag = matrix.diagonal();
  for (int i = 0; i < diag.size(); ++i) {
    if (diag[i] <= 0.0) diag[i] = 1.0;
  }

  if (x.size() != rhs.size()) x = Eigen::VectorXd::Zero(rhs.size());
  project(x);
  Eigen::VectorXd b = rhs;
  project(b);
  const double b_norm = b.norm();
  CgReport report;
  if (b_norm == 0.0) {
    x.setZero();
    return report;
  }

  Eigen::VectorXd r = b - matrix * x;
  project(r);
  Eigen::VectorXd z = (r.array() / diag.array()).matrix();
  project(z);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  Eigen::VectorXd q(r.size());

  for (int it = 1; it <= max_iterations; ++it) {
    q.noalias() = matrix * p;
    project(q);
    const double pq = p.dot(q);
    if (!(pq > 0.0)) {
      throw Error(ErrorCode::kNoConvergence, "projected CG broke down (pᵀAp <= 0)");
    }
    const double alpha = rz / pq;
    x += alpha * p;
    r -= alpha * q;
    if (it % 50 == 0) {
      // guard against residual drift on long runs
      r = b - matrix * x;
      project(r);
    }
    const double rel = r.norm() / b_norm;
    if (rel <= tol) {
      report.iterations = it;
      report.relative_residual = rel;
      return report;
    }
    z = (r.array() / diag.array()).matrix();
    project(z);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  // accept only if the recomputed true residual meets the tolerance
  r = b - matrix * x;
  project(r);
  const double rel = r.norm() / b_norm;
  if (rel <= tol) {
    report.iterations = max_iterations;
    report.relative_residual = rel;
    return report;
  }
  throw Error(ErrorCode::kNoConvergence,
              "projected CG: relative residual " + std::to_string(rel) + " after " +
                  std::to_string(max_iterations) + " iterations");
}

FieldOnMesh solve_neumann(const SparseSystem& system, const Eigen::VectorXd& load, double tol,
                          const NeumannSolveOptions& options) {
  const int n = static_cast<int>(load.size());
  const double load_l1 = load.lpNorm<1>();
  if (load_l1 == 0.0) {
    return FieldOnMesh::coefficients(Eigen::VectorXd::Zero(n));
  }
  const double compat = std::abs(load.sum());
  if (compat > 1e-8 * load_l1) {
    throw Error(ErrorCode::kIncompatibleLoad,
                "load pairs with constants: |sum| = " + std::to_string(compat) + " vs ||b||_1 = " +
                    std::to_string(load_l1));
  }
  Eigen::VectorXd x;
  if (options.initial_guess && options.initial_guess->size() == n) {
    x = *options.initial_guess;
  } else {
    x = Eigen::VectorXd::Zero(n);
  }
  int cap = options.max_iterations;
  if (cap <= 0) cap = std::max(2000, 40 * static_cast<int>(std::sqrt(double(n))) + n / 4);
  constrained_cg(system.matrix, load, system.mean_row, x, tol, cap);
  // pin the quotient representative: integral of u over D exactly zero
  const double area = system.mean_row.sum();
  x.array() -= system.mean_row.dot(x) / area;
  return FieldOnMesh::coefficients(std::move(x));
}

Eigen::Matrix2Xd fe_gradient_at_quadrature(const Mesh& mesh, const Eigen::VectorXd& coeffs,
                                           const QuadratureRule& rule) {
  const RuleTables tables = reference_tables(rule);
  const int nq = rule.size();
  Eigen::Matrix2Xd out(2, static_cast<Eigen::Index>(mesh.num_elements()) * nq);
  ElementQuadData data;
  Eigen::Matrix<double, 6, 1> local;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    element_quad_data(mesh, e, rule, tables, data, true);
    const auto& tri = mesh.triangles[e];
    for (int a = 0; a < 6; ++a) local[a] = coeffs[tri[a]];
    for (int q = 0; q < nq; ++q) {
      out.col(static_cast<Eigen::Index>(e) * nq + q) = data.grad[q].transpose() * local;
    }
  }
  return out;
}

double integrate(const Mesh& mesh, const QuadratureRule& rule, Region region, const QuadFn& fn) {
  const RuleTables tables = reference_tables(rule);
  double sum = 0.0;
  ElementQuadData data;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    if (region == Region::kInsideOmega && mesh.element_tags[e] != ElementTag::kInsideOmega) {
      continue;
    }
    element_quad_data(mesh, e, rule, tables, data, false);
    for (int q = 0; q < rule.size(); ++q) sum += data.w[q] * fn(e, q, data.x[q]);
  }
  return sum;
}

double evaluate_at_point(const Mesh& mesh, const Eigen::VectorXd& coeffs,
                         const Eigen::Vector2d& x) {
  Eigen::Vector3d bary;
  const int e = locate_point(mesh, x, bary);
  if (e < 0) {
    throw Error(ErrorCode::kValidationError, "point (" + std::to_string(x.x()) + ", " +
                                                 std::to_string(x.y()) + ") is outside the mesh");
  }
  const auto n = p2_shape_values(bary);
  double v = 0.0;
  for (int a = 0; a < 6; ++a) v += coeffs[mesh.triangles[e][a]] * n[a];
  return v;
}

}  // namespace pemcloak
