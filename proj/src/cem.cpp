#include "pemcloak/cem.hpp"

#include <cmath>

namespace pemcloak {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double t) {
  double v = std::fmod(t, kTwoPi);
  if (v < 0.0) v += kTwoPi;
  return v;
}

struct ArcEdges {
  std::vector<int> edges;   // indices into mesh.boundary_edges
  double angular_length = 0.0;
};

// Boundary edges covering each electrode arc; arcs decompose exactly into
// whole edges because the mesh pins the arc endpoints.
std::vector<ArcEdges> collect_arc_edges(const Mesh& mesh, const CemElectrodes& electrodes) {
  std::vector<ArcEdges> arcs(electrodes.count());
  for (int l = 0; l < electrodes.count(); ++l) {
    const double lo = wrap_angle(electrodes.centers[l] - electrodes.width / 2.0);
    for (int b = 0; b < static_cast<int>(mesh.boundary_edges.size()); ++b) {
      const BoundaryEdge& edge = mesh.boundary_edges[b];
      double rel = wrap_angle(edge.theta0 - lo);
      if (rel > kTwoPi - 1e-9) rel -= kTwoPi;  // endpoint hit from below
      const double span = edge.theta1 - edge.theta0;
      if (rel <= electrodes.width + 1e-10 && rel + span <= electrodes.width + 1e-10) {
        arcs[l].edges.push_back(b);
        arcs[l].angular_length += span;
      }
    }
    if (std::abs(arcs[l].angular_length - electrodes.width) > 1e-9) {
      throw Error(ErrorCode::kArcsNotResolved,
                  "electrode " + std::to_string(l) + " covers angular length " +
                      std::to_string(arcs[l].angular_length) + " of requested width " +
                      std::to_string(electrodes.width) +
                      " (build the mesh with matching cem_width)");
    }
  }
  return arcs;
}

}  // namespace

void CemElectrodes::validate() const {
  if (count() < 2) throw Error(ErrorCode::kValidationError, "at least 2 electrodes required");
  if (!(width > 0.0)) throw Error(ErrorCode::kValidationError, "electrode width must be positive");
  if (!(contact_impedance > 0.0)) {
    throw Error(ErrorCode::kValidationError, "contact impedance must be positive");
  }
  for (int a = 0; a < count(); ++a) {
    for (int b = a + 1; b < count(); ++b) {
      double gap = std::abs(std::remainder(centers[a] - centers[b], kTwoPi));
      if (gap < width) {
        throw Error(ErrorCode::kValidationError,
                    "electrode arcs " + std::to_string(a) + " and " + std::to_string(b) +
                        " overlap");
      }
    }
  }
}

std::vector<Eigen::VectorXd> trig_current_basis(const std::vector<double>& center_angles) {
  const int l_count = static_cast<int>(center_angles.size());
  if (l_count < 2) throw Error(ErrorCode::kValidationError, "at least 2 electrodes required");
  std::vector<Eigen::VectorXd> basis;
  basis.reserve(l_count - 1);
  for (int j = 1; j <= l_count - 1; ++j) {
    const int m = (j + 1) / 2;
    Eigen::VectorXd v(l_count);
    for (int l = 0; l < l_count; ++l) {
      v[l] = (j % 2 == 1) ? std::cos(m * center_angles[l]) : std::sin(m * center_angles[l]);
    }
    v.array() -= v.mean();
    basis.push_back(std::move(v));
  }
  return basis;
}

CemSolution solve_cem(const Mesh& mesh, const std::function<double(const Eigen::Vector2d&)>& sigma,
                      const CemElectrodes& electrodes, const Eigen::VectorXd& current,
                      double tol) {
  electrodes.validate();
  const int l_count = electrodes.count();
  if (current.size() != l_count) {
    throw Error(ErrorCode::kValidationError, "current vector length must equal electrode count");
  }
  const double scale = std::max(1.0, current.cwiseAbs().maxCoeff());
  if (std::abs(current.sum()) > 1e-12 * scale) {
    throw Error(ErrorCode::kNotMeanFree, "net currents must sum to zero");
  }
  const auto arcs = collect_arc_edges(mesh, electrodes);

  const int n = mesh.num_nodes();
  SparseSystem stiffness = assemble_stiffness(
      mesh, FieldOnMesh::callable([&sigma](int, int, const Eigen::Vector2d& x) { return sigma(x); }));

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(stiffness.matrix.nonZeros() + 64 * l_count);
  for (int k = 0; k < stiffness.matrix.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(stiffness.matrix, k); it; ++it) {
      triplets.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
  }

  // Electrode boundary terms with 4-point Gauss per curved edge:
  //   (1/z) [ int_E phi_p phi_q,  -int_E phi_p,  |E| ]
  Eigen::VectorXd gauss_x, gauss_w;
  gauss_legendre_01(4, gauss_x, gauss_w);
  const double zinv = 1.0 / electrodes.contact_impedance;
  for (int l = 0; l < l_count; ++l) {
    double arc_len = 0.0;
    for (int b : arcs[l].edges) {
      const BoundaryEdge& edge = mesh.boundary_edges[b];
      const Eigen::Vector2d p0 = mesh.vertices[edge.n0];
      const Eigen::Vector2d p1 = mesh.vertices[edge.n1];
      const Eigen::Vector2d pm = mesh.vertices[edge.mid];
      const int idx[3] = {edge.n0, edge.n1, edge.mid};
      for (int q = 0; q < 4; ++q) {
        const double s = gauss_x[q];
        const double shape[3] = {(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0),
                                 4.0 * s * (1.0 - s)};
        const Eigen::Vector2d tangent =
            (4.0 * s - 3.0) * p0 + (4.0 * s - 1.0) * p1 + (4.0 - 8.0 * s) * pm;
        const double w = gauss_w[q] * tangent.norm();
        arc_len += w;
        for (int a = 0; a < 3; ++a) {
          for (int c = 0; c < 3; ++c) {
            triplets.emplace_back(idx[a], idx[c], zinv * w * shape[a] * shape[c]);
          }
          triplets.emplace_back(idx[a], n + l, -zinv * w * shape[a]);
          triplets.emplace_back(n + l, idx[a], -zinv * w * shape[a]);
        }
      }
    }
    triplets.emplace_back(n + l, n + l, zinv * arc_len);
  }

  Eigen::SparseMatrix<double> system(n + l_count, n + l_count);
  system.setFromTriplets(triplets.begin(), triplets.end());
  system.makeCompressed();

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + l_count);
  rhs.tail(l_count) = current;
  Eigen::VectorXd constraint = Eigen::VectorXd::Zero(n + l_count);
  constraint.tail(l_count).setOnes();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n + l_count);
  const int cap = std::max(4000, 60 * static_cast<int>(std::sqrt(double(n))) + n / 2);
  CemSolution sol;
  sol.cg_iterations = constrained_cg(system, rhs, constraint, x, tol, cap).iterations;

  // grounding: shift the common constant so that sum U_l = 0 exactly
  const double shift = x.tail(l_count).mean();
  x.array() -= shift;
  sol.potential = x.head(n);
  sol.voltages = x.tail(l_count);
  return sol;
}

CemComparison compare_cem(const Mesh& mesh,
                          const std::function<double(const Eigen::Vector2d&)>& sigma_eps,
                          const CemElectrodes& electrodes,
                          const std::vector<Eigen::VectorXd>& currents) {
  CemComparison out;
  double num2 = 0.0, den2 = 0.0;
  for (const auto& current : currents) {
    const CemSolution ref = solve_cem(
        mesh, [](const Eigen::Vector2d&) { return 1.0; }, electrodes, current);
    const CemSolution pert = solve_cem(mesh, sigma_eps, electrodes, current);
    out.voltages_reference.push_back(ref.voltages);
    out.voltages_perturbed.push_back(pert.voltages);
    const double dn = (pert.voltages - ref.voltages).squaredNorm();
    const double dd = ref.voltages.squaredNorm();
    out.per_current.push_back(std::sqrt(dn / dd));
    num2 += dn;
    den2 += dd;
  }
  out.total = std::sqrt(num2 / den2);
  return out;
}

double e_cem(const Mesh& mesh, const std::function<double(const Eigen::Vector2d&)>& sigma_eps,
             const CemElectrodes& electrodes, const std::vector<Eigen::VectorXd>& currents) {
  return compare_cem(mesh, sigma_eps, electrodes, currents).total;
}

}  // namespace pemcloak
