#include "pemcloak/export.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace pemcloak {

namespace {

void write_vtk_header(std::ofstream& out, const Mesh& mesh, const std::string& title) {
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_nodes() << " double\n";
  char buf[96];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g 0\n", v.x(), v.y());
    out << buf;
  }
  const int ne = mesh.num_elements();
  out << "CELLS " << ne << " " << ne * 7 << "\n";
  for (const auto& t : mesh.triangles) {
    out << "6 " << t[0] << " " << t[1] << " " << t[2] << " " << t[3] << " " << t[4] << " " << t[5]
        << "\n";
  }
  out << "CELL_TYPES " << ne << "\n";
  for (int e = 0; e < ne; ++e) out << "22\n";  // VTK_QUADRATIC_TRIANGLE
  out << "CELL_DATA " << ne << "\n";
  out << "SCALARS element_tag int 1\nLOOKUP_TABLE default\n";
  for (const auto tag : mesh.element_tags) {
    out << (tag == ElementTag::kInsideOmega ? 1 : 0) << "\n";
  }
}

}  // namespace

void write_mesh_vtk(const std::string& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kValidationError, "cannot write '" + path + "'");
  write_vtk_header(out, mesh, "pemcloak mesh");
}

void write_cell_scalar_vtk(const std::string& path, const Mesh& mesh, const std::string& name,
                           const Eigen::VectorXd& cell_values) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kValidationError, "cannot write '" + path + "'");
  write_vtk_header(out, mesh, "pemcloak field");
  out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
  char buf[48];
  for (int e = 0; e < mesh.num_elements(); ++e) {
    std::snprintf(buf, sizeof buf, "%.17g\n", cell_values[e]);
    out << buf;
  }
}

Eigen::VectorXd sample_at_centroids(const Mesh& mesh,
                                    const std::function<double(const Eigen::Vector2d&)>& field) {
  Eigen::VectorXd out(mesh.num_elements());
  for (int e = 0; e < mesh.num_elements(); ++e) out[e] = field(element_centroid(mesh, e));
  return out;
}

void write_raster_csv(const std::string& path,
                      const std::function<double(const Eigen::Vector2d&)>& field,
                      int samples_per_axis) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kValidationError, "cannot write '" + path + "'");
  out << "x,y,value\n";
  char buf[96];
  for (int iy = 0; iy < samples_per_axis; ++iy) {
    for (int ix = 0; ix < samples_per_axis; ++ix) {
      const double x = -1.0 + 2.0 * ix / (samples_per_axis - 1);
      const double y = -1.0 + 2.0 * iy / (samples_per_axis - 1);
      const Eigen::Vector2d p(x, y);
      const double v =
          p.norm() <= 1.0 ? field(p) : std::numeric_limits<double>::quiet_NaN();
      std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.17g\n", x, y, v);
      out << buf;
    }
  }
}

void write_convergence_csv(const std::string& path, const RunReport& report) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kValidationError, "cannot write '" + path + "'");
  out << "iteration,discrepancy,tau_max,min_sigma\n";
  char buf[120];
  for (size_t i = 0; i < report.discrepancy_history.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i + 1,
                  report.discrepancy_history[i], report.tau_max_history[i],
                  report.min_sigma_history[i]);
    out << buf;
  }
}

void write_basis_diagnostics_csv(const std::string& path, const PerturbationBasis& basis,
                                 const DualityCheck& check) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kValidationError, "cannot write '" + path + "'");
  char buf[160];
  std::snprintf(buf, sizeof buf, "condition_estimate,%.17g\n", basis.condition_estimate);
  out << buf;
  std::snprintf(buf, sizeof buf, "max_duality_error,%.17g\n", check.max_duality_error);
  out << buf;
  std::snprintf(buf, sizeof buf, "max_kappa0_pairing,%.17g\n", check.max_kappa0_pairing);
  out << buf;
  std::snprintf(buf, sizeof buf, "kappa0_norm2,%.17g\n", basis.kappa0_norm2);
  out << buf;
  out << "k,max_offdiag_pairing,diag_pairing,kappa0_pairing\n";
  const int k_count = basis.k_count();
  for (int k = 0; k < k_count; ++k) {
    double offdiag = 0.0;
    for (int l = 0; l < k_count; ++l) {
      if (l != k) offdiag = std::max(offdiag, std::abs(check.pairings(k, l)));
    }
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", k + 1, offdiag,
                  check.pairings(k, k),
                  check.kappa0_pairings.size() ? check.kappa0_pairings[k] : 0.0);
    out << buf;
  }
}

}  // namespace pemcloak
