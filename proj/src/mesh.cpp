#include "pemcloak/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

namespace pemcloak {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kPi = std::numbers::pi;

double wrap_angle(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  return t;
}

// Signed circular difference a - b in [-pi, pi).
double circ_diff(double a, double b) {
  double d = std::fmod(a - b, kTwoPi);
  if (d < -kPi) d += kTwoPi;
  if (d >= kPi) d -= kTwoPi;
  return d;
}

bool symmetric_about_x(const std::vector<double>& angles, double tol = 1e-12) {
  for (double a : angles) {
    const double want = wrap_angle(-a);
    bool found = false;
    for (double b : angles) {
      if (std::abs(circ_diff(want, b)) < tol) {
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

struct Ring {
  Eigen::Vector2d circle_center{0.0, 0.0};
  double circle_radius = 0.0;
  bool on_unit_circle = false;
  bool omega_interface = false;  // ring lies on a circular piece of the Omega boundary
  bool sector_limited = false;   // curve/interface only inside the sector span
  std::vector<double> phi;       // ray parameters about the star center, sorted in [0, 2pi)
  std::vector<int> nodes;
  std::vector<int> mirror;       // reflected-node index map (symmetric mode only)
};

// Subdivides [a, b] into steps of at most h.
std::vector<double> subdivide(double a, double b, double h) {
  const int m = std::max(1, static_cast<int>(std::ceil((b - a) / h - 1e-12)));
  std::vector<double> out;
  out.reserve(m + 1);
  for (int k = 0; k <= m; ++k) out.push_back(a + (b - a) * k / m);
  out.back() = b;
  return out;
}

std::vector<double> sorted_unique_angles(std::vector<double> angles, double tol = 1e-13) {
  for (double& a : angles) a = wrap_angle(a);
  std::sort(angles.begin(), angles.end());
  std::vector<double> out;
  for (double a : angles) {
    if (out.empty() || a - out.back() > tol) out.push_back(a);
  }
  // first/last may coincide modulo 2pi
  if (out.size() > 1 && kTwoPi - out.back() + out.front() <= tol) out.pop_back();
  return out;
}

// Angular node set covering the full circle: mandatory angles kept exactly,
// arcs between them subdivided so chords stay below target_h.
std::vector<double> ring_angle_set(double effective_radius, double target_h,
                                   const std::vector<double>& mandatory, double anchor) {
  const double dphi = target_h / std::max(effective_radius, 1e-12);
  if (mandatory.empty()) {
    const int n = std::max(6, static_cast<int>(std::ceil(kTwoPi / dphi)));
    std::vector<double> out(n);
    for (int k = 0; k < n; ++k) out[k] = wrap_angle(anchor + kTwoPi * k / n);
    std::sort(out.begin(), out.end());
    return out;
  }
  std::vector<double> mand = sorted_unique_angles(mandatory);
  std::vector<double> out;
  const int nm = static_cast<int>(mand.size());
  for (int i = 0; i < nm; ++i) {
    const double a = mand[i];
    const double b = (i + 1 < nm) ? mand[i + 1] : mand[0] + kTwoPi;
    const double len = b - a;
    const int m = std::max(1, static_cast<int>(std::ceil(len / dphi - 1e-12)));
    out.push_back(a);
    for (int k = 1; k < m; ++k) out.push_back(wrap_angle(a + len * k / m));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Symmetric variant: the upper half [0, pi] is generated and reflected, so
// mirror pairs are exact. Mandatory must be symmetric and include 0 and pi.
void ring_angle_set_symmetric(double effective_radius, double target_h,
                              const std::vector<double>& mandatory, std::vector<double>& phi,
                              std::vector<int>& mirror) {
  const double dphi = target_h / std::max(effective_radius, 1e-12);
  std::vector<double> mand_upper;
  for (double a : sorted_unique_angles(mandatory)) {
    if (a <= kPi + 1e-14) mand_upper.push_back(std::min(a, kPi));
  }
  if (mand_upper.empty() || mand_upper.front() > 1e-14) mand_upper.insert(mand_upper.begin(), 0.0);
  if (kPi - mand_upper.back() > 1e-14) mand_upper.push_back(kPi);

  std::vector<double> upper;
  const int nm = static_cast<int>(mand_upper.size());
  for (int i = 0; i + 1 < nm; ++i) {
    const double a = mand_upper[i], b = mand_upper[i + 1];
    const int m = std::max(1, static_cast<int>(std::ceil((b - a) / dphi - 1e-12)));
    upper.push_back(a);
    for (int k = 1; k < m; ++k) upper.push_back(a + (b - a) * k / m);
  }
  upper.push_back(kPi);

  const int pu = static_cast<int>(upper.size());
  phi = upper;
  for (int i = pu - 2; i >= 1; --i) phi.push_back(kTwoPi - upper[i]);
  const int n = static_cast<int>(phi.size());
  mirror.assign(n, 0);
  mirror[0] = 0;
  mirror[pu - 1] = pu - 1;
  for (int i = 1; i <= pu - 2; ++i) {
    mirror[i] = 2 * (pu - 1) - i;
    mirror[2 * (pu - 1) - i] = i;
  }
}

Eigen::Vector2d ray_circle_point(const Eigen::Vector2d& star, double phi,
                                 const Eigen::Vector2d& center, double radius) {
  const Eigen::Vector2d u(std::cos(phi), std::sin(phi));
  const Eigen::Vector2d d = star - center;
  const double b = u.dot(d);
  const double disc = b * b - (d.squaredNorm() - radius * radius);
  const double rho = -b + std::sqrt(std::max(disc, 0.0));
  return star + rho * u;
}

struct Band {
  const Ring* inner;  // nullptr for the center fan
  const Ring* outer;
};

int nearest_index(const std::vector<double>& phi, double target) {
  int best = 0;
  double best_d = std::abs(circ_diff(phi[0], target));
  for (int i = 1; i < static_cast<int>(phi.size()); ++i) {
    const double d = std::abs(circ_diff(phi[i], target));
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

// Merge triangulation of the annulus band between two rings, walking both
// node sequences by increasing ray angle from an anchored start.
void zip_band(const Ring& inner, const Ring& outer, double anchor,
              std::vector<std::array<int, 3>>& tris) {
  const int p = static_cast<int>(inner.phi.size());
  const int q = static_cast<int>(outer.phi.size());
  const int i0 = nearest_index(inner.phi, anchor);
  const int o0 = nearest_index(outer.phi, inner.phi[i0]);

  std::vector<double> ai(p + 1), bo(q + 1);
  ai[0] = inner.phi[i0];
  for (int k = 0; k < p; ++k) {
    double gap = inner.phi[(i0 + k + 1) % p] - inner.phi[(i0 + k) % p];
    if (gap <= 0.0) gap += kTwoPi;
    ai[k + 1] = ai[k] + gap;
  }
  bo[0] = ai[0] + circ_diff(outer.phi[o0], ai[0]);
  for (int k = 0; k < q; ++k) {
    double gap = outer.phi[(o0 + k + 1) % q] - outer.phi[(o0 + k) % q];
    if (gap <= 0.0) gap += kTwoPi;
    bo[k + 1] = bo[k] + gap;
  }

  int ii = 0, oo = 0;
  while (ii < p || oo < q) {
    const int in_cur = inner.nodes[(i0 + ii) % p];
    const int out_cur = outer.nodes[(o0 + oo) % q];
    const bool advance_inner = ii < p && (oo >= q || ai[ii + 1] <= bo[oo + 1] + 1e-14);
    if (advance_inner) {
      tris.push_back({in_cur, out_cur, inner.nodes[(i0 + ii + 1) % p]});
      ++ii;
    } else {
      tris.push_back({in_cur, out_cur, outer.nodes[(o0 + oo + 1) % q]});
      ++oo;
    }
  }
}

// Symmetric-mode merge: triangulate the upper half [0, pi] and reflect it.
void zip_band_symmetric(const Ring& inner, const Ring& outer,
                        std::vector<std::array<int, 3>>& tris) {
  auto upper_count = [](const Ring& r) {
    int c = 0;
    while (c < static_cast<int>(r.phi.size()) && r.phi[c] <= kPi + 1e-14) ++c;
    return c;
  };
  const int pu = upper_count(inner) - 1;  // segments in the upper half
  const int qu = upper_count(outer) - 1;

  std::vector<std::array<int, 3>> upper;
  int ii = 0, oo = 0;
  while (ii < pu || oo < qu) {
    const int in_cur = inner.nodes[ii];
    const int out_cur = outer.nodes[oo];
    const bool advance_inner =
        ii < pu && (oo >= qu || inner.phi[ii + 1] <= outer.phi[oo + 1] + 1e-14);
    if (advance_inner) {
      upper.push_back({in_cur, out_cur, inner.nodes[ii + 1]});
      ++ii;
    } else {
      upper.push_back({in_cur, out_cur, outer.nodes[oo + 1]});
      ++oo;
    }
  }
  auto mirror_node = [&](int node) {
    for (const Ring* r : {&inner, &outer}) {
      const int base = r->nodes.front();
      if (node >= base && node < base + static_cast<int>(r->nodes.size())) {
        return r->nodes[r->mirror[node - base]];
      }
    }
    return node;
  };
  tris.insert(tris.end(), upper.begin(), upper.end());
  for (const auto& t : upper) {
    tris.push_back({mirror_node(t[0]), mirror_node(t[2]), mirror_node(t[1])});
  }
}

int64_t edge_key(int a, int b, int n) {
  if (a > b) std::swap(a, b);
  return static_cast<int64_t>(a) * n + b;
}

}  // namespace

OmegaSpec OmegaSpec::concentric_disk(double r) {
  OmegaSpec s;
  s.shape = Shape::kConcentricDisk;
  s.radius = r;
  return s;
}

OmegaSpec OmegaSpec::annulus_sector(double r_in, double r_out, double theta_min,
                                    double theta_max) {
  OmegaSpec s;
  s.shape = Shape::kAnnulusSector;
  s.r_in = r_in;
  s.r_out = r_out;
  s.theta_min = wrap_angle(theta_min);
  double span = theta_max - theta_min;
  s.theta_max = s.theta_min + span;
  return s;
}

OmegaSpec OmegaSpec::offset_disk(const Eigen::Vector2d& center, double r) {
  OmegaSpec s;
  s.shape = Shape::kOffsetDisk;
  s.center = center;
  s.radius = r;
  return s;
}

double OmegaSpec::clearance() const {
  switch (shape) {
    case Shape::kConcentricDisk: return 1.0 - radius;
    case Shape::kAnnulusSector: return 1.0 - r_out;
    case Shape::kOffsetDisk: return 1.0 - (center.norm() + radius);
  }
  return 0.0;
}

bool OmegaSpec::contains(const Eigen::Vector2d& x, double tol) const {
  switch (shape) {
    case Shape::kConcentricDisk: return x.norm() <= radius + tol;
    case Shape::kOffsetDisk: return (x - center).norm() <= radius + tol;
    case Shape::kAnnulusSector: {
      const double r = x.norm();
      if (r < r_in - tol || r > r_out + tol) return false;
      const double span = theta_max - theta_min;
      double rel = wrap_angle(std::atan2(x.y(), x.x()) - theta_min);
      if (rel > kPi + span / 2.0) rel -= kTwoPi;  // allow slight negative overshoot
      return rel >= -tol / std::max(r_in, 1e-6) && rel <= span + tol / std::max(r_in, 1e-6);
    }
  }
  return false;
}

void OmegaSpec::validate() const {
  switch (shape) {
    case Shape::kConcentricDisk:
      if (!(radius > 0.0 && radius < 1.0))
        throw Error(ErrorCode::kValidationError, "omega.radius must lie in (0, 1)");
      break;
    case Shape::kAnnulusSector:
      if (!(r_in > 0.0 && r_in < r_out && r_out < 1.0))
        throw Error(ErrorCode::kValidationError, "omega radii must satisfy 0 < r_in < r_out < 1");
      if (!(theta_max > theta_min && theta_max - theta_min < kTwoPi))
        throw Error(ErrorCode::kValidationError, "omega sector span must lie in (0, 2*pi)");
      break;
    case Shape::kOffsetDisk:
      if (!(radius > 0.0))
        throw Error(ErrorCode::kValidationError, "omega.radius must be positive");
      break;
  }
  if (!(clearance() > 0.0))
    throw Error(ErrorCode::kValidationError,
                "omega must be compactly embedded in the unit disk (clearance > 0)");
}

Eigen::Matrix<double, 6, 1> p2_shape_values(const Eigen::Vector3d& bary) {
  const double l0 = bary[0], l1 = bary[1], l2 = bary[2];
  Eigen::Matrix<double, 6, 1> n;
  n << l0 * (2.0 * l0 - 1.0), l1 * (2.0 * l1 - 1.0), l2 * (2.0 * l2 - 1.0),
      4.0 * l0 * l1, 4.0 * l1 * l2, 4.0 * l2 * l0;
  return n;
}

Eigen::Matrix<double, 6, 2> p2_shape_gradients(const Eigen::Vector3d& bary) {
  const double l0 = bary[0], l1 = bary[1], l2 = bary[2];
  // d l0 / d(xi,eta) = (-1,-1); d l1 = (1,0); d l2 = (0,1)
  Eigen::Matrix<double, 6, 2> g;
  g << -(4.0 * l0 - 1.0), -(4.0 * l0 - 1.0),
      4.0 * l1 - 1.0, 0.0,
      0.0, 4.0 * l2 - 1.0,
      4.0 * (l0 - l1), -4.0 * l1,
      4.0 * l2, 4.0 * l1,
      -4.0 * l2, 4.0 * (l0 - l2);
  return g;
}

void element_geometry(const Mesh& mesh, int element, const Eigen::Vector3d& bary,
                      Eigen::Vector2d& x, Eigen::Matrix2d& jacobian) {
  const auto& tri = mesh.triangles[element];
  Eigen::Matrix<double, 2, 6> coords;
  for (int a = 0; a < 6; ++a) coords.col(a) = mesh.vertices[tri[a]];
  x = coords * p2_shape_values(bary);
  jacobian = coords * p2_shape_gradients(bary);
}

std::vector<PhysicalQuadPoint> physical_quad_points(const Mesh& mesh, int element,
                                                    const QuadratureRule& rule) {
  const auto& tri = mesh.triangles[element];
  Eigen::Matrix<double, 2, 6> coords;
  for (int a = 0; a < 6; ++a) coords.col(a) = mesh.vertices[tri[a]];

  std::vector<PhysicalQuadPoint> out(rule.size());
  const bool curved = mesh.element_curved.empty() ? true : mesh.element_curved[element];
  Eigen::Matrix2d j0;
  double det0 = 0.0;
  if (!curved) {
    j0 = coords * p2_shape_gradients(Eigen::Vector3d(1.0 / 3, 1.0 / 3, 1.0 / 3));
    det0 = j0.determinant();
  }
  for (int q = 0; q < rule.size(); ++q) {
    const Eigen::Vector3d bary = rule.points.row(q);
    out[q].x = coords * p2_shape_values(bary);
    double det = det0;
    if (curved) det = (coords * p2_shape_gradients(bary)).determinant();
    out[q].jacobian = det;
    out[q].weight = rule.weights[q] * det;
  }
  return out;
}

double element_area(const Mesh& mesh, int element) {
  static const QuadratureRule rule = quadrature(2);
  double a = 0.0;
  for (const auto& qp : physical_quad_points(mesh, element, rule)) a += qp.weight;
  return a;
}

Eigen::Vector2d element_centroid(const Mesh& mesh, int element) {
  const auto& tri = mesh.triangles[element];
  return (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]) / 3.0;
}

int locate_point(const Mesh& mesh, const Eigen::Vector2d& x, Eigen::Vector3d& bary) {
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto& tri = mesh.triangles[e];
    const Eigen::Vector2d& a = mesh.vertices[tri[0]];
    const Eigen::Vector2d& b = mesh.vertices[tri[1]];
    const Eigen::Vector2d& c = mesh.vertices[tri[2]];
    const double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
    if (std::abs(det) < 1e-30) continue;
    const double l1 = ((x.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (x.y() - a.y())) / det;
    const double l2 = ((b.x() - a.x()) * (x.y() - a.y()) - (x.x() - a.x()) * (b.y() - a.y())) / det;
    const double l0 = 1.0 - l1 - l2;
    if (l0 >= -1e-9 && l1 >= -1e-9 && l2 >= -1e-9) {
      bary = Eigen::Vector3d(l0, l1, l2);
      return e;
    }
  }
  return -1;
}

Mesh build_disk_mesh(const OmegaSpec& omega, double target_h,
                     const std::vector<double>& electrode_angles,
                     std::optional<double> cem_width) {
  omega.validate();
  if (!(target_h > 0.0)) throw Error(ErrorCode::kValidationError, "target_h must be positive");
  if (omega.clearance() < 2.0 * target_h) {
    throw Error(ErrorCode::kOmegaTooCloseToBoundary,
                "clearance " + std::to_string(omega.clearance()) + " < 2*target_h = " +
                    std::to_string(2.0 * target_h));
  }

  const bool offset = omega.shape == OmegaSpec::Shape::kOffsetDisk;
  const Eigen::Vector2d star = offset ? omega.center : Eigen::Vector2d(0.0, 0.0);
  const double anchor_polar = electrode_angles.empty() ? 0.0 : wrap_angle(electrode_angles[0]);

  // Boundary mandatory angles in the ray parameter about the star center.
  auto boundary_param = [&](double polar) {
    if (!offset) return wrap_angle(polar);
    const Eigen::Vector2d e(std::cos(polar), std::sin(polar));
    return wrap_angle(std::atan2(e.y() - star.y(), e.x() - star.x()));
  };
  std::vector<double> mand_boundary;
  for (double a : electrode_angles) {
    mand_boundary.push_back(boundary_param(a));
    if (cem_width) {
      mand_boundary.push_back(boundary_param(a - *cem_width / 2.0));
      mand_boundary.push_back(boundary_param(a + *cem_width / 2.0));
    }
  }
  mand_boundary = sorted_unique_angles(mand_boundary);
  const double anchor = boundary_param(anchor_polar);

  std::vector<double> mand_sector;
  if (omega.shape == OmegaSpec::Shape::kAnnulusSector) {
    mand_sector = {wrap_angle(omega.theta_min), wrap_angle(omega.theta_max)};
  }

  bool symmetric = symmetric_about_x(mand_boundary) && symmetric_about_x(mand_sector);
  if (offset && std::abs(star.y()) > 1e-15) symmetric = false;

  // Ring ladder.
  std::vector<Ring> rings;
  auto add_concentric_segment = [&](double r0, double r1) {
    const auto radii = subdivide(r0, r1, target_h);
    for (size_t k = 1; k < radii.size(); ++k) {
      Ring ring;
      ring.circle_center = Eigen::Vector2d(0.0, 0.0);
      ring.circle_radius = radii[k];
      rings.push_back(ring);
    }
  };
  switch (omega.shape) {
    case OmegaSpec::Shape::kConcentricDisk: {
      add_concentric_segment(0.0, omega.radius);
      rings.back().omega_interface = true;
      add_concentric_segment(omega.radius, 1.0);
      break;
    }
    case OmegaSpec::Shape::kAnnulusSector: {
      add_concentric_segment(0.0, omega.r_in);
      rings.back().omega_interface = true;
      rings.back().sector_limited = true;
      add_concentric_segment(omega.r_in, omega.r_out);
      rings.back().omega_interface = true;
      rings.back().sector_limited = true;
      add_concentric_segment(omega.r_out, 1.0);
      break;
    }
    case OmegaSpec::Shape::kOffsetDisk: {
      const auto radii = subdivide(0.0, omega.radius, target_h);
      for (size_t k = 1; k < radii.size(); ++k) {
        Ring ring;
        ring.circle_center = star;
        ring.circle_radius = radii[k];
        rings.push_back(ring);
      }
      rings.back().omega_interface = true;
      const double d = star.norm();
      const double gap = (1.0 - omega.radius) + d;  // worst-case radial gap per unit t
      const auto ts = subdivide(0.0, 1.0, target_h / gap);
      for (size_t k = 1; k < ts.size(); ++k) {
        Ring ring;
        const double t = ts[k];
        ring.circle_center = (1.0 - t) * star;
        ring.circle_radius = omega.radius + t * (1.0 - omega.radius);
        rings.push_back(ring);
      }
      break;
    }
  }
  rings.back().on_unit_circle = true;
  rings.back().circle_center = Eigen::Vector2d(0.0, 0.0);
  rings.back().circle_radius = 1.0;

  Mesh mesh;
  mesh.omega = omega;
  mesh.target_h = target_h;
  mesh.vertices.push_back(star);  // center node

  for (auto& ring : rings) {
    std::vector<double> mand;
    if (ring.on_unit_circle) mand = mand_boundary;
    if (omega.shape == OmegaSpec::Shape::kAnnulusSector &&
        ring.circle_radius >= omega.r_in - 1e-14 && ring.circle_radius <= omega.r_out + 1e-14) {
      mand.insert(mand.end(), mand_sector.begin(), mand_sector.end());
    }
    const double d = (star - ring.circle_center).norm();
    const double ampl =
        (ring.circle_radius + d) / std::max(ring.circle_radius - d, 1e-12);
    const double eff_radius = ring.circle_radius * std::max(1.0, ampl);
    if (symmetric) {
      mand.push_back(0.0);
      mand.push_back(kPi);
      ring_angle_set_symmetric(eff_radius, target_h, mand, ring.phi, ring.mirror);
    } else {
      ring.phi = ring_angle_set(eff_radius, target_h, mand, anchor);
    }
    ring.nodes.reserve(ring.phi.size());
    for (double phi : ring.phi) {
      Eigen::Vector2d p;
      if ((ring.circle_center - star).norm() < 1e-15) {
        p = ring.circle_center +
            ring.circle_radius * Eigen::Vector2d(std::cos(phi), std::sin(phi));
      } else {
        p = ray_circle_point(star, phi, ring.circle_center, ring.circle_radius);
      }
      ring.nodes.push_back(static_cast<int>(mesh.vertices.size()));
      mesh.vertices.push_back(p);
    }
  }

  // Corner triangles: center fan plus ring-to-ring bands.
  std::vector<std::array<int, 3>> tris;
  {
    const Ring& first = rings.front();
    const int n = static_cast<int>(first.nodes.size());
    for (int j = 0; j < n; ++j) {
      tris.push_back({0, first.nodes[j], first.nodes[(j + 1) % n]});
    }
  }
  for (size_t k = 0; k + 1 < rings.size(); ++k) {
    if (symmetric) {
      zip_band_symmetric(rings[k], rings[k + 1], tris);
    } else {
      zip_band(rings[k], rings[k + 1], anchor, tris);
    }
  }

  // Midside nodes, shared through an edge map.
  const int ncorner = static_cast<int>(mesh.vertices.size());
  std::unordered_map<int64_t, int> edge_mid;
  std::unordered_map<int64_t, std::vector<int>> edge_elems;
  edge_mid.reserve(tris.size() * 2);
  mesh.triangles.reserve(tris.size());
  for (const auto& t : tris) {
    std::array<int, 6> conn{t[0], t[1], t[2], -1, -1, -1};
    for (int s = 0; s < 3; ++s) {
      const int a = t[s], b = t[(s + 1) % 3];
      const int64_t key = edge_key(a, b, ncorner);
      auto it = edge_mid.find(key);
      if (it == edge_mid.end()) {
        const int mid = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
        it = edge_mid.emplace(key, mid).first;
      }
      conn[3 + s] = it->second;
      edge_elems[key].push_back(static_cast<int>(mesh.triangles.size()));
    }
    mesh.triangles.push_back(conn);
  }
  mesh.element_curved.assign(mesh.triangles.size(), false);

  // Curve interface rings: midside nodes moved onto the circle at the angular
  // midpoint; adjacent elements become isoparametric.
  auto in_sector = [&](double polar) {
    const double span = omega.theta_max - omega.theta_min;
    double rel = wrap_angle(polar - omega.theta_min);
    return rel <= span + 1e-12 || rel >= kTwoPi - 1e-12;
  };
  for (const auto& ring : rings) {
    if (!ring.on_unit_circle && !ring.omega_interface) continue;
    const int n = static_cast<int>(ring.nodes.size());
    for (int j = 0; j < n; ++j) {
      const int a = ring.nodes[j], b = ring.nodes[(j + 1) % n];
      const Eigen::Vector2d pa = mesh.vertices[a] - ring.circle_center;
      const Eigen::Vector2d pb = mesh.vertices[b] - ring.circle_center;
      const double ta = std::atan2(pa.y(), pa.x());
      double dt = std::atan2(pb.y(), pb.x()) - ta;
      if (dt <= 0.0) dt += kTwoPi;
      if (ring.sector_limited && !ring.on_unit_circle) {
        const double ma = wrap_angle(ta);
        const double mb = wrap_angle(ta + dt);
        if (!in_sector(ma) || !in_sector(mb) || dt > kPi) continue;
      }
      const int64_t key = edge_key(a, b, ncorner);
      auto it = edge_mid.find(key);
      if (it == edge_mid.end()) continue;
      const double tm = ta + 0.5 * dt;
      mesh.vertices[it->second] =
          ring.circle_center + ring.circle_radius * Eigen::Vector2d(std::cos(tm), std::sin(tm));
      for (int e : edge_elems[key]) mesh.element_curved[e] = true;
    }
  }

  // Tags from the centroid (boundary-fitted, so centroids never straddle).
  mesh.element_tags.resize(mesh.triangles.size());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    mesh.element_tags[e] = omega.contains(element_centroid(mesh, e))
                               ? ElementTag::kInsideOmega
                               : ElementTag::kOutsideOmega;
  }

  // Boundary edge list with polar-angle spans, counterclockwise.
  {
    const Ring& outer = rings.back();
    const int n = static_cast<int>(outer.nodes.size());
    for (int j = 0; j < n; ++j) {
      const int a = outer.nodes[j], b = outer.nodes[(j + 1) % n];
      BoundaryEdge edge;
      edge.n0 = a;
      edge.n1 = b;
      edge.mid = edge_mid.at(edge_key(a, b, ncorner));
      edge.theta0 = wrap_angle(std::atan2(mesh.vertices[a].y(), mesh.vertices[a].x()));
      double dt = std::atan2(mesh.vertices[b].y(), mesh.vertices[b].x()) - edge.theta0;
      dt = wrap_angle(dt);
      edge.theta1 = edge.theta0 + dt;
      mesh.boundary_edges.push_back(edge);
    }
  }

  // h_max and Jacobian validation.
  mesh.h_max = 0.0;
  const QuadratureRule check_rule = quadrature(kAssemblyQuadratureDegree);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto& tri = mesh.triangles[e];
    for (int a = 0; a < 6; ++a) {
      for (int b = a + 1; b < 6; ++b) {
        mesh.h_max =
            std::max(mesh.h_max, (mesh.vertices[tri[a]] - mesh.vertices[tri[b]]).norm());
      }
    }
    Eigen::Matrix<double, 2, 6> coords;
    for (int a = 0; a < 6; ++a) coords.col(a) = mesh.vertices[tri[a]];
    auto check_at = [&](const Eigen::Vector3d& bary) {
      const double det = (coords * p2_shape_gradients(bary)).determinant();
      if (!(det > 0.0)) {
        throw Error(ErrorCode::kDegenerateElement,
                    "element " + std::to_string(e) + " has Jacobian " + std::to_string(det));
      }
    };
    check_at(Eigen::Vector3d(1, 0, 0));
    check_at(Eigen::Vector3d(0, 1, 0));
    check_at(Eigen::Vector3d(0, 0, 1));
    if (mesh.element_curved[e]) {
      for (int q = 0; q < check_rule.size(); ++q) check_at(check_rule.points.row(q));
    } else {
      check_at(Eigen::Vector3d(1.0 / 3, 1.0 / 3, 1.0 / 3));
    }
  }
  return mesh;
}

}  // namespace pemcloak
