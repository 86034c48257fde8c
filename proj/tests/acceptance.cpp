// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Runs at desk scale; the slowest entries are the large-electrode
// fixed-point runs.

#include <chrono>
#include <cstdio>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "pemcloak/cem.hpp"
#include "pemcloak/expression.hpp"
#include "pemcloak/solver.hpp"

using namespace pemcloak;

namespace {

constexpr double kPi = std::numbers::pi;
int g_failures = 0;

void report(const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] %s: %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

struct Setup {
  ElectrodeConfig cfg{{0.0, 1.0}};
  Mesh mesh;
  PsiCache cache;
  PerturbationBasis basis;
};

Setup make_setup(int electrode_count, const OmegaSpec& omega, double h,
                 const std::string& seed_expr) {
  Setup s;
  s.cfg = ElectrodeConfig::offset_equispaced(electrode_count);
  s.mesh = build_disk_mesh(omega, h, s.cfg.angles);
  s.cache = build_psi_cache(s.mesh, s.cfg, quadrature(kAssemblyQuadratureDegree));
  s.basis = build_basis(s.mesh, s.cfg, s.cache);
  const Expression seed = Expression::parse(seed_expr);
  project_kappa0(s.basis, [seed](double x, double y) { return seed(x, y); }, s.cache);
  return s;
}

char buffer[512];

// C1 + C2 + C3: Fig.1 sweeps.
void criteria_fig1() {
  const Setup s = make_setup(4, OmegaSpec::concentric_disk(0.5), 0.04, "1");

  bool c1 = true;
  std::string c1_detail;
  std::vector<std::pair<double, RunResult>> runs;
  for (double eps : {0.5, 2.0, 4.0, 6.0}) {
    RunConfig rc;
    rc.epsilon = eps;
    rc.max_iter = 60;
    RunResult res = run_algorithm(s.mesh, s.basis, s.cache, rc);
    const auto& hist = res.report.discrepancy_history;
    const auto [slope, r2] = oracles::log_linear_fit(hist);
    bool strict = true;
    if (eps <= 1.0) {
      for (size_t i = 1; i < hist.size(); ++i) strict &= hist[i] < hist[i - 1];
    }
    const bool ok = res.report.converged && res.report.backoff_count == 0 &&
                    res.report.iterations <= 60 && hist.back() < 1e-8 && r2 >= 0.98 && strict;
    std::snprintf(buffer, sizeof buffer, "eps=%.1f iters=%d R2=%.4f disc=%.2e; ", eps,
                  res.report.iterations, r2, hist.back());
    c1_detail += buffer;
    c1 &= ok;
    runs.emplace_back(eps, std::move(res));
  }
  report("C1 fixed-point convergence (Fig.1 sweep)", c1, c1_detail);

  bool c2 = true;
  std::string c2_detail;
  for (auto& [eps, res] : runs) {
    const SymMatrix naive =
        pem_measurement_matrix(s.mesh, s.basis, s.cache, SymMatrix(s.cfg.n()), eps);
    const double bound = std::max(eps * 1e-8 * 10.0, 1e-3 * naive.max_abs());
    const bool ok = res.report.measurement_max <= bound;
    std::snprintf(buffer, sizeof buffer, "eps=%.1f ||M||=%.2e bound=%.2e; ", eps,
                  res.report.measurement_max, bound);
    c2_detail += buffer;
    c2 &= ok;
  }
  report("C2 discrete invisibility vs kappa0-only", c2, c2_detail);

  bool c3 = true;
  std::vector<double> ratios;
  std::string c3_detail;
  for (double eps : {0.25, 0.5, 1.0}) {
    RunConfig rc;
    rc.epsilon = eps;
    const RunResult res = run_algorithm(s.mesh, s.basis, s.cache, rc);
    c3 &= res.report.converged;
    ratios.push_back(res.report.tau_final.max_abs() / eps);
    std::snprintf(buffer, sizeof buffer, "|tau|/eps(%.2f)=%.3e; ", eps, ratios.back());
    c3_detail += buffer;
  }
  const double spread = *std::max_element(ratios.begin(), ratios.end()) /
                        *std::min_element(ratios.begin(), ratios.end());
  c3 &= spread < 2.0;
  std::snprintf(buffer, sizeof buffer, "spread=%.3f", spread);
  report("C3 first-order size of tau", c3, c3_detail + buffer);
}

// C4: dual-basis identities for the Fig.2 electrode rule.
void criterion_dual_basis() {
  bool pass = true;
  std::string detail;
  for (int count : {6, 8, 10, 12}) {
    const Setup s = make_setup(count, OmegaSpec::concentric_disk(0.5), 0.06, "1");
    const DualityCheck check = duality_check(s.basis, s.cache);
    const bool ok = check.max_duality_error < 1e-9 && check.max_kappa0_pairing < 1e-9;
    std::snprintf(buffer, sizeof buffer, "N=%d dual=%.1e kappa0=%.1e; ", count - 1,
                  check.max_duality_error, check.max_kappa0_pairing);
    detail += buffer;
    pass &= ok;
  }
  report("C4 dual-basis identities (N <= 11)", pass, detail);
}

// C5: Fig.2 scale runs.
void criterion_fig2_runs() {
  const int counts[] = {6, 8, 10, 12};
  const double epsilons[] = {14.0, 12.0, 8.0, 8.0};
  bool pass = true;
  std::string detail;
  for (int i = 0; i < 4; ++i) {
    const Setup s = make_setup(counts[i], OmegaSpec::concentric_disk(0.5), 0.05, "1");
    RunConfig rc;
    rc.epsilon = epsilons[i];
    rc.max_iter = 800;
    bool ok = false;
    try {
      const RunResult res = run_algorithm(s.mesh, s.basis, s.cache, rc);
      ok = res.report.converged;
      std::snprintf(buffer, sizeof buffer, "L=%d eps=%.0f iters=%d backoffs=%d eps_used=%.3g; ",
                    counts[i], epsilons[i], res.report.iterations, res.report.backoff_count,
                    res.report.epsilon_used);
    } catch (const Error& err) {
      std::snprintf(buffer, sizeof buffer, "L=%d eps=%.0f threw %s; ", counts[i], epsilons[i],
                    err.name());
    }
    detail += buffer;
    pass &= ok;
  }
  report("C5 Fig.2 scale runs (backoff permitted, flagged)", pass, detail);
}

// C6: CEM validation at Table-1 magnitudes.
void criterion_cem() {
  struct Row {
    const char* label;
    int electrodes;
    double radius;
    double epsilon;
    const char* seed;
    double paper_value;
  };
  // electrode count and inclusion geometry are calibrated stand-ins for the
  // pictured configurations; epsilon, seed, width and impedance are fixed
  const Row rows[] = {
      {"(a)", 8, 0.63, 4.0, "x+y+1", 1.4e-4},
      {"(c)", 8, 0.80, 0.25, "1", 2.3e-4},
  };
  bool pass = true;
  std::string detail;
  for (const Row& row : rows) {
    const Setup s = make_setup(row.electrodes, OmegaSpec::concentric_disk(row.radius), 0.05,
                               row.seed);
    RunConfig rc;
    rc.epsilon = row.epsilon;
    rc.max_iter = 200;
    const RunResult res = run_algorithm(s.mesh, s.basis, s.cache, rc);
    if (!res.report.converged || res.report.backoff_count != 0) {
      std::snprintf(buffer, sizeof buffer, "%s construction failed (backoffs=%d); ", row.label,
                    res.report.backoff_count);
      detail += buffer;
      pass = false;
      continue;
    }
    CemElectrodes electrodes;
    electrodes.centers = s.cfg.angles;
    const auto currents = trig_current_basis(electrodes.centers);
    const Mesh cem_mesh =
        build_disk_mesh(s.mesh.omega, 0.05, s.cfg.angles, electrodes.width);
    const double e_full = e_cem(cem_mesh, res.sigma_eps, electrodes, currents);

    // sigma^0 compares to itself exactly
    const double e_zero =
        e_cem(cem_mesh, [](const Eigen::Vector2d&) { return 1.0; }, electrodes, currents);

    CemElectrodes half = electrodes;
    half.width /= 2;
    const Mesh half_mesh = build_disk_mesh(s.mesh.omega, 0.05, s.cfg.angles, half.width);
    const double e_half = e_cem(half_mesh, res.sigma_eps, half, currents);

    const bool in_band =
        e_full <= 1e-2 && e_full <= 30.0 * row.paper_value && e_full >= row.paper_value / 30.0;
    const bool ok = in_band && e_zero == 0.0 && e_half < e_full;
    std::snprintf(buffer, sizeof buffer,
                  "%s E=%.3e (paper %.1e, ratio %.1f) E0=%.0e E_half=%.3e; ", row.label, e_full,
                  row.paper_value, std::max(e_full, row.paper_value) / std::min(e_full, row.paper_value),
                  e_zero, e_half);
    detail += buffer;
    pass &= ok;
  }
  report("C6 CEM validation (Table-1 magnitudes)", pass, detail);
}

// C7: manufactured Neumann problem.
void criterion_fem() {
  std::vector<double> errors, hs;
  double sym_err = 0.0, kernel_err = 0.0;
  for (double h : {0.2, 0.1, 0.05, 0.025}) {
    const Mesh mesh = build_disk_mesh(OmegaSpec::concentric_disk(0.5), h, {});
    const SparseSystem sys = assemble_stiffness(mesh, FieldOnMesh::constant(1.0));
    if (h == 0.1) {
      const Eigen::SparseMatrix<double> diff =
          Eigen::SparseMatrix<double>(sys.matrix.transpose()) - sys.matrix;
      for (int k = 0; k < diff.nonZeros(); ++k) {
        sym_err = std::max(sym_err, std::abs(diff.valuePtr()[k]) / sys.max_abs);
      }
      kernel_err = (sys.matrix * Eigen::VectorXd::Ones(mesh.num_nodes())).cwiseAbs().maxCoeff() /
                   sys.max_abs;
    }
    auto g = [](const Eigen::Vector2d& x, const Eigen::Vector2d& nu) {
      return nu.x() * 2 * x.x() - nu.y() * 2 * x.y();
    };
    const Eigen::VectorXd u = solve_neumann(sys, assemble_boundary_load(mesh, g, 8)).coeffs();
    const QuadratureRule rule = quadrature(8);
    const Eigen::VectorXd uh = oracles::sample_p2(mesh, u, rule);
    auto exact = [](const Eigen::Vector2d& x) { return x.x() * x.x() - x.y() * x.y(); };
    const double area = integrate(mesh, rule, Region::kAll,
                                  [](int, int, const Eigen::Vector2d&) { return 1.0; });
    const double mean = integrate(mesh, rule, Region::kAll,
                                  [&](int e, int q, const Eigen::Vector2d& x) {
                                    return uh[Eigen::Index(e) * rule.size() + q] - exact(x);
                                  }) /
                        area;
    errors.push_back(std::sqrt(integrate(
        mesh, rule, Region::kAll, [&](int e, int q, const Eigen::Vector2d& x) {
          const double d = uh[Eigen::Index(e) * rule.size() + q] - exact(x) - mean;
          return d * d;
        })));
    hs.push_back(mesh.h_max);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < errors.size(); ++i) {
    sx += std::log(hs[i]);
    sy += std::log(errors[i]);
    sxx += std::log(hs[i]) * std::log(hs[i]);
    sxy += std::log(hs[i]) * std::log(errors[i]);
  }
  const int n = static_cast<int>(errors.size());
  const double order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const bool pass = order >= 2.7 && sym_err <= 1e-12 && kernel_err <= 1e-10;
  std::snprintf(buffer, sizeof buffer, "L2 order=%.2f sym=%.1e kernel=%.1e", order, sym_err,
                kernel_err);
  report("C7 manufactured FEM verification", pass, buffer);
}

// C8: analytic potentials against the mollified-delta FEM oracle.
void criterion_potential_oracle() {
  const auto cfg = ElectrodeConfig::from_angles({1 * kPi / 180, 91 * kPi / 180});
  const Mesh mesh = build_disk_mesh(OmegaSpec::concentric_disk(0.5), 0.022, cfg.angles);
  const SparseSystem sys = assemble_stiffness(mesh, FieldOnMesh::constant(1.0));
  const oracles::VonMises vm(700.0);
  auto g = [&](const Eigen::Vector2d& x, const Eigen::Vector2d&) {
    const double t = std::atan2(x.y(), x.x());
    return vm(t - cfg.angles[1]) - vm(t - cfg.angles[0]);
  };
  const Eigen::VectorXd u = solve_neumann(sys, assemble_boundary_load(mesh, g, 24)).coeffs();

  const std::vector<Eigen::Vector2d> probes = {
      {0.25, 0.25}, {-0.2, 0.1}, {0.0, -0.3}, {0.15, -0.12}, {-0.28, -0.2}};
  double fem_mean = 0.0, ana_mean = 0.0;
  std::vector<double> fem(probes.size()), ana(probes.size());
  for (size_t i = 0; i < probes.size(); ++i) {
    fem[i] = evaluate_at_point(mesh, u, probes[i]);
    ana[i] = u0_value(1, probes[i], cfg);
    fem_mean += fem[i] / probes.size();
    ana_mean += ana[i] / probes.size();
  }
  double value_err = 0.0;
  for (size_t i = 0; i < probes.size(); ++i) {
    value_err = std::max(value_err, std::abs((fem[i] - fem_mean) - (ana[i] - ana_mean)));
  }

  double grad_err = 0.0;
  const double step = 1e-5;
  for (const auto& x : oracles::spiral_points(20, 0.7)) {
    const Eigen::Vector2d grad = u0_gradient(1, x, cfg);
    const double gx = (u0_value(1, x + Eigen::Vector2d(step, 0), cfg) -
                       u0_value(1, x - Eigen::Vector2d(step, 0), cfg)) /
                      (2 * step);
    const double gy = (u0_value(1, x + Eigen::Vector2d(0, step), cfg) -
                       u0_value(1, x - Eigen::Vector2d(0, step), cfg)) /
                      (2 * step);
    grad_err = std::max({grad_err, std::abs(grad.x() - gx), std::abs(grad.y() - gy)});
  }
  const bool pass = value_err < 1e-3 && grad_err < 1e-7;
  std::snprintf(buffer, sizeof buffer, "probe err=%.2e (tol 1e-3), grad FD err=%.2e (tol 1e-7)",
                value_err, grad_err);
  report("C8 analytic potential oracle", pass, buffer);
}

// C9: conformal transport.
void criterion_transport() {
  const auto cfg = ElectrodeConfig::offset_equispaced(4);
  const TransportedPotentials moved =
      transport_potentials(ConformalMap::mobius({0.3, 0.0}), cfg);
  double max_lap = 0.0;
  const double h = 5e-4;
  for (const auto& x : oracles::spiral_points(50, 0.5)) {
    for (int n = 1; n <= cfg.n(); ++n) {
      const double lap =
          (moved.value(n, x + Eigen::Vector2d(h, 0)) + moved.value(n, x - Eigen::Vector2d(h, 0)) +
           moved.value(n, x + Eigen::Vector2d(0, h)) + moved.value(n, x - Eigen::Vector2d(0, h)) -
           4 * moved.value(n, x)) /
          (h * h);
      max_lap = std::max(max_lap, std::abs(lap));
    }
  }
  const TransportedPotentials ident =
      transport_potentials(ConformalMap::mobius({0.0, 0.0}), cfg);
  bool exact = true;
  for (const auto& x : oracles::spiral_points(20, 0.8)) {
    for (int n = 1; n <= cfg.n(); ++n) {
      exact &= ident.value(n, x) == u0_value(n, x, cfg);
      exact &= (ident.gradient(n, x) - u0_gradient(n, x, cfg)).norm() == 0.0;
    }
  }
  const bool pass = max_lap < 1e-5 && exact;
  std::snprintf(buffer, sizeof buffer, "stencil max=%.2e (tol 1e-5), identity exact=%s", max_lap,
                exact ? "yes" : "no");
  report("C9 conformal transport", pass, buffer);
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  criteria_fig1();
  criterion_dual_basis();
  criterion_fig2_runs();
  criterion_cem();
  criterion_fem();
  criterion_potential_oracle();
  criterion_transport();
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d criterion failure(s), %.1f s total\n", g_failures, dt);
  return g_failures == 0 ? 0 : 1;
}
