#include <doctest.h>

#include <numbers>

#include "oracles.hpp"
#include "pemcloak/solver.hpp"

using namespace pemcloak;

namespace {

constexpr double kPi = std::numbers::pi;
const QuadratureRule kRule = quadrature(kAssemblyQuadratureDegree);

struct Setup {
  ElectrodeConfig cfg{{0.0, 1.0}};
  Mesh mesh;
  PsiCache cache;
  PerturbationBasis basis;
};

// Fig.1 configuration on a coarse test mesh (unit-seed kappa0).
Setup fig1_setup(double h = 0.1, bool project = true) {
  Setup s;
  s.cfg = ElectrodeConfig::offset_equispaced(4);
  s.mesh = build_disk_mesh(OmegaSpec::concentric_disk(0.5), h, s.cfg.angles);
  s.cache = build_psi_cache(s.mesh, s.cfg, kRule);
  s.basis = build_basis(s.mesh, s.cfg, s.cache);
  if (project) project_kappa0(s.basis, [](double, double) { return 1.0; }, s.cache);
  return s;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("sym matrix storage is symmetric and the stopping sum double-counts") {
  SymMatrix m(3);
  m.set(1, 2, 0.5);
  m.set(3, 3, -1.0);
  CHECK(m(2, 1) == 0.5);
  CHECK(m(1, 2) == 0.5);
  CHECK(m.max_abs() == 1.0);
  const SymMatrix zero(3);
  // |0.5| twice (off-diagonal) + |-1| once
  CHECK(SymMatrix::full_abs_distance(m, zero) == doctest::Approx(2.0).epsilon(1e-15));
  const Eigen::MatrixXd dense = m.dense();
  CHECK(dense(0, 1) == 0.5);
  CHECK(dense(1, 0) == 0.5);
}

TEST_CASE("zero perturbation gives a zero corrector") {
  const auto s = fig1_setup(0.15, false);  // no seed projected: kappa(0) = 0
  const SymMatrix tau(s.cfg.n());
  const FieldOnMesh u = solve_corrector(s.mesh, s.basis, s.cache, tau, 0.5, 1);
  CHECK(u.coeffs().norm() == 0.0);
}

TEST_CASE("epsilon = 0 collapses the update by the duality conditions") {
  const auto s = fig1_setup(0.12);
  SymMatrix tau(s.cfg.n());
  tau.set(1, 1, 0.2);
  tau.set(1, 3, -0.15);
  tau.set(2, 3, 0.07);
  const SymMatrix next = fixed_point_step(s.mesh, s.basis, s.cache, tau, 0.0);
  CHECK(next.max_abs() < 1e-10);
}

TEST_CASE("one step from zero equals the definition of the contraction map") {
  const auto s = fig1_setup(0.12);
  const double eps = 1.5;
  const SymMatrix zero(s.cfg.n());
  const SymMatrix tau1 = fixed_point_step(s.mesh, s.basis, s.cache, zero, eps);
  // M(sigma_eps at tau=0) = -eps * (int kappa0 psi) - eps^2 M~(0); the first
  // term vanishes by the orthogonality conditions, so M = eps * tau1.
  const SymMatrix m = pem_measurement_matrix(s.mesh, s.basis, s.cache, zero, eps);
  CHECK((m.tri() - eps * tau1.tri()).cwiseAbs().maxCoeff() < eps * 1e-9);
}

TEST_CASE("contraction at moderate epsilon, geometric decay") {
  const auto s = fig1_setup(0.1);
  RunConfig rc;
  rc.epsilon = 2.0;
  const RunResult res = run_algorithm(s.mesh, s.basis, s.cache, rc);
  REQUIRE(res.report.converged);
  const auto& hist = res.report.discrepancy_history;
  REQUIRE(hist.size() >= 4);
  for (size_t i = 1; i < hist.size(); ++i) CHECK(hist[i] < hist[i - 1]);
  const auto [slope, r2] = oracles::log_linear_fit(hist);
  CHECK(slope < 0.0);
  CHECK(r2 >= 0.98);
}

TEST_CASE("fig.1 run converges for every epsilon in the paper sweep") {
  const auto s = fig1_setup(0.1);
  for (double eps : {0.5, 2.0, 4.0, 6.0}) {
    RunConfig rc;
    rc.epsilon = eps;
    rc.max_iter = 60;
    const RunResult res = run_algorithm(s.mesh, s.basis, s.cache, rc);
    CHECK(res.report.converged);
    CHECK(res.report.backoff_count == 0);
    CHECK(res.report.discrepancy_history.back() < rc.stop_tol);
    CHECK(res.report.min_sigma_final >= rc.min_sigma);
  }
}

TEST_CASE("with kappa0 forced to zero the fixed point is trivial") {
  const auto s = fig1_setup(0.12, false);
  RunConfig rc;
  rc.epsilon = 2.0;
  const RunResult res = run_algorithm(s.mesh, s.basis, s.cache, rc);
  CHECK(res.report.converged);
  CHECK(res.report.iterations == 1);
  CHECK(res.report.tau_final.max_abs() == 0.0);
  for (const auto& x : oracles::spiral_points(10, 0.9)) {
    CHECK(res.sigma_eps(x) == 1.0);
  }
}

TEST_CASE("first-order size of tau across small epsilon") {
  const auto s = fig1_setup(0.1);
  std::vector<double> ratios;
  for (double eps : {0.25, 0.5, 1.0}) {
    RunConfig rc;
    rc.epsilon = eps;
    const RunResult res = run_algorithm(s.mesh, s.basis, s.cache, rc);
    REQUIRE(res.report.converged);
    ratios.push_back(res.report.tau_final.max_abs() / eps);
  }
  const double lo = *std::min_element(ratios.begin(), ratios.end());
  const double hi = *std::max_element(ratios.begin(), ratios.end());
  CHECK(hi / lo < 2.0);
}

TEST_CASE("invisibility beats the kappa0-only perturbation by three orders") {
  const auto s = fig1_setup(0.1);
  RunConfig rc;
  rc.epsilon = 2.0;
  const RunResult res = run_algorithm(s.mesh, s.basis, s.cache, rc);
  REQUIRE(res.report.converged);
  const SymMatrix naive =
      pem_measurement_matrix(s.mesh, s.basis, s.cache, SymMatrix(s.cfg.n()), rc.epsilon);
  CHECK(res.report.measurement_max <= 1e-3 * naive.max_abs());
}

TEST_CASE("sigma_eps is one outside the inclusion and positivity is recorded") {
  const auto s = fig1_setup(0.1);
  RunConfig rc;
  rc.epsilon = 4.0;
  const RunResult res = run_algorithm(s.mesh, s.basis, s.cache, rc);
  REQUIRE(res.report.converged);
  for (double r : {0.55, 0.7, 0.9}) {
    for (int i = 0; i < 8; ++i) {
      const double t = 2 * kPi * i / 8;
      CHECK(res.sigma_eps({r * std::cos(t), r * std::sin(t)}) == 1.0);
    }
  }
  CHECK(res.report.min_sigma_final >= rc.min_sigma);
  CHECK(res.report.min_sigma_history.size() == res.report.discrepancy_history.size());
}

TEST_CASE("measurement matrix is exactly zero for epsilon = 0") {
  const auto s = fig1_setup(0.15);
  const SymMatrix m =
      pem_measurement_matrix(s.mesh, s.basis, s.cache, SymMatrix(s.cfg.n()), 0.0);
  CHECK(m.max_abs() == 0.0);
}

TEST_CASE("corrector converges to the unperturbed-coefficient limit as eps -> 0") {
  const auto s = fig1_setup(0.12);
  SymMatrix tau(s.cfg.n());
  tau.set(1, 2, 2e-4);
  const QuadratureRule rule = quadrature(2);
  auto l2 = [&](const Eigen::VectorXd& u) {
    const Eigen::VectorXd vals = oracles::sample_p2(s.mesh, u, rule);
    return std::sqrt(integrate(s.mesh, rule, Region::kAll,
                               [&](int e, int q, const Eigen::Vector2d&) {
                                 const double v = vals[static_cast<Eigen::Index>(e) * rule.size() + q];
                                 return v * v;
                               }));
  };
  // reference: the sigma = 1 corrector (same kappa in the load)
  const Eigen::VectorXd u_limit =
      solve_corrector(s.mesh, s.basis, s.cache, tau, 1e-13, 1).coeffs();
  double prev = -1.0;
  for (double eps : {0.2, 0.1, 0.05}) {
    const Eigen::VectorXd u = solve_corrector(s.mesh, s.basis, s.cache, tau, eps, 1).coeffs();
    const double err = l2(u - u_limit);
    if (prev > 0.0) {
      CHECK(err < prev);
      CHECK(prev / err == doctest::Approx(2.0).epsilon(0.5));  // O(eps)
    }
    prev = err;
  }
}

TEST_CASE("corrector energy bound is stable across seeds") {
  auto s = fig1_setup(0.12, false);
  const QuadratureRule rule = quadrature(2);
  std::vector<double> constants;
  const std::vector<std::function<double(double, double)>> seeds = {
      [](double, double) { return 1.0; },
      [](double x, double y) { return x + y + 1; },
      [](double x, double y) { return std::exp(-(x + 0.5) * (x + 0.5) - y * y); },
  };
  for (const auto& seed : seeds) {
    auto local = s;
    project_kappa0(local.basis, seed, local.cache);
    const Eigen::VectorXd kv =
        kappa_values(local.basis, local.cache, Eigen::VectorXd::Zero(local.basis.k_count()));
    const double kappa_inf = kv.cwiseAbs().maxCoeff();
    const Eigen::VectorXd u =
        solve_corrector(local.mesh, local.basis, local.cache, SymMatrix(local.cfg.n()), 0.25, 1)
            .coeffs();
    const Eigen::Matrix2Xd g = fe_gradient_at_quadrature(local.mesh, u, rule);
    const double energy = std::sqrt(integrate(
        local.mesh, rule, Region::kAll, [&](int e, int q, const Eigen::Vector2d&) {
          return g.col(static_cast<Eigen::Index>(e) * rule.size() + q).squaredNorm();
        }));
    constants.push_back(energy / kappa_inf);
  }
  const double lo = *std::min_element(constants.begin(), constants.end());
  const double hi = *std::max_element(constants.begin(), constants.end());
  CHECK(hi / lo < 10.0);
}

TEST_CASE("positivity violations surface or trigger backoff") {
  const auto s = fig1_setup(0.12);
  CHECK_THROWS_WITH_AS(
      solve_corrector(s.mesh, s.basis, s.cache, SymMatrix(s.cfg.n()), 500.0, 1),
      doctest::Contains("POSITIVITY_VIOLATION"), Error);

  RunConfig rc;
  rc.epsilon = 1e6;
  rc.max_backoffs = 0;
  CHECK_THROWS_WITH_AS(run_algorithm(s.mesh, s.basis, s.cache, rc),
                       doctest::Contains("MAX_BACKOFFS_EXCEEDED"), Error);

  rc.max_backoffs = 5;
  CHECK_THROWS_AS(run_algorithm(s.mesh, s.basis, s.cache, rc), Error);

  // with enough backoffs the run recovers
  rc.max_backoffs = 25;
  const RunResult res = run_algorithm(s.mesh, s.basis, s.cache, rc);
  CHECK(res.report.converged);
  CHECK(res.report.backoff_count > 0);
  CHECK(res.report.epsilon_used < rc.epsilon);
}

TEST_CASE("iteration cap returns an unconverged report") {
  const auto s = fig1_setup(0.12);
  RunConfig rc;
  rc.epsilon = 6.0;
  rc.max_iter = 2;
  const RunResult res = run_algorithm(s.mesh, s.basis, s.cache, rc);
  CHECK_FALSE(res.report.converged);
  CHECK(res.report.failure == "MAX_ITER_EXCEEDED");
  CHECK(res.report.iterations == 2);
  CHECK(std::isfinite(res.report.measurement_max));
}

TEST_CASE("construction works on offset and sector inclusions") {
  const std::vector<OmegaSpec> shapes = {
      OmegaSpec::offset_disk({0.25, 0.1}, 0.4),
      OmegaSpec::annulus_sector(0.3, 0.62, 0.5, 2.6),
  };
  for (const auto& omega : shapes) {
    Setup s;
    s.cfg = ElectrodeConfig::offset_equispaced(4);
    s.mesh = build_disk_mesh(omega, 0.1, s.cfg.angles);
    s.cache = build_psi_cache(s.mesh, s.cfg, kRule);
    s.basis = build_basis(s.mesh, s.cfg, s.cache);
    project_kappa0(s.basis, [](double, double) { return 1.0; }, s.cache);
    RunConfig rc;
    rc.epsilon = 1.0;
    const RunResult res = run_algorithm(s.mesh, s.basis, s.cache, rc);
    CHECK(res.report.converged);
    CHECK(res.report.min_sigma_final >= rc.min_sigma);
    const SymMatrix naive =
        pem_measurement_matrix(s.mesh, s.basis, s.cache, SymMatrix(s.cfg.n()), rc.epsilon);
    CHECK(res.report.measurement_max <= 1e-3 * naive.max_abs());
    // support: sigma_eps is exactly one outside the inclusion
    for (const auto& x : oracles::spiral_points(60, 0.95)) {
      if (omega.contains(x, 1e-6)) continue;
      CHECK(res.sigma_eps(x) == 1.0);
    }
  }
}

TEST_CASE("measurement map: null matrix, basis vectors, mean-free guard") {
  SymMatrix zero(3);
  Eigen::VectorXd current(4);
  current << 1.0, -0.25, -0.25, -0.5;
  CHECK(measurement_map_apply(zero, current).norm() == 0.0);

  SymMatrix m(3);
  m.set(1, 1, 2.0);
  m.set(1, 2, -0.5);
  m.set(2, 3, 1.0);
  Eigen::VectorXd e10(4);
  e10 << -1.0, 1.0, 0.0, 0.0;  // e^1 - e^0
  const Eigen::VectorXd w = measurement_map_apply(m, e10);
  CHECK(std::abs(w.sum()) < 1e-14);
  // differences against the ground entry reproduce column 1 of M
  for (int i = 1; i <= 3; ++i) CHECK(w[i] - w[0] == doctest::Approx(m(i, 1)).epsilon(1e-14));

  Eigen::VectorXd bad(4);
  bad << 1.0, 1.0, 0.0, 0.0;
  CHECK_THROWS_WITH_AS(measurement_map_apply(m, bad), doctest::Contains("NOT_MEAN_FREE"), Error);
}

TEST_CASE("measurement map agrees with a superposed re-evaluation") {
  const auto s = fig1_setup(0.1);
  const int n = s.cfg.n();
  const double eps = 0.5;
  SymMatrix tau(n);  // an unconverged tau
  tau.set(1, 2, 3e-4);
  tau.set(2, 2, -1e-4);
  const SymMatrix m = pem_measurement_matrix(s.mesh, s.basis, s.cache, tau, eps);

  Eigen::VectorXd current(n + 1);
  current << 0.4, -0.7, 0.1, 0.2;
  REQUIRE(std::abs(current.sum()) < 1e-12);
  const Eigen::VectorXd via_matrix = measurement_map_apply(m, current);

  // direct: superpose the correctors, integrate eqnMeasure per electrode
  const Eigen::VectorXd kappa_q = kappa_values(s.basis, s.cache, tau.tri());
  Eigen::VectorXd u_combo = Eigen::VectorXd::Zero(s.mesh.num_nodes());
  for (int j = 1; j <= n; ++j) {
    u_combo += current[j] * solve_corrector(s.mesh, s.basis, s.cache, tau, eps, j).coeffs();
  }
  const Eigen::Matrix2Xd grad_ut = fe_gradient_at_quadrature(s.mesh, u_combo, kRule);
  Eigen::VectorXd direct = Eigen::VectorXd::Zero(n + 1);
  for (int i = 1; i <= n; ++i) {
    double total = 0.0;
    const int nq = s.cache.points_per_element;
    for (size_t ei = 0; ei < s.cache.elements.size(); ++ei) {
      for (int q = 0; q < nq; ++q) {
        const int col = static_cast<int>(ei) * nq + q;
        const Eigen::Index gcol =
            static_cast<Eigen::Index>(s.cache.elements[ei]) * nq + q;
        // grad u^eps of the superposed current pattern
        Eigen::Vector2d ge = eps * grad_ut.col(gcol);
        for (int j = 1; j <= n; ++j) {
          ge += current[j] * s.cache.grad_u0.block<2, 1>(2 * (j - 1), col);
        }
        total -= eps * s.cache.weights[col] * kappa_q[col] *
                 ge.dot(s.cache.grad_u0.block<2, 1>(2 * (i - 1), col));
      }
    }
    direct[i] = total;
  }
  direct.array() -= direct.mean();
  CHECK((via_matrix - direct).cwiseAbs().maxCoeff() < 1e-9);
}

}  // TEST_SUITE
