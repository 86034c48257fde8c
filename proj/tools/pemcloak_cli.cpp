// Command-line driver: construct perturbations that null the relative
// point-electrode measurements, verify the measurement matrix, and validate
// against the complete electrode model.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>

#include "pemcloak/cem.hpp"
#include "pemcloak/config.hpp"
#include "pemcloak/expression.hpp"
#include "pemcloak/export.hpp"
#include "pemcloak/solver.hpp"

using nlohmann::json;
using namespace pemcloak;

namespace {

int exit_code_for(const Error& error) {
  switch (error.code()) {
    case ErrorCode::kParseError:
    case ErrorCode::kValidationError:
    case ErrorCode::kMissingArtifact:
      return 2;
    case ErrorCode::kMaxBackoffsExceeded:
      return 4;
    default:
      return 3;
  }
}

struct Pipeline {
  ExperimentConfig config;
  ElectrodeConfig electrodes{{0.0, 1.0}};
  Mesh mesh;
  PsiCache cache;
  PerturbationBasis basis;
};

Pipeline build_pipeline(const ExperimentConfig& config, bool with_cem_arcs) {
  Pipeline p;
  p.config = config;
  p.electrodes = config.electrodes();
  std::optional<double> width;
  if (with_cem_arcs) width = config.cem_width;
  p.mesh = build_disk_mesh(config.omega, config.target_h, p.electrodes.angles, width);
  p.cache = build_psi_cache(p.mesh, p.electrodes, quadrature(kAssemblyQuadratureDegree));
  p.basis = build_basis(p.mesh, p.electrodes, p.cache);
  Expression seed = Expression::parse(config.kappa0_seed);
  project_kappa0(p.basis, [seed](double x, double y) { return seed(x, y); }, p.cache);
  return p;
}

json tau_to_json(const SymMatrix& tau) {
  json j;
  j["n"] = tau.n();
  j["tri"] = std::vector<double>(tau.tri().data(), tau.tri().data() + tau.tri().size());
  return j;
}

SymMatrix tau_from_json(const json& j) {
  SymMatrix tau(j.at("n").get<int>());
  const auto tri = j.at("tri").get<std::vector<double>>();
  if (static_cast<int>(tri.size()) != tau.tri().size()) {
    throw Error(ErrorCode::kMissingArtifact, "tau entry count does not match electrode count");
  }
  for (size_t i = 0; i < tri.size(); ++i) tau.tri()[i] = tri[i];
  return tau;
}

void write_summary(const std::string& dir, const json& summary) {
  std::ofstream out(dir + "/summary.json");
  out << summary.dump(2) << "\n";
}

json base_summary(const ExperimentConfig& config) {
  json j;
  j["converged"] = false;
  j["iterations"] = 0;
  j["epsilon_requested"] = config.epsilon;
  j["epsilon_used"] = config.epsilon;
  j["backoff_count"] = 0;
  j["stop_tol"] = config.stop_tol;
  j["final_discrepancy"] = nullptr;
  j["measurement_max"] = nullptr;
  j["min_sigma"] = nullptr;
  j["tau"] = nullptr;
  j["error"] = nullptr;
  j["electrodes"] = config.electrode_count;
  j["kappa0_seed"] = config.kappa0_seed;
  j["target_h"] = config.target_h;
  return j;
}

json load_summary(const std::string& dir) {
  std::ifstream in(dir + "/summary.json");
  if (!in) {
    throw Error(ErrorCode::kMissingArtifact,
                "no summary.json under '" + dir + "' (run generate first)");
  }
  json j;
  in >> j;
  return j;
}

int cmd_generate(const ExperimentConfig& config, bool quiet) {
  std::filesystem::create_directories(config.output_dir);
  json summary = base_summary(config);
  try {
    Pipeline p = build_pipeline(config, false);
    const DualityCheck duality = duality_check(p.basis, p.cache);
    write_basis_diagnostics_csv(config.output_dir + "/basis_diagnostics.csv", p.basis, duality);

    RunResult result = run_algorithm(p.mesh, p.basis, p.cache, config.run_config());
    const RunReport& report = result.report;

    summary["converged"] = report.converged;
    summary["iterations"] = report.iterations;
    summary["epsilon_used"] = report.epsilon_used;
    summary["backoff_count"] = report.backoff_count;
    summary["final_discrepancy"] =
        report.discrepancy_history.empty() ? 0.0 : report.discrepancy_history.back();
    summary["measurement_max"] = report.measurement_max;
    summary["min_sigma"] = report.min_sigma_final;
    summary["tau"] = tau_to_json(report.tau_final);
    if (!report.failure.empty()) summary["error"] = report.failure;
    write_summary(config.output_dir, summary);

    write_convergence_csv(config.output_dir + "/convergence.csv", report);
    auto kappa = kappa_eval(p.basis, p.mesh, report.tau_final.tri());
    write_cell_scalar_vtk(config.output_dir + "/sigma_eps.vtk", p.mesh, "sigma_eps",
                          sample_at_centroids(p.mesh, result.sigma_eps));
    write_cell_scalar_vtk(config.output_dir + "/kappa.vtk", p.mesh, "kappa",
                          sample_at_centroids(p.mesh, kappa));
    write_raster_csv(config.output_dir + "/sigma_eps_raster.csv", result.sigma_eps);

    if (!quiet) {
      std::printf("converged=%s iterations=%d epsilon_used=%.6g backoffs=%d\n",
                  report.converged ? "true" : "false", report.iterations, report.epsilon_used,
                  report.backoff_count);
      std::printf("final discrepancy=%.3e  ||M||_max=%.3e  min sigma_eps=%.6g\n",
                  summary["final_discrepancy"].get<double>(), report.measurement_max,
                  report.min_sigma_final);
      std::printf("artifacts in %s\n", config.output_dir.c_str());
    }
    return report.converged ? 0 : 3;
  } catch (const Error& error) {
    summary["error"] = error.name();
    write_summary(config.output_dir, summary);
    std::fprintf(stderr, "error: %s\n", error.what());
    return exit_code_for(error);
  }
}

int cmd_verify_pem(const ExperimentConfig& config, bool quiet) {
  const json summary = load_summary(config.output_dir);
  if (summary.at("tau").is_null()) {
    throw Error(ErrorCode::kMissingArtifact, "summary.json holds no tau (generate did not finish)");
  }
  const SymMatrix tau = tau_from_json(summary.at("tau"));
  const double epsilon = summary.at("epsilon_used").get<double>();

  Pipeline p = build_pipeline(config, false);
  const SymMatrix m = pem_measurement_matrix(p.mesh, p.basis, p.cache, tau, epsilon);
  const SymMatrix m0 =
      pem_measurement_matrix(p.mesh, p.basis, p.cache, SymMatrix(p.electrodes.n()), epsilon);
  const double threshold = epsilon * config.stop_tol * 10.0;
  const bool pass = m.max_abs() <= threshold;
  if (!quiet) {
    std::printf("||M(sigma_eps)||_max = %.6e\n", m.max_abs());
    std::printf("||M(1 + eps kappa0)||_max = %.6e\n", m0.max_abs());
    std::printf("ratio = %.6e\n", m0.max_abs() > 0 ? m.max_abs() / m0.max_abs() : 0.0);
    std::printf("threshold (eps * stop_tol * 10) = %.6e\n", threshold);
  }
  std::printf("%s\n", pass ? "PASS" : "FAIL");
  return pass ? 0 : 3;
}

int cmd_validate_cem(const ExperimentConfig& config, bool quiet) {
  if (!config.has_cem) {
    throw Error(ErrorCode::kValidationError, "cem: config has no [cem] block");
  }
  const json summary = load_summary(config.output_dir);
  if (summary.at("tau").is_null()) {
    throw Error(ErrorCode::kMissingArtifact, "summary.json holds no tau (generate did not finish)");
  }
  const SymMatrix tau = tau_from_json(summary.at("tau"));
  const double epsilon = summary.at("epsilon_used").get<double>();

  Pipeline p = build_pipeline(config, true);
  auto kappa = kappa_eval(p.basis, p.mesh, tau.tri());
  auto sigma_eps = [kappa, epsilon](const Eigen::Vector2d& x) {
    return 1.0 + epsilon * kappa(x);
  };
  const CemElectrodes electrodes = config.cem_electrodes();
  const auto currents = trig_current_basis(electrodes.centers);
  const CemComparison cmp = compare_cem(p.mesh, sigma_eps, electrodes, currents);

  {
    std::ofstream out(config.output_dir + "/cem_voltages.csv");
    out << "current,electrode,U_reference,U_perturbed\n";
    char buf[120];
    for (size_t c = 0; c < currents.size(); ++c) {
      for (int l = 0; l < electrodes.count(); ++l) {
        std::snprintf(buf, sizeof buf, "%zu,%d,%.17g,%.17g\n", c + 1, l,
                      cmp.voltages_reference[c][l], cmp.voltages_perturbed[c][l]);
        out << buf;
      }
    }
  }
  if (!quiet) {
    for (size_t c = 0; c < cmp.per_current.size(); ++c) {
      std::printf("current %zu: relative discrepancy %.6e\n", c + 1, cmp.per_current[c]);
    }
  }
  std::printf("E_CEM = %.6e\n", cmp.total);
  return 0;
}

int cmd_mesh_info(const ExperimentConfig& config, bool quiet) {
  const ElectrodeConfig electrodes = config.electrodes();
  std::optional<double> width;
  if (config.has_cem) width = config.cem_width;
  const Mesh mesh = build_disk_mesh(config.omega, config.target_h, electrodes.angles, width);

  double area = 0.0, area_in = 0.0;
  int inside = 0, curved = 0;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const double a = element_area(mesh, e);
    area += a;
    if (mesh.element_tags[e] == ElementTag::kInsideOmega) {
      area_in += a;
      ++inside;
    }
    if (mesh.element_curved[e]) ++curved;
  }
  std::printf("elements=%d nodes=%d boundary_edges=%zu\n", mesh.num_elements(), mesh.num_nodes(),
              mesh.boundary_edges.size());
  std::printf("h_max=%.6g (target %.6g)\n", mesh.h_max, config.target_h);
  std::printf("inside_omega_elements=%d curved_elements=%d\n", inside, curved);
  std::printf("total_area=%.12g omega_area=%.12g\n", area, area_in);
  std::filesystem::create_directories(config.output_dir);
  write_mesh_vtk(config.output_dir + "/mesh.vtk", mesh);
  if (!quiet) std::printf("mesh written to %s/mesh.vtk\n", config.output_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"invisible conductivity perturbations for point-electrode EIT"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path, out_dir, seed_expr;
  double epsilon = 0.0;
  int electrodes = 0;
  bool quiet = false;
  app.add_option("--config", config_path, "experiment config file");
  app.add_option("--out", out_dir, "output directory (overrides config)");
  app.add_option("--seed-expr", seed_expr, "kappa0 seed expression (overrides config)");
  app.add_option("--epsilon", epsilon, "perturbation size (overrides config)");
  app.add_option("--electrodes", electrodes, "electrode count (overrides config)");
  app.add_flag("--quiet", quiet, "suppress progress output");

  auto* generate = app.add_subcommand("generate", "run the fixed-point construction");
  auto* verify = app.add_subcommand("verify-pem", "measurement matrix of a generated field");
  auto* validate = app.add_subcommand("validate-cem", "CEM discrepancy of a generated field");
  auto* info = app.add_subcommand("mesh-info", "mesh statistics and VTK export");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig config;
    if (!config_path.empty()) {
      config = load_config_file(config_path);
    } else {
      if (electrodes <= 0 || epsilon <= 0.0) {
        std::fprintf(stderr,
                     "error: VALIDATION_ERROR: need --config, or --electrodes and --epsilon\n");
        return 2;
      }
      config.electrode_count = electrodes;
      config.epsilon = epsilon;
    }
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (!seed_expr.empty()) {
      Expression::parse(seed_expr);  // validate before overriding
      config.kappa0_seed = seed_expr;
    }
    if (epsilon > 0.0) config.epsilon = epsilon;
    if (electrodes > 0) config.electrode_count = electrodes;

    if (generate->parsed()) return cmd_generate(config, quiet);
    if (verify->parsed()) return cmd_verify_pem(config, quiet);
    if (validate->parsed()) return cmd_validate_cem(config, quiet);
    if (info->parsed()) return cmd_mesh_info(config, quiet);
    return 2;
  } catch (const Error& error) {
    std::fprintf(stderr, "error: %s\n", error.what());
    return exit_code_for(error);
  } catch (const std::exception& error) {
    std::fprintf(stderr, "error: %s\n", error.what());
    return 3;
  }
}
