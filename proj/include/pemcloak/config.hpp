#pragma once

#include <numbers>
#include <string>
#include <vector>

#include "pemcloak/cem.hpp"
#include "pemcloak/mesh.hpp"
#include "pemcloak/potentials.hpp"
#include "pemcloak/solver.hpp"

namespace pemcloak {

/// Experiment description parsed from the sectioned key = value format; see
/// the README for the full key reference. Electrode count and epsilon are
/// required, everything else has defaults.
struct ExperimentConfig {
  int electrode_count = 0;
  std::string electrode_rule = "offset_equispaced";  // or "explicit"
  std::vector<double> electrode_angles;              // radians, rule == explicit

  OmegaSpec omega = OmegaSpec::concentric_disk(0.5);

  double epsilon = 0.0;
  std::string kappa0_seed = "1";
  double target_h = 0.02;
  double stop_tol = 1e-8;
  int max_iter = 200;
  double gamma_max = 1e3;
  double min_sigma = 1e-3;
  int max_backoffs = 5;

  bool has_cem = false;
  double cem_width = std::numbers::pi / 32.0;
  double cem_impedance = 0.01;

  std::string output_dir = "out";

  std::vector<double> resolved_angles() const;
  ElectrodeConfig electrodes() const;
  RunConfig run_config() const;
  CemElectrodes cem_electrodes() const;
};

/// Parses and validates a config text. PARSE_ERROR carries line/column;
/// VALIDATION_ERROR names the offending field.
ExperimentConfig parse_config(const std::string& text);

ExperimentConfig load_config_file(const std::string& path);

}  // namespace pemcloak
