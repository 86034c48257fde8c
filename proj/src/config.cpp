#include "pemcloak/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pemcloak/expression.hpp"

namespace pemcloak {

namespace {

struct KeyValue {
  std::string key;  // section-qualified, e.g. "omega.shape"
  std::string value;
  int line = 0;
};

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

[[noreturn]] void parse_fail(int line, int column, const std::string& message) {
  throw Error(ErrorCode::kParseError, message + " (line " + std::to_string(line) + ", column " +
                                          std::to_string(column) + ")");
}

[[noreturn]] void invalid(const std::string& field, const std::string& message) {
  throw Error(ErrorCode::kValidationError, field + ": " + message);
}

double parse_double(const KeyValue& kv) {
  try {
    size_t pos = 0;
    const double v = std::stod(kv.value, &pos);
    if (pos != kv.value.size()) invalid(kv.key, "trailing characters in number '" + kv.value + "'");
    return v;
  } catch (const Error&) {
    throw;
  } catch (...) {
    invalid(kv.key, "expected a number, got '" + kv.value + "'");
  }
}

int parse_int(const KeyValue& kv) {
  const double v = parse_double(kv);
  const int i = static_cast<int>(std::llround(v));
  if (std::abs(v - i) > 1e-9) invalid(kv.key, "expected an integer, got '" + kv.value + "'");
  return i;
}

std::vector<double> parse_list(const KeyValue& kv) {
  std::vector<double> out;
  std::stringstream ss(kv.value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) invalid(kv.key, "empty list entry");
    try {
      out.push_back(std::stod(item));
    } catch (...) {
      invalid(kv.key, "expected a number, got '" + item + "'");
    }
  }
  return out;
}

}  // namespace

std::vector<double> ExperimentConfig::resolved_angles() const {
  if (electrode_rule == "explicit") return electrode_angles;
  std::vector<double> out(electrode_count);
  for (int j = 0; j < electrode_count; ++j) {
    out[j] = std::numbers::pi / 180.0 * (1.0 + 360.0 * j / electrode_count);
  }
  return out;
}

ElectrodeConfig ExperimentConfig::electrodes() const {
  return ElectrodeConfig::from_angles(resolved_angles());
}

RunConfig ExperimentConfig::run_config() const {
  RunConfig rc;
  rc.epsilon = epsilon;
  rc.stop_tol = stop_tol;
  rc.max_iter = max_iter;
  rc.gamma_max = gamma_max;
  rc.min_sigma = min_sigma;
  rc.max_backoffs = max_backoffs;
  return rc;
}

CemElectrodes ExperimentConfig::cem_electrodes() const {
  CemElectrodes e;
  e.centers = resolved_angles();
  e.width = cem_width;
  e.contact_impedance = cem_impedance;
  return e;
}

ExperimentConfig parse_config(const std::string& text) {
  std::vector<KeyValue> pairs;
  std::string section;
  std::istringstream stream(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(stream, raw)) {
    ++line_no;
    const size_t hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') parse_fail(line_no, static_cast<int>(line.size()), "expected ']'");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) parse_fail(line_no, 2, "empty section name");
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) parse_fail(line_no, 1, "expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) parse_fail(line_no, 1, "empty key");
    if (value.empty()) parse_fail(line_no, static_cast<int>(eq) + 2, "empty value");
    pairs.push_back({section.empty() ? key : section + "." + key, value, line_no});
  }
  if (pairs.empty()) parse_fail(line_no ? line_no : 1, 1, "no key = value entries found");

  ExperimentConfig cfg;
  bool have_count = false, have_eps = false;
  for (const KeyValue& kv : pairs) {
    const std::string& k = kv.key;
    if (k == "electrodes" || k == "electrodes.count") {
      cfg.electrode_count = parse_int(kv);
      have_count = true;
    } else if (k == "electrodes.rule") {
      cfg.electrode_rule = kv.value;
    } else if (k == "electrodes.angles") {
      cfg.electrode_angles = parse_list(kv);
    } else if (k == "omega.shape") {
      if (kv.value == "concentric_disk") {
        cfg.omega.shape = OmegaSpec::Shape::kConcentricDisk;
      } else if (kv.value == "annulus_sector") {
        cfg.omega.shape = OmegaSpec::Shape::kAnnulusSector;
      } else if (kv.value == "offset_disk") {
        cfg.omega.shape = OmegaSpec::Shape::kOffsetDisk;
      } else {
        invalid(k, "unknown shape '" + kv.value + "'");
      }
    } else if (k == "omega.radius") {
      cfg.omega.radius = parse_double(kv);
    } else if (k == "omega.center_x") {
      cfg.omega.center.x() = parse_double(kv);
    } else if (k == "omega.center_y") {
      cfg.omega.center.y() = parse_double(kv);
    } else if (k == "omega.r_in") {
      cfg.omega.r_in = parse_double(kv);
    } else if (k == "omega.r_out") {
      cfg.omega.r_out = parse_double(kv);
    } else if (k == "omega.theta_min") {
      cfg.omega.theta_min = parse_double(kv);
    } else if (k == "omega.theta_max") {
      cfg.omega.theta_max = parse_double(kv);
    } else if (k == "epsilon" || k == "run.epsilon") {
      cfg.epsilon = parse_double(kv);
      have_eps = true;
    } else if (k == "seed" || k == "run.kappa0_seed") {
      cfg.kappa0_seed = kv.value;
    } else if (k == "run.stop_tol") {
      cfg.stop_tol = parse_double(kv);
    } else if (k == "run.max_iter") {
      cfg.max_iter = parse_int(kv);
    } else if (k == "run.gamma_max") {
      cfg.gamma_max = parse_double(kv);
    } else if (k == "run.min_sigma") {
      cfg.min_sigma = parse_double(kv);
    } else if (k == "run.backoffs") {
      cfg.max_backoffs = parse_int(kv);
    } else if (k == "target_h" || k == "mesh.target_h") {
      cfg.target_h = parse_double(kv);
    } else if (k == "cem.width") {
      cfg.cem_width = parse_double(kv);
      cfg.has_cem = true;
    } else if (k == "cem.impedance") {
      cfg.cem_impedance = parse_double(kv);
      cfg.has_cem = true;
    } else if (k == "cem.enabled") {
      cfg.has_cem = kv.value == "true" || kv.value == "1";
    } else if (k == "out" || k == "output.directory") {
      cfg.output_dir = kv.value;
    } else {
      invalid(k, "unknown key");
    }
  }

  if (!have_count) invalid("electrodes", "missing required electrode count");
  if (!have_eps) invalid("epsilon", "missing required perturbation size");
  if (cfg.electrode_rule != "offset_equispaced" && cfg.electrode_rule != "explicit") {
    invalid("electrodes.rule", "unknown rule '" + cfg.electrode_rule + "'");
  }
  if (cfg.electrode_rule == "explicit") {
    if (cfg.electrode_angles.empty()) invalid("electrodes.angles", "explicit rule needs angles");
    if (static_cast<int>(cfg.electrode_angles.size()) != cfg.electrode_count) {
      invalid("electrodes.angles", "length does not match electrodes.count");
    }
  }
  if (cfg.electrode_count < 2) invalid("electrodes", "need at least 2 electrodes");
  if (!(cfg.epsilon > 0.0)) invalid("epsilon", "must be positive");
  if (!(cfg.target_h > 0.0)) invalid("mesh.target_h", "must be positive");
  if (!(cfg.stop_tol > 0.0 && cfg.stop_tol < 1.0)) invalid("run.stop_tol", "must lie in (0, 1)");
  if (cfg.max_iter < 1) invalid("run.max_iter", "must be >= 1");
  if (!(cfg.gamma_max > 0.0)) invalid("run.gamma_max", "must be positive");
  if (!(cfg.min_sigma > 0.0)) invalid("run.min_sigma", "must be positive");
  if (cfg.max_backoffs < 0) invalid("run.backoffs", "must be >= 0");
  if (cfg.has_cem) {
    if (!(cfg.cem_width > 0.0)) invalid("cem.width", "must be positive");
    if (!(cfg.cem_impedance > 0.0)) invalid("cem.impedance", "must be positive");
  }
  try {
    cfg.omega.validate();
  } catch (const Error& e) {
    invalid("omega", e.what());
  }
  try {
    Expression::parse(cfg.kappa0_seed);
  } catch (const Error& e) {
    invalid("run.kappa0_seed", e.what());
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingArtifact, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace pemcloak
