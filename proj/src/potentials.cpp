#include "pemcloak/potentials.hpp"

#include <cmath>
#include <numbers>

namespace pemcloak {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kElectrodeTol = 1e-14;

double circ_gap(double a, double b) {
  double d = std::abs(std::fmod(a - b, 2.0 * kPi));
  return std::min(d, 2.0 * kPi - d);
}

}  // namespace

ElectrodeConfig ElectrodeConfig::from_angles(std::vector<double> angles) {
  if (angles.size() < 2) {
    throw Error(ErrorCode::kValidationError, "electrodes: at least 2 electrodes required (N >= 1)");
  }
  for (size_t i = 0; i < angles.size(); ++i) {
    for (size_t j = i + 1; j < angles.size(); ++j) {
      if (circ_gap(angles[i], angles[j]) < 1e-13) {
        throw Error(ErrorCode::kValidationError,
                    "electrodes: angles " + std::to_string(i) + " and " + std::to_string(j) +
                        " coincide modulo 2*pi");
      }
    }
  }
  ElectrodeConfig cfg;
  cfg.angles = std::move(angles);
  return cfg;
}

ElectrodeConfig ElectrodeConfig::offset_equispaced(int count) {
  std::vector<double> angles(count);
  for (int j = 0; j < count; ++j) {
    angles[j] = kPi / 180.0 * (1.0 + 360.0 * j / count);
  }
  return from_angles(std::move(angles));
}

Eigen::Vector2d ElectrodeConfig::position(int electrode) const {
  const double t = angles.at(electrode);
  return {std::cos(t), std::sin(t)};
}

int PairIndex::index(int i, int j) const {
  if (i > j) std::swap(i, j);
  return j * (j - 1) / 2 + i;
}

std::pair<int, int> PairIndex::pair(int k) const {
  int j = static_cast<int>(std::ceil((-1.0 + std::sqrt(1.0 + 8.0 * k)) / 2.0 - 1e-12));
  while (j * (j + 1) / 2 < k) ++j;
  while ((j - 1) * j / 2 >= k) --j;
  return {k - j * (j - 1) / 2, j};
}

double u0_value(int n, const Eigen::Vector2d& x, const ElectrodeConfig& cfg) {
  const Eigen::Vector2d dn = x - cfg.position(n);
  const Eigen::Vector2d d0 = x - cfg.position(0);
  const double rn = dn.norm(), r0 = d0.norm();
  if (rn < kElectrodeTol || r0 < kElectrodeTol) {
    throw Error(ErrorCode::kEvalAtElectrode, "evaluation point within 1e-14 of an electrode");
  }
  return -(std::log(rn) - std::log(r0)) / kPi;
}

Eigen::Vector2d u0_gradient(int n, const Eigen::Vector2d& x, const ElectrodeConfig& cfg) {
  const Eigen::Vector2d dn = x - cfg.position(n);
  const Eigen::Vector2d d0 = x - cfg.position(0);
  const double rn2 = dn.squaredNorm(), r02 = d0.squaredNorm();
  if (rn2 < kElectrodeTol * kElectrodeTol || r02 < kElectrodeTol * kElectrodeTol) {
    throw Error(ErrorCode::kEvalAtElectrode, "evaluation point within 1e-14 of an electrode");
  }
  return -(dn / rn2 - d0 / r02) / kPi;
}

Eigen::Matrix2Xd u0_all_gradients(const Eigen::Vector2d& x, const ElectrodeConfig& cfg) {
  const int n = cfg.n();
  const Eigen::Vector2d d0 = x - cfg.position(0);
  const double r02 = d0.squaredNorm();
  if (r02 < kElectrodeTol * kElectrodeTol) {
    throw Error(ErrorCode::kEvalAtElectrode, "evaluation point within 1e-14 of an electrode");
  }
  const Eigen::Vector2d g0 = d0 / r02;
  Eigen::Matrix2Xd out(2, n);
  for (int i = 1; i <= n; ++i) {
    const Eigen::Vector2d di = x - cfg.position(i);
    const double ri2 = di.squaredNorm();
    if (ri2 < kElectrodeTol * kElectrodeTol) {
      throw Error(ErrorCode::kEvalAtElectrode, "evaluation point within 1e-14 of an electrode");
    }
    out.col(i - 1) = -(di / ri2 - g0) / kPi;
  }
  return out;
}

double psi_value(int k, const Eigen::Vector2d& x, const ElectrodeConfig& cfg) {
  const PairIndex pairs(cfg.n());
  const auto [i, j] = pairs.pair(k);
  return u0_gradient(i, x, cfg).dot(u0_gradient(j, x, cfg));
}

Eigen::VectorXd psi_all(const Eigen::Vector2d& x, const ElectrodeConfig& cfg) {
  const int n = cfg.n();
  const Eigen::Matrix2Xd g = u0_all_gradients(x, cfg);
  Eigen::VectorXd out(n * (n + 1) / 2);
  int k = 0;
  for (int j = 1; j <= n; ++j) {
    for (int i = 1; i <= j; ++i) {
      out[k++] = g.col(i - 1).dot(g.col(j - 1));
    }
  }
  return out;
}

ConformalMap ConformalMap::identity() { return mobius({0.0, 0.0}, 0.0); }

ConformalMap ConformalMap::mobius(std::complex<double> a, double rotation) {
  if (std::abs(a) >= 1.0) {
    throw Error(ErrorCode::kValidationError, "mobius parameter must satisfy |a| < 1");
  }
  const std::complex<double> phase = std::polar(1.0, rotation);
  const std::complex<double> abar = std::conj(a);
  ConformalMap m;
  m.map = [=](std::complex<double> z) { return phase * (z - a) / (1.0 - abar * z); };
  m.derivative = [=](std::complex<double> z) {
    const std::complex<double> den = 1.0 - abar * z;
    return phase * (1.0 - std::norm(a)) / (den * den);
  };
  return m;
}

TransportedPotentials::TransportedPotentials(ConformalMap map, const ElectrodeConfig& cfg)
    : map_(std::move(map)) {
  images_.reserve(cfg.angles.size());
  for (size_t n = 0; n < cfg.angles.size(); ++n) {
    const Eigen::Vector2d p = cfg.position(static_cast<int>(n));
    images_.push_back(map_.map({p.x(), p.y()}));
  }
  for (size_t i = 0; i < images_.size(); ++i) {
    for (size_t j = i + 1; j < images_.size(); ++j) {
      if (std::abs(images_[i] - images_[j]) < 1e-12) {
        throw Error(ErrorCode::kValidationError, "conformal map collapses two electrodes");
      }
    }
  }
  // Probe the derivative across the disk and at the electrodes.
  for (int ir = 0; ir <= 4; ++ir) {
    for (int ia = 0; ia < 16; ++ia) {
      const double r = 0.99 * ir / 4.0;
      const double t = 2.0 * kPi * ia / 16.0;
      if (std::abs(map_.derivative(std::polar(r, t))) < 1e-12) {
        throw Error(ErrorCode::kMapDegenerate, "|Phi'| < 1e-12 at a probe point");
      }
    }
  }
}

std::complex<double> TransportedPotentials::map_checked(const Eigen::Vector2d& x) const {
  return map_.map({x.x(), x.y()});
}

double TransportedPotentials::value(int n, const Eigen::Vector2d& x) const {
  // keep the arithmetic identical to u0_value so that the identity map
  // reproduces it exactly
  const std::complex<double> w = map_checked(x);
  const Eigen::Vector2d wv(w.real(), w.imag());
  const Eigen::Vector2d dn = wv - Eigen::Vector2d(images_[n].real(), images_[n].imag());
  const Eigen::Vector2d d0 = wv - Eigen::Vector2d(images_[0].real(), images_[0].imag());
  const double rn = dn.norm(), r0 = d0.norm();
  if (rn < kElectrodeTol || r0 < kElectrodeTol) {
    throw Error(ErrorCode::kEvalAtElectrode, "image point within 1e-14 of an electrode image");
  }
  return -(std::log(rn) - std::log(r0)) / kPi;
}

Eigen::Vector2d TransportedPotentials::gradient(int n, const Eigen::Vector2d& x) const {
  const std::complex<double> w = map_checked(x);
  const Eigen::Vector2d wv(w.real(), w.imag());
  const Eigen::Vector2d dn = wv - Eigen::Vector2d(images_[n].real(), images_[n].imag());
  const Eigen::Vector2d d0 = wv - Eigen::Vector2d(images_[0].real(), images_[0].imag());
  const double rn2 = dn.squaredNorm(), r02 = d0.squaredNorm();
  if (rn2 < kElectrodeTol * kElectrodeTol || r02 < kElectrodeTol * kElectrodeTol) {
    throw Error(ErrorCode::kEvalAtElectrode, "image point within 1e-14 of an electrode image");
  }
  const Eigen::Vector2d ghat = -(dn / rn2 - d0 / r02) / kPi;
  const std::complex<double> dphi = map_.derivative({x.x(), x.y()});
  if (std::abs(dphi) < 1e-12) {
    throw Error(ErrorCode::kMapDegenerate, "|Phi'| < 1e-12 at evaluation point");
  }
  Eigen::Matrix2d jac;
  jac << dphi.real(), -dphi.imag(), dphi.imag(), dphi.real();
  return jac.transpose() * ghat;
}

TransportedPotentials transport_potentials(ConformalMap map, const ElectrodeConfig& cfg) {
  return TransportedPotentials(std::move(map), cfg);
}

}  // namespace pemcloak
