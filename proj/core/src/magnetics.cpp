// Copyright 2026 The maglab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "maglab/magnetics.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace maglab::magnetics {
namespace {

// ln(v + sqrt(u^2 + v^2 + w^2)) without cancellation for v << 0.
double log_v_plus_r(double u, double v, double w) {
  const double r = std::sqrt(u * u + v * v + w * w);
  if (v >= 0.0) return std::log(v + r);
  const double perp2 = u * u + w * w;
  return std::log(perp2) - std::log(r - v);
}

// Field per unit remanence of a block with half edges (a, b, c) magnetized
// along its local z axis, at local point p. Surface charge +1 on z = +c and
// -1 on z = -c.
Eigen::Vector3d z_magnetized_block(double a, double b, double c, const Eigen::Vector3d& p) {
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  const std::array<double, 2> face_z{c, -c};
  const std::array<double, 2> face_sign{1.0, -1.0};
  const std::array<double, 2> us{p.x() + a, p.x() - a};
  const std::array<double, 2> vs{p.y() + b, p.y() - b};
  const std::array<double, 2> lim_sign{1.0, -1.0};

  for (int f = 0; f < 2; ++f) {
    const double w = p.z() - face_z[f];
    Eigen::Vector3d face = Eigen::Vector3d::Zero();
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        const double u = us[i];
        const double v = vs[j];
        const double s = lim_sign[i] * lim_sign[j];
        const double r = std::sqrt(u * u + v * v + w * w);
        face.x() += s * -log_v_plus_r(u, v, w);
        face.y() += s * -log_v_plus_r(v, u, w);
        // In the plane of the face (outside it) the normal component vanishes.
        if (w != 0.0) face.z() += s * std::atan(u * v / (w * r));
      }
    }
    acc += face_sign[f] * face;
  }
  return acc / (4.0 * kPi);
}

}  // namespace

void MagnetSpec::validate() const {
  if (!(dims_mm.array() > 0.0).all() || !dims_mm.allFinite())
    throw ValidationError("magnet dimensions must be positive");
  if (!(remanence_t >= 0.0) || !std::isfinite(remanence_t))
    throw ValidationError("magnet remanence must be finite and non-negative");
  if (std::abs(magnetization_axis.norm() - 1.0) > 1e-12)
    throw ValidationError("magnetization axis must be a unit vector");
  if (std::abs(orientation.determinant() - 1.0) > 1e-9 ||
      !(orientation.transpose() * orientation).isApprox(Eigen::Matrix3d::Identity(), 1e-9))
    throw ValidationError("magnet orientation must be a proper rotation");
  if (!position.finite()) throw ValidationError("magnet position must be finite");
  if (!(screening >= 0.0 && screening <= 1.0)) throw ValidationError("screening factor must lie in [0, 1]");
}

Eigen::Vector3d MagnetSpec::centre_mm() const { return transform.rotation * position.vec() + transform.offset_mm; }

void SolenoidSpec::validate() const {
  if (std::abs(axis.norm() - 1.0) > 1e-12) throw ValidationError("solenoid axis must be a unit vector");
  if (!std::isfinite(setpoint_t) || std::abs(setpoint_t) > kMaxSetpoint) {
    std::ostringstream os;
    os << "solenoid setpoint " << setpoint_t << " T exceeds the " << kMaxSetpoint << " T limit";
    throw ValidationError(os.str());
  }
}

FieldVector cuboid_field(const MagnetSpec& spec, const StagePosition& point) {
  const Eigen::Vector3d half = spec.dims_mm / 2.0;
  const Eigen::Vector3d local = spec.orientation.transpose() * (point.vec() - spec.centre_mm());
  if (std::abs(local.x()) <= half.x() && std::abs(local.y()) <= half.y() && std::abs(local.z()) <= half.z())
    throw DomainError("field evaluation point lies inside or on the magnet");
  if (spec.remanence_t == 0.0) return {};

  const Eigen::Vector3d& m = spec.magnetization_axis;
  Eigen::Vector3d b = Eigen::Vector3d::Zero();
  if (m.z() != 0.0) b += m.z() * z_magnetized_block(half.x(), half.y(), half.z(), local);
  if (m.x() != 0.0) {
    // Cyclic relabelling (x, y, z) -> (y, z, x) puts the magnetization on local z.
    const Eigen::Vector3d f =
        z_magnetized_block(half.y(), half.z(), half.x(), {local.y(), local.z(), local.x()});
    b += m.x() * Eigen::Vector3d{f.z(), f.x(), f.y()};
  }
  if (m.y() != 0.0) {
    const Eigen::Vector3d f =
        z_magnetized_block(half.z(), half.x(), half.y(), {local.z(), local.x(), local.y()});
    b += m.y() * Eigen::Vector3d{f.y(), f.z(), f.x()};
  }
  const Eigen::Vector3d lab = spec.remanence_t * (spec.orientation * b);
  if (!lab.allFinite()) throw DomainError("field is singular at this point (edge-line extension)");
  return FieldVector::from(lab);
}

FieldVector solenoid_field(const SolenoidSpec& spec) {
  spec.validate();
  return FieldVector::from(spec.setpoint_t * spec.axis);
}

FieldVector total_field(const SolenoidSpec& solenoid, const MagnetSpec& magnet, const StagePosition& sample_point) {
  const FieldVector external = cuboid_field(magnet, sample_point);
  return solenoid_field(solenoid) + magnet.screening * external;
}

double axial_profile(const MagnetSpec& spec, double z_mm) {
  return (spec.screening * cuboid_field(spec.at({0.0, 0.0, z_mm}), {})).magnitude();
}

RemanenceFit calibrate_remanence(const std::vector<ProfilePoint>& profile, const MagnetSpec& base) {
  if (profile.empty()) throw FitError("remanence fit needs at least one profile point");
  if (profile.size() > 1) {
    bool distinct = false;
    for (const auto& p : profile) distinct = distinct || p.z_mm != profile.front().z_mm;
    if (!distinct) throw FitError("degenerate field profile: all points share the same z");
  }
  MagnetSpec unit = base;
  unit.remanence_t = 1.0;
  double kb = 0.0;
  double kk = 0.0;
  std::vector<double> k(profile.size());
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (!std::isfinite(profile[i].z_mm) || !std::isfinite(profile[i].b_tesla))
      throw FitError("non-finite profile point");
    k[i] = axial_profile(unit, profile[i].z_mm);
    kb += k[i] * profile[i].b_tesla;
    kk += k[i] * k[i];
  }
  if (kk == 0.0) throw FitError("profile has no sensitivity to the remanence");

  RemanenceFit out{base, 0.0};
  out.spec.remanence_t = kb / kk;
  double ss = 0.0;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    const double r = out.spec.remanence_t * k[i] - profile[i].b_tesla;
    ss += r * r;
  }
  out.residual_rms_t = std::sqrt(ss / static_cast<double>(profile.size()));
  return out;
}

std::vector<ProfilePoint> read_profile_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open profile " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty profile file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "z_mm,b_tesla") throw ValidationError("profile header must be 'z_mm,b_tesla', got '" + line + "'");
  std::vector<ProfilePoint> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ValidationError("malformed profile row " + std::to_string(lineno));
    try {
      out.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
    } catch (const std::exception&) {
      throw ValidationError("malformed profile row " + std::to_string(lineno));
    }
  }
  return out;
}

void write_profile_csv(const std::filesystem::path& path, const std::vector<ProfilePoint>& profile) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "z_mm,b_tesla\n";
  out << std::setprecision(17);
  for (const auto& p : profile) out << p.z_mm << ',' << p.b_tesla << '\n';
}

}  // namespace maglab::magnetics
