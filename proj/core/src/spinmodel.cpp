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

#include "maglab/spinmodel.hpp"

#include <algorithm>
#include <cmath>

namespace maglab::spin {

Eigen::Matrix3d GTensor::matrix() const { return orientation * principal.asDiagonal() * orientation.transpose(); }

void GTensor::validate() const {
  if (!(principal.array() > 0.0).all() || !principal.allFinite())
    throw ValidationError("g-tensor principal values must be positive");
  if (std::abs(orientation.determinant() - 1.0) > 1e-12 ||
      !(orientation.transpose() * orientation).isApprox(Eigen::Matrix3d::Identity(), 1e-12))
    throw ValidationError("g-tensor orientation must be a proper rotation");
}

Eigen::Matrix3d misaligned_frame(double misalignment_deg) {
  // Rotating +x about +y by +phi gives (cos phi, 0, -sin phi).
  return Eigen::AngleAxisd(deg2rad(misalignment_deg), Eigen::Vector3d::UnitY()).toRotationMatrix();
}

double misalignment_deg(const GTensor& g) {
  const double c = std::clamp(std::abs(g.axis(0).x()), 0.0, 1.0);
  return rad2deg(std::acos(c));
}

double EchoGain::operator()(double theta_deg) const {
  if (!angle_dependent) return at_zero;
  const double t = std::min(std::abs(theta_deg) / reference_deg, 1.0);
  return at_zero + (at_reference - at_zero) * t;
}

void QubitModel::validate() const {
  g.validate();
  if (std::abs(plane_normal.norm() - 1.0) > 1e-9) throw ValidationError("plane normal must be a unit vector");
  if (!(sigma_perp_hz > sigma_par_hz && sigma_par_hz > 0.0))
    throw ValidationError("hyperfine model requires sigma_perp > sigma_par > 0");
  if (!(eta0 > 0.0)) throw ValidationError("eta0 must be positive");
  if (!(eta_width_deg > 0.0)) throw ValidationError("eta_width must be positive");
  if (!(vis0 > 0.0 && vis0 <= 1.0)) throw ValidationError("vis0 must lie in (0, 1]");
  if (!(echo_gain.at_zero > 0.0 && echo_gain.at_reference > 0.0 && echo_gain.reference_deg > 0.0))
    throw ValidationError("echo gain parameters must be positive");
  if (echo_gain.angle_dependent && echo_gain.at_reference > echo_gain.at_zero)
    throw ValidationError("angle-dependent echo gain must not grow away from the sweet spot");
  if (!(baseline >= 0.0 && baseline < 1.0)) throw ValidationError("baseline must lie in [0, 1)");
}

double larmor_frequency(const GTensor& g, const FieldVector& b) { return kMuBOverH * (g.matrix() * b.vec()).norm(); }

double out_of_plane_angle(const FieldVector& b, const Eigen::Vector3d& plane_normal) {
  const double mag = b.magnitude();
  if (mag == 0.0) throw DomainError("out-of-plane angle undefined for zero field");
  const double s = std::clamp(b.vec().dot(plane_normal.normalized()) / mag, -1.0, 1.0);
  return rad2deg(std::asin(s));
}

LarmorPoint larmor_point(const QubitModel& model, const FieldVector& b) {
  LarmorPoint p;
  p.f_l_hz = larmor_frequency(model.g, b);
  p.b_mag_t = b.magnitude();
  p.theta_deg = p.b_mag_t > 0.0 ? out_of_plane_angle(b, model.plane_normal) : 0.0;
  return p;
}

double dephasing_sigma(const QubitModel& model, double theta_deg) {
  const double c = std::cos(deg2rad(theta_deg));
  const double s = std::sin(deg2rad(theta_deg));
  return std::sqrt(model.sigma_par_hz * model.sigma_par_hz * c * c + model.sigma_perp_hz * model.sigma_perp_hz * s * s);
}

double sigma_from_t2star(double t2_star_s) { return std::sqrt(2.0) / (2.0 * kPi * t2_star_s); }

CoherenceTimes coherence_times(const QubitModel& model, double theta_deg) {
  const double t2s = sigma_from_t2star(1.0) / dephasing_sigma(model, theta_deg);
  return {t2s, model.echo_gain(theta_deg) * t2s};
}

double solve_sigma_perp(double sigma_par_hz, double theta_deg, double t2_star_s) {
  const double target = sigma_from_t2star(t2_star_s);
  const double c = std::cos(deg2rad(theta_deg));
  const double s = std::sin(deg2rad(theta_deg));
  const double rest = target * target - sigma_par_hz * sigma_par_hz * c * c;
  if (rest <= 0.0 || s == 0.0) throw CalibrationError("anchor T2* is not reachable with this sigma_par and angle");
  return std::sqrt(rest) / std::abs(s);
}

double drive_efficiency(const QubitModel& model, double theta_deg) {
  const double w = model.eta_width_deg;
  return model.eta0 * std::exp(-theta_deg * theta_deg / (2.0 * w * w));
}

double rabi_frequency(const QubitModel& model, double f_l_hz, double amplitude, double theta_deg) {
  if (amplitude < 0.0) throw ValidationError("drive amplitude must be non-negative");
  return drive_efficiency(model, theta_deg) * f_l_hz * amplitude;
}

Visibility readout_visibility(const QubitModel& model, double theta_deg) {
  const double a = model.vis0 - model.vis_slope * (90.0 - std::abs(theta_deg)) / 90.0;
  return {std::clamp(a, 0.05, 1.0), model.baseline};
}

}  // namespace maglab::spin
