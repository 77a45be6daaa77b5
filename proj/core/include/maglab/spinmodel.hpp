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

#pragma once

#include "maglab/common.hpp"

#include <Eigen/Geometry>

namespace maglab::spin {

/// Bohr magneton over Planck constant, Hz per tesla.
inline constexpr double kMuBOverH = 13.996e9;

/// Anisotropic g-tensor: principal values plus the rotation that carries the
/// principal frame into the lab frame. Principal axis 0 is the out-of-plane
/// (growth) direction by convention.
struct GTensor {
  Eigen::Vector3d principal{1.0, 1.0, 1.0};
  Eigen::Matrix3d orientation = Eigen::Matrix3d::Identity();

  static GTensor isotropic(double g) { return {Eigen::Vector3d::Constant(g), Eigen::Matrix3d::Identity()}; }

  /// Lab-frame tensor R diag(g) R^T.
  Eigen::Matrix3d matrix() const;
  /// Lab-frame direction of principal axis i.
  Eigen::Vector3d axis(int i) const { return orientation.col(i); }
  void validate() const;
};

/// Growth axis tilted away from lab x towards lab z by `misalignment_deg`
/// (rotation about lab y). A positive angle gives fields along +z a negative
/// out-of-plane component.
Eigen::Matrix3d misaligned_frame(double misalignment_deg);

/// Angle in degrees between a g-tensor's out-of-plane principal axis and lab x.
double misalignment_deg(const GTensor& g);

/// Ratio T2H / T2*. Either constant, or linear in |theta| between the
/// sweet-spot value at 0 deg and a reference angle, clamped beyond it.
struct EchoGain {
  double at_zero = 88.77 / 13.41;
  bool angle_dependent = false;
  double at_reference = 4.23 / 1.70;
  double reference_deg = 2.5;

  double operator()(double theta_deg) const;
};

struct QubitModel {
  GTensor g;
  /// Heterostructure growth direction in the lab frame.
  Eigen::Vector3d plane_normal{1.0, 0.0, 0.0};
  /// RMS quasi-static Larmor fluctuation for fully out-of-plane / in-plane fields, Hz.
  double sigma_perp_hz = 3.0e6;
  double sigma_par_hz = 16.8e3;
  EchoGain echo_gain;
  /// Drive efficiency f_Rabi / (f_L A) at zero angle and its Gaussian width in degrees.
  double eta0 = 1e-2;
  double eta_width_deg = 5.0;
  /// Readout visibility at 90 deg and its linear loss towards in-plane fields.
  double vis0 = 0.9;
  double vis_slope = 0.0;
  double baseline = 0.05;

  void validate() const;
};

struct LarmorPoint {
  double f_l_hz = 0.0;
  double theta_deg = 0.0;
  double b_mag_t = 0.0;
};

struct CoherenceTimes {
  double t2_star_s;
  double t2_hahn_s;
};

struct Visibility {
  double amplitude;
  double baseline;
};

double larmor_frequency(const GTensor& g, const FieldVector& b);

/// Signed angle of `b` out of the plane normal to `plane_normal`, degrees.
/// Throws DomainError for a zero field.
double out_of_plane_angle(const FieldVector& b, const Eigen::Vector3d& plane_normal);

LarmorPoint larmor_point(const QubitModel& model, const FieldVector& b);

/// Effective quasi-static detuning spread at angle theta, Hz.
double dephasing_sigma(const QubitModel& model, double theta_deg);

CoherenceTimes coherence_times(const QubitModel& model, double theta_deg);

/// Drive efficiency eta(theta) = eta0 exp(-theta^2 / (2 width^2)).
double drive_efficiency(const QubitModel& model, double theta_deg);

double rabi_frequency(const QubitModel& model, double f_l_hz, double amplitude, double theta_deg);

Visibility readout_visibility(const QubitModel& model, double theta_deg);

/// sigma_perp that makes T2*(theta) equal `t2_star_s`, given sigma_par.
double solve_sigma_perp(double sigma_par_hz, double theta_deg, double t2_star_s);

/// sigma for a Gaussian free-induction decay with 1/e time `t2_star_s`.
double sigma_from_t2star(double t2_star_s);

}  // namespace maglab::spin
