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

#include <filesystem>
#include <utility>
#include <vector>

namespace maglab::magnetics {

/// Maps a stage reading onto the lab position of the magnet centre:
/// centre = rotation * stage + offset.
///
/// The stage reports the centre of the magnet's sample-facing face, so the
/// default offset drops the reading by half the thickness. Fridge-specific
/// geometry (a mounting bracket, a tilted gantry) goes in here.
struct StageTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d offset_mm = Eigen::Vector3d::Zero();
};

/// A uniformly magnetized rectangular block.
struct MagnetSpec {
  /// Edge lengths (length, width, thickness) in mm along the magnet frame axes.
  Eigen::Vector3d dims_mm{110.6, 89.0, 19.5};
  /// Remanence in tesla.
  double remanence_t = 1.35;
  /// Unit magnetization direction in the magnet frame.
  Eigen::Vector3d magnetization_axis{0.0, 0.0, 1.0};
  /// Stage reading of the magnet.
  StagePosition position{0.0, 0.0, -200.0};
  /// Rotation of the magnet frame into the lab frame.
  Eigen::Matrix3d orientation = Eigen::Matrix3d::Identity();
  /// Stage reading to lab centre mapping; see StageTransform.
  StageTransform transform{Eigen::Matrix3d::Identity(), Eigen::Vector3d{0.0, 0.0, -19.5 / 2.0}};
  /// Scalar attenuation of the external field at the sample (1 = no screening).
  double screening = 1.0;

  void validate() const;
  Eigen::Vector3d centre_mm() const;
  MagnetSpec at(const StagePosition& p) const {
    MagnetSpec s = *this;
    s.position = p;
    return s;
  }
};

/// Uniaxial superconducting solenoid, idealized as a uniform field at the sample.
struct SolenoidSpec {
  Eigen::Vector3d axis{0.0, 0.0, 1.0};
  double setpoint_t = 0.0;

  static constexpr double kMaxSetpoint = 3.0;
  void validate() const;
};

/// Analytic field of a uniformly magnetized cuboid evaluated at `point`
/// (lab frame, mm). Uses the surface-charge solution summed over the two
/// faces normal to each magnetization component.
///
/// Throws DomainError if `point` lies inside or on the magnet.
FieldVector cuboid_field(const MagnetSpec& spec, const StagePosition& point);

FieldVector solenoid_field(const SolenoidSpec& spec);

/// Superposition of the solenoid and the (screened) block magnet at the sample.
FieldVector total_field(const SolenoidSpec& solenoid, const MagnetSpec& magnet,
                        const StagePosition& sample_point = {});

struct ProfilePoint {
  double z_mm;
  double b_tesla;
};

struct RemanenceFit {
  MagnetSpec spec;
  double residual_rms_t = 0.0;
};

/// Least-squares fit of the remanence to a |B|(z) profile. Profile points are
/// stage z readings with the magnet at x = y = 0, field measured at the sample.
/// A single point is treated as an exact anchor.
RemanenceFit calibrate_remanence(const std::vector<ProfilePoint>& profile, const MagnetSpec& base = {});

std::vector<ProfilePoint> read_profile_csv(const std::filesystem::path& path);
void write_profile_csv(const std::filesystem::path& path, const std::vector<ProfilePoint>& profile);

/// |B| at the sample for a magnet at stage reading (0, 0, z).
double axial_profile(const MagnetSpec& spec, double z_mm);

}  // namespace maglab::magnetics
