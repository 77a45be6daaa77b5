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

#include "maglab/fitting.hpp"
#include "maglab/lab.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace maglab::calibrate {

/// Frequency window and drive settings for one spectroscopy probe.
struct SpectroscopyPlan {
  double f_start_hz = 40e6;
  double f_stop_hz = 160e6;
  double f_step_hz = 0.05e6;
  double pulse_s = 2e-6;
  double decay_s = 0.4e-6;
  double amplitude = 1.0;
  long shots = 200;

  virtlab::SpectroscopySweep sweep() const;
};

/// Moves nothing; measures f_L at the current position. Empty when no line
/// is detected or the fit did not converge.
std::optional<double> measure_larmor(virtlab::Lab& lab, const SpectroscopyPlan& plan,
                                     const virtlab::ResonanceOptions& opts = {}, virtlab::ResonanceFit* fit = nullptr);

/// Vertex of the least-squares parabola through (x, y); empty unless the
/// parabola opens upwards. With six or more points, points further than five
/// robust standard deviations from the first fit are dropped and the fit redone.
std::optional<double> parabola_vertex(const std::vector<double>& x, const std::vector<double>& y);

struct Probe {
  double position_mm;
  std::optional<double> f_l_hz;
};

struct SweetSpotOptions {
  Axis axis = Axis::X;
  double lo_mm = -120.0;
  double hi_mm = 0.0;
  int budget = 60;
  int coarse_points = 11;
  double tol_mm = 0.5;
  /// Every probe is reached by a final move in this direction.
  int approach_direction = -1;
  SpectroscopyPlan spectroscopy;
  virtlab::ResonanceOptions resonance;
};

struct SweetSpotResult {
  double x_star_mm = 0.0;
  double f_l_min_hz = 0.0;
  /// Simulation-truth diagnostic: out-of-plane angle of the field at the
  /// true stage position after moving to x_star. Not used by the search.
  double residual_angle_deg = 0.0;
  int iterations = 0;
  std::vector<Probe> probes;
  /// Best f_L seen after each probe.
  std::vector<double> best_so_far_hz;
  double bracket_lo_mm = 0.0;
  double bracket_hi_mm = 0.0;
};

using ProbeCallback = std::function<void(const Probe&, double bracket_lo, double bracket_hi)>;

/// Coarse scan, golden-section refinement on fitted f_L, then the vertex of a
/// parabola through f_L^2 over the probes in the final bracket. Leaves the
/// stage at x_star. Throws BracketError when the coarse minimum sits on the
/// range edge and CalibrationError when more than 30% of probes fail.
SweetSpotResult find_sweet_spot(virtlab::Lab& lab, const SweetSpotOptions& opts, const ProbeCallback& progress = {});

// --- g-tensor ----------------------------------------------------------------

struct MapPoint {
  StagePosition position;
  double f_l_hz;
};

struct FieldModel {
  magnetics::MagnetSpec magnet;
  magnetics::SolenoidSpec solenoid;

  FieldVector at(const StagePosition& p) const { return magnetics::total_field(solenoid, magnet.at(p)); }
};

struct GTensorFitOptions {
  int orientation_seeds = 8;
  std::uint64_t seed = 7;
  /// Orientation held fixed when the map cannot determine it.
  Eigen::Matrix3d fallback_orientation = Eigen::Matrix3d::Identity();
};

struct GTensorFit {
  spin::GTensor g;
  double misalignment_deg = 0.0;
  Eigen::Vector3d principal_sigma = Eigen::Vector3d::Zero();
  double misalignment_sigma_deg = 0.0;
  /// Sum of squared relative residuals at the solution.
  double objective = 0.0;
  /// Objective reached from each start.
  std::vector<double> seed_objectives;
  bool underdetermined = false;
  std::string note;
};

/// Least squares over principal values and orientation of
/// sum ((f_model - f_data) / f_data)^2. Principal axes are returned ordered
/// by their alignment with lab x, y, z so axis 0 is the out-of-plane axis.
GTensorFit fit_gtensor(const std::vector<MapPoint>& map, const FieldModel& model, const GTensorFitOptions& opts = {});

/// Reorders and re-signs principal axes: axis i is the one closest to lab
/// axis i, each with a non-negative component along it where possible, det +1.
spin::GTensor canonical(const spin::GTensor& g);

}  // namespace maglab::calibrate
