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

#include "maglab/calibrate.hpp"
#include "maglab/config.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace maglab::calibrate {

/// One acceptance check evaluated against a scenario metric.
///   near_rel: |v - target| <= tol * |target|
///   near_abs: |v - target| <= tol
///   le / ge / eq: comparisons against target (eq within tol)
struct Check {
  std::string metric;
  std::string op;
  double target = 0.0;
  double tol = 0.0;

  bool evaluate(double value) const;
  std::string describe() const;
};

struct TimePlan {
  double t_max_s = 40e-6;
  int points = 201;
  long shots = 500;
  double detuning_hz = 0.25e6;
  double amplitude = 1.0;
};

struct RbPlan {
  std::vector<int> lengths{1, 2, 4, 8, 16, 32, 64, 128};
  int randomizations = 20;
  long shots = 1000;
  double f_native = 0.99980;
  bool fixed_asymptote = false;
};

/// A named, fully specified replay of one experiment family.
///
/// kinds: field_profile, line, map, circle, sweet_spot, coherence_sweep,
/// coherence_point, hysteresis, drive_efficiency, rb
struct ScenarioDef {
  std::string name;
  std::string kind = "line";
  std::string description;
  std::string qubit = "Q8";
  double solenoid_t = 0.025;
  StagePosition base{0.0, 0.0, -200.0};
  bool compensate = true;

  Axis axis = Axis::X;
  double start_mm = 0.0;
  double stop_mm = -250.0;
  int points = 26;
  Axis axis2 = Axis::Z;
  double start2_mm = -160.0;
  double stop2_mm = -300.0;
  int points2 = 15;

  double radius_mm = 5.0;
  int circle_points = 37;

  double range_lo_mm = -120.0;
  double range_hi_mm = 0.0;
  int budget = 60;
  double half_width_mm = 15.0;

  int repeats = 1;

  SpectroscopyPlan spectroscopy;
  TimePlan ramsey{40e-6, 201, 500, 0.25e6, 1.0};
  TimePlan hahn{350e-6, 71, 500, 0.0, 1.0};
  TimePlan rabi{5e-6, 101, 200, 0.0, 1.0};
  RbPlan rb;

  std::vector<double> profile_z_mm{-160, -180, -200, -250, -300, -400, -500, -700};
  std::string profile_csv;

  std::vector<Check> checks;

  void validate() const;
};

nlohmann::json to_json(const ScenarioDef& s);
/// Fields missing from `j` keep the values of `base`.
ScenarioDef scenario_from_json(const nlohmann::json& j, ScenarioDef base = {});

/// Built-in scenario definitions keyed by name.
const std::map<std::string, nlohmann::json>& builtin_scenarios();
/// Built-ins plus config additions; config entries patch built-ins by name.
std::vector<std::string> scenario_names(const LabConfig& config);
ScenarioDef find_scenario(const LabConfig& config, const std::string& name);
/// Every scenario in the config parses and references a configured qubit.
void validate_scenarios(const LabConfig& config);

struct CheckOutcome {
  Check check;
  double value;
  bool passed;
};

struct ScenarioResult {
  std::string name;
  std::uint64_t seed = 0;
  bool partial = false;
  bool passed = false;
  std::map<std::string, double> metrics;
  std::vector<CheckOutcome> outcomes;
  std::vector<std::string> errors;
  std::string map_csv;
  std::string fits_csv;
  std::string verdict;
  std::filesystem::path bundle_dir;
};

struct ScenarioRunOptions {
  /// Bundles go to <out_root>/<scenario>/<timestamp>/. Defaults to the
  /// config's data directory.
  std::optional<std::filesystem::path> out_root;
  std::optional<std::uint64_t> seed;
  virtlab::RunObserver observer;
  /// Directory name for the bundle; defaults to the current UTC time.
  std::string timestamp;
  bool write_bundle = true;
};

ScenarioResult run_scenario(const LabConfig& config, const std::string& name, const ScenarioRunOptions& opts = {});
ScenarioResult run_scenario(const LabConfig& config, const ScenarioDef& def, const ScenarioRunOptions& opts = {});

/// Interior turning points of a sequence, ignoring reversals smaller than
/// `threshold`. Returns {minima, maxima}.
std::pair<int, int> count_turning_points(const std::vector<double>& v, double threshold);

/// Shift d minimising sum (b(x) - a(x + d))^2 with a linearly interpolated,
/// searched over [-max_shift, max_shift].
double estimate_shift(const std::vector<double>& x, const std::vector<double>& a, const std::vector<double>& b,
                      double max_shift);

}  // namespace maglab::calibrate
