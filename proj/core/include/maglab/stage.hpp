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

#include <optional>
#include <vector>

namespace maglab::stage {

struct TravelLimits {
  Eigen::Vector3d min_mm{-300.0, -300.0, -800.0};
  Eigen::Vector3d max_mm{300.0, 300.0, -100.0};

  bool contains(const StagePosition& p) const;
  void check(const StagePosition& p, const char* what = "target") const;
};

/// Start-stop backlash model of the gantry.
///
/// Every move that starts and stops an axis shifts that axis's accumulated
/// error by eps against the direction of travel; an optional per-mm term
/// (default 0) adds error proportional to the distance travelled. The
/// magnet ends up at commanded + accumulated error.
struct BacklashModel {
  Eigen::Vector3d eps_per_event_mm = Eigen::Vector3d::Constant(0.050);
  Eigen::Vector3d eps_per_mm = Eigen::Vector3d::Zero();
};

struct StageState {
  StagePosition commanded;
  StagePosition true_pos;
  Eigen::Vector3d backlash_accum = Eigen::Vector3d::Zero();
  long event_count = 0;
  BacklashModel model;
  TravelLimits limits;

  static StageState at(const StagePosition& p, BacklashModel model = {}, TravelLimits limits = {});
};

/// Applies one commanded move. A zero-length move is a no-op.
StageState command_move(const StageState& state, const StagePosition& target);

/// Command that lands the true position on `target` given the backlash model.
StagePosition compensate(const StagePosition& target, const StageState& state);

enum class SweepMode { Unidirectional, Bidirectional };

struct SweepPlan {
  Axis axis = Axis::X;
  std::vector<double> waypoints;
  /// +1 / -1: direction every waypoint is approached from (travel direction).
  int approach_direction = 0;
  SweepMode mode = SweepMode::Unidirectional;
  /// Pre-move coordinate on `axis` before the first waypoint, unidirectional only.
  std::optional<double> pre_move;
  double settle_s = 0.0;
};

/// Evenly spaced sweep. In unidirectional mode the plan starts with an
/// overshoot beyond `start` so that the first waypoint is approached in the
/// same direction as every later one.
SweepPlan plan_sweep(Axis axis, double start, double stop, int n_points, SweepMode mode, double overshoot_mm = 2.0);

/// Move on a single axis from `base` as used when executing a plan.
StagePosition with_axis(StagePosition base, Axis axis, double value);

/// Owns a StageState and serializes moves through it. Not thread-safe; the
/// service funnels all mutations through one executor.
class Stage {
 public:
  explicit Stage(StageState s) : state_(std::move(s)) {}

  const StageState& state() const { return state_; }
  /// Moves towards `target`; with compensation the command is corrected so
  /// the true position lands on target.
  const StageState& move(const StagePosition& target, bool compensated);
  void reset(const StageState& s) { state_ = s; }

 private:
  StageState state_;
};

}  // namespace maglab::stage
