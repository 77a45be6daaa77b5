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

#include "maglab/stage.hpp"

#include <cmath>
#include <sstream>

namespace maglab::stage {

bool TravelLimits::contains(const StagePosition& p) const {
  if (!p.finite()) return false;
  for (int i = 0; i < 3; ++i)
    if (p[i] < min_mm[i] || p[i] > max_mm[i]) return false;
  return true;
}

void TravelLimits::check(const StagePosition& p, const char* what) const {
  if (contains(p)) return;
  std::ostringstream os;
  os << what << " (" << p.x << ", " << p.y << ", " << p.z << ") mm is outside travel limits [" << min_mm.x() << ", "
     << max_mm.x() << "] x [" << min_mm.y() << ", " << max_mm.y() << "] x [" << min_mm.z() << ", " << max_mm.z()
     << "]";
  throw MotionError(os.str());
}

StageState StageState::at(const StagePosition& p, BacklashModel model, TravelLimits limits) {
  limits.check(p, "initial position");
  StageState s;
  s.commanded = p;
  s.true_pos = p;
  s.model = model;
  s.limits = limits;
  return s;
}

StageState command_move(const StageState& state, const StagePosition& target) {
  state.limits.check(target);
  if (target == state.commanded) return state;

  StageState next = state;
  bool moved = false;
  for (int i = 0; i < 3; ++i) {
    const double delta = target[i] - state.commanded[i];
    if (delta == 0.0) continue;
    moved = true;
    const double dir = delta > 0.0 ? 1.0 : -1.0;
    next.backlash_accum[i] -= dir * (state.model.eps_per_event_mm[i] + state.model.eps_per_mm[i] * std::abs(delta));
  }
  if (moved) ++next.event_count;
  next.commanded = target;
  next.true_pos = StagePosition::from(target.vec() + next.backlash_accum);
  return next;
}

StagePosition compensate(const StagePosition& target, const StageState& state) {
  StagePosition cmd = state.commanded;
  for (int i = 0; i < 3; ++i) {
    const double eps = state.model.eps_per_event_mm[i];
    const double k = state.model.eps_per_mm[i];
    if (k >= 1.0) throw MotionError("per-mm backlash term must be below 1 for compensation");
    const double cur = state.commanded[i];
    const double need = target[i] - state.backlash_accum[i];
    if (need == cur) {
      cmd[i] = cur;
      continue;
    }
    const double preferred = need > cur ? 1.0 : -1.0;
    double chosen = cur;
    for (double s : {preferred, -preferred}) {
      const double c = (need + s * eps - k * cur) / (1.0 - k);
      if ((c - cur) * s > 0.0) {
        chosen = c;
        break;
      }
    }
    cmd[i] = chosen;
  }
  state.limits.check(cmd, "compensated command");
  return cmd;
}

SweepPlan plan_sweep(Axis axis, double start, double stop, int n_points, SweepMode mode, double overshoot_mm) {
  if (n_points < 2) throw ValidationError("a sweep needs at least two points");
  if (!std::isfinite(start) || !std::isfinite(stop) || start == stop)
    throw ValidationError("sweep range must be finite and non-empty");
  if (overshoot_mm < 0.0) throw ValidationError("overshoot must be non-negative");
  SweepPlan plan;
  plan.axis = axis;
  plan.mode = mode;
  plan.waypoints.resize(static_cast<std::size_t>(n_points));
  const double step = (stop - start) / (n_points - 1);
  for (int i = 0; i < n_points; ++i) plan.waypoints[static_cast<std::size_t>(i)] = start + step * i;
  plan.waypoints.back() = stop;
  if (mode == SweepMode::Unidirectional) {
    plan.approach_direction = stop > start ? 1 : -1;
    plan.pre_move = start - plan.approach_direction * overshoot_mm;
  }
  return plan;
}

StagePosition with_axis(StagePosition base, Axis axis, double value) {
  base[axis_index(axis)] = value;
  return base;
}

const StageState& Stage::move(const StagePosition& target, bool compensated) {
  const StagePosition cmd = compensated ? compensate(target, state_) : target;
  state_ = command_move(state_, cmd);
  return state_;
}

}  // namespace maglab::stage
