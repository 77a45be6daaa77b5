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

#include "maglab/lab.hpp"

namespace maglab::virtlab {

const stage::StageState& Lab::move_to(const StagePosition& target) { return world_.stage.move(target, compensate_); }

const stage::StageState& Lab::approach(const StagePosition& target, Axis axis, int direction, double overshoot_mm) {
  const int i = axis_index(axis);
  const double cur = world_.stage.state().commanded[i];
  // Already coming from the right side with a plain move: no overshoot needed.
  if ((target[i] - cur) * direction > 0.0) return move_to(target);
  StagePosition pre = target;
  pre[i] = target[i] - direction * overshoot_mm;
  move_to(pre);
  return move_to(target);
}

void Lab::set_solenoid(double tesla) {
  magnetics::SolenoidSpec s = world_.solenoid;
  s.setpoint_t = tesla;
  s.validate();
  world_.solenoid = s;
}

std::uint64_t Lab::next_seed() { return derive_seed(master_seed_, tag_, counter_++); }

RunRecord Lab::emit(RunRecord r) {
  ++probes_;
  r.scenario = scenario_;
  if (observer_) observer_(r);
  return r;
}

RunRecord Lab::spectroscopy(const SpectroscopySweep& sweep, const PointSink& sink) {
  return emit(run_spectroscopy(world_, sweep, next_seed(), sink));
}

RunRecord Lab::rabi(const std::vector<double>& durations_s, double amplitude, long shots, const PointSink& sink) {
  return emit(run_rabi(world_, durations_s, amplitude, shots, next_seed(), sink));
}

RunRecord Lab::ramsey(const std::vector<double>& t_wait_s, double detuning_hz, long shots, const PointSink& sink) {
  return emit(run_ramsey(world_, t_wait_s, detuning_hz, shots, next_seed(), 2.0, sink));
}

RunRecord Lab::hahn(const std::vector<double>& t_wait_s, long shots, const PointSink& sink) {
  return emit(run_hahn_echo(world_, t_wait_s, shots, next_seed(), 1.5, sink));
}

RunRecord Lab::rb(const RbExperiment& exp, RbData* data) {
  const std::uint64_t seed = next_seed();
  RbData d = run_rb(exp, seed);
  RunRecord r;
  r.kind = RunKind::RB;
  r.commanded = world_.stage.state().commanded;
  r.true_pos = world_.stage.state().true_pos;
  r.shots = exp.shots * exp.randomizations;
  r.seed = seed;
  r.timestamp = iso8601_utc_now();
  for (std::size_t i = 0; i < d.lengths.size(); ++i) {
    long total = 0;
    for (long c : d.counts[i]) total += c;
    r.sweep.push_back(d.lengths[i]);
    r.counts.push_back(total);
  }
  r.params = {{"randomizations", exp.randomizations},
              {"shots_per_sequence", exp.shots},
              {"p_dep", exp.p_dep},
              {"visibility", exp.visibility},
              {"baseline", exp.baseline}};
  if (data) *data = std::move(d);
  return emit(std::move(r));
}

}  // namespace maglab::virtlab
