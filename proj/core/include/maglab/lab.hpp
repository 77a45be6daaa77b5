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

#include "maglab/experiments.hpp"
#include "maglab/rb.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace maglab::virtlab {

/// Receives every record a Lab produces (run log, streaming, ...).
using RunObserver = std::function<void(RunRecord&)>;

/// A World plus the bookkeeping that turns it into a reproducible lab:
/// seeds derived from a master seed and a run counter, hysteresis-aware
/// approach moves, and an observer for persisting records.
class Lab {
 public:
  Lab(World world, std::uint64_t master_seed, std::string tag = "lab")
      : world_(std::move(world)), master_seed_(master_seed), tag_(std::move(tag)) {}

  World& world() { return world_; }
  const World& world() const { return world_; }

  void set_observer(RunObserver obs) { observer_ = std::move(obs); }
  void set_scenario(std::string s) { scenario_ = std::move(s); }
  void set_compensation(bool on) { compensate_ = on; }
  bool compensation() const { return compensate_; }

  const stage::StageState& move_to(const StagePosition& target);
  /// Overshoot past `target` on `axis` against `direction`, then move onto it,
  /// so the final move always travels in `direction`.
  const stage::StageState& approach(const StagePosition& target, Axis axis, int direction, double overshoot_mm = 2.0);
  void set_solenoid(double tesla);

  std::uint64_t next_seed();

  RunRecord spectroscopy(const SpectroscopySweep& sweep, const PointSink& sink = {});
  RunRecord rabi(const std::vector<double>& durations_s, double amplitude, long shots, const PointSink& sink = {});
  RunRecord ramsey(const std::vector<double>& t_wait_s, double detuning_hz, long shots, const PointSink& sink = {});
  RunRecord hahn(const std::vector<double>& t_wait_s, long shots, const PointSink& sink = {});
  /// RB at the current position; counts summed over randomizations per length.
  RunRecord rb(const RbExperiment& exp, RbData* data = nullptr);

  long probes() const { return probes_; }

 private:
  RunRecord emit(RunRecord r);

  World world_;
  std::uint64_t master_seed_;
  std::string tag_;
  std::uint64_t counter_ = 0;
  long probes_ = 0;
  bool compensate_ = true;
  std::string scenario_;
  RunObserver observer_;
};

}  // namespace maglab::virtlab
