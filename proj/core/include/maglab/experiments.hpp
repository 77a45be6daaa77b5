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

#include "maglab/magnetics.hpp"
#include "maglab/run_record.hpp"
#include "maglab/spinmodel.hpp"
#include "maglab/stage.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace maglab::virtlab {

/// Readout-resonator feature that shows up in every spectroscopy trace at a
/// fixed frequency regardless of the magnet position.
struct ResonatorLine {
  bool enabled = false;
  double frequency_hz = 130e6;
  double hwhm_hz = 1.0e6;
  double amplitude = 0.25;
};

/// Everything a virtual experiment needs. The magnet sits wherever the
/// stage's true position puts it; `magnet.position` is ignored.
struct World {
  magnetics::MagnetSpec magnet;
  magnetics::SolenoidSpec solenoid;
  spin::QubitModel qubit;
  stage::Stage stage{stage::StageState::at({0.0, 0.0, -200.0})};
  ResonatorLine resonator;

  FieldVector field() const;
  spin::LarmorPoint larmor() const;
  /// Field with the magnet at an arbitrary true position (simulation truth).
  FieldVector field_at(const StagePosition& true_pos) const;
};

struct SpectroscopySweep {
  std::vector<double> drive_hz;
  double pulse_duration_s = 2e-6;
  double drive_amplitude = 1.0;
  long shots_per_point = 200;
  /// Damping time of driven oscillations; infinity gives the coherent
  /// detuned-Rabi line.
  double drive_decay_s = std::numeric_limits<double>::infinity();

  void validate() const;
  static SpectroscopySweep linear(double f_start_hz, double f_stop_hz, double step_hz);
};

/// Excitation probability after a rectangular drive of length t_p, detuning
/// delta and Rabi frequency f_r, optionally damped with time constant tau.
double detuned_rabi(double f_r_hz, double delta_hz, double t_p_s, double tau_s);

/// Binomial shot sampling from a probability trace.
std::vector<long> sample_counts(const std::vector<double>& p, long shots, std::mt19937_64& rng);

/// Per-point callback for streaming (index, sweep value, counts).
using PointSink = std::function<void(std::size_t, double, long)>;

RunRecord run_spectroscopy(const World& world, const SpectroscopySweep& sweep, std::uint64_t seed,
                           const PointSink& sink = {});
RunRecord run_rabi(const World& world, const std::vector<double>& durations_s, double amplitude, long shots,
                   std::uint64_t seed, const PointSink& sink = {});
RunRecord run_ramsey(const World& world, const std::vector<double>& t_wait_s, double detuning_hz, long shots,
                     std::uint64_t seed, double exponent = 2.0, const PointSink& sink = {});
RunRecord run_hahn_echo(const World& world, const std::vector<double>& t_wait_s, long shots, std::uint64_t seed,
                        double exponent = 1.5, const PointSink& sink = {});

/// Evenly spaced values including both ends.
std::vector<double> linspace(double a, double b, int n);
/// Log-spaced integers between a and b inclusive, deduplicated.
std::vector<int> logspace_int(int a, int b, int n);

/// Deterministic 64-bit mixing for seed derivation.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0);

}  // namespace maglab::virtlab
