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

#include "maglab/config.hpp"
#include "maglab/experiments.hpp"
#include "maglab/fitting.hpp"

#include <benchmark/benchmark.h>

using namespace maglab;

namespace {

virtlab::World world() {
  LabConfig cfg;
  auto w = cfg.make_world();
  w.solenoid.setpoint_t = 0.025;
  return w;
}

}  // namespace

static void BM_FitResonance(benchmark::State& state) {
  auto sweep = virtlab::SpectroscopySweep::linear(40e6, 160e6, 0.05e6);
  sweep.drive_decay_s = 0.4e-6;
  const auto rec = virtlab::run_spectroscopy(world(), sweep, 9);
  for (auto _ : state) benchmark::DoNotOptimize(virtlab::fit_resonance(rec));
}
BENCHMARK(BM_FitResonance)->Unit(benchmark::kMicrosecond);

static void BM_FitRamsey(benchmark::State& state) {
  const auto rec = virtlab::run_ramsey(world(), virtlab::linspace(0.0, 40e-6, 201), 0.25e6, 500, 9);
  for (auto _ : state) benchmark::DoNotOptimize(virtlab::fit_decay(rec, virtlab::DecayModel::Ramsey));
}
BENCHMARK(BM_FitRamsey)->Unit(benchmark::kMicrosecond);

static void BM_FitHahn(benchmark::State& state) {
  const auto rec = virtlab::run_hahn_echo(world(), virtlab::linspace(0.0, 350e-6, 71), 500, 9);
  for (auto _ : state) benchmark::DoNotOptimize(virtlab::fit_decay(rec, virtlab::DecayModel::Hahn));
}
BENCHMARK(BM_FitHahn)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
