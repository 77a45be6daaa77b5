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
#include "maglab/rb.hpp"

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

static void BM_Spectroscopy(benchmark::State& state) {
  const auto w = world();
  auto sweep = virtlab::SpectroscopySweep::linear(40e6, 160e6, 120e6 / static_cast<double>(state.range(0)));
  sweep.drive_decay_s = 0.4e-6;
  std::uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(virtlab::run_spectroscopy(w, sweep, seed++));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(sweep.drive_hz.size()));
}
BENCHMARK(BM_Spectroscopy)->Arg(500)->Arg(2400)->Unit(benchmark::kMicrosecond);

static void BM_Ramsey(benchmark::State& state) {
  const auto w = world();
  const auto t = virtlab::linspace(0.0, 40e-6, 201);
  std::uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(virtlab::run_ramsey(w, t, 0.25e6, 500, seed++));
}
BENCHMARK(BM_Ramsey)->Unit(benchmark::kMicrosecond);

static void BM_RbSimulate(benchmark::State& state) {
  const auto seq = virtlab::rb_generate(3, static_cast<int>(state.range(0)));
  const double p = virtlab::depolarizing_from_fidelity(0.9998);
  std::mt19937_64 rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(virtlab::rb_simulate(seq, p, 1000, 1.0, rng));
}
BENCHMARK(BM_RbSimulate)->Arg(16)->Arg(128)->Unit(benchmark::kMicrosecond);

static void BM_RbGenerate(benchmark::State& state) {
  std::uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(virtlab::rb_generate(seed++, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_RbGenerate)->Arg(128)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
