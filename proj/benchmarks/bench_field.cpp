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
#include "maglab/magnetics.hpp"
#include "maglab/spinmodel.hpp"

#include <benchmark/benchmark.h>

using namespace maglab;

static void BM_CuboidField(benchmark::State& state) {
  const auto spec = device::default_magnet();
  const Eigen::Vector3d c = spec.centre_mm();
  double x = -100.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(magnetics::cuboid_field(spec, StagePosition::from(c + Eigen::Vector3d(x, 3.0, 200.0))));
    x = x < 0.0 ? x + 0.01 : -100.0;
  }
}
BENCHMARK(BM_CuboidField);

static void BM_AxialProfile(benchmark::State& state) {
  const auto spec = device::default_magnet();
  for (auto _ : state) benchmark::DoNotOptimize(magnetics::axial_profile(spec, -160.0));
}
BENCHMARK(BM_AxialProfile);

static void BM_LarmorFrequency(benchmark::State& state) {
  const auto q = device::default_q8();
  const FieldVector b{0.0012, 0.0003, 0.025};
  for (auto _ : state) benchmark::DoNotOptimize(spin::larmor_frequency(q.g, b));
}
BENCHMARK(BM_LarmorFrequency);

static void BM_LarmorPoint(benchmark::State& state) {
  const auto q = device::default_q8();
  const FieldVector b{0.0012, 0.0003, 0.025};
  for (auto _ : state) benchmark::DoNotOptimize(spin::larmor_point(q, b));
}
BENCHMARK(BM_LarmorPoint);

BENCHMARK_MAIN();
