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
#include "maglab/lab.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace maglab;
using namespace maglab::virtlab;

namespace {

World sweet_world() {
  LabConfig cfg;
  World w = cfg.make_world();
  w.solenoid.setpoint_t = 0.025;
  return w;
}

RunRecord sample_record() {
  RunRecord r;
  r.id = 42;
  r.kind = RunKind::Ramsey;
  r.commanded = {-61.25, 0.0, -200.0};
  r.true_pos = {-61.2, 0.0, -200.0};
  r.sweep = {0.0, 1e-7, 2.5e-7, 1.0 / 3.0 * 1e-6};
  r.counts = {500, 333, 1, 0};
  r.shots = 500;
  r.seed = 0xfeedfacecafebeefULL;
  r.timestamp = "2026-01-02T03:04:05.678Z";
  r.scenario = "fig4_sweet_spot";
  r.params = {{"detuning_hz", 250000.0}};
  return r;
}

}  // namespace

TEST(Virtlab, DetunedRabiLine) {
  const double tp = 2e-6;
  const double fr = 1.0 / (2.0 * tp);
  EXPECT_NEAR(detuned_rabi(fr, 0.0, tp, std::numeric_limits<double>::infinity()), 1.0, 1e-12);
  EXPECT_EQ(detuned_rabi(0.0, 0.0, tp, 1e-6), 0.0);
  for (double d : {1e5, 3e5, 1e6}) {
    EXPECT_EQ(detuned_rabi(fr, d, tp, 1e-6), detuned_rabi(fr, -d, tp, 1e-6));
    EXPECT_LE(detuned_rabi(fr, d, tp, std::numeric_limits<double>::infinity()), fr * fr / (fr * fr + d * d) + 1e-15);
  }
  // Strong damping leaves the steady-state half population.
  EXPECT_NEAR(detuned_rabi(fr, 0.0, tp, 1e-12), 0.5, 1e-12);
}

TEST(Virtlab, ShotSamplingStatistics) {
  std::mt19937_64 rng(99);
  const std::vector<double> p{0.02, 0.3, 0.5, 0.93};
  const long shots = 200;
  const int reps = 1000;
  std::vector<double> sum(p.size()), sum2(p.size());
  for (int r = 0; r < reps; ++r) {
    const auto c = sample_counts(p, shots, rng);
    for (std::size_t i = 0; i < p.size(); ++i) {
      ASSERT_GE(c[i], 0);
      ASSERT_LE(c[i], shots);
      const double v = static_cast<double>(c[i]) / shots;
      sum[i] += v;
      sum2[i] += v * v;
    }
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double mean = sum[i] / reps;
    const double var = sum2[i] / reps - mean * mean;
    const double model_var = p[i] * (1.0 - p[i]) / shots;
    EXPECT_NEAR(mean, p[i], 5.0 * std::sqrt(model_var / reps));
    EXPECT_LE(var, model_var * 1.1);
  }
}

TEST(Virtlab, ExperimentsAreReproducible) {
  const World w = sweet_world();
  const auto sweep = SpectroscopySweep::linear(40e6, 160e6, 0.5e6);
  const auto a = run_spectroscopy(w, sweep, 17);
  const auto b = run_spectroscopy(w, sweep, 17);
  const auto c = run_spectroscopy(w, sweep, 18);
  EXPECT_EQ(a.counts, b.counts);
  EXPECT_NE(a.counts, c.counts);
  EXPECT_EQ(a.seed, 17u);
  const auto t = linspace(0.0, 40e-6, 81);
  EXPECT_EQ(run_ramsey(w, t, 0.25e6, 300, 5).counts, run_ramsey(w, t, 0.25e6, 300, 5).counts);
  EXPECT_EQ(run_hahn_echo(w, t, 300, 5).counts, run_hahn_echo(w, t, 300, 5).counts);
  EXPECT_EQ(run_rabi(w, t, 1.0, 300, 5).counts, run_rabi(w, t, 1.0, 300, 5).counts);
}

TEST(Virtlab, RecordsRespectShotBounds) {
  const World w = sweet_world();
  const auto t = linspace(0.0, 20e-6, 41);
  for (const auto& r : {run_spectroscopy(w, SpectroscopySweep::linear(40e6, 160e6, 1e6), 1), run_rabi(w, t, 1.0, 50, 2),
                        run_ramsey(w, t, 0.1e6, 50, 3), run_hahn_echo(w, t, 50, 4)}) {
    EXPECT_NO_THROW(r.validate());
    EXPECT_EQ(r.sweep.size(), r.counts.size());
    EXPECT_NE(r.seed, 0u);
    EXPECT_FALSE(r.timestamp.empty());
  }
}

TEST(Virtlab, SpectroscopyPeakSitsAtLarmor) {
  World w = sweet_world();
  w.stage.reset(stage::StageState::at({-60.0, 0.0, -200.0}));
  SpectroscopySweep s = SpectroscopySweep::linear(40e6, 160e6, 0.05e6);
  s.shots_per_point = 2000;
  s.drive_decay_s = 0.4e-6;
  const auto r = run_spectroscopy(w, s, 3);
  const auto it = std::max_element(r.counts.begin(), r.counts.end());
  const double f_peak = r.sweep[static_cast<std::size_t>(it - r.counts.begin())];
  EXPECT_NEAR(f_peak, w.larmor().f_l_hz, 0.3e6);
}

TEST(Virtlab, InputValidation) {
  const World w = sweet_world();
  SpectroscopySweep s;
  EXPECT_THROW(run_spectroscopy(w, s, 1), ValidationError);
  s.drive_hz = {2.0, 1.0};
  EXPECT_THROW(run_spectroscopy(w, s, 1), ValidationError);
  EXPECT_THROW(SpectroscopySweep::linear(2.0, 1.0, 0.1), ValidationError);
  EXPECT_THROW(run_rabi(w, {}, 1.0, 10, 1), ValidationError);
  EXPECT_THROW(run_ramsey(w, {-1.0}, 0.0, 10, 1), ValidationError);
  EXPECT_THROW(run_hahn_echo(w, {1e-6}, 0, 1), ValidationError);
}

TEST(Virtlab, RecordJsonRoundTrip) {
  const auto r = sample_record();
  const auto back = record_from_json(to_json(r));
  EXPECT_EQ(back.id, r.id);
  EXPECT_EQ(back.kind, r.kind);
  EXPECT_EQ(back.commanded, r.commanded);
  EXPECT_EQ(back.true_pos, r.true_pos);
  EXPECT_EQ(back.sweep, r.sweep);
  EXPECT_EQ(back.counts, r.counts);
  EXPECT_EQ(back.shots, r.shots);
  EXPECT_EQ(back.seed, r.seed);
  EXPECT_EQ(back.timestamp, r.timestamp);
  EXPECT_EQ(back.scenario, r.scenario);
  EXPECT_EQ(back.params, r.params);
}

TEST(Virtlab, TraceCsvRoundTrip) {
  tst::TempDir dir;
  const auto r = sample_record();
  write_trace_csv(dir / "t.csv", r);
  const std::string text = tst::slurp(dir / "t.csv");
  EXPECT_EQ(text.rfind("sweep_value,counts,shots,p_blockade\n", 0), 0u);
  EXPECT_EQ(text.find('\r'), std::string::npos);
  const auto rows = read_trace_csv(dir / "t.csv");
  ASSERT_EQ(rows.size(), r.sweep.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].sweep_value, r.sweep[i]);
    EXPECT_EQ(rows[i].counts, r.counts[i]);
    EXPECT_EQ(rows[i].shots, r.shots);
    EXPECT_EQ(rows[i].p_blockade, static_cast<double>(r.counts[i]) / static_cast<double>(r.shots));
  }
}

TEST(Virtlab, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e9, 1e9);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 30) - 15);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(Virtlab, KindNames) {
  for (auto k : {RunKind::Spectroscopy, RunKind::Rabi, RunKind::Ramsey, RunKind::Hahn, RunKind::RB})
    EXPECT_EQ(parse_kind(kind_name(k)), k);
  EXPECT_THROW(parse_kind("tomography"), ValidationError);
}

TEST(Virtlab, GridHelpers) {
  const auto l = linspace(0.0, -250.0, 51);
  ASSERT_EQ(l.size(), 51u);
  EXPECT_TRUE(std::is_sorted(l.rbegin(), l.rend()));
  EXPECT_EQ(l.back(), -250.0);
  const auto g = logspace_int(1, 128, 12);
  EXPECT_EQ(g.front(), 1);
  EXPECT_EQ(g.back(), 128);
  EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
  EXPECT_EQ(std::adjacent_find(g.begin(), g.end()), g.end());
}

TEST(Virtlab, SeedDerivation) {
  EXPECT_EQ(derive_seed(1, "a", 0), derive_seed(1, "a", 0));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "a", 1));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "b", 0));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(2, "a", 0));
}

TEST(Virtlab, LabEmitsToObserverWithDistinctSeeds) {
  Lab lab(sweet_world(), 123, "t");
  lab.set_scenario("s");
  std::vector<RunRecord> seen;
  lab.set_observer([&](RunRecord& r) { seen.push_back(r); });
  lab.move_to({-50.0, 0.0, -200.0});
  const auto t = linspace(0.0, 20e-6, 11);
  lab.ramsey(t, 0.2e6, 50);
  lab.hahn(t, 50);
  ASSERT_EQ(seen.size(), 2u);
  EXPECT_EQ(seen[0].scenario, "s");
  EXPECT_NE(seen[0].seed, seen[1].seed);
  EXPECT_EQ(lab.probes(), 2);

  Lab again(sweet_world(), 123, "t");
  again.move_to({-50.0, 0.0, -200.0});
  EXPECT_EQ(again.ramsey(t, 0.2e6, 50).counts, seen[0].counts);
}

TEST(Virtlab, LabApproachDirection) {
  Lab lab(sweet_world(), 1);
  lab.set_compensation(false);
  lab.move_to({-40.0, 0.0, -200.0});
  const long before = lab.world().stage.state().event_count;
  lab.approach({-30.0, 0.0, -200.0}, Axis::X, -1);
  // Coming from the wrong side needs an overshoot move first.
  EXPECT_EQ(lab.world().stage.state().event_count, before + 2);
  lab.approach({-35.0, 0.0, -200.0}, Axis::X, -1);
  EXPECT_EQ(lab.world().stage.state().event_count, before + 3);
  EXPECT_THROW(lab.set_solenoid(4.0), ValidationError);
}
