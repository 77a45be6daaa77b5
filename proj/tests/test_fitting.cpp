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

#include "maglab/calibrate.hpp"
#include "maglab/config.hpp"
#include "maglab/lsq.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace maglab;
using namespace maglab::virtlab;

namespace {

World world_at(const StagePosition& p, bool resonator = false) {
  LabConfig cfg;
  cfg.resonator.enabled = resonator;
  World w = cfg.make_world();
  w.solenoid.setpoint_t = 0.025;
  w.stage.reset(stage::StageState::at(p));
  return w;
}

// In-plane crossing on the x line at z = -200 mm, from the field model.
double in_plane_x() {
  const World w = world_at({0.0, 0.0, -200.0});
  double best = 0.0, best_abs = 1e9;
  for (double x = -120.0; x <= 0.0; x += 0.01) {
    const double th = std::abs(spin::larmor_point(w.qubit, w.field_at({x, 0.0, -200.0})).theta_deg);
    if (th < best_abs) best_abs = th, best = x;
  }
  return best;
}

}  // namespace

TEST(Lsq, RecoversExponential) {
  const std::vector<double> t = linspace(0.0, 5.0, 40);
  auto f = [&](const Eigen::VectorXd& q) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(t.size()));
    for (std::size_t i = 0; i < t.size(); ++i) r[static_cast<Eigen::Index>(i)] = q[0] * std::exp(-q[1] * t[i]) + q[2] - (2.0 * std::exp(-0.7 * t[i]) + 0.3);
    return r;
  };
  const auto res = lsq::levenberg_marquardt(f, Eigen::Vector3d(1.0, 0.2, 0.0));
  ASSERT_TRUE(res.converged);
  EXPECT_NEAR(res.params[0], 2.0, 1e-8);
  EXPECT_NEAR(res.params[1], 0.7, 1e-8);
  EXPECT_NEAR(res.params[2], 0.3, 1e-8);
  EXPECT_LT(res.chi2, 1e-20);
}

TEST(Lsq, BoundsAreRespected) {
  auto f = [](const Eigen::VectorXd& q) {
    Eigen::VectorXd r(1);
    r[0] = q[0] - 5.0;
    return r;
  };
  lsq::Options o;
  o.lower = Eigen::VectorXd::Constant(1, -1.0);
  o.upper = Eigen::VectorXd::Constant(1, 2.0);
  const auto res = lsq::levenberg_marquardt(f, Eigen::VectorXd::Zero(1), o);
  EXPECT_LE(res.params[0], 2.0);
  EXPECT_NEAR(res.params[0], 2.0, 1e-9);
}

TEST(Lsq, GoldenSection) {
  const auto g = lsq::golden_section([](double x) { return (x - 1.234) * (x - 1.234); }, -10.0, 10.0, 1e-6, 200);
  EXPECT_NEAR(g.x, 1.234, 1e-5);
  EXPECT_LE(g.evaluations, 200);
}

TEST(Fitting, ResonanceFindsLarmorLine) {
  const World w = world_at({-30.0, 0.0, -200.0});
  const calibrate::SpectroscopyPlan plan;
  const auto r = run_spectroscopy(w, plan.sweep(), 21);
  const auto fit = fit_resonance(r);
  ASSERT_TRUE(fit.detected);
  ASSERT_TRUE(fit.f_l());
  EXPECT_NEAR(*fit.f_l(), w.larmor().f_l_hz, 0.1e6);
  EXPECT_GE(fit.fit.sigma("f_l"), 0.0);
}

TEST(Fitting, ResonatorLineIsExcluded) {
  const World w = world_at({-30.0, 0.0, -200.0}, true);
  ASSERT_GT(std::abs(w.larmor().f_l_hz - w.resonator.frequency_hz), 5e6);
  const calibrate::SpectroscopyPlan plan;
  const auto r = run_spectroscopy(w, plan.sweep(), 22);
  ResonanceOptions o;
  o.exclude_hz = {w.resonator.frequency_hz};
  const auto fit = fit_resonance(r, o);
  ASSERT_TRUE(fit.f_l());
  EXPECT_NEAR(*fit.f_l(), w.larmor().f_l_hz, 0.1e6);
  EXPECT_GE(fit.peaks.size(), 2u);
}

TEST(Fitting, FlatTraceHasNoLine) {
  RunRecord r;
  r.kind = RunKind::Spectroscopy;
  r.shots = 200;
  std::mt19937_64 rng(1);
  r.sweep = linspace(40e6, 160e6, 400);
  r.counts = sample_counts(std::vector<double>(400, 0.05), 200, rng);
  const auto fit = fit_resonance(r);
  EXPECT_FALSE(fit.detected);
  EXPECT_FALSE(fit.f_l());
  r.kind = RunKind::Rabi;
  EXPECT_THROW(fit_resonance(r), ValidationError);
}

TEST(Fitting, TrackMovingPeakDropsFixedLine) {
  std::vector<ResonanceFit> fits(5);
  for (int i = 0; i < 5; ++i) {
    fits[static_cast<std::size_t>(i)].peaks = {{130e6, 1e4, 1e6, 0.3, 0.05, true}, {60e6 + i * 5e6, 1e4, 1e6, 0.2, 0.05, true}};
  }
  const auto f = track_moving_peak(fits);
  for (int i = 0; i < 5; ++i) {
    ASSERT_TRUE(f[static_cast<std::size_t>(i)]);
    EXPECT_EQ(*f[static_cast<std::size_t>(i)], 60e6 + i * 5e6);
  }
}

TEST(Fitting, RamseyAtSweetSpot) {
  const double x = in_plane_x();
  const World w = world_at({x, 0.0, -200.0});
  const auto t = linspace(0.0, 40e-6, 201);
  const auto fit = fit_decay(run_ramsey(w, t, 0.25e6, 500, 31), DecayModel::Ramsey);
  ASSERT_TRUE(fit.usable());
  const double truth = spin::coherence_times(w.qubit, w.larmor().theta_deg).t2_star_s;
  EXPECT_NEAR(fit.value("T2"), truth, 0.1 * truth);
  EXPECT_NEAR(fit.value("frequency"), 0.25e6, 5e3);
  for (const auto& p : fit.params) EXPECT_GE(p.sigma, 0.0);
}

TEST(Fitting, HahnAtSweetSpot) {
  const double x = in_plane_x();
  const World w = world_at({x, 0.0, -200.0});
  const auto t = linspace(0.0, 350e-6, 71);
  const auto fit = fit_decay(run_hahn_echo(w, t, 500, 32), DecayModel::Hahn);
  ASSERT_TRUE(fit.usable());
  const double truth = spin::coherence_times(w.qubit, w.larmor().theta_deg).t2_hahn_s;
  EXPECT_NEAR(fit.value("T2"), truth, 0.15 * truth);
  EXPECT_NEAR(fit.value("exponent"), 1.5, 3.0 * fit.sigma("exponent"));
}

TEST(Fitting, DecayModelMismatchRejected) {
  const World w = world_at({-30.0, 0.0, -200.0});
  const auto r = run_hahn_echo(w, linspace(0.0, 10e-6, 20), 50, 1);
  EXPECT_THROW(fit_decay(r, DecayModel::Ramsey), ValidationError);
}

TEST(Fitting, RabiFrequency) {
  const World w = world_at({-30.0, 0.0, -200.0});
  const auto lp = w.larmor();
  const double fr = spin::rabi_frequency(w.qubit, lp.f_l_hz, 1.0, lp.theta_deg);
  const auto t = linspace(0.0, 5.0 / fr, 101);
  const auto fit = fit_rabi(run_rabi(w, t, 1.0, 400, 3));
  ASSERT_TRUE(fit.usable());
  EXPECT_NEAR(fit.value("frequency"), fr, 0.01 * fr);
  EXPECT_THROW(fit.value("T2"), NotFoundError);
  EXPECT_FALSE(fit.has("T2"));
}

TEST(Fitting, NoOscillationIsUnusable) {
  Trace tr;
  tr.x = linspace(0.0, 1e-6, 50);
  tr.y.assign(50, 0.3);
  tr.sigma.assign(50, 0.02);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 0.02);
  for (double& y : tr.y) y += n(rng);
  const auto fit = fit_rabi(tr);
  EXPECT_FALSE(fit.converged);
  EXPECT_FALSE(fit.usable());
}

TEST(Fitting, TraceSigmaFloor) {
  RunRecord r;
  r.kind = RunKind::Rabi;
  r.shots = 100;
  r.sweep = {0.0, 1.0};
  r.counts = {0, 100};
  const auto tr = Trace::from_record(r);
  const double floor = std::sqrt(0.005 * 0.995 / 100.0);
  EXPECT_NEAR(tr.sigma[0], floor, 1e-15);
  EXPECT_NEAR(tr.sigma[1], floor, 1e-15);
}

TEST(Fitting, EstimateImprovesWithShots) {
  const World w = world_at({-45.0, 0.0, -200.0});
  const double truth = spin::coherence_times(w.qubit, w.larmor().theta_deg).t2_star_s;
  const auto t = linspace(0.0, 4.0 * truth, 81);
  std::vector<double> err;
  for (long shots : {30L, 300L, 3000L}) {
    double sum = 0.0;
    for (std::uint64_t s = 0; s < 12; ++s) {
      const auto fit = fit_decay(run_ramsey(w, t, 2.0 / truth, shots, 100 + s), DecayModel::Ramsey);
      sum += fit.usable() ? std::abs(fit.value("T2") - truth) / truth : 1.0;
    }
    err.push_back(sum / 12.0);
  }
  EXPECT_LT(err[1], err[0]);
  EXPECT_LT(err[2], err[1]);
}
