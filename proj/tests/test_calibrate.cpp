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
#include "maglab/scenario.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace maglab;
using namespace maglab::calibrate;

namespace {

virtlab::Lab sweet_lab(std::uint64_t seed) {
  LabConfig cfg;
  virtlab::World w = cfg.make_world();
  w.solenoid.setpoint_t = 0.025;
  virtlab::Lab lab(std::move(w), seed, "t");
  lab.move_to({0.0, 0.0, -200.0});
  return lab;
}

double angle_between_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return rad2deg(std::acos(std::min(1.0, std::abs(a.normalized().dot(b.normalized())))));
}

}  // namespace

TEST(ParabolaVertex, Symmetric) {
  std::vector<double> x, y;
  for (double v = -3.0; v <= 5.0; v += 0.5) x.push_back(v), y.push_back(2.0 * (v - 1.25) * (v - 1.25) + 7.0);
  const auto v = parabola_vertex(x, y);
  ASSERT_TRUE(v);
  EXPECT_NEAR(*v, 1.25, 1e-9);
}

TEST(ParabolaVertex, RejectsDownwardAndDegenerate) {
  EXPECT_FALSE(parabola_vertex({0, 1, 2, 3}, {0, 1, 1, 0}));
  EXPECT_FALSE(parabola_vertex({1, 1, 1}, {1, 2, 3}));
  EXPECT_FALSE(parabola_vertex({1, 2}, {1, 2}));
}

TEST(ParabolaVertex, IgnoresSingleOutlier) {
  std::vector<double> x, y;
  for (double v = -5.0; v <= 5.0; v += 1.0) x.push_back(v), y.push_back((v + 0.4) * (v + 0.4));
  y[2] += 40.0;
  const auto v = parabola_vertex(x, y);
  ASSERT_TRUE(v);
  EXPECT_NEAR(*v, -0.4, 1e-9);
}

TEST(SweetSpot, ResidualAngleWithinBudget) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto lab = sweet_lab(seed);
    SweetSpotOptions o;
    std::vector<double> probed;
    lab.set_observer([&](virtlab::RunRecord& r) { probed.push_back(r.true_pos.x); });
    const auto res = find_sweet_spot(lab, o);
    EXPECT_LT(std::abs(res.residual_angle_deg), 0.1) << "seed " << seed;
    EXPECT_LE(static_cast<int>(res.probes.size()), o.budget);
    EXPECT_LE(res.iterations, o.budget);
    for (double x : probed) {
      EXPECT_GE(x, o.lo_mm - 1e-6);
      EXPECT_LE(x, o.hi_mm + 1e-6);
    }
    for (std::size_t i = 1; i < res.best_so_far_hz.size(); ++i)
      EXPECT_LE(res.best_so_far_hz[i], res.best_so_far_hz[i - 1]);
    for (const auto& p : res.probes)
      if (p.f_l_hz) EXPECT_LE(res.f_l_min_hz, *p.f_l_hz);
    EXPECT_NEAR(lab.world().stage.state().true_pos.x, res.x_star_mm, 1e-9);
  }
}

TEST(SweetSpot, ProgressCallbackSeesEveryProbe) {
  auto lab = sweet_lab(4);
  SweetSpotOptions o;
  o.budget = 30;
  int calls = 0;
  double last_width = 1e9;
  const auto res = find_sweet_spot(lab, o, [&](const Probe&, double lo, double hi) {
    ++calls;
    EXPECT_LE(hi - lo, last_width + 1e-9);
    last_width = hi - lo;
  });
  EXPECT_EQ(calls, static_cast<int>(res.probes.size()));
  EXPECT_LE(calls, 30);
}

TEST(SweetSpot, NoInteriorMinimumIsBracketError) {
  auto lab = sweet_lab(5);
  SweetSpotOptions o;
  o.lo_mm = -30.0;
  o.hi_mm = 0.0;
  EXPECT_THROW(find_sweet_spot(lab, o), BracketError);
}

TEST(SweetSpot, FailedFitsAreCalibrationError) {
  auto lab = sweet_lab(6);
  SweetSpotOptions o;
  o.spectroscopy.f_start_hz = 300e6;
  o.spectroscopy.f_stop_hz = 310e6;
  EXPECT_THROW(find_sweet_spot(lab, o), CalibrationError);
}

TEST(SweetSpot, OptionValidation) {
  auto lab = sweet_lab(7);
  SweetSpotOptions o;
  o.lo_mm = 0.0;
  o.hi_mm = -10.0;
  EXPECT_THROW(find_sweet_spot(lab, o), ValidationError);
  o = {};
  o.budget = 5;
  EXPECT_THROW(find_sweet_spot(lab, o), ValidationError);
}

TEST(GTensorFit, SyntheticRoundTrip) {
  LabConfig cfg;
  FieldModel fm{cfg.magnet, {}};
  const auto truth = device::default_q8().g;
  const auto map = tst::synthetic_gtensor_map(truth, fm, 0.005, 17);
  const auto fit = fit_gtensor(map, fm);
  EXPECT_FALSE(fit.underdetermined);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(fit.g.principal[i], truth.principal[i], 0.02 * truth.principal[i]) << i;
  EXPECT_NEAR(fit.misalignment_deg, 2.5, 0.2);
  EXPECT_LT(angle_between_deg(fit.g.axis(0), truth.axis(0)), 0.2);
  EXPECT_GE(static_cast<int>(fit.seed_objectives.size()), 8);
  for (double o : fit.seed_objectives) EXPECT_LE(fit.objective, o * (1.0 + 1e-9));
  for (int i = 0; i < 3; ++i) EXPECT_GE(fit.principal_sigma[i], 0.0);
}

TEST(GTensorFit, IsotropicTruth) {
  LabConfig cfg;
  FieldModel fm{cfg.magnet, {}};
  const auto map = tst::synthetic_gtensor_map(spin::GTensor::isotropic(2.0), fm, 0.005, 18);
  const auto fit = fit_gtensor(map, fm);
  const double ratio = fit.g.principal.maxCoeff() / fit.g.principal.minCoeff();
  EXPECT_NEAR(ratio, 1.0, 0.03);
}

TEST(GTensorFit, MirrorPlaneMapIsUnderdetermined) {
  LabConfig cfg;
  FieldModel fm{cfg.magnet, {}};
  fm.solenoid.setpoint_t = 0.025;
  const auto truth = device::default_q8().g;
  std::vector<MapPoint> map;
  for (double z : virtlab::linspace(-160.0, -300.0, 8))
    for (double x : virtlab::linspace(0.0, -250.0, 11)) {
      const StagePosition p{x, 0.0, z};
      map.push_back({p, spin::larmor_frequency(truth, fm.at(p))});
    }
  EXPECT_TRUE(fit_gtensor(map, fm).underdetermined);
}

TEST(GTensorFit, SingleAxisMapIsUnderdetermined) {
  LabConfig cfg;
  FieldModel fm{cfg.magnet, {}};
  fm.solenoid.setpoint_t = 0.025;
  const auto truth = device::default_q8().g;
  std::vector<MapPoint> map;
  for (double x : virtlab::linspace(0.0, -250.0, 30)) {
    const StagePosition p{x, 0.0, -200.0};
    map.push_back({p, spin::larmor_frequency(truth, fm.at(p))});
  }
  GTensorFitOptions o;
  o.fallback_orientation = truth.orientation;
  const auto fit = fit_gtensor(map, fm, o);
  EXPECT_TRUE(fit.underdetermined);
  EXPECT_FALSE(fit.note.empty());
  EXPECT_TRUE(fit.g.orientation.isApprox(truth.orientation, 1e-12));
}

TEST(GTensorFit, TooFewPoints) {
  FieldModel fm{LabConfig{}.magnet, {}};
  EXPECT_THROW(fit_gtensor(std::vector<MapPoint>(5, {{0, 0, -200}, 1e8}), fm), ValidationError);
}

TEST(GTensorFit, CanonicalOrdering) {
  std::mt19937_64 rng(3);
  const auto truth = device::default_q8().g;
  // Permute and flip the principal frame; canonical() must undo it.
  Eigen::Matrix3d p;
  p << 0, 1, 0, 0, 0, 1, 1, 0, 0;
  spin::GTensor g;
  g.orientation = truth.orientation * p.transpose();
  g.principal = p * truth.principal;
  g.orientation.col(0) *= -1.0;
  g.orientation.col(1) *= -1.0;
  const auto c = canonical(g);
  EXPECT_TRUE(c.matrix().isApprox(truth.matrix(), 1e-12));
  EXPECT_NEAR(c.orientation.determinant(), 1.0, 1e-12);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(c.principal[i], truth.principal[i], 1e-12);
}

TEST(Shape, TurningPoints) {
  EXPECT_EQ(count_turning_points({5, 4, 3, 2, 3, 4, 5}, 0.1), std::make_pair(1, 0));
  EXPECT_EQ(count_turning_points({5, 3, 4, 6, 5, 4}, 0.1), std::make_pair(1, 1));
  // Reversals below threshold are noise.
  EXPECT_EQ(count_turning_points({5, 4, 4.05, 3, 2, 3}, 0.1), std::make_pair(1, 0));
  EXPECT_EQ(count_turning_points({1, 2, 3}, 0.1), std::make_pair(0, 0));
}

TEST(Shape, EstimateShift) {
  const auto x = virtlab::linspace(-50.0, 0.0, 101);
  std::vector<double> a, b;
  for (double v : x) {
    a.push_back((v + 25.0) * (v + 25.0));
    b.push_back((v + 25.0 + 2.5) * (v + 25.0 + 2.5));
  }
  EXPECT_NEAR(estimate_shift(x, a, b, 5.0), 2.5, 0.05);
  EXPECT_NEAR(estimate_shift(x, a, a, 5.0), 0.0, 0.05);
}
