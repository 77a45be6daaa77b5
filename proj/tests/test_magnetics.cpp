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

#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include <chrono>
#include <random>

using namespace maglab;
using namespace maglab::magnetics;

TEST(Magnetics, AnalyticFieldMatchesDipoleGrid) {
  std::mt19937_64 rng(11);
  std::vector<MagnetSpec> specs(3, device::default_magnet());
  specs[1].magnetization_axis = {1.0, 0.0, 0.0};
  specs[1].position = {12.0, -7.0, -150.0};
  specs[2].magnetization_axis = Eigen::Vector3d(0.3, -0.5, 0.8).normalized();
  specs[2].orientation = tst::random_rotation(rng);
  specs[2].position = {-20.0, 30.0, -180.0};

  const auto t0 = std::chrono::steady_clock::now();
  std::uniform_real_distribution<double> radius(150.0, 400.0);
  std::normal_distribution<double> g;
  for (const auto& spec : specs) {
    double worst = 0.0;
    for (int p = 0; p < 100; ++p) {
      const Eigen::Vector3d dir = Eigen::Vector3d(g(rng), g(rng), g(rng)).normalized();
      const Eigen::Vector3d point = spec.centre_mm() + radius(rng) * dir;
      const Eigen::Vector3d analytic = cuboid_field(spec, StagePosition::from(point)).vec();
      const Eigen::Vector3d oracle = tst::dipole_grid_field(spec, point, 64);
      worst = std::max(worst, (analytic - oracle).norm() / oracle.norm());
    }
    EXPECT_LT(worst, 1e-3);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 10.0);
}

TEST(Magnetics, AnchorAt160mm) {
  const double b = axial_profile(device::default_magnet(), -160.0);
  EXPECT_NEAR(b, 6.2e-3, 0.02 * 6.2e-3);
}

TEST(Magnetics, SingleAnchorCalibrationIsExact) {
  const auto fit = calibrate_remanence({{-160.0, 6.2e-3}});
  EXPECT_NEAR(axial_profile(fit.spec, -160.0), 6.2e-3, 1e-15);
  EXPECT_NEAR(fit.spec.remanence_t, device::kAnchorRemanence, 1e-9);
}

TEST(Magnetics, RemanenceRoundTrip) {
  MagnetSpec truth;
  truth.remanence_t = 1.35;
  std::vector<ProfilePoint> profile;
  for (double z : {-160.0, -200.0, -250.0, -300.0, -400.0, -550.0}) profile.push_back({z, axial_profile(truth, z)});
  MagnetSpec base;
  base.remanence_t = 1.0;
  const auto fit = calibrate_remanence(profile, base);
  EXPECT_NEAR(fit.spec.remanence_t, 1.35, 1.35e-3);
  EXPECT_LT(fit.residual_rms_t, 1e-12);

  for (auto& p : profile) p.b_tesla *= 2.0;
  EXPECT_NEAR(calibrate_remanence(profile, base).spec.remanence_t, 2.7, 1e-9);
}

TEST(Magnetics, DegenerateProfileRejected) {
  EXPECT_THROW(calibrate_remanence({{-200.0, 1e-3}, {-200.0, 1.1e-3}, {-200.0, 0.9e-3}}), FitError);
  EXPECT_THROW(calibrate_remanence({}), FitError);
}

TEST(Magnetics, ProfileCsvRoundTrip) {
  tst::TempDir dir;
  const std::vector<ProfilePoint> profile{{-160.0, 6.2e-3}, {-180.5, 4.4123456789e-3}, {-700.0, 1.0e-5}};
  write_profile_csv(dir / "p.csv", profile);
  EXPECT_EQ(tst::slurp(dir / "p.csv").substr(0, 13), "z_mm,b_tesla\n");
  const auto back = read_profile_csv(dir / "p.csv");
  ASSERT_EQ(back.size(), profile.size());
  for (std::size_t i = 0; i < profile.size(); ++i) {
    EXPECT_EQ(back[i].z_mm, profile[i].z_mm);
    EXPECT_EQ(back[i].b_tesla, profile[i].b_tesla);
  }
}

TEST(Magnetics, ProfileCsvBadHeader) {
  tst::TempDir dir;
  std::ofstream(dir / "p.csv") << "z,b\n1,2\n";
  EXPECT_THROW(read_profile_csv(dir / "p.csv"), ValidationError);
  EXPECT_THROW(read_profile_csv(dir / "missing.csv"), NotFoundError);
}

TEST(Magnetics, InsideMagnetRejected) {
  const auto m = device::default_magnet().at({0.0, 0.0, 5.0});
  EXPECT_THROW(cuboid_field(m, {}), DomainError);
  EXPECT_THROW(cuboid_field(m, StagePosition::from(m.centre_mm())), DomainError);
}

TEST(Magnetics, SolenoidLimit) {
  SolenoidSpec s;
  s.setpoint_t = 3.0;
  EXPECT_NO_THROW(s.validate());
  s.setpoint_t = -3.5;
  try {
    s.validate();
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("3 T limit"), std::string::npos);
  }
  s.setpoint_t = 0.1;
  s.axis = {1.0, 1.0, 0.0};
  EXPECT_THROW(s.validate(), ValidationError);
}

TEST(Magnetics, SpecValidation) {
  MagnetSpec m;
  EXPECT_NO_THROW(m.validate());
  m.dims_mm.y() = 0.0;
  EXPECT_THROW(m.validate(), ValidationError);
  m = {};
  m.magnetization_axis = {0.0, 0.0, 1.0 + 1e-9};
  EXPECT_THROW(m.validate(), ValidationError);
  m = {};
  m.orientation = -Eigen::Matrix3d::Identity();
  EXPECT_THROW(m.validate(), ValidationError);
}

TEST(Magnetics, Superposition) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  const auto magnet = device::default_magnet();
  for (int i = 0; i < 50; ++i) {
    SolenoidSpec s;
    s.setpoint_t = u(rng) / 100.0;
    const auto m = magnet.at({u(rng), u(rng), -150.0 + u(rng) / 2.0});
    const auto total = total_field(s, m);
    const auto parts = solenoid_field(s) + cuboid_field(m, {});
    EXPECT_EQ(total, parts);
  }
  SolenoidSpec off;
  EXPECT_EQ(total_field(off, magnet), cuboid_field(magnet, {}));
  MagnetSpec none = magnet;
  none.remanence_t = 0.0;
  EXPECT_EQ(total_field(off, none), FieldVector{});
}

TEST(Magnetics, RetractedMagnetLeavesSolenoidField) {
  SolenoidSpec s;
  s.setpoint_t = 0.025;
  const auto b = total_field(s, device::default_magnet().at({0.0, 0.0, -700.0}));
  EXPECT_NEAR(b.magnitude(), 0.025, 0.005 * 0.025);
}

TEST(Magnetics, FarFieldDipoleScaling) {
  MagnetSpec m = device::default_magnet();
  m.transform.offset_mm.setZero();
  m.position = {};
  const double dmax = m.dims_mm.maxCoeff();
  const Eigen::Vector3d dir = Eigen::Vector3d(0.4, -0.3, 0.87).normalized();
  const double r0 = 11.0 * dmax;
  const double ref = cuboid_field(m, StagePosition::from(r0 * dir)).magnitude() * r0 * r0 * r0;
  for (double f : {1.5, 2.0, 4.0, 7.0, 10.0}) {
    const double r = f * r0;
    const double v = cuboid_field(m, StagePosition::from(r * dir)).magnitude() * r * r * r;
    EXPECT_NEAR(v / ref, 1.0, 0.01) << "r = " << r;
  }
}

TEST(Magnetics, MirrorSymmetry) {
  MagnetSpec m = device::default_magnet();
  m.transform.offset_mm.setZero();
  m.position = {};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(20.0, 200.0);
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); };
  for (int i = 0; i < 40; ++i) {
    const StagePosition p{u(rng), u(rng) - 100.0, u(rng)};
    const auto b = cuboid_field(m, p);
    const auto bx = cuboid_field(m, {-p.x, p.y, p.z});
    const auto by = cuboid_field(m, {p.x, -p.y, p.z});
    const auto bz = cuboid_field(m, {p.x, p.y, -p.z});
    EXPECT_LT(rel(bx.bx, -b.bx), 1e-12);
    EXPECT_LT(rel(bx.by, b.by), 1e-12);
    EXPECT_LT(rel(bx.bz, b.bz), 1e-12);
    EXPECT_LT(rel(by.bx, b.bx), 1e-12);
    EXPECT_LT(rel(by.by, -b.by), 1e-12);
    EXPECT_LT(rel(by.bz, b.bz), 1e-12);
    EXPECT_LT(rel(bz.bx, -b.bx), 1e-12);
    EXPECT_LT(rel(bz.by, -b.by), 1e-12);
    EXPECT_LT(rel(bz.bz, b.bz), 1e-12);
  }
}

TEST(Magnetics, AxialProfileDecreasesMonotonically) {
  const auto m = device::default_magnet();
  double prev = axial_profile(m, -100.0);
  for (double z = -101.0; z >= -800.0; z -= 1.0) {
    const double b = axial_profile(m, z);
    ASSERT_LT(b, prev) << "z = " << z;
    prev = b;
  }
}

TEST(Magnetics, FieldComponentsFinite) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-300.0, 300.0);
  std::uniform_real_distribution<double> uz(-800.0, -100.0);
  const auto m = device::default_magnet();
  for (int i = 0; i < 200; ++i) {
    const auto b = cuboid_field(m.at({u(rng), u(rng), uz(rng)}), {});
    EXPECT_TRUE(b.finite());
    EXPECT_GE(b.magnitude(), 0.0);
  }
}
