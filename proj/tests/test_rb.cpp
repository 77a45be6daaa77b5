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

#include "maglab/rb.hpp"

#include <gtest/gtest.h>

#include <random>
#include <map>
#include <set>

using namespace maglab;
using namespace maglab::virtlab;
using cd = std::complex<double>;

namespace {

Matrix2c pauli(int k) {
  Matrix2c m;
  if (k == 0) m << 0, 1, 1, 0;
  if (k == 1) m << 0, cd(0, -1), cd(0, 1), 0;
  if (k == 2) m << 1, 0, 0, -1;
  return m;
}

// exp(-i theta/2 n.sigma)
Matrix2c rotation(const Eigen::Vector3d& n, double theta) {
  Matrix2c ns = n.x() * pauli(0) + n.y() * pauli(1) + n.z() * pauli(2);
  return std::cos(theta / 2) * Matrix2c::Identity() - cd(0, std::sin(theta / 2)) * ns;
}

Matrix2c brute_product(const std::vector<NativeGate>& pulses) {
  Matrix2c u = Matrix2c::Identity();
  for (NativeGate g : pulses)
    u = rotation(g == NativeGate::X90 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY(), kPi / 2) * u;
  return u;
}

// Rotation angle of an SU(2) element up to phase.
double rotation_angle(const Matrix2c& u) {
  const double c = std::min(1.0, std::abs(u.trace()) / 2.0);
  return 2.0 * std::acos(c);
}

}  // namespace

TEST(Rb, NativeGatesAreQuarterTurns) {
  EXPECT_TRUE(native_unitary(NativeGate::X90).isApprox(rotation(Eigen::Vector3d::UnitX(), kPi / 2), 1e-14));
  EXPECT_TRUE(native_unitary(NativeGate::Y90).isApprox(rotation(Eigen::Vector3d::UnitY(), kPi / 2), 1e-14));
}

TEST(Rb, TableHas24DistinctUnitaryElements) {
  const auto& t = clifford_table();
  ASSERT_EQ(t.size(), 24u);
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_TRUE((t[i].unitary.adjoint() * t[i].unitary).isApprox(Matrix2c::Identity(), 1e-12));
    EXPECT_TRUE(equal_up_to_phase(t[i].unitary, brute_product(t[i].sequence), 1e-12)) << t[i].label();
    for (std::size_t j = 0; j < i; ++j) EXPECT_FALSE(equal_up_to_phase(t[i].unitary, t[j].unitary, 1e-6));
  }
}

TEST(Rb, TableFamilies) {
  const auto& t = clifford_table();
  EXPECT_TRUE(t[0].sequence.empty());
  EXPECT_EQ(t[0].label(), "I");
  EXPECT_TRUE(equal_up_to_phase(t[0].unitary, Matrix2c::Identity()));
  std::map<std::string, int> count;
  for (const auto& e : t) ++count[e.family];
  EXPECT_EQ(count["Pauli I"], 1);
  EXPECT_EQ(count["Pauli pi"], 3);
  EXPECT_EQ(count["2pi/3"], 8);
  EXPECT_EQ(count["pi/2"], 6);
  EXPECT_EQ(count["Hadamard-like"], 6);
  for (const auto& e : t) {
    const double a = rotation_angle(e.unitary);
    if (e.family == "Pauli pi" || e.family == "Hadamard-like") EXPECT_NEAR(a, kPi, 1e-9) << e.label();
    if (e.family == "2pi/3") EXPECT_NEAR(a, 2 * kPi / 3, 1e-9) << e.label();
    if (e.family == "pi/2") EXPECT_NEAR(a, kPi / 2, 1e-9) << e.label();
  }
}

TEST(Rb, XThenYIsBodyDiagonalThirdTurn) {
  const auto& t = clifford_table();
  const auto it = std::find_if(t.begin(), t.end(), [](const CliffordElement& e) { return e.label() == "X90 Y90"; });
  ASSERT_NE(it, t.end());
  const Matrix2c u = it->unitary;
  bool matched = false;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1})
        matched = matched || equal_up_to_phase(u, rotation(Eigen::Vector3d(sx, sy, sz).normalized(), 2 * kPi / 3), 1e-12);
  EXPECT_TRUE(matched);
}

TEST(Rb, ClosureUnderMultiplication) {
  const auto& t = clifford_table();
  int checks = 0;
  for (const auto& a : t)
    for (const auto& b : t) {
      EXPECT_TRUE(find_clifford(a.unitary * b.unitary).has_value());
      ++checks;
    }
  EXPECT_EQ(checks, 576);
}

TEST(Rb, InverseTable) {
  const auto& t = clifford_table();
  for (std::size_t i = 0; i < t.size(); ++i)
    EXPECT_TRUE(equal_up_to_phase(t[clifford_inverse(i)].unitary * t[i].unitary, Matrix2c::Identity(), 1e-12));
}

TEST(Rb, TableMeanMatchesPulseCount) {
  std::size_t pulses = 0;
  for (const auto& e : clifford_table()) pulses += e.sequence.size();
  EXPECT_EQ(table_mean_native_gates(), static_cast<double>(pulses) / 24.0);
  EXPECT_EQ(kNativeGatesPerClifford, 3.217);
}

TEST(Rb, RecoveryReturnsToIdentity) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(1, 128);
  for (int k = 0; k < 1000; ++k) {
    const int n = len(rng);
    const auto seq = rb_generate(rng(), n);
    ASSERT_EQ(seq.cliffords.size(), static_cast<std::size_t>(n) + 1);
    const Matrix2c u = brute_product(seq.native_gates());
    const double fid = std::abs(u.trace()) / 2.0;
    EXPECT_GT(fid, 1.0 - 1e-10);
  }
}

TEST(Rb, SingleCliffordRecoveryIsInverse) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto seq = rb_generate(s, 1);
    EXPECT_EQ(seq.recovery(), clifford_inverse(seq.cliffords[0]));
  }
}

TEST(Rb, GenerationIsDeterministic) {
  EXPECT_EQ(rb_generate(77, 64).cliffords, rb_generate(77, 64).cliffords);
  EXPECT_NE(rb_generate(77, 64).cliffords, rb_generate(78, 64).cliffords);
  EXPECT_THROW(rb_generate(1, 0), ValidationError);
}

TEST(Rb, DepolarizingSurvivalDependsOnPulseCountOnly) {
  std::mt19937_64 rng(1);
  const double p = 4e-4;
  std::set<std::size_t> native_counts;
  for (int k = 0; k < 200; ++k) {
    const auto seq = rb_generate(rng(), 32);
    const auto shot = rb_simulate(seq, p, 10, 1.0, rng);
    const auto n = seq.native_gates().size();
    native_counts.insert(n);
    EXPECT_NEAR(shot.survival, 0.5 + 0.5 * std::pow(1.0 - p, static_cast<double>(n)), 1e-12);
  }
  EXPECT_GT(native_counts.size(), 1u);
}

TEST(Rb, NoiselessSequencesAlwaysSurvive) {
  std::mt19937_64 rng(3);
  for (int L : {1, 16, 128}) {
    const auto shot = rb_simulate(rb_generate(rng(), L), 0.0, 1000, 0.8, rng, 0.1);
    EXPECT_NEAR(shot.survival, 1.0, 1e-12);
    EXPECT_NEAR(shot.p_blockade, 0.9, 1e-12);
  }
  EXPECT_THROW(rb_simulate(rb_generate(1, 1), 1.5, 10, 1.0, rng), ValidationError);
}

TEST(Rb, DepolarizingStrengthFromAverageFidelity) {
  // Average fidelity over the six cardinal states (a 2-design).
  for (double f : {0.9998, 0.99, 0.9}) {
    const double p = depolarizing_from_fidelity(f);
    double avg = 0.0;
    const std::vector<Eigen::Vector2cd> states{
        {1, 0}, {0, 1}, {M_SQRT1_2, M_SQRT1_2}, {M_SQRT1_2, -M_SQRT1_2}, {M_SQRT1_2, cd(0, M_SQRT1_2)},
        {M_SQRT1_2, cd(0, -M_SQRT1_2)}};
    for (const auto& psi : states) {
      const Matrix2c rho = psi * psi.adjoint();
      const Matrix2c out = (1.0 - p) * rho + p * 0.5 * Matrix2c::Identity();
      avg += (psi.adjoint() * out * psi)(0, 0).real();
    }
    EXPECT_NEAR(avg / 6.0, f, 1e-12);
  }
}

TEST(Rb, FitOfPerfectDecay) {
  const std::vector<double> L{1, 2, 4, 8, 16, 32, 64, 128};
  std::vector<double> y;
  for (double l : L) y.push_back(0.45 * std::pow(0.9987, l) + 0.5);
  const auto f = rb_fit(L, y);
  EXPECT_TRUE(f.fit.usable());
  EXPECT_NEAR(f.alpha, 0.9987, 1e-9);
  EXPECT_NEAR(f.f_clifford, 1.0 - 0.0013 / 2.0, 1e-9);
  EXPECT_NEAR(f.fit.value("B"), 0.5, 1e-7);
  const auto fixed = rb_fit(L, y, {.fixed_asymptote = 0.5});
  EXPECT_NEAR(fixed.alpha, 0.9987, 1e-12);
}

TEST(Rb, AlphaOneGivesUnitFidelity) {
  const std::vector<double> L{1, 2, 4, 8, 16};
  const std::vector<double> y(L.size(), 0.95);
  const auto f = rb_fit(L, y, {.fixed_asymptote = 0.5});
  EXPECT_NEAR(f.alpha, 1.0, 1e-9);
  EXPECT_NEAR(f.f_clifford, 1.0, 1e-9);
  EXPECT_NEAR(f.f_native, 1.0, 1e-9);
  EXPECT_TRUE(f.physical);
}

TEST(Rb, CliffordToNativeConversion) {
  const std::vector<double> L{1, 2, 4, 8, 16, 32};
  const double alpha = 1.0 - 2.0 * (1.0 - 0.99936);
  std::vector<double> y;
  for (double l : L) y.push_back(0.5 * std::pow(alpha, l) + 0.5);
  const auto f = rb_fit(L, y, {.fixed_asymptote = 0.5});
  EXPECT_NEAR(f.f_clifford, 0.99936, 1e-10);
  EXPECT_NEAR(f.f_native, 1.0 - (1.0 - 0.99936) / 3.217, 1e-10);
  EXPECT_NEAR(f.f_native * 100.0, 99.980, 0.0005);
}

TEST(Rb, FitNeedsFourLengths) {
  EXPECT_THROW(rb_fit({1, 2, 4}, {0.9, 0.8, 0.7}), FitError);
  EXPECT_THROW(rb_fit({1, 1, 2, 2, 4}, {0.9, 0.9, 0.8, 0.8, 0.7}), FitError);
  EXPECT_THROW(rb_fit({1, 2, 4, 8}, {0.9, 0.8}), ValidationError);
}

TEST(Rb, GrowingSignalIsFlaggedUnphysical) {
  const std::vector<double> L{1, 2, 4, 8, 16};
  std::vector<double> y;
  for (double l : L) y.push_back(0.5 + 0.01 * std::pow(1.05, l));
  const auto f = rb_fit(L, y, {.fixed_asymptote = 0.5});
  EXPECT_FALSE(f.physical);
  EXPECT_FALSE(f.fit.note.empty());
}

TEST(Rb, RunIsReproducibleAndBounded) {
  RbExperiment e;
  e.lengths = {1, 8, 64};
  e.randomizations = 5;
  e.shots = 100;
  const auto a = run_rb(e, 9);
  const auto b = run_rb(e, 9);
  EXPECT_EQ(a.counts, b.counts);
  for (std::size_t i = 0; i < a.counts.size(); ++i) {
    EXPECT_EQ(a.counts[i].size(), 5u);
    for (long c : a.counts[i]) {
      EXPECT_GE(c, 0);
      EXPECT_LE(c, 100);
    }
    EXPECT_GE(a.sem_p[i], 0.0);
  }
}
