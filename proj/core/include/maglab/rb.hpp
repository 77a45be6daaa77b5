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

#include "maglab/fitting.hpp"

#include <Eigen/Core>

#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace maglab::virtlab {

using Matrix2c = Eigen::Matrix2cd;

enum class NativeGate { X90, Y90 };

/// Average native gates per Clifford used to convert Clifford to native-gate
/// fidelity.
inline constexpr double kNativeGatesPerClifford = 3.217;

Matrix2c native_unitary(NativeGate g);

struct CliffordElement {
  std::string family;
  /// Native pulses in temporal order (first applied first).
  std::vector<NativeGate> sequence;
  /// Product of the pulses, later pulses multiplied on the left.
  Matrix2c unitary;

  std::string label() const;
};

/// The 24 single-qubit Cliffords as X90/Y90 pulse sequences, in table order.
const std::vector<CliffordElement>& clifford_table();

/// Mean number of native pulses over the table.
double table_mean_native_gates();

/// |tr(A^dagger B)| / 2 == 1 up to tolerance.
bool equal_up_to_phase(const Matrix2c& a, const Matrix2c& b, double tol = 1e-10);

/// Index of the table element equal to `u` up to global phase.
std::optional<std::size_t> find_clifford(const Matrix2c& u);

/// Index of the inverse of table element i.
std::size_t clifford_inverse(std::size_t i);

struct RbSequence {
  /// Sampled Clifford indices followed by the recovery Clifford.
  std::vector<std::size_t> cliffords;

  std::vector<NativeGate> native_gates() const;
  std::size_t recovery() const { return cliffords.back(); }
};

RbSequence rb_generate(std::uint64_t seed, int n_clifford);

struct RbShot {
  /// Exact probability of returning to the initial state.
  double survival;
  /// Blockade probability after visibility/baseline mapping.
  double p_blockade;
  long counts;
};

/// Density-matrix evolution with a depolarizing channel of strength `p_dep`
/// after every native pulse; counts are binomially sampled from
/// baseline + visibility * survival.
RbShot rb_simulate(const RbSequence& seq, double p_dep, long shots, double visibility, std::mt19937_64& rng,
                   double baseline = 0.0);

/// Depolarizing strength whose average gate fidelity is `f_native`.
double depolarizing_from_fidelity(double f_native);

struct RbFitOptions {
  /// Fix the asymptote B (fully mixed signal level) instead of fitting it.
  std::optional<double> fixed_asymptote;
  std::vector<double> sigmas;
  double native_gates_per_clifford = kNativeGatesPerClifford;
};

struct RbFit {
  FitResult fit;  // A, alpha, B
  double alpha = 1.0;
  double alpha_sigma = 0.0;
  double f_clifford = 1.0;
  double f_clifford_sigma = 0.0;
  double f_native = 1.0;
  double f_native_sigma = 0.0;
  bool physical = true;
};

/// Fits P = A alpha^N + B and converts alpha -> F_C = 1 - (1 - alpha)/2 ->
/// F_N = 1 - (1 - F_C)/n_C.
RbFit rb_fit(const std::vector<double>& lengths, const std::vector<double>& survivals, const RbFitOptions& opts = {});

struct RbExperiment {
  std::vector<int> lengths;
  int randomizations = 20;
  long shots = 1000;
  double p_dep = 4e-4;
  double visibility = 1.0;
  double baseline = 0.0;
};

struct RbData {
  std::vector<double> lengths;
  std::vector<double> mean_p;
  std::vector<double> sem_p;
  /// Per length, per randomization blockade counts.
  std::vector<std::vector<long>> counts;
};

RbData run_rb(const RbExperiment& exp, std::uint64_t seed);

}  // namespace maglab::virtlab
