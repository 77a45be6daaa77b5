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

#include "maglab/calibrate.hpp"
#include "maglab/magnetics.hpp"
#include "maglab/spinmodel.hpp"
#include "maglab/experiments.hpp"

#include <Eigen/Geometry>

#include <random>
#include <vector>

namespace maglab::tst {

// Brute-force reference: the block split into point dipoles on a regular
// grid, each carrying the moment of its cell.
inline Eigen::Vector3d dipole_grid_field(const magnetics::MagnetSpec& spec, const Eigen::Vector3d& point, int n) {
  const Eigen::Vector3d h = spec.dims_mm / n;
  const double dv = h.prod();
  const Eigen::Vector3d m = spec.orientation * spec.magnetization_axis;
  const Eigen::Vector3d c = spec.centre_mm();
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const Eigen::Vector3d local{(i + 0.5) * h.x() - spec.dims_mm.x() / 2,
                                    (j + 0.5) * h.y() - spec.dims_mm.y() / 2,
                                    (k + 0.5) * h.z() - spec.dims_mm.z() / 2};
        const Eigen::Vector3d r = point - (c + spec.orientation * local);
        const double r2 = r.squaredNorm();
        const double r1 = std::sqrt(r2);
        const double inv3 = 1.0 / (r2 * r1);
        sum += (3.0 * m.dot(r) / r2 * r - m) * inv3;
      }
  return spec.remanence_t * dv / (4.0 * kPi) * sum;
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  return q.normalized().toRotationMatrix();
}

// Noisy Larmor map over three planes near the magnet so every field
// component is well sampled.
inline std::vector<calibrate::MapPoint> synthetic_gtensor_map(const spin::GTensor& g, const calibrate::FieldModel& fm,
                                                              double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, noise);
  std::vector<calibrate::MapPoint> map;
  auto add = [&](const StagePosition& p) { map.push_back({p, spin::larmor_frequency(g, fm.at(p)) * (1.0 + n(rng))}); };
  for (double z : virtlab::linspace(-160.0, -300.0, 8))
    for (double x : virtlab::linspace(-150.0, 150.0, 11)) add({x, 0.0, z});
  for (double y : virtlab::linspace(-150.0, 150.0, 11))
    for (double x : virtlab::linspace(-150.0, 150.0, 11)) add({x, y, -160.0});
  for (double z : virtlab::linspace(-160.0, -300.0, 8))
    for (double y : virtlab::linspace(-150.0, 150.0, 11)) add({0.0, y, z});
  return map;
}

}  // namespace maglab::tst
