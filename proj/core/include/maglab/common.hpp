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

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>

namespace maglab {

// Error taxonomy shared by every module. All are std::runtime_error so the
// service layer can map them onto wire error codes without RTTI games.
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MotionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotFoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// A search range that does not enclose an interior minimum.
struct BracketError : CalibrationError {
  using CalibrationError::CalibrationError;
};

/// Magnetic field in tesla, lab frame (z along the fridge axis, x close to
/// the heterostructure growth direction).
struct FieldVector {
  double bx = 0.0;
  double by = 0.0;
  double bz = 0.0;

  static FieldVector from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
  Eigen::Vector3d vec() const { return {bx, by, bz}; }
  double magnitude() const { return std::sqrt(bx * bx + by * by + bz * bz); }
  bool finite() const { return std::isfinite(bx) && std::isfinite(by) && std::isfinite(bz); }

  friend FieldVector operator+(const FieldVector& a, const FieldVector& b) {
    return {a.bx + b.bx, a.by + b.by, a.bz + b.bz};
  }
  friend FieldVector operator*(double s, const FieldVector& a) {
    return {s * a.bx, s * a.by, s * a.bz};
  }
  friend bool operator==(const FieldVector&, const FieldVector&) = default;
};

/// Position in millimetres relative to the sample at the origin.
struct StagePosition {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static StagePosition from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
  Eigen::Vector3d vec() const { return {x, y, z}; }
  double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  double& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }

  friend bool operator==(const StagePosition&, const StagePosition&) = default;
};

enum class Axis { X = 0, Y = 1, Z = 2 };

inline int axis_index(Axis a) { return static_cast<int>(a); }
Axis parse_axis(const std::string& s);
const char* axis_name(Axis a);

constexpr double kPi = 3.14159265358979323846;
inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

}  // namespace maglab
