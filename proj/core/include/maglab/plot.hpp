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

#include "maglab/run_record.hpp"

#include <string>
#include <vector>

namespace maglab::labd {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  /// Draw markers instead of a polyline.
  bool markers = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  int width = 720;
  int height = 440;
};

/// Self-contained SVG line/scatter plot with linear axes and nice ticks.
std::string render_svg(const PlotSpec& spec);

/// Blockade probability versus the swept variable, x scaled to MHz or us.
PlotSpec trace_plot(const virtlab::RunRecord& r);

/// "Nice" tick positions covering [lo, hi], about `target` of them.
std::vector<double> nice_ticks(double lo, double hi, int target = 6);

}  // namespace maglab::labd
