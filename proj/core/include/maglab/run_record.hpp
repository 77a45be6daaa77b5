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

#include "maglab/common.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace maglab::virtlab {

enum class RunKind { Spectroscopy, Rabi, Ramsey, Hahn, RB };

const char* kind_name(RunKind k);
RunKind parse_kind(const std::string& s);

/// Raw shot data of one virtual experiment.
///
/// `sweep` holds the swept variable in SI units (Hz for spectroscopy, s for
/// Rabi/Ramsey/Hahn, Clifford count for RB). `counts[i]` is the number of
/// blockaded shots out of `shots` at sweep point i.
struct RunRecord {
  std::uint64_t id = 0;
  RunKind kind = RunKind::Spectroscopy;
  StagePosition commanded;
  StagePosition true_pos;
  std::vector<double> sweep;
  std::vector<long> counts;
  long shots = 0;
  std::uint64_t seed = 0;
  std::string timestamp;
  std::string scenario;
  /// Experiment parameters needed to re-fit the trace (pulse duration, detuning, ...).
  nlohmann::json params = nlohmann::json::object();

  double p(std::size_t i) const { return static_cast<double>(counts[i]) / static_cast<double>(shots); }
  std::vector<double> probabilities() const;
  void validate() const;
};

nlohmann::json to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

/// Trace CSV: header `sweep_value,counts,shots,p_blockade`, LF endings.
void write_trace_csv(const std::filesystem::path& path, const RunRecord& r);
std::string trace_csv(const RunRecord& r);

struct TraceRow {
  double sweep_value;
  long counts;
  long shots;
  double p_blockade;
};
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);

/// Shortest decimal text that round-trips a double.
std::string format_double(double v);

std::string iso8601_utc_now();

}  // namespace maglab::virtlab
