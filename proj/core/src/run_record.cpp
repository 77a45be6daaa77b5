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

#include "maglab/run_record.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

namespace maglab::virtlab {

const char* kind_name(RunKind k) {
  switch (k) {
    case RunKind::Spectroscopy: return "spectroscopy";
    case RunKind::Rabi: return "rabi";
    case RunKind::Ramsey: return "ramsey";
    case RunKind::Hahn: return "hahn";
    case RunKind::RB: return "rb";
  }
  return "?";
}

RunKind parse_kind(const std::string& s) {
  if (s == "spectroscopy") return RunKind::Spectroscopy;
  if (s == "rabi") return RunKind::Rabi;
  if (s == "ramsey") return RunKind::Ramsey;
  if (s == "hahn") return RunKind::Hahn;
  if (s == "rb") return RunKind::RB;
  throw ValidationError("unknown experiment kind '" + s + "'");
}

std::vector<double> RunRecord::probabilities() const {
  std::vector<double> out(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = p(i);
  return out;
}

void RunRecord::validate() const {
  if (shots < 1) throw ValidationError("run record needs shots >= 1");
  if (sweep.size() != counts.size()) throw ValidationError("run record sweep/counts length mismatch");
  for (long c : counts)
    if (c < 0 || c > shots) throw ValidationError("run record counts must lie in [0, shots]");
}

namespace {
nlohmann::json pos_json(const StagePosition& p) { return nlohmann::json::array({p.x, p.y, p.z}); }
StagePosition pos_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
}  // namespace

nlohmann::json to_json(const RunRecord& r) {
  return {{"id", r.id},
          {"kind", kind_name(r.kind)},
          {"commanded", pos_json(r.commanded)},
          {"true_pos", pos_json(r.true_pos)},
          {"sweep", r.sweep},
          {"counts", r.counts},
          {"shots", r.shots},
          {"seed", r.seed},
          {"timestamp", r.timestamp},
          {"scenario", r.scenario},
          {"params", r.params}};
}

RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.id = j.at("id").get<std::uint64_t>();
  r.kind = parse_kind(j.at("kind").get<std::string>());
  r.commanded = pos_from(j.at("commanded"));
  r.true_pos = pos_from(j.at("true_pos"));
  r.sweep = j.at("sweep").get<std::vector<double>>();
  r.counts = j.at("counts").get<std::vector<long>>();
  r.shots = j.at("shots").get<long>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.timestamp = j.value("timestamp", "");
  r.scenario = j.value("scenario", "");
  r.params = j.value("params", nlohmann::json::object());
  r.validate();
  return r;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string trace_csv(const RunRecord& r) {
  std::string out = "sweep_value,counts,shots,p_blockade\n";
  for (std::size_t i = 0; i < r.counts.size(); ++i) {
    out += format_double(r.sweep[i]);
    out += ',';
    out += std::to_string(r.counts[i]);
    out += ',';
    out += std::to_string(r.shots);
    out += ',';
    out += format_double(r.p(i));
    out += '\n';
  }
  return out;
}

void write_trace_csv(const std::filesystem::path& path, const RunRecord& r) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << trace_csv(r);
}

std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "sweep_value,counts,shots,p_blockade") throw ValidationError("unexpected trace header '" + line + "'");
  std::vector<TraceRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string a, b, c, d;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c, ',') || !std::getline(ls, d))
      throw ValidationError("malformed trace row '" + line + "'");
    rows.push_back({std::stod(a), std::stol(b), std::stol(c), std::stod(d)});
  }
  return rows;
}

std::string iso8601_utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof(out), "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

}  // namespace maglab::virtlab
