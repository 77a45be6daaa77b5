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

#include "maglab/archive.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace maglab::labd {

namespace fs = std::filesystem;
using nlohmann::json;

RunStore::RunStore(fs::path data_dir) : data_dir_(std::move(data_dir)) {}

std::string RunStore::payload_name(std::uint64_t id) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "payloads/run-%08llu.json", static_cast<unsigned long long>(id));
  return buf;
}

std::string RunStore::save(const virtlab::RunRecord& r) const {
  const std::string rel = payload_name(r.id);
  const fs::path full = data_dir_ / rel;
  fs::create_directories(full.parent_path());
  const fs::path tmp = full.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << virtlab::to_json(r).dump() << '\n';
    out.flush();
    if (!out) throw LogWriteError("cannot write payload " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, full, ec);
  if (ec) throw LogWriteError("cannot move payload into place: " + ec.message());
  return rel;
}

bool RunStore::contains(std::uint64_t id) const { return fs::is_regular_file(data_dir_ / payload_name(id)); }

virtlab::RunRecord RunStore::load(std::uint64_t id) const {
  const fs::path p = data_dir_ / payload_name(id);
  std::ifstream in(p, std::ios::binary);
  if (!in) throw NotFoundError("run " + std::to_string(id) + " not found in " + data_dir_.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return virtlab::record_from_json(json::parse(ss.str()));
}

std::vector<std::uint64_t> RunStore::ids() const {
  std::vector<std::uint64_t> out;
  const fs::path dir = data_dir_ / "payloads";
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string n = e.path().filename().string();
    unsigned long long id = 0;
    char tail[8] = {};
    if (std::sscanf(n.c_str(), "run-%llu.%5s", &id, tail) == 2 && std::string(tail) == "json") out.push_back(id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::uint64_t RunStore::max_id() const {
  const auto v = ids();
  return v.empty() ? 0 : v.back();
}

void RunStore::export_csv(std::uint64_t id, const fs::path& out) const { virtlab::write_trace_csv(out, load(id)); }

Archive::Archive(fs::path data_dir, fs::path run_log, bool fsync)
    : store_(std::move(data_dir)), log_(std::make_unique<RunLog>(std::move(run_log), RunLog::Options{fsync})) {
  next_id_ = store_.max_id() + 1;
}

Archive::Archive(const LabConfig& config) : Archive(config.data_dir, config.run_log, config.fsync) {}

std::uint64_t Archive::record(virtlab::RunRecord& r, json extra) {
  if (log_->read_only()) throw LogWriteError("run log is read-only: " + log_->error());
  if (r.id == 0) r.id = reserve_run_id();
  LogEntry e;
  e.kind = virtlab::kind_name(r.kind);
  e.position = r.commanded;
  e.seed = r.seed;
  e.payload_path = store_.save(r);
  e.extra = std::move(extra);
  e.extra["run_id"] = r.id;
  if (!r.scenario.empty()) e.extra["scenario"] = r.scenario;
  return log_->append(std::move(e));
}

std::uint64_t Archive::note(const std::string& kind, const StagePosition& position, json extra, std::uint64_t seed) {
  LogEntry e;
  e.kind = kind;
  e.position = position;
  e.seed = seed;
  e.extra = std::move(extra);
  return log_->append(std::move(e));
}

virtlab::RunObserver Archive::observer() {
  return [this](virtlab::RunRecord& r) { record(r); };
}

}  // namespace maglab::labd
