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

#include "maglab/runlog.hpp"

#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace maglab::labd {

namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const LogEntry& e) {
  json j = e.extra.is_object() ? e.extra : json::object();
  j["seq"] = e.seq;
  j["iso8601_utc"] = e.iso8601_utc;
  j["kind"] = e.kind;
  j["position"] = {{"x", e.position.x}, {"y", e.position.y}, {"z", e.position.z}};
  j["seed"] = e.seed;
  j["payload_path"] = e.payload_path ? json(*e.payload_path) : json(nullptr);
  return j;
}

LogEntry log_entry_from_json(const json& j) {
  LogEntry e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.iso8601_utc = j.at("iso8601_utc").get<std::string>();
  e.kind = j.at("kind").get<std::string>();
  const auto& p = j.at("position");
  e.position = {p.at("x").get<double>(), p.at("y").get<double>(), p.at("z").get<double>()};
  e.seed = j.at("seed").get<std::uint64_t>();
  if (!j.at("payload_path").is_null()) e.payload_path = j.at("payload_path").get<std::string>();
  for (const auto& [k, v] : j.items())
    if (k != "seq" && k != "iso8601_utc" && k != "kind" && k != "position" && k != "seed" && k != "payload_path")
      e.extra[k] = v;
  return e;
}

LogReadResult read_run_log(const fs::path& path) {
  LogReadResult out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();
  std::size_t pos = 0;
  std::uint64_t line_no = 0;
  while (pos < data.size()) {
    const std::size_t nl = data.find('\n', pos);
    ++line_no;
    const bool last = nl == std::string::npos || nl + 1 == data.size();
    const std::string line = data.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    std::optional<LogEntry> e;
    try {
      if (nl != std::string::npos) e = log_entry_from_json(json::parse(line));
    } catch (const std::exception&) {
    }
    if (!e) {
      if (last) {
        out.truncated_tail = true;
        break;
      }
      throw ValidationError("run log " + path.string() + " line " + std::to_string(line_no) + " is corrupt");
    }
    if (!out.entries.empty() && e->seq <= out.entries.back().seq)
      throw ValidationError("run log " + path.string() + " line " + std::to_string(line_no) + " breaks seq order");
    out.entries.push_back(std::move(*e));
    pos = nl + 1;
    out.valid_bytes = pos;
  }
  return out;
}

RunLog::RunLog(fs::path path) : RunLog(std::move(path), Options{}) {}

RunLog::RunLog(fs::path path, Options opts) : path_(std::move(path)), opts_(opts) {
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  if (fs::is_regular_file(path_)) {
    const auto r = read_run_log(path_);
    if (!r.entries.empty()) next_seq_ = r.entries.back().seq + 1;
    if (r.truncated_tail) {
      fs::resize_file(path_, r.valid_bytes);
      recovered_tail_ = true;
    }
  }
  fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    read_only_ = true;
    error_ = "cannot open run log " + path_.string() + ": " + std::strerror(errno);
  }
}

RunLog::~RunLog() {
  if (fd_ >= 0) ::close(fd_);
}

std::uint64_t RunLog::append(LogEntry e) {
  std::lock_guard lk(mu_);
  if (read_only_) throw LogWriteError("run log is read-only: " + error_);
  e.seq = next_seq_;
  if (e.iso8601_utc.empty()) e.iso8601_utc = virtlab::iso8601_utc_now();
  const std::string line = to_json(e).dump() + "\n";
  std::size_t done = 0;
  while (done < line.size()) {
    const ssize_t n = ::write(fd_, line.data() + done, line.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      read_only_ = true;
      error_ = "write to " + path_.string() + " failed: " + std::strerror(errno);
      throw LogWriteError(error_);
    }
    done += static_cast<std::size_t>(n);
  }
  if (opts_.fsync && ::fsync(fd_) != 0 && errno != EINVAL) {
    read_only_ = true;
    error_ = "fsync of " + path_.string() + " failed: " + std::strerror(errno);
    throw LogWriteError(error_);
  }
  return next_seq_++;
}

bool RunLog::read_only() const {
  std::lock_guard lk(mu_);
  return read_only_;
}

std::string RunLog::error() const {
  std::lock_guard lk(mu_);
  return error_;
}

std::uint64_t RunLog::next_seq() const {
  std::lock_guard lk(mu_);
  return next_seq_;
}

}  // namespace maglab::labd
