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

#include "maglab/archive.hpp"
#include "maglab/config.hpp"
#include "maglab/lab.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace maglab::labd {

/// Error reported to a client: HTTP-like status plus a short machine code.
struct ApiError : std::runtime_error {
  ApiError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status(status), code(std::move(code)) {}
  int status;
  std::string code;
};

/// Maps exceptions from the core onto ApiError.
ApiError to_api_error(const std::exception& e);

struct StreamEvent {
  std::uint64_t stream_id = 0;
  /// Gapless, starting at 0, per stream.
  std::uint64_t seq = 0;
  /// point, probe, record, fit, done, error
  std::string type;
  nlohmann::json data;

  nlohmann::json to_json() const;
  bool terminal() const { return type == "done" || type == "error"; }
};

/// Ordered, replayable event history of one long-running request.
class EventStream {
 public:
  EventStream(std::uint64_t id, std::string verb) : id_(id), verb_(std::move(verb)) {}

  std::uint64_t id() const { return id_; }
  const std::string& verb() const { return verb_; }
  void publish(const std::string& type, nlohmann::json data);
  /// Events with seq >= from, waiting up to `timeout` when none are ready.
  std::vector<StreamEvent> read(std::uint64_t from, std::chrono::milliseconds timeout) const;
  bool finished() const;
  std::size_t size() const;

 private:
  std::uint64_t id_;
  std::string verb_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::vector<StreamEvent> events_;
  bool finished_ = false;
};

/// Single-threaded FIFO executor. Tasks run in submission order.
class Executor {
 public:
  Executor();
  ~Executor();
  Executor(const Executor&) = delete;
  Executor& operator=(const Executor&) = delete;

  using Task = std::function<void(std::uint64_t ticket)>;

  /// Queues `task` and returns its ticket (submission order, from 1). The
  /// task receives the same ticket.
  std::uint64_t submit(Task task);
  std::size_t depth() const;
  /// Blocks until everything submitted so far has run.
  void drain();

 private:
  void loop();

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<std::pair<std::uint64_t, Task>> queue_;
  std::uint64_t next_ticket_ = 1;
  bool busy_ = false;
  bool stop_ = false;
  std::thread thread_;
};

struct ServiceOptions {
  /// Streams kept for replay; older finished streams are dropped.
  std::size_t max_streams = 256;
};

/// The lab behind the API. Requests are JSON messages
///   {"id": ..., "verb": "...", "payload": {...}}
/// answered with
///   {"id": ..., "ok": true, "result": {...}, "read_only": false}
///   {"id": ..., "ok": false, "error": {"status": 400, "code": "...", "message": "..."}, ...}
///
/// Every mutation runs on one FIFO executor and is logged before the
/// response is produced. Long verbs (run_experiment, run_scenario,
/// find_sweet_spot) answer at once with a stream id and publish progress to
/// that stream.
class LabService {
 public:
  explicit LabService(LabConfig config, ServiceOptions opts = {});
  ~LabService();
  LabService(const LabService&) = delete;
  LabService& operator=(const LabService&) = delete;

  /// Never throws.
  nlohmann::json handle(const nlohmann::json& request);
  /// Parses `body` as a request; malformed JSON yields a 400 response.
  nlohmann::json handle_text(const std::string& body);

  std::shared_ptr<EventStream> stream(std::uint64_t id) const;
  nlohmann::json snapshot() const;
  bool read_only() const;
  const LabConfig& config() const { return config_; }
  Archive& archive() { return archive_; }
  /// Waits for every queued task.
  void drain() { exec_.drain(); }

 private:
  using Handler = nlohmann::json (LabService::*)(const nlohmann::json&);

  nlohmann::json get_state(const nlohmann::json& p);
  nlohmann::json move_stage(const nlohmann::json& p);
  nlohmann::json set_solenoid(const nlohmann::json& p);
  nlohmann::json set_compensation(const nlohmann::json& p);
  nlohmann::json run_experiment(const nlohmann::json& p);
  nlohmann::json run_scenario(const nlohmann::json& p);
  nlohmann::json find_sweet_spot(const nlohmann::json& p);
  nlohmann::json list_runs(const nlohmann::json& p);
  nlohmann::json get_run(const nlohmann::json& p);
  nlohmann::json list_scenarios(const nlohmann::json& p);

  /// Runs `fn` on the executor and waits for its result.
  nlohmann::json on_executor(std::function<nlohmann::json(std::uint64_t ticket)> fn);
  std::shared_ptr<EventStream> open_stream(const std::string& verb);
  void ensure_writable() const;
  void refresh_snapshot();
  nlohmann::json state_json() const;

  LabConfig config_;
  ServiceOptions opts_;
  Archive archive_;
  virtlab::Lab lab_;
  std::map<std::string, Handler> handlers_;
  // Executor-thread state: the id the next emitted record takes and the
  // stream that hears about it.
  std::uint64_t pending_run_id_ = 0;
  std::shared_ptr<EventStream> current_stream_;

  mutable std::mutex snap_mu_;
  nlohmann::json snapshot_;

  mutable std::mutex streams_mu_;
  std::map<std::uint64_t, std::shared_ptr<EventStream>> streams_;
  std::uint64_t next_stream_ = 1;

  // Last member: stops (and joins) before the lab it operates on goes away.
  Executor exec_;
};

}  // namespace maglab::labd
