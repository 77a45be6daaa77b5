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

#include "maglab/service.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

namespace maglab::labd {

/// HTTP + WebSocket front end of a LabService.
///
///   POST /api                          request envelope, JSON response
///   GET  /api/state                    shorthand for get_state
///   GET  /api/health                   liveness
///   GET  /api/runs/<id>/trace.csv      trace export
///   GET  /ws/streams/<id>[?from=N]     WebSocket: replay events from seq N, then
///                                      follow live until done/error
///
/// One thread per connection. Binds to loopback unless configured otherwise.
class HttpServer {
 public:
  /// Port 0 picks a free port; see port() after start().
  HttpServer(LabService& service, std::string host, unsigned short port);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  void start();
  void stop();
  unsigned short port() const;
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace maglab::labd
