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

#include "maglab/config.hpp"
#include "maglab/server.hpp"
#include "maglab/service.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <optional>
#include <pthread.h>
#include <thread>

using namespace maglab;

int main(int argc, char** argv) {
  CLI::App app{"labd: virtual spin-qubit lab service"};
  app.require_subcommand(1);
  auto* serve = app.add_subcommand("serve", "Serve the HTTP/WebSocket API");
  std::string config_path;
  int port = -1;
  std::string host;
  serve->add_option("--config", config_path, "Config file (default: $MAGLAB_CONFIG, ./maglab.json)");
  serve->add_option("--port", port, "TCP port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "Bind address (default from config, loopback)");
  CLI11_PARSE(app, argc, argv);

  // Block termination signals in every thread; the main thread waits for them.
  sigset_t sigs;
  sigemptyset(&sigs);
  sigaddset(&sigs, SIGINT);
  sigaddset(&sigs, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

  try {
    std::string source;
    std::optional<std::filesystem::path> path;
    if (!config_path.empty()) path = config_path;
    LabConfig cfg = resolve_config(path, &source);
    if (port >= 0) cfg.server.port = port;
    if (!host.empty()) cfg.server.host = host;

    labd::LabService service(cfg);
    labd::HttpServer server(service, cfg.server.host, static_cast<unsigned short>(cfg.server.port));
    server.start();
    std::cout << "labd listening on http://" << cfg.server.host << ':' << server.port() << " (config: " << source
              << ", run log: " << cfg.run_log.string() << ")" << std::endl;
    if (service.read_only()) std::cerr << "warning: run log not writable, serving read-only" << std::endl;

    int sig = 0;
    sigwait(&sigs, &sig);
    std::cout << "labd: signal " << sig << ", shutting down" << std::endl;
    server.stop();
    service.drain();
  } catch (const std::exception& e) {
    std::cerr << "labd: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
