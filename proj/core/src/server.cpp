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

#include "maglab/server.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <charconv>
#include <condition_variable>
#include <list>
#include <mutex>
#include <set>
#include <sys/socket.h>
#include <thread>

namespace maglab::labd {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

Response make_response(const Request& req, http::status status, std::string body, const char* type) {
  Response res{status, req.version()};
  res.set(http::field::server, "labd");
  res.set(http::field::content_type, type);
  res.set(http::field::access_control_allow_origin, "*");
  res.set(http::field::access_control_allow_headers, "Content-Type");
  res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
  res.keep_alive(req.keep_alive());
  res.body() = std::move(body);
  res.prepare_payload();
  return res;
}

Response json_response(const Request& req, int status, const json& body) {
  return make_response(req, static_cast<http::status>(status), body.dump(), "application/json");
}

Response error_response(const Request& req, int status, const std::string& code, const std::string& msg) {
  return json_response(req, status,
                       {{"id", nullptr}, {"ok", false}, {"error", {{"status", status}, {"code", code}, {"message", msg}}}});
}

std::optional<std::uint64_t> parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

struct Target {
  std::string path;
  std::string query;
};

Target split_target(std::string_view t) {
  const auto q = t.find('?');
  if (q == std::string_view::npos) return {std::string(t), {}};
  return {std::string(t.substr(0, q)), std::string(t.substr(q + 1))};
}

std::optional<std::string> query_param(const std::string& query, const std::string& key) {
  std::size_t pos = 0;
  while (pos <= query.size()) {
    const auto amp = query.find('&', pos);
    const std::string kv = query.substr(pos, amp == std::string::npos ? std::string::npos : amp - pos);
    const auto eq = kv.find('=');
    if (kv.substr(0, eq) == key) return eq == std::string::npos ? std::string() : kv.substr(eq + 1);
    if (amp == std::string::npos) break;
    pos = amp + 1;
  }
  return std::nullopt;
}

/// "/prefix/<id>/suffix" -> id
std::optional<std::uint64_t> path_id(const std::string& path, std::string_view prefix, std::string_view suffix) {
  if (path.size() <= prefix.size() + suffix.size()) return std::nullopt;
  if (path.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
  if (path.compare(path.size() - suffix.size(), suffix.size(), suffix) != 0) return std::nullopt;
  return parse_u64(std::string_view(path).substr(prefix.size(), path.size() - prefix.size() - suffix.size()));
}

}  // namespace

struct HttpServer::Impl {
  LabService& svc;
  std::string host;
  unsigned short port;
  net::io_context ioc;
  std::unique_ptr<tcp::acceptor> acceptor;
  std::thread accept_thread;
  std::atomic<bool> stopping{false};
  bool started = false;

  std::mutex mu;
  std::condition_variable stopped_cv;
  bool stopped = false;
  struct Conn {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };
  std::list<Conn> conns;
  std::set<int> fds;

  Impl(LabService& s, std::string h, unsigned short p) : svc(s), host(std::move(h)), port(p) {}

  void do_accept() {
    acceptor->async_accept([this](beast::error_code ec, tcp::socket sock) {
      if (ec || stopping) return;
      spawn(std::move(sock));
      do_accept();
    });
  }

  void spawn(tcp::socket sock) {
    std::lock_guard lk(mu);
    for (auto it = conns.begin(); it != conns.end();) {
      if (*it->done) {
        it->thread.join();
        it = conns.erase(it);
      } else {
        ++it;
      }
    }
    auto done = std::make_shared<std::atomic<bool>>(false);
    const int fd = sock.native_handle();
    fds.insert(fd);
    conns.push_back({std::thread([this, s = std::move(sock), done, fd]() mutable {
                       session(std::move(s));
                       {
                         std::lock_guard lk2(mu);
                         fds.erase(fd);
                       }
                       *done = true;
                     }),
                     done});
  }

  Response route(const Request& req) {
    const Target t = split_target(std::string_view(req.target().data(), req.target().size()));
    if (req.method() == http::verb::options) return make_response(req, http::status::no_content, "", "text/plain");
    if (t.path == "/api") {
      if (req.method() != http::verb::post) return error_response(req, 405, "method_not_allowed", "use POST");
      const json resp = svc.handle_text(req.body());
      const int status = resp.value("ok", false) ? 200 : resp.at("error").at("status").get<int>();
      return json_response(req, status, resp);
    }
    if (req.method() != http::verb::get) return error_response(req, 405, "method_not_allowed", "use GET");
    if (t.path == "/api/health") return json_response(req, 200, {{"ok", true}, {"read_only", svc.read_only()}});
    if (t.path == "/api/state") {
      const json resp = svc.handle({{"verb", "get_state"}});
      return json_response(req, 200, resp);
    }
    if (auto id = path_id(t.path, "/api/runs/", "/trace.csv")) {
      try {
        const auto rec = svc.archive().store().load(*id);
        return make_response(req, http::status::ok, virtlab::trace_csv(rec), "text/csv; charset=utf-8");
      } catch (const NotFoundError& e) {
        return error_response(req, 404, "not_found", e.what());
      }
    }
    return error_response(req, 404, "not_found", "no route for " + t.path);
  }

  void ws_session(tcp::socket sock, const Request& req, std::shared_ptr<EventStream> stream, std::uint64_t from) {
    websocket::stream<tcp::socket> ws(std::move(sock));
    beast::error_code ec;
    ws.set_option(websocket::stream_base::decorator(
        [](websocket::response_type& res) { res.set(http::field::server, "labd"); }));
    ws.accept(req, ec);
    if (ec) return;
    ws.text(true);
    std::uint64_t next = from;
    while (!stopping) {
      const auto events = stream->read(next, std::chrono::milliseconds(200));
      for (const auto& e : events) {
        ws.write(net::buffer(e.to_json().dump()), ec);
        if (ec) return;
        next = e.seq + 1;
        if (e.terminal()) {
          ws.close(websocket::close_code::normal, ec);
          return;
        }
      }
    }
    ws.close(websocket::close_code::going_away, ec);
  }

  void session(tcp::socket sock) {
    beast::flat_buffer buf;
    beast::error_code ec;
    for (;;) {
      http::request_parser<http::string_body> parser;
      parser.body_limit(4 * 1024 * 1024);
      http::read(sock, buf, parser, ec);
      if (ec) break;
      Request req = parser.release();
      if (websocket::is_upgrade(req)) {
        const Target t = split_target(std::string_view(req.target().data(), req.target().size()));
        const auto id = path_id(t.path, "/ws/streams/", "");
        std::shared_ptr<EventStream> stream = id ? svc.stream(*id) : nullptr;
        std::uint64_t from = 0;
        if (auto f = query_param(t.query, "from")) from = parse_u64(*f).value_or(0);
        if (!stream) {
          http::write(sock, error_response(req, 404, "not_found", "no stream at " + t.path), ec);
          break;
        }
        ws_session(std::move(sock), req, std::move(stream), from);
        return;
      }
      Response res = route(req);
      http::write(sock, res, ec);
      if (ec || !res.keep_alive()) break;
    }
    sock.shutdown(tcp::socket::shutdown_send, ec);
  }
};

HttpServer::HttpServer(LabService& service, std::string host, unsigned short port)
    : impl_(std::make_unique<Impl>(service, std::move(host), port)) {}

HttpServer::~HttpServer() { stop(); }

void HttpServer::start() {
  auto& m = *impl_;
  if (m.started) return;
  const auto addr = net::ip::make_address(m.host);
  m.acceptor = std::make_unique<tcp::acceptor>(m.ioc);
  const tcp::endpoint ep{addr, m.port};
  m.acceptor->open(ep.protocol());
  m.acceptor->set_option(net::socket_base::reuse_address(true));
  m.acceptor->bind(ep);
  m.acceptor->listen(net::socket_base::max_listen_connections);
  m.port = m.acceptor->local_endpoint().port();
  m.do_accept();
  m.accept_thread = std::thread([&m] { m.ioc.run(); });
  m.started = true;
}

unsigned short HttpServer::port() const { return impl_->port; }

void HttpServer::stop() {
  auto& m = *impl_;
  if (!m.started || m.stopping.exchange(true)) return;
  net::post(m.ioc, [&m] {
    beast::error_code ec;
    m.acceptor->close(ec);
  });
  m.ioc.stop();
  if (m.accept_thread.joinable()) m.accept_thread.join();
  std::list<Impl::Conn> conns;
  {
    std::lock_guard lk(m.mu);
    for (int fd : m.fds) ::shutdown(fd, SHUT_RDWR);
    conns.swap(m.conns);
  }
  for (auto& c : conns) c.thread.join();
  {
    std::lock_guard lk(m.mu);
    m.stopped = true;
  }
  m.stopped_cv.notify_all();
}

void HttpServer::wait() {
  auto& m = *impl_;
  std::unique_lock lk(m.mu);
  m.stopped_cv.wait(lk, [&] { return m.stopped; });
}

}  // namespace maglab::labd
