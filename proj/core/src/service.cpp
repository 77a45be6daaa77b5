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

#include "maglab/service.hpp"

#include "maglab/calibrate.hpp"
#include "maglab/fitting.hpp"
#include "maglab/rb.hpp"
#include "maglab/scenario.hpp"

#include <future>

namespace maglab::labd {

using nlohmann::json;

namespace {

constexpr long kMaxPoints = 100000;
constexpr long kMaxShots = 1000000;

json pos_json(const StagePosition& p) { return {{"x", p.x}, {"y", p.y}, {"z", p.z}}; }

json field_json(const FieldVector& b) { return {{"bx", b.bx}, {"by", b.by}, {"bz", b.bz}}; }

const json& object_payload(const json& p) {
  if (!p.is_object()) throw ValidationError("payload must be a JSON object");
  return p;
}

double number(const json& p, const char* key) {
  if (!p.contains(key)) throw ValidationError(std::string("missing required field '") + key + "'");
  const auto& v = p.at(key);
  if (!v.is_number()) throw ValidationError(std::string("field '") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ValidationError(std::string("field '") + key + "' must be finite");
  return d;
}

double number_or(const json& p, const char* key, double def) { return p.contains(key) ? number(p, key) : def; }

long count_or(const json& p, const char* key, long def, long lo, long hi) {
  if (!p.contains(key)) return def;
  const auto& v = p.at(key);
  if (!v.is_number_integer()) throw ValidationError(std::string("field '") + key + "' must be an integer");
  const long n = v.get<long>();
  if (n < lo || n > hi)
    throw ValidationError(std::string("field '") + key + "' must lie in [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "]");
  return n;
}

bool bool_field(const json& p, const char* key) {
  if (!p.contains(key) || !p.at(key).is_boolean()) throw ValidationError(std::string("field '") + key + "' must be a boolean");
  return p.at(key).get<bool>();
}

std::uint64_t id_field(const json& p, const char* key) {
  if (!p.contains(key) || !p.at(key).is_number_unsigned())
    throw ValidationError(std::string("field '") + key + "' must be a non-negative integer");
  return p.at(key).get<std::uint64_t>();
}

json fit_json(const virtlab::FitResult& f) {
  json params = json::object();
  for (const auto& p : f.params) params[p.name] = {{"value", p.value}, {"sigma", p.sigma}};
  json j = {{"converged", f.converged}, {"residual_rms", f.residual_rms}, {"params", params}};
  if (!f.note.empty()) j["note"] = f.note;
  return j;
}

json point_json(std::size_t i, double x, long counts, long shots) {
  return {{"index", i},
          {"sweep_value", x},
          {"counts", counts},
          {"shots", shots},
          {"p_blockade", static_cast<double>(counts) / static_cast<double>(shots)}};
}

}  // namespace

ApiError to_api_error(const std::exception& e) {
  if (const auto* a = dynamic_cast<const ApiError*>(&e)) return *a;
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return {400, "bad_request", e.what()};
  if (dynamic_cast<const ValidationError*>(&e)) return {400, "bad_request", e.what()};
  if (dynamic_cast<const NotFoundError*>(&e)) return {404, "not_found", e.what()};
  if (dynamic_cast<const MotionError*>(&e)) return {422, "motion_error", e.what()};
  if (dynamic_cast<const DomainError*>(&e)) return {422, "domain_error", e.what()};
  if (dynamic_cast<const BracketError*>(&e)) return {422, "bracket_error", e.what()};
  if (dynamic_cast<const CalibrationError*>(&e)) return {422, "calibration_error", e.what()};
  if (dynamic_cast<const FitError*>(&e)) return {422, "fit_error", e.what()};
  if (dynamic_cast<const LogWriteError*>(&e)) return {503, "log_write_failed", e.what()};
  return {500, "internal", e.what()};
}

// --- streams -------------------------------------------------------------------

json StreamEvent::to_json() const { return {{"stream_id", stream_id}, {"seq", seq}, {"type", type}, {"data", data}}; }

void EventStream::publish(const std::string& type, json data) {
  {
    std::lock_guard lk(mu_);
    if (finished_) return;
    StreamEvent e{id_, events_.size(), type, std::move(data)};
    finished_ = e.terminal();
    events_.push_back(std::move(e));
  }
  cv_.notify_all();
}

std::vector<StreamEvent> EventStream::read(std::uint64_t from, std::chrono::milliseconds timeout) const {
  std::unique_lock lk(mu_);
  cv_.wait_for(lk, timeout, [&] { return events_.size() > from || finished_; });
  if (from >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(from), events_.end()};
}

bool EventStream::finished() const {
  std::lock_guard lk(mu_);
  return finished_;
}

std::size_t EventStream::size() const {
  std::lock_guard lk(mu_);
  return events_.size();
}

// --- executor ------------------------------------------------------------------

Executor::Executor() : thread_([this] { loop(); }) {}

Executor::~Executor() {
  {
    std::lock_guard lk(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  thread_.join();
}

std::uint64_t Executor::submit(Task task) {
  std::uint64_t ticket;
  {
    std::lock_guard lk(mu_);
    ticket = next_ticket_++;
    queue_.emplace_back(ticket, std::move(task));
  }
  cv_.notify_one();
  return ticket;
}

std::size_t Executor::depth() const {
  std::lock_guard lk(mu_);
  return queue_.size() + (busy_ ? 1 : 0);
}

void Executor::drain() {
  std::unique_lock lk(mu_);
  idle_cv_.wait(lk, [&] { return queue_.empty() && !busy_; });
}

void Executor::loop() {
  std::unique_lock lk(mu_);
  for (;;) {
    cv_.wait(lk, [&] { return stop_ || !queue_.empty(); });
    if (queue_.empty()) return;
    auto [ticket, task] = std::move(queue_.front());
    queue_.pop_front();
    busy_ = true;
    lk.unlock();
    task(ticket);
    lk.lock();
    busy_ = false;
    if (queue_.empty()) idle_cv_.notify_all();
  }
}

// --- service -------------------------------------------------------------------

LabService::LabService(LabConfig config, ServiceOptions opts)
    : config_(std::move(config)),
      opts_(opts),
      archive_(config_),
      lab_(config_.make_world(), config_.seed, "labd") {
  lab_.set_compensation(config_.stage.compensate);
  lab_.set_observer([this](virtlab::RunRecord& r) {
    if (pending_run_id_ != 0) {
      r.id = pending_run_id_;
      pending_run_id_ = 0;
    }
    const auto seq = archive_.record(r);
    if (current_stream_)
      current_stream_->publish("record", {{"run_id", r.id}, {"kind", virtlab::kind_name(r.kind)},
                                          {"position", pos_json(r.commanded)}, {"log_seq", seq}});
  });
  handlers_ = {{"get_state", &LabService::get_state},
               {"move_stage", &LabService::move_stage},
               {"set_solenoid", &LabService::set_solenoid},
               {"set_compensation", &LabService::set_compensation},
               {"run_experiment", &LabService::run_experiment},
               {"run_scenario", &LabService::run_scenario},
               {"find_sweet_spot", &LabService::find_sweet_spot},
               {"list_runs", &LabService::list_runs},
               {"get_run", &LabService::get_run},
               {"list_scenarios", &LabService::list_scenarios}};
  refresh_snapshot();
}

LabService::~LabService() = default;

bool LabService::read_only() const { return archive_.log().read_only(); }

json LabService::handle_text(const std::string& body) {
  json req;
  try {
    req = json::parse(body);
  } catch (const std::exception& e) {
    return handle(json{{"verb", nullptr}, {"_parse_error", e.what()}});
  }
  return handle(req);
}

json LabService::handle(const json& request) {
  json resp;
  resp["id"] = request.is_object() && request.contains("id") ? request.at("id") : json(nullptr);
  try {
    if (request.is_object() && request.contains("_parse_error"))
      throw ApiError(400, "bad_request", "malformed JSON: " + request.at("_parse_error").get<std::string>());
    if (!request.is_object()) throw ApiError(400, "bad_request", "request must be a JSON object");
    require_known_keys(request, {"id", "verb", "payload"}, "request");
    if (!request.contains("verb") || !request.at("verb").is_string())
      throw ApiError(400, "bad_request", "request needs a string 'verb'");
    const std::string verb = request.at("verb").get<std::string>();
    const auto it = handlers_.find(verb);
    if (it == handlers_.end()) throw ApiError(400, "unknown_verb", "unknown verb '" + verb + "'");
    const json payload = request.contains("payload") ? request.at("payload") : json::object();
    resp["result"] = (this->*(it->second))(object_payload(payload));
    resp["ok"] = true;
  } catch (const std::exception& e) {
    const ApiError a = to_api_error(e);
    resp["ok"] = false;
    resp["error"] = {{"status", a.status}, {"code", a.code}, {"message", a.what()}};
  }
  resp["read_only"] = read_only();
  if (read_only()) resp["warning"] = "service is read-only: " + archive_.log().error();
  return resp;
}

std::shared_ptr<EventStream> LabService::stream(std::uint64_t id) const {
  std::lock_guard lk(streams_mu_);
  const auto it = streams_.find(id);
  return it == streams_.end() ? nullptr : it->second;
}

std::shared_ptr<EventStream> LabService::open_stream(const std::string& verb) {
  std::lock_guard lk(streams_mu_);
  auto s = std::make_shared<EventStream>(next_stream_++, verb);
  streams_[s->id()] = s;
  while (streams_.size() > opts_.max_streams) {
    auto victim = std::find_if(streams_.begin(), streams_.end(), [](const auto& kv) { return kv.second->finished(); });
    if (victim == streams_.end()) break;
    streams_.erase(victim);
  }
  return s;
}

void LabService::ensure_writable() const {
  if (read_only()) throw ApiError(503, "read_only", "service is read-only: " + archive_.log().error());
}

json LabService::on_executor(std::function<json(std::uint64_t)> fn) {
  auto done = std::make_shared<std::promise<json>>();
  auto fut = done->get_future();
  exec_.submit([this, fn = std::move(fn), done](std::uint64_t ticket) {
    json out;
    std::exception_ptr err;
    try {
      out = fn(ticket);
    } catch (...) {
      err = std::current_exception();
    }
    // The snapshot must reflect the change before the caller sees the reply.
    refresh_snapshot();
    if (err) done->set_exception(err);
    else done->set_value(std::move(out));
  });
  return fut.get();
}

json LabService::state_json() const {
  const auto& w = lab_.world();
  const auto& st = w.stage.state();
  const auto lp = w.larmor();
  return {{"commanded", pos_json(st.commanded)},
          {"compensation", lab_.compensation()},
          {"solenoid_t", w.solenoid.setpoint_t},
          {"b_in_mt", w.solenoid.setpoint_t * 1e3},
          {"qubit", config_.active_qubit},
          {"limits", {{"min", pos_json(StagePosition::from(st.limits.min_mm))},
                      {"max", pos_json(StagePosition::from(st.limits.max_mm))}}},
          {"event_count", st.event_count},
          {"log_next_seq", archive_.log().next_seq()},
          // Simulation truth, not observable on a real setup.
          {"diagnostics",
           {{"true_position", pos_json(st.true_pos)},
            {"backlash_accum_mm", pos_json(StagePosition::from(st.backlash_accum))},
            {"field_t", field_json(w.field())},
            {"larmor_hz", lp.f_l_hz},
            {"out_of_plane_deg", lp.theta_deg}}}};
}

void LabService::refresh_snapshot() {
  json s = state_json();
  std::lock_guard lk(snap_mu_);
  snapshot_ = std::move(s);
}

json LabService::snapshot() const {
  json s;
  {
    std::lock_guard lk(snap_mu_);
    s = snapshot_;
  }
  s["queue_depth"] = exec_.depth();
  s["read_only"] = read_only();
  return s;
}

json LabService::get_state(const json& p) {
  require_known_keys(p, {}, "get_state");
  return snapshot();
}

json LabService::move_stage(const json& p) {
  require_known_keys(p, {"x", "y", "z"}, "move_stage");
  const StagePosition target{number(p, "x"), number(p, "y"), number(p, "z")};
  ensure_writable();
  return on_executor([this, target](std::uint64_t ticket) {
    auto& stg = lab_.world().stage;
    const auto& st = stg.state();
    st.limits.check(target);
    const StagePosition cmd = lab_.compensation() ? stage::compensate(target, st) : target;
    const stage::StageState next = stage::command_move(st, cmd);
    const auto seq = archive_.note("move_stage", target,
                                   {{"ticket", ticket}, {"commanded", pos_json(cmd)}, {"true_position", pos_json(next.true_pos)}});
    stg.reset(next);
    return json{{"ticket", ticket},
                {"target", pos_json(target)},
                {"commanded", pos_json(next.commanded)},
                {"log_seq", seq},
                {"diagnostics", {{"true_position", pos_json(next.true_pos)}}}};
  });
}

json LabService::set_solenoid(const json& p) {
  require_known_keys(p, {"tesla"}, "set_solenoid");
  const double t = number(p, "tesla");
  if (std::abs(t) > magnetics::SolenoidSpec::kMaxSetpoint)
    throw ApiError(422, "domain_error",
                   "solenoid setpoint " + std::to_string(t) + " T exceeds the " +
                       std::to_string(magnetics::SolenoidSpec::kMaxSetpoint) + " T limit");
  ensure_writable();
  return on_executor([this, t](std::uint64_t ticket) {
    const auto seq = archive_.note("set_solenoid", lab_.world().stage.state().commanded, {{"ticket", ticket}, {"tesla", t}});
    lab_.set_solenoid(t);
    return json{{"ticket", ticket}, {"solenoid_t", t}, {"log_seq", seq}};
  });
}

json LabService::set_compensation(const json& p) {
  require_known_keys(p, {"enabled"}, "set_compensation");
  const bool on = bool_field(p, "enabled");
  ensure_writable();
  return on_executor([this, on](std::uint64_t ticket) {
    const auto seq =
        archive_.note("set_compensation", lab_.world().stage.state().commanded, {{"ticket", ticket}, {"enabled", on}});
    lab_.set_compensation(on);
    return json{{"ticket", ticket}, {"compensation", on}, {"log_seq", seq}};
  });
}

json LabService::run_experiment(const json& p) {
  require_known_keys(p, {"kind", "params"}, "run_experiment");
  if (!p.contains("kind") || !p.at("kind").is_string()) throw ValidationError("field 'kind' must be a string");
  const auto kind = virtlab::parse_kind(p.at("kind").get<std::string>());
  const json params = p.contains("params") ? p.at("params") : json::object();
  object_payload(params);

  // Validate everything up front so schema errors come back synchronously.
  std::function<void(const std::shared_ptr<EventStream>&)> body;
  virtlab::ResonanceOptions ropts;
  if (config_.resonator.enabled) ropts.exclude_hz.push_back(config_.resonator.frequency_hz);

  switch (kind) {
    case virtlab::RunKind::Spectroscopy: {
      require_known_keys(params, {"f_start_hz", "f_stop_hz", "f_step_hz", "pulse_s", "decay_s", "amplitude", "shots"},
                         "spectroscopy");
      calibrate::SpectroscopyPlan plan;
      plan.f_start_hz = number_or(params, "f_start_hz", plan.f_start_hz);
      plan.f_stop_hz = number_or(params, "f_stop_hz", plan.f_stop_hz);
      plan.f_step_hz = number_or(params, "f_step_hz", plan.f_step_hz);
      plan.pulse_s = number_or(params, "pulse_s", plan.pulse_s);
      plan.decay_s = number_or(params, "decay_s", plan.decay_s);
      plan.amplitude = number_or(params, "amplitude", plan.amplitude);
      plan.shots = count_or(params, "shots", plan.shots, 1, kMaxShots);
      const auto sweep = plan.sweep();
      sweep.validate();
      if (sweep.drive_hz.size() > static_cast<std::size_t>(kMaxPoints)) throw ValidationError("too many sweep points");
      body = [this, sweep, ropts](const std::shared_ptr<EventStream>& s) {
        const long shots = sweep.shots_per_point;
        const auto rec = lab_.spectroscopy(
            sweep, [&](std::size_t i, double x, long c) { s->publish("point", point_json(i, x, c, shots)); });
        const auto rf = virtlab::fit_resonance(rec, ropts);
        json fit = fit_json(rf.fit);
        fit["detected"] = rf.detected;
        if (auto f = rf.f_l(); f && rf.fit.usable()) fit["f_l_hz"] = *f;
        s->publish("fit", fit);
      };
      break;
    }
    case virtlab::RunKind::Rabi: {
      require_known_keys(params, {"t_max_s", "points", "amplitude", "shots"}, "rabi");
      const double tmax = number_or(params, "t_max_s", 5e-6);
      const long n = count_or(params, "points", 101, 2, kMaxPoints);
      const double amp = number_or(params, "amplitude", 1.0);
      const long shots = count_or(params, "shots", 200, 1, kMaxShots);
      if (!(tmax > 0.0)) throw ValidationError("t_max_s must be positive");
      body = [this, tmax, n, amp, shots](const std::shared_ptr<EventStream>& s) {
        const auto rec = lab_.rabi(virtlab::linspace(0.0, tmax, static_cast<int>(n)), amp, shots,
                                   [&](std::size_t i, double x, long c) { s->publish("point", point_json(i, x, c, shots)); });
        s->publish("fit", fit_json(virtlab::fit_rabi(rec)));
      };
      break;
    }
    case virtlab::RunKind::Ramsey: {
      require_known_keys(params, {"t_max_s", "points", "detuning_hz", "shots"}, "ramsey");
      const double tmax = number_or(params, "t_max_s", 40e-6);
      const long n = count_or(params, "points", 201, 2, kMaxPoints);
      const double det = number_or(params, "detuning_hz", 0.25e6);
      const long shots = count_or(params, "shots", 500, 1, kMaxShots);
      if (!(tmax > 0.0)) throw ValidationError("t_max_s must be positive");
      body = [this, tmax, n, det, shots](const std::shared_ptr<EventStream>& s) {
        const auto rec = lab_.ramsey(virtlab::linspace(0.0, tmax, static_cast<int>(n)), det, shots,
                                     [&](std::size_t i, double x, long c) { s->publish("point", point_json(i, x, c, shots)); });
        s->publish("fit", fit_json(virtlab::fit_decay(rec, virtlab::DecayModel::Ramsey)));
      };
      break;
    }
    case virtlab::RunKind::Hahn: {
      require_known_keys(params, {"t_max_s", "points", "shots"}, "hahn");
      const double tmax = number_or(params, "t_max_s", 350e-6);
      const long n = count_or(params, "points", 71, 2, kMaxPoints);
      const long shots = count_or(params, "shots", 500, 1, kMaxShots);
      if (!(tmax > 0.0)) throw ValidationError("t_max_s must be positive");
      body = [this, tmax, n, shots](const std::shared_ptr<EventStream>& s) {
        const auto rec = lab_.hahn(virtlab::linspace(0.0, tmax, static_cast<int>(n)), shots,
                                   [&](std::size_t i, double x, long c) { s->publish("point", point_json(i, x, c, shots)); });
        s->publish("fit", fit_json(virtlab::fit_decay(rec, virtlab::DecayModel::Hahn)));
      };
      break;
    }
    case virtlab::RunKind::RB: {
      require_known_keys(params, {"lengths", "randomizations", "shots", "f_native"}, "rb");
      virtlab::RbExperiment exp;
      exp.lengths = {1, 2, 4, 8, 16, 32, 48, 64, 80, 96, 112, 128};
      if (params.contains("lengths")) {
        if (!params.at("lengths").is_array()) throw ValidationError("field 'lengths' must be an array of integers");
        exp.lengths.clear();
        for (const auto& v : params.at("lengths")) {
          if (!v.is_number_integer() || v.get<long>() < 1 || v.get<long>() > 100000)
            throw ValidationError("RB lengths must be integers in [1, 100000]");
          exp.lengths.push_back(v.get<int>());
        }
      }
      exp.randomizations = static_cast<int>(count_or(params, "randomizations", 20, 1, 10000));
      exp.shots = count_or(params, "shots", 1000, 1, kMaxShots);
      const double fn = number_or(params, "f_native", 0.9998);
      if (!(fn > 0.5 && fn <= 1.0)) throw ValidationError("f_native must lie in (0.5, 1]");
      exp.p_dep = virtlab::depolarizing_from_fidelity(fn);
      body = [this, exp](const std::shared_ptr<EventStream>& s) {
        virtlab::RbExperiment e = exp;
        const auto vis = spin::readout_visibility(lab_.world().qubit, lab_.world().larmor().theta_deg);
        e.visibility = vis.amplitude;
        e.baseline = vis.baseline;
        virtlab::RbData data;
        const auto rec = lab_.rb(e, &data);
        for (std::size_t i = 0; i < rec.sweep.size(); ++i) s->publish("point", point_json(i, rec.sweep[i], rec.counts[i], rec.shots));
        virtlab::RbFitOptions fo;
        fo.sigmas = data.sem_p;
        fo.fixed_asymptote = vis.baseline + 0.5 * vis.amplitude;
        const auto fit = virtlab::rb_fit(data.lengths, data.mean_p, fo);
        json j = fit_json(fit.fit);
        j["f_clifford"] = fit.f_clifford;
        j["f_native"] = fit.f_native;
        s->publish("fit", j);
      };
      break;
    }
  }

  ensure_writable();
  const std::uint64_t run_id = archive_.reserve_run_id();
  auto s = open_stream("run_experiment");
  exec_.submit([this, s, run_id, body](std::uint64_t ticket) {
    try {
      pending_run_id_ = run_id;
      current_stream_ = s;
      s->publish("started", {{"run_id", run_id}, {"ticket", ticket}, {"position", pos_json(lab_.world().stage.state().commanded)}});
      body(s);
      s->publish("done", {{"run_id", run_id}});
    } catch (const std::exception& e) {
      const ApiError a = to_api_error(e);
      s->publish("error", {{"status", a.status}, {"code", a.code}, {"message", a.what()}});
    }
    pending_run_id_ = 0;
    current_stream_.reset();
    refresh_snapshot();
  });
  return {{"run_id", run_id}, {"stream_id", s->id()}};
}

json LabService::run_scenario(const json& p) {
  require_known_keys(p, {"name", "seed"}, "run_scenario");
  if (!p.contains("name") || !p.at("name").is_string()) throw ValidationError("field 'name' must be a string");
  const std::string name = p.at("name").get<std::string>();
  const auto def = calibrate::find_scenario(config_, name);
  std::optional<std::uint64_t> seed;
  if (p.contains("seed")) seed = id_field(p, "seed");
  ensure_writable();
  auto s = open_stream("run_scenario");
  exec_.submit([this, s, def, seed](std::uint64_t ticket) {
    try {
      s->publish("started", {{"scenario", def.name}, {"ticket", ticket}});
      calibrate::ScenarioRunOptions o;
      o.seed = seed;
      o.observer = [this, s](virtlab::RunRecord& r) {
        const auto seq = archive_.record(r);
        s->publish("record", {{"run_id", r.id}, {"kind", virtlab::kind_name(r.kind)}, {"position", pos_json(r.commanded)},
                              {"log_seq", seq}});
      };
      const auto res = calibrate::run_scenario(config_, def, o);
      json checks = json::array();
      for (const auto& c : res.outcomes)
        checks.push_back({{"check", c.check.describe()}, {"value", c.value}, {"passed", c.passed}});
      s->publish("done", {{"scenario", res.name},
                          {"seed", res.seed},
                          {"passed", res.passed},
                          {"partial", res.partial},
                          {"metrics", res.metrics},
                          {"checks", checks},
                          {"errors", res.errors},
                          {"bundle", res.bundle_dir.string()}});
    } catch (const std::exception& e) {
      const ApiError a = to_api_error(e);
      s->publish("error", {{"status", a.status}, {"code", a.code}, {"message", a.what()}});
    }
  });
  return {{"stream_id", s->id()}, {"scenario", def.name}};
}

json LabService::find_sweet_spot(const json& p) {
  require_known_keys(p, {"range", "axis", "budget", "coarse_points", "tol_mm", "spectroscopy"}, "find_sweet_spot");
  calibrate::SweetSpotOptions o;
  if (p.contains("range")) {
    const auto& r = p.at("range");
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
      throw ValidationError("field 'range' must be [lo, hi]");
    o.lo_mm = std::min(r[0].get<double>(), r[1].get<double>());
    o.hi_mm = std::max(r[0].get<double>(), r[1].get<double>());
  }
  if (p.contains("axis")) {
    if (!p.at("axis").is_string()) throw ValidationError("field 'axis' must be x, y or z");
    o.axis = parse_axis(p.at("axis").get<std::string>());
  }
  o.budget = static_cast<int>(count_or(p, "budget", o.budget, 3, 10000));
  o.coarse_points = static_cast<int>(count_or(p, "coarse_points", o.coarse_points, 3, 1000));
  o.tol_mm = number_or(p, "tol_mm", o.tol_mm);
  if (p.contains("spectroscopy")) {
    const auto& sp = object_payload(p.at("spectroscopy"));
    require_known_keys(sp, {"f_start_hz", "f_stop_hz", "f_step_hz", "pulse_s", "decay_s", "amplitude", "shots"},
                       "find_sweet_spot.spectroscopy");
    o.spectroscopy.f_start_hz = number_or(sp, "f_start_hz", o.spectroscopy.f_start_hz);
    o.spectroscopy.f_stop_hz = number_or(sp, "f_stop_hz", o.spectroscopy.f_stop_hz);
    o.spectroscopy.f_step_hz = number_or(sp, "f_step_hz", o.spectroscopy.f_step_hz);
    o.spectroscopy.pulse_s = number_or(sp, "pulse_s", o.spectroscopy.pulse_s);
    o.spectroscopy.decay_s = number_or(sp, "decay_s", o.spectroscopy.decay_s);
    o.spectroscopy.amplitude = number_or(sp, "amplitude", o.spectroscopy.amplitude);
    o.spectroscopy.shots = count_or(sp, "shots", o.spectroscopy.shots, 1, kMaxShots);
  }
  o.spectroscopy.sweep().validate();
  if (!(o.lo_mm < o.hi_mm)) throw ValidationError("sweet-spot range must satisfy lo < hi");
  if (config_.resonator.enabled) o.resonance.exclude_hz.push_back(config_.resonator.frequency_hz);
  ensure_writable();
  auto s = open_stream("find_sweet_spot");
  exec_.submit([this, s, o](std::uint64_t ticket) {
    try {
      current_stream_ = s;
      s->publish("started", {{"ticket", ticket}, {"range", {o.lo_mm, o.hi_mm}}, {"budget", o.budget}});
      const auto res = calibrate::find_sweet_spot(lab_, o, [&](const calibrate::Probe& pr, double lo, double hi) {
        json j = {{"position_mm", pr.position_mm}, {"bracket_lo_mm", lo}, {"bracket_hi_mm", hi}};
        j["f_l_hz"] = pr.f_l_hz ? json(*pr.f_l_hz) : json(nullptr);
        s->publish("probe", j);
      });
      s->publish("done", {{"x_star_mm", res.x_star_mm},
                          {"f_l_min_hz", res.f_l_min_hz},
                          {"iterations", res.iterations},
                          {"probes", res.probes.size()},
                          {"bracket", {res.bracket_lo_mm, res.bracket_hi_mm}},
                          {"diagnostics", {{"residual_out_of_plane_deg", res.residual_angle_deg}}}});
    } catch (const std::exception& e) {
      const ApiError a = to_api_error(e);
      s->publish("error", {{"status", a.status}, {"code", a.code}, {"message", a.what()}});
    }
    current_stream_.reset();
    refresh_snapshot();
  });
  return {{"stream_id", s->id()}};
}

json LabService::list_runs(const json& p) {
  require_known_keys(p, {"limit"}, "list_runs");
  const long limit = count_or(p, "limit", 50, 1, 10000);
  const auto ids = archive_.store().ids();
  json out = json::array();
  for (auto it = ids.rbegin(); it != ids.rend() && static_cast<long>(out.size()) < limit; ++it) {
    try {
      const auto r = archive_.store().load(*it);
      out.push_back({{"run_id", r.id},
                     {"kind", virtlab::kind_name(r.kind)},
                     {"position", pos_json(r.commanded)},
                     {"timestamp", r.timestamp},
                     {"scenario", r.scenario},
                     {"points", r.sweep.size()}});
    } catch (const std::exception&) {
    }
  }
  return {{"runs", out}};
}

json LabService::get_run(const json& p) {
  require_known_keys(p, {"run_id"}, "get_run");
  return virtlab::to_json(archive_.store().load(id_field(p, "run_id")));
}

json LabService::list_scenarios(const json& p) {
  require_known_keys(p, {}, "list_scenarios");
  json out = json::array();
  for (const auto& n : calibrate::scenario_names(config_)) {
    const auto d = calibrate::find_scenario(config_, n);
    out.push_back({{"name", n}, {"kind", d.kind}, {"description", d.description}});
  }
  return {{"scenarios", out}};
}

}  // namespace maglab::labd
