#include "dmsim/control_api.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "json_reader.hpp"

namespace dmsim {

using nlohmann::json;

std::string snapshot_to_json(const SimSnapshot& s) {
  json j;
  j["t_ms"] = s.t.ms;
  j["devices"] = json::array();
  for (const auto& d : s.devices) {
    json o = json::object();
    for (const auto& [addr, on] : d.outputs) o[addr] = on;
    j["devices"].push_back({{"id", d.id},
                            {"kind", d.kind},
                            {"alive", d.alive},
                            {"enable", d.enable},
                            {"alert", d.alert},
                            {"outputs", o},
                            {"polling", d.polling}});
  }
  j["links"] = json::array();
  for (const auto& l : s.links) j["links"].push_back({{"a", l.a}, {"b", l.b}, {"up", l.up}});
  j["armed"] = s.armed;
  j["deadline_ms"] = s.deadline ? json(s.deadline->ms) : json(nullptr);
  j["detection_alerts"] = s.detection_alerts;
  j["paused"] = s.paused;
  j["finished"] = s.finished;
  j["speed"] = s.speed;
  return j.dump();
}

// ---------------------------------------------------------------------------

void EventBuffer::push(std::size_t position, const TraceRecord& rec) {
  {
    std::lock_guard lk(mu_);
    buf_.emplace_back(position, rec);
    next_ = position + 1;
    while (buf_.size() > capacity_) buf_.pop_front();
  }
  cv_.notify_all();
}

void EventBuffer::close() {
  {
    std::lock_guard lk(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

std::size_t EventBuffer::end() const {
  std::lock_guard lk(mu_);
  return next_;
}

EventBatch EventBuffer::read(std::size_t since, std::size_t max, std::chrono::milliseconds wait) {
  std::unique_lock lk(mu_);
  if (since > next_) throw Error("invalid position " + std::to_string(since) + "; stream ends at " + std::to_string(next_));
  cv_.wait_for(lk, wait, [&] { return next_ > since || closed_; });
  EventBatch b;
  b.next = since;
  b.oldest = buf_.empty() ? next_ : buf_.front().first;
  if (since < b.oldest) {
    b.overflow = true;
    return b;
  }
  for (auto it = buf_.begin() + static_cast<std::ptrdiff_t>(since - b.oldest);
       it != buf_.end() && b.records.size() < max; ++it) {
    b.records.push_back(*it);
  }
  b.next = since + b.records.size();
  b.closed = closed_ && b.next == next_;
  return b;
}

// ---------------------------------------------------------------------------

Session::Session(ScenarioScript script, SessionOptions options)
    : script_(std::move(script)), options_(options), events_(options.event_buffer) {
  if (options_.speed < 0) throw Error("speed must be >= 0");
  const std::uint64_t seed = options_.seed.value_or(script_.seed);

  // Baseline for the live detector: the same fleet without the attack.
  {
    Fleet pristine(script_.project, FleetOptions{seed, script_.random_scan_phase, script_.link_latency});
    pristine.run_until(options_.baseline_window);
    if (!pristine.net().flows().empty()) {
      baseline_ = learn_baseline(pristine.net().flows(), SimTime{0}, options_.baseline_window);
    }
  }

  fleet_ = prepare_fleet(script_, seed);
  const auto& existing = fleet_->trace().records();
  for (std::size_t i = 0; i < existing.size(); ++i) events_.push(i, existing[i]);
  fleet_->trace().set_observer([this](std::size_t pos, const TraceRecord& r) { events_.push(pos, r); });
  fleet_->start();

  paused_ = options_.start_paused;
  speed_ = options_.speed;
  reanchor();
  thread_ = std::thread([this] { loop(); });
}

Session::~Session() { stop(); }

void Session::stop() {
  stop_ = true;
  ctl_cv_.notify_all();
  if (thread_.joinable() && thread_.get_id() != std::this_thread::get_id()) thread_.join();
  events_.close();
}

void Session::reanchor() {
  anchor_sim_ = fleet_->kernel().now();
  anchor_wall_ = std::chrono::steady_clock::now();
}

void Session::loop() {
  using namespace std::chrono_literals;
  while (!stop_) {
    bool paused;
    double speed;
    std::uint64_t steps = 0;
    SimTime anchor_sim;
    std::chrono::steady_clock::time_point anchor_wall;
    {
      std::unique_lock lk(ctl_mu_);
      ctl_cv_.wait_for(lk, 10ms, [&] { return stop_ || !paused_ || step_budget_ > 0; });
      if (stop_) break;
      if (paused_ && step_budget_ == 0) continue;
      paused = paused_;
      speed = speed_;
      if (paused) std::swap(steps, step_budget_);
      anchor_sim = anchor_sim_;
      anchor_wall = anchor_wall_;
    }
    if (finished_) {
      std::this_thread::sleep_for(10ms);
      continue;
    }

    std::lock_guard lk(mu_);
    Kernel& k = fleet_->kernel();
    if (paused) {
      k.run_until(RunLimits{script_.horizon, steps});
    } else if (speed == 0.0) {
      k.run_until(RunLimits{script_.horizon, 5000});
    } else {
      const auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - anchor_wall);
      const auto target = anchor_sim + SimTime{static_cast<std::int64_t>(static_cast<double>(wall.count()) * speed)};
      k.run_until(RunLimits{std::min(target, script_.horizon)});
    }
    if (k.now() >= script_.horizon && k.pending_injections() == 0) {
      fleet_->trace().emit(script_.horizon, "", kind::end);
      finished_ = true;
      events_.close();
    } else if (!paused && speed > 0.0) {
      std::this_thread::sleep_for(5ms);
    }
  }
}

bool Session::wait_finished(std::chrono::milliseconds timeout) {
  const auto until = std::chrono::steady_clock::now() + timeout;
  while (!finished_) {
    if (std::chrono::steady_clock::now() >= until) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  return true;
}

std::string Session::trace_text() {
  std::lock_guard lk(mu_);
  return trace_to_string(fleet_->trace());
}

std::size_t Session::count_detections() {
  const auto& flows = fleet_->net().flows();
  for (; flows_scanned_ < flows.size(); ++flows_scanned_) {
    const FlowKey k = FlowKey::of(flows[flows_scanned_]);
    if (!baseline_.learned.contains(k)) novel_.insert(k);
  }
  return novel_.size();
}

SimSnapshot Session::snapshot() {
  SimSnapshot s;
  {
    std::lock_guard lk(ctl_mu_);
    s.paused = paused_;
    s.speed = speed_;
  }
  std::lock_guard lk(mu_);
  s.t = fleet_->kernel().now();
  s.finished = finished_;
  for (const auto& d : script_.project.devices) {
    DeviceSnapshot ds;
    ds.id = d.id;
    ds.kind = d.kind;
    if (fleet_->has_plc(d.id)) {
      const Plc& p = fleet_->plc(d.id);
      ds.alive = p.alive();
      ds.enable = p.enabled();
      ds.alert = p.alert();
      ds.polling = p.polling();
      for (const auto& c : p.outputs()) ds.outputs[c.address] = c.state;
    } else {
      const auto& ew = fleet_->ew();
      ds.alive = ew.alive();
      ds.enable = ew.encrypted();
      ds.alert = ew.shutdown();
      ds.polling = ew.polling();
    }
    s.devices.push_back(std::move(ds));
  }
  for (const auto& l : fleet_->net().links()) s.links.push_back({l.a, l.b, l.up});
  if (fleet_->has_ew()) {
    s.armed = fleet_->ew().encrypted();
    s.deadline = fleet_->ew().deadline();
  }
  s.detection_alerts = count_detections();
  return s;
}

CommandResult Session::submit(const std::string& command_json) {
  CommandResult res;
  auto reject = [&](std::string why) {
    res.accepted = false;
    res.reason = std::move(why);
    return res;
  };
  json j;
  try {
    j = json::parse(command_json);
  } catch (const json::parse_error& e) {
    return reject(std::string("malformed command: ") + e.what());
  }
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) return reject("command needs a string kind");
  if (finished_) return reject("session finished");
  const std::string k = j["kind"].get<std::string>();
  detail::Reader r{j, "command", "command"};

  try {
    if (k == "pause" || k == "resume" || k == "step" || k == "set_speed") {
      std::lock_guard lk(ctl_mu_);
      if (k == "pause") {
        paused_ = true;
      } else if (k == "resume") {
        paused_ = false;
        std::lock_guard fl(mu_);
        reanchor();
      } else if (k == "step") {
        const auto n = r.get<std::int64_t>("n", 1);
        if (n < 1) return reject("step needs n >= 1");
        if (!paused_) return reject("step requires a paused session");
        step_budget_ += static_cast<std::uint64_t>(n);
      } else {
        const double f = r.at("factor").as<double>();
        if (!(f >= 0.0)) return reject("speed factor must be >= 0");
        speed_ = f;
        std::lock_guard fl(mu_);
        reanchor();
      }
      res.accepted = true;
      res.handle = next_handle_++;
      ctl_cv_.notify_all();
      return res;
    }

    json doc = j;
    if (k == "disarm_attempt") doc["kind"] = "pay_ransom";
    std::lock_guard lk(mu_);
    if (!doc.contains("at_ms")) doc["at_ms"] = fleet_->kernel().now().ms;
    const ScenarioAction a = detail::parse_action(detail::Reader{doc, "command", "command"});
    validate_action(script_.project, a);
    if (a.kind == ActionKind::arm && !fleet_->ew().configured()) return reject("extortion blocks not deployed");
    if ((a.kind == ActionKind::arm || a.kind == ActionKind::pay_ransom) && fleet_->ew().shutdown()) {
      return reject("workstation is shut down");
    }
    Fleet* f = fleet_.get();
    const DmplcSettings m = script_.dmplc;
    f->kernel().inject(a.at, [f, a, m] { apply_action(*f, a, m); });
    res.accepted = true;
    res.handle = next_handle_++;
    return res;
  } catch (const Error& e) {
    return reject(e.what());
  }
}

// ---------------------------------------------------------------------------

struct ControlServer::Impl {
  httplib::Server svr;
  std::mutex mu;
  std::shared_ptr<Session> session;
  std::thread bg;

  std::shared_ptr<Session> current() {
    std::lock_guard lk(mu);
    return session;
  }
};

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

std::string event_line(std::size_t pos, const TraceRecord& r) {
  json f = json::object();
  for (const auto& [k, v] : r.fields) f[k] = v;
  return json{{"position", pos}, {"t_ms", r.t.ms}, {"device", r.device}, {"kind", r.kind}, {"fields", f}}.dump() + "\n";
}

ScenarioScript script_from_request(const json& body) {
  if (body.contains("scenario_path")) {
    auto s = load_scenario(body["scenario_path"].get<std::string>());
    if (!body.value("actions", true)) s.actions.clear();
    if (body.contains("horizon_ms")) s.horizon = SimTime{body["horizon_ms"].get<std::int64_t>()};
    return s;
  }
  if (!body.contains("project_path")) throw Error("session needs scenario_path or project_path");
  json doc;
  doc["name"] = body.value("name", std::string("interactive"));
  doc["project_path"] = std::filesystem::absolute(body["project_path"].get<std::string>()).string();
  doc["horizon_ms"] = body.value("horizon_ms", std::int64_t{3600000});
  doc["seed"] = body.value("seed", std::uint64_t{0});
  if (body.contains("dmplc")) doc["dmplc"] = body["dmplc"];
  return parse_scenario(doc.dump(), ".");
}

}  // namespace

ControlServer::ControlServer() : impl_(std::make_unique<Impl>()) {
  auto& svr = impl_->svr;
  Impl* im = impl_.get();

  svr.Post("/v1/session", [im](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = req.body.empty() ? json::object() : json::parse(req.body);
    } catch (const json::parse_error& e) {
      return reply(res, 400, {{"error", std::string("malformed body: ") + e.what()}});
    }
    std::lock_guard lk(im->mu);
    if (im->session) return reply(res, 409, {{"error", "a session is already running"}});
    try {
      SessionOptions opt;
      opt.speed = body.value("speed", 1.0);
      opt.start_paused = body.value("paused", false);
      if (body.contains("seed")) opt.seed = body["seed"].get<std::uint64_t>();
      im->session = std::make_shared<Session>(script_from_request(body), opt);
    } catch (const std::exception& e) {
      return reply(res, 400, {{"error", e.what()}});
    }
    reply(res, 201, {{"session", im->session->script().name}, {"horizon_ms", im->session->script().horizon.ms}});
  });

  svr.Delete("/v1/session", [im](const httplib::Request&, httplib::Response& res) {
    std::shared_ptr<Session> s;
    {
      std::lock_guard lk(im->mu);
      s = std::move(im->session);
      im->session.reset();
    }
    if (!s) return reply(res, 404, {{"error", "no session"}});
    s->stop();
    reply(res, 200, {{"ended", true}});
  });

  svr.Get("/v1/snapshot", [im](const httplib::Request&, httplib::Response& res) {
    auto s = im->current();
    if (!s) return reply(res, 404, {{"error", "no session"}});
    res.set_content(snapshot_to_json(s->snapshot()), "application/json");
  });

  svr.Post("/v1/commands", [im](const httplib::Request& req, httplib::Response& res) {
    auto s = im->current();
    if (!s) return reply(res, 404, {{"error", "no session"}});
    const auto r = s->submit(req.body);
    if (r.accepted) return reply(res, 200, {{"accepted", true}, {"handle", r.handle}});
    reply(res, 422, {{"accepted", false}, {"rejected", true}, {"reason", r.reason}});
  });

  svr.Get("/v1/events", [im](const httplib::Request& req, httplib::Response& res) {
    auto s = im->current();
    if (!s) return reply(res, 404, {{"error", "no session"}});
    std::size_t since = 0;
    std::size_t limit = SIZE_MAX;
    try {
      if (req.has_param("since")) since = std::stoull(req.get_param_value("since"));
      if (req.has_param("limit")) limit = std::stoull(req.get_param_value("limit"));
    } catch (const std::exception&) {
      return reply(res, 400, {{"error", "invalid position"}});
    }
    const bool follow = req.get_param_value("follow") != "0";
    EventBatch first;
    try {
      first = s->events(since, 0, std::chrono::milliseconds(0));
    } catch (const Error& e) {
      return reply(res, 400, {{"error", e.what()}});
    }
    if (first.overflow) return reply(res, 410, {{"error", "position evicted"}, {"overflow", true}, {"oldest", first.oldest}});

    if (!follow) {
      std::string body;
      const auto b = s->events(since, limit, std::chrono::milliseconds(0));
      for (const auto& [pos, rec] : b.records) body += event_line(pos, rec);
      res.set_content(body, "application/x-ndjson");
      return;
    }
    auto cursor = std::make_shared<std::size_t>(since);
    auto sent = std::make_shared<std::size_t>(0);
    res.set_chunked_content_provider("application/x-ndjson", [s, cursor, sent, limit](std::size_t, httplib::DataSink& sink) {
      const auto b = s->events(*cursor, std::min<std::size_t>(256, limit - *sent), std::chrono::milliseconds(200));
      if (b.overflow) {
        const std::string line = json{{"overflow", true}, {"oldest", b.oldest}}.dump() + "\n";
        sink.write(line.data(), line.size());
        sink.done();
        return true;
      }
      for (const auto& [pos, rec] : b.records) {
        const std::string line = event_line(pos, rec);
        if (!sink.write(line.data(), line.size())) return false;
      }
      *cursor = b.next;
      *sent += b.records.size();
      if (b.closed || *sent >= limit) sink.done();
      return true;
    });
  });
}

ControlServer::~ControlServer() { stop(); }

void ControlServer::listen(const std::string& host, int port) {
  if (!impl_->svr.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

int ControlServer::start_background(const std::string& host) {
  const int port = impl_->svr.bind_to_any_port(host);
  if (port <= 0) throw Error("cannot bind " + host);
  impl_->bg = std::thread([this] { impl_->svr.listen_after_bind(); });
  impl_->svr.wait_until_ready();
  return port;
}

void ControlServer::stop() {
  if (!impl_) return;
  {
    std::lock_guard lk(impl_->mu);
    if (impl_->session) impl_->session->stop();
    impl_->session.reset();
  }
  impl_->svr.stop();
  if (impl_->bg.joinable()) impl_->bg.join();
}

std::shared_ptr<Session> ControlServer::session() { return impl_->current(); }

}  // namespace dmsim
