#include "dmsim/plc.hpp"

#include <algorithm>

namespace dmsim {

namespace {

const char* const kLocalOperator = "<local>";

std::string outputs_field(const std::vector<OutputCard>& cards) {
  std::string s;
  for (const auto& c : cards) {
    if (!s.empty()) s += ',';
    s += c.address + ':' + (c.state ? '1' : '0');
  }
  return s;
}

}  // namespace

void PlcConfig::check_invariants() const {
  if (id.empty()) throw Error("PLC config without id");
  if (scan_interval <= SimTime{0}) throw Error(id + ": scan interval must be positive");
  if (!dm) return;
  auto status = data_blocks.find(layout::kStatusDb);
  auto poll = data_blocks.find(layout::kPollDb);
  if (status == data_blocks.end() || status->second.empty() || poll == data_blocks.end() || poll->second.empty()) {
    throw Error(id + ": extortion blocks installed without DB500/DB501");
  }
  if (dm->deadband_misses < 1) throw Error(id + ": deadband_misses must be >= 1");
  if (dm->poll_interval <= SimTime{0}) throw Error(id + ": poll interval must be positive");
}

Plc::Plc(SimContext ctx, PlcConfig config, SimTime first_scan)
    : ctx_(ctx), config_(std::move(config)), first_scan_(first_scan) {
  config_.check_invariants();
  for (const auto& b : config_.core_blocks) tanks_[b.name] = TankState{b.tank.initial_level, true};
  next_comm_at_.assign(config_.comm.size(), first_scan_);
}

void Plc::start() {
  if (started_) return;
  started_ = true;
  next_scan_ = ctx_.kernel.schedule(std::max(first_scan_, ctx_.kernel.now()), config_.id, [this] { scan_cycle(); });
}

void Plc::emit(std::string_view kind, std::vector<std::pair<std::string, std::string>> fields) {
  ctx_.trace.emit(ctx_.kernel.now(), config_.id, kind, std::move(fields));
}

std::optional<bool> Plc::read_bit(const BitAddress& a) const {
  auto it = config_.data_blocks.find(a.db);
  if (it == config_.data_blocks.end() || a.byte < 0 || static_cast<std::size_t>(a.byte) >= it->second.size()) {
    return std::nullopt;
  }
  return (it->second[a.byte] >> a.bit) & 1;
}

void Plc::set_bit(const BitAddress& a, bool v) {
  auto& bytes = config_.data_blocks.at(a.db);
  auto& b = bytes.at(a.byte);
  b = v ? static_cast<std::uint8_t>(b | (1u << a.bit)) : static_cast<std::uint8_t>(b & ~(1u << a.bit));
}

bool Plc::enabled() const { return config_.dm && bit(layout::kEnableBit); }
bool Plc::alert() const { return config_.dm && bit(layout::kAlertBit); }

std::optional<SimTime> Plc::deadline() const {
  auto it = config_.data_blocks.find(layout::kStatusDb);
  if (!config_.dm || it == config_.data_blocks.end() || it->second.size() < layout::kStatusDbSize) return std::nullopt;
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | it->second[layout::kDeadlineByte + i];
  if (v == 0) return std::nullopt;
  return SimTime{static_cast<std::int64_t>(v)};
}

bool Plc::credential_ok(const NetMessage& msg) const {
  return !config_.config_password || (msg.credential && *msg.credential == *config_.config_password);
}

bool Plc::authorized(const NetMessage& msg) const {
  if (config_.dm && msg.function == ProtocolFunction::ew_write && msg.src == config_.dm->authorized_ew) return true;
  return config_.config_password && msg.credential && *msg.credential == *config_.config_password;
}

DeliveryResult Plc::handle(const NetMessage& msg) {
  return is_write(msg.function) ? handle_write(msg) : handle_read(msg);
}

DeliveryResult Plc::handle_read(const NetMessage& msg) {
  if (msg.function == ProtocolFunction::config_read) {
    if (!credential_ok(msg)) {
      emit(kind::config_access_denied, {{"src", msg.src}, {"function", "config_read"}});
      return {Outcome::access_denied, std::nullopt};
    }
    return {Outcome::delivered, encode_config(config_)};
  }
  auto it = config_.data_blocks.find(msg.db);
  if (it == config_.data_blocks.end() || msg.byte_offset < 0 ||
      static_cast<std::size_t>(msg.byte_offset) + std::max<std::size_t>(msg.length, 1) > it->second.size()) {
    return {Outcome::address_missing, std::nullopt};
  }
  const auto first = it->second.begin() + msg.byte_offset;
  return {Outcome::delivered, Bytes(first, first + static_cast<std::ptrdiff_t>(std::max<std::size_t>(msg.length, 1)))};
}

DeliveryResult Plc::handle_write(const NetMessage& msg) {
  if (msg.function == ProtocolFunction::config_write) {
    if (!credential_ok(msg)) {
      emit(kind::config_access_denied, {{"src", msg.src}, {"function", "config_write"}});
      return {Outcome::access_denied, std::nullopt};
    }
    PlcConfig next = decode_config(*msg.payload);
    apply_config(std::move(next), msg.src);
    return {Outcome::delivered, std::nullopt};
  }
  return apply_memory_write(msg);
}

DeliveryResult Plc::apply_memory_write(const NetMessage& msg) {
  auto it = config_.data_blocks.find(msg.db);
  if (it == config_.data_blocks.end() || !msg.payload || msg.payload->empty() || msg.byte_offset < 0) {
    return {Outcome::address_missing, std::nullopt};
  }
  Bytes& mem = it->second;
  const std::size_t span = msg.bit_offset ? 1 : msg.payload->size();
  if (static_cast<std::size_t>(msg.byte_offset) + span > mem.size()) return {Outcome::address_missing, std::nullopt};

  const bool guarded = config_.dm && msg.db == layout::kStatusDb;
  const Bytes status_before = guarded ? mem : Bytes{};
  std::map<BitAddress, bool> watched_before;
  if (config_.dm) {
    for (const auto& w : config_.dm->watched) watched_before[w.bit] = bit(w.bit);
  }

  if (msg.bit_offset) {
    auto& b = mem[msg.byte_offset];
    const auto mask = static_cast<std::uint8_t>(1u << *msg.bit_offset);
    b = ((*msg.payload)[0] & 1) ? static_cast<std::uint8_t>(b | mask) : static_cast<std::uint8_t>(b & ~mask);
  } else {
    std::copy(msg.payload->begin(), msg.payload->end(), mem.begin() + msg.byte_offset);
  }

  if (guarded) {
    // Writable only by the controlling workstation or a password holder.
    // Alert is set-only for everyone.
    const bool old_alert = status_before[0] & 1;
    const bool old_enable = status_before[0] & 2;
    const bool new_alert = mem[0] & 1;
    const bool new_enable = mem[0] & 2;
    const bool auth = authorized(msg);
    if (!auth) {
      mem = status_before;
    } else {
      mem[0] = static_cast<std::uint8_t>((mem[0] & ~1u) | (old_alert ? 1u : 0u));
    }
    if (auth && old_enable && !new_enable) {
      on_disarmed(msg.src);
    } else if (!old_alert && new_alert) {
      raise_alert("memory_write", {{"src", msg.src}});
    }
  }

  for (const auto& [addr, before] : watched_before) {
    if (bit(addr) != before) last_change_[addr] = ctx_.kernel.now();
  }
  return {Outcome::delivered, std::nullopt};
}

void Plc::poke(const BitAddress& addr, bool value) {
  NetMessage msg;
  msg.src = kLocalOperator;
  msg.dst = config_.id;
  msg.function = ProtocolFunction::put_write;
  msg.db = addr.db;
  msg.byte_offset = addr.byte;
  msg.bit_offset = addr.bit;
  msg.payload = Bytes{static_cast<std::uint8_t>(value ? 1 : 0)};
  if (!alive_) throw Error(config_.id + " is halted");
  if (apply_memory_write(msg).outcome != Outcome::delivered) {
    throw Error(config_.id + ": no such address " + to_string(addr));
  }
}

void Plc::apply_config(PlcConfig next, const DeviceId& by) {
  next.id = config_.id;
  next.check_invariants();
  for (auto& card : next.output_cards) {
    auto old = std::find_if(config_.output_cards.begin(), config_.output_cards.end(),
                            [&](const OutputCard& c) { return c.address == card.address; });
    card.state = old != config_.output_cards.end() ? old->state : false;
  }
  const bool had_comm_same = next.comm.size() == config_.comm.size();
  config_ = std::move(next);
  for (const auto& b : config_.core_blocks) tanks_.try_emplace(b.name, TankState{b.tank.initial_level, true});
  if (!had_comm_same) next_comm_at_.assign(config_.comm.size(), ctx_.kernel.now());

  if (!config_.dm) {
    enable_seen_ = false;
    disrupted_ = false;
    core_disabled_reported_ = false;
    last_change_.clear();
  } else if (!enabled()) {
    enable_seen_ = false;
  }
  emit(kind::config_replaced, {{"src", by}, {"dm", config_.dm ? "1" : "0"}});
}

void Plc::on_enabled() {
  enable_seen_ = true;
  const SimTime now = ctx_.kernel.now();
  next_poll_at_ = now;
  last_change_.clear();
  for (const auto& w : config_.dm->watched) last_change_[w.bit] = now;
  poll_values_.assign(config_.dm->outgoing.size(), false);
  emit(kind::dm_enabled);
}

void Plc::on_disarmed(const DeviceId& by) {
  const bool was_alert = alert();
  set_bit(layout::kAlertBit, false);
  enable_seen_ = false;
  if (disrupted_ && config_.dm->restore_outputs_on_disarm) {
    for (auto& c : config_.output_cards) c.state = false;
  }
  disrupted_ = false;
  core_disabled_reported_ = false;
  emit(kind::disarmed, {{"by", by}, {"cleared_alert", was_alert ? "1" : "0"}});
}

void Plc::raise_alert(std::string cause, std::vector<std::pair<std::string, std::string>> extra) {
  if (!config_.dm || !enabled() || alert()) return;
  set_bit(layout::kAlertBit, true);
  std::vector<std::pair<std::string, std::string>> fields{{"cause", std::move(cause)}};
  for (auto& f : extra) fields.push_back(std::move(f));
  emit(kind::alert_raised, std::move(fields));
}

bool Plc::check_liveness() {
  if (!config_.dm || !enabled() || alert()) return false;
  const SimTime now = ctx_.kernel.now();
  const SimTime limit = static_cast<std::int64_t>(config_.dm->deadband_misses) * config_.dm->poll_interval;
  for (const auto& w : config_.dm->watched) {
    auto it = last_change_.find(w.bit);
    const SimTime last = it == last_change_.end() ? now : it->second;
    if (now - last > limit) {
      raise_alert("stale_poll", {{"source", w.source},
                                 {"bit", to_string(w.bit)},
                                 {"last_change_ms", std::to_string(last.ms)}});
      return true;
    }
  }
  return false;
}

void Plc::send_polls() {
  if (!config_.dm) return;
  const auto& out = config_.dm->outgoing;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!enabled() || alert()) return;
    const auto& a = out[i];
    poll_values_[i] = !poll_values_[i];
    NetMessage msg;
    msg.src = config_.id;
    msg.dst = a.target;
    msg.function = ProtocolFunction::put_write;
    msg.db = a.write_bit.db;
    msg.byte_offset = a.write_bit.byte;
    msg.bit_offset = a.write_bit.bit;
    msg.payload = Bytes{static_cast<std::uint8_t>(poll_values_[i] ? 1 : 0)};
    const std::string target = a.target;
    const std::string bitname = to_string(a.write_bit);
    ctx_.net.send(std::move(msg), [this, target, bitname](const DeliveryResult& r) {
      if (r.ok()) {
        emit(kind::poll_sent, {{"target", target}, {"bit", bitname}});
      } else {
        emit(kind::poll_failed, {{"target", target}, {"outcome", std::string(to_string(r.outcome))}});
        raise_alert("poll_failed", {{"target", target}, {"outcome", std::string(to_string(r.outcome))}});
      }
    });
  }
}

void Plc::check_neighbor_alert(const PollAssignment& a) {
  if (!config_.dm || !enabled() || alert() || !a.watch_alert) return;
  NetMessage msg;
  msg.src = config_.id;
  msg.dst = a.target;
  msg.function = ProtocolFunction::get_read;
  msg.db = layout::kAlertBit.db;
  msg.byte_offset = layout::kAlertBit.byte;
  msg.length = 1;
  const std::string target = a.target;
  ctx_.net.send(std::move(msg), [this, target](const DeliveryResult& r) {
    if (!r.ok()) {
      raise_alert("neighbor_unreachable", {{"target", target}, {"outcome", std::string(to_string(r.outcome))}});
    } else if (r.response_payload && !r.response_payload->empty() && ((*r.response_payload)[0] & 1)) {
      raise_alert("neighbor_alert", {{"target", target}});
    }
  });
}

void Plc::run_comm() {
  const SimTime now = ctx_.kernel.now();
  for (std::size_t i = 0; i < config_.comm.size(); ++i) {
    const auto& c = config_.comm[i];
    if (now < next_comm_at_[i]) continue;
    while (next_comm_at_[i] <= now) next_comm_at_[i] += c.period;
    NetMessage msg;
    msg.src = config_.id;
    msg.dst = c.dst;
    msg.db = c.db;
    if (c.kind == "put") {
      msg.function = ProtocolFunction::put_write;
      msg.payload = Bytes{comm_counter_++};
    } else {
      msg.function = ProtocolFunction::get_read;
    }
    ctx_.net.send(std::move(msg), nullptr);
  }
}

bool Plc::run_core() {
  bool executed = false;
  const auto before = config_.output_cards;
  const bool shutdown_signal = config_.safe_shutdown_signal && bit(*config_.safe_shutdown_signal);
  auto set_output = [&](const std::string& addr, bool v) {
    for (auto& c : config_.output_cards) {
      if (c.address == addr) c.state = v;
    }
  };
  for (const auto& block : config_.core_blocks) {
    if (block.gated_by_alert && alert()) continue;
    executed = true;
    if (block.behavior != CoreBehavior::tank_control) continue;
    auto& t = tanks_[block.name];
    if (shutdown_signal) {
      t.filling = false;
      t.level = std::max(0, t.level - block.tank.drain_rate);
    } else if (t.filling) {
      t.level += block.tank.fill_rate;
      if (t.level >= block.tank.high) t.filling = false;
    } else {
      t.level -= block.tank.drain_rate;
      if (t.level <= block.tank.low) t.filling = true;
    }
    if (!block.outputs.empty()) set_output(block.outputs[0], t.filling);
    if (block.outputs.size() > 1) set_output(block.outputs[1], !t.filling);
  }
  bool changed = false;
  for (std::size_t i = 0; i < before.size(); ++i) changed |= before[i].state != config_.output_cards[i].state;
  if (changed) emit(kind::core_output, {{"outputs", outputs_field(config_.output_cards)}});
  return executed;
}

void Plc::scan_cycle() {
  if (!alive_) return;
  const SimTime now = ctx_.kernel.now();
  CycleObservation obs;
  obs.t = now;

  if (config_.dm) {
    if (enabled() && !enable_seen_) on_enabled();
    if (!enabled()) enable_seen_ = false;

    if (enabled() && !alert()) {
      if (auto d = deadline(); d && now >= *d) raise_alert("deadline", {{"deadline_ms", std::to_string(d->ms)}});
      if (config_.dm->watch_safe_shutdown && config_.safe_shutdown_signal && bit(*config_.safe_shutdown_signal)) {
        raise_alert("safe_shutdown");
      }
      check_liveness();
      if (!alert() && now >= next_poll_at_) {
        while (next_poll_at_ <= now) next_poll_at_ += config_.dm->poll_interval;
        send_polls();
        for (const auto& a : config_.dm->outgoing) check_neighbor_alert(a);
      }
    }
    if (enabled() && alert()) {
      for (auto& c : config_.output_cards) c.state = true;
      obs.disruption_ran = true;
      if (!disrupted_) {
        disrupted_ = true;
        emit(kind::outputs_on, {{"outputs", outputs_field(config_.output_cards)}});
      }
    }
  }

  if (!alert()) run_comm();
  obs.core_executed = run_core();
  if (alert() && !obs.core_executed && !config_.core_blocks.empty() && !core_disabled_reported_) {
    core_disabled_reported_ = true;
    emit(kind::core_disabled);
  }

  obs.enable = enabled();
  obs.alert = alert();
  obs.all_outputs_on = !config_.output_cards.empty() &&
                       std::all_of(config_.output_cards.begin(), config_.output_cards.end(),
                                   [](const OutputCard& c) { return c.state; });
  if (observer_) observer_(obs);

  next_scan_ = ctx_.kernel.schedule_after(config_.scan_interval, config_.id, [this] { scan_cycle(); });
}

void Plc::halt() {
  if (!alive_) return;
  alive_ = false;
  if (next_scan_) ctx_.kernel.cancel(*next_scan_);
  next_scan_.reset();
  emit(kind::halted);
}

}  // namespace dmsim
