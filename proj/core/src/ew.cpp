#include "dmsim/ew.hpp"

namespace dmsim {

std::string_view to_string(DisarmOutcome o) {
  switch (o) {
    case DisarmOutcome::disarmed: return "disarmed";
    case DisarmOutcome::wrong_key: return "wrong_key";
    case DisarmOutcome::ew_shutdown: return "ew_shutdown";
    case DisarmOutcome::not_armed: return "not_armed";
  }
  return "?";
}

EngineeringWorkstation::EngineeringWorkstation(SimContext ctx, DeviceId id) : ctx_(ctx), id_(std::move(id)) {}

void EngineeringWorkstation::emit(std::string_view kind, std::vector<std::pair<std::string, std::string>> fields) {
  ctx_.trace.emit(ctx_.kernel.now(), id_, kind, std::move(fields));
}

void EngineeringWorkstation::configure(std::vector<DeviceId> plcs, std::vector<DeviceId> poll_targets,
                                       SimTime poll_interval, std::string plc_password) {
  if (encrypted_) throw Error("cannot reconfigure an armed workstation");
  if (poll_interval <= SimTime{0}) throw Error("poll interval must be positive");
  plcs_ = std::move(plcs);
  poll_targets_ = std::move(poll_targets);
  poll_interval_ = poll_interval;
  plc_password_ = std::move(plc_password);
  configured_ = true;
}

void EngineeringWorkstation::start() {
  comm_events_.assign(comm_.size(), std::nullopt);
  for (std::size_t i = 0; i < comm_.size(); ++i) schedule_comm(i, ctx_.kernel.now());
}

void EngineeringWorkstation::schedule_comm(std::size_t i, SimTime at) {
  comm_events_[i] = ctx_.kernel.schedule(at, id_, [this, i] {
    if (shutdown_) return;
    const auto& c = comm_[i];
    NetMessage msg;
    msg.src = id_;
    msg.dst = c.dst;
    msg.db = c.db;
    if (c.kind == "write") {
      msg.function = ProtocolFunction::ew_write;
      msg.payload = Bytes{comm_counter_++};
    } else {
      msg.function = ProtocolFunction::ew_read;
    }
    ctx_.net.send(std::move(msg), nullptr);
    schedule_comm(i, ctx_.kernel.now() + c.period);
  });
}

DeliveryResult EngineeringWorkstation::handle(const NetMessage&) { return {Outcome::address_missing, std::nullopt}; }

ArmReport EngineeringWorkstation::arm_all(const RansomTerms& terms) {
  if (shutdown_) throw Error("workstation is shut down");
  if (!configured_) throw Error("extortion blocks not deployed");
  if (encrypted_) throw Error("already armed");
  if (terms.deadline <= ctx_.kernel.now()) throw Error("deadline must lie after arm time");
  if (terms.key.empty()) throw Error("empty ransom key");
  if (terms.deadline.ms > static_cast<std::int64_t>(UINT32_MAX)) throw Error("deadline beyond 32-bit timer range");

  ArmReport report;
  bool all_ok = true;
  for (const auto& plc : plcs_) {
    NetMessage probe;
    probe.src = id_;
    probe.dst = plc;
    probe.function = ProtocolFunction::ew_read;
    probe.db = layout::kStatusDb;
    probe.length = layout::kStatusDbSize;
    const auto r = ctx_.net.deliver(probe);
    report.staged.emplace_back(plc, r.outcome);
    all_ok &= r.ok();
  }
  if (!all_ok) {
    std::string failed;
    for (const auto& [plc, o] : report.staged) {
      if (o == Outcome::delivered) continue;
      if (!failed.empty()) failed += ',';
      failed += plc + ':' + std::string(to_string(o));
    }
    emit(kind::arm_aborted, {{"failed", failed}});
    return report;
  }

  const auto d = static_cast<std::uint32_t>(terms.deadline.ms);
  for (const auto& plc : plcs_) {
    NetMessage deadline;
    deadline.src = id_;
    deadline.dst = plc;
    deadline.function = ProtocolFunction::ew_write;
    deadline.db = layout::kStatusDb;
    deadline.byte_offset = layout::kDeadlineByte;
    deadline.payload = Bytes{static_cast<std::uint8_t>(d >> 24), static_cast<std::uint8_t>(d >> 16),
                             static_cast<std::uint8_t>(d >> 8), static_cast<std::uint8_t>(d)};
    ctx_.net.deliver(deadline);
  }
  for (const auto& plc : plcs_) {
    NetMessage enable;
    enable.src = id_;
    enable.dst = plc;
    enable.function = ProtocolFunction::ew_write;
    enable.db = layout::kEnableBit.db;
    enable.byte_offset = layout::kEnableBit.byte;
    enable.bit_offset = layout::kEnableBit.bit;
    enable.payload = Bytes{1};
    ctx_.net.deliver(enable);
  }

  encrypted_ = true;
  polling_ = true;
  ransom_key_ = terms.key;
  deadline_ = terms.deadline;
  report.armed = true;
  emit(kind::armed, {{"deadline_ms", std::to_string(terms.deadline.ms)}, {"plcs", std::to_string(plcs_.size())}});
  next_tick_ = ctx_.kernel.schedule(ctx_.kernel.now(), id_, [this] { poll_cycle(); });
  deadline_event_ = ctx_.kernel.schedule(terms.deadline, id_, [this] {
    deadline_event_.reset();
    if (polling_) cease("deadline");
  });
  return report;
}

void EngineeringWorkstation::poll_cycle() {
  next_tick_.reset();
  if (!polling_ || shutdown_) return;
  const SimTime now = ctx_.kernel.now();
  if (deadline_ && now >= *deadline_) {
    cease("deadline");
    return;
  }
  poll_value_ = !poll_value_;
  for (const auto& plc : poll_targets_) {
    if (!polling_) return;
    NetMessage msg;
    msg.src = id_;
    msg.dst = plc;
    msg.function = ProtocolFunction::ew_write;
    msg.db = layout::kEwPollBit.db;
    msg.byte_offset = layout::kEwPollBit.byte;
    msg.bit_offset = layout::kEwPollBit.bit;
    msg.payload = Bytes{static_cast<std::uint8_t>(poll_value_ ? 1 : 0)};
    ctx_.net.send(std::move(msg), [this, plc](const DeliveryResult& r) {
      if (!polling_) return;
      if (r.ok()) {
        emit(kind::poll_sent, {{"target", plc}, {"bit", to_string(layout::kEwPollBit)}});
      } else {
        emit(kind::poll_failed, {{"target", plc}, {"outcome", std::string(to_string(r.outcome))}});
        cease("poll_failed", {{"target", plc}, {"outcome", std::string(to_string(r.outcome))}});
      }
    });
  }
  for (const auto& plc : poll_targets_) {
    if (!polling_) return;
    NetMessage msg;
    msg.src = id_;
    msg.dst = plc;
    msg.function = ProtocolFunction::ew_read;
    msg.db = layout::kAlertBit.db;
    msg.byte_offset = layout::kAlertBit.byte;
    ctx_.net.send(std::move(msg), [this, plc](const DeliveryResult& r) {
      if (!polling_) return;
      if (!r.ok()) {
        cease("read_failed", {{"target", plc}, {"outcome", std::string(to_string(r.outcome))}});
      } else if (r.response_payload && ((*r.response_payload)[0] & 1)) {
        emit(kind::alert_observed, {{"target", plc}});
        cease("alert_observed", {{"target", plc}});
      }
    });
  }
  if (polling_) next_tick_ = ctx_.kernel.schedule_after(poll_interval_, id_, [this] { poll_cycle(); });
}

void EngineeringWorkstation::cease(const std::string& cause, std::vector<std::pair<std::string, std::string>> extra) {
  if (shutdown_) return;
  polling_ = false;
  if (next_tick_) ctx_.kernel.cancel(*next_tick_);
  next_tick_.reset();
  if (deadline_event_) ctx_.kernel.cancel(*deadline_event_);
  deadline_event_.reset();
  std::vector<std::pair<std::string, std::string>> fields{{"cause", cause}};
  for (auto& f : extra) fields.push_back(f);
  emit(kind::polling_ceased, fields);
  emit(kind::alert_raised, std::move(fields));
  shutdown_ = true;
  for (auto& e : comm_events_) {
    if (e) ctx_.kernel.cancel(*e);
    e.reset();
  }
  emit(kind::ew_shutdown);
}

DisarmOutcome EngineeringWorkstation::accept_key(const std::string& key) {
  if (shutdown_) {
    emit(kind::key_rejected, {{"reason", "ew_shutdown"}});
    return DisarmOutcome::ew_shutdown;
  }
  if (!encrypted_) {
    emit(kind::key_rejected, {{"reason", "not_armed"}});
    return DisarmOutcome::not_armed;
  }
  if (key != ransom_key_) {
    ++key_attempts_;
    emit(kind::key_rejected, {{"reason", "wrong_key"}, {"attempts", std::to_string(key_attempts_)}});
    return DisarmOutcome::wrong_key;
  }

  polling_ = false;
  if (next_tick_) ctx_.kernel.cancel(*next_tick_);
  next_tick_.reset();
  if (deadline_event_) ctx_.kernel.cancel(*deadline_event_);
  deadline_event_.reset();

  std::string unreachable;
  for (const auto& plc : plcs_) {
    NetMessage off;
    off.src = id_;
    off.dst = plc;
    off.function = ProtocolFunction::ew_write;
    off.db = layout::kEnableBit.db;
    off.byte_offset = layout::kEnableBit.byte;
    off.bit_offset = layout::kEnableBit.bit;
    off.payload = Bytes{0};
    if (!ctx_.net.deliver(off).ok()) {
      if (!unreachable.empty()) unreachable += ',';
      unreachable += plc;
      continue;
    }
    // Hand configuration access back to the owner.
    NetMessage read;
    read.src = id_;
    read.dst = plc;
    read.function = ProtocolFunction::config_read;
    read.credential = plc_password_;
    const auto snap = ctx_.net.deliver(read);
    if (!snap.ok() || !snap.response_payload) continue;
    PlcConfig cfg = decode_config(*snap.response_payload);
    cfg.config_password.reset();
    NetMessage write;
    write.src = id_;
    write.dst = plc;
    write.function = ProtocolFunction::config_write;
    write.credential = plc_password_;
    write.payload = encode_config(cfg);
    ctx_.net.deliver(write);
  }
  encrypted_ = false;
  std::vector<std::pair<std::string, std::string>> fields{{"by", "key"}};
  if (!unreachable.empty()) fields.emplace_back("unreachable", unreachable);
  emit(kind::disarmed, std::move(fields));
  return DisarmOutcome::disarmed;
}

void EngineeringWorkstation::halt() {
  if (shutdown_) return;
  polling_ = false;
  shutdown_ = true;
  if (next_tick_) ctx_.kernel.cancel(*next_tick_);
  next_tick_.reset();
  if (deadline_event_) ctx_.kernel.cancel(*deadline_event_);
  deadline_event_.reset();
  for (auto& e : comm_events_) {
    if (e) ctx_.kernel.cancel(*e);
    e.reset();
  }
  emit(kind::halted);
}

}  // namespace dmsim
