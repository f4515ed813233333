#include <gtest/gtest.h>

#include <memory>

#include "dmsim/plc.hpp"
#include "support.hpp"

namespace dmsim {
namespace {

using testing::count_kind;
using testing::first_time;

CoreBlock tank(const std::string& name) {
  CoreBlock b;
  b.name = name;
  b.outputs = {"Q0.0", "Q0.1"};
  return b;
}

PlcConfig base_config(const DeviceId& id) {
  PlcConfig c;
  c.id = id;
  c.data_blocks[1] = Bytes(16, 0);
  c.core_blocks.push_back(tank("TankControl"));
  c.output_cards = {{"Q0.0", false}, {"Q0.1", false}};
  return c;
}

PlcConfig with_blocks(PlcConfig c, std::vector<PollAssignment> outgoing, std::vector<WatchedBit> watched,
                      int deadband = 1) {
  c.data_blocks[layout::kStatusDb] = Bytes(layout::kStatusDbSize, 0);
  c.data_blocks[layout::kPollDb] = Bytes(1, 0);
  DmProgram dm;
  dm.blocks = {"DM_Poll", "DM_StatusCheck", "DM_PaymentTimer", "DM_Disruption"};
  dm.authorized_ew = "EW";
  dm.deadband_misses = deadband;
  dm.outgoing = std::move(outgoing);
  dm.watched = std::move(watched);
  c.dm = dm;
  for (auto& b : c.core_blocks) b.gated_by_alert = true;
  c.config_password = "secret";
  return c;
}

/// Kernel, network and trace with directly constructed PLCs.
class Bench : public ::testing::Test {
 protected:
  Plc& add(PlcConfig cfg) {
    auto p = std::make_unique<Plc>(SimContext{kernel, net, trace}, std::move(cfg));
    net.attach(p->id(), p.get());
    auto& ref = *p;
    plcs.push_back(std::move(p));
    return ref;
  }

  void wire(const DeviceId& a, const DeviceId& b) { net.add_link(a, b); }

  DeliveryResult ew_write_bit(const DeviceId& dst, BitAddress a, bool v, const DeviceId& src = "EW") {
    NetMessage m;
    m.src = src;
    m.dst = dst;
    m.function = ProtocolFunction::ew_write;
    m.db = a.db;
    m.byte_offset = a.byte;
    m.bit_offset = a.bit;
    m.payload = Bytes{static_cast<std::uint8_t>(v)};
    return net.deliver(m);
  }

  void arm(const DeviceId& dst, SimTime deadline) {
    const auto d = static_cast<std::uint32_t>(deadline.ms);
    NetMessage m;
    m.src = "EW";
    m.dst = dst;
    m.function = ProtocolFunction::ew_write;
    m.db = layout::kStatusDb;
    m.byte_offset = layout::kDeadlineByte;
    m.payload = Bytes{static_cast<std::uint8_t>(d >> 24), static_cast<std::uint8_t>(d >> 16),
                      static_cast<std::uint8_t>(d >> 8), static_cast<std::uint8_t>(d)};
    ASSERT_TRUE(net.deliver(m).ok());
    ASSERT_TRUE(ew_write_bit(dst, layout::kEnableBit, true).ok());
  }

  /// Toggles the workstation heartbeat bit every second from `from` to `until` inclusive.
  void heartbeat(const DeviceId& dst, SimTime from, SimTime until, std::set<std::int64_t> skip = {}) {
    auto value = std::make_shared<bool>(false);
    for (SimTime t = from; t <= until; t += 1000_ms) {
      if (skip.contains(t.ms)) continue;
      kernel.schedule(t, "hb", [this, dst, value] {
        *value = !*value;
        ew_write_bit(dst, layout::kEwPollBit, *value);
      });
    }
  }

  void SetUp() override { net.add_device("EW"); }

  Kernel kernel;
  Network net{kernel};
  TraceLog trace;
  std::vector<std::unique_ptr<Plc>> plcs;
};

TEST_F(Bench, DisabledBlocksLeaveProcessUntouched) {
  auto plain = base_config("A");
  auto armed_off = with_blocks(base_config("B"), {}, {{"EW", layout::kEwPollBit}});
  Plc& a = add(plain);
  Plc& b = add(armed_off);
  a.start();
  b.start();
  kernel.run_until({SimTime{10000 * 100 - 1}});
  EXPECT_FALSE(b.alert());
  EXPECT_EQ(count_kind(trace, kind::alert_raised), 0u);

  std::vector<std::pair<std::int64_t, std::string>> outa, outb;
  for (const auto& r : trace.records()) {
    if (r.kind != kind::core_output) continue;
    (r.device == "A" ? outa : outb).emplace_back(r.t.ms, *r.field("outputs"));
  }
  EXPECT_FALSE(outa.empty());
  EXPECT_EQ(outa, outb);
}

TEST_F(Bench, AlertDisruptsInTheSameCycle) {
  Plc& p = add(with_blocks(base_config("PLC1"), {}, {}));
  wire("EW", "PLC1");
  std::vector<CycleObservation> cycles;
  p.set_cycle_observer([&](const CycleObservation& o) { cycles.push_back(o); });
  arm("PLC1", 60000_ms);
  p.start();
  kernel.schedule(1050_ms, "tamper", [&] { p.poke(layout::kAlertBit, true); });
  kernel.run_until({2000_ms});

  for (const auto& c : cycles) {
    if (c.t < 1100_ms) {
      EXPECT_FALSE(c.alert);
      EXPECT_TRUE(c.core_executed);
    } else {
      EXPECT_TRUE(c.alert);
      EXPECT_TRUE(c.all_outputs_on);
      EXPECT_FALSE(c.core_executed);
      EXPECT_TRUE(c.disruption_ran);
    }
  }
  EXPECT_EQ(first_time(trace, kind::alert_raised, "PLC1"), 1050_ms);
  EXPECT_EQ(first_time(trace, kind::outputs_on, "PLC1"), 1100_ms);
  EXPECT_EQ(count_kind(trace, kind::outputs_on), 1u);
  EXPECT_EQ(count_kind(trace, kind::core_disabled), 1u);
}

TEST_F(Bench, DeadlineExpiryRaisesAlert) {
  Plc& p = add(with_blocks(base_config("PLC1"), {}, {}));
  wire("EW", "PLC1");
  arm("PLC1", 15000_ms);
  p.start();
  kernel.run_until({20000_ms});
  const auto alerts = testing::records_of(trace, kind::alert_raised, "PLC1");
  ASSERT_EQ(alerts.size(), 1u);
  EXPECT_EQ(alerts[0]->t, 15000_ms);
  EXPECT_EQ(*alerts[0]->field("cause"), "deadline");
}

TEST_F(Bench, HeartbeatWriteUpdatesLastChange) {
  Plc& p = add(with_blocks(base_config("PLC1"), {}, {{"EW", layout::kEwPollBit}}));
  wire("EW", "PLC1");
  arm("PLC1", 600000_ms);
  p.start();
  heartbeat("PLC1", 1000_ms, 30000_ms);
  kernel.run_until({30000_ms});
  EXPECT_FALSE(p.alert());
  EXPECT_EQ(p.read_bit(layout::kEwPollBit), false);
}

TEST_F(Bench, StaleHeartbeatAlertsWithinOneScan) {
  Plc& p = add(with_blocks(base_config("PLC1"), {}, {{"EW", layout::kEwPollBit}}));
  wire("EW", "PLC1");
  arm("PLC1", 600000_ms);
  p.start();
  heartbeat("PLC1", 1000_ms, 24000_ms);
  kernel.run_until({30000_ms});
  const auto t = first_time(trace, kind::alert_raised, "PLC1");
  ASSERT_TRUE(t);
  EXPECT_GE(*t, 25000_ms);
  EXPECT_LE(*t, 25100_ms);
  const auto* rec = testing::records_of(trace, kind::alert_raised, "PLC1")[0];
  EXPECT_EQ(*rec->field("cause"), "stale_poll");
  EXPECT_EQ(*rec->field("last_change_ms"), "24000");
}

// First scan at which now - last_change exceeds the allowed window, stepping
// through the scan grid by hand.
std::optional<std::int64_t> stale_alert_time(const std::set<std::int64_t>& writes, std::int64_t armed_at,
                                             int deadband, std::int64_t horizon) {
  std::int64_t last = armed_at;
  for (std::int64_t t = armed_at; t <= horizon; t += 100) {
    if (writes.contains(t)) last = t;
    if (t - last > deadband * 1000) return t;
  }
  return std::nullopt;
}

TEST_F(Bench, DeadbandToleratesMissedPolls) {
  const std::set<std::int64_t> dropped{6000};
  for (int deadband : {1, 2, 3}) {
    Kernel k;
    Network n{k};
    TraceLog tr;
    n.add_device("EW");
    Plc p(SimContext{k, n, tr}, with_blocks(base_config("PLC1"), {}, {{"EW", layout::kEwPollBit}}, deadband));
    n.attach("PLC1", &p);
    n.add_link("EW", "PLC1");
    auto write = [&](BitAddress a, bool v) {
      NetMessage m;
      m.src = "EW";
      m.dst = "PLC1";
      m.function = ProtocolFunction::ew_write;
      m.db = a.db;
      m.byte_offset = a.byte;
      m.bit_offset = a.bit;
      m.payload = Bytes{static_cast<std::uint8_t>(v)};
      n.deliver(m);
    };
    write(layout::kEnableBit, true);
    p.start();
    std::set<std::int64_t> writes;
    bool v = false;
    for (std::int64_t t = 1000; t <= 20000; t += 1000) {
      if (dropped.contains(t)) continue;
      writes.insert(t);
      k.schedule(SimTime{t}, "hb", [&, t] {
        v = !v;
        write(layout::kEwPollBit, v);
      });
    }
    k.run_until({20000_ms});
    const auto expected = stale_alert_time(writes, 0, deadband, 20000);
    const auto got = first_time(tr, kind::alert_raised, "PLC1");
    ASSERT_EQ(expected.has_value(), got.has_value()) << "deadband " << deadband;
    if (expected) EXPECT_EQ(got->ms, *expected) << "deadband " << deadband;
    if (deadband == 1) {
      EXPECT_EQ(expected, std::optional<std::int64_t>(6100));
    } else {
      EXPECT_FALSE(expected);
    }
  }
}

TEST_F(Bench, ConfigWriteNeedsPassword) {
  Plc& p = add(with_blocks(base_config("PLC1"), {}, {}));
  wire("EW", "PLC1");
  NetMessage m;
  m.src = "EW";
  m.dst = "PLC1";
  m.function = ProtocolFunction::config_write;
  m.payload = encode_config(base_config("PLC1"));
  EXPECT_EQ(net.deliver(m).outcome, Outcome::access_denied);
  EXPECT_TRUE(p.config().dm_blocks());
  m.credential = "wrong";
  EXPECT_EQ(net.deliver(m).outcome, Outcome::access_denied);
  EXPECT_EQ(count_kind(trace, kind::config_access_denied), 2u);
  m.credential = "secret";
  EXPECT_EQ(net.deliver(m).outcome, Outcome::delivered);
  EXPECT_FALSE(p.config().dm_blocks());
  EXPECT_EQ(count_kind(trace, kind::config_replaced), 1u);
}

TEST_F(Bench, WriteToMissingBlock) {
  add(base_config("PLC1"));
  net.add_device("PLC2");
  wire("PLC2", "PLC1");
  NetMessage m;
  m.src = "PLC2";
  m.dst = "PLC1";
  m.function = ProtocolFunction::put_write;
  m.db = 999;
  m.payload = Bytes{1};
  EXPECT_EQ(net.deliver(m).outcome, Outcome::address_missing);
  m.db = 1;
  m.byte_offset = 16;
  EXPECT_EQ(net.deliver(m).outcome, Outcome::address_missing);
}

TEST_F(Bench, ReadStatusByte) {
  Plc& p = add(with_blocks(base_config("PLC1"), {}, {}));
  wire("EW", "PLC1");
  arm("PLC1", 60000_ms);
  NetMessage m;
  m.src = "EW";
  m.dst = "PLC1";
  m.function = ProtocolFunction::get_read;
  m.db = 500;
  auto r = net.deliver(m);
  ASSERT_TRUE(r.response_payload);
  EXPECT_EQ((*r.response_payload)[0], 0b10);
  p.poke(layout::kAlertBit, true);
  r = net.deliver(m);
  EXPECT_EQ((*r.response_payload)[0], 0b11);
}

TEST_F(Bench, ConfigReadNeedsPassword) {
  add(with_blocks(base_config("PLC1"), {}, {}));
  wire("EW", "PLC1");
  NetMessage m;
  m.src = "EW";
  m.dst = "PLC1";
  m.function = ProtocolFunction::config_read;
  EXPECT_EQ(net.deliver(m).outcome, Outcome::access_denied);
  m.credential = "secret";
  const auto r = net.deliver(m);
  ASSERT_TRUE(r.ok());
  const auto cfg = decode_config(*r.response_payload);
  EXPECT_EQ(cfg.id, "PLC1");
  EXPECT_TRUE(cfg.dm_blocks());
  EXPECT_EQ(cfg.core_blocks.size(), 1u);
}

TEST_F(Bench, StatusBlockGuard) {
  Plc& p = add(with_blocks(base_config("PLC1"), {}, {}));
  wire("EW", "PLC1");
  net.add_device("intruder");
  wire("intruder", "PLC1");
  EXPECT_TRUE(ew_write_bit("PLC1", layout::kEnableBit, true, "intruder").ok());
  EXPECT_FALSE(p.enabled());
  arm("PLC1", 60000_ms);
  p.poke(layout::kAlertBit, true);
  EXPECT_TRUE(p.alert());
  // Clearing the alert bit directly never works; only a disarm does.
  ew_write_bit("PLC1", layout::kAlertBit, false);
  EXPECT_TRUE(p.alert());
  p.poke(layout::kAlertBit, false);
  EXPECT_TRUE(p.alert());
  ew_write_bit("PLC1", layout::kEnableBit, false);
  EXPECT_FALSE(p.alert());
  EXPECT_FALSE(p.enabled());
  const auto d = testing::records_of(trace, kind::disarmed, "PLC1");
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(*d[0]->field("cleared_alert"), "1");
}

class Pair : public Bench {
 protected:
  void SetUp() override {
    Bench::SetUp();
    const PollAssignment to_b{"A", "B", layout::neighbor_poll_bit(1), true};
    const PollAssignment to_a{"B", "A", layout::neighbor_poll_bit(1), true};
    a = &add(with_blocks(base_config("A"), {to_b}, {{"B", layout::neighbor_poll_bit(1)}}));
    b = &add(with_blocks(base_config("B"), {to_a}, {{"A", layout::neighbor_poll_bit(1)}}));
    wire("A", "B");
    wire("EW", "A");
    arm("A", 600000_ms);
    arm("B", 600000_ms);
    a->start();
    b->start();
  }

  Plc* a = nullptr;
  Plc* b = nullptr;
};

TEST_F(Pair, HealthyNeighboursStayQuiet) {
  kernel.run_until({20000_ms});
  EXPECT_FALSE(a->alert());
  EXPECT_FALSE(b->alert());
  EXPECT_EQ(count_kind(trace, kind::poll_sent, "A"), 21u);
  EXPECT_EQ(count_kind(trace, kind::poll_sent, "B"), 21u);
}

TEST_F(Pair, NeighbourAlertPropagates) {
  kernel.schedule(5050_ms, "tamper", [&] { b->poke(layout::kAlertBit, true); });
  kernel.run_until({10000_ms});
  const auto* rec = testing::records_of(trace, kind::alert_raised, "A").at(0);
  EXPECT_EQ(rec->t, 6000_ms);
  EXPECT_EQ(*rec->field("cause"), "neighbor_alert");
}

TEST_F(Pair, RemovedStatusBlockCountsAsAlert) {
  kernel.schedule(5050_ms, "reflash", [&] {
    NetMessage m;
    m.src = "EW";
    m.dst = "B";
    m.function = ProtocolFunction::config_write;
    m.credential = "secret";
    m.payload = encode_config(base_config("B"));
    ASSERT_TRUE(net.deliver(m).ok());
  });
  kernel.run_until({10000_ms});
  const auto alerts = testing::records_of(trace, kind::alert_raised, "A");
  ASSERT_FALSE(alerts.empty());
  EXPECT_EQ(alerts[0]->t, 6000_ms);
  EXPECT_EQ(*alerts[0]->field("cause"), "poll_failed");
  EXPECT_EQ(*alerts[0]->field("outcome"), "address_missing");
}

TEST_F(Pair, UnreachableTargetRaisesAndStopsPolling) {
  kernel.schedule(5050_ms, "cut", [&] { net.cut_link("A", "B"); });
  kernel.run_until({10000_ms});
  EXPECT_EQ(first_time(trace, kind::alert_raised, "A"), 6000_ms);
  EXPECT_EQ(first_time(trace, kind::alert_raised, "B"), 6000_ms);
  for (const auto& r : trace.records()) {
    if (r.kind == kind::poll_sent) EXPECT_LT(r.t, 6000_ms);
  }
  EXPECT_EQ(count_kind(trace, kind::poll_failed, "A"), 1u);
}

TEST_F(Pair, AlertedPlcSendsNoPolls) {
  kernel.run_until({3000_ms});
  a->poke(layout::kAlertBit, true);
  const auto sent_before = count_kind(trace, kind::poll_sent, "A");
  a->send_polls();
  kernel.run_until({10000_ms});
  EXPECT_EQ(count_kind(trace, kind::poll_sent, "A"), sent_before);
  EXPECT_FALSE(a->polling());
}

TEST_F(Pair, HaltedNeighbourIsDown) {
  kernel.schedule(5050_ms, "halt", [&] { b->halt(); });
  kernel.run_until({10000_ms});
  const auto alerts = testing::records_of(trace, kind::alert_raised, "A");
  ASSERT_EQ(alerts.size(), 1u);
  EXPECT_EQ(*alerts[0]->field("outcome"), "dst_down");
  EXPECT_EQ(alerts[0]->t, 6000_ms);
}

TEST(PlcConfig, InvariantsChecked) {
  auto c = base_config("X");
  c.dm = DmProgram{};
  EXPECT_THROW(c.check_invariants(), Error);
  c.data_blocks[500] = Bytes(8, 0);
  c.data_blocks[501] = Bytes(1, 0);
  EXPECT_NO_THROW(c.check_invariants());
  c.dm->deadband_misses = 0;
  EXPECT_THROW(c.check_invariants(), Error);
}

TEST(PlcConfig, CodecRoundTripPreservesEverything) {
  auto c = with_blocks(base_config("PLC7"), {{"PLC7", "PLC8", layout::neighbor_poll_bit(3), true}},
                       {{"EW", layout::kEwPollBit}}, 2);
  c.safe_shutdown_signal = BitAddress{1, 0, 3};
  c.comm.push_back({"PLC7", "PLC8", "put", 10, 500_ms});
  c.data_blocks[1][3] = 0x5a;
  const auto back = decode_config(encode_config(c));
  EXPECT_EQ(encode_config(back), encode_config(c));
  EXPECT_EQ(back.dm->outgoing, c.dm->outgoing);
  EXPECT_EQ(back.data_blocks, c.data_blocks);
  EXPECT_EQ(back.config_password, c.config_password);
  EXPECT_THROW(decode_config(Bytes{1, 2, 3}), Error);
}

}  // namespace
}  // namespace dmsim
