#include <gtest/gtest.h>

#include "dmsim/ew.hpp"
#include "dmsim/scenario.hpp"
#include "support.hpp"

namespace dmsim {
namespace {

using testing::count_kind;
using testing::first_time;
using testing::fixture;

/// Deployed but not armed.
std::unique_ptr<Fleet> deployed(const std::string& project = "projects/figure6.json") {
  ScenarioScript s;
  s.project = load_project(fixture(project));
  s.horizon = 60000_ms;
  s.dmplc.key = "k";
  return prepare_fleet(s, 1);
}

TEST(Workstation, PollsEveryPlcOncePerSecond) {
  auto f = deployed();
  f->ew().arm_all({60000_ms, "k"});
  f->run_until(9999_ms);
  std::map<std::int64_t, std::map<ProtocolFunction, int>> per_second;
  for (const auto& fl : f->net().flows()) {
    if (fl.src != "EW") continue;
    if ((fl.function == ProtocolFunction::ew_write && fl.db == 501) ||
        (fl.function == ProtocolFunction::ew_read && fl.db == 500)) {
      ++per_second[fl.t.ms / 1000][fl.function];
    }
  }
  ASSERT_EQ(per_second.size(), 10u);
  for (const auto& [s, counts] : per_second) {
    if (s == 0) continue;  // arming also stages one status read per PLC
    EXPECT_EQ(counts.at(ProtocolFunction::ew_write), 3) << "second " << s;
    EXPECT_EQ(counts.at(ProtocolFunction::ew_read), 3) << "second " << s;
  }
  EXPECT_EQ(count_kind(f->trace(), kind::poll_sent, "EW"), 30u);
}

TEST(Workstation, UnreachablePlcStopsAllPolling) {
  auto f = deployed();
  f->ew().arm_all({60000_ms, "k"});
  f->kernel().inject(24500_ms, [&] {
    f->net().cut_link("EW", "PLC3");
    f->net().cut_link("PLC2", "PLC3");
  });
  f->run_until(30000_ms);
  EXPECT_TRUE(f->ew().shutdown());
  EXPECT_FALSE(f->ew().polling());
  EXPECT_EQ(first_time(f->trace(), kind::ew_shutdown, "EW"), 25000_ms);
  for (const auto& r : f->trace().records()) {
    if (r.device != "EW" || r.kind != kind::poll_sent) continue;
    EXPECT_LE(r.t, 25000_ms);
    if (*r.field("target") == "PLC3") EXPECT_LT(r.t, 25000_ms);
  }
  const auto failed = testing::records_of(f->trace(), kind::poll_failed, "EW");
  ASSERT_EQ(failed.size(), 1u);
  EXPECT_EQ(*failed[0]->field("target"), "PLC3");
  EXPECT_EQ(*failed[0]->field("outcome"), "no_route");
}

TEST(Workstation, ObservedAlertStopsAllPolling) {
  auto f = deployed();
  f->ew().arm_all({60000_ms, "k"});
  f->kernel().inject(5050_ms, [&] { f->plc("PLC1").poke(layout::kAlertBit, true); });
  f->run_until(10000_ms);
  const auto obs = testing::records_of(f->trace(), kind::alert_observed, "EW");
  ASSERT_EQ(obs.size(), 1u);
  EXPECT_EQ(*obs[0]->field("target"), "PLC1");
  EXPECT_EQ(obs[0]->t, 6000_ms);
  EXPECT_TRUE(f->ew().shutdown());
  EXPECT_EQ(count_kind(f->trace(), kind::polling_ceased, "EW"), 1u);
  EXPECT_EQ(first_time(f->trace(), kind::ew_shutdown, "EW"), 6000_ms);
}

TEST(Workstation, ArmEnablesEveryPlcAtOnce) {
  auto f = deployed();
  const auto rep = f->ew().arm_all({15000_ms, "k"});
  EXPECT_TRUE(rep.armed);
  EXPECT_TRUE(f->ew().encrypted());
  for (const auto& id : f->plc_ids()) {
    EXPECT_TRUE(f->plc(id).enabled()) << id;
    EXPECT_EQ(f->plc(id).deadline(), 15000_ms);
  }
  const auto armed = testing::records_of(f->trace(), kind::armed, "EW");
  ASSERT_EQ(armed.size(), 1u);
  EXPECT_EQ(*armed[0]->field("plcs"), "3");
}

TEST(Workstation, ArmAbortsWhenAnyPlcIsDown) {
  auto f = deployed();
  f->halt_device("PLC2");
  const auto rep = f->ew().arm_all({15000_ms, "k"});
  EXPECT_FALSE(rep.armed);
  EXPECT_FALSE(f->ew().encrypted());
  ASSERT_EQ(rep.staged.size(), 3u);
  EXPECT_EQ(rep.staged[1], (std::pair<DeviceId, Outcome>{"PLC2", Outcome::dst_down}));
  // Read the enable bits straight out of memory, not through the runtime.
  for (const auto& id : f->plc_ids()) {
    const auto& mem = f->plc(id).config().data_blocks.at(500);
    EXPECT_EQ(mem[0] & 0b10, 0) << id;
  }
  for (const auto& fl : f->net().flows()) {
    EXPECT_FALSE(fl.function == ProtocolFunction::ew_write && fl.db == 500);
  }
  EXPECT_EQ(count_kind(f->trace(), kind::arm_aborted, "EW"), 1u);
  f->run_until(20000_ms);
  EXPECT_EQ(count_kind(f->trace(), kind::alert_raised), 0u);
}

TEST(Workstation, ArmTwiceIsRejected) {
  auto f = deployed();
  f->ew().arm_all({15000_ms, "k"});
  EXPECT_THROW(f->ew().arm_all({15000_ms, "k"}), Error);
}

TEST(Workstation, ArmPreconditions) {
  auto f = deployed();
  EXPECT_THROW(f->ew().arm_all({0_ms, "k"}), Error);
  EXPECT_THROW(f->ew().arm_all({1000_ms, ""}), Error);
  ScenarioScript s;
  s.project = load_project(fixture("projects/figure6.json"));
  s.dmplc.auto_deploy = false;
  auto bare = prepare_fleet(s, 1);
  EXPECT_THROW(bare->ew().arm_all({15000_ms, "k"}), Error);
}

TEST(Workstation, CorrectKeyDisarmsWithoutSideEffects) {
  auto f = deployed();
  f->ew().arm_all({15000_ms, "k"});
  DisarmOutcome outcome = DisarmOutcome::not_armed;
  f->kernel().inject(10000_ms, [&] { outcome = f->ew().accept_key("k"); });
  f->run_until(30000_ms);
  EXPECT_EQ(outcome, DisarmOutcome::disarmed);
  EXPECT_EQ(count_kind(f->trace(), kind::alert_raised), 0u);
  EXPECT_EQ(count_kind(f->trace(), kind::outputs_on), 0u);
  EXPECT_FALSE(f->ew().encrypted());
  for (const auto& id : f->plc_ids()) {
    EXPECT_FALSE(f->plc(id).enabled());
    EXPECT_FALSE(f->plc(id).config().config_password) << "password left on " << id;
    EXPECT_EQ(count_kind(f->trace(), kind::disarmed, id), 1u);
  }
  bool late_core = false;
  for (const auto& r : f->trace().records()) late_core |= r.kind == kind::core_output && r.t > 15000_ms;
  EXPECT_TRUE(late_core);
}

TEST(Workstation, WrongKeyChangesNothing) {
  auto f = deployed();
  f->ew().arm_all({15000_ms, "k"});
  f->run_until(5000_ms);
  const auto flows_before = f->net().flows().size();
  EXPECT_EQ(f->ew().accept_key("guess"), DisarmOutcome::wrong_key);
  EXPECT_EQ(f->ew().key_attempts(), 1);
  EXPECT_EQ(f->net().flows().size(), flows_before);
  EXPECT_TRUE(f->ew().encrypted());
  EXPECT_TRUE(f->ew().polling());
  for (const auto& id : f->plc_ids()) EXPECT_TRUE(f->plc(id).enabled());
  EXPECT_EQ(count_kind(f->trace(), kind::key_rejected, "EW"), 1u);
}

TEST(Workstation, KeyAfterShutdownCannotDisarm) {
  auto f = deployed();
  f->ew().arm_all({60000_ms, "k"});
  f->kernel().inject(5050_ms, [&] { f->halt_device("PLC2"); });
  DisarmOutcome outcome = DisarmOutcome::disarmed;
  f->kernel().inject(7000_ms, [&] { outcome = f->ew().accept_key("k"); });
  f->run_until(10000_ms);
  EXPECT_EQ(outcome, DisarmOutcome::ew_shutdown);

  // Walk the trace: shutdown strictly precedes the key attempt and no
  // enable write leaves the workstation afterwards.
  const auto shut = first_time(f->trace(), kind::ew_shutdown, "EW");
  ASSERT_TRUE(shut);
  EXPECT_LT(*shut, 7000_ms);
  for (const auto& fl : f->net().flows()) {
    if (fl.src == "EW" && fl.t >= *shut) {
      EXPECT_FALSE(fl.function == ProtocolFunction::ew_write && fl.db == 500) << fl.t.ms;
    }
  }
  for (const auto& id : {"PLC1", "PLC3"}) EXPECT_TRUE(f->plc(id).alert()) << id;
}

TEST(Workstation, DeadlineShutsDownAndPlcsDetonate) {
  auto f = deployed();
  f->ew().arm_all({15000_ms, "k"});
  f->run_until(20000_ms);
  EXPECT_TRUE(f->ew().shutdown());
  const auto ceased = testing::records_of(f->trace(), kind::polling_ceased, "EW");
  ASSERT_EQ(ceased.size(), 1u);
  EXPECT_EQ(ceased[0]->t, 15000_ms);
  EXPECT_EQ(*ceased[0]->field("cause"), "deadline");
  for (const auto& id : f->plc_ids()) EXPECT_EQ(first_time(f->trace(), kind::alert_raised, id), 15000_ms) << id;
}

}  // namespace
}  // namespace dmsim
