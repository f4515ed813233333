#include <gtest/gtest.h>

#include <sstream>

#include "dmsim/net.hpp"
#include "dmsim/plc.hpp"
#include "support.hpp"

namespace dmsim {
namespace {

class Recorder final : public Endpoint {
 public:
  bool alive() const override { return up; }
  DeliveryResult handle(const NetMessage& msg) override {
    received.push_back(msg);
    if (msg.db == 999) return {Outcome::address_missing, std::nullopt};
    if (is_write(msg.function)) return {Outcome::delivered, std::nullopt};
    return {Outcome::delivered, Bytes{0x2a}};
  }

  bool up = true;
  std::vector<NetMessage> received;
};

class NetworkTest : public ::testing::Test {
 protected:
  void SetUp() override {
    for (const auto* id : {"EW", "PLC1", "PLC2", "PLC3"}) net.attach(id, &ep[id]);
    net.add_link("EW", "PLC1");
    net.add_link("EW", "PLC2");
    net.add_link("EW", "PLC3");
    net.add_link("PLC1", "PLC2");
    net.add_link("PLC2", "PLC3");
  }

  static NetMessage poll(const DeviceId& src, const DeviceId& dst) {
    NetMessage m;
    m.src = src;
    m.dst = dst;
    m.function = ProtocolFunction::ew_write;
    m.db = 501;
    m.bit_offset = 0;
    m.payload = Bytes{1};
    return m;
  }

  Kernel kernel;
  Network net{kernel};
  std::map<std::string, Recorder> ep;
};

TEST_F(NetworkTest, DeliversWhenLinkUp) {
  const auto r = net.deliver(poll("EW", "PLC2"));
  EXPECT_EQ(r.outcome, Outcome::delivered);
  EXPECT_FALSE(r.response_payload);
  ASSERT_EQ(ep["PLC2"].received.size(), 1u);
  EXPECT_EQ(ep["PLC2"].received[0].db, 501);
}

TEST_F(NetworkTest, NoRouteAfterOnlyLinksCut) {
  net.cut_link("EW", "PLC3");
  net.cut_link("PLC2", "PLC3");
  EXPECT_EQ(net.deliver(poll("EW", "PLC3")).outcome, Outcome::no_route);
  EXPECT_TRUE(ep["PLC3"].received.empty());
}

TEST_F(NetworkTest, RoutesAroundCutLink) {
  net.cut_link("EW", "PLC3");
  EXPECT_TRUE(net.reachable("EW", "PLC3"));
  EXPECT_EQ(net.deliver(poll("EW", "PLC3")).outcome, Outcome::delivered);
}

TEST_F(NetworkTest, AddressMissingPassesThrough) {
  NetMessage m;
  m.src = "PLC1";
  m.dst = "PLC2";
  m.function = ProtocolFunction::get_read;
  m.db = 999;
  const auto r = net.deliver(m);
  EXPECT_EQ(r.outcome, Outcome::address_missing);
  EXPECT_FALSE(r.response_payload);
}

TEST_F(NetworkTest, DstDownWhenHalted) {
  ep["PLC1"].up = false;
  EXPECT_EQ(net.deliver(poll("EW", "PLC1")).outcome, Outcome::dst_down);
}

TEST_F(NetworkTest, ReadReturnsPayload) {
  NetMessage m;
  m.src = "PLC1";
  m.dst = "PLC2";
  m.function = ProtocolFunction::get_read;
  m.db = 500;
  const auto r = net.deliver(m);
  ASSERT_TRUE(r.response_payload);
  EXPECT_EQ((*r.response_payload)[0], 0x2a);
}

TEST_F(NetworkTest, OneFlowRecordPerAttempt) {
  net.deliver(poll("EW", "PLC1"));
  net.cut_link("EW", "PLC3");
  net.cut_link("PLC2", "PLC3");
  net.deliver(poll("EW", "PLC3"));
  ep["PLC2"].up = false;
  net.deliver(poll("EW", "PLC2"));
  ASSERT_EQ(net.flows().size(), 3u);
  EXPECT_EQ(net.flows()[0].outcome, Outcome::delivered);
  EXPECT_EQ(net.flows()[1].outcome, Outcome::no_route);
  EXPECT_EQ(net.flows()[2].outcome, Outcome::dst_down);
  EXPECT_EQ(net.flows()[1].function, ProtocolFunction::ew_write);
  EXPECT_EQ(net.flows()[1].db, 501);
}

TEST_F(NetworkTest, CutIsIdempotent) {
  net.cut_link("EW", "PLC1");
  net.cut_link("PLC1", "EW");
  EXPECT_TRUE(net.reachable("EW", "PLC1"));
  net.cut_link("PLC1", "PLC2");
  EXPECT_FALSE(net.reachable("EW", "PLC1"));
}

TEST_F(NetworkTest, UnknownLinkRejected) {
  EXPECT_THROW(net.cut_link("PLC1", "PLC3"), Error);
  EXPECT_THROW(net.restore_link("PLC1", "PLC3"), Error);
  EXPECT_THROW(net.cut_link("PLC1", "PLC9"), Error);
}

TEST_F(NetworkTest, RestoreIsIdempotent) {
  net.restore_link("EW", "PLC1");
  net.cut_link("EW", "PLC1");
  net.restore_link("EW", "PLC1");
  net.restore_link("EW", "PLC1");
  EXPECT_TRUE(std::all_of(net.links().begin(), net.links().end(), [](const Link& l) { return l.up; }));
}

TEST_F(NetworkTest, Reachability) {
  net.cut_link("EW", "PLC1");
  net.cut_link("EW", "PLC2");
  net.cut_link("EW", "PLC3");
  EXPECT_TRUE(net.reachable("PLC1", "PLC3"));
  net.cut_link("PLC1", "PLC2");
  net.cut_link("PLC2", "PLC3");
  EXPECT_FALSE(net.reachable("PLC1", "PLC3"));
  EXPECT_TRUE(net.reachable("PLC1", "PLC1"));
  EXPECT_THROW(net.reachable("PLC1", "nope"), Error);
}

TEST_F(NetworkTest, RejectsMalformedMessages) {
  auto m = poll("EW", "PLC1");
  m.payload.reset();
  EXPECT_THROW(net.deliver(m), Error);
  m = poll("EW", "PLC1");
  m.db = -1;
  EXPECT_THROW(net.deliver(m), Error);
  m = poll("ghost", "PLC1");
  EXPECT_THROW(net.deliver(m), Error);
  NetMessage read;
  read.src = "EW";
  read.dst = "PLC1";
  read.payload = Bytes{1};
  EXPECT_THROW(net.deliver(read), Error);
}

TEST_F(NetworkTest, LinkInvariants) {
  EXPECT_THROW(net.add_link("PLC1", "PLC1"), Error);
  EXPECT_THROW(net.add_link("PLC2", "PLC1"), Error);
}

TEST_F(NetworkTest, SendAppliesLatency) {
  net.set_latency("EW", "PLC1", 5_ms);
  std::optional<SimTime> done;
  net.send(poll("EW", "PLC1"), [&](const DeliveryResult& r) {
    EXPECT_TRUE(r.ok());
    done = kernel.now();
  });
  EXPECT_FALSE(done);
  kernel.run_until({100_ms});
  EXPECT_EQ(done, 5_ms);
  ASSERT_EQ(net.flows().size(), 1u);
  EXPECT_EQ(net.flows()[0].t, 5_ms);
}

TEST_F(NetworkTest, CutFailsInFlightDelivery) {
  for (auto& l : {std::pair{"EW", "PLC1"}, {"EW", "PLC2"}, {"EW", "PLC3"}, {"PLC1", "PLC2"}, {"PLC2", "PLC3"}}) {
    net.set_latency(l.first, l.second, 10_ms);
  }
  std::optional<Outcome> outcome;
  net.send(poll("EW", "PLC3"), [&](const DeliveryResult& r) { outcome = r.outcome; });
  kernel.schedule(5_ms, "test", [&] {
    net.cut_link("EW", "PLC3");
    net.cut_link("PLC2", "PLC3");
  });
  kernel.run_until({100_ms});
  EXPECT_EQ(outcome, Outcome::no_route);
  EXPECT_TRUE(ep["PLC3"].received.empty());
}

TEST(FlowLog, CsvRoundTrip) {
  std::vector<FlowRecord> flows{
      {1000_ms, "EW", "PLC1", ProtocolFunction::ew_write, 501, Outcome::delivered},
      {25000_ms, "EW", "PLC3", ProtocolFunction::ew_write, 501, Outcome::no_route},
      {25000_ms, "PLC2", "PLC3", ProtocolFunction::get_read, 500, Outcome::address_missing},
  };
  std::stringstream ss;
  write_flows(ss, flows);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "t_ms,src,dst,function,db,outcome");
  EXPECT_NE(text.find("25000,EW,PLC3,ew_write,501,no_route\n"), std::string::npos);
  EXPECT_EQ(read_flows(ss), flows);
}

TEST(FlowLog, RejectsMissingHeaderAndBadRows) {
  std::stringstream a("1,EW,PLC1,ew_write,501,delivered\n");
  EXPECT_THROW(read_flows(a), Error);
  std::stringstream b("t_ms,src,dst,function,db,outcome\nx,EW,PLC1,ew_write,501,delivered\n");
  EXPECT_THROW(read_flows(b), Error);
  std::stringstream c("t_ms,src,dst,function,db,outcome\n1,EW,PLC1,teleport,501,delivered\n");
  EXPECT_THROW(read_flows(c), Error);
}

}  // namespace
}  // namespace dmsim
