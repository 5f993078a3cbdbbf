#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "stac/control_plane.hpp"

namespace stac {
namespace {

NodeId id(const std::string& s) { return NodeId{s}; }

Link uplink(const std::string& from, const std::string& to, ChannelState ch = {}) {
  return Link{LinkKey{id(from), id(to)}, ConnectionRow{ch, {0xab, 0xcd}}};
}

TEST(ConnectionInfoTable, RegisterAddsRows) {
  ConnectionInfoTable t;
  t.register_node(id("a"), {uplink("a", "d", {2.0, 0.3, 0.2})});
  EXPECT_TRUE(t.contains(id("a")));
  ASSERT_NE(t.find(id("a"), id("d")), nullptr);
  EXPECT_EQ(t.find(id("a"), id("d"))->channel.gain, 2.0);
  EXPECT_EQ(t.find(id("a"), id("d"))->steering, (std::vector<std::uint8_t>{0xab, 0xcd}));
  EXPECT_EQ(t.find(id("d"), id("a")), nullptr);
}

TEST(ConnectionInfoTable, RegisterThenDeregisterRestoresTable) {
  ConnectionInfoTable t;
  t.register_node(id("d"), {});
  t.register_node(id("a"), {uplink("a", "d")});
  const ConnectionInfoTable before = t;
  t.register_node(id("b"), {uplink("b", "d", {0.5, 1.0, 0.1}), uplink("a", "b")});
  EXPECT_NE(t, before);
  t.deregister_node(id("b"));
  EXPECT_EQ(t, before);
}

TEST(ConnectionInfoTable, Errors) {
  ConnectionInfoTable t;
  t.register_node(id("a"), {uplink("a", "d")});
  EXPECT_THROW(t.register_node(id("a"), {}), ConflictError);
  EXPECT_THROW(t.register_node(id("d"), {uplink("a", "d")}), ConflictError);
  EXPECT_THROW(t.register_node(id("b"), {uplink("b", "d"), uplink("b", "d")}), ConflictError);
  EXPECT_THROW(t.register_node(id("c"), {uplink("x", "y")}), ArgumentError);
  EXPECT_THROW(t.register_node(id("c"), {uplink("c", "c")}), ArgumentError);
  EXPECT_THROW(t.register_node(id("c"), {uplink("c", "d", {0.0, 0.0, 0.0})}), ArgumentError);
  EXPECT_THROW(t.register_node(id("c"), {uplink("c", "d", {1.0, 0.0, -0.1})}), ArgumentError);
  EXPECT_FALSE(t.contains(id("b")));
  EXPECT_FALSE(t.contains(id("c")));
  t.deregister_node(id("a"));
  EXPECT_THROW(t.deregister_node(id("a")), ConfigurationError);
  EXPECT_THROW(t.deregister_node(id("zz")), ConfigurationError);
}

TEST(RoutingTable, Basics) {
  RoutingTable r;
  r.set_next_hop(id("a"), id("d"));
  EXPECT_EQ(r.next_hop(id("a")), id("d"));
  EXPECT_FALSE(r.next_hop(id("d")).has_value());
  EXPECT_THROW(r.set_next_hop(id("a"), id("a")), RoutingError);
}

TEST(ScheduleTable, Basics) {
  ScheduleTable s;
  s.add("x", ScheduleEntry{SessionRequest{{id("a")}, id("d"), WeightAssignment({1}), std::nullopt}, 0, 0.0});
  EXPECT_NE(s.find("x"), nullptr);
  EXPECT_THROW(s.add("x", ScheduleEntry{SessionRequest{{id("a")}, id("d"), WeightAssignment({1}), std::nullopt}, 1, 0.0}),
               ConflictError);
  s.remove("x");
  EXPECT_EQ(s.find("x"), nullptr);
  EXPECT_THROW(s.remove("x"), ConfigurationError);
}

TEST(SessionParams, Example) {
  ConnectionInfoTable t;
  t.register_node(id("a"), {uplink("a", "d", {2.0, 0.3, 0.2})});
  const auto p = compute_session_params(SessionRequest{{id("a")}, id("d"), WeightAssignment({1}), 1.0}, t);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_DOUBLE_EQ(p[0].power, 0.25);
  EXPECT_DOUBLE_EQ(p[0].pre_phase, 0.3);
  EXPECT_DOUBLE_EQ(p[0].tx_time, 0.8);
}

TEST(SessionParams, WeightEqualToGainGivesUnitPower) {
  ConnectionInfoTable t;
  t.register_node(id("a"), {uplink("a", "d", {3.0, 0.0, 0.0})});
  const auto p = compute_session_params(SessionRequest{{id("a")}, id("d"), WeightAssignment({3}), std::nullopt}, t);
  EXPECT_DOUBLE_EQ(p[0].power, 1.0);
}

TEST(SessionParams, DefaultReferenceTimeIsLatestDelay) {
  ConnectionInfoTable t;
  t.register_node(id("a"), {uplink("a", "d", {1.0, 0.0, 0.2})});
  t.register_node(id("b"), {uplink("b", "d", {1.0, 0.0, 0.7})});
  const SessionRequest s{{id("a"), id("b")}, id("d"), WeightAssignment({1, 1}), std::nullopt};
  EXPECT_DOUBLE_EQ(session_reference_time(s, t), 0.7);
  const auto p = compute_session_params(s, t);
  EXPECT_DOUBLE_EQ(p[0].tx_time, 0.5);
  EXPECT_DOUBLE_EQ(p[1].tx_time, 0.0);
}

TEST(SessionParams, Errors) {
  ConnectionInfoTable t;
  t.register_node(id("a"), {uplink("a", "d", {1.0, 0.0, 0.5})});
  t.register_node(id("b"), {});
  EXPECT_THROW(compute_session_params(SessionRequest{{id("b")}, id("d"), WeightAssignment({1}), std::nullopt}, t),
               ConfigurationError);
  EXPECT_THROW(compute_session_params(SessionRequest{{id("a")}, id("d"), WeightAssignment({1}), 0.4}, t),
               ScheduleError);
  EXPECT_THROW(compute_session_params(SessionRequest{{}, id("d"), WeightAssignment({1}), std::nullopt}, t),
               ScheduleError);
  EXPECT_THROW(compute_session_params(SessionRequest{{id("a"), id("a")}, id("d"), WeightAssignment({1, 1}), std::nullopt}, t),
               ScheduleError);
  EXPECT_THROW(compute_session_params(SessionRequest{{id("a")}, id("a"), WeightAssignment({1}), std::nullopt}, t),
               ScheduleError);
  EXPECT_THROW(compute_session_params(SessionRequest{{id("a")}, id("d"), WeightAssignment({1, 2}), std::nullopt}, t),
               ScheduleError);
}

// Random tables: the pre-equalized superposition lands on sum_i w_i d_i.
TEST(SessionParams, CancelChannelForRandomTables) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lg(std::log(0.1), std::log(10.0));
  std::uniform_real_distribution<double> phase(-3.14159, 3.14159);
  std::uniform_real_distribution<double> delay(0.0, 2.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 1 + rng() % 8;
    ConnectionInfoTable t;
    SessionRequest s{{}, id("d"), WeightAssignment({1}), std::nullopt};
    std::vector<ChannelState> channels;
    std::vector<std::int64_t> w;
    std::vector<int> symbols;
    std::int64_t expected = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const ChannelState ch{std::exp(lg(rng)), phase(rng), delay(rng)};
      const std::string name = "n" + std::to_string(i);
      t.register_node(id(name), {uplink(name, "d", ch)});
      s.participants.push_back(id(name));
      channels.push_back(ch);
      w.push_back(1 + static_cast<std::int64_t>(rng() % 50));
      symbols.push_back((rng() & 1) ? -1 : 1);
      expected += w.back() * symbols.back();
    }
    s.weights = WeightAssignment(w);
    const auto params = compute_session_params(s, t);
    const double t0 = session_reference_time(s, t);
    std::mt19937_64 unused(0);
    const auto y = superpose_passband(std::span<const int>(symbols), std::span<const ChannelState>(channels),
                                      std::span<const TransmitParams>(params), ImpairmentModel{}, unused, t0);
    EXPECT_EQ(y.imag(), 0.0);
    EXPECT_NEAR(y.real(), static_cast<double>(expected), 1e-12 * static_cast<double>(s.weights.total()));
    EXPECT_EQ(detect_nearest(y.real(), build_constellation(s.weights)), expected);
  }
}

// Two relays under the destination: sources a1,a2 -> r1; b1,b2,b3 -> r2; c -> d; r1,r2 -> d.
struct TwoLevelNet {
  ConnectionInfoTable table;
  RoutingTable routing;
  std::vector<NodeId> sources{id("a1"), id("a2"), id("b1"), id("b2"), id("b3"), id("c")};

  TwoLevelNet() {
    table.register_node(id("d"), {});
    table.register_node(id("r1"), {uplink("r1", "d", {1.5, 0.1, 0.3})});
    table.register_node(id("r2"), {uplink("r2", "d", {0.7, 0.2, 0.1})});
    table.register_node(id("c"), {uplink("c", "d", {1.0, 0.0, 0.0})});
    for (auto s : {"a1", "a2"}) table.register_node(id(s), {uplink(s, "r1", {1.2, 0.4, 0.05})});
    for (auto s : {"b1", "b2", "b3"}) table.register_node(id(s), {uplink(s, "r2", {0.9, -0.4, 0.15})});
    for (auto s : {"a1", "a2"}) routing.set_next_hop(id(s), id("r1"));
    for (auto s : {"b1", "b2", "b3"}) routing.set_next_hop(id(s), id("r2"));
    for (auto s : {"r1", "r2", "c"}) routing.set_next_hop(id(s), id("d"));
  }
};

TEST(PlanSession, StarIsOneUnit) {
  ConnectionInfoTable t;
  RoutingTable r;
  std::vector<NodeId> sources;
  for (int i = 0; i < 4; ++i) {
    const std::string n = "s" + std::to_string(i);
    t.register_node(id(n), {uplink(n, "d", {1.0 + i, 0.1 * i, 0.0})});
    r.set_next_hop(id(n), id("d"));
    sources.push_back(id(n));
  }
  const auto plan = plan_m2o_session(sources, id("d"), WeightAssignment({1, 2, 4, 8}), t, r);
  ASSERT_EQ(plan.units.size(), 1u);
  EXPECT_EQ(plan.units[0].receiver, id("d"));
  EXPECT_EQ(plan.units[0].transmitters, sources);
  EXPECT_EQ(plan.units[0].weights, WeightAssignment({1, 2, 4, 8}));
  EXPECT_EQ(plan.units[0].slot, 0u);
  EXPECT_DOUBLE_EQ(plan.units[0].params[3].power, 4.0);
}

TEST(PlanSession, TwoLevelTreeListsRelaysFirst) {
  const TwoLevelNet f;
  const auto plan = plan_m2o_session(f.sources, id("d"), WeightAssignment({1, 2, 3, 4, 5, 6}), f.table, f.routing);
  ASSERT_EQ(plan.units.size(), 3u);
  EXPECT_EQ(plan.units[0].receiver, id("r1"));
  EXPECT_EQ(plan.units[1].receiver, id("r2"));
  EXPECT_EQ(plan.units[2].receiver, id("d"));
  EXPECT_EQ(plan.units[0].transmitters, (std::vector<NodeId>{id("a1"), id("a2")}));
  EXPECT_EQ(plan.units[0].weights, WeightAssignment({1, 2}));
  EXPECT_EQ(plan.units[1].weights, WeightAssignment({3, 4, 5}));
  EXPECT_EQ(plan.units[2].transmitters, (std::vector<NodeId>{id("r1"), id("r2"), id("c")}));
  EXPECT_EQ(plan.units[2].weights, WeightAssignment({1, 1, 6}));
  EXPECT_EQ(plan.units[0].depth, 1u);
  EXPECT_EQ(plan.units[2].depth, 0u);
  EXPECT_EQ(plan.units[0].slot, 0u);
  EXPECT_EQ(plan.units[1].slot, 0u);
  EXPECT_EQ(plan.units[2].slot, 1u);
  EXPECT_DOUBLE_EQ(plan.units[2].reference_time, 0.3);
}

TEST(PlanSession, UnitsSharingAReceiverNeverShareASlot) {
  const TwoLevelNet f;
  const auto plan = plan_m2o_session(f.sources, id("d"), WeightAssignment::equal(6), f.table, f.routing);
  for (std::size_t i = 0; i < plan.units.size(); ++i) {
    for (std::size_t j = i + 1; j < plan.units.size(); ++j) {
      if (plan.units[i].receiver == plan.units[j].receiver) {
        EXPECT_NE(plan.units[i].slot, plan.units[j].slot);
      }
    }
  }
}

TEST(PlanSession, RoutingErrors) {
  TwoLevelNet f;
  f.routing.set_next_hop(id("r1"), id("r2"));
  f.routing.set_next_hop(id("r2"), id("r1"));
  EXPECT_THROW(plan_m2o_session(f.sources, id("d"), WeightAssignment::equal(6), f.table, f.routing), RoutingError);

  TwoLevelNet g;
  g.table.register_node(id("lonely"), {uplink("lonely", "d")});
  std::vector<NodeId> sources = g.sources;
  sources.push_back(id("lonely"));
  EXPECT_THROW(plan_m2o_session(sources, id("d"), WeightAssignment::equal(7), g.table, g.routing), RoutingError);

  TwoLevelNet h;
  h.routing.set_next_hop(id("a1"), id("c"));
  EXPECT_THROW(plan_m2o_session(h.sources, id("d"), WeightAssignment::equal(6), h.table, h.routing), RoutingError);
}

TEST(PlanSession, MissingRowIsConfigurationError) {
  TwoLevelNet f;
  f.table.deregister_node(id("r1"));
  EXPECT_THROW(plan_m2o_session(f.sources, id("d"), WeightAssignment::equal(6), f.table, f.routing),
               ConfigurationError);
}

TEST(NetworkServer, ScheduleAndPlan) {
  NetworkServer server;
  server.register_node(id("d"), {});
  server.register_node(id("a"), {uplink("a", "d", {2.0, 0.3, 0.2})});
  server.register_node(id("b"), {uplink("b", "d", {0.5, -0.3, 0.6})});
  server.set_route(id("a"), id("d"));
  server.set_route(id("b"), id("d"));

  const SessionRequest req{{id("a"), id("b")}, id("d"), WeightAssignment({1, 2}), std::nullopt};
  const auto entry = server.schedule("s1", req, 0);
  EXPECT_DOUBLE_EQ(entry.reference_time, 0.6);
  EXPECT_THROW(server.schedule("s1", req, 1), ConflictError);
  EXPECT_THROW(server.schedule("bad", SessionRequest{{id("a")}, id("d"), WeightAssignment({1}), 0.1}, 0),
               ScheduleError);
  EXPECT_EQ(server.schedules().entries().size(), 1u);

  const auto params = server.params_for("s1");
  EXPECT_DOUBLE_EQ(params[0].power, 0.25);
  EXPECT_DOUBLE_EQ(params[1].power, 16.0);
  EXPECT_THROW(server.params_for("nope"), ConfigurationError);

  const auto snapshot = server.connection_snapshot();
  server.deregister_node(id("b"));
  EXPECT_TRUE(snapshot.contains(id("b")));
  EXPECT_THROW(server.params_for("s1"), ConfigurationError);
  EXPECT_EQ(server.plan({id("a")}, id("d"), WeightAssignment({1})).units.size(), 1u);
}

}  // namespace
}  // namespace stac
