// Copyright 2026 The tmkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "tmk/graph.hpp"
#include "tmk/railcar.hpp"

namespace tmk {
namespace {

using testing::events_of;
using Events = std::vector<std::string>;

RailcarParams one_terminal(int segments = 3, int spots = 2) { return {1, segments, spots}; }

RailcarWorld single_car(RailcarParams p = one_terminal()) { return default_world(p, 1); }

SimConfig ticks(std::int64_t n, std::int64_t seed = 0, ChoicePolicy policy = ChoicePolicy::by_priority) {
  SimConfig c;
  c.max_ticks = n;
  c.seed = seed;
  c.policy = policy;
  return c;
}

ChoiceScript script(const std::string& point, std::vector<std::string> outcomes) {
  ChoiceScript s;
  script_choice(s, railcar_choice_catalog(), point, outcomes);
  return s;
}

/// Ticks spent in T per visit: (entry tick, exit tick) per car chain.
std::vector<std::int64_t> dwell_times(const Trace& t) {
  std::vector<std::int64_t> out;
  std::map<std::string, std::int64_t> entered;  // chain head id -> tick
  std::vector<std::string> head(t.occurrences.size());
  for (size_t i = 0; i < t.occurrences.size(); ++i) {
    const auto& o = t.occurrences[i];
    auto ref = occurrence_ref(o.cause);
    head[i] = ref ? head[*ref] : o.cause;
    auto k = o.event.substr(0, o.event.find('_'));
    if (k == "E7" || k == "E15") entered[head[i]] = o.at;
    if ((k == "E10" || k == "E14") && entered.count(head[i])) out.push_back(o.at - entered[head[i]]);
  }
  return out;
}

TEST(TerminalModel, DefaultsAreValid) {
  auto m = build_terminal_model(one_terminal());
  EXPECT_TRUE(validate_static(m).ok());
  ModelIndex ix(m);
  for (const char* id : {"B", "T", "A", "C", "P", "P1", "P2"}) EXPECT_NE(ix.machine(id), nullptr) << id;
  EXPECT_NE(ix.flag({"Bocc", "occupied"}), nullptr);
  EXPECT_NE(ix.flag({"Bappr", "approaching"}), nullptr);
  EXPECT_NE(ix.flag({"Tocc", "occupied"}), nullptr);
  EXPECT_NE(ix.flag({"Aocc", "occupied"}), nullptr);
  EXPECT_NE(ix.flag({"Cocc", "occupied"}), nullptr);
  EXPECT_EQ(ix.flag({"Tocc", "occupied"})->initial, "unoccupied");
  EXPECT_EQ(ix.flag({"Bappr", "approaching"})->initial, "reset");
}

TEST(TerminalModel, FifteenPartitionsCoverTheModel) {
  auto b = railcar_bundle(one_terminal());
  EXPECT_EQ(railcar_events(b).size(), 15u);
  EXPECT_EQ(b.regions.size(), 15u);
  EXPECT_TRUE(coverage(*b.model, b.regions).uncovered.empty());
}

TEST(TerminalModel, NoParking) {
  auto b = railcar_bundle(one_terminal(3, 0));
  EXPECT_TRUE(validate_static(*b.model).ok());
  EXPECT_EQ(b.events.size(), 12u);
  EXPECT_EQ(ModelIndex(*b.model).machine("P"), nullptr);
  EXPECT_TRUE(coverage(*b.model, b.regions).uncovered.empty());
  for (const auto& e : b.events) EXPECT_TRUE(e.id != "E3" && e.id != "E14" && e.id != "E15");
}

TEST(TerminalModel, TwoSegments) {
  auto b = railcar_bundle(one_terminal(2));
  EXPECT_TRUE(validate_static(*b.model).ok());
  EXPECT_EQ(b.events.size(), 13u);
  EXPECT_EQ(ModelIndex(*b.model).machine("C"), nullptr);
  EXPECT_TRUE(coverage(*b.model, b.regions).uncovered.empty());
}

TEST(TerminalModel, LongSegmentsAndRings) {
  for (auto p : {RailcarParams{1, 5, 3}, RailcarParams{3, 4, 1}, RailcarParams{6, 3, 2}}) {
    auto b = railcar_bundle(p);
    EXPECT_TRUE(validate_static(*b.model).ok());
    EXPECT_TRUE(coverage(*b.model, b.regions).uncovered.empty());
    EXPECT_TRUE(railcar_behavior(b).warnings.empty());
  }
}

TEST(TerminalModel, BadParams) {
  for (auto p : {RailcarParams{0, 3, 2}, RailcarParams{1, 1, 2}, RailcarParams{1, 3, -1}}) {
    try {
      railcar_bundle(p);
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::bad_params);
    }
  }
}

TEST(TerminalModel, MatchesGoldenFixture) {
  auto golden = testing::load_doc("railcar_terminal.tm");
  EXPECT_EQ(serialize(golden), serialize(to_document(railcar_bundle(one_terminal()))));
}

TEST(TerminalModel, BehaviorShape) {
  auto b = railcar_bundle(one_terminal());
  const auto& beh = railcar_behavior(b);
  EXPECT_EQ(beh.starts, (std::vector<std::string>{"E1", "E11", "E15", "E5", "E9"}));
  for (auto [x, y] : std::vector<std::pair<const char*, const char*>>{
           {"E1", "E2"}, {"E2", "E3"}, {"E2", "E4"}, {"E4", "E6"}, {"E5", "E6"}, {"E6", "E7"}, {"E7", "E8"},
           {"E9", "E10"}, {"E10", "E12"}, {"E11", "E12"}, {"E12", "E13"}, {"E13", "E12"}, {"E14", "E15"},
           {"E15", "E8"}, {"E12", "E1"}})
    EXPECT_NE(beh.edge(x, y), nullptr) << x << "->" << y;
  EXPECT_EQ(beh.edge("E8", "E10")->delay.min, kDwellTicks);
  EXPECT_EQ(beh.edge("E8", "E14")->delay.min, kDwellTicks);
}

TEST(Mirror, IsomorphicToOriginal) {
  auto m = build_terminal_model(one_terminal());
  auto r = mirror(m);
  EXPECT_TRUE(validate_static(r).ok());
  EXPECT_NE(ModelIndex(r).machine("T_R"), nullptr);
  EXPECT_EQ(ModelIndex(r).machine("T"), nullptr);
  EXPECT_TRUE(isomorphic(m, r));
}

TEST(Mirror, DamagedMirrorIsNotIsomorphic) {
  auto m = build_terminal_model(one_terminal());
  auto r = mirror(m);
  r.triggers.pop_back();
  EXPECT_FALSE(isomorphic(m, r));
  auto s = mirror(m);
  for (auto& t : s.triggers)
    if (t.guard) {
      t.guard = Guard::negation(*t.guard);
      break;
    }
  EXPECT_FALSE(isomorphic(m, s));
}

TEST(RunWorld, SingleCarContinues) {
  auto t = run_world(single_car(), ticks(200), script("park-or-continue", {"continue"}));
  auto ev = events_of(t);
  ASSERT_GE(ev.size(), 15u);
  EXPECT_EQ(Events(ev.begin(), ev.begin() + 15),
            (Events{"E5", "E9", "E11", "E1", "E2", "E3", "E4", "E6", "E7", "E8", "E10", "E5", "E12", "E9", "E13"}));
  EXPECT_TRUE(check_trace(t, railcar_behavior(railcar_bundle(one_terminal()))).conforms());
}

TEST(RunWorld, UnblockedDwellIsExactlyNinety) {
  for (const char* choice : {"continue", "park"}) {
    auto t = run_world(single_car(), ticks(1000), script("park-or-continue", std::vector<std::string>(20, choice)));
    auto d = dwell_times(t);
    ASSERT_GE(d.size(), 3u) << choice;
    for (auto x : d) EXPECT_EQ(x, kDwellTicks) << choice;
  }
}

TEST(RunWorld, SingleCarParksThenReturns) {
  auto t = run_world(single_car(), ticks(200), script("park-or-continue", {"park"}));
  auto ev = events_of(t);
  auto e14 = std::find(ev.begin(), ev.end(), "E14");
  ASSERT_NE(e14, ev.end());
  EXPECT_EQ(*(e14 - 1), "E8");
  EXPECT_NE(std::find(e14, ev.end(), "E15"), ev.end());
  EXPECT_TRUE(check_trace(t, railcar_behavior(railcar_bundle(one_terminal()))).conforms());
}

TEST(RunWorld, ScriptedContinueNeverParks) {
  auto t = run_world(single_car(), ticks(2000), script("park-or-continue", std::vector<std::string>(50, "continue")));
  auto ev = events_of(t);
  EXPECT_EQ(std::count(ev.begin(), ev.end(), "E14"), 0);
  EXPECT_GT(std::count(ev.begin(), ev.end(), "E10"), 5);
}

TEST(RunWorld, ParkedCarWaitsForApproachingCar) {
  auto w = default_world(one_terminal(), 2);
  auto t = run_world(w, ticks(300));
  std::int64_t car1_leaves_t = -1, car2_departs = -1;
  for (const auto& o : t.occurrences) {
    if (o.event == "E10" && car1_leaves_t < 0) car1_leaves_t = o.at;
    if (o.event == "E15" && car2_departs < 0) car2_departs = o.at;
  }
  ASSERT_GE(car1_leaves_t, 0);
  ASSERT_GE(car2_departs, 0);
  EXPECT_GE(car2_departs, car1_leaves_t);
  EXPECT_TRUE(check_safety(t, w).empty());
}

TEST(RunWorld, NoCarsEmptyTrace) {
  EXPECT_TRUE(run_world(default_world(one_terminal(), 0), ticks(50)).occurrences.empty());
}

TEST(RunWorld, RandomizedRunsConformAndAreSafe) {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 200; ++i) {
    RailcarParams p{1 + static_cast<int>(rng() % 3), 2 + static_cast<int>(rng() % 3), static_cast<int>(rng() % 3)};
    int max_cars = 1 + p.spots * p.terminals + p.terminals - 1;
    auto w = default_world(p, 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(std::min(max_cars, 4))));
    auto t = run_world(w, ticks(600, static_cast<std::int64_t>(rng()), ChoicePolicy::seeded_random));
    auto v = check_trace(t, railcar_behavior(railcar_bundle(p)));
    ASSERT_TRUE(v.conforms()) << verdict_json(v);
    ASSERT_TRUE(check_safety(t, w).empty());
    for (auto d : dwell_times(t)) ASSERT_GE(d, kDwellTicks);
  }
}

TEST(RunWorld, MultiTerminalEventNames) {
  RailcarParams p{2, 3, 1};
  auto t = run_world(default_world(p, 2), ticks(500));
  ASSERT_FALSE(t.occurrences.empty());
  EXPECT_EQ(t.occurrences.front().event, "E5_T1");
  EXPECT_TRUE(check_trace(t, railcar_behavior(railcar_bundle(p))).conforms());
}

TEST(Cars, Placement) {
  EXPECT_EQ(to_string(parse_car(1, "entry:2")), "entry:2");
  EXPECT_EQ(to_string(parse_car(1, "parked:1:2")), "parked:1:2");
  for (const char* bad : {"entry", "parked:1", "entry:0", "spot:1", "entry:x"}) {
    try {
      parse_car(1, bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::bad_params);
    }
  }
  auto w = default_world(one_terminal(), 3);
  EXPECT_EQ(w.cars[2].start, CarSpec::Start::parked);
  EXPECT_EQ(w.cars[2].spot, 1);
  try {
    default_world(one_terminal(), 4);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::bad_params);
  }
}

TEST(Safety, ForgedDoubleOccupancy) {
  RailcarWorld w;
  w.params = one_terminal();
  w.cars = {{1, CarSpec::Start::parked, 0, 0}, {2, CarSpec::Start::parked, 0, 1}};
  Trace t{0, {{"E15", 5, "car1"}, {"E8", 5, "o0"}, {"E15", 5, "car2"}, {"E8", 5, "o2"}}, {}};
  auto vs = check_safety(t, w);
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_EQ(vs[0].kind, SafetyKind::double_occupancy);
  EXPECT_EQ(vs[0].tick, 5);
  EXPECT_EQ(vs[0].index, 2u);
  EXPECT_EQ(vs[0].cars, (std::vector<int>{1, 2}));
}

TEST(Safety, ForgedDwellUnderrunAndPriorityBreach) {
  RailcarWorld w = default_world(one_terminal(), 2);
  Trace t{0,
          {{"E1", 0, "car1"}, {"E2", 0, "o0"}, {"E15", 1, "car2"}, {"E8", 1, "o2"}, {"E10", 30, "o3"}},
          {}};
  auto vs = check_safety(t, w);
  ASSERT_EQ(vs.size(), 2u);
  EXPECT_EQ(vs[0].kind, SafetyKind::priority_breach);
  EXPECT_EQ(vs[1].kind, SafetyKind::dwell_underrun);
}

TEST(Explore, DefaultProtocolIsSafe) {
  auto r = explore(default_world(one_terminal(), 2), {60, 1'000'000});
  EXPECT_TRUE(r.violations.empty());
  EXPECT_GT(r.states, 1u);
}

TEST(Explore, EachMutationHasAWitness) {
  const std::pair<Mutation, SafetyKind> cases[] = {
      {Mutation::drop_reservation, SafetyKind::double_occupancy},
      {Mutation::drop_approaching_block, SafetyKind::priority_breach},
      {Mutation::drop_dwell_guard, SafetyKind::dwell_underrun},
      {Mutation::drop_occupied_handshake, SafetyKind::double_occupancy},
  };
  for (auto [m, kind] : cases) {
    auto w = default_world(one_terminal(), 2);
    w.mutation = m;
    auto r = explore(w, {60, 1'000'000});
    ASSERT_TRUE(r.has(kind)) << to_string(m);
    for (const auto& v : r.violations) {
      auto found = check_safety(v.trace, w);
      EXPECT_TRUE(std::any_of(found.begin(), found.end(), [&](const SafetyViolation& s) { return s.kind == v.kind; }))
          << to_string(m) << " " << to_string(v.kind);
    }
  }
}

TEST(Explore, DroppedReservationWitnessIsMinimal) {
  auto w = default_world(one_terminal(), 2);
  w.mutation = Mutation::drop_reservation;
  auto r = explore(w, {60, 1'000'000});
  auto it = std::find_if(r.violations.begin(), r.violations.end(),
                         [](const Witness& x) { return x.kind == SafetyKind::double_occupancy; });
  ASSERT_NE(it, r.violations.end());
  // enter B, process, leave B unreserved, parked car takes T, then the first car enters T
  EXPECT_EQ(it->steps, 5u);
  for (size_t depth = 1; depth < it->steps; ++depth) {
    auto shallow = explore(w, {static_cast<int>(depth), 1'000'000});
    EXPECT_FALSE(shallow.has(SafetyKind::double_occupancy)) << depth;
  }
}

TEST(Explore, Preconditions) {
  auto w = default_world(one_terminal(), 2);
  try {
    explore(w, {0, 100});
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::precondition);
  }
  try {
    explore(w, {60, 10});
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::state_budget_exceeded);
  }
}

TEST(Explore, TwoTerminalsThreeCars) {
  auto r = explore(default_world({2, 3, 2}, 3), {40, 1'000'000});
  EXPECT_TRUE(r.violations.empty());
}

}  // namespace
}  // namespace tmk
