// Copyright 2026 The tmkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "tmk/core.hpp"

namespace tmk {
namespace {

StaticModel chain_model() {
  StaticModel m;
  m.machines.push_back({"M", {StageKind::transfer, StageKind::receive, StageKind::process}, {}, std::nullopt, {}});
  m.flows.push_back({{"M", StageKind::transfer}, {"M", StageKind::receive}});
  m.flows.push_back({{"M", StageKind::receive}, {"M", StageKind::process}});
  return m;
}

TEST(Validate, MinimalChainHasNoFindings) {
  EXPECT_TRUE(validate_static(chain_model()).ok());
}

TEST(Validate, ProcessToReceiveInsideMachineIsIllegal) {
  auto m = chain_model();
  m.flows.push_back({{"M", StageKind::process}, {"M", StageKind::receive}});
  auto rep = validate_static(m);
  EXPECT_TRUE(rep.fatal());
  EXPECT_TRUE(rep.has_rule("ILLEGAL_INTRA_ARC"));
  EXPECT_EQ(rep.findings.size(), 1u);
}

TEST(Validate, VendingFixtureIsValid) {
  auto d = testing::load_doc("vending.tm");
  EXPECT_TRUE(validate_static(d.model).ok());
}

TEST(Validate, InterMachineFlowMustLinkTransfers) {
  auto m = chain_model();
  m.machines.push_back({"N", {StageKind::receive, StageKind::transfer}, {}, std::nullopt, {}});
  m.flows.push_back({{"M", StageKind::process}, {"N", StageKind::receive}});
  EXPECT_TRUE(validate_static(m).has_rule("ILLEGAL_INTER_ARC"));
  m.flows.back() = {{"M", StageKind::transfer}, {"N", StageKind::transfer}};
  EXPECT_TRUE(validate_static(m).ok());
}

TEST(Validate, UnresolvedStageAndDuplicateMachine) {
  auto m = chain_model();
  m.flows.push_back({{"M", StageKind::receive}, {"M", StageKind::release}});
  EXPECT_TRUE(validate_static(m).has_rule("UNRESOLVED_STAGE"));
  auto d = chain_model();
  d.machines.push_back(d.machines.front());
  EXPECT_TRUE(validate_static(d).has_rule("DUPLICATE_MACHINE_ID"));
}

TEST(Validate, FlagRules) {
  auto m = chain_model();
  m.machines[0].flags.push_back({"light", {"on"}, "on"});
  EXPECT_TRUE(validate_static(m).has_rule("FLAG_TOO_FEW_VALUES"));
  m.machines[0].flags[0] = {"light", {"on", "off"}, "dim"};
  EXPECT_TRUE(validate_static(m).has_rule("FLAG_INIT_INVALID"));
  m.machines[0].flags[0] = {"light", {"on", "off"}, "off"};
  m.triggers.push_back({{"M", StageKind::receive}, {"M", StageKind::process},
                        Guard::flag_equals({"M", "light"}, "bright"), {}, std::nullopt});
  EXPECT_TRUE(validate_static(m).has_rule("GUARD_UNKNOWN_VALUE"));
  m.triggers[0].guard = Guard::flag_equals({"M", "dark"}, "on");
  EXPECT_TRUE(validate_static(m).has_rule("GUARD_UNKNOWN_FLAG"));
  m.triggers[0].guard.reset();
  m.triggers[0].sets.push_back({{"M", "light"}, "blue"});
  EXPECT_TRUE(validate_static(m).has_rule("SET_UNKNOWN_VALUE"));
}

TEST(Validate, StorageRules) {
  auto m = chain_model();
  m.machines[0].storage = Storage{"bank", 5, 9};
  EXPECT_TRUE(validate_static(m).has_rule("STORAGE_OVER_CAPACITY"));
  m.machines[0].storage = Storage{"bank", std::nullopt, 9};
  EXPECT_TRUE(validate_static(m).ok());
}

TEST(Validate, ChoiceRules) {
  auto m = chain_model();
  m.choices.push_back({"c", {"M", StageKind::receive}, {{"only", {"M", StageKind::process}}}});
  EXPECT_TRUE(validate_static(m).has_rule("CHOICE_TOO_FEW_BRANCHES"));
}

TEST(FindStage, ResolvesDottedPaths) {
  auto d = testing::load_doc("vending.tm");
  auto s = find_stage(d.model, "Money.receive");
  ASSERT_TRUE(s.has_value());
  EXPECT_EQ(*s, (StageRef{"Money", StageKind::receive}));
  EXPECT_FALSE(find_stage(d.model, "Nope.process"));
  EXPECT_FALSE(find_stage(d.model, ""));
}

TEST(FlowClosure, IsolatedStageIsItsOwnClosure) {
  StaticModel m;
  m.machines.push_back({"L", {StageKind::process}, {}, std::nullopt, {}});
  EXPECT_EQ(flow_closure(m, {"L", StageKind::process}), (std::set<StageRef>{{"L", StageKind::process}}));
}

TEST(FlowClosure, MoneyPath) {
  auto d = testing::load_doc("vending.tm");
  std::set<StageRef> want{{"Money", StageKind::transfer}, {"Money", StageKind::receive}, {"Money", StageKind::process}};
  EXPECT_EQ(flow_closure(d.model, {"Money", StageKind::transfer}), want);
}

TEST(FlowClosure, MonotoneUnderAddedArcs) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    auto d = testing::random_document(rng);
    ModelIndex ix(d.model);
    auto stages = ix.all_stages();
    auto start = stages.front();
    auto before = flow_closure(d.model, start);
    auto more = d.model;
    more.flows.push_back({stages[rng() % stages.size()], stages[rng() % stages.size()]});
    auto after = flow_closure(more, start);
    EXPECT_TRUE(std::includes(after.begin(), after.end(), before.begin(), before.end()));
  }
}

TEST(Guards, Evaluate) {
  auto g = Guard::both(Guard::flag_equals({"L", "state"}, "on"),
                       Guard::negation(Guard::storage_below({"C", "bank"}, 1)));
  auto flags = [](const FlagRef&) { return std::string("on"); };
  EXPECT_TRUE(evaluate(g, flags, [](const StorageRef&) { return std::int64_t{3}; }));
  EXPECT_FALSE(evaluate(g, flags, [](const StorageRef&) { return std::int64_t{0}; }));
}

TEST(Errors, CarryStableNames) {
  Error e(Errc::cascade_overflow, "x");
  EXPECT_EQ(e.name(), "CASCADE_OVERFLOW");
  EXPECT_EQ(Error(Errc::state_budget_exceeded, "x").name(), "STATE_BUDGET_EXCEEDED");
}

}  // namespace
}  // namespace tmk
