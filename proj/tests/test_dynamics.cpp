// Copyright 2026 The tmkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "tmk/dynamics.hpp"

namespace tmk {
namespace {

class VendingDynamics : public ::testing::Test {
 protected:
  Bundle b = testing::load("vending.tm");
};

TEST_F(VendingDynamics, NineRegionsCoverEverything) {
  auto rep = coverage(*b.model, b.regions);
  EXPECT_EQ(b.regions.size(), 9u);
  EXPECT_TRUE(rep.uncovered.empty());
  EXPECT_EQ(rep.covered.size(), ModelIndex(*b.model).all_elements().size());
}

TEST_F(VendingDynamics, EmptyRegionSetLeavesAllUncovered) {
  auto rep = coverage(*b.model, {});
  EXPECT_EQ(rep.uncovered.size(), ModelIndex(*b.model).all_elements().size());
}

TEST_F(VendingDynamics, DuplicatedRegionOnlyAddsOverlaps) {
  auto base = coverage(*b.model, b.regions);
  auto regions = b.regions;
  auto dup = make_region(b.model, "A2", b.regions[0]->elements, b.regions[0]->anchor);
  regions.push_back(dup);
  auto rep = coverage(*b.model, regions);
  EXPECT_EQ(rep.covered, base.covered);
  EXPECT_EQ(rep.uncovered, base.uncovered);
  EXPECT_GT(rep.overlaps.size(), base.overlaps.size());
}

TEST_F(VendingDynamics, NineEventsNamedAfterRegions) {
  ASSERT_EQ(b.events.size(), 9u);
  for (char c = 'A'; c <= 'I'; ++c) {
    auto id = std::string("E_") + c;
    auto it = std::find_if(b.events.begin(), b.events.end(), [&](const Event& e) { return e.id == id; });
    ASSERT_NE(it, b.events.end()) << id;
    EXPECT_EQ(it->region->id, std::string(1, c));
    EXPECT_FALSE(it->time.stamp.has_value());
  }
}

TEST_F(VendingDynamics, DuplicateEventId) {
  EventSet set;
  set.add(b.regions[0], "E_H");
  try {
    set.add(b.regions[1], "E_H");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::duplicate_event_id);
  }
}

TEST_F(VendingDynamics, ChronologyIsValidAndAnchored) {
  const auto& beh = b.only_behavior();
  EXPECT_EQ(beh.edges.size(), 11u);
  EXPECT_TRUE(beh.warnings.empty());
  EXPECT_TRUE(beh.is_start("E_A"));
  EXPECT_NE(beh.edge("E_B", "E_C"), nullptr);
  EXPECT_NE(beh.edge("E_I", "E_A"), nullptr);
  EXPECT_EQ(static_of(beh), b.model);
}

TEST_F(VendingDynamics, EdgeToUndeclaredEvent) {
  try {
    build_behavior(b.events, {{"E_A", "E_Z", {}}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unknown_event);
  }
}

TEST_F(VendingDynamics, MixedModelsRejected) {
  auto other = testing::load("vending.tm");
  auto beh = build_behavior({b.events[0], other.events[1]}, {});
  try {
    static_of(beh);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::mixed_models);
  }
}

TEST(Behavior, SingleEventIsTriviallyReachable) {
  auto b = testing::load("vending.tm");
  auto beh = build_behavior({b.events[0]}, {});
  EXPECT_EQ(beh.starts, std::vector<std::string>{b.events[0].id});
  EXPECT_TRUE(beh.warnings.empty());
}

TEST(Behavior, EmptyBehaviorIsNotAnchored) {
  try {
    static_of(build_behavior({}, {}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::not_anchored);
  }
}

TEST(Regions, ConstructionErrors) {
  auto b = testing::load("vending.tm");
  auto expect = [&](Errc code, std::vector<Element> els, Element anchor) {
    try {
      make_region(b.model, "X", std::move(els), std::move(anchor));
      ADD_FAILURE() << "no error";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), code);
    }
  };
  StageRef recv{"Money", StageKind::receive}, coin{"Coins", StageKind::receive};
  expect(Errc::empty_region, {}, recv);
  expect(Errc::unresolved_element, {StageRef{"Nope", StageKind::process}}, recv);
  expect(Errc::anchor_not_in_region, {recv}, coin);
  expect(Errc::region_disconnected, {recv, coin}, recv);
}

TEST(Regions, DelayBounds) {
  DelayBounds d{0, 60};
  EXPECT_TRUE(d.contains(60));
  EXPECT_FALSE(d.contains(61));
  EXPECT_TRUE((DelayBounds{5, std::nullopt}).contains(1'000'000'000));
}

}  // namespace
}  // namespace tmk
