// Copyright 2026 The tmkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "tmk/dsl.hpp"

namespace tmk {
namespace {

TEST(Parse, SingleMachine) {
  auto r = parse("machine M { stages: transfer, receive }");
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r.document->model.machines.size(), 1u);
  EXPECT_EQ(r.document->model.machines[0].stages.size(), 2u);
}

TEST(Parse, VendingStructure) {
  auto d = testing::load_doc("vending.tm");
  ModelIndex ix(d.model);
  EXPECT_TRUE(ix.has_stage({"Money", StageKind::receive}));
  EXPECT_TRUE(ix.has_stage({"Money", StageKind::process}));
  EXPECT_TRUE(ix.has_stage({"Rejection", StageKind::create}));
  EXPECT_TRUE(ix.has_stage({"Coins", StageKind::release}));
  ASSERT_NE(ix.storage({"Coins", "bank"}), nullptr);
  ASSERT_NE(ix.flag({"Light", "state"}), nullptr);
  EXPECT_EQ(d.regions.size(), 9u);
  EXPECT_EQ(d.events.size(), 9u);
  ASSERT_EQ(d.behaviors.size(), 1u);
  EXPECT_EQ(d.behaviors[0].edges.size(), 11u);
}

TEST(Parse, IllegalArcParsesThenFailsValidation) {
  auto r = parse("machine M { stages: receive, process }\nflow M.process -> M.receive\n");
  ASSERT_TRUE(r.ok());
  EXPECT_TRUE(validate_static(r.document->model).has_rule("ILLEGAL_INTRA_ARC"));
}

TEST(Parse, ReportsPositionOfSyntaxErrors) {
  auto r = parse("machine M {\n  stages: transfer\n  flow\n}\n");
  EXPECT_FALSE(r.ok());
  ASSERT_FALSE(r.diagnostics.empty());
  EXPECT_EQ(r.diagnostics.front().line, 3);
}

TEST(Parse, UnknownStageKindAndUnresolvedPath) {
  EXPECT_FALSE(parse("machine M { stages: sing }").ok());
  EXPECT_FALSE(parse("machine M { stages: process }\nflow M.process -> N.process\n").ok());
}

TEST(Parse, KeywordsCannotNameMachines) {
  EXPECT_FALSE(parse("machine flow { stages: process }").ok());
}

TEST(Parse, CommentsAndCrLfAreIgnored) {
  auto a = parse("# note\r\nmachine M { stages: process } # trailing\r\n");
  auto b = parse("machine M { stages: process }\n");
  ASSERT_TRUE(a.ok());
  ASSERT_TRUE(b.ok());
  EXPECT_EQ(*a.document, *b.document);
}

TEST(Serialize, EmptyModelIsEmptyDocument) { EXPECT_EQ(serialize(Document{}), ""); }

TEST(Serialize, VendingRoundTrip) {
  auto d = testing::load_doc("vending.tm");
  auto again = parse(serialize(d));
  ASSERT_TRUE(again.ok());
  EXPECT_EQ(*again.document, d);
}

TEST(Serialize, RailcarRoundTrip) {
  auto d = testing::load_doc("railcar_terminal.tm");
  auto again = parse(serialize(d));
  ASSERT_TRUE(again.ok());
  EXPECT_EQ(*again.document, d);
}

TEST(Serialize, Idempotent) {
  auto d = testing::load_doc("vending.tm");
  auto once = serialize(d);
  EXPECT_EQ(serialize(*parse(once).document), once);
}

TEST(Serialize, GuardPrecedence) {
  auto g = Guard::both(Guard::either(Guard::flag_equals({"A", "f"}, "x"), Guard::flag_equals({"A", "f"}, "y")),
                       Guard::negation(Guard::storage_below({"B", "s"}, 2)));
  EXPECT_EQ(serialize_guard(g), "(A.f == x or A.f == y) and not B.s < 2");
}

TEST(RoundTripProperty, FiveHundredRandomDocuments) {
  std::mt19937_64 rng(20260417);
  for (int i = 0; i < 500; ++i) {
    auto d = testing::random_document(rng);
    auto text = serialize(d);
    auto r = parse(text);
    ASSERT_TRUE(r.ok()) << text << "\n" << (r.diagnostics.empty() ? "" : r.diagnostics[0].message);
    ASSERT_EQ(*r.document, d) << text;
    ASSERT_EQ(serialize(*r.document), text);
  }
}

}  // namespace
}  // namespace tmk
