// Copyright 2026 The tmkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <iostream>
#include <random>

#include "fixtures.hpp"
#include "tmk/cli.hpp"
#include "tmk/graph.hpp"
#include "tmk/railcar.hpp"
#include "tmk/state_table.hpp"

namespace tmk {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass;
  std::string detail;
};

Outcome table_equivalence() {
  auto start = Clock::now();
  auto table = parse_table(testing::slurp(testing::model_path("vending.csv")));
  auto v = check_equivalence(table, table_to_tm(table), 6);
  double s = seconds_since(start);
  return {v.equivalent && v.sequences == 55'987 && s < 60.0,
          std::to_string(v.sequences) + " sequences, " + (v.equivalent ? "equivalent" : "not equivalent") + ", " +
              std::to_string(s) + " s"};
}

Outcome full_coverage() {
  auto vending = testing::load("vending.tm");
  auto railcar = railcar_bundle({1, 3, 2});
  auto cv = coverage(*vending.model, vending.regions);
  auto cr = coverage(*railcar.model, railcar.regions);
  bool ok = vending.regions.size() == 9 && railcar.regions.size() == 15 && cv.uncovered.empty() &&
            cr.uncovered.empty();
  return {ok, "vending " + std::to_string(vending.regions.size()) + " regions, " +
                  std::to_string(cv.uncovered.size()) + " uncovered; railcar " +
                  std::to_string(railcar.regions.size()) + " regions, " + std::to_string(cr.uncovered.size()) +
                  " uncovered"};
}

Outcome randomized_runs() {
  std::mt19937_64 rng(20261017);
  auto vending = testing::load("vending.tm");
  Simulator sim(*vending.model, vending.only_behavior());
  int bad_vending = 0, bad_railcar = 0;
  for (int i = 0; i < 1000; ++i) {
    SimConfig cfg;
    cfg.seed = static_cast<std::int64_t>(rng());
    cfg.policy = ChoicePolicy::seeded_random;
    if (!check_trace(sim.run(cfg, testing::random_vending_stimuli(rng)), vending.only_behavior()).conforms())
      ++bad_vending;
  }
  const RailcarParams p{1, 3, 2};
  auto railcar = railcar_bundle(p);
  const auto& beh = railcar_behavior(railcar);
  for (int i = 0; i < 1000; ++i) {
    SimConfig cfg;
    cfg.seed = static_cast<std::int64_t>(rng());
    cfg.policy = ChoicePolicy::seeded_random;
    cfg.max_ticks = 500;
    auto w = default_world(p, 1 + static_cast<int>(rng() % 3));
    if (!check_trace(run_world(w, cfg), beh).conforms()) ++bad_railcar;
  }
  return {bad_vending == 0 && bad_railcar == 0, "nonconforming: vending " + std::to_string(bad_vending) +
                                                    "/1000, railcar " + std::to_string(bad_railcar) + "/1000"};
}

Outcome delay_bound() {
  auto b = testing::load("vending.tm");
  auto beh = build_behavior(b.events, {{"E_A", "E_B", {}}, {"E_B", "E_D", {0, 60}}}, std::vector<std::string>{"E_A"});
  auto with_gap = [](std::int64_t gap) {
    return Trace{0, {{"E_A", 0, "s0"}, {"E_B", 0, "o0"}, {"E_D", gap, "o1"}}, {}};
  };
  const std::int64_t three_years = 3LL * 365 * 24 * 3600;
  bool exceeded = check_trace(with_gap(three_years), beh).has("DELAY_EXCEEDED");
  bool within = true;
  for (std::int64_t g : {0, 1, 30, 59, 60}) within = within && check_trace(with_gap(g), beh).conforms();
  return {exceeded && within, std::string("multi-year gap ") + (exceeded ? "DELAY_EXCEEDED" : "accepted") +
                                  ", gaps <= 60 " + (within ? "conform" : "rejected")};
}

Outcome exploration() {
  const ExploreConfig cfg{60, 1'000'000};
  auto start = Clock::now();
  auto clean = explore(default_world({1, 3, 2}, 2), cfg);
  double s = seconds_since(start);
  bool ok = clean.violations.empty() && s < 300.0;
  std::string detail = std::to_string(clean.states) + " states, " + std::to_string(clean.violations.size()) +
                       " violations, " + std::to_string(s) + " s;";
  const std::pair<Mutation, SafetyKind> mutations[] = {
      {Mutation::drop_reservation, SafetyKind::double_occupancy},
      {Mutation::drop_approaching_block, SafetyKind::priority_breach},
      {Mutation::drop_dwell_guard, SafetyKind::dwell_underrun},
      {Mutation::drop_occupied_handshake, SafetyKind::double_occupancy},
  };
  for (auto [m, kind] : mutations) {
    auto w = default_world({1, 3, 2}, 2);
    w.mutation = m;
    auto r = explore(w, cfg);
    bool witnessed = false;
    for (const auto& v : r.violations)
      if (v.kind == kind && !v.trace.occurrences.empty()) {
        auto confirmed = check_safety(v.trace, w);
        witnessed = witnessed || std::any_of(confirmed.begin(), confirmed.end(),
                                             [&](const SafetyViolation& x) { return x.kind == kind; });
      }
    ok = ok && witnessed;
    detail += " " + to_string(m) + (witnessed ? " -> " + to_string(kind) : " -> no witness");
  }
  return {ok, detail};
}

Outcome dwell() {
  std::mt19937_64 rng(90);
  int visits = 0, wrong = 0;
  for (auto p : {RailcarParams{1, 3, 2}, RailcarParams{6, 3, 2}, RailcarParams{2, 2, 0}}) {
    for (int i = 0; i < 50; ++i) {
      SimConfig cfg;
      cfg.seed = static_cast<std::int64_t>(rng());
      cfg.policy = ChoicePolicy::seeded_random;
      cfg.max_ticks = 3000;
      auto t = run_world(default_world(p, 1), cfg);
      std::int64_t entered = -1;
      for (const auto& o : t.occurrences) {
        auto k = o.event.substr(0, o.event.find('_'));
        if (k == "E7" || k == "E15") entered = o.at;
        if ((k == "E10" || k == "E14") && entered >= 0) {
          ++visits;
          if (o.at - entered != kDwellTicks) ++wrong;
          entered = -1;
        }
      }
    }
  }
  return {visits > 0 && wrong == 0, std::to_string(visits) + " visits, " + std::to_string(wrong) + " not 90 ticks"};
}

Outcome deterministic_simulate() {
  std::vector<std::string> args{"simulate",
                                testing::model_path("vending.tm"),
                                "--stimuli",
                                testing::model_path("vending_stimuli.json"),
                                "--seed",
                                "7",
                                "--policy",
                                "random"};
  std::string first;
  int distinct = 0, failed = 0;
  for (int i = 0; i < 10; ++i) {
    std::ostringstream out, err;
    if (run_cli(args, out, err) != 0) ++failed;
    if (i == 0) first = out.str();
    else if (out.str() != first) ++distinct;
  }
  return {failed == 0 && distinct == 0 && !first.empty(),
          std::to_string(10 - distinct) + "/10 identical, " + std::to_string(first.size()) + " bytes"};
}

Outcome round_trip() {
  std::mt19937_64 rng(500);
  int bad = 0;
  for (int i = 0; i < 500; ++i) {
    auto d = testing::random_document(rng);
    auto r = parse(serialize(d));
    if (!r.ok() || !(*r.document == d)) ++bad;
  }
  for (const char* name : {"vending.tm", "railcar_terminal.tm"}) {
    auto d = testing::load_doc(name);
    auto r = parse(serialize(d));
    if (!r.ok() || !(*r.document == d)) ++bad;
  }
  return {bad == 0, std::to_string(bad) + " of 502 documents changed"};
}

Outcome mirror_symmetry() {
  auto m = build_terminal_model({1, 3, 2});
  auto r = mirror(m);
  bool iso = isomorphic(m, r);
  r.triggers.pop_back();
  bool damaged = isomorphic(m, r);
  return {iso && !damaged, std::string("mirror ") + (iso ? "isomorphic" : "not isomorphic") + ", damaged mirror " +
                               (damaged ? "isomorphic" : "not isomorphic")};
}

}  // namespace
}  // namespace tmk

int main() {
  using Check = tmk::Outcome (*)();
  const std::pair<const char*, Check> criteria[] = {
      {"table equivalence", tmk::table_equivalence},
      {"region coverage", tmk::full_coverage},
      {"randomized runs conform", tmk::randomized_runs},
      {"delay bound", tmk::delay_bound},
      {"railcar exploration", tmk::exploration},
      {"terminal dwell", tmk::dwell},
      {"deterministic simulate", tmk::deterministic_simulate},
      {"parse/serialize round trip", tmk::round_trip},
      {"mirror symmetry", tmk::mirror_symmetry},
  };
  int failures = 0;
  int n = 0;
  for (auto [name, check] : criteria) {
    ++n;
    tmk::Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << n << " " << name << ": " << o.detail << "\n";
  }
  return failures == 0 ? 0 : 1;
}
