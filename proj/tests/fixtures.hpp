// Copyright 2026 The tmkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "tmk/dsl.hpp"
#include "tmk/dynamics.hpp"

namespace tmk::testing {

inline std::string model_path(const std::string& name) { return std::string(TMK_MODELS_DIR) + "/" + name; }
inline std::string golden_path(const std::string& name) { return std::string(TMK_GOLDEN_DIR) + "/" + name; }

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Document load_doc(const std::string& name) {
  auto r = parse(SourceUnit{slurp(model_path(name)), name});
  if (!r.ok()) throw Error(Errc::parse_error, name + " does not parse");
  return *r.document;
}

inline Bundle load(const std::string& name) { return load_bundle(load_doc(name)); }

/// A random document whose references all resolve; regions are single stages.
inline Document random_document(std::mt19937_64& rng) {
  auto pick = [&](size_t n) { return static_cast<size_t>(rng() % n); };
  Document d;
  const StageKind kinds[] = {StageKind::create, StageKind::process, StageKind::release, StageKind::transfer,
                             StageKind::receive};
  std::vector<StageRef> stages;
  std::vector<std::pair<FlagRef, std::vector<std::string>>> flags;
  std::vector<StorageRef> storages;
  int next_id = 0;
  std::function<Machine(int)> machine = [&](int depth) {
    Machine m;
    m.id = "m" + std::to_string(next_id++);
    for (auto k : kinds)
      if (rng() % 2) m.stages.push_back(k);
    if (m.stages.empty()) m.stages.push_back(kinds[pick(5)]);
    for (auto k : m.stages) stages.push_back({m.id, k});
    if (rng() % 3 == 0) {
      Flag f{"f" + std::to_string(pick(3)), {}, ""};
      size_t nv = 2 + pick(3);
      for (size_t i = 0; i < nv; ++i) f.values.push_back("v" + std::to_string(i));
      f.initial = f.values[pick(nv)];
      flags.push_back({{m.id, f.id}, f.values});
      m.flags.push_back(std::move(f));
    }
    if (rng() % 4 == 0) {
      Storage s{"s", std::nullopt, static_cast<std::int64_t>(pick(5))};
      if (rng() % 2) s.capacity = 5 + static_cast<std::int64_t>(pick(10));
      storages.push_back({m.id, s.id});
      m.storage = s;
    }
    if (depth < 2 && rng() % 3 == 0) m.submachines.push_back(machine(depth + 1));
    return m;
  };
  size_t nm = 1 + pick(5);
  for (size_t i = 0; i < nm; ++i) d.model.machines.push_back(machine(0));

  std::set<std::pair<StageRef, StageRef>> used_flow, used_trig;
  for (size_t i = pick(8); i > 0; --i) {
    auto a = stages[pick(stages.size())], b = stages[pick(stages.size())];
    if (used_flow.insert({a, b}).second) d.model.flows.push_back({a, b});
  }
  std::function<Guard(int)> guard = [&](int depth) -> Guard {
    size_t c = depth > 1 ? pick(2) : pick(5);
    if (c == 0 && !flags.empty()) {
      auto& [f, vals] = flags[pick(flags.size())];
      return Guard::flag_equals(f, vals[pick(vals.size())]);
    }
    if (c == 1 && !storages.empty()) {
      auto s = storages[pick(storages.size())];
      return rng() % 2 ? Guard::storage_at_least(s, static_cast<std::int64_t>(pick(4)))
                       : Guard::storage_below(s, static_cast<std::int64_t>(pick(4)));
    }
    if (c == 2) return Guard::both(guard(depth + 1), guard(depth + 1));
    if (c == 3) return Guard::either(guard(depth + 1), guard(depth + 1));
    if (c == 4) return Guard::negation(guard(depth + 1));
    if (!flags.empty()) return Guard::flag_equals(flags.front().first, flags.front().second.front());
    return Guard::storage_at_least(storages.front(), 1);
  };
  for (size_t i = pick(6); i > 0; --i) {
    auto a = stages[pick(stages.size())], b = stages[pick(stages.size())];
    if (!used_trig.insert({a, b}).second) continue;
    TriggerArc t{a, b, std::nullopt, {}, std::nullopt};
    if ((!flags.empty() || !storages.empty()) && rng() % 2) t.guard = guard(0);
    if (!flags.empty() && rng() % 2) {
      auto& [f, vals] = flags[pick(flags.size())];
      t.sets.push_back({f, vals[pick(vals.size())]});
    }
    if (rng() % 5 == 0) t.payload = "thing" + std::to_string(pick(3));
    d.model.triggers.push_back(std::move(t));
  }
  if (stages.size() >= 3 && rng() % 3 == 0) {
    ChoicePoint c{"pick", stages[0], {{"left", stages[1]}, {"right", stages[2]}}};
    d.model.choices.push_back(std::move(c));
  }
  size_t nr = pick(std::min<size_t>(stages.size(), 5) + 1);
  for (size_t i = 0; i < nr; ++i) {
    std::string rid = "R" + std::to_string(i);
    d.regions.push_back({rid, {stages[i]}, stages[i]});
    d.events.push_back({"E" + std::to_string(i), rid});
  }
  if (nr > 0 && rng() % 2) {
    BehaviorDecl b{"b", {"E0"}, {}};
    std::set<std::pair<std::string, std::string>> seen;
    for (size_t i = pick(5); i > 0; --i) {
      EdgeDecl e{"E" + std::to_string(pick(nr)), "E" + std::to_string(pick(nr)), static_cast<std::int64_t>(pick(10)),
                 std::nullopt};
      if (rng() % 2) e.max_delay = e.min_delay + static_cast<std::int64_t>(pick(100));
      if (seen.insert({e.from, e.to}).second) b.edges.push_back(e);
    }
    d.behaviors.push_back(std::move(b));
  }
  canonicalize(d);
  return d;
}

}  // namespace tmk::testing

#include "tmk/sim.hpp"

namespace tmk::testing {

inline std::vector<std::string> events_of(const Trace& t) {
  std::vector<std::string> out;
  for (const auto& o : t.occurrences) out.push_back(o.event);
  return out;
}

inline Stimulus dollar(std::int64_t at) { return {at, "Money.transfer", {"", {{"kind", "dollar"}}}}; }
inline Stimulus refill(std::int64_t at) { return {at, "Coins.transfer", {"", {{"kind", "coins"}}}}; }

/// Random dollars and refills over the first `horizon` ticks.
inline std::vector<Stimulus> random_vending_stimuli(std::mt19937_64& rng, std::int64_t horizon = 200) {
  std::vector<Stimulus> out;
  size_t n = 1 + rng() % 20;
  for (size_t i = 0; i < n; ++i) {
    auto at = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(horizon));
    out.push_back(rng() % 5 == 0 ? refill(at) : dollar(at));
  }
  return out;
}

}  // namespace tmk::testing
