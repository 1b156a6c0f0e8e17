// Copyright 2026 The tmkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Deterministic tick/cascade execution of a static model, traces, and
// trace conformance against a behavioral model.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tmk/core.hpp"
#include "tmk/dynamics.hpp"

namespace tmk {

struct Thing {
  std::string id;
  std::map<std::string, std::string> payload;
};

struct Stimulus {
  std::int64_t at = 0;
  std::string target;  // transfer stage path
  Thing thing;
};

struct Occurrence {
  std::string event;
  std::int64_t at = 0;
  std::string cause;
  bool operator==(const Occurrence&) const = default;
};

struct Trace {
  std::int64_t seed = 0;
  std::vector<Occurrence> occurrences;
  std::map<std::string, std::string> flags;
  bool operator==(const Trace&) const = default;
};

enum class ChoicePolicy { by_priority, seeded_random };

struct SimConfig {
  std::int64_t seed = 0;
  std::int64_t max_ticks = 1000;
  std::int64_t cascade_limit = 1000;
  ChoicePolicy policy = ChoicePolicy::by_priority;
};

// ---------------------------------------------------------------------------
// Choice points

/// Named choice points and their outcome labels.
using ChoiceCatalog = std::map<std::string, std::vector<std::string>>;

/// Deterministic outcome sequences per choice point.
struct ChoiceScript {
  std::map<std::string, std::vector<std::string>> outcomes;
};

inline void script_choice(ChoiceScript& script, const ChoiceCatalog& catalog, const std::string& point,
                          const std::vector<std::string>& outcomes) {
  auto it = catalog.find(point);
  if (it == catalog.end()) throw Error(Errc::unknown_choice_point, "no choice point named " + point);
  for (const auto& o : outcomes)
    if (std::find(it->second.begin(), it->second.end(), o) == it->second.end())
      throw Error(Errc::invalid_outcome, "'" + o + "' is not an outcome of choice point " + point);
  auto& dst = script.outcomes[point];
  dst.insert(dst.end(), outcomes.begin(), outcomes.end());
}

/// Consumes scripted outcomes, then falls back to the configured policy.
class ChoiceResolver {
 public:
  ChoiceResolver(const ChoiceScript& script, ChoicePolicy policy, std::uint64_t seed)
      : script_(&script), policy_(policy), rng_(seed) {}

  size_t pick(const std::string& point, const std::vector<std::string>& labels) {
    auto it = script_->outcomes.find(point);
    if (it != script_->outcomes.end()) {
      size_t& cur = cursor_[point];
      if (cur < it->second.size()) {
        const auto& want = it->second[cur++];
        auto pos = std::find(labels.begin(), labels.end(), want);
        if (pos == labels.end())
          throw Error(Errc::invalid_outcome, "'" + want + "' is not an outcome of choice point " + point);
        return static_cast<size_t>(pos - labels.begin());
      }
    }
    if (policy_ == ChoicePolicy::by_priority || labels.size() < 2) return 0;
    return static_cast<size_t>(rng_() % labels.size());
  }

 private:
  const ChoiceScript* script_;
  ChoicePolicy policy_;
  std::mt19937_64 rng_;
  std::map<std::string, size_t> cursor_;
};

// ---------------------------------------------------------------------------
// Simulator

/// A static model and a behavior compiled into index tables; reusable across
/// runs and safe to share between threads (run() is const).
class Simulator {
 public:
  Simulator(const StaticModel& model, const BehavioralModel& behavior) { compile(model, behavior); }

  /// Declared choice points plus the implicit ones at stages with several
  /// outgoing flows (named by the stage path, outcomes are target paths).
  const ChoiceCatalog& catalog() const { return catalog_; }

  Trace run(const SimConfig& config, const std::vector<Stimulus>& stimuli,
            const ChoiceScript& script = {}) const {
    if (config.max_ticks <= 0 || config.cascade_limit <= 0)
      throw Error(Errc::bad_params, "max ticks and cascade limit must be positive");
    for (const auto& [point, _] : script.outcomes)
      if (!catalog_.count(point)) throw Error(Errc::unknown_choice_point, "no choice point named " + point);

    Run r(*this, config, script);
    std::vector<size_t> order(stimuli.size());
    std::set<std::string> thing_ids;
    for (size_t i = 0; i < stimuli.size(); ++i) {
      const auto& s = stimuli[i];
      order[i] = i;
      auto st = stage_id(s.target);
      if (!st || !stages_[*st].boundary)
        throw Error(Errc::stimulus_target_invalid, "stimulus target " + s.target + " is not a boundary transfer stage");
      if (s.at < 0) throw Error(Errc::stimulus_target_invalid, "stimulus at negative tick");
      if (!s.thing.id.empty() && !thing_ids.insert(s.thing.id).second)
        throw Error(Errc::duplicate_thing_id, "thing id " + s.thing.id + " used twice");
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return stimuli[a].at < stimuli[b].at; });
    size_t next = 0;
    while (next < order.size() && stimuli[order[next]].at < config.max_ticks) {
      std::int64_t tick = stimuli[order[next]].at;
      std::vector<Activation> seeds;
      for (; next < order.size() && stimuli[order[next]].at == tick; ++next) {
        size_t i = order[next];
        Thing th = stimuli[i].thing;
        if (th.id.empty()) th.id = "x" + std::to_string(i);
        Activation a;
        a.stage = *stage_id(stimuli[i].target);
        a.thing = r.add_thing(std::move(th));
        a.inbound = true;
        a.cause = Cause{static_cast<std::int64_t>(i), true};
        seeds.push_back(a);
      }
      r.cascade(tick, std::move(seeds));
    }
    return r.finish(config.seed);
  }

 private:
  struct Cause {
    std::int64_t index = -1;  // stimulus index or internal occurrence number
    bool stimulus = false;
  };
  struct Activation {
    int stage = 0;
    int thing = -1;
    bool inbound = false;  // transfer stages: arrived from outside or another machine
    bool triggered = false;
    std::int64_t step = 0;
    Cause cause;
  };
  struct StageInfo {
    StageRef ref;
    std::string path;
    bool boundary = false;
    int own_receive = -1;
    std::vector<std::pair<int, int>> intra;  // (target stage, flow index)
    std::vector<std::pair<int, int>> inter;
    std::vector<int> triggers;
    int choice = -1;
    int storage = -1;
    std::vector<int> events;
    std::vector<std::string> intra_labels, inter_labels;
  };
  struct TriggerInfo {
    int from = 0, to = 0;
    std::optional<Guard> guard;
    std::vector<std::pair<int, std::string>> sets;  // (flag, value)
    std::optional<std::string> payload;
    std::vector<int> events;
  };
  struct ChoiceInfo {
    std::string id;
    std::vector<std::string> labels;
    std::vector<int> targets;
  };
  struct FlagInfo {
    FlagRef ref;
    std::string qualified;
    std::string initial;
    std::vector<int> events;
  };
  struct StorageInfo {
    StorageRef ref;
    std::optional<std::int64_t> capacity;
    std::int64_t level = 0;
    std::vector<int> events;
  };

  std::optional<int> stage_id(const std::string& path) const {
    auto it = stage_by_path_.find(path);
    if (it != stage_by_path_.end()) return it->second;
    auto ref = find_stage(model_, path);
    if (!ref) return std::nullopt;
    auto jt = stage_index_.find(*ref);
    return jt == stage_index_.end() ? std::nullopt : std::optional<int>(jt->second);
  }

  void compile(const StaticModel& model, const BehavioralModel& behavior) {
    model_ = model;
    ModelIndex ix(model_);
    for (const auto& s : ix.all_stages()) {
      StageInfo si;
      si.ref = s;
      si.path = ix.qualified(s);
      si.boundary = is_boundary_transfer(model_, s);
      stage_index_[s] = static_cast<int>(stages_.size());
      stage_by_path_[si.path] = static_cast<int>(stages_.size());
      stage_by_path_[s.path()] = static_cast<int>(stages_.size());
      stages_.push_back(std::move(si));
    }
    for (const auto* m : ix.all_machines()) {
      if (m != ix.machine(m->id)) continue;
      for (const auto& f : m->flags) {
        FlagRef ref{m->id, f.id};
        flag_index_[ref] = static_cast<int>(flags_.size());
        flags_.push_back({ref, ix.qualified(m->id) + "." + f.id, f.initial, {}});
      }
      if (m->storage) {
        StorageRef ref{m->id, m->storage->id};
        storage_index_[ref] = static_cast<int>(storages_.size());
        int sid = static_cast<int>(storages_.size());
        storages_.push_back({ref, m->storage->capacity, m->storage->level, {}});
        for (auto k : m->stages) stages_[stage_index_.at({m->id, k})].storage = sid;
      }
    }
    std::map<FlowKey, int> flow_index;
    for (const auto& f : model_.flows) {
      auto a = stage_index_.find(f.from), b = stage_index_.find(f.to);
      if (a == stage_index_.end() || b == stage_index_.end()) continue;
      int fid = static_cast<int>(flow_events_.size());
      flow_events_.emplace_back();
      flow_index[{f.from, f.to}] = fid;
      auto& si = stages_[a->second];
      bool inter = f.from.machine != f.to.machine;
      if (inter) {
        si.inter.emplace_back(b->second, fid);
        si.inter_labels.push_back(stages_[b->second].path);
      } else {
        si.intra.emplace_back(b->second, fid);
        si.intra_labels.push_back(stages_[b->second].path);
        if (f.from.kind == StageKind::transfer && f.to.kind == StageKind::receive) si.own_receive = b->second;
      }
    }
    std::map<TriggerKey, int> trigger_index;
    for (const auto& t : model_.triggers) {
      auto a = stage_index_.find(t.from), b = stage_index_.find(t.to);
      if (a == stage_index_.end() || b == stage_index_.end()) continue;
      TriggerInfo ti;
      ti.from = a->second;
      ti.to = b->second;
      ti.guard = t.guard;
      ti.payload = t.payload;
      for (const auto& s : t.sets) {
        auto f = flag_index_.find(s.flag);
        if (f != flag_index_.end()) ti.sets.emplace_back(f->second, s.value);
      }
      trigger_index[{t.from, t.to}] = static_cast<int>(triggers_.size());
      stages_[a->second].triggers.push_back(static_cast<int>(triggers_.size()));
      triggers_.push_back(std::move(ti));
    }
    for (const auto& c : model_.choices) {
      auto at = stage_index_.find(c.at);
      if (at == stage_index_.end()) continue;
      ChoiceInfo ci;
      ci.id = c.id;
      for (const auto& br : c.branches) {
        auto t = stage_index_.find(br.target);
        if (t == stage_index_.end()) continue;
        ci.labels.push_back(br.label);
        ci.targets.push_back(t->second);
      }
      catalog_[ci.id] = ci.labels;
      stages_[at->second].choice = static_cast<int>(choices_.size());
      choices_.push_back(std::move(ci));
    }
    for (const auto& s : stages_) {
      if (s.choice >= 0) continue;
      if (s.ref.kind == StageKind::transfer) {
        if (s.inter.size() > 1) catalog_[s.path] = s.inter_labels;
        auto non_receive = s.intra.size() - (s.own_receive >= 0 ? 1 : 0);
        if (non_receive > 1) catalog_[s.path] = s.intra_labels;
      } else if (s.intra.size() + s.inter.size() > 1) {
        auto labels = s.intra_labels;
        labels.insert(labels.end(), s.inter_labels.begin(), s.inter_labels.end());
        catalog_[s.path] = labels;
      }
    }

    for (const auto& e : behavior.events) {
      int eid = static_cast<int>(event_ids_.size());
      event_ids_.push_back(e.id);
      const Element& anchor = e.region->anchor;
      if (const auto* s = std::get_if<StageRef>(&anchor)) {
        if (auto it = stage_index_.find(*s); it != stage_index_.end()) stages_[it->second].events.push_back(eid);
      } else if (const auto* t = std::get_if<TriggerKey>(&anchor)) {
        if (auto it = trigger_index.find(*t); it != trigger_index.end()) triggers_[it->second].events.push_back(eid);
      } else if (const auto* f = std::get_if<FlowKey>(&anchor)) {
        if (auto it = flow_index.find(*f); it != flow_index.end()) flow_events_[it->second].push_back(eid);
      } else if (const auto* f = std::get_if<FlagRef>(&anchor)) {
        if (auto it = flag_index_.find(*f); it != flag_index_.end()) flags_[it->second].events.push_back(eid);
      } else if (const auto* st = std::get_if<StorageRef>(&anchor)) {
        if (auto it = storage_index_.find(*st); it != storage_index_.end()) storages_[it->second].events.push_back(eid);
      }
    }
    auto by_name = [&](int a, int b) { return event_ids_[a] < event_ids_[b]; };
    for (auto& s : stages_) std::sort(s.events.begin(), s.events.end(), by_name);
    for (auto& t : triggers_) std::sort(t.events.begin(), t.events.end(), by_name);
    for (auto& f : flow_events_) std::sort(f.begin(), f.end(), by_name);
    for (auto& f : flags_) std::sort(f.events.begin(), f.events.end(), by_name);
    for (auto& s : storages_) std::sort(s.events.begin(), s.events.end(), by_name);
  }

  class Run {
   public:
    Run(const Simulator& sim, const SimConfig& cfg, const ChoiceScript& script)
        : sim_(sim), cfg_(cfg), choices_(script, cfg.policy, static_cast<std::uint64_t>(cfg.seed)) {
      for (const auto& f : sim.flags_) flags_.push_back(f.initial);
      for (const auto& s : sim.storages_) levels_.push_back(s.level);
    }

    int add_thing(Thing t) {
      things_.push_back(std::move(t));
      return static_cast<int>(things_.size()) - 1;
    }

    void cascade(std::int64_t tick, std::vector<Activation> seeds) {
      std::deque<Activation> queue(seeds.begin(), seeds.end());
      while (!queue.empty()) {
        Activation a = queue.front();
        queue.pop_front();
        if (a.step > cfg_.cascade_limit)
          throw Error(Errc::cascade_overflow, "cascade exceeded " + std::to_string(cfg_.cascade_limit) +
                                                  " steps at tick " + std::to_string(tick));
        activate(tick, a, queue);
      }
      flush_tick();
    }

    Trace finish(std::int64_t seed) {
      Trace t;
      t.seed = seed;
      t.occurrences = std::move(out_);
      for (size_t i = 0; i < sim_.flags_.size(); ++i) t.flags[sim_.flags_[i].qualified] = flags_[i];
      return t;
    }

   private:
    struct Pending {
      std::int64_t sub = 0;
      int event = 0;
      std::int64_t seq = 0;
      Cause cause;
    };

    Cause record(const std::vector<int>& events, std::int64_t sub, Cause cause) {
      Cause first = cause;
      for (size_t i = 0; i < events.size(); ++i) {
        Pending p{sub, events[i], seq_++, cause};
        if (i == 0) first = Cause{p.seq, false};
        pending_.push_back(p);
      }
      return first;
    }

    void flush_tick() {
      std::stable_sort(pending_.begin(), pending_.end(), [&](const Pending& a, const Pending& b) {
        if (a.sub != b.sub) return a.sub < b.sub;
        return sim_.event_ids_[a.event] < sim_.event_ids_[b.event];
      });
      for (const auto& p : pending_) {
        ids_[p.seq] = "o" + std::to_string(out_.size());
        std::string cause = p.cause.stimulus ? "s" + std::to_string(p.cause.index) : ids_.at(p.cause.index);
        out_.push_back({sim_.event_ids_[p.event], tick_of_pending_, cause});
      }
      pending_.clear();
    }

    void activate(std::int64_t tick, const Activation& a, std::deque<Activation>& queue) {
      tick_of_pending_ = tick;
      const StageInfo& st = sim_.stages_[a.stage];
      Cause cause = record(st.events, 4 * a.step, a.cause);

      std::set<int> suppressed;
      if (st.choice >= 0) {
        const ChoiceInfo& ci = sim_.choices_[st.choice];
        size_t k = choices_.pick(ci.id, ci.labels);
        for (size_t i = 0; i < ci.targets.size(); ++i)
          if (i != k) suppressed.insert(ci.targets[i]);
      }

      const std::vector<std::string> snapshot = flags_;
      const std::vector<std::int64_t> level_snapshot = levels_;
      auto flag_value = [&](const FlagRef& f) -> std::string {
        auto it = sim_.flag_index_.find(f);
        return it == sim_.flag_index_.end() ? std::string() : snapshot[it->second];
      };
      auto storage_level = [&](const StorageRef& s) -> std::int64_t {
        auto it = sim_.storage_index_.find(s);
        return it == sim_.storage_index_.end() ? 0 : level_snapshot[it->second];
      };
      for (int tid : st.triggers) {
        const TriggerInfo& t = sim_.triggers_[tid];
        if (suppressed.count(t.to)) continue;
        if (t.guard && !evaluate(*t.guard, flag_value, storage_level)) continue;
        Cause c = record(t.events, 4 * a.step + 1, cause);
        const bool anchored = !t.events.empty();
        for (const auto& [fid, v] : t.sets) {
          flags_[fid] = v;
          Cause f = record(sim_.flags_[fid].events, 4 * a.step + 2, c);
          if (!anchored && c.stimulus == cause.stimulus && c.index == cause.index) c = f;
        }
        Activation next;
        next.stage = t.to;
        next.triggered = true;
        next.step = a.step + 1;
        next.cause = c;
        if (t.payload) next.thing = add_thing({"p" + std::to_string(things_.size()), {{"payload", *t.payload}}});
        queue.push_back(next);
      }

      int thing = a.thing;
      bool inbound = a.inbound;
      if (thing < 0 && a.triggered) {
        if (st.ref.kind == StageKind::create) {
          thing = add_thing({"c" + std::to_string(things_.size()), {}});
        } else if (st.ref.kind == StageKind::release && st.storage >= 0 && levels_[st.storage] > 0) {
          --levels_[st.storage];
          cause = record(sim_.storages_[st.storage].events, 4 * a.step + 2, cause);
          thing = add_thing({"w" + std::to_string(things_.size()), {}});
        }
      }
      if (thing < 0) return;

      std::vector<std::pair<int, int>> options;
      std::vector<std::string> labels;
      auto keep = [&](const std::vector<std::pair<int, int>>& arcs, const std::vector<std::string>& names,
                      bool skip_receive) {
        for (size_t i = 0; i < arcs.size(); ++i) {
          if (suppressed.count(arcs[i].first)) continue;
          if (skip_receive && arcs[i].first == st.own_receive) continue;
          options.push_back(arcs[i]);
          labels.push_back(names[i]);
        }
      };
      bool next_inbound = false;
      if (st.ref.kind == StageKind::transfer) {
        if (inbound) {
          if (st.own_receive >= 0 && !suppressed.count(st.own_receive)) {
            for (const auto& arc : st.intra)
              if (arc.first == st.own_receive) options.push_back(arc);
            labels.push_back(sim_.stages_[st.own_receive].path);
          }
        } else {
          keep(st.inter, st.inter_labels, false);
          if (options.empty()) keep(st.intra, st.intra_labels, true);
          next_inbound = true;
          if (options.empty()) return;  // leaves the model
        }
      } else {
        keep(st.intra, st.intra_labels, false);
        keep(st.inter, st.inter_labels, false);
      }
      if (options.empty()) {
        if (st.storage >= 0) {
          auto& lvl = levels_[st.storage];
          const auto& cap = sim_.storages_[st.storage].capacity;
          if (!cap || lvl < *cap) ++lvl;
          record(sim_.storages_[st.storage].events, 4 * a.step + 3, cause);
        }
        return;
      }
      size_t pick = options.size() == 1 ? 0 : choices_.pick(st.path, labels);
      auto [target, flow] = options[pick];
      Cause c = record(sim_.flow_events_[flow], 4 * a.step + 3, cause);
      Activation next;
      next.stage = target;
      next.thing = thing;
      next.step = a.step + 1;
      next.cause = c;
      next.inbound = next_inbound && sim_.stages_[target].ref.machine != st.ref.machine;
      queue.push_back(next);
    }

    const Simulator& sim_;
    const SimConfig& cfg_;
    ChoiceResolver choices_;
    std::vector<std::string> flags_;
    std::vector<std::int64_t> levels_;
    std::vector<Thing> things_;
    std::vector<Pending> pending_;
    std::int64_t seq_ = 0;
    std::int64_t tick_of_pending_ = 0;
    std::map<std::int64_t, std::string> ids_;
    std::vector<Occurrence> out_;
  };

  StaticModel model_;
  std::vector<StageInfo> stages_;
  std::map<StageRef, int> stage_index_;
  std::map<std::string, int> stage_by_path_;
  std::vector<TriggerInfo> triggers_;
  std::vector<ChoiceInfo> choices_;
  std::vector<FlagInfo> flags_;
  std::map<FlagRef, int> flag_index_;
  std::vector<StorageInfo> storages_;
  std::map<StorageRef, int> storage_index_;
  std::vector<std::vector<int>> flow_events_;
  std::vector<std::string> event_ids_;
  ChoiceCatalog catalog_;
};

inline Trace simulate(const StaticModel& model, const BehavioralModel& behavior, const SimConfig& config,
                      const std::vector<Stimulus>& stimuli, const ChoiceScript& script = {}) {
  return Simulator(model, behavior).run(config, stimuli, script);
}

// ---------------------------------------------------------------------------
// Conformance

struct Violation {
  size_t index = 0;
  std::string kind;
  std::string message;
};

struct Verdict {
  std::vector<Violation> violations;
  bool conforms() const { return violations.empty(); }
  bool has(std::string_view kind) const {
    return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == kind; });
  }
};

inline std::optional<size_t> occurrence_ref(const std::string& cause) {
  if (cause.size() < 2 || cause[0] != 'o') return std::nullopt;
  size_t k = 0;
  for (size_t i = 1; i < cause.size(); ++i) {
    if (cause[i] < '0' || cause[i] > '9') return std::nullopt;
    k = k * 10 + static_cast<size_t>(cause[i] - '0');
  }
  return k;
}

/// Checks that every occurrence continues its causal chain along a behavior
/// edge whose delay bounds hold, that chains begin at start events, and that
/// time never decreases.
inline Verdict check_trace(const Trace& trace, const BehavioralModel& behavior) {
  Verdict v;
  const auto& occ = trace.occurrences;
  auto add = [&](size_t i, std::string kind, std::string msg) {
    v.violations.push_back({i, std::move(kind), std::move(msg)});
  };
  for (size_t i = 0; i < occ.size(); ++i) {
    const auto& o = occ[i];
    if (i > 0 && o.at < occ[i - 1].at)
      add(i, "TIME_DECREASED", "tick " + std::to_string(o.at) + " is before " + std::to_string(occ[i - 1].at));
    if (!behavior.event(o.event)) {
      add(i, "UNKNOWN_EVENT", "event " + o.event + " is not in behavior " + behavior.id);
      continue;
    }
    std::optional<size_t> pred;
    if (auto k = occurrence_ref(o.cause)) {
      if (*k >= i) {
        add(i, "NO_EDGE", "cause " + o.cause + " does not precede occurrence " + std::to_string(i));
        continue;
      }
      pred = *k;
    } else if (o.cause.empty() && i > 0) {
      pred = i - 1;
    }
    if (!pred) {
      if (!behavior.is_start(o.event)) add(i, "NOT_START", "chain begins at " + o.event + ", which is not a start event");
      continue;
    }
    const auto& p = occ[*pred];
    const auto* edge = behavior.edge(p.event, o.event);
    if (!edge) {
      add(i, "NO_EDGE", "no edge " + p.event + " -> " + o.event);
      continue;
    }
    std::int64_t gap = o.at - p.at;
    if (gap < edge->delay.min)
      add(i, "DELAY_UNDERRUN", p.event + " -> " + o.event + " after " + std::to_string(gap) + " ticks, minimum " +
                                   std::to_string(edge->delay.min));
    else if (edge->delay.max && gap > *edge->delay.max)
      add(i, "DELAY_EXCEEDED", p.event + " -> " + o.event + " after " + std::to_string(gap) + " ticks, maximum " +
                                   std::to_string(*edge->delay.max));
  }
  return v;
}

// ---------------------------------------------------------------------------
// JSON

inline std::string trace_json(const Trace& t) {
  nlohmann::ordered_json j;
  j["seed"] = t.seed;
  j["occurrences"] = nlohmann::ordered_json::array();
  for (const auto& o : t.occurrences) {
    nlohmann::ordered_json e;
    e["event"] = o.event;
    e["at"] = o.at;
    e["cause"] = o.cause;
    j["occurrences"].push_back(std::move(e));
  }
  j["flags"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : t.flags) j["flags"][k] = v;
  return j.dump(2) + "\n";
}

inline Trace trace_from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    Trace t;
    t.seed = j.value("seed", std::int64_t{0});
    for (const auto& e : j.at("occurrences"))
      t.occurrences.push_back({e.at("event").get<std::string>(), e.at("at").get<std::int64_t>(),
                               e.value("cause", std::string())});
    if (j.contains("flags"))
      for (const auto& [k, v] : j["flags"].items()) t.flags[k] = v.get<std::string>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, std::string("bad trace JSON: ") + e.what());
  }
}

inline std::vector<Stimulus> stimuli_from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    std::vector<Stimulus> out;
    for (const auto& e : j) {
      Stimulus s;
      s.at = e.at("at").get<std::int64_t>();
      s.target = e.at("target").get<std::string>();
      s.thing.id = e.value("thing", std::string());
      if (e.contains("payload")) {
        const auto& p = e["payload"];
        if (p.is_object())
          for (const auto& [k, v] : p.items()) s.thing.payload[k] = v.is_string() ? v.get<std::string>() : v.dump();
        else if (!p.is_null())
          s.thing.payload["value"] = p.is_string() ? p.get<std::string>() : p.dump();
      }
      out.push_back(std::move(s));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, std::string("bad stimuli JSON: ") + e.what());
  }
}

inline std::string verdict_json(const Verdict& v) {
  nlohmann::ordered_json j;
  j["conforms"] = v.conforms();
  j["violations"] = nlohmann::ordered_json::array();
  for (const auto& x : v.violations) {
    nlohmann::ordered_json e;
    e["index"] = x.index;
    e["kind"] = x.kind;
    e["message"] = x.message;
    j["violations"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

}  // namespace tmk
