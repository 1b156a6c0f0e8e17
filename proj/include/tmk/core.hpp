// Copyright 2026 The tmkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Static thinging-machine models: machines built from the five generic
// stages, flow and trigger arcs, flags, storages, and structural validation.

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "tmk/error.hpp"

namespace tmk {

// Declaration order doubles as the canonical stage order.
enum class StageKind { create, process, release, transfer, receive };

inline constexpr std::array<StageKind, 5> kStageKinds = {
    StageKind::create, StageKind::process, StageKind::release, StageKind::transfer,
    StageKind::receive};

constexpr std::string_view to_string(StageKind k) noexcept {
  switch (k) {
    case StageKind::create: return "create";
    case StageKind::process: return "process";
    case StageKind::release: return "release";
    case StageKind::transfer: return "transfer";
    case StageKind::receive: return "receive";
  }
  return "?";
}

inline std::optional<StageKind> parse_stage_kind(std::string_view s) {
  for (auto k : kStageKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

struct StageRef {
  std::string machine;
  StageKind kind = StageKind::process;

  std::string path() const { return machine + "." + std::string(to_string(kind)); }
  auto operator<=>(const StageRef&) const = default;
};

struct FlagRef {
  std::string machine;
  std::string flag;

  std::string path() const { return machine + "." + flag; }
  auto operator<=>(const FlagRef&) const = default;
};

struct StorageRef {
  std::string machine;
  std::string storage;

  std::string path() const { return machine + "." + storage; }
  auto operator<=>(const StorageRef&) const = default;
};

struct Flag {
  std::string id;
  std::vector<std::string> values;
  std::string initial;

  bool has_value(std::string_view v) const {
    return std::find(values.begin(), values.end(), v) != values.end();
  }
  bool operator==(const Flag&) const = default;
};

/// A counted buffer. capacity == nullopt means unbounded.
struct Storage {
  std::string id;
  std::optional<std::int64_t> capacity;
  std::int64_t level = 0;

  bool operator==(const Storage&) const = default;
};

struct Machine {
  std::string id;
  std::vector<StageKind> stages;
  std::vector<Flag> flags;
  std::optional<Storage> storage;
  std::vector<Machine> submachines;

  bool has_stage(StageKind k) const {
    return std::find(stages.begin(), stages.end(), k) != stages.end();
  }
  const Flag* find_flag(std::string_view name) const {
    for (const auto& f : flags)
      if (f.id == name) return &f;
    return nullptr;
  }
  bool operator==(const Machine&) const = default;
};

/// Boolean combination of flag-equality atoms (plus storage-level comparisons).
struct Guard {
  enum class Op { flag_eq, storage_ge, storage_lt, all, any, negate };

  Op op = Op::flag_eq;
  FlagRef flag;
  std::string value;
  StorageRef storage;
  std::int64_t bound = 0;
  std::vector<Guard> args;

  static Guard flag_equals(FlagRef f, std::string v) {
    Guard g;
    g.op = Op::flag_eq;
    g.flag = std::move(f);
    g.value = std::move(v);
    return g;
  }
  static Guard storage_at_least(StorageRef s, std::int64_t n) {
    Guard g;
    g.op = Op::storage_ge;
    g.storage = std::move(s);
    g.bound = n;
    return g;
  }
  static Guard storage_below(StorageRef s, std::int64_t n) {
    Guard g;
    g.op = Op::storage_lt;
    g.storage = std::move(s);
    g.bound = n;
    return g;
  }
  static Guard both(Guard a, Guard b) { return binary(Op::all, std::move(a), std::move(b)); }
  static Guard either(Guard a, Guard b) { return binary(Op::any, std::move(a), std::move(b)); }
  static Guard negation(Guard a) {
    Guard g;
    g.op = Op::negate;
    g.args.push_back(std::move(a));
    return g;
  }

  bool operator==(const Guard&) const = default;

 private:
  static Guard binary(Op op, Guard a, Guard b) {
    Guard g;
    g.op = op;
    g.args.push_back(std::move(a));
    g.args.push_back(std::move(b));
    return g;
  }
};

template <class FlagLookup, class StorageLookup>
bool evaluate(const Guard& g, const FlagLookup& flag_value, const StorageLookup& storage_level) {
  switch (g.op) {
    case Guard::Op::flag_eq: return flag_value(g.flag) == g.value;
    case Guard::Op::storage_ge: return storage_level(g.storage) >= g.bound;
    case Guard::Op::storage_lt: return storage_level(g.storage) < g.bound;
    case Guard::Op::all: return evaluate(g.args[0], flag_value, storage_level) &&
                                evaluate(g.args[1], flag_value, storage_level);
    case Guard::Op::any: return evaluate(g.args[0], flag_value, storage_level) ||
                                evaluate(g.args[1], flag_value, storage_level);
    case Guard::Op::negate: return !evaluate(g.args[0], flag_value, storage_level);
  }
  return false;
}

inline void collect_guard_refs(const Guard& g, std::vector<FlagRef>& flags,
                               std::vector<StorageRef>& storages) {
  switch (g.op) {
    case Guard::Op::flag_eq: flags.push_back(g.flag); break;
    case Guard::Op::storage_ge:
    case Guard::Op::storage_lt: storages.push_back(g.storage); break;
    default:
      for (const auto& a : g.args) collect_guard_refs(a, flags, storages);
  }
}

struct FlagAssign {
  FlagRef flag;
  std::string value;
  auto operator<=>(const FlagAssign&) const = default;
};

struct FlowArc {
  StageRef from;
  StageRef to;
  auto operator<=>(const FlowArc&) const = default;
};

struct TriggerArc {
  StageRef from;
  StageRef to;
  std::optional<Guard> guard;
  std::vector<FlagAssign> sets;
  std::optional<std::string> payload;

  bool operator==(const TriggerArc&) const = default;
};

struct ChoiceBranch {
  std::string label;
  StageRef target;
  bool operator==(const ChoiceBranch&) const = default;
};

/// A named point of nondeterminism: when `at` activates, exactly one branch
/// target is allowed to receive the outgoing flow/trigger.
struct ChoicePoint {
  std::string id;
  StageRef at;
  std::vector<ChoiceBranch> branches;
  bool operator==(const ChoicePoint&) const = default;
};

struct StaticModel {
  std::vector<Machine> machines;
  std::vector<FlowArc> flows;
  std::vector<TriggerArc> triggers;
  std::vector<ChoicePoint> choices;

  bool empty() const {
    return machines.empty() && flows.empty() && triggers.empty() && choices.empty();
  }
  bool operator==(const StaticModel&) const = default;
};

namespace detail {
inline void canonicalize_machine(Machine& m) {
  std::sort(m.stages.begin(), m.stages.end());
  std::stable_sort(m.flags.begin(), m.flags.end(),
                   [](const Flag& a, const Flag& b) { return a.id < b.id; });
  for (auto& s : m.submachines) canonicalize_machine(s);
  std::stable_sort(m.submachines.begin(), m.submachines.end(),
                   [](const Machine& a, const Machine& b) { return a.id < b.id; });
}
}  // namespace detail

/// Puts every unordered collection into its canonical order. Two models that
/// differ only in declaration order compare equal afterwards.
inline void canonicalize(StaticModel& model) {
  for (auto& m : model.machines) detail::canonicalize_machine(m);
  std::stable_sort(model.machines.begin(), model.machines.end(),
                   [](const Machine& a, const Machine& b) { return a.id < b.id; });
  std::stable_sort(model.flows.begin(), model.flows.end());
  for (auto& t : model.triggers) std::stable_sort(t.sets.begin(), t.sets.end());
  std::stable_sort(model.triggers.begin(), model.triggers.end(),
                   [](const TriggerArc& a, const TriggerArc& b) {
                     return std::tie(a.from, a.to) < std::tie(b.from, b.to);
                   });
  std::stable_sort(model.choices.begin(), model.choices.end(),
                   [](const ChoicePoint& a, const ChoicePoint& b) { return a.id < b.id; });
}

// ---------------------------------------------------------------------------
// Elements: the addressable parts of a static model (regions are sets of these)

struct FlowKey {
  StageRef from;
  StageRef to;
  auto operator<=>(const FlowKey&) const = default;
};

struct TriggerKey {
  StageRef from;
  StageRef to;
  auto operator<=>(const TriggerKey&) const = default;
};

using Element = std::variant<StageRef, FlowKey, TriggerKey, FlagRef, StorageRef>;

inline std::string to_string(const Element& e) {
  struct V {
    std::string operator()(const StageRef& s) const { return s.path(); }
    std::string operator()(const FlowKey& f) const {
      return "flow " + f.from.path() + " -> " + f.to.path();
    }
    std::string operator()(const TriggerKey& t) const {
      return "trigger " + t.from.path() + " -> " + t.to.path();
    }
    std::string operator()(const FlagRef& f) const { return "flag " + f.path(); }
    std::string operator()(const StorageRef& s) const { return "storage " + s.path(); }
  };
  return std::visit(V{}, e);
}

/// Flat lookup tables over the machine tree. Holds pointers into the model, so
/// it must not outlive it.
class ModelIndex {
 public:
  explicit ModelIndex(const StaticModel& model) : model_(&model) {
    for (const auto& m : model.machines) add(m, nullptr);
  }

  const StaticModel& model() const { return *model_; }

  const Machine* machine(std::string_view id) const {
    auto it = machines_.find(std::string(id));
    return it == machines_.end() ? nullptr : it->second;
  }
  const Machine* parent(std::string_view id) const {
    auto it = parents_.find(std::string(id));
    return it == parents_.end() ? nullptr : it->second;
  }
  bool has_stage(const StageRef& s) const {
    const auto* m = machine(s.machine);
    return m && m->has_stage(s.kind);
  }
  const Flag* flag(const FlagRef& f) const {
    const auto* m = machine(f.machine);
    return m ? m->find_flag(f.flag) : nullptr;
  }
  const Storage* storage(const StorageRef& s) const {
    const auto* m = machine(s.machine);
    if (!m || !m->storage || m->storage->id != s.storage) return nullptr;
    return &*m->storage;
  }

  /// Dotted path from the root machine down to `id`.
  std::string qualified(std::string_view id) const {
    std::vector<std::string> parts{std::string(id)};
    for (const Machine* p = parent(id); p; p = parent(p->id)) parts.push_back(p->id);
    std::string out;
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
      if (!out.empty()) out += '.';
      out += *it;
    }
    return out;
  }
  std::string qualified(const StageRef& s) const {
    return qualified(s.machine) + "." + std::string(to_string(s.kind));
  }

  /// Machines in depth-first declaration order (duplicates included).
  const std::vector<const Machine*>& all_machines() const { return order_; }

  std::vector<StageRef> all_stages() const {
    std::vector<StageRef> out;
    for (const auto* m : order_)
      for (auto k : m->stages) out.push_back({m->id, k});
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  bool has_element(const Element& e) const {
    struct V {
      const ModelIndex& ix;
      bool operator()(const StageRef& s) const { return ix.has_stage(s); }
      bool operator()(const FlowKey& f) const {
        const auto& fl = ix.model().flows;
        return std::find(fl.begin(), fl.end(), FlowArc{f.from, f.to}) != fl.end();
      }
      bool operator()(const TriggerKey& t) const { return ix.trigger(t) != nullptr; }
      bool operator()(const FlagRef& f) const { return ix.flag(f) != nullptr; }
      bool operator()(const StorageRef& s) const { return ix.storage(s) != nullptr; }
    };
    return std::visit(V{*this}, e);
  }

  const TriggerArc* trigger(const TriggerKey& k) const {
    for (const auto& t : model_->triggers)
      if (t.from == k.from && t.to == k.to) return &t;
    return nullptr;
  }

  /// Every element of the model, sorted and deduplicated.
  std::vector<Element> all_elements() const {
    std::vector<Element> out;
    for (const auto& s : all_stages()) out.emplace_back(s);
    for (const auto& f : model_->flows) out.emplace_back(FlowKey{f.from, f.to});
    for (const auto& t : model_->triggers) out.emplace_back(TriggerKey{t.from, t.to});
    for (const auto* m : order_) {
      for (const auto& f : m->flags) out.emplace_back(FlagRef{m->id, f.id});
      if (m->storage) out.emplace_back(StorageRef{m->id, m->storage->id});
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  void add(const Machine& m, const Machine* parent) {
    order_.push_back(&m);
    machines_.emplace(m.id, &m);  // first declaration wins
    if (parent) parents_.emplace(m.id, parent);
    for (const auto& s : m.submachines) add(s, &m);
  }

  const StaticModel* model_;
  std::map<std::string, const Machine*> machines_;
  std::map<std::string, const Machine*> parents_;
  std::vector<const Machine*> order_;
};

// ---------------------------------------------------------------------------
// Validation

enum class Severity { warning, fatal };

constexpr std::string_view to_string(Severity s) noexcept {
  return s == Severity::fatal ? "FATAL" : "WARNING";
}

struct Finding {
  Severity severity = Severity::fatal;
  std::string rule;
  std::string location;
  std::string message;

  auto operator<=>(const Finding&) const = default;
};

struct ValidationReport {
  std::vector<Finding> findings;

  bool ok() const { return findings.empty(); }
  bool fatal() const {
    return std::any_of(findings.begin(), findings.end(),
                       [](const Finding& f) { return f.severity == Severity::fatal; });
  }
  bool has_rule(std::string_view rule) const {
    return std::any_of(findings.begin(), findings.end(),
                       [&](const Finding& f) { return f.rule == rule; });
  }
};

/// Intra-machine flow order allowed between stages of one machine.
inline bool legal_intra_arc(StageKind from, StageKind to) {
  using K = StageKind;
  static constexpr std::array<std::pair<K, K>, 7> kWhitelist = {{
      {K::transfer, K::receive},
      {K::receive, K::process},
      {K::receive, K::release},
      {K::create, K::process},
      {K::create, K::release},
      {K::process, K::release},
      {K::release, K::transfer},
  }};
  return std::find(kWhitelist.begin(), kWhitelist.end(), std::pair{from, to}) != kWhitelist.end();
}

inline ValidationReport validate_static(const StaticModel& model) {
  ModelIndex ix(model);
  std::vector<Finding> out;
  auto fatal = [&](std::string rule, std::string loc, std::string msg) {
    out.push_back({Severity::fatal, std::move(rule), std::move(loc), std::move(msg)});
  };
  auto stage_loc = [&](const StageRef& s) {
    return ix.machine(s.machine) ? ix.qualified(s) : s.path();
  };

  std::map<std::string, int> id_count;
  for (const auto* m : ix.all_machines()) ++id_count[m->id];
  for (const auto& [id, n] : id_count)
    if (n > 1) fatal("DUPLICATE_MACHINE_ID", id, "machine id declared " + std::to_string(n) + " times");

  for (const auto* m : ix.all_machines()) {
    const std::string loc = ix.qualified(m->id);
    if (m->stages.empty()) fatal("EMPTY_MACHINE", loc, "machine has no stages");
    for (auto k : kStageKinds) {
      auto n = std::count(m->stages.begin(), m->stages.end(), k);
      if (n > 1) fatal("DUPLICATE_STAGE", loc + "." + std::string(to_string(k)), "stage declared twice");
    }
    std::set<std::string> flag_ids;
    for (const auto& f : m->flags) {
      const std::string floc = loc + "." + f.id;
      if (!flag_ids.insert(f.id).second) fatal("DUPLICATE_FLAG", floc, "flag declared twice");
      std::set<std::string> vals(f.values.begin(), f.values.end());
      if (vals.size() != f.values.size()) fatal("DUPLICATE_FLAG_VALUE", floc, "flag repeats a value");
      if (vals.size() < 2) fatal("FLAG_TOO_FEW_VALUES", floc, "flag needs at least two values");
      if (!f.has_value(f.initial))
        fatal("FLAG_INIT_INVALID", floc, "initial value '" + f.initial + "' is not a declared value");
    }
    if (m->storage) {
      const auto& s = *m->storage;
      const std::string sloc = loc + "." + s.id;
      if (s.capacity && *s.capacity <= 0) fatal("STORAGE_BAD_CAPACITY", sloc, "capacity must be positive");
      if (s.level < 0) fatal("STORAGE_BAD_LEVEL", sloc, "level must be non-negative");
      if (s.capacity && s.level > *s.capacity) fatal("STORAGE_OVER_CAPACITY", sloc, "level exceeds capacity");
    }
  }

  std::set<FlowArc> seen_flows;
  for (const auto& f : model.flows) {
    const std::string loc = stage_loc(f.from) + " -> " + stage_loc(f.to);
    if (!seen_flows.insert(f).second) fatal("DUPLICATE_ARC", loc, "flow arc declared twice");
    bool resolved = true;
    for (const auto* s : {&f.from, &f.to})
      if (!ix.has_stage(*s)) {
        fatal("UNRESOLVED_STAGE", loc, "no stage " + s->path());
        resolved = false;
      }
    if (!resolved) continue;
    if (f.from.machine == f.to.machine) {
      if (!legal_intra_arc(f.from.kind, f.to.kind))
        fatal("ILLEGAL_INTRA_ARC", loc,
              std::string(to_string(f.from.kind)) + " -> " + std::string(to_string(f.to.kind)) +
                  " is not a legal flow inside a machine");
    } else if (f.from.kind != StageKind::transfer || f.to.kind != StageKind::transfer) {
      fatal("ILLEGAL_INTER_ARC", loc, "flows between machines must go transfer -> transfer");
    }
  }

  auto check_guard_refs = [&](const Guard& g, const std::string& loc) {
    std::vector<FlagRef> flags;
    std::vector<StorageRef> storages;
    collect_guard_refs(g, flags, storages);
    for (const auto& f : flags)
      if (!ix.flag(f)) fatal("GUARD_UNKNOWN_FLAG", loc, "guard references undeclared flag " + f.path());
    for (const auto& s : storages)
      if (!ix.storage(s)) fatal("GUARD_UNKNOWN_STORAGE", loc, "guard references undeclared storage " + s.path());
    std::function<void(const Guard&)> values = [&](const Guard& x) {
      if (x.op == Guard::Op::flag_eq) {
        if (const auto* fl = ix.flag(x.flag); fl && !fl->has_value(x.value))
          fatal("GUARD_UNKNOWN_VALUE", loc, x.flag.path() + " has no value '" + x.value + "'");
      }
      for (const auto& a : x.args) values(a);
    };
    values(g);
  };

  std::set<std::pair<StageRef, StageRef>> seen_triggers;
  for (const auto& t : model.triggers) {
    const std::string loc = stage_loc(t.from) + " => " + stage_loc(t.to);
    if (!seen_triggers.insert({t.from, t.to}).second)
      fatal("DUPLICATE_TRIGGER", loc, "trigger arc declared twice between the same stages");
    for (const auto* s : {&t.from, &t.to})
      if (!ix.has_stage(*s)) fatal("UNRESOLVED_STAGE", loc, "no stage " + s->path());
    if (t.from == t.to) fatal("TRIGGER_SELF_LOOP", loc, "trigger arc from a stage to itself");
    if (t.guard) check_guard_refs(*t.guard, loc);
    for (const auto& a : t.sets) {
      const auto* fl = ix.flag(a.flag);
      if (!fl) fatal("SET_UNKNOWN_FLAG", loc, "trigger sets undeclared flag " + a.flag.path());
      else if (!fl->has_value(a.value))
        fatal("SET_UNKNOWN_VALUE", loc, a.flag.path() + " has no value '" + a.value + "'");
    }
  }

  std::set<std::string> choice_ids;
  std::set<StageRef> choice_stages;
  for (const auto& c : model.choices) {
    const std::string loc = "choice " + c.id;
    if (!choice_ids.insert(c.id).second) fatal("DUPLICATE_CHOICE", loc, "choice point declared twice");
    if (!choice_stages.insert(c.at).second)
      fatal("DUPLICATE_CHOICE", loc, "stage " + c.at.path() + " already has a choice point");
    if (!ix.has_stage(c.at)) {
      fatal("UNRESOLVED_STAGE", loc, "no stage " + c.at.path());
      continue;
    }
    if (c.branches.size() < 2) fatal("CHOICE_TOO_FEW_BRANCHES", loc, "a choice needs two or more branches");
    std::set<std::string> labels;
    std::set<StageRef> targets;
    for (const auto& b : c.branches) {
      if (!labels.insert(b.label).second) fatal("CHOICE_DUPLICATE_LABEL", loc, "label '" + b.label + "' repeated");
      if (!targets.insert(b.target).second)
        fatal("CHOICE_DUPLICATE_TARGET", loc, "target " + b.target.path() + " repeated");
      bool successor =
          std::any_of(model.flows.begin(), model.flows.end(),
                      [&](const FlowArc& f) { return f.from == c.at && f.to == b.target; }) ||
          std::any_of(model.triggers.begin(), model.triggers.end(),
                      [&](const TriggerArc& t) { return t.from == c.at && t.to == b.target; });
      if (!successor)
        fatal("CHOICE_TARGET_NOT_SUCCESSOR", loc,
              b.target.path() + " is not reached from " + c.at.path() + " by a flow or trigger arc");
    }
  }

  std::sort(out.begin(), out.end(), [](const Finding& a, const Finding& b) {
    return std::tie(a.rule, a.location, a.message, a.severity) <
           std::tie(b.rule, b.location, b.message, b.severity);
  });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return {std::move(out)};
}

// ---------------------------------------------------------------------------
// Lookup and graph queries

/// Resolves "Machine.stage" (optionally prefixed by ancestor machines). A path
/// may name any suffix of a stage's qualified path. Throws AMBIGUOUS_PATH when
/// several stages match.
inline std::optional<StageRef> find_stage(const StaticModel& model, std::string_view path) {
  if (path.empty()) return std::nullopt;
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    size_t dot = path.find('.', start);
    parts.emplace_back(path.substr(start, dot == std::string_view::npos ? dot : dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  auto kind = parse_stage_kind(parts.back());
  if (!kind) return std::nullopt;
  parts.pop_back();

  ModelIndex ix(model);
  std::vector<StageRef> hits;
  for (const auto* m : ix.all_machines()) {
    if (!m->has_stage(*kind)) continue;
    // Walk up the ancestor chain matching path components from the right.
    const Machine* cur = m;
    bool match = true;
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
      if (!cur || cur->id != *it) {
        match = false;
        break;
      }
      cur = ix.parent(cur->id);
    }
    if (match) hits.push_back({m->id, *kind});
  }
  std::sort(hits.begin(), hits.end());
  hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
  if (hits.size() > 1) throw Error(Errc::ambiguous_path, std::string(path) + " matches " +
                                                             std::to_string(hits.size()) + " stages");
  if (hits.empty()) return std::nullopt;
  return hits.front();
}

/// Stages reachable from `start` over flow arcs only (reflexive).
inline std::set<StageRef> flow_closure(const StaticModel& model, const StageRef& start) {
  std::set<StageRef> seen{start};
  std::deque<StageRef> work{start};
  while (!work.empty()) {
    auto cur = work.front();
    work.pop_front();
    for (const auto& f : model.flows)
      if (f.from == cur && seen.insert(f.to).second) work.push_back(f.to);
  }
  return seen;
}

/// Elements adjacent to `e` in the static element graph: arcs touch their
/// endpoint stages, flags and storages touch their owner's stages and the
/// triggers that read or set them.
inline std::vector<Element> element_neighbors(const ModelIndex& ix, const Element& e) {
  std::vector<Element> out;
  const auto& model = ix.model();
  auto owner_stages = [&](const std::string& machine) {
    if (const auto* m = ix.machine(machine))
      for (auto k : m->stages) out.emplace_back(StageRef{machine, k});
  };
  auto triggers_touching = [&](auto pred) {
    for (const auto& t : model.triggers)
      if (pred(t)) out.emplace_back(TriggerKey{t.from, t.to});
  };
  auto refs_of = [](const TriggerArc& t) {
    std::pair<std::vector<FlagRef>, std::vector<StorageRef>> r;
    if (t.guard) collect_guard_refs(*t.guard, r.first, r.second);
    for (const auto& a : t.sets) r.first.push_back(a.flag);
    return r;
  };

  if (const auto* s = std::get_if<StageRef>(&e)) {
    for (const auto& f : model.flows)
      if (f.from == *s || f.to == *s) out.emplace_back(FlowKey{f.from, f.to});
    triggers_touching([&](const TriggerArc& t) { return t.from == *s || t.to == *s; });
    if (const auto* m = ix.machine(s->machine)) {
      for (const auto& f : m->flags) out.emplace_back(FlagRef{m->id, f.id});
      if (m->storage) out.emplace_back(StorageRef{m->id, m->storage->id});
    }
  } else if (const auto* f = std::get_if<FlowKey>(&e)) {
    out.emplace_back(f->from);
    out.emplace_back(f->to);
  } else if (const auto* t = std::get_if<TriggerKey>(&e)) {
    out.emplace_back(t->from);
    out.emplace_back(t->to);
    if (const auto* arc = ix.trigger(*t)) {
      auto [flags, stores] = refs_of(*arc);
      for (auto& x : flags) out.emplace_back(x);
      for (auto& x : stores) out.emplace_back(x);
    }
  } else if (const auto* fl = std::get_if<FlagRef>(&e)) {
    owner_stages(fl->machine);
    triggers_touching([&](const TriggerArc& t) {
      auto r = refs_of(t);
      return std::find(r.first.begin(), r.first.end(), *fl) != r.first.end();
    });
  } else if (const auto* st = std::get_if<StorageRef>(&e)) {
    owner_stages(st->machine);
    triggers_touching([&](const TriggerArc& t) {
      auto r = refs_of(t);
      return std::find(r.second.begin(), r.second.end(), *st) != r.second.end();
    });
  }
  return out;
}

/// True when `elements` induce a weakly connected subgraph of the element graph.
inline bool weakly_connected(const ModelIndex& ix, const std::vector<Element>& elements) {
  if (elements.empty()) return false;
  std::set<Element> members(elements.begin(), elements.end());
  std::set<Element> seen{*members.begin()};
  std::deque<Element> work{*members.begin()};
  while (!work.empty()) {
    auto cur = work.front();
    work.pop_front();
    for (auto& n : element_neighbors(ix, cur))
      if (members.count(n) && seen.insert(n).second) work.push_back(n);
  }
  return seen.size() == members.size();
}

/// Transfer stages that can take a thing in from outside the model: they feed
/// their own receive stage and no other machine flows into them.
inline bool is_boundary_transfer(const StaticModel& model, const StageRef& s) {
  if (s.kind != StageKind::transfer) return false;
  bool feeds_receive = false;
  for (const auto& f : model.flows) {
    if (f.to == s && f.from.machine != s.machine) return false;
    if (f.from == s && f.to.machine == s.machine && f.to.kind == StageKind::receive) feeds_receive = true;
  }
  return feeds_receive;
}

}  // namespace tmk
