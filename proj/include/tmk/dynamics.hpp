// Copyright 2026 The tmkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Second and third description levels: event regions over a static model,
// events (region + time), and behavioral models (chronology graphs).

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tmk/core.hpp"
#include "tmk/dsl.hpp"

namespace tmk {

struct EventRegion {
  std::string id;
  std::vector<Element> elements;  // sorted, unique
  Element anchor;
  std::shared_ptr<const StaticModel> model;

  bool contains(const Element& e) const {
    return std::binary_search(elements.begin(), elements.end(), e);
  }
};

/// Checks and builds a region. Elements must resolve in `model`, include the
/// anchor, and be weakly connected.
inline std::shared_ptr<const EventRegion> make_region(std::shared_ptr<const StaticModel> model,
                                                      std::string id, std::vector<Element> elements,
                                                      Element anchor) {
  if (!model) throw Error(Errc::precondition, "region " + id + " has no static model");
  if (elements.empty()) throw Error(Errc::empty_region, "region " + id + " has no elements");
  std::sort(elements.begin(), elements.end());
  elements.erase(std::unique(elements.begin(), elements.end()), elements.end());
  ModelIndex ix(*model);
  for (const auto& e : elements)
    if (!ix.has_element(e))
      throw Error(Errc::unresolved_element, "region " + id + " references missing " + to_string(e));
  if (!std::binary_search(elements.begin(), elements.end(), anchor))
    throw Error(Errc::anchor_not_in_region, "anchor " + to_string(anchor) + " is not in region " + id);
  if (!weakly_connected(ix, elements))
    throw Error(Errc::region_disconnected, "region " + id + " is not connected in the static graph");
  auto r = std::make_shared<EventRegion>();
  r->id = std::move(id);
  r->elements = std::move(elements);
  r->anchor = std::move(anchor);
  r->model = std::move(model);
  return r;
}

/// The time submachine of an event: receives and processes a timestamp. It is
/// unbound until a simulation stamps an occurrence.
struct TimeMachine {
  Machine machine;
  std::optional<std::int64_t> stamp;
};

struct Event {
  std::string id;
  std::shared_ptr<const EventRegion> region;
  TimeMachine time;
};

inline Event mk_event(std::shared_ptr<const EventRegion> region, std::string id) {
  if (!region) throw Error(Errc::precondition, "event " + id + " needs a region");
  Event e;
  e.id = std::move(id);
  e.time.machine.id = e.id + "_time";
  e.time.machine.stages = {StageKind::process, StageKind::receive};
  e.region = std::move(region);
  return e;
}

/// Collects events and rejects duplicate ids.
class EventSet {
 public:
  const Event& add(std::shared_ptr<const EventRegion> region, const std::string& id) {
    if (index_.count(id)) throw Error(Errc::duplicate_event_id, "event " + id + " already exists");
    index_[id] = events_.size();
    events_.push_back(mk_event(std::move(region), id));
    return events_.back();
  }
  const std::vector<Event>& events() const { return events_; }
  std::vector<Event> take() { return std::move(events_); }

 private:
  std::vector<Event> events_;
  std::map<std::string, size_t> index_;
};

struct DelayBounds {
  std::int64_t min = 0;
  std::optional<std::int64_t> max;  // nullopt: unbounded

  bool contains(std::int64_t gap) const { return gap >= min && (!max || gap <= *max); }
  bool operator==(const DelayBounds&) const = default;
};

struct BehaviorEdge {
  std::string from;
  std::string to;
  DelayBounds delay;
  bool operator==(const BehaviorEdge&) const = default;
};

struct BehavioralModel {
  std::string id = "behavior";
  std::vector<Event> events;  // sorted by id
  std::vector<BehaviorEdge> edges;
  std::vector<std::string> starts;
  std::vector<std::string> warnings;

  const Event* event(std::string_view id) const {
    auto it = std::lower_bound(events.begin(), events.end(), id,
                               [](const Event& e, std::string_view k) { return e.id < k; });
    return it != events.end() && it->id == id ? &*it : nullptr;
  }
  const BehaviorEdge* edge(std::string_view from, std::string_view to) const {
    for (const auto& e : edges)
      if (e.from == from && e.to == to) return &e;
    return nullptr;
  }
  bool is_start(std::string_view id) const {
    return std::find(starts.begin(), starts.end(), id) != starts.end();
  }
};

/// Events whose region holds a boundary transfer stage (where an external
/// arrival begins a behavior).
inline std::vector<std::string> default_starts(const std::vector<Event>& events) {
  std::vector<std::string> out;
  for (const auto& e : events) {
    const auto& r = *e.region;
    for (const auto& el : r.elements)
      if (const auto* s = std::get_if<StageRef>(&el); s && is_boundary_transfer(*r.model, *s)) {
        out.push_back(e.id);
        break;
      }
  }
  return out;
}

/// Validates the chronology graph. `starts` overrides the default start rule.
/// Events unreachable from every start are reported as warnings.
inline BehavioralModel build_behavior(std::vector<Event> events, std::vector<BehaviorEdge> edges,
                                      std::optional<std::vector<std::string>> starts = std::nullopt,
                                      std::string id = "behavior") {
  BehavioralModel b;
  b.id = std::move(id);
  std::sort(events.begin(), events.end(), [](const Event& x, const Event& y) { return x.id < y.id; });
  for (size_t i = 1; i < events.size(); ++i)
    if (events[i].id == events[i - 1].id)
      throw Error(Errc::duplicate_event_id, "event " + events[i].id + " appears twice");
  b.events = std::move(events);
  for (const auto& e : edges) {
    for (const auto* n : {&e.from, &e.to})
      if (!b.event(*n)) throw Error(Errc::unknown_event, "edge " + e.from + " -> " + e.to + " names unknown event " + *n);
    if (e.delay.min < 0 || (e.delay.max && *e.delay.max < e.delay.min))
      throw Error(Errc::bad_params, "edge " + e.from + " -> " + e.to + " has invalid delay bounds");
  }
  b.edges = std::move(edges);

  if (starts) {
    for (const auto& s : *starts)
      if (!b.event(s)) throw Error(Errc::unknown_event, "start event " + s + " is not declared");
    b.starts = *starts;
  } else {
    b.starts = default_starts(b.events);
    if (b.starts.empty()) {
      std::set<std::string> has_in;
      for (const auto& e : b.edges) has_in.insert(e.to);
      for (const auto& e : b.events)
        if (!has_in.count(e.id)) b.starts.push_back(e.id);
      if (b.starts.empty() && !b.events.empty()) b.starts.push_back(b.events.front().id);
    }
  }
  std::sort(b.starts.begin(), b.starts.end());
  b.starts.erase(std::unique(b.starts.begin(), b.starts.end()), b.starts.end());

  std::set<std::string> seen(b.starts.begin(), b.starts.end());
  std::deque<std::string> work(b.starts.begin(), b.starts.end());
  while (!work.empty()) {
    auto cur = work.front();
    work.pop_front();
    for (const auto& e : b.edges)
      if (e.from == cur && seen.insert(e.to).second) work.push_back(e.to);
  }
  for (const auto& e : b.events)
    if (!seen.count(e.id)) b.warnings.push_back("event " + e.id + " is unreachable from every start event");
  return b;
}

/// The unique static model underlying a behavior.
inline std::shared_ptr<const StaticModel> static_of(const BehavioralModel& b) {
  if (b.events.empty()) throw Error(Errc::not_anchored, "behavior " + b.id + " has no events");
  auto model = b.events.front().region->model;
  for (const auto& e : b.events)
    if (e.region->model != model)
      throw Error(Errc::mixed_models, "behavior " + b.id + " mixes events of different static models");
  return model;
}

struct CoverageReport {
  std::vector<Element> covered;
  std::vector<Element> uncovered;
  std::map<Element, std::vector<std::string>> overlaps;  // element -> regions (when > 1)
};

inline CoverageReport coverage(const StaticModel& model,
                               const std::vector<std::shared_ptr<const EventRegion>>& regions) {
  ModelIndex ix(model);
  std::map<Element, std::vector<std::string>> owners;
  for (const auto& r : regions)
    for (const auto& e : r->elements) {
      if (!ix.has_element(e))
        throw Error(Errc::unresolved_element, "region " + r->id + " references missing " + to_string(e));
      owners[e].push_back(r->id);
    }
  CoverageReport rep;
  for (const auto& e : ix.all_elements()) {
    auto it = owners.find(e);
    if (it == owners.end()) {
      rep.uncovered.push_back(e);
      continue;
    }
    rep.covered.push_back(e);
    auto ids = it->second;
    std::sort(ids.begin(), ids.end());
    if (ids.size() > 1) rep.overlaps.emplace(e, std::move(ids));
  }
  return rep;
}

inline std::size_t structural_hash(const StaticModel& model) {
  return std::hash<std::string>{}(serialize(model));
}

// ---------------------------------------------------------------------------
// Bundles: a static model together with its regions, events and behaviors.

struct Bundle {
  std::shared_ptr<const StaticModel> model;
  std::vector<std::shared_ptr<const EventRegion>> regions;
  std::vector<Event> events;
  std::map<std::string, BehavioralModel> behaviors;

  const BehavioralModel& behavior(const std::string& id) const {
    auto it = behaviors.find(id);
    if (it == behaviors.end()) throw Error(Errc::unknown_event, "no behavior named " + id);
    return it->second;
  }
  const BehavioralModel& only_behavior() const {
    if (behaviors.size() != 1)
      throw Error(Errc::precondition, "expected exactly one behavior, found " + std::to_string(behaviors.size()));
    return behaviors.begin()->second;
  }
};

/// Instantiates the dynamic and behavioral declarations of a parsed document.
inline Bundle load_bundle(const Document& doc) {
  Bundle b;
  b.model = std::make_shared<const StaticModel>(doc.model);
  std::map<std::string, std::shared_ptr<const EventRegion>> by_id;
  for (const auto& r : doc.regions) {
    auto region = make_region(b.model, r.id, r.elements, r.anchor);
    by_id[r.id] = region;
    b.regions.push_back(region);
  }
  EventSet events;
  for (const auto& e : doc.events) {
    auto it = by_id.find(e.region);
    if (it == by_id.end()) throw Error(Errc::unresolved_element, "event " + e.id + " names unknown region " + e.region);
    events.add(it->second, e.id);
  }
  b.events = events.take();
  for (const auto& d : doc.behaviors) {
    std::vector<BehaviorEdge> edges;
    for (const auto& e : d.edges) edges.push_back({e.from, e.to, {e.min_delay, e.max_delay}});
    std::optional<std::vector<std::string>> starts;
    if (!d.starts.empty()) starts = d.starts;
    b.behaviors.emplace(d.id, build_behavior(b.events, std::move(edges), starts, d.id));
  }
  return b;
}

/// Inverse of load_bundle.
inline Document to_document(const Bundle& b) {
  Document d;
  d.model = *b.model;
  for (const auto& r : b.regions) d.regions.push_back({r->id, r->elements, r->anchor});
  for (const auto& e : b.events) d.events.push_back({e.id, e.region->id});
  for (const auto& [id, beh] : b.behaviors) {
    BehaviorDecl bd;
    bd.id = id;
    bd.starts = beh.starts;
    for (const auto& e : beh.edges) bd.edges.push_back({e.from, e.to, e.delay.min, e.delay.max});
    d.behaviors.push_back(std::move(bd));
  }
  canonicalize(d);
  return d;
}

}  // namespace tmk
