// Copyright 2026 The tmkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// The railcar terminal protocol: static terminal model with its fifteen event
// partitions, a multi-car world simulator, trace safety checking and bounded
// exhaustive exploration.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tmk/core.hpp"
#include "tmk/dsl.hpp"
#include "tmk/dynamics.hpp"
#include "tmk/sim.hpp"

namespace tmk {

inline constexpr int kDwellTicks = 90;

struct RailcarParams {
  int terminals = 6;
  int segments = 3;  // areas between two terminals: A, C..., B
  int spots = 2;     // parking spots per terminal
};

inline void check_params(const RailcarParams& p) {
  if (p.terminals < 1) throw Error(Errc::bad_params, "terminals must be at least 1");
  if (p.segments < 2) throw Error(Errc::bad_params, "segments must be at least 2");
  if (p.spots < 0) throw Error(Errc::bad_params, "parking spots must not be negative");
}

inline std::string terminal_suffix(const RailcarParams& p, int t) {
  return p.terminals == 1 ? std::string() : "_T" + std::to_string(t + 1);
}

inline std::string railcar_event_id(const RailcarParams& p, int k, int t) {
  return "E" + std::to_string(k) + terminal_suffix(p, t);
}

/// Event numbers present for these parameters: no parking removes E3, E14 and
/// E15; a layout without C areas removes E11 and E13.
inline std::vector<int> railcar_event_numbers(const RailcarParams& p) {
  std::vector<int> out;
  for (int k = 1; k <= 15; ++k) {
    if (p.spots == 0 && (k == 3 || k == 14 || k == 15)) continue;
    if (p.segments == 2 && (k == 11 || k == 13)) continue;
    out.push_back(k);
  }
  return out;
}

namespace detail {

inline std::string c_name(const RailcarParams& p, int j) {
  return p.segments == 3 ? std::string("C") : "C" + std::to_string(j);
}

inline Machine flag_holder(std::string id, std::string flag, std::vector<std::string> values) {
  Machine m;
  m.id = std::move(id);
  m.stages = {StageKind::process};
  std::string init = values.front();
  m.flags.push_back({std::move(flag), std::move(values), std::move(init)});
  return m;
}

/// Adds one terminal (B before it; T; A, C... after it; parking P) with its
/// regions, events and behavior edges.
inline void add_terminal(const RailcarParams& p, int t, Document& doc, BehaviorDecl& beh) {
  const std::string sx = terminal_suffix(p, t);
  auto n = [&](const std::string& base) { return base + sx; };
  auto S = [&](const std::string& m, StageKind k) { return StageRef{n(m), k}; };
  auto occ_flag = [&](const std::string& holder) { return FlagRef{n(holder), "occupied"}; };
  const FlagRef appr{n("Bappr"), "approaching"};
  const int cs = p.segments - 2;
  using K = StageKind;
  auto& model = doc.model;

  Machine b{n("B"), {K::transfer, K::receive, K::process, K::release}, {}, std::nullopt, {}};
  b.submachines.push_back(flag_holder(n("Bocc"), "occupied", {"unoccupied", "occupied"}));
  b.submachines.push_back(flag_holder(n("Bappr"), "approaching", {"reset", "set"}));
  model.machines.push_back(std::move(b));
  Machine tm{n("T"), {K::transfer, K::receive, K::process, K::release}, {}, std::nullopt, {}};
  tm.submachines.push_back(flag_holder(n("Tocc"), "occupied", {"unoccupied", "occupied"}));
  model.machines.push_back(std::move(tm));
  Machine a{n("A"), {K::transfer, K::receive, K::release}, {}, std::nullopt, {}};
  a.submachines.push_back(flag_holder(n("Aocc"), "occupied", {"unoccupied", "occupied"}));
  model.machines.push_back(std::move(a));
  for (int j = 1; j <= cs; ++j) {
    Machine c{n(c_name(p, j)), {K::transfer, K::receive, K::release}, {}, std::nullopt, {}};
    c.submachines.push_back(flag_holder(n(c_name(p, j) + "occ"), "occupied", {"unoccupied", "occupied"}));
    model.machines.push_back(std::move(c));
  }
  if (p.spots > 0) {
    Machine pk{n("P"), {K::process}, {}, std::nullopt, {}};
    for (int s = 1; s <= p.spots; ++s)
      pk.submachines.push_back({n("P" + std::to_string(s)), {K::transfer, K::receive, K::release}, {}, std::nullopt, {}});
    model.machines.push_back(std::move(pk));
  }

  auto flow = [&](StageRef x, StageRef y) {
    model.flows.push_back({x, y});
    return Element(FlowKey{x, y});
  };
  auto trig = [&](StageRef x, StageRef y, std::optional<Guard> g, std::vector<FlagAssign> sets) {
    model.triggers.push_back({x, y, std::move(g), std::move(sets), std::nullopt});
    return Element(TriggerKey{x, y});
  };
  auto is = [](FlagRef f, const char* v) { return Guard::flag_equals(std::move(f), v); };
  auto region = [&](int k, std::vector<Element> els, Element anchor) {
    std::string rid = "Part" + std::to_string(k) + sx;
    doc.regions.push_back({rid, std::move(els), std::move(anchor)});
    doc.events.push_back({railcar_event_id(p, k, t), rid});
  };
  std::vector<std::string> Ps;
  for (int s = 1; s <= p.spots; ++s) Ps.push_back("P" + std::to_string(s));

  // E1: the railcar enters B, making it occupied.
  region(1,
         {S("B", K::transfer), flow(S("B", K::transfer), S("B", K::receive)), S("B", K::receive),
          trig(S("B", K::receive), S("Bocc", K::process), std::nullopt, {{occ_flag("Bocc"), "occupied"}}),
          S("Bocc", K::process), occ_flag("Bocc")},
         S("B", K::receive));
  // E2: approaching is set.
  Element e2 = trig(S("B", K::receive), S("Bappr", K::process), std::nullopt, {{appr, "set"}});
  region(2, {e2, S("Bappr", K::process), appr}, e2);
  // E3: traffic from the parking spots is blocked.
  if (p.spots > 0) {
    Element e3 = trig(S("Bappr", K::process), S("P", K::process), is(appr, "set"), {});
    region(3, {e3, S("P", K::process)}, e3);
  }
  // E4: the railcar in B is processed.
  region(4, {flow(S("B", K::receive), S("B", K::process)), S("B", K::process)}, S("B", K::process));
  // E5: T is flagged unoccupied by the last railcar to leave it.
  Element e5 = trig(S("T", K::release), S("Tocc", K::process), std::nullopt, {{occ_flag("Tocc"), "unoccupied"}});
  region(5, {e5, S("Tocc", K::process), occ_flag("Tocc")}, e5);
  // E6: reserve T, then leave B (B unoccupied, approaching reset).
  region(6,
         {S("B", K::process),
          trig(S("B", K::process), S("Tocc", K::process), is(occ_flag("Tocc"), "unoccupied"),
               {{occ_flag("Tocc"), "occupied"}}),
          flow(S("B", K::process), S("B", K::release)), S("B", K::release),
          trig(S("B", K::release), S("Bocc", K::process), std::nullopt, {{occ_flag("Bocc"), "unoccupied"}}),
          trig(S("B", K::release), S("Bappr", K::process), std::nullopt, {{appr, "reset"}})},
         S("B", K::release));
  // E7: the railcar enters T.
  region(7,
         {flow(S("B", K::release), S("B", K::transfer)), S("B", K::transfer),
          flow(S("B", K::transfer), S("T", K::transfer)), S("T", K::transfer),
          flow(S("T", K::transfer), S("T", K::receive)), S("T", K::receive)},
         S("T", K::receive));
  // E8: the railcar stops in T.
  region(8, {flow(S("T", K::receive), S("T", K::process)), S("T", K::process)}, S("T", K::process));
  // E9: A is flagged unoccupied by the last railcar to leave it.
  Element e9 = trig(S("A", K::release), S("Aocc", K::process), std::nullopt, {{occ_flag("Aocc"), "unoccupied"}});
  region(9, {e9, S("Aocc", K::process), occ_flag("Aocc")}, e9);
  // E10: the railcar leaves T for A (T unoccupied, A occupied).
  region(10,
         {flow(S("T", K::process), S("T", K::release)), S("T", K::release),
          trig(S("Aocc", K::process), S("T", K::release), is(occ_flag("Aocc"), "unoccupied"), {}),
          flow(S("T", K::release), S("T", K::transfer)), S("T", K::transfer),
          flow(S("T", K::transfer), S("A", K::transfer)), S("A", K::transfer),
          flow(S("A", K::transfer), S("A", K::receive)), S("A", K::receive),
          trig(S("A", K::receive), S("Aocc", K::process), std::nullopt, {{occ_flag("Aocc"), "occupied"}})},
         S("T", K::release));

  std::vector<Element> e11, e12, e13;
  e12 = {flow(S("A", K::receive), S("A", K::release)), S("A", K::release),
         flow(S("A", K::release), S("A", K::transfer)), S("A", K::transfer)};
  for (int j = 1; j <= cs; ++j) {
    const std::string c = c_name(p, j), co = c + "occ";
    const std::string prev = j == 1 ? std::string("A") : c_name(p, j - 1);
    Element in = flow(S(prev, K::transfer), S(c, K::transfer));
    Element recv = flow(S(c, K::transfer), S(c, K::receive));
    Element through = flow(S(c, K::receive), S(c, K::release));
    Element out = flow(S(c, K::release), S(c, K::transfer));
    Element set_occ = trig(S(c, K::receive), S(co, K::process), std::nullopt, {{occ_flag(co), "occupied"}});
    Element clear = trig(S(c, K::release), S(co, K::process), std::nullopt, {{occ_flag(co), "unoccupied"}});
    Element check = trig(S(co, K::process), S(prev, K::release), is(occ_flag(co), "unoccupied"), {});
    e11.insert(e11.end(), {clear, S(co, K::process), occ_flag(co), S(c, K::release), out, S(c, K::transfer)});
    if (j > 1) e11.push_back(in);
    e12.insert(e12.end(), {check, in, S(c, K::transfer), S(c, K::release), out});
    if (j > 1) e12.push_back(S(prev, K::release));
    e13.insert(e13.end(), {in, S(c, K::transfer), recv, S(c, K::receive), set_occ, through});
  }
  // E11: C is flagged unoccupied; E12: the railcar leaves A (or C) for the
  // next area; E13: the railcar moves to C, making it occupied.
  if (cs > 0) {
    Element anchor11 = e11.front();
    region(11, e11, anchor11);
  }
  region(12, e12, S("A", K::release));
  if (cs > 0) region(13, e13, S(c_name(p, 1), K::receive));

  if (p.spots > 0) {
    // E14: the railcar moves from T to park in a free spot.
    std::vector<Element> e14{trig(S("T", K::process), S("P", K::process), std::nullopt, {}), S("P", K::process),
                             S("T", K::transfer)};
    // E15: a railcar moves out of its spot to T, making T occupied.
    std::vector<Element> e15{occ_flag("Tocc")};
    for (const auto& ps : Ps) {
      e14.insert(e14.end(), {flow(S("T", K::transfer), S(ps, K::transfer)), S(ps, K::transfer),
                             flow(S(ps, K::transfer), S(ps, K::receive)), S(ps, K::receive),
                             trig(S(ps, K::receive), S("P", K::process), std::nullopt, {})});
      e15.insert(e15.end(),
                 {trig(S("P", K::process), S(ps, K::release),
                       Guard::both(is(appr, "reset"), is(occ_flag("Tocc"), "unoccupied")), {}),
                  flow(S(ps, K::receive), S(ps, K::release)), S(ps, K::release),
                  flow(S(ps, K::release), S(ps, K::transfer)), S(ps, K::transfer),
                  flow(S(ps, K::transfer), S("T", K::transfer)),
                  trig(S(ps, K::release), S("Tocc", K::process), std::nullopt, {{occ_flag("Tocc"), "occupied"}})});
    }
    region(14, e14, S("P", K::process));
    region(15, e15, S(Ps.front(), K::release));
  }

  const auto present = railcar_event_numbers(p);
  auto has = [&](int k) { return std::find(present.begin(), present.end(), k) != present.end(); };
  auto E = [&](int k) { return railcar_event_id(p, k, t); };
  auto edge = [&](int x, int y, std::int64_t min = 0) {
    if (has(x) && has(y)) beh.edges.push_back({E(x), E(y), min, std::nullopt});
  };
  edge(1, 2);
  edge(2, 3);
  edge(2, 4);
  edge(4, 6);
  edge(5, 6);
  edge(6, 7);
  edge(7, 8);
  edge(8, 10, kDwellTicks);
  edge(9, 10);
  edge(10, 12);
  edge(11, 12);
  edge(12, 13);
  edge(13, 12);
  edge(8, 14, kDwellTicks);
  edge(14, 15);
  edge(15, 8);
  beh.edges.push_back({E(12), railcar_event_id(p, 1, (t + 1) % p.terminals), 0, std::nullopt});
  for (int k : {1, 5, 9, 11, 15})
    if (has(k)) beh.starts.push_back(E(k));
}

}  // namespace detail

/// The ring's static model, its event partitions, events and the behavior
/// "railcar". One terminal yields unsuffixed names (B, T, E1...); several
/// terminals are suffixed _T1, _T2, ...
inline Bundle railcar_bundle(const RailcarParams& p) {
  check_params(p);
  Document doc;
  BehaviorDecl beh;
  beh.id = "railcar";
  for (int t = 0; t < p.terminals; ++t) detail::add_terminal(p, t, doc, beh);
  doc.behaviors.push_back(std::move(beh));
  canonicalize(doc);
  return load_bundle(doc);
}

/// One terminal's static model (one direction of travel).
inline StaticModel build_terminal_model(RailcarParams p) {
  p.terminals = 1;
  return *railcar_bundle(p).model;
}

inline const std::vector<Event>& railcar_events(const Bundle& b) { return b.events; }

inline const BehavioralModel& railcar_behavior(const Bundle& b) { return b.behavior("railcar"); }

/// The opposite-direction half: every machine X becomes X_R.
inline StaticModel mirror(const StaticModel& m, const std::string& suffix = "_R") {
  StaticModel out = m;
  std::function<void(Machine&)> ren = [&](Machine& x) {
    x.id += suffix;
    for (auto& s : x.submachines) ren(s);
  };
  for (auto& x : out.machines) ren(x);
  auto st = [&](StageRef& s) { s.machine += suffix; };
  std::function<void(Guard&)> g = [&](Guard& x) {
    x.flag.machine += suffix;
    x.storage.machine += suffix;
    for (auto& a : x.args) g(a);
  };
  for (auto& f : out.flows) st(f.from), st(f.to);
  for (auto& t : out.triggers) {
    st(t.from);
    st(t.to);
    if (t.guard) g(*t.guard);
    for (auto& s : t.sets) s.flag.machine += suffix;
  }
  for (auto& c : out.choices) {
    st(c.at);
    for (auto& b : c.branches) st(b.target);
  }
  canonicalize(out);
  return out;
}

// ---------------------------------------------------------------------------
// World

enum class Mutation { none, drop_reservation, drop_approaching_block, drop_dwell_guard, drop_occupied_handshake };

inline std::string to_string(Mutation m) {
  switch (m) {
    case Mutation::none: return "none";
    case Mutation::drop_reservation: return "drop-reservation";
    case Mutation::drop_approaching_block: return "drop-approaching-block";
    case Mutation::drop_dwell_guard: return "drop-dwell-guard";
    case Mutation::drop_occupied_handshake: return "drop-occupied-handshake";
  }
  return "none";
}

inline Mutation parse_mutation(std::string_view s) {
  for (auto m : {Mutation::none, Mutation::drop_reservation, Mutation::drop_approaching_block,
                 Mutation::drop_dwell_guard, Mutation::drop_occupied_handshake})
    if (to_string(m) == s) return m;
  throw Error(Errc::bad_params, "unknown mutation " + std::string(s));
}

struct CarSpec {
  enum class Start { entry, parked };
  int id = 1;
  Start start = Start::entry;
  int terminal = 0;  // 0-based
  int spot = 0;      // 0-based, parked cars only
};

struct RailcarWorld {
  RailcarParams params;
  std::vector<CarSpec> cars;
  Mutation mutation = Mutation::none;
};

/// "entry:1" (upstream of terminal 1's B) or "parked:1:2" (terminal 1, spot P2).
inline CarSpec parse_car(int id, const std::string& text) {
  CarSpec c;
  c.id = id;
  std::vector<std::string> parts;
  size_t start = 0;
  for (size_t i = 0; i <= text.size(); ++i)
    if (i == text.size() || text[i] == ':') {
      parts.push_back(text.substr(start, i - start));
      start = i + 1;
    }
  auto num = [&](const std::string& s) {
    try {
      size_t used = 0;
      int v = std::stoi(s, &used);
      if (used != s.size() || v < 1) throw Error(Errc::bad_params, "bad car position " + text);
      return v - 1;
    } catch (const std::logic_error&) {
      throw Error(Errc::bad_params, "bad car position " + text);
    }
  };
  if (parts.size() == 2 && parts[0] == "entry") {
    c.terminal = num(parts[1]);
  } else if (parts.size() == 3 && parts[0] == "parked") {
    c.start = CarSpec::Start::parked;
    c.terminal = num(parts[1]);
    c.spot = num(parts[2]);
  } else {
    throw Error(Errc::bad_params, "car position must be entry:T or parked:T:S, got " + text);
  }
  return c;
}

inline std::string to_string(const CarSpec& c) {
  if (c.start == CarSpec::Start::entry) return "entry:" + std::to_string(c.terminal + 1);
  return "parked:" + std::to_string(c.terminal + 1) + ":" + std::to_string(c.spot + 1);
}

/// Places `cars` cars: car 1 about to enter terminal 1's B, the next ones
/// parked in free spots (terminal by terminal), the rest at the entries of
/// terminals 2, 3, ...
inline RailcarWorld default_world(RailcarParams p = {}, int cars = 2) {
  check_params(p);
  if (cars < 0) throw Error(Errc::bad_params, "car count must not be negative");
  RailcarWorld w;
  w.params = p;
  int id = 1;
  if (id <= cars) w.cars.push_back({id++, CarSpec::Start::entry, 0, 0});
  for (int t = 0; t < p.terminals && id <= cars; ++t)
    for (int s = 0; s < p.spots && id <= cars; ++s) w.cars.push_back({id++, CarSpec::Start::parked, t, s});
  for (int t = 1; t < p.terminals && id <= cars; ++t) w.cars.push_back({id++, CarSpec::Start::entry, t, 0});
  if (id <= cars) throw Error(Errc::bad_params, "the ring has no room for " + std::to_string(cars) + " cars");
  return w;
}

inline void check_world(const RailcarWorld& w) {
  check_params(w.params);
  std::set<int> ids;
  std::set<std::pair<int, int>> spots;
  for (const auto& c : w.cars) {
    if (!ids.insert(c.id).second) throw Error(Errc::bad_params, "duplicate car id " + std::to_string(c.id));
    if (c.terminal < 0 || c.terminal >= w.params.terminals)
      throw Error(Errc::bad_params, "car " + std::to_string(c.id) + " names a terminal outside the ring");
    if (c.start == CarSpec::Start::parked) {
      if (c.spot < 0 || c.spot >= w.params.spots)
        throw Error(Errc::bad_params, "car " + std::to_string(c.id) + " names a missing parking spot");
      if (!spots.insert({c.terminal, c.spot}).second)
        throw Error(Errc::bad_params, "two cars parked in the same spot");
    }
  }
}

inline ChoiceCatalog railcar_choice_catalog() {
  return {{"park-or-continue", {"continue", "park"}}, {"release", {"release", "hold"}}};
}

enum class SafetyKind { double_occupancy, priority_breach, dwell_underrun, lost_reservation };

inline std::string to_string(SafetyKind k) {
  switch (k) {
    case SafetyKind::double_occupancy: return "DOUBLE_OCCUPANCY";
    case SafetyKind::priority_breach: return "PRIORITY_BREACH";
    case SafetyKind::dwell_underrun: return "DWELL_UNDERRUN";
    case SafetyKind::lost_reservation: return "LOST_RESERVATION";
  }
  return "";
}

struct SafetyViolation {
  SafetyKind kind = SafetyKind::double_occupancy;
  std::int64_t tick = 0;
  size_t index = 0;  // trace position
  std::vector<int> cars;
  std::string area;
};

namespace detail {

enum class Place : std::uint8_t { entry, area, transit, in_t, parked };
enum class MoveKind : std::uint8_t { enter_b, process_b, leave_b, enter_t, cont, park, release, advance };

struct Car {
  int id = 0;
  Place place = Place::entry;
  int terminal = 0;  // entry / transit / in_t / parked
  int area = -1;     // ring index while in an area
  bool processed = false;
  int dwell = 0;
  int spot = -1;
  bool operator==(const Car&) const = default;
};

struct WorldState {
  std::vector<Car> cars;
  std::vector<char> occ;          // per ring area
  std::vector<char> approaching;  // per terminal (its B)
  std::vector<char> occ_t;        // per terminal
  std::vector<int> holder;        // reservation holder per terminal, -1 none
  std::vector<std::vector<int>> parking;

  std::string key() const {
    std::string k;
    for (const auto& c : cars) {
      k += static_cast<char>(c.place);
      k += static_cast<char>(c.terminal);
      k += static_cast<char>(c.area + 1);
      k += static_cast<char>(c.processed);
      k += static_cast<char>(c.dwell);
      k += static_cast<char>(c.spot + 1);
    }
    k.append(occ.begin(), occ.end());
    k.append(approaching.begin(), approaching.end());
    k.append(occ_t.begin(), occ_t.end());
    for (int h : holder) k += static_cast<char>(h + 1);
    for (const auto& p : parking)
      for (int c : p) k += static_cast<char>(c + 1);
    return k;
  }
};

struct Move {
  int car = 0;  // index into cars
  MoveKind kind = MoveKind::enter_b;
};

/// Ring geometry: terminal t is followed by segment t = A_t, C_t..., B_(t+1).
struct Ring {
  RailcarParams p;
  int size() const { return p.terminals * p.segments; }
  int seg_pos(int a) const { return a % p.segments; }
  int seg_terminal(int a) const { return a / p.segments; }
  bool is_b(int a) const { return seg_pos(a) == p.segments - 1; }
  int b_terminal(int a) const { return (seg_terminal(a) + 1) % p.terminals; }
  int a_of(int t) const { return t * p.segments; }
  int b_of(int t) const { return ((t - 1 + p.terminals) % p.terminals) * p.segments + p.segments - 1; }
  std::string holder_machine(int a) const {
    int j = seg_pos(a);
    if (is_b(a)) return "Bocc" + terminal_suffix(p, b_terminal(a));
    std::string base = j == 0 ? std::string("Aocc") : c_name(p, j) + "occ";
    return base + terminal_suffix(p, seg_terminal(a));
  }
  std::string area_name(int a) const {
    int j = seg_pos(a);
    if (is_b(a)) return "B" + terminal_suffix(p, b_terminal(a));
    return (j == 0 ? std::string("A") : c_name(p, j)) + terminal_suffix(p, seg_terminal(a));
  }
};

/// Records occurrences of one world run and tracks each car's causal chain.
class Emitter {
 public:
  Emitter(const RailcarParams& p, std::vector<Occurrence>& out) : p_(p), out_(out) {}
  std::int64_t tick = 0;

  std::string emit(int k, int t, const std::string& cause) {
    std::string id = "o" + std::to_string(out_.size());
    out_.push_back({railcar_event_id(p_, k, t), tick, cause});
    return id;
  }
  /// Emits a car event continuing the car's chain.
  void car(int car_id, int k, int t) { chain_[car_id] = emit(k, t, cause_of(car_id)); }
  /// Emits a side event off the car's chain without advancing it.
  void side(int car_id, int k, int t) { emit(k, t, cause_of(car_id)); }
  std::string cause_of(int car_id) const {
    auto it = chain_.find(car_id);
    return it == chain_.end() ? "car" + std::to_string(car_id) : it->second;
  }

 private:
  const RailcarParams& p_;
  std::vector<Occurrence>& out_;
  std::map<int, std::string> chain_;
};

class World {
 public:
  explicit World(const RailcarWorld& w) : w_(w), ring_{w.params} { check_world(w); }

  WorldState initial() const {
    WorldState s;
    const auto& p = w_.params;
    s.occ.assign(static_cast<size_t>(ring_.size()), 0);
    s.approaching.assign(static_cast<size_t>(p.terminals), 0);
    s.occ_t.assign(static_cast<size_t>(p.terminals), 0);
    s.holder.assign(static_cast<size_t>(p.terminals), -1);
    s.parking.assign(static_cast<size_t>(p.terminals), std::vector<int>(static_cast<size_t>(p.spots), -1));
    auto cars = w_.cars;
    std::sort(cars.begin(), cars.end(), [](const CarSpec& a, const CarSpec& b) { return a.id < b.id; });
    for (const auto& c : cars) {
      Car car;
      car.id = c.id;
      car.terminal = c.terminal;
      if (c.start == CarSpec::Start::parked) {
        car.place = Place::parked;
        car.spot = c.spot;
        s.parking[c.terminal][c.spot] = c.id;
      }
      s.cars.push_back(car);
    }
    return s;
  }

  void emit_initial_flags(Emitter& em) const {
    const auto nums = railcar_event_numbers(w_.params);
    for (int t = 0; t < w_.params.terminals; ++t)
      for (int k : {5, 9, 11})
        if (std::find(nums.begin(), nums.end(), k) != nums.end()) em.emit(k, t, "init");
  }

  bool handshake() const { return w_.mutation != Mutation::drop_occupied_handshake; }

  /// Every move the car can make now, both branches of a choice included.
  std::vector<MoveKind> moves(const WorldState& s, size_t i) const {
    const Car& c = s.cars[i];
    std::vector<MoveKind> out;
    switch (c.place) {
      case Place::entry:
        if (!handshake() || !s.occ[ring_.b_of(c.terminal)]) out.push_back(MoveKind::enter_b);
        break;
      case Place::area:
        if (ring_.is_b(c.area)) {
          int t = ring_.b_terminal(c.area);
          if (!c.processed) out.push_back(MoveKind::process_b);
          else if (!s.occ_t[t]) out.push_back(MoveKind::leave_b);
        } else if (!handshake() || !s.occ[c.area + 1]) {
          out.push_back(MoveKind::advance);
        }
        break;
      case Place::transit: out.push_back(MoveKind::enter_t); break;
      case Place::in_t:
        if (c.dwell == 0 || w_.mutation == Mutation::drop_dwell_guard) {
          if (!handshake() || !s.occ[ring_.a_of(c.terminal)]) out.push_back(MoveKind::cont);
          if (free_spot(s, c.terminal) >= 0) out.push_back(MoveKind::park);
        }
        break;
      case Place::parked:
        if ((w_.mutation == Mutation::drop_approaching_block || !s.approaching[c.terminal]) && !s.occ_t[c.terminal])
          out.push_back(MoveKind::release);
        break;
    }
    return out;
  }

  int free_spot(const WorldState& s, int t) const {
    for (size_t k = 0; k < s.parking[t].size(); ++k)
      if (s.parking[t][k] < 0) return static_cast<int>(k);
    return -1;
  }

  /// Applies a move; returns the safety violations the move commits.
  std::vector<SafetyKind> apply(WorldState& s, size_t i, MoveKind m, Emitter* em) const {
    std::vector<SafetyKind> bad;
    Car& c = s.cars[i];
    const int id = c.id;
    auto enter_b = [&](int t) {
      int b = ring_.b_of(t);
      s.occ[b] = 1;
      s.approaching[t] = 1;
      c.place = Place::area;
      c.area = b;
      c.processed = false;
      if (em) {
        em->car(id, 1, t);
        em->car(id, 2, t);
        if (w_.params.spots > 0) em->side(id, 3, t);
      }
    };
    switch (m) {
      case MoveKind::enter_b: enter_b(c.terminal); break;
      case MoveKind::process_b:
        c.processed = true;
        if (em) em->car(id, 4, ring_.b_terminal(c.area));
        break;
      case MoveKind::leave_b: {
        int t = ring_.b_terminal(c.area);
        if (w_.mutation != Mutation::drop_reservation) s.occ_t[t] = 1;
        s.holder[t] = id;
        s.occ[c.area] = 0;
        s.approaching[t] = 0;
        c.place = Place::transit;
        c.terminal = t;
        c.area = -1;
        if (em) em->car(id, 6, t);
        break;
      }
      case MoveKind::enter_t: {
        int t = c.terminal;
        if (s.holder[t] != id) bad.push_back(SafetyKind::lost_reservation);
        s.occ_t[t] = 1;
        c.place = Place::in_t;
        c.dwell = kDwellTicks;
        if (em) {
          em->car(id, 7, t);
          em->car(id, 8, t);
        }
        break;
      }
      case MoveKind::cont:
      case MoveKind::park: {
        int t = c.terminal;
        if (c.dwell > 0) bad.push_back(SafetyKind::dwell_underrun);
        s.occ_t[t] = 0;
        if (s.holder[t] == id) s.holder[t] = -1;
        c.dwell = 0;
        if (m == MoveKind::cont) {
          int a = ring_.a_of(t);
          s.occ[a] = 1;
          c.place = Place::area;
          c.area = a;
          if (em) {
            em->car(id, 10, t);
            em->emit(5, t, "flag:" + ("Tocc" + terminal_suffix(w_.params, t)));
          }
        } else {
          int k = free_spot(s, t);
          s.parking[t][k] = id;
          c.place = Place::parked;
          c.spot = k;
          if (em) {
            em->car(id, 14, t);
            em->emit(5, t, "flag:" + ("Tocc" + terminal_suffix(w_.params, t)));
          }
        }
        break;
      }
      case MoveKind::release: {
        int t = c.terminal;
        if (s.approaching[t]) bad.push_back(SafetyKind::priority_breach);
        s.occ_t[t] = 1;
        s.holder[t] = id;
        s.parking[t][c.spot] = -1;
        c.spot = -1;
        c.place = Place::in_t;
        c.dwell = kDwellTicks;
        if (em) {
          em->car(id, 15, t);
          em->car(id, 8, t);
        }
        break;
      }
      case MoveKind::advance: {
        int from = c.area, to = c.area + 1;
        int st = ring_.seg_terminal(from);
        s.occ[from] = 0;
        if (em) {
          em->car(id, 12, st);
          em->emit(ring_.seg_pos(from) == 0 ? 9 : 11, st, "flag:" + ring_.holder_machine(from));
        }
        if (ring_.is_b(to)) {
          enter_b(ring_.b_terminal(to));
        } else {
          s.occ[to] = 1;
          c.area = to;
          if (em) em->car(id, 13, st);
        }
        break;
      }
    }
    if (occupancy_conflict(s)) bad.push_back(SafetyKind::double_occupancy);
    return bad;
  }

  bool occupancy_conflict(const WorldState& s) const {
    std::set<std::pair<int, int>> seen;  // (kind, index): 0 area, 1 terminal, 2 spot
    for (const auto& c : s.cars) {
      std::pair<int, int> key;
      if (c.place == Place::area) key = {0, c.area};
      else if (c.place == Place::in_t) key = {1, c.terminal};
      else if (c.place == Place::parked) key = {2, c.terminal * 1000 + c.spot};
      else continue;
      if (!seen.insert(key).second) return true;
    }
    return false;
  }

  /// Advances time by `delta` ticks of dwell.
  static void elapse(WorldState& s, int delta) {
    for (auto& c : s.cars)
      if (c.place == Place::in_t) c.dwell = std::max(0, c.dwell - delta);
  }

  std::map<std::string, std::string> flags(const WorldState& s) const {
    std::map<std::string, std::string> out;
    for (int a = 0; a < ring_.size(); ++a)
      out[ring_.holder_machine(a) + ".occupied"] = s.occ[a] ? "occupied" : "unoccupied";
    for (int t = 0; t < w_.params.terminals; ++t) {
      out["Bappr" + terminal_suffix(w_.params, t) + ".approaching"] = s.approaching[t] ? "set" : "reset";
      out["Tocc" + terminal_suffix(w_.params, t) + ".occupied"] = s.occ_t[t] ? "occupied" : "unoccupied";
    }
    return out;
  }

  const Ring& ring() const { return ring_; }

 private:
  RailcarWorld w_;
  Ring ring_;
};

}  // namespace detail

/// Multi-car simulation. Each tick, cars act in id order (at most one move
/// each); dwell counts down at the end of the tick.
inline Trace run_world(const RailcarWorld& world, const SimConfig& config, const ChoiceScript& script = {}) {
  using detail::MoveKind;
  if (config.max_ticks <= 0) throw Error(Errc::bad_params, "max ticks must be positive");
  const auto catalog = railcar_choice_catalog();
  for (const auto& [point, _] : script.outcomes)
    if (!catalog.count(point)) throw Error(Errc::unknown_choice_point, "no choice point named " + point);
  detail::World w(world);
  ChoiceResolver choices(script, config.policy, static_cast<std::uint64_t>(config.seed));
  Trace trace;
  trace.seed = config.seed;
  detail::Emitter em(world.params, trace.occurrences);
  auto s = w.initial();
  std::vector<std::optional<MoveKind>> intent(s.cars.size());
  if (!s.cars.empty()) w.emit_initial_flags(em);
  for (std::int64_t tick = 0; tick < config.max_ticks && !s.cars.empty(); ++tick) {
    em.tick = tick;
    for (size_t i = 0; i < s.cars.size(); ++i) {
      auto opts = w.moves(s, i);
      auto can = [&](MoveKind k) { return std::find(opts.begin(), opts.end(), k) != opts.end(); };
      std::optional<MoveKind> pick;
      const auto& c = s.cars[i];
      if (c.place == detail::Place::in_t && (c.dwell == 0 || world.mutation == Mutation::drop_dwell_guard)) {
        if (!intent[i]) {
          bool spot = world.params.spots > 0 && w.free_spot(s, c.terminal) >= 0;
          intent[i] = spot && choices.pick("park-or-continue", catalog.at("park-or-continue")) == 1
                          ? MoveKind::park
                          : MoveKind::cont;
        }
        if (*intent[i] == MoveKind::park && !can(MoveKind::park)) intent[i] = MoveKind::cont;
        if (can(*intent[i])) pick = intent[i];
      } else if (c.place == detail::Place::parked) {
        if (can(MoveKind::release) && choices.pick("release", catalog.at("release")) == 0) pick = MoveKind::release;
      } else if (!opts.empty()) {
        pick = opts.front();
      }
      if (!pick) continue;
      if (*pick == MoveKind::cont || *pick == MoveKind::park) intent[i].reset();
      w.apply(s, i, *pick, &em);
    }
    detail::World::elapse(s, 1);
  }
  trace.flags = w.flags(s);
  return trace;
}

// ---------------------------------------------------------------------------
// Safety checking of traces

namespace detail {

inline std::optional<std::pair<int, int>> parse_railcar_event(const RailcarParams& p, const std::string& id) {
  if (id.size() < 2 || id[0] != 'E') return std::nullopt;
  size_t i = 1;
  int k = 0;
  while (i < id.size() && std::isdigit(static_cast<unsigned char>(id[i]))) k = k * 10 + (id[i++] - '0');
  if (i == 1 || k < 1 || k > 15) return std::nullopt;
  int t = 0;
  if (p.terminals > 1) {
    if (id.compare(i, 2, "_T") != 0) return std::nullopt;
    i += 2;
    int v = 0;
    size_t d = i;
    while (i < id.size() && std::isdigit(static_cast<unsigned char>(id[i]))) v = v * 10 + (id[i++] - '0');
    if (i == d || v < 1 || v > p.terminals) return std::nullopt;
    t = v - 1;
  }
  if (i != id.size()) return std::nullopt;
  return std::make_pair(k, t);
}

}  // namespace detail

/// Replays a trace against the world's initial placement, reconstructing car
/// identity from cause chains and positions from event meaning.
inline std::vector<SafetyViolation> check_safety(const Trace& trace, const RailcarWorld& world) {
  check_world(world);
  const auto& p = world.params;
  detail::Ring ring{p};
  std::vector<SafetyViolation> out;
  std::map<std::string, std::set<int>> areas;  // area name -> cars
  std::map<int, std::string> where;            // car -> area name
  std::map<int, int> seg;                      // car -> ring index while in A/C
  std::map<int, std::int64_t> entered_t;
  std::vector<char> approaching(static_cast<size_t>(p.terminals), 0);
  std::vector<int> holder(static_cast<size_t>(p.terminals), -1);
  std::vector<std::vector<int>> parking(static_cast<size_t>(p.terminals), std::vector<int>(static_cast<size_t>(p.spots), -1));
  auto spot_name = [&](int t, int k) { return "P" + std::to_string(k + 1) + terminal_suffix(p, t); };
  auto t_name = [&](int t) { return "T" + terminal_suffix(p, t); };
  for (const auto& c : world.cars)
    if (c.start == CarSpec::Start::parked) {
      parking[c.terminal][c.spot] = c.id;
      where[c.id] = spot_name(c.terminal, c.spot);
      areas[where[c.id]].insert(c.id);
    }

  std::vector<int> car_of(trace.occurrences.size(), -1);
  for (size_t i = 0; i < trace.occurrences.size(); ++i) {
    const auto& o = trace.occurrences[i];
    int car = -1;
    if (auto k = occurrence_ref(o.cause); k && *k < i) car = car_of[*k];
    else if (o.cause.rfind("car", 0) == 0) {
      try {
        car = std::stoi(o.cause.substr(3));
      } catch (const std::logic_error&) {
        car = -1;
      }
    }
    car_of[i] = car;
    auto ev = detail::parse_railcar_event(p, o.event);
    if (!ev) continue;
    auto [k, t] = *ev;
    if (k == 2) approaching[t] = 1;
    if (car < 0 || k == 3 || k == 5 || k == 9 || k == 11) continue;

    auto violate = [&](SafetyKind kind, std::string area, std::vector<int> cars) {
      out.push_back({kind, o.at, i, std::move(cars), std::move(area)});
    };
    auto leave = [&] {
      auto it = where.find(car);
      if (it == where.end()) return;
      areas[it->second].erase(car);
      where.erase(it);
    };
    auto enter = [&](const std::string& a) {
      leave();
      where[car] = a;
      auto& occ = areas[a];
      occ.insert(car);
      if (occ.size() > 1) violate(SafetyKind::double_occupancy, a, std::vector<int>(occ.begin(), occ.end()));
    };
    auto leave_t = [&] {
      auto it = entered_t.find(car);
      if (it != entered_t.end() && o.at - it->second < kDwellTicks)
        violate(SafetyKind::dwell_underrun, t_name(t), {car});
      entered_t.erase(car);
      if (holder[t] == car) holder[t] = -1;
    };
    switch (k) {
      case 1: enter(ring.area_name(ring.b_of(t))); break;
      case 6:
        leave();
        approaching[t] = 0;
        holder[t] = car;
        break;
      case 7:
        if (holder[t] != car)
          violate(SafetyKind::lost_reservation, t_name(t), holder[t] < 0 ? std::vector<int>{car} : std::vector<int>{car, holder[t]});
        enter(t_name(t));
        entered_t[car] = o.at;
        break;
      case 10:
        leave_t();
        seg[car] = ring.a_of(t);
        enter(ring.area_name(ring.a_of(t)));
        break;
      case 12: leave(); break;
      case 13: {
        int a = seg.count(car) ? seg[car] + 1 : ring.a_of(t) + 1;
        seg[car] = a;
        enter(ring.area_name(a));
        break;
      }
      case 14: {
        leave_t();
        int spot = -1;
        for (int s = 0; s < p.spots; ++s)
          if (parking[t][s] < 0) {
            spot = s;
            break;
          }
        if (spot < 0) spot = 0;
        parking[t][spot] = car;
        enter(spot_name(t, spot));
        break;
      }
      case 15:
        if (approaching[t]) violate(SafetyKind::priority_breach, t_name(t), {car});
        for (auto& s : parking[t])
          if (s == car) s = -1;
        holder[t] = car;
        enter(t_name(t));
        entered_t[car] = o.at;
        break;
      default: break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exploration

struct ExploreConfig {
  int depth = 60;
  std::uint64_t state_cap = 1'000'000;
};

struct Witness {
  SafetyKind kind = SafetyKind::double_occupancy;
  Trace trace;
  size_t steps = 0;
};

struct ExploreReport {
  std::uint64_t states = 0;
  std::uint64_t transitions = 0;
  int depth_reached = 0;
  std::vector<Witness> violations;  // first (shortest) witness per kind

  bool has(SafetyKind k) const {
    return std::any_of(violations.begin(), violations.end(), [&](const Witness& w) { return w.kind == k; });
  }
};

/// Breadth-first enumeration of asynchronous car interleavings plus time
/// steps that jump to the next dwell expiry. States are deduplicated without
/// absolute time. Violating transitions are reported, not expanded.
inline ExploreReport explore(const RailcarWorld& world, const ExploreConfig& cfg = {}) {
  if (cfg.depth < 1) throw Error(Errc::precondition, "exploration depth must be at least 1");
  detail::World w(world);
  struct Step {
    int car = -1;  // -1: time step
    detail::MoveKind kind = detail::MoveKind::enter_b;
    int delta = 0;
  };
  struct Node {
    std::int64_t parent = -1;
    Step step;
    int depth = 0;
  };
  std::vector<Node> nodes;
  std::vector<detail::WorldState> frontier_states;
  std::unordered_map<std::string, std::int64_t> seen;
  ExploreReport rep;

  auto path_to = [&](std::int64_t idx, Step last) {
    std::vector<Step> steps{last};
    for (std::int64_t n = idx; n > 0; n = nodes[static_cast<size_t>(n)].parent)
      steps.push_back(nodes[static_cast<size_t>(n)].step);
    std::reverse(steps.begin(), steps.end());
    return steps;
  };
  auto replay = [&](const std::vector<Step>& steps) {
    Trace tr;
    detail::Emitter em(world.params, tr.occurrences);
    auto s = w.initial();
    w.emit_initial_flags(em);
    for (const auto& st : steps) {
      if (st.car < 0) {
        em.tick += st.delta;
        detail::World::elapse(s, st.delta);
      } else {
        w.apply(s, static_cast<size_t>(st.car), st.kind, &em);
      }
    }
    tr.flags = w.flags(s);
    return tr;
  };

  auto init = w.initial();
  nodes.push_back({});
  seen.emplace(init.key(), 0);
  std::deque<std::pair<std::int64_t, detail::WorldState>> queue;
  queue.emplace_back(0, std::move(init));
  rep.states = 1;
  while (!queue.empty()) {
    auto [idx, s] = std::move(queue.front());
    queue.pop_front();
    const int depth = nodes[static_cast<size_t>(idx)].depth;
    rep.depth_reached = std::max(rep.depth_reached, depth);
    if (depth >= cfg.depth) continue;

    std::vector<Step> steps;
    for (size_t i = 0; i < s.cars.size(); ++i)
      for (auto k : w.moves(s, i)) steps.push_back({static_cast<int>(i), k, 0});
    int next_expiry = 0;
    for (const auto& c : s.cars)
      if (c.place == detail::Place::in_t && c.dwell > 0)
        next_expiry = next_expiry == 0 ? c.dwell : std::min(next_expiry, c.dwell);
    if (next_expiry > 0) steps.push_back({-1, detail::MoveKind::enter_b, next_expiry});

    for (const auto& st : steps) {
      ++rep.transitions;
      auto nx = s;
      std::vector<SafetyKind> bad;
      if (st.car < 0) detail::World::elapse(nx, st.delta);
      else bad = w.apply(nx, static_cast<size_t>(st.car), st.kind, nullptr);
      if (!bad.empty()) {
        for (auto k : bad)
          if (!rep.has(k)) {
            auto path = path_to(idx, st);
            rep.violations.push_back({k, replay(path), path.size()});
          }
        continue;
      }
      auto [it, fresh] = seen.emplace(nx.key(), static_cast<std::int64_t>(nodes.size()));
      if (!fresh) continue;
      if (++rep.states > cfg.state_cap)
        throw Error(Errc::state_budget_exceeded, "explored more than " + std::to_string(cfg.state_cap) + " states");
      nodes.push_back({idx, st, depth + 1});
      queue.emplace_back(static_cast<std::int64_t>(nodes.size()) - 1, std::move(nx));
    }
  }
  return rep;
}

inline std::string explore_json(const ExploreReport& r) {
  nlohmann::ordered_json j;
  j["states"] = r.states;
  j["transitions"] = r.transitions;
  j["depth"] = r.depth_reached;
  j["violations"] = nlohmann::ordered_json::array();
  for (const auto& v : r.violations) {
    nlohmann::ordered_json e;
    e["kind"] = to_string(v.kind);
    e["steps"] = v.steps;
    e["witness"] = nlohmann::ordered_json::parse(trace_json(v.trace));
    j["violations"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

inline std::string safety_json(const std::vector<SafetyViolation>& vs) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& v : vs) {
    nlohmann::ordered_json e;
    e["kind"] = to_string(v.kind);
    e["at"] = v.tick;
    e["index"] = v.index;
    e["cars"] = v.cars;
    e["area"] = v.area;
    j.push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

}  // namespace tmk
