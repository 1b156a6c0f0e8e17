// Copyright 2026 The tmkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// State-transition tables: CSV import, execution as an oracle, the canonical
// table -> TM construction, and exhaustive equivalence checking.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tmk/core.hpp"
#include "tmk/dynamics.hpp"
#include "tmk/sim.hpp"

namespace tmk {

struct TableRow {
  std::string state;
  std::string signal;  // the EVENT column
  std::string action;
  std::string next;
  bool operator==(const TableRow&) const = default;
};

struct StateTable {
  std::vector<TableRow> rows;
  std::string initial;

  /// States in first-appearance order (state column, then next-state column).
  std::vector<std::string> states() const {
    std::vector<std::string> out;
    auto add = [&](const std::string& s) {
      if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    };
    if (!initial.empty()) add(initial);
    for (const auto& r : rows) add(r.state);
    for (const auto& r : rows) add(r.next);
    return out;
  }
  /// Signals in first-appearance order.
  std::vector<std::string> alphabet() const {
    std::vector<std::string> out;
    for (const auto& r : rows)
      if (std::find(out.begin(), out.end(), r.signal) == out.end()) out.push_back(r.signal);
    return out;
  }
  const TableRow* row(std::string_view state, std::string_view signal) const {
    for (const auto& r : rows)
      if (r.state == state && r.signal == signal) return &r;
    return nullptr;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::vector<std::string>> read_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false, was_quoted = false, any = false;
  auto end_field = [&] {
    fields.push_back(was_quoted ? field : trim(field));
    field.clear();
    was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    bool blank = fields.size() == 1 && fields[0].empty();
    if (!blank) records.push_back(std::move(fields));
    fields.clear();
  };
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    any = true;
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"' && trim(field).empty()) {
      field.clear();
      quoted = was_quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_record();
    } else {
      field += c;
    }
  }
  if (quoted) throw Error(Errc::parse_error, "unterminated quoted field");
  if (any && (!field.empty() || !fields.empty() || was_quoted)) end_record();
  return records;
}

inline std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace detail

/// Parses a CSV table with header STATE, EVENT, ACTION, NEXT STATE (any
/// order, case-insensitive). The initial state defaults to the first row's.
inline StateTable parse_table(std::string_view text, std::optional<std::string> initial = std::nullopt) {
  auto records = detail::read_csv(text);
  if (records.empty()) throw Error(Errc::missing_column, "table has no header row");
  const auto& header = records.front();
  std::map<std::string, size_t> col;
  for (size_t i = 0; i < header.size(); ++i) col[detail::upper(header[i])] = i;
  std::vector<size_t> idx;
  for (const char* name : {"STATE", "EVENT", "ACTION", "NEXT STATE"}) {
    auto it = col.find(name);
    if (it == col.end()) throw Error(Errc::missing_column, std::string("missing column ") + name);
    idx.push_back(it->second);
  }
  StateTable t;
  for (size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    auto get = [&](size_t i) -> std::string {
      if (idx[i] >= rec.size() || rec[idx[i]].empty())
        throw Error(Errc::missing_column, "row " + std::to_string(r) + " has an empty or missing field");
      return rec[idx[i]];
    };
    TableRow row{get(0), get(1), get(2), get(3)};
    if (t.row(row.state, row.signal))
      throw Error(Errc::nondeterministic_table, "two rows for state '" + row.state + "' and signal '" + row.signal + "'");
    t.rows.push_back(std::move(row));
  }
  if (t.rows.empty()) throw Error(Errc::empty_table, "table has no rows");
  t.initial = initial ? *initial : t.rows.front().state;
  bool known = std::any_of(t.rows.begin(), t.rows.end(), [&](const TableRow& r) { return r.state == t.initial; });
  if (!known) throw Error(Errc::precondition, "initial state '" + t.initial + "' has no rows");
  return t;
}

struct TableStep {
  std::string action;
  std::string next;
  bool operator==(const TableStep&) const = default;
};

inline std::vector<TableStep> run_table(const StateTable& table, const std::vector<std::string>& inputs) {
  std::vector<TableStep> out;
  std::string state = table.initial;
  for (const auto& in : inputs) {
    const TableRow* r = table.row(state, in);
    if (!r) throw Error(Errc::unhandled_event, "no row for state '" + state + "' and signal '" + in + "'");
    out.push_back({r->action, r->next});
    state = r->next;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Table -> TM

/// A table-derived bundle with the bookkeeping needed to drive and project it.
struct TableBundle {
  Bundle bundle;
  std::string behavior_id = "table";
  std::map<std::string, size_t> row_event;      // event id -> row index
  std::map<std::string, std::string> stimulus;  // signal -> boundary transfer path
};

/// Turns a display name into a DSL identifier: "Wait For Dollar" -> "WaitForDollar".
inline std::string sanitize_name(std::string_view s) {
  std::string out;
  for (char c : s)
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') out += c;
  if (out.empty()) out = "x";
  if (std::isdigit(static_cast<unsigned char>(out[0]))) out = "_" + out;
  if (reserved_keywords().count(out)) out += "_";
  return out;
}

/// Builds the canonical TM model of a table. `subject` groups actions into
/// machines (action -> machine name); by default each action is its own machine.
inline TableBundle table_to_tm(const StateTable& table, const std::map<std::string, std::string>& subject = {}) {
  std::set<std::string> taken;
  auto unique = [&](std::string base) {
    std::string name = base;
    for (int n = 2; taken.count(name); ++n) name = base + "_" + std::to_string(n);
    taken.insert(name);
    return name;
  };

  const auto states = table.states();
  std::map<std::string, std::string> state_value;
  {
    std::set<std::string> used;
    for (const auto& s : states) {
      std::string v = sanitize_name(s);
      if (v == "init") v += "_";
      std::string cand = v;
      for (int n = 2; used.count(cand); ++n) cand = v + "_" + std::to_string(n);
      used.insert(cand);
      state_value[s] = cand;
    }
  }
  std::map<std::string, size_t> rows_from;
  for (const auto& r : table.rows) ++rows_from[r.state];
  auto is_decision = [&](const std::string& s) { return rows_from[s] >= 2; };
  auto is_latched = [&](const std::string& s) { return s != table.initial && rows_from[s] == 1; };

  StaticModel model;
  const std::string controller = unique("Controller");
  const bool has_state_flag = states.size() >= 2;
  {
    Machine m{controller, {StageKind::process}, {}, std::nullopt, {}};
    if (has_state_flag) {
      Flag f{"state", {}, state_value[table.initial]};
      for (const auto& s : states) f.values.push_back(state_value[s]);
      m.flags.push_back(std::move(f));
    }
    model.machines.push_back(std::move(m));
  }
  const FlagRef state_flag{controller, "state"};
  auto in_state = [&](const std::string& s) { return Guard::flag_equals(state_flag, state_value.at(s)); };

  std::map<std::string, std::string> sig_machine;
  for (const auto& sig : table.alphabet()) {
    std::string id = unique("Sig_" + sanitize_name(sig));
    sig_machine[sig] = id;
    model.machines.push_back({id, {StageKind::transfer, StageKind::receive}, {}, std::nullopt, {}});
    model.flows.push_back({{id, StageKind::transfer}, {id, StageKind::receive}});
  }

  std::map<std::string, std::string> decide, latch;
  for (const auto& s : states) {
    if (is_decision(s)) {
      decide[s] = unique("Decide_" + state_value[s]);
      model.machines.push_back({decide[s], {StageKind::process}, {}, std::nullopt, {}});
    } else if (is_latched(s)) {
      latch[s] = unique("Latch_" + state_value[s]);
      model.machines.push_back({latch[s], {StageKind::process}, {Flag{"lit", {"off", "on"}, "off"}}, std::nullopt, {}});
    }
  }

  // Action machines; a (signal, machine) pair can carry only one trigger, so
  // a second row needing the same pair gets a suffixed copy of the machine.
  std::map<std::string, std::string> subject_machine;
  std::set<std::pair<std::string, std::string>> used_pairs;
  std::vector<std::string> act_of_row;
  for (const auto& r : table.rows) {
    auto sit = subject.find(r.action);
    std::string base = sanitize_name(sit != subject.end() ? sit->second : r.action);
    auto& primary = subject_machine[base];
    if (primary.empty()) {
      primary = unique(base);
      model.machines.push_back({primary, {StageKind::process}, {}, std::nullopt, {}});
    }
    std::string id = primary;
    if (used_pairs.count({r.signal, id})) {
      id = unique(base);
      model.machines.push_back({id, {StageKind::process}, {}, std::nullopt, {}});
    }
    used_pairs.insert({r.signal, id});
    act_of_row.push_back(id);
  }

  TableBundle tb;
  std::vector<RegionDecl> regions;
  std::vector<EventDecl> events;
  std::vector<std::string> row_region;
  for (size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    const std::string& sig = sig_machine[r.signal];
    StageRef recv{sig, StageKind::receive}, xfer{sig, StageKind::transfer};
    StageRef act{act_of_row[i], StageKind::process};
    TriggerArc t;
    t.from = recv;
    t.to = act;
    if (has_state_flag) {
      t.guard = in_state(r.state);
      t.sets.push_back({state_flag, state_value[r.next]});
    }
    if (latch.count(r.next) && r.next != r.state) t.sets.push_back({{latch[r.next], "lit"}, "on"});
    model.triggers.push_back(t);

    RegionDecl reg;
    reg.id = "R" + std::to_string(i + 1);
    reg.elements = {xfer, recv, FlowKey{xfer, recv}, TriggerKey{recv, act}, act};
    if (has_state_flag) {
      reg.elements.push_back(StageRef{controller, StageKind::process});
      reg.elements.push_back(state_flag);
    }
    reg.anchor = TriggerKey{recv, act};
    regions.push_back(reg);
    row_region.push_back(reg.id);
    events.push_back({"E_" + reg.id, reg.id});
    tb.row_event["E_" + reg.id] = i;
  }

  std::map<std::string, std::string> state_region;  // decision state -> region
  for (const auto& [s, d] : decide) {
    StageRef target{d, StageKind::process};
    RegionDecl reg;
    reg.id = "D_" + state_value[s];
    reg.elements.push_back(target);
    std::set<std::string> sources;
    for (size_t i = 0; i < table.rows.size(); ++i)
      if (table.rows[i].next == s) sources.insert(act_of_row[i]);
    for (const auto& src : sources) {
      TriggerArc t;
      t.from = {src, StageKind::process};
      t.to = target;
      t.guard = in_state(s);
      model.triggers.push_back(t);
      reg.elements.push_back(TriggerKey{t.from, t.to});
    }
    reg.anchor = target;
    state_region[s] = reg.id;
    regions.push_back(reg);
    events.push_back({"E_" + reg.id, reg.id});
  }
  std::map<size_t, std::string> leave_latch;  // leaving row -> latch region
  for (const auto& [s, l] : latch) {
    StageRef target{l, StageKind::process};
    FlagRef lit{l, "lit"};
    RegionDecl reg;
    reg.id = "L_" + state_value[s];
    reg.elements = {target, lit};
    reg.anchor = target;
    for (size_t i = 0; i < table.rows.size(); ++i) {
      if (table.rows[i].state != s) continue;
      TriggerArc t;
      t.from = {act_of_row[i], StageKind::process};
      t.to = target;
      Guard g = Guard::flag_equals(lit, "on");
      if (has_state_flag) g = Guard::both(std::move(g), Guard::negation(in_state(s)));
      t.guard = std::move(g);
      t.sets.push_back({lit, "off"});
      model.triggers.push_back(t);
      reg.elements.push_back(TriggerKey{t.from, t.to});
      reg.anchor = TriggerKey{t.from, t.to};
      leave_latch[i] = reg.id;
    }
    regions.push_back(reg);
    events.push_back({"E_" + reg.id, reg.id});
  }

  BehaviorDecl beh;
  beh.id = tb.behavior_id;
  auto successors = [&](const std::string& next) {
    std::vector<std::string> out;
    if (decide.count(next)) {
      out.push_back("E_" + state_region[next]);
    } else {
      for (size_t q = 0; q < table.rows.size(); ++q)
        if (table.rows[q].state == next) out.push_back("E_" + row_region[q]);
    }
    return out;
  };
  for (size_t i = 0; i < table.rows.size(); ++i) {
    const std::string from = "E_" + row_region[i];
    beh.starts.push_back(from);
    auto it = leave_latch.find(i);
    const bool via_latch = it != leave_latch.end() && table.rows[i].next != table.rows[i].state;
    if (!via_latch)
      for (const auto& to : successors(table.rows[i].next)) beh.edges.push_back({from, to, 0, std::nullopt});
    if (it != leave_latch.end()) {
      const std::string l = "E_" + it->second;
      beh.edges.push_back({from, l, 0, std::nullopt});
      for (const auto& to : successors(table.rows[i].next)) beh.edges.push_back({l, to, 0, std::nullopt});
    }
  }
  for (const auto& [s, reg] : state_region)
    for (size_t q = 0; q < table.rows.size(); ++q)
      if (table.rows[q].state == s) beh.edges.push_back({"E_" + reg, "E_" + row_region[q], 0, std::nullopt});
  std::sort(beh.edges.begin(), beh.edges.end());
  beh.edges.erase(std::unique(beh.edges.begin(), beh.edges.end()), beh.edges.end());

  Document doc;
  doc.model = std::move(model);
  doc.regions = std::move(regions);
  doc.events = std::move(events);
  if (!table.rows.empty()) doc.behaviors.push_back(std::move(beh));
  canonicalize(doc);
  tb.bundle = load_bundle(doc);
  if (table.rows.empty())
    tb.bundle.behaviors.emplace(tb.behavior_id, build_behavior({}, {}, std::vector<std::string>{}, tb.behavior_id));
  for (const auto& [sig, m] : sig_machine) tb.stimulus[sig] = m + ".transfer";
  return tb;
}

// ---------------------------------------------------------------------------
// Equivalence

struct EquivalenceVerdict {
  bool equivalent = true;
  std::optional<std::vector<std::string>> counterexample;
  std::uint64_t sequences = 0;
};

/// Runs the TM bundle on `inputs` (one signal per tick) and projects row
/// occurrences back onto table steps, stopping at the first signal that
/// produced no row occurrence.
inline std::vector<std::optional<TableStep>> project_tm(const StateTable& table, const TableBundle& tb,
                                                        const Simulator& sim,
                                                        const std::vector<std::string>& inputs) {
  std::vector<Stimulus> stimuli;
  for (size_t i = 0; i < inputs.size(); ++i) {
    auto it = tb.stimulus.find(inputs[i]);
    if (it == tb.stimulus.end()) throw Error(Errc::unhandled_event, "unknown signal " + inputs[i]);
    stimuli.push_back({static_cast<std::int64_t>(i), it->second, {}});
  }
  SimConfig cfg;
  cfg.max_ticks = static_cast<std::int64_t>(inputs.size()) + 1;
  Trace tr = sim.run(cfg, stimuli);
  std::vector<std::optional<TableStep>> out(inputs.size());
  std::vector<int> count(inputs.size(), 0);
  for (const auto& o : tr.occurrences) {
    auto it = tb.row_event.find(o.event);
    if (it == tb.row_event.end()) continue;
    const auto& r = table.rows[it->second];
    auto k = static_cast<size_t>(o.at);
    if (++count[k] > 1) out[k] = TableStep{"<multiple>", "<multiple>"};
    else out[k] = TableStep{r.action, r.next};
  }
  return out;
}

/// Enumerates every input sequence of length 0..max_len over the table's
/// alphabet (by length, then lexicographically in first-appearance order) and
/// compares run_table with the projected TM trace.
inline EquivalenceVerdict check_equivalence(const StateTable& table, const TableBundle& tb, int max_len) {
  if (max_len < 1) throw Error(Errc::precondition, "max len must be at least 1");
  const auto& behavior = tb.bundle.behavior(tb.behavior_id);
  Simulator sim(*tb.bundle.model, behavior);
  const auto alphabet = table.alphabet();
  EquivalenceVerdict v;
  auto compare = [&](const std::vector<std::string>& inputs) {
    ++v.sequences;
    auto tm = project_tm(table, tb, sim, inputs);
    std::string state = table.initial;
    for (size_t i = 0; i < inputs.size(); ++i) {
      const TableRow* r = table.row(state, inputs[i]);
      if (!r) return !tm[i].has_value();
      if (!tm[i] || !(*tm[i] == TableStep{r->action, r->next})) return false;
      state = r->next;
    }
    return true;
  };
  if (!compare({})) {
    v.equivalent = false;
    v.counterexample = std::vector<std::string>{};
    return v;
  }
  if (alphabet.empty()) return v;
  for (int len = 1; len <= max_len; ++len) {
    std::vector<size_t> digits(static_cast<size_t>(len), 0);
    while (true) {
      std::vector<std::string> inputs;
      for (auto d : digits) inputs.push_back(alphabet[d]);
      if (!compare(inputs)) {
        v.equivalent = false;
        v.counterexample = inputs;
        return v;
      }
      size_t pos = digits.size();
      while (pos > 0 && ++digits[pos - 1] == alphabet.size()) digits[--pos] = 0;
      if (pos == 0) break;
    }
  }
  return v;
}

inline std::string equivalence_json(const EquivalenceVerdict& v) {
  nlohmann::ordered_json j;
  j["equivalent"] = v.equivalent;
  j["counterexample"] = v.counterexample ? nlohmann::ordered_json(*v.counterexample) : nlohmann::ordered_json(nullptr);
  return j.dump(2) + "\n";
}

}  // namespace tmk
