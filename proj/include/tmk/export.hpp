// Copyright 2026 The tmkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Diagram and data exports: Graphviz DOT and JSON.

#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tmk/core.hpp"
#include "tmk/dsl.hpp"
#include "tmk/dynamics.hpp"

namespace tmk {

namespace detail {

inline std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

inline constexpr const char* kPalette[] = {"#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462",
                                           "#b3de69", "#fccde5", "#d9d9d9", "#bc80bd", "#ccebc5", "#ffed6f"};

}  // namespace detail

/// Machines as clusters, stages as nodes labeled with their kind, flows solid,
/// triggers dashed. With regions, each element is filled with the color of
/// the first region (by id) that contains it.
inline std::string to_dot(const StaticModel& model,
                          const std::vector<std::shared_ptr<const EventRegion>>* regions = nullptr) {
  using detail::dot_quote;
  std::ostringstream os;
  os << "digraph tm {\n";
  if (model.empty()) {
    os << "}\n";
    return os.str();
  }
  std::map<Element, std::string> color;
  std::vector<std::pair<std::string, std::string>> legend;
  if (regions) {
    auto sorted = *regions;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a->id < b->id; });
    constexpr size_t n = std::size(detail::kPalette);
    for (size_t i = 0; i < sorted.size(); ++i) {
      std::string c = detail::kPalette[i % n];
      legend.emplace_back(sorted[i]->id, c);
      for (const auto& e : sorted[i]->elements) color.emplace(e, c);
    }
  }
  auto fill = [&](const Element& e, const char* base) {
    auto it = color.find(e);
    if (it == color.end()) return std::string(" [") + base + "]";
    return std::string(" [") + base + ", style=\"rounded,filled\", fillcolor=" + dot_quote(it->second) + "]";
  };
  auto edge_color = [&](const Element& e) {
    auto it = color.find(e);
    return it == color.end() ? std::string() : ", color=" + dot_quote(it->second) + ", penwidth=2";
  };

  os << "  rankdir=LR;\n  node [shape=box, style=rounded];\n";
  std::function<void(const Machine&, int)> write = [&](const Machine& m, int depth) {
    std::string pad(static_cast<size_t>(depth) * 2, ' ');
    os << pad << "subgraph " << dot_quote("cluster_" + m.id) << " {\n";
    os << pad << "  label=" << dot_quote(m.id) << ";\n";
    for (auto k : m.stages) {
      StageRef s{m.id, k};
      os << pad << "  " << dot_quote(s.path())
         << fill(s, ("label=" + dot_quote(std::string(to_string(k)))).c_str()) << ";\n";
    }
    for (const auto& f : m.flags) {
      FlagRef r{m.id, f.id};
      std::string label = f.id + " {";
      for (size_t i = 0; i < f.values.size(); ++i) label += (i ? ", " : "") + f.values[i];
      label += "}";
      os << pad << "  " << dot_quote(r.path())
         << fill(r, ("shape=note, label=" + dot_quote(label)).c_str()) << ";\n";
    }
    if (m.storage) {
      StorageRef r{m.id, m.storage->id};
      std::string label = m.storage->id + " " + std::to_string(m.storage->level) + "/" +
                          (m.storage->capacity ? std::to_string(*m.storage->capacity) : "inf");
      os << pad << "  " << dot_quote(r.path())
         << fill(r, ("shape=cylinder, label=" + dot_quote(label)).c_str()) << ";\n";
    }
    for (const auto& sub : m.submachines) write(sub, depth + 1);
    os << pad << "}\n";
  };
  for (const auto& m : model.machines) write(m, 1);
  for (const auto& f : model.flows)
    os << "  " << dot_quote(f.from.path()) << " -> " << dot_quote(f.to.path()) << " [style=solid"
       << edge_color(FlowKey{f.from, f.to}) << "];\n";
  for (const auto& t : model.triggers) {
    os << "  " << dot_quote(t.from.path()) << " -> " << dot_quote(t.to.path()) << " [style=dashed";
    std::string label;
    if (t.guard) label = "when " + serialize_guard(*t.guard);
    for (const auto& s : t.sets) label += (label.empty() ? "" : "\\n") + std::string("set ") + s.flag.path() + " = " + s.value;
    if (!label.empty()) os << ", label=" << dot_quote(label);
    os << edge_color(TriggerKey{t.from, t.to}) << "];\n";
  }
  for (const auto& c : model.choices)
    for (const auto& b : c.branches)
      os << "  " << dot_quote(c.at.path()) << " -> " << dot_quote(b.target.path()) << " [style=dotted, label="
         << dot_quote(c.id + ": " + b.label) << ", constraint=false];\n";
  if (!legend.empty()) {
    os << "  subgraph \"cluster_regions\" {\n    label=\"regions\";\n";
    for (const auto& [id, c] : legend)
      os << "    " << dot_quote("region:" + id) << " [label=" << dot_quote(id)
         << ", shape=box, style=\"filled\", fillcolor=" << dot_quote(c) << "];\n";
    os << "  }\n";
  }
  os << "}\n";
  return os.str();
}

inline nlohmann::ordered_json machine_json(const Machine& m) {
  nlohmann::ordered_json j;
  j["id"] = m.id;
  j["stages"] = nlohmann::ordered_json::array();
  for (auto k : m.stages) j["stages"].push_back(std::string(to_string(k)));
  j["flags"] = nlohmann::ordered_json::array();
  for (const auto& f : m.flags) j["flags"].push_back({{"id", f.id}, {"values", f.values}, {"initial", f.initial}});
  if (m.storage) {
    nlohmann::ordered_json s;
    s["id"] = m.storage->id;
    s["capacity"] = m.storage->capacity ? nlohmann::ordered_json(*m.storage->capacity) : nlohmann::ordered_json();
    s["level"] = m.storage->level;
    j["storage"] = s;
  } else {
    j["storage"] = nullptr;
  }
  j["submachines"] = nlohmann::ordered_json::array();
  for (const auto& s : m.submachines) j["submachines"].push_back(machine_json(s));
  return j;
}

/// The whole document as JSON; element and guard references use DSL text.
inline std::string to_json(const Document& doc) {
  nlohmann::ordered_json j;
  const auto& m = doc.model;
  j["machines"] = nlohmann::ordered_json::array();
  for (const auto& x : m.machines) j["machines"].push_back(machine_json(x));
  j["flows"] = nlohmann::ordered_json::array();
  for (const auto& f : m.flows) j["flows"].push_back({{"from", f.from.path()}, {"to", f.to.path()}});
  j["triggers"] = nlohmann::ordered_json::array();
  for (const auto& t : m.triggers) {
    nlohmann::ordered_json e;
    e["from"] = t.from.path();
    e["to"] = t.to.path();
    e["guard"] = t.guard ? nlohmann::ordered_json(serialize_guard(*t.guard)) : nlohmann::ordered_json();
    e["sets"] = nlohmann::ordered_json::array();
    for (const auto& s : t.sets) e["sets"].push_back({{"flag", s.flag.path()}, {"value", s.value}});
    e["payload"] = t.payload ? nlohmann::ordered_json(*t.payload) : nlohmann::ordered_json();
    j["triggers"].push_back(std::move(e));
  }
  j["choices"] = nlohmann::ordered_json::array();
  for (const auto& c : m.choices) {
    nlohmann::ordered_json e;
    e["id"] = c.id;
    e["at"] = c.at.path();
    e["branches"] = nlohmann::ordered_json::array();
    for (const auto& b : c.branches) e["branches"].push_back({{"label", b.label}, {"target", b.target.path()}});
    j["choices"].push_back(std::move(e));
  }
  j["regions"] = nlohmann::ordered_json::array();
  for (const auto& r : doc.regions) {
    nlohmann::ordered_json e;
    e["id"] = r.id;
    e["elements"] = nlohmann::ordered_json::array();
    for (const auto& el : r.elements) e["elements"].push_back(to_string(el));
    e["anchor"] = to_string(r.anchor);
    j["regions"].push_back(std::move(e));
  }
  j["events"] = nlohmann::ordered_json::array();
  for (const auto& e : doc.events) j["events"].push_back({{"id", e.id}, {"region", e.region}});
  j["behaviors"] = nlohmann::ordered_json::array();
  for (const auto& b : doc.behaviors) {
    nlohmann::ordered_json e;
    e["id"] = b.id;
    e["starts"] = b.starts;
    e["edges"] = nlohmann::ordered_json::array();
    for (const auto& x : b.edges)
      e["edges"].push_back({{"from", x.from},
                            {"to", x.to},
                            {"min", x.min_delay},
                            {"max", x.max_delay ? nlohmann::ordered_json(*x.max_delay) : nlohmann::ordered_json()}});
    j["behaviors"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

}  // namespace tmk
