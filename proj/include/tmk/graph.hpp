// Copyright 2026 The tmkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Name-independent structure of static models: labeled digraphs and an
// isomorphism search over them.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "tmk/core.hpp"
#include "tmk/dsl.hpp"

namespace tmk {

struct LabeledGraph {
  std::vector<std::string> labels;
  std::vector<std::tuple<int, int, std::string>> edges;

  int add(std::string label) {
    labels.push_back(std::move(label));
    return static_cast<int>(labels.size()) - 1;
  }
  void link(int from, int to, std::string label) { edges.emplace_back(from, to, std::move(label)); }
};

/// The model as a graph whose labels never mention machine names: machines,
/// stages, triggers and choice points are nodes; containment, flows, trigger
/// endpoints and guard references are labeled edges.
inline LabeledGraph model_graph(const StaticModel& model) {
  LabeledGraph g;
  std::map<std::string, int> machine_node;
  std::map<StageRef, int> stage_node;
  std::function<void(const Machine&, int)> add_machine = [&](const Machine& m, int parent) {
    std::string label = "machine";
    for (const auto& f : m.flags) {
      label += "|flag " + f.id + "{";
      for (const auto& v : f.values) label += v + ",";
      label += "}=" + f.initial;
    }
    if (m.storage)
      label += "|storage " + m.storage->id + " " + (m.storage->capacity ? std::to_string(*m.storage->capacity) : "inf") +
               " " + std::to_string(m.storage->level);
    int n = g.add(label);
    machine_node[m.id] = n;
    if (parent >= 0) g.link(parent, n, "sub");
    for (auto k : m.stages) {
      int s = g.add(std::string("stage ") + std::string(to_string(k)));
      stage_node[{m.id, k}] = s;
      g.link(n, s, "has");
    }
    for (const auto& sub : m.submachines) add_machine(sub, n);
  };
  for (const auto& m : model.machines) add_machine(m, -1);

  for (const auto& f : model.flows) g.link(stage_node.at(f.from), stage_node.at(f.to), "flow");
  for (const auto& t : model.triggers) {
    std::vector<std::string> refs;
    auto slot = [&](std::string& machine) {
      auto it = std::find(refs.begin(), refs.end(), machine);
      if (it == refs.end()) it = refs.insert(refs.end(), machine);
      machine = "$" + std::to_string(it - refs.begin());
    };
    std::string label = "trigger";
    if (t.guard) {
      Guard copy = *t.guard;
      std::function<void(Guard&)> walk = [&](Guard& x) {
        if (x.op == Guard::Op::flag_eq) slot(x.flag.machine);
        if (x.op == Guard::Op::storage_ge || x.op == Guard::Op::storage_lt) slot(x.storage.machine);
        for (auto& a : x.args) walk(a);
      };
      walk(copy);
      label += " when " + serialize_guard(copy);
    }
    for (auto s : t.sets) {
      slot(s.flag.machine);
      label += " set " + s.flag.path() + "=" + s.value;
    }
    if (t.payload) label += " payload " + *t.payload;
    int n = g.add(label);
    g.link(stage_node.at(t.from), n, "from");
    g.link(n, stage_node.at(t.to), "to");
    for (size_t i = 0; i < refs.size(); ++i) g.link(n, machine_node.at(refs[i]), "ref$" + std::to_string(i));
  }
  for (const auto& c : model.choices) {
    int n = g.add("choice");
    g.link(n, stage_node.at(c.at), "at");
    for (const auto& b : c.branches) g.link(n, stage_node.at(b.target), "branch " + b.label);
  }
  return g;
}

namespace detail {

/// Joint color refinement of two graphs; colors are comparable across them.
inline std::pair<std::vector<int>, std::vector<int>> refine_colors(const LabeledGraph& a, const LabeledGraph& b) {
  const size_t na = a.labels.size();
  std::vector<const LabeledGraph*> gs{&a, &b};
  std::vector<std::string> sig(na + b.labels.size());
  for (size_t i = 0; i < na; ++i) sig[i] = a.labels[i];
  for (size_t i = 0; i < b.labels.size(); ++i) sig[na + i] = b.labels[i];
  std::vector<int> color(sig.size());
  size_t classes = 0;
  for (;;) {
    std::map<std::string, int> ids;
    for (const auto& s : sig) ids.emplace(s, 0);
    int next = 0;
    for (auto& [_, v] : ids) v = next++;
    for (size_t i = 0; i < sig.size(); ++i) color[i] = ids[sig[i]];
    if (ids.size() == classes) break;
    classes = ids.size();
    std::vector<std::vector<std::string>> nb(sig.size());
    for (size_t gi = 0; gi < 2; ++gi) {
      size_t off = gi == 0 ? 0 : na;
      for (const auto& [u, v, l] : gs[gi]->edges) {
        nb[off + u].push_back(">" + l + ":" + std::to_string(color[off + v]));
        nb[off + v].push_back("<" + l + ":" + std::to_string(color[off + u]));
      }
    }
    for (size_t i = 0; i < sig.size(); ++i) {
      std::sort(nb[i].begin(), nb[i].end());
      std::string s = std::to_string(color[i]);
      for (const auto& x : nb[i]) s += "," + x;
      sig[i] = std::move(s);
    }
  }
  return {std::vector<int>(color.begin(), color.begin() + static_cast<long>(na)),
          std::vector<int>(color.begin() + static_cast<long>(na), color.end())};
}

}  // namespace detail

/// A label- and edge-preserving bijection from a's nodes to b's, if any.
inline std::optional<std::vector<int>> find_isomorphism(const LabeledGraph& a, const LabeledGraph& b) {
  const size_t n = a.labels.size();
  if (n != b.labels.size() || a.edges.size() != b.edges.size()) return std::nullopt;
  auto [ca, cb] = detail::refine_colors(a, b);
  {
    auto x = ca, y = cb;
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    if (x != y) return std::nullopt;
  }
  using Adj = std::map<std::pair<int, int>, std::vector<std::string>>;
  auto adjacency = [](const LabeledGraph& g) {
    Adj m;
    for (const auto& [u, v, l] : g.edges) m[{u, v}].push_back(l);
    for (auto& [_, ls] : m) std::sort(ls.begin(), ls.end());
    return m;
  };
  const Adj aa = adjacency(a), ab = adjacency(b);
  auto labels_of = [](const Adj& m, int u, int v) {
    auto it = m.find({u, v});
    return it == m.end() ? std::vector<std::string>{} : it->second;
  };
  std::vector<std::vector<int>> neighbors(n);
  for (const auto& [u, v, _] : a.edges) {
    neighbors[static_cast<size_t>(u)].push_back(v);
    neighbors[static_cast<size_t>(v)].push_back(u);
  }
  std::vector<int> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  std::map<int, int> class_size;
  for (int c : ca) ++class_size[c];
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return class_size[ca[static_cast<size_t>(x)]] < class_size[ca[static_cast<size_t>(y)]]; });

  std::vector<int> map(n, -1), used(n, 0);
  std::function<bool(size_t)> place = [&](size_t k) -> bool {
    if (k == n) return true;
    const int u = order[k];
    for (size_t v = 0; v < n; ++v) {
      if (used[v] || cb[v] != ca[static_cast<size_t>(u)]) continue;
      bool ok = labels_of(aa, u, u) == labels_of(ab, static_cast<int>(v), static_cast<int>(v));
      for (int w : neighbors[static_cast<size_t>(u)]) {
        if (!ok) break;
        int mw = map[static_cast<size_t>(w)];
        if (mw < 0 || w == u) continue;
        ok = labels_of(aa, u, w) == labels_of(ab, static_cast<int>(v), mw) &&
             labels_of(aa, w, u) == labels_of(ab, mw, static_cast<int>(v));
      }
      if (!ok) continue;
      map[static_cast<size_t>(u)] = static_cast<int>(v);
      used[v] = 1;
      if (place(k + 1)) return true;
      map[static_cast<size_t>(u)] = -1;
      used[v] = 0;
    }
    return false;
  };
  if (!place(0)) return std::nullopt;
  return map;
}

inline bool isomorphic(const StaticModel& a, const StaticModel& b) {
  return find_isomorphism(model_graph(a), model_graph(b)).has_value();
}

}  // namespace tmk
