// Copyright 2026 The tmkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Command-line front end. Exit codes: 0 success, 1 domain failure, 2 usage
// or I/O failure. Documents go to `out`; prose goes to `err`.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tmk/core.hpp"
#include "tmk/dsl.hpp"
#include "tmk/dynamics.hpp"
#include "tmk/export.hpp"
#include "tmk/graph.hpp"
#include "tmk/railcar.hpp"
#include "tmk/sim.hpp"
#include "tmk/state_table.hpp"

namespace tmk {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

namespace cli {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Document load_document(const std::string& path, std::ostream& err) {
  auto result = parse(SourceUnit{read_file(path), path});
  for (const auto& d : result.diagnostics) err << d.to_string(path) << "\n";
  if (!result.ok()) throw Error(Errc::parse_error, path + " does not parse");
  return *result.document;
}

/// "point=a,b,c" entries into a script checked against `catalog`.
inline ChoiceScript parse_script(const std::vector<std::string>& entries, const ChoiceCatalog& catalog) {
  ChoiceScript script;
  for (const auto& e : entries) {
    auto eq = e.find('=');
    if (eq == std::string::npos) throw Error(Errc::bad_params, "script entry must be point=outcome,..., got " + e);
    std::vector<std::string> outcomes;
    std::stringstream ss(e.substr(eq + 1));
    for (std::string o; std::getline(ss, o, ',');)
      if (!o.empty()) outcomes.push_back(o);
    script_choice(script, catalog, e.substr(0, eq), outcomes);
  }
  return script;
}

inline ChoicePolicy parse_policy(const std::string& s) {
  return s == "random" ? ChoicePolicy::seeded_random : ChoicePolicy::by_priority;
}

struct Options {
  std::string model, trace, stimuli, behavior, table, initial, format = "dot", mutation = "none", policy = "priority";
  std::vector<std::string> script, signals, cars;
  std::int64_t seed = 0, ticks = 1000, cascade = 1000;
  int max_len = 6, terminals = 6, segments = 3, spots = 2, car_count = -1, depth = 60;
  std::uint64_t cap = 1'000'000;
  bool regions = false, mirrored = false;
};

/// Applies flat key=value config entries to the options of `sub` that the
/// command line left unset.
inline void apply_config(CLI::App* sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot read config file " + path);
  auto items = CLI::ConfigINI().from_config(in);
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    std::string key = item.fullname();
    auto* opt = sub->get_option_no_throw("--" + key);
    if (!opt) throw CLI::ConfigError::Extras("unknown config key " + key);
    if (opt->count() > 0) continue;
    opt->add_result(item.inputs);
    opt->run_callback();
  }
}

inline RailcarWorld world_from(const Options& o, int default_cars) {
  RailcarParams p{o.terminals, o.segments, o.spots};
  RailcarWorld w;
  if (!o.cars.empty()) {
    check_params(p);
    w.params = p;
    for (size_t i = 0; i < o.cars.size(); ++i) w.cars.push_back(parse_car(static_cast<int>(i) + 1, o.cars[i]));
  } else {
    w = default_world(p, o.car_count >= 0 ? o.car_count : default_cars);
  }
  w.mutation = parse_mutation(o.mutation);
  check_world(w);
  return w;
}

inline void report_safety(const std::vector<SafetyViolation>& vs, std::ostream& err) {
  for (const auto& v : vs) {
    err << to_string(v.kind) << " at tick " << v.tick << " (trace position " << v.index << ", " << v.area
        << ", cars";
    for (int c : v.cars) err << " " << c;
    err << ")\n";
  }
}

}  // namespace cli

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using cli::Options;
  Options o;
  CLI::App app("Thinging-machine modeling toolkit", "tmtool");
  app.require_subcommand(1);
  std::string config;
  auto add_config = [&](CLI::App* s) { s->add_option("--config", config, "Flat key=value file of option defaults"); };
  auto add_sim = [&](CLI::App* s) {
    s->add_option("--seed", o.seed, "Random seed");
    s->add_option("--ticks", o.ticks, "Maximum ticks")->check(CLI::PositiveNumber);
    s->add_option("--policy", o.policy, "Choice fallback policy")->check(CLI::IsMember({"priority", "random"}));
    s->add_option("--script", o.script, "Scripted choice outcomes, point=outcome,...");
  };
  auto add_world = [&](CLI::App* s) {
    s->add_option("--terminals", o.terminals, "Terminals on the ring");
    s->add_option("--segments", o.segments, "Areas between terminals");
    s->add_option("--spots", o.spots, "Parking spots per terminal");
    s->add_option("--cars", o.car_count, "Number of cars in the default placement");
    s->add_option("--car", o.cars, "Explicit car start: entry:T or parked:T:S");
    s->add_option("--mutation", o.mutation, "Protocol mutation")
        ->check(CLI::IsMember({"none", "drop-reservation", "drop-approaching-block", "drop-dwell-guard",
                               "drop-occupied-handshake"}));
  };

  auto* validate = app.add_subcommand("validate", "Check static well-formedness");
  validate->add_option("model", o.model, "Model file")->required();
  auto* cov = app.add_subcommand("coverage", "Report elements not covered by any region");
  cov->add_option("model", o.model, "Model file")->required();
  auto* sim = app.add_subcommand("simulate", "Simulate a behavior and print the trace");
  sim->add_option("model", o.model, "Model file")->required();
  sim->add_option("--behavior", o.behavior, "Behavior name");
  sim->add_option("--stimuli", o.stimuli, "Stimuli JSON file");
  sim->add_option("--cascade-limit", o.cascade, "Cascade steps per tick")->check(CLI::PositiveNumber);
  add_sim(sim);
  auto* check = app.add_subcommand("check", "Check a trace against a behavior");
  check->add_option("model", o.model, "Model file")->required();
  check->add_option("trace", o.trace, "Trace JSON file")->required();
  check->add_option("--behavior", o.behavior, "Behavior name");

  auto* table = app.add_subcommand("table", "State-transition tables");
  table->require_subcommand(1);
  auto* trun = table->add_subcommand("run", "Run a table on a signal sequence");
  auto* tconv = table->add_subcommand("convert", "Convert a table to a model");
  auto* tequiv = table->add_subcommand("equiv", "Check table and converted model equivalence");
  for (auto* s : {trun, tconv, tequiv}) {
    s->add_option("table", o.table, "Table CSV file")->required();
    s->add_option("--initial", o.initial, "Initial state");
  }
  trun->add_option("signals", o.signals, "Signals in order");
  tequiv->add_option("--max-len", o.max_len, "Longest input sequence")->check(CLI::PositiveNumber);

  auto* rail = app.add_subcommand("railcar", "Railcar terminal protocol");
  rail->require_subcommand(1);
  auto* rrun = rail->add_subcommand("run", "Simulate cars on the ring");
  add_world(rrun);
  add_sim(rrun);
  auto* rexp = rail->add_subcommand("explore", "Exhaustively explore interleavings");
  add_world(rexp);
  rexp->add_option("--depth", o.depth, "Exploration depth")->check(CLI::Range(1, 1'000'000));
  rexp->add_option("--cap", o.cap, "State budget")->check(CLI::PositiveNumber);
  auto* rmodel = rail->add_subcommand("model", "Print the terminal model");
  add_world(rmodel);
  rmodel->add_flag("--mirror", o.mirrored, "Print the mirrored half");

  auto* exp = app.add_subcommand("export", "Export a model as DOT or JSON");
  exp->add_option("model", o.model, "Model file")->required();
  exp->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"dot", "json"}));
  exp->add_flag("--regions", o.regions, "Color elements by region");

  std::vector<CLI::App*> leaves{validate, cov, sim, check, trun, tconv, tequiv, rrun, rexp, rmodel, exp};
  for (auto* s : leaves) add_config(s);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
    for (auto* s : leaves)
      if (s->parsed() && !config.empty()) cli::apply_config(s, config);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (validate->parsed()) {
      auto doc = cli::load_document(o.model, err);
      auto rep = validate_static(doc.model);
      for (const auto& f : rep.findings)
        out << to_string(f.severity) << " " << f.rule << " " << f.location << " " << f.message << "\n";
      if (rep.fatal()) return kExitFailure;
      load_bundle(doc);
      return kExitOk;
    }
    if (cov->parsed()) {
      auto b = load_bundle(cli::load_document(o.model, err));
      auto rep = coverage(*b.model, b.regions);
      nlohmann::ordered_json j;
      j["regions"] = b.regions.size();
      j["covered"] = rep.covered.size();
      j["uncovered"] = nlohmann::ordered_json::array();
      for (const auto& e : rep.uncovered) j["uncovered"].push_back(to_string(e));
      j["overlaps"] = nlohmann::ordered_json::array();
      for (const auto& [e, rs] : rep.overlaps) j["overlaps"].push_back({{"element", to_string(e)}, {"regions", rs}});
      out << j.dump(2) << "\n";
      return rep.uncovered.empty() ? kExitOk : kExitFailure;
    }
    if (sim->parsed()) {
      auto b = load_bundle(cli::load_document(o.model, err));
      const auto& beh = o.behavior.empty() ? b.only_behavior() : b.behavior(o.behavior);
      std::vector<Stimulus> stimuli;
      if (!o.stimuli.empty()) stimuli = stimuli_from_json(cli::read_file(o.stimuli));
      Simulator s(*b.model, beh);
      SimConfig cfg;
      cfg.seed = o.seed;
      cfg.max_ticks = o.ticks;
      cfg.cascade_limit = o.cascade;
      cfg.policy = cli::parse_policy(o.policy);
      out << trace_json(s.run(cfg, stimuli, cli::parse_script(o.script, s.catalog())));
      return kExitOk;
    }
    if (check->parsed()) {
      auto b = load_bundle(cli::load_document(o.model, err));
      const auto& beh = o.behavior.empty() ? b.only_behavior() : b.behavior(o.behavior);
      auto v = check_trace(trace_from_json(cli::read_file(o.trace)), beh);
      out << verdict_json(v);
      return v.conforms() ? kExitOk : kExitFailure;
    }
    if (trun->parsed() || tconv->parsed() || tequiv->parsed()) {
      std::optional<std::string> initial;
      if (!o.initial.empty()) initial = o.initial;
      auto t = parse_table(cli::read_file(o.table), initial);
      if (trun->parsed()) {
        nlohmann::ordered_json j = nlohmann::ordered_json::array();
        std::string state = t.initial;
        for (const auto& sig : o.signals) {
          const auto* r = t.row(state, sig);
          if (!r) {
            out << j.dump(2) << "\n";
            throw Error(Errc::unhandled_event, "state " + state + " has no row for " + sig);
          }
          j.push_back({{"state", state}, {"signal", sig}, {"action", r->action}, {"next", r->next}});
          state = r->next;
        }
        out << j.dump(2) << "\n";
        return kExitOk;
      }
      auto tb = table_to_tm(t);
      if (tconv->parsed()) {
        out << serialize(to_document(tb.bundle));
        return kExitOk;
      }
      auto v = check_equivalence(t, tb, o.max_len);
      out << equivalence_json(v);
      err << v.sequences << " sequences compared\n";
      return v.equivalent ? kExitOk : kExitFailure;
    }
    if (rrun->parsed()) {
      auto w = cli::world_from(o, 1);
      SimConfig cfg;
      cfg.seed = o.seed;
      cfg.max_ticks = o.ticks;
      cfg.policy = cli::parse_policy(o.policy);
      auto tr = run_world(w, cfg, cli::parse_script(o.script, railcar_choice_catalog()));
      out << trace_json(tr);
      auto vs = check_safety(tr, w);
      cli::report_safety(vs, err);
      return vs.empty() ? kExitOk : kExitFailure;
    }
    if (rexp->parsed()) {
      auto w = cli::world_from(o, 2);
      auto rep = explore(w, {o.depth, o.cap});
      out << explore_json(rep);
      err << rep.states << " states, " << rep.transitions << " transitions\n";
      for (const auto& v : rep.violations) err << to_string(v.kind) << " witness of " << v.steps << " steps\n";
      return rep.violations.empty() ? kExitOk : kExitFailure;
    }
    if (rmodel->parsed()) {
      RailcarParams p{1, o.segments, o.spots};
      auto b = railcar_bundle(p);
      if (o.mirrored) {
        out << serialize(mirror(*b.model));
      } else {
        out << serialize(to_document(b));
      }
      return kExitOk;
    }
    if (exp->parsed()) {
      auto doc = cli::load_document(o.model, err);
      auto rep = validate_static(doc.model);
      if (rep.fatal()) {
        for (const auto& f : rep.findings) err << to_string(f.severity) << " " << f.rule << " " << f.message << "\n";
        return kExitFailure;
      }
      if (o.format == "json") {
        out << to_json(doc);
      } else if (o.regions) {
        auto b = load_bundle(doc);
        out << to_dot(*b.model, &b.regions);
      } else {
        out << to_dot(doc.model);
      }
      return kExitOk;
    }
  } catch (const Error& e) {
    err << e.what() << "\n";
    return e.code() == Errc::io || e.code() == Errc::parse_error ? kExitUsage : kExitFailure;
  }
  return kExitUsage;
}

}  // namespace tmk
