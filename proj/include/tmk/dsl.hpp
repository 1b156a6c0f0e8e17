// Copyright 2026 The tmkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// The ".tm" text format: parser with statement-level error recovery and a
// canonical serializer (parse(serialize(doc)) == doc).

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "tmk/core.hpp"

namespace tmk {

struct RegionDecl {
  std::string id;
  std::vector<Element> elements;
  Element anchor;
  bool operator==(const RegionDecl&) const = default;
};

struct EventDecl {
  std::string id;
  std::string region;
  bool operator==(const EventDecl&) const = default;
};

struct EdgeDecl {
  std::string from;
  std::string to;
  std::int64_t min_delay = 0;
  std::optional<std::int64_t> max_delay;  // nullopt: unbounded
  auto operator<=>(const EdgeDecl&) const = default;
};

struct BehaviorDecl {
  std::string id;
  std::vector<std::string> starts;
  std::vector<EdgeDecl> edges;
  bool operator==(const BehaviorDecl&) const = default;
};

/// Everything one .tm source can declare.
struct Document {
  StaticModel model;
  std::vector<RegionDecl> regions;
  std::vector<EventDecl> events;
  std::vector<BehaviorDecl> behaviors;

  const BehaviorDecl* behavior(std::string_view id) const {
    for (const auto& b : behaviors)
      if (b.id == id) return &b;
    return nullptr;
  }
  bool operator==(const Document&) const = default;
};

inline void canonicalize(Document& doc) {
  canonicalize(doc.model);
  for (auto& r : doc.regions) {
    std::sort(r.elements.begin(), r.elements.end());
    r.elements.erase(std::unique(r.elements.begin(), r.elements.end()), r.elements.end());
  }
  auto by_id = [](const auto& a, const auto& b) { return a.id < b.id; };
  std::stable_sort(doc.regions.begin(), doc.regions.end(), by_id);
  std::stable_sort(doc.events.begin(), doc.events.end(), by_id);
  for (auto& b : doc.behaviors) {
    std::sort(b.starts.begin(), b.starts.end());
    b.starts.erase(std::unique(b.starts.begin(), b.starts.end()), b.starts.end());
    std::stable_sort(b.edges.begin(), b.edges.end());
  }
  std::stable_sort(doc.behaviors.begin(), doc.behaviors.end(), by_id);
}

struct SourceUnit {
  std::string text;
  std::string origin = "<inline>";
};

inline std::string normalize_newlines(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  for (size_t i = 0; i < in.size(); ++i) {
    if (in[i] == '\r') {
      out += '\n';
      if (i + 1 < in.size() && in[i + 1] == '\n') ++i;
    } else {
      out += in[i];
    }
  }
  return out;
}

struct ParseDiagnostic {
  enum class Level { error, warning };
  int line = 1;
  int column = 1;
  std::string message;
  Level severity = Level::error;

  std::string to_string(std::string_view origin = "<inline>") const {
    return std::string(origin) + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " +
           (severity == Level::error ? "error" : "warning") + ": " + message;
  }
  bool operator==(const ParseDiagnostic&) const = default;
};

struct ParseResult {
  std::optional<Document> document;
  std::vector<ParseDiagnostic> diagnostics;

  bool ok() const { return document.has_value(); }
};

inline const std::set<std::string, std::less<>>& reserved_keywords() {
  static const std::set<std::string, std::less<>> kw = {
      "machine", "stages", "flag",  "init",     "storage", "cap",    "level",
      "inf",     "flow",   "trigger", "when",   "set",     "payload", "choice",
      "at",      "region", "anchor", "event",   "on",      "behavior", "delay",
      "start",   "and",    "or",    "not"};
  return kw;
}

namespace detail {

struct Token {
  enum class Kind { word, integer, punct, end };
  Kind kind = Kind::end;
  std::string text;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Token> run(std::vector<ParseDiagnostic>& diags) {
    std::vector<Token> out;
    while (true) {
      skip_space();
      Token t;
      t.line = line_;
      t.column = col_;
      if (pos_ >= text_.size()) {
        out.push_back(t);
        return out;
      }
      char c = text_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        t.kind = Token::Kind::word;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
          t.text += advance();
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        t.kind = Token::Kind::integer;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
          t.text += advance();
      } else {
        static constexpr std::string_view two[] = {"->", "==", ">="};
        t.kind = Token::Kind::punct;
        bool matched = false;
        for (auto p : two)
          if (text_.substr(pos_, 2) == p) {
            t.text += advance();
            t.text += advance();
            matched = true;
            break;
          }
        if (!matched) {
          if (std::string_view("{}[](),.:=<").find(c) == std::string_view::npos) {
            diags.push_back({line_, col_, std::string("unexpected character '") + c + "'"});
            advance();
            continue;
          }
          t.text += advance();
        }
      }
      out.push_back(std::move(t));
    }
  }

 private:
  char advance() {
    char c = text_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) {
      ++col_;
    }
    return c;
  }
  void skip_space() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c)) ||
                 (static_cast<unsigned char>(c) & 0x80)) {
        advance();
      } else {
        break;
      }
    }
  }

  std::string_view text_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

struct RawPath {
  std::vector<std::string> parts;
  int line = 1;
  int column = 1;
};

struct RawGuard {
  Guard::Op op = Guard::Op::flag_eq;
  RawPath path;
  std::string value;
  std::int64_t bound = 0;
  std::vector<RawGuard> args;
};

struct RawTrigger {
  RawPath from, to;
  std::optional<RawGuard> guard;
  std::vector<std::pair<RawPath, std::string>> sets;
  std::optional<std::string> payload;
};

struct RawChoice {
  std::string id;
  RawPath at;
  std::vector<std::pair<std::string, RawPath>> branches;
};

struct RawElement {
  enum class Kind { stage, flow, trigger, flag, storage } kind = Kind::stage;
  RawPath a, b;
};

struct RawRegion {
  std::string id;
  std::vector<RawElement> elements;
  RawElement anchor;
};

struct Named {
  std::string name;
  int line = 1;
  int column = 1;
};

struct RawEvent {
  std::string id;
  Named region;
};

struct RawEdge {
  Named from, to;
  std::int64_t min = 0;
  std::optional<std::int64_t> max;
};

struct RawBehavior {
  std::string id;
  std::vector<Named> starts;
  std::vector<RawEdge> edges;
};

struct ParseFail {
  int line;
  int column;
  std::string message;
};

inline bool is_statement_keyword(const Token& t) {
  static const std::set<std::string, std::less<>> kw = {"machine", "flow",   "trigger", "choice",
                                                        "region",  "event",  "behavior"};
  return t.kind == Token::Kind::word && kw.count(t.text);
}

class Parser {
 public:
  Parser(std::vector<Token> tokens, std::vector<ParseDiagnostic>& diags)
      : toks_(std::move(tokens)), diags_(diags) {}

  void run() {
    while (!at_end()) {
      size_t start = pos_;
      try {
        statement();
      } catch (const ParseFail& f) {
        diags_.push_back({f.line, f.column, f.message});
        recover(start);
      }
    }
  }

  std::vector<Machine> machines;
  std::vector<std::pair<RawPath, RawPath>> flows;
  std::vector<RawTrigger> triggers;
  std::vector<RawChoice> choices;
  std::vector<RawRegion> regions;
  std::vector<RawEvent> events;
  std::vector<RawBehavior> behaviors;

 private:
  const Token& peek(size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  bool at_end() const { return peek().kind == Token::Kind::end; }
  const Token& next() {
    const Token& t = peek();
    if (pos_ < toks_.size() - 1) ++pos_;
    return t;
  }
  [[noreturn]] void fail(const Token& t, std::string msg) const {
    throw ParseFail{t.line, t.column, std::move(msg)};
  }
  static std::string describe(const Token& t) {
    if (t.kind == Token::Kind::end) return "end of input";
    return "'" + t.text + "'";
  }
  bool is_word(std::string_view w, size_t ahead = 0) const {
    return peek(ahead).kind == Token::Kind::word && peek(ahead).text == w;
  }
  bool is_punct(std::string_view p, size_t ahead = 0) const {
    return peek(ahead).kind == Token::Kind::punct && peek(ahead).text == p;
  }
  void expect_word(std::string_view w) {
    if (!is_word(w)) fail(peek(), "expected '" + std::string(w) + "', found " + describe(peek()));
    next();
  }
  void expect_punct(std::string_view p) {
    if (!is_punct(p)) fail(peek(), "expected '" + std::string(p) + "', found " + describe(peek()));
    next();
  }
  std::string name(std::string_view what) {
    const Token& t = peek();
    if (t.kind != Token::Kind::word) fail(t, "expected " + std::string(what) + " name, found " + describe(t));
    if (reserved_keywords().count(t.text))
      fail(t, "'" + t.text + "' is a reserved keyword and cannot be used as a " + std::string(what) + " name");
    return next().text;
  }
  Named named(std::string_view what) {
    const Token& t = peek();
    Named n{"", t.line, t.column};
    n.name = name(what);
    return n;
  }
  // Values may be any word except the structural keyword 'init'.
  std::string value() {
    const Token& t = peek();
    if (t.kind != Token::Kind::word || t.text == "init")
      fail(t, "expected a flag value, found " + describe(t));
    return next().text;
  }
  std::int64_t integer() {
    const Token& t = peek();
    if (t.kind != Token::Kind::integer) fail(t, "expected an integer, found " + describe(t));
    try {
      return std::stoll(next().text);
    } catch (const std::exception&) {
      fail(t, "integer out of range");
    }
  }
  RawPath path() {
    RawPath p;
    p.line = peek().line;
    p.column = peek().column;
    if (peek().kind != Token::Kind::word) fail(peek(), "expected a dotted path, found " + describe(peek()));
    p.parts.push_back(next().text);
    while (is_punct(".")) {
      next();
      if (peek().kind != Token::Kind::word) fail(peek(), "expected a name after '.', found " + describe(peek()));
      p.parts.push_back(next().text);
    }
    return p;
  }

  void recover(size_t start) {
    // Resume at the first statement keyword outside any brace opened by the
    // failed statement.
    int depth = 0;
    for (size_t i = start; i < toks_.size(); ++i) {
      const Token& t = toks_[i];
      if (t.kind == Token::Kind::end) {
        pos_ = i;
        return;
      }
      if (i > start && depth <= 0 && i >= pos_ && is_statement_keyword(t)) {
        pos_ = i;
        return;
      }
      if (t.kind == Token::Kind::punct && t.text == "{") ++depth;
      if (t.kind == Token::Kind::punct && t.text == "}") --depth;
    }
    pos_ = toks_.size() - 1;
  }

  void statement() {
    const Token& t = peek();
    if (is_word("machine")) machines.push_back(machine());
    else if (is_word("flow")) flow();
    else if (is_word("trigger")) trigger();
    else if (is_word("choice")) choice();
    else if (is_word("region")) region();
    else if (is_word("event")) event();
    else if (is_word("behavior")) behavior();
    else fail(t, "expected a statement (machine, flow, trigger, choice, region, event, behavior), found " + describe(t));
  }

  Machine machine() {
    expect_word("machine");
    Machine m;
    m.id = name("machine");
    expect_punct("{");
    if (is_word("stages")) {
      next();
      expect_punct(":");
      while (true) {
        const Token& t = peek();
        auto k = t.kind == Token::Kind::word ? parse_stage_kind(t.text) : std::nullopt;
        if (!k) fail(t, "expected a stage kind (create, process, release, transfer, receive), found " + describe(t));
        next();
        m.stages.push_back(*k);
        if (!is_punct(",")) break;
        next();
      }
    }
    while (is_word("flag")) {
      next();
      Flag f;
      f.id = name("flag");
      expect_punct("{");
      while (!is_word("init")) {
        f.values.push_back(value());
        expect_punct(",");
      }
      expect_word("init");
      f.initial = value();
      expect_punct("}");
      m.flags.push_back(std::move(f));
    }
    if (is_word("storage")) {
      next();
      Storage s;
      s.id = name("storage");
      expect_word("cap");
      if (is_word("inf")) next();
      else s.capacity = integer();
      if (is_word("level")) {
        next();
        s.level = integer();
      }
      m.storage = std::move(s);
    }
    while (is_word("machine")) m.submachines.push_back(machine());
    expect_punct("}");
    return m;
  }

  void flow() {
    expect_word("flow");
    auto from = path();
    expect_punct("->");
    auto to = path();
    flows.emplace_back(std::move(from), std::move(to));
  }

  RawGuard guard_atom() {
    if (is_word("not")) {
      next();
      RawGuard g;
      g.op = Guard::Op::negate;
      g.args.push_back(guard_atom());
      return g;
    }
    if (is_punct("(")) {
      next();
      auto g = guard_expr(1);
      expect_punct(")");
      return g;
    }
    RawGuard g;
    g.path = path();
    if (is_punct("==")) {
      next();
      g.op = Guard::Op::flag_eq;
      g.value = value();
    } else if (is_punct(">=")) {
      next();
      g.op = Guard::Op::storage_ge;
      g.bound = integer();
    } else if (is_punct("<")) {
      next();
      g.op = Guard::Op::storage_lt;
      g.bound = integer();
    } else {
      fail(peek(), "expected '==', '>=' or '<' in guard, found " + describe(peek()));
    }
    return g;
  }

  // Precedence climbing: or (1) < and (2); both left-associative.
  RawGuard guard_expr(int min_prec) {
    auto lhs = guard_atom();
    while (true) {
      int prec = is_word("or") ? 1 : is_word("and") ? 2 : 0;
      if (prec == 0 || prec < min_prec) break;
      next();
      auto rhs = guard_expr(prec + 1);
      RawGuard g;
      g.op = prec == 1 ? Guard::Op::any : Guard::Op::all;
      g.args.push_back(std::move(lhs));
      g.args.push_back(std::move(rhs));
      lhs = std::move(g);
    }
    return lhs;
  }

  void trigger() {
    expect_word("trigger");
    RawTrigger t;
    t.from = path();
    expect_punct("->");
    t.to = path();
    if (is_word("when")) {
      next();
      t.guard = guard_expr(1);
    }
    if (is_word("set")) {
      next();
      while (true) {
        auto p = path();
        expect_punct("=");
        t.sets.emplace_back(std::move(p), value());
        if (!is_punct(",")) break;
        next();
      }
    }
    if (is_word("payload")) {
      next();
      t.payload = name("payload");
    }
    triggers.push_back(std::move(t));
  }

  void choice() {
    expect_word("choice");
    RawChoice c;
    c.id = name("choice");
    expect_word("at");
    c.at = path();
    expect_punct("{");
    while (true) {
      auto label = name("branch label");
      expect_punct("->");
      c.branches.emplace_back(std::move(label), path());
      if (!is_punct(",")) break;
      next();
    }
    expect_punct("}");
    choices.push_back(std::move(c));
  }

  RawElement element() {
    RawElement e;
    if (is_word("flow") || is_word("trigger")) {
      e.kind = is_word("flow") ? RawElement::Kind::flow : RawElement::Kind::trigger;
      next();
      e.a = path();
      expect_punct("->");
      e.b = path();
    } else if (is_word("flag") || is_word("storage")) {
      e.kind = is_word("flag") ? RawElement::Kind::flag : RawElement::Kind::storage;
      next();
      e.a = path();
    } else {
      e.kind = RawElement::Kind::stage;
      e.a = path();
    }
    return e;
  }

  void region() {
    expect_word("region");
    RawRegion r;
    r.id = name("region");
    expect_punct("{");
    r.elements.push_back(element());
    while (is_punct(",")) {
      next();
      r.elements.push_back(element());
    }
    expect_word("anchor");
    r.anchor = element();
    expect_punct("}");
    regions.push_back(std::move(r));
  }

  void event() {
    expect_word("event");
    RawEvent e;
    e.id = name("event");
    expect_word("on");
    e.region = named("region");
    events.push_back(std::move(e));
  }

  void behavior() {
    expect_word("behavior");
    RawBehavior b;
    b.id = name("behavior");
    expect_punct("{");
    while (!is_punct("}")) {
      if (is_word("start")) {
        next();
        b.starts.push_back(named("event"));
        continue;
      }
      RawEdge e;
      e.from = named("event");
      expect_punct("->");
      e.to = named("event");
      if (is_word("delay")) {
        next();
        expect_punct("[");
        e.min = integer();
        expect_punct(",");
        if (is_word("inf")) next();
        else e.max = integer();
        expect_punct("]");
      }
      b.edges.push_back(std::move(e));
    }
    expect_punct("}");
    behaviors.push_back(std::move(b));
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
  std::vector<ParseDiagnostic>& diags_;
};

/// Binds raw dotted paths to model names.
class Resolver {
 public:
  Resolver(const StaticModel& model, std::vector<ParseDiagnostic>& diags) : ix_(model), diags_(diags) {}

  std::optional<std::string> machine(const RawPath& p, size_t count) {
    std::vector<std::string> hits;
    for (const auto* m : ix_.all_machines()) {
      const Machine* cur = m;
      bool match = true;
      for (size_t i = count; i-- > 0;) {
        if (!cur || cur->id != p.parts[i]) {
          match = false;
          break;
        }
        cur = ix_.parent(cur->id);
      }
      if (match) hits.push_back(m->id);
    }
    std::sort(hits.begin(), hits.end());
    hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
    std::string shown = join(p, count);
    if (hits.empty()) error(p, "unknown machine '" + shown + "'");
    else if (hits.size() > 1) error(p, "ambiguous machine path '" + shown + "'");
    else return hits.front();
    return std::nullopt;
  }

  std::optional<StageRef> stage(const RawPath& p) {
    if (p.parts.size() < 2) {
      error(p, "stage path '" + join(p, p.parts.size()) + "' must be Machine.stage");
      return std::nullopt;
    }
    auto kind = parse_stage_kind(p.parts.back());
    if (!kind) {
      error(p, "'" + p.parts.back() + "' is not a stage kind");
      return std::nullopt;
    }
    auto m = machine(p, p.parts.size() - 1);
    if (!m) return std::nullopt;
    StageRef s{*m, *kind};
    if (!ix_.has_stage(s)) {
      error(p, "machine '" + *m + "' has no " + std::string(to_string(*kind)) + " stage");
      return std::nullopt;
    }
    return s;
  }

  std::optional<FlagRef> flag(const RawPath& p) {
    if (p.parts.size() < 2) {
      error(p, "flag path must be Machine.flag");
      return std::nullopt;
    }
    auto m = machine(p, p.parts.size() - 1);
    if (!m) return std::nullopt;
    FlagRef f{*m, p.parts.back()};
    if (!ix_.flag(f)) {
      error(p, "machine '" + *m + "' has no flag '" + f.flag + "'");
      return std::nullopt;
    }
    return f;
  }

  std::optional<StorageRef> storage(const RawPath& p) {
    if (p.parts.size() < 2) {
      error(p, "storage path must be Machine.storage");
      return std::nullopt;
    }
    auto m = machine(p, p.parts.size() - 1);
    if (!m) return std::nullopt;
    StorageRef s{*m, p.parts.back()};
    if (!ix_.storage(s)) {
      error(p, "machine '" + *m + "' has no storage '" + s.storage + "'");
      return std::nullopt;
    }
    return s;
  }

  std::optional<Guard> guard(const RawGuard& g) {
    Guard out;
    out.op = g.op;
    switch (g.op) {
      case Guard::Op::flag_eq: {
        auto f = flag(g.path);
        if (!f) return std::nullopt;
        out.flag = *f;
        out.value = g.value;
        return out;
      }
      case Guard::Op::storage_ge:
      case Guard::Op::storage_lt: {
        auto s = storage(g.path);
        if (!s) return std::nullopt;
        out.storage = *s;
        out.bound = g.bound;
        return out;
      }
      default:
        for (const auto& a : g.args) {
          auto r = guard(a);
          if (!r) return std::nullopt;
          out.args.push_back(std::move(*r));
        }
        return out;
    }
  }

  std::optional<Element> element(const RawElement& e) {
    switch (e.kind) {
      case RawElement::Kind::stage: {
        auto s = stage(e.a);
        return s ? std::optional<Element>(*s) : std::nullopt;
      }
      case RawElement::Kind::flag: {
        auto f = flag(e.a);
        return f ? std::optional<Element>(*f) : std::nullopt;
      }
      case RawElement::Kind::storage: {
        auto s = storage(e.a);
        return s ? std::optional<Element>(*s) : std::nullopt;
      }
      case RawElement::Kind::flow:
      case RawElement::Kind::trigger: {
        auto a = stage(e.a);
        auto b = stage(e.b);
        if (!a || !b) return std::nullopt;
        Element out = e.kind == RawElement::Kind::flow ? Element(FlowKey{*a, *b}) : Element(TriggerKey{*a, *b});
        if (!ix_.has_element(out)) {
          error(e.a, "no " + tmk::to_string(out) + " in the model");
          return std::nullopt;
        }
        return out;
      }
    }
    return std::nullopt;
  }

  void error(const RawPath& p, std::string msg) { diags_.push_back({p.line, p.column, std::move(msg)}); }
  void error(const Named& n, std::string msg) { diags_.push_back({n.line, n.column, std::move(msg)}); }

 private:
  static std::string join(const RawPath& p, size_t count) {
    std::string s;
    for (size_t i = 0; i < count; ++i) s += (i ? "." : "") + p.parts[i];
    return s;
  }

  ModelIndex ix_;
  std::vector<ParseDiagnostic>& diags_;
};

}  // namespace detail

inline ParseResult parse(const SourceUnit& source) {
  ParseResult result;
  auto& diags = result.diagnostics;
  const std::string text = normalize_newlines(source.text);
  detail::Lexer lexer(text);
  detail::Parser parser(lexer.run(diags), diags);
  parser.run();

  Document doc;
  doc.model.machines = std::move(parser.machines);
  detail::Resolver res(doc.model, diags);

  for (const auto& [from, to] : parser.flows) {
    auto a = res.stage(from);
    auto b = res.stage(to);
    if (a && b) doc.model.flows.push_back({*a, *b});
  }
  for (const auto& t : parser.triggers) {
    auto a = res.stage(t.from);
    auto b = res.stage(t.to);
    TriggerArc arc;
    bool ok = a && b;
    if (t.guard) {
      auto g = res.guard(*t.guard);
      ok = ok && g;
      if (g) arc.guard = std::move(*g);
    }
    for (const auto& [p, v] : t.sets) {
      auto f = res.flag(p);
      ok = ok && f;
      if (f) arc.sets.push_back({*f, v});
    }
    if (!ok) continue;
    arc.from = *a;
    arc.to = *b;
    arc.payload = t.payload;
    doc.model.triggers.push_back(std::move(arc));
  }
  for (const auto& c : parser.choices) {
    ChoicePoint cp;
    cp.id = c.id;
    auto at = res.stage(c.at);
    bool ok = at.has_value();
    for (const auto& [label, p] : c.branches) {
      auto s = res.stage(p);
      ok = ok && s;
      if (s) cp.branches.push_back({label, *s});
    }
    if (!ok) continue;
    cp.at = *at;
    doc.model.choices.push_back(std::move(cp));
  }

  // Regions/events/behaviors reference arcs, so they resolve against the
  // model after arcs are in place.
  detail::Resolver res2(doc.model, diags);
  std::set<std::string> region_ids;
  for (const auto& r : parser.regions) {
    RegionDecl d;
    d.id = r.id;
    bool ok = true;
    for (const auto& e : r.elements) {
      auto el = res2.element(e);
      ok = ok && el;
      if (el) d.elements.push_back(std::move(*el));
    }
    auto anchor = res2.element(r.anchor);
    if (!ok || !anchor) continue;
    d.anchor = std::move(*anchor);
    region_ids.insert(d.id);
    doc.regions.push_back(std::move(d));
  }
  std::set<std::string> event_ids;
  for (const auto& e : parser.events) {
    if (!region_ids.count(e.region.name)) {
      res2.error(e.region, "unknown region '" + e.region.name + "'");
      continue;
    }
    event_ids.insert(e.id);
    doc.events.push_back({e.id, e.region.name});
  }
  for (const auto& b : parser.behaviors) {
    BehaviorDecl d;
    d.id = b.id;
    bool ok = true;
    auto known = [&](const detail::Named& n) {
      if (event_ids.count(n.name)) return true;
      res2.error(n, "unknown event '" + n.name + "'");
      return false;
    };
    for (const auto& s : b.starts) {
      ok = known(s) && ok;
      d.starts.push_back(s.name);
    }
    for (const auto& e : b.edges) {
      ok = known(e.from) && ok;
      ok = known(e.to) && ok;
      d.edges.push_back({e.from.name, e.to.name, e.min, e.max});
    }
    if (ok) doc.behaviors.push_back(std::move(d));
  }

  std::stable_sort(diags.begin(), diags.end(), [](const ParseDiagnostic& a, const ParseDiagnostic& b) {
    return std::tie(a.line, a.column) < std::tie(b.line, b.column);
  });
  if (std::none_of(diags.begin(), diags.end(),
                   [](const ParseDiagnostic& d) { return d.severity == ParseDiagnostic::Level::error; })) {
    canonicalize(doc);
    result.document = std::move(doc);
  }
  return result;
}

inline ParseResult parse(std::string_view text) { return parse(SourceUnit{std::string(text)}); }

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline int guard_prec(const Guard& g) {
  switch (g.op) {
    case Guard::Op::any: return 1;
    case Guard::Op::all: return 2;
    default: return 3;
  }
}

inline void write_guard(std::ostream& os, const Guard& g) {
  switch (g.op) {
    case Guard::Op::flag_eq: os << g.flag.path() << " == " << g.value; return;
    case Guard::Op::storage_ge: os << g.storage.path() << " >= " << g.bound; return;
    case Guard::Op::storage_lt: os << g.storage.path() << " < " << g.bound; return;
    case Guard::Op::negate: {
      os << "not ";
      bool paren = guard_prec(g.args[0]) < 3;
      if (paren) os << '(';
      write_guard(os, g.args[0]);
      if (paren) os << ')';
      return;
    }
    default: {
      int p = guard_prec(g);
      bool lp = guard_prec(g.args[0]) < p;
      bool rp = guard_prec(g.args[1]) <= p;
      if (lp) os << '(';
      write_guard(os, g.args[0]);
      if (lp) os << ')';
      os << (g.op == Guard::Op::all ? " and " : " or ");
      if (rp) os << '(';
      write_guard(os, g.args[1]);
      if (rp) os << ')';
    }
  }
}

inline void write_machine(std::ostream& os, const Machine& m, int depth) {
  const std::string pad(2 * depth, ' ');
  os << pad << "machine " << m.id << " {\n";
  if (!m.stages.empty()) {
    os << pad << "  stages: ";
    for (size_t i = 0; i < m.stages.size(); ++i) os << (i ? ", " : "") << to_string(m.stages[i]);
    os << '\n';
  }
  for (const auto& f : m.flags) {
    os << pad << "  flag " << f.id << " { ";
    for (const auto& v : f.values) os << v << ", ";
    os << "init " << f.initial << " }\n";
  }
  if (m.storage) {
    os << pad << "  storage " << m.storage->id << " cap ";
    if (m.storage->capacity) os << *m.storage->capacity;
    else os << "inf";
    if (m.storage->level != 0) os << " level " << m.storage->level;
    os << '\n';
  }
  for (const auto& s : m.submachines) write_machine(os, s, depth + 1);
  os << pad << "}\n";
}

inline std::string element_text(const Element& e) {
  return to_string(e);
}

}  // namespace detail

inline std::string serialize_guard(const Guard& g) {
  std::ostringstream os;
  detail::write_guard(os, g);
  return os.str();
}

/// Canonical text: declarations sorted by (kind, name), two-space indent, one
/// statement per line, LF endings.
inline std::string serialize(const Document& input) {
  Document doc = input;
  canonicalize(doc);
  std::ostringstream os;
  for (const auto& m : doc.model.machines) detail::write_machine(os, m, 0);
  for (const auto& f : doc.model.flows) os << "flow " << f.from.path() << " -> " << f.to.path() << '\n';
  for (const auto& t : doc.model.triggers) {
    os << "trigger " << t.from.path() << " -> " << t.to.path();
    if (t.guard) {
      os << " when ";
      detail::write_guard(os, *t.guard);
    }
    for (size_t i = 0; i < t.sets.size(); ++i)
      os << (i ? ", " : " set ") << t.sets[i].flag.path() << " = " << t.sets[i].value;
    if (t.payload) os << " payload " << *t.payload;
    os << '\n';
  }
  for (const auto& c : doc.model.choices) {
    os << "choice " << c.id << " at " << c.at.path() << " { ";
    for (size_t i = 0; i < c.branches.size(); ++i)
      os << (i ? ", " : "") << c.branches[i].label << " -> " << c.branches[i].target.path();
    os << " }\n";
  }
  for (const auto& r : doc.regions) {
    os << "region " << r.id << " { ";
    for (size_t i = 0; i < r.elements.size(); ++i) os << (i ? ", " : "") << detail::element_text(r.elements[i]);
    os << " anchor " << detail::element_text(r.anchor) << " }\n";
  }
  for (const auto& e : doc.events) os << "event " << e.id << " on " << e.region << '\n';
  for (const auto& b : doc.behaviors) {
    os << "behavior " << b.id << " {\n";
    for (const auto& s : b.starts) os << "  start " << s << '\n';
    for (const auto& e : b.edges) {
      os << "  " << e.from << " -> " << e.to;
      if (e.min_delay != 0 || e.max_delay) {
        os << " delay [" << e.min_delay << ", ";
        if (e.max_delay) os << *e.max_delay;
        else os << "inf";
        os << ']';
      }
      os << '\n';
    }
    os << "}\n";
  }
  return os.str();
}

inline std::string serialize(const StaticModel& model) {
  Document d;
  d.model = model;
  return serialize(d);
}

}  // namespace tmk
