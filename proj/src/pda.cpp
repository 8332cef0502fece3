#include "xlate/pda.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <unordered_map>

namespace xlate {

PdaEvent
PdaEvent::from(const TraversalToken& token)
{
  PdaEvent e;
  switch (token.type) {
    case TokenKind::EnterNode:
      e.type = EventType::Enter;
      break;
    case TokenKind::ExitNode:
      e.type = EventType::Exit;
      break;
    case TokenKind::Token:
      e.type = EventType::Token;
      break;
  }
  e.kind = token.kind;
  e.text = token.text;
  e.tag = token.tag;
  return e;
}

PdaEvent
PdaEvent::slot(int id)
{
  PdaEvent e;
  e.type = EventType::Slot;
  e.slot_id = id;
  return e;
}

PdaEvent
PdaEvent::end()
{
  PdaEvent e;
  e.type = EventType::End;
  return e;
}

std::vector<PdaEvent>
events_of(const std::vector<TraversalToken>& tokens)
{
  std::vector<PdaEvent> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens)
    out.push_back(PdaEvent::from(t));
  return out;
}

std::string
to_string(const InstructionRecord& r)
{
  std::ostringstream os;
  switch (r.type) {
    case InstrType::ChoseAlternative:
      os << "ChoseAlternative " << r.kind << ' ' << r.alternative;
      break;
    case InstrType::MatchedToken:
      os << "MatchedToken " << r.kind;
      if (r.layout)
        break;
      if (r.text)
        os << " \"" << *r.text << '"';
      else
        os << " <absent>";
      if (r.flagged)
        os << " !";
      break;
    case InstrType::EnteredRepeat:
      os << "EnteredRepeat " << r.kind;
      break;
    case InstrType::ExitedRepeat:
      os << "ExitedRepeat " << r.kind;
      break;
    case InstrType::OpenedNode:
      os << "OpenedNode " << r.kind;
      break;
    case InstrType::ClosedNode:
      os << "ClosedNode " << r.kind;
      break;
  }
  return os.str();
}

std::vector<InstructionRecord>
PdaConfig::records() const
{
  std::vector<InstructionRecord> out;
  out.reserve(log_length());
  for (auto c = log; c; c = c->prev)
    out.push_back(c->record);
  std::reverse(out.begin(), out.end());
  return out;
}

std::optional<StackPtr>
PdaConfig::obligation(int slot_id) const
{
  for (auto o = suspended; o; o = o->next) {
    if (o->slot_id == slot_id)
      return o->stack;
  }
  return std::nullopt;
}

namespace {

LogPtr
append(const LogPtr& log, InstructionRecord rec)
{
  auto c = std::make_shared<LogCell>();
  c->record = std::move(rec);
  c->prev = log;
  c->length = log ? log->length + 1 : 1;
  return c;
}

InstructionRecord
record(InstrType type, std::string kind, int alternative = -1)
{
  InstructionRecord r;
  r.type = type;
  r.kind = std::move(kind);
  r.alternative = alternative;
  return r;
}

bool
same_stack(const StackPtr& a, const StackPtr& b)
{
  auto x = a;
  auto y = b;
  while (x && y) {
    if (x == y)
      return true;
    if (x->hash != y->hash || x->depth != y->depth || !(x->symbol == y->symbol))
      return false;
    x = x->next;
    y = y->next;
  }
  return !x && !y;
}

bool
is_anonymous(const PdaEvent& ev)
{
  return ev.text && ev.kind == *ev.text;
}

// A missing terminal with no kind stands for any terminal.
bool
is_wildcard(const PdaEvent& ev)
{
  return !ev.text && ev.kind.empty();
}

// Layout terminal kinds as they appear in reconstructed trees.
std::string
layout_kind(std::string_view literal)
{
  return std::string(literal);
}

// Max expansion depth without consuming input. Grammars without left
// recursion stay far below this; it only guards against pathological input.
constexpr int kMaxDepth = 4000;

} // namespace

struct Pda::Out
{
  std::vector<PdaConfig> configs;
  ObligationPtr suspended;

  void add(PdaState state, StackPtr stack, LogPtr log)
  {
    configs.push_back({state, std::move(stack), std::move(log), suspended});
  }
};

Pda::Pda(const GrammarDef& grammar, std::string_view start)
  : grammar_(&grammar)
{
  check_left_recursion(grammar);
  const std::string_view name = start.empty() ? grammar.start_symbol : start;
  auto it = grammar.index.find(name);
  if (it == grammar.index.end())
    throw DanglingReference("no production named '" + std::string(name) + "'");
  start_ = it->second;

  std::function<void(const PegExprPtr&)> visit = [&](const PegExprPtr& e) {
    if (e->type == ExprType::Repeat1 && !twins_.count(e.get())) {
      auto twin = std::make_shared<PegExpr>();
      twin->type = ExprType::Repeat0;
      twin->children = e->children;
      twins_.emplace(e.get(), std::move(twin));
    }
    for (const auto& c : e->children)
      visit(c);
  };
  const auto n = grammar.productions.size();
  trailers_.resize(n);
  fold_tail_.resize(n, nullptr);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = grammar.productions[i];
    visit(p.expr);
    if (p.shape != NodeShape::Fold)
      continue;
    const PegExpr* tail = p.expr->children[1]->children[0].get();
    fold_tail_[i] = tail;
    auto consider = [&](const PegExpr& e) {
      if (e.type == ExprType::Ref && grammar.at(e.production).trailer)
        trailers_[i].push_back(e.production);
    };
    if (tail->type == ExprType::Choice) {
      for (const auto& c : tail->children)
        consider(*c);
    } else {
      consider(*tail);
    }
  }
}

Pda
build_pda(const GrammarDef& grammar, std::string_view start)
{
  return Pda(grammar, start);
}

StackPtr
Pda::push(StackPtr stack, StackSymbol sym) const
{
  auto c = std::make_shared<StackCell>();
  std::size_t h = std::hash<const void*>{}(sym.expr);
  h ^= static_cast<std::size_t>(sym.production) * 0x9e3779b97f4a7c15ull;
  h ^= static_cast<std::size_t>(sym.type) << 7;
  const std::size_t below = stack ? stack->hash : 0;
  c->hash = h ^ (below + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2));
  c->depth = stack ? stack->depth + 1 : 1;
  c->symbol = sym;
  c->next = std::move(stack);
  return c;
}

const PegExpr*
Pda::repeat_tail(const PegExpr* repeat1) const
{
  return twins_.at(repeat1).get();
}

PdaConfig
Pda::initial() const
{
  PdaConfig c;
  c.stack = push(nullptr, {StackSymbol::NonTerminal, start_, nullptr});
  return c;
}

void
Pda::expand(const StackPtr& stack, const LogPtr& log, const PdaEvent& ev,
            Out& out, int depth) const
{
  if (depth > kMaxDepth)
    return;
  if (!stack) {
    if (ev.type == EventType::End)
      out.add(PdaState::Accept, nullptr, log);
    return;
  }
  const StackSymbol sym = stack->symbol;
  const StackPtr& rest = stack->next;
  const GrammarDef& g = *grammar_;

  switch (sym.type) {
    case StackSymbol::Close:
      if (ev.type == EventType::Exit) {
        auto r = record(InstrType::ClosedNode, g.at(sym.production).name);
        r.tag = ev.tag;
        out.add(PdaState::Start, rest, append(log, std::move(r)));
      }
      return;

    case StackSymbol::NonTerminal: {
      const Production& p = g.at(sym.production);
      const PegExpr* body = p.expr.get();
      switch (p.shape) {
        case NodeShape::Hidden:
          expand(push(rest, {StackSymbol::Expr, sym.production, body}), log, ev,
                 out, depth + 1);
          return;
        case NodeShape::Token: {
          if (ev.type != EventType::Token)
            return;
          bool ok = false;
          if (ev.kind == p.name)
            ok = !ev.text || terminal_matches(g, *body, *ev.text);
          else if (is_anonymous(ev))
            ok = terminal_matches(g, *body, *ev.text);
          else
            ok = is_wildcard(ev);
          if (!ok)
            return;
          auto r = record(InstrType::MatchedToken, p.name);
          r.tag = ev.tag;
          r.text = ev.text;
          if (!r.text) {
            if (const auto* lit = single_literal(p))
              r.text = *lit;
            else
              r.flagged = true;
          }
          out.add(PdaState::Start, rest, append(log, std::move(r)));
          return;
        }
        case NodeShape::Node:
          if (ev.type == EventType::Enter && ev.kind == p.name) {
            auto s = push(rest, {StackSymbol::Close, sym.production, nullptr});
            s = push(std::move(s), {StackSymbol::Expr, sym.production, body});
            auto r = record(InstrType::OpenedNode, p.name);
            r.tag = ev.tag;
            out.add(PdaState::Start, std::move(s), append(log, std::move(r)));
          }
          return;
        case NodeShape::Fold: {
          if (ev.type == EventType::Enter) {
            auto open = [&](int kind_prod, const PegExpr* tail) {
              auto s = push(rest, {StackSymbol::Close, kind_prod, nullptr});
              s = push(std::move(s), {StackSymbol::Expr, kind_prod, tail});
              s = push(std::move(s), {StackSymbol::NonTerminal, sym.production, nullptr});
              auto r = record(InstrType::OpenedNode, g.at(kind_prod).name);
              r.tag = ev.tag;
              out.add(PdaState::Start, std::move(s), append(log, std::move(r)));
            };
            if (ev.kind == p.name)
              open(sym.production, fold_tail_[sym.production]);
            for (int t : trailers_[sym.production]) {
              if (ev.kind == g.at(t).name)
                open(t, g.at(t).expr.get());
            }
          }
          const int head = body->children[0]->production;
          expand(push(rest, {StackSymbol::NonTerminal, head, nullptr}), log, ev,
                 out, depth + 1);
          return;
        }
      }
      return;
    }

    case StackSymbol::Expr:
      break;
  }

  const PegExpr& e = *sym.expr;
  const int prod = sym.production;
  auto sub = [&](const PegExpr* x) {
    return StackSymbol{StackSymbol::Expr, prod, x};
  };
  switch (e.type) {
    case ExprType::Seq: {
      StackPtr s = rest;
      for (auto it = e.children.rbegin(); it != e.children.rend(); ++it)
        s = push(std::move(s), sub(it->get()));
      expand(s, log, ev, out, depth + 1);
      return;
    }
    case ExprType::Choice:
      for (std::size_t i = 0; i < e.children.size(); ++i) {
        expand(push(rest, sub(e.children[i].get())),
               append(log, record(InstrType::ChoseAlternative, g.at(prod).name,
                                  static_cast<int>(i))),
               ev, out, depth + 1);
      }
      return;
    case ExprType::Repeat0:
    case ExprType::Repeat1: {
      const PegExpr* again = e.type == ExprType::Repeat0 ? &e : repeat_tail(&e);
      auto s = push(rest, sub(again));
      s = push(std::move(s), sub(e.children[0].get()));
      expand(s, append(log, record(InstrType::EnteredRepeat, g.at(prod).name)),
             ev, out, depth + 1);
      if (e.type == ExprType::Repeat0)
        expand(rest, append(log, record(InstrType::ExitedRepeat, g.at(prod).name)),
               ev, out, depth + 1);
      return;
    }
    case ExprType::Optional:
      expand(push(rest, sub(e.children[0].get())), log, ev, out, depth + 1);
      expand(rest, log, ev, out, depth + 1);
      return;
    case ExprType::Ref:
      expand(push(rest, {StackSymbol::NonTerminal, e.production, nullptr}), log,
             ev, out, depth + 1);
      return;
    case ExprType::Literal: {
      if (is_layout_literal(e.text)) {
        auto r = record(InstrType::MatchedToken, layout_kind(e.text));
        r.layout = true;
        if (ev.type == EventType::Token && ev.kind == e.text)
          out.add(PdaState::Start, rest, append(log, r));
        expand(rest, append(log, r), ev, out, depth + 1);
        return;
      }
      if (ev.type != EventType::Token)
        return;
      const bool ok = (ev.kind == e.text && (!ev.text || *ev.text == e.text)) ||
                      is_wildcard(ev);
      if (!ok)
        return;
      auto r = record(InstrType::MatchedToken, e.text);
      r.text = e.text;
      r.tag = ev.tag;
      out.add(PdaState::Start, rest, append(log, std::move(r)));
      return;
    }
    case ExprType::Pattern: {
      if (ev.type != EventType::Token)
        return;
      const bool ok =
        (ev.kind == e.text &&
         (!ev.text || std::regex_match(*ev.text, *e.regex))) ||
        is_wildcard(ev);
      if (!ok)
        return;
      auto r = record(InstrType::MatchedToken, e.text);
      r.text = ev.text;
      r.flagged = !ev.text;
      r.tag = ev.tag;
      out.add(PdaState::Start, rest, append(log, std::move(r)));
      return;
    }
  }
}

std::vector<PdaConfig>
Pda::step(const PdaConfig& config, const PdaEvent& event) const
{
  if (config.state == PdaState::Error)
    return {config};
  if (config.state == PdaState::Accept) {
    if (event.type == EventType::End)
      return {config};
    PdaConfig err = config;
    err.state = PdaState::Error;
    return {err};
  }
  if (event.type == EventType::Slot) {
    PdaConfig c = config;
    auto o = std::make_shared<Obligation>();
    o->slot_id = event.slot_id;
    o->stack = config.stack;
    o->next = config.suspended;
    c.suspended = std::move(o);
    return {c};
  }
  Out out;
  out.suspended = config.suspended;
  expand(config.stack, config.log, event, out, 0);
  if (out.configs.empty()) {
    PdaConfig err = config;
    err.state = PdaState::Error;
    return {err};
  }
  return std::move(out.configs);
}

Verdict
Pda::feed(const std::vector<PdaConfig>& configs,
          const std::vector<PdaEvent>& events) const
{
  std::vector<PdaConfig> current;
  for (const auto& c : configs) {
    if (c.state != PdaState::Error)
      current.push_back(c);
  }
  for (const auto& ev : events) {
    if (current.empty())
      break;
    std::vector<PdaConfig> next;
    std::unordered_multimap<std::size_t, std::size_t> seen;
    for (const auto& c : current) {
      for (auto& r : step(c, ev)) {
        if (r.state == PdaState::Error)
          continue;
        const std::size_t h = (r.stack ? r.stack->hash : 0) ^
                              static_cast<std::size_t>(r.state);
        bool dup = false;
        auto range = seen.equal_range(h);
        for (auto it = range.first; it != range.second && !dup; ++it) {
          const auto& other = next[it->second];
          dup = other.state == r.state && same_stack(other.stack, r.stack);
        }
        if (dup || next.size() >= kMaxConfigs)
          continue;
        seen.emplace(h, next.size());
        next.push_back(std::move(r));
      }
    }
    current = std::move(next);
  }
  Verdict v;
  if (current.empty()) {
    v.rejected = true;
    PdaConfig err = configs.empty() ? initial() : configs.front();
    err.state = PdaState::Error;
    v.configs.push_back(std::move(err));
    return v;
  }
  v.configs = std::move(current);
  return v;
}

std::optional<PdaConfig>
Pda::accept(const std::vector<TraversalToken>& tokens) const
{
  auto events = events_of(tokens);
  events.push_back(PdaEvent::end());
  auto v = feed({initial()}, events);
  for (const auto& c : v.configs) {
    if (c.state == PdaState::Accept)
      return c;
  }
  return std::nullopt;
}

Verdict
validate_increment(const Pda& pda,
                   const std::vector<PdaConfig>& configs,
                   const std::vector<PdaEvent>& events)
{
  return pda.feed(configs, events);
}

AstPtr
reconstruct_parse_tree(const PdaConfig& config)
{
  if (config.state != PdaState::Accept)
    throw IncompleteLog("log does not belong to an accepting run");
  struct Frame
  {
    std::string kind;
    std::int32_t tag = -1;
    std::vector<AstPtr> children;
  };
  std::vector<Frame> frames(1);
  for (const auto& r : config.records()) {
    switch (r.type) {
      case InstrType::OpenedNode:
        frames.push_back({r.kind, r.tag, {}});
        break;
      case InstrType::MatchedToken:
        frames.back().children.push_back(AstNode::make_terminal(
          r.kind, r.layout ? std::optional<std::string>("") : r.text,
          std::nullopt, r.tag));
        break;
      case InstrType::ClosedNode: {
        if (frames.size() < 2)
          throw IncompleteLog("unbalanced node records");
        Frame f = std::move(frames.back());
        frames.pop_back();
        auto node = std::make_shared<AstNode>();
        node->kind = std::move(f.kind);
        node->children = std::move(f.children);
        node->tag = f.tag;
        frames.back().children.push_back(std::move(node));
        break;
      }
      default:
        break;
    }
  }
  if (frames.size() != 1)
    throw IncompleteLog("unbalanced node records");
  auto& top = frames.front().children;
  if (top.size() == 1 && !top[0]->terminal)
    return top[0];
  return AstNode::make_node("", std::move(top));
}

std::string
dump_log(const PdaConfig& config)
{
  std::string out;
  for (const auto& r : config.records()) {
    out += to_string(r);
    out += '\n';
  }
  return out;
}

} // namespace xlate
