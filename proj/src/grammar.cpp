#include "xlate/grammar.hpp"

#include <json.hpp>

#include <cctype>
#include <fstream>
#include <functional>
#include <sstream>

namespace xlate {

PegExprPtr
PegExpr::seq(std::vector<PegExprPtr> children)
{
  auto e = std::make_shared<PegExpr>();
  e->type = ExprType::Seq;
  e->children = std::move(children);
  return e;
}

PegExprPtr
PegExpr::choice(std::vector<PegExprPtr> alternatives)
{
  auto e = std::make_shared<PegExpr>();
  e->type = ExprType::Choice;
  e->children = std::move(alternatives);
  return e;
}

namespace {

PegExprPtr
unary(ExprType type, PegExprPtr child)
{
  auto e = std::make_shared<PegExpr>();
  e->type = type;
  e->children.push_back(std::move(child));
  return e;
}

} // namespace

PegExprPtr
PegExpr::repeat0(PegExprPtr child)
{
  return unary(ExprType::Repeat0, std::move(child));
}

PegExprPtr
PegExpr::repeat1(PegExprPtr child)
{
  return unary(ExprType::Repeat1, std::move(child));
}

PegExprPtr
PegExpr::optional(PegExprPtr child)
{
  return unary(ExprType::Optional, std::move(child));
}

PegExprPtr
PegExpr::literal(std::string text)
{
  auto e = std::make_shared<PegExpr>();
  e->type = ExprType::Literal;
  e->text = std::move(text);
  return e;
}

PegExprPtr
PegExpr::pattern(std::string source)
{
  auto e = std::make_shared<PegExpr>();
  e->type = ExprType::Pattern;
  e->text = std::move(source);
  return e;
}

PegExprPtr
PegExpr::ref(std::string name)
{
  auto e = std::make_shared<PegExpr>();
  e->type = ExprType::Ref;
  e->text = std::move(name);
  return e;
}

bool
is_layout_literal(std::string_view text)
{
  return text == "$NEWLINE" || text == "$INDENT" || text == "$DEDENT";
}

char
layout_mark(std::string_view literal)
{
  if (literal == "$NEWLINE")
    return kNewlineMark;
  if (literal == "$INDENT")
    return kIndentMark;
  if (literal == "$DEDENT")
    return kDedentMark;
  return '\0';
}

const Production*
GrammarDef::find(std::string_view name) const
{
  auto it = index.find(name);
  if (it == index.end())
    return nullptr;
  return &productions[it->second];
}

int
GrammarDef::start_index() const
{
  auto it = index.find(start_symbol);
  return it == index.end() ? -1 : it->second;
}

namespace {

using Json = nlohmann::ordered_json;

PegExprPtr
parse_expr(const Json& j, const std::string& where)
{
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    throw SchemaError(where + ": expression must be an object with a type");
  const std::string type = j["type"];

  auto child_of = [&](const char* key) {
    if (!j.contains(key))
      throw SchemaError(where + ": " + type + " needs '" + key + "'");
    return parse_expr(j[key], where);
  };
  auto list_of = [&](const char* key) {
    std::vector<PegExprPtr> out;
    if (!j.contains(key) || !j[key].is_array())
      throw SchemaError(where + ": " + type + " needs array '" + key + "'");
    for (const auto& c : j[key])
      out.push_back(parse_expr(c, where));
    return out;
  };
  auto string_of = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string())
      throw SchemaError(where + ": " + type + " needs string '" + key + "'");
    return j[key].get<std::string>();
  };

  if (type == "seq")
    return PegExpr::seq(list_of("children"));
  if (type == "choice") {
    const char* key = j.contains("alternatives") ? "alternatives" : "children";
    return PegExpr::choice(list_of(key));
  }
  if (type == "repeat0")
    return PegExpr::repeat0(child_of("child"));
  if (type == "repeat1")
    return PegExpr::repeat1(child_of("child"));
  if (type == "optional")
    return PegExpr::optional(child_of("child"));
  if (type == "literal")
    return PegExpr::literal(string_of("text"));
  if (type == "pattern")
    return PegExpr::pattern(string_of("pattern"));
  if (type == "ref")
    return PegExpr::ref(string_of("name"));
  throw SchemaError(where + ": unknown expression type '" + type + "'");
}

bool
is_terminal_expr(const PegExpr& e)
{
  switch (e.type) {
    case ExprType::Literal:
      return !is_layout_literal(e.text);
    case ExprType::Pattern:
      return true;
    case ExprType::Choice:
      for (const auto& c : e.children) {
        if (!is_terminal_expr(*c))
          return false;
      }
      return !e.children.empty();
    default:
      return false;
  }
}

bool
word_char(char c)
{
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Resolution needs to mutate expression nodes that are shared as const; the
// grammar owns every node exclusively during finalization.
PegExpr&
mut(const PegExprPtr& e)
{
  return const_cast<PegExpr&>(*e);
}

void
resolve(GrammarDef& g,
        const PegExprPtr& e,
        const std::string& where,
        std::set<std::string, std::less<>>& literals)
{
  switch (e->type) {
    case ExprType::Ref: {
      auto it = g.index.find(e->text);
      if (it == g.index.end())
        throw DanglingReference("production '" + where +
                                "' references undefined '" + e->text + "'");
      mut(e).production = it->second;
      break;
    }
    case ExprType::Choice:
      if (e->children.empty())
        throw EmptyChoice("production '" + where + "' has an empty choice");
      break;
    case ExprType::Literal:
      if (e->text.empty())
        throw SchemaError("production '" + where + "' has an empty literal");
      if (!is_layout_literal(e->text))
        literals.insert(e->text);
      break;
    case ExprType::Pattern:
      if (!e->regex) {
        try {
          mut(e).regex = std::make_shared<const std::regex>(
            e->text, std::regex::ECMAScript | std::regex::optimize);
        } catch (const std::regex_error& err) {
          throw SchemaError("production '" + where + "' has a bad pattern: " +
                            err.what());
        }
      }
      break;
    default:
      break;
  }
  for (const auto& c : e->children)
    resolve(g, c, where, literals);
}

void
check_repeats(const GrammarDef& g, const PegExpr& e, const std::string& where)
{
  if ((e.type == ExprType::Repeat0 || e.type == ExprType::Repeat1) &&
      nullable(g, *e.children[0]))
    throw SchemaError("production '" + where +
                      "' repeats an expression that can match empty");
  for (const auto& c : e.children)
    check_repeats(g, *c, where);
}

void
collect_left_refs(const GrammarDef& g, const PegExpr& e, std::set<int>& out)
{
  switch (e.type) {
    case ExprType::Ref:
      out.insert(e.production);
      return;
    case ExprType::Seq:
      for (const auto& c : e.children) {
        collect_left_refs(g, *c, out);
        if (!nullable(g, *c))
          return;
      }
      return;
    case ExprType::Choice:
      for (const auto& c : e.children)
        collect_left_refs(g, *c, out);
      return;
    case ExprType::Repeat0:
    case ExprType::Repeat1:
    case ExprType::Optional:
      collect_left_refs(g, *e.children[0], out);
      return;
    default:
      return;
  }
}

} // namespace

bool
nullable(const GrammarDef& grammar, const PegExpr& expr)
{
  // Productions are assumed non-left-recursive when this is called from the
  // PDA; during finalization a visited set guards the recursion.
  thread_local std::vector<int> visiting;
  switch (expr.type) {
    case ExprType::Literal:
      return false;
    case ExprType::Pattern:
      return false;
    case ExprType::Repeat0:
    case ExprType::Optional:
      return true;
    case ExprType::Repeat1:
      return nullable(grammar, *expr.children[0]);
    case ExprType::Seq:
      for (const auto& c : expr.children) {
        if (!nullable(grammar, *c))
          return false;
      }
      return true;
    case ExprType::Choice:
      for (const auto& c : expr.children) {
        if (nullable(grammar, *c))
          return true;
      }
      return false;
    case ExprType::Ref: {
      if (expr.production < 0)
        return false;
      for (int v : visiting) {
        if (v == expr.production)
          return false;
      }
      const auto& p = grammar.productions[expr.production];
      if (p.shape == NodeShape::Token)
        return false;
      visiting.push_back(expr.production);
      bool r = nullable(grammar, *p.expr);
      visiting.pop_back();
      return r;
    }
  }
  return false;
}

void
check_left_recursion(const GrammarDef& grammar)
{
  const auto n = grammar.productions.size();
  std::vector<std::set<int>> edges(n);
  for (std::size_t i = 0; i < n; ++i)
    collect_left_refs(grammar, *grammar.productions[i].expr, edges[i]);

  // 0 = unvisited, 1 = on stack, 2 = done
  std::vector<int> state(n, 0);
  std::function<void(int)> visit = [&](int v) {
    state[v] = 1;
    for (int w : edges[v]) {
      if (state[w] == 1)
        throw LeftRecursion("production '" + grammar.productions[w].name +
                            "' is left-recursive");
      if (state[w] == 0)
        visit(w);
    }
    state[v] = 2;
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (state[i] == 0)
      visit(static_cast<int>(i));
  }
}

void
finalize_grammar(GrammarDef& g)
{
  g.index.clear();
  for (std::size_t i = 0; i < g.productions.size(); ++i) {
    const auto& p = g.productions[i];
    if (!p.expr)
      throw SchemaError("production '" + p.name + "' has no expression");
    if (!g.index.emplace(p.name, static_cast<int>(i)).second)
      throw SchemaError("duplicate production '" + p.name + "'");
  }
  if (g.start_symbol.empty() || !g.find(g.start_symbol))
    throw DanglingReference("start symbol '" + g.start_symbol +
                            "' has no production");

  std::set<std::string, std::less<>> literals;
  for (auto& p : g.productions) {
    resolve(g, p.expr, p.name, literals);
    if (p.shape == NodeShape::Node && is_terminal_expr(*p.expr))
      p.shape = NodeShape::Token;
    if (p.shape == NodeShape::Fold) {
      const auto& e = *p.expr;
      if (e.type != ExprType::Seq || e.children.size() != 2 ||
          e.children[0]->type != ExprType::Ref ||
          e.children[1]->type != ExprType::Repeat0)
        throw SchemaError("fold production '" + p.name +
                          "' must have the shape seq(ref, repeat0(...))");
    }
    if (p.trailer && p.shape != NodeShape::Node)
      throw SchemaError("trailer production '" + p.name +
                        "' must be a plain node");
  }

  for (const auto& lit : literals) {
    if (word_char(lit.back()))
      g.word_tokens.insert(lit);
  }
  g.longer_literals.clear();
  for (const auto& lit : literals) {
    for (const auto& other : literals) {
      if (other.size() > lit.size() && other.compare(0, lit.size(), lit) == 0 &&
          !word_char(lit.back()))
        g.longer_literals[lit].push_back(other);
    }
  }

  for (const auto& p : g.productions)
    check_repeats(g, *p.expr, p.name);
  check_left_recursion(g);
}

GrammarDef
load_grammar(std::string_view document)
{
  Json j;
  try {
    j = Json::parse(document);
  } catch (const Json::parse_error& e) {
    throw SchemaError(std::string("grammar document is not valid JSON: ") +
                      e.what());
  }
  if (!j.is_object())
    throw SchemaError("grammar document must be an object");
  for (const char* key : {"name", "start", "rules"}) {
    if (!j.contains(key))
      throw SchemaError(std::string("grammar document lacks '") + key + "'");
  }
  if (!j["rules"].is_object() || j["rules"].empty())
    throw SchemaError("'rules' must be a non-empty object");

  GrammarDef g;
  g.language_name = j["name"].get<std::string>();
  g.start_symbol = j["start"].get<std::string>();
  const std::string layout = j.value("layout", std::string("freeform"));
  if (layout == "freeform")
    g.layout_policy = LayoutPolicy::Freeform;
  else if (layout == "indent")
    g.layout_policy = LayoutPolicy::IndentationSensitive;
  else
    throw SchemaError("unknown layout '" + layout + "'");
  g.line_comment = j.value("comment", std::string());
  for (const auto& v : j.value("value_tokens", Json::array()))
    g.value_tokens.insert(v.get<std::string>());
  for (const auto& v : j.value("word_tokens", Json::array()))
    g.word_tokens.insert(v.get<std::string>());

  for (const auto& [name, body] : j["rules"].items()) {
    Production p;
    p.name = name;
    p.expr = parse_expr(body, name);
    const bool hidden = body.value("hidden", !name.empty() && name[0] == '_');
    if (body.value("fold", false))
      p.shape = NodeShape::Fold;
    else if (hidden)
      p.shape = NodeShape::Hidden;
    p.trailer = body.value("trailer", false);
    g.productions.push_back(std::move(p));
  }
  finalize_grammar(g);
  return g;
}

GrammarDef
load_grammar_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw SchemaError("cannot open grammar file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_grammar(ss.str());
}

bool
terminal_matches(const GrammarDef& grammar, const PegExpr& expr,
                 std::string_view text)
{
  switch (expr.type) {
    case ExprType::Literal:
      return expr.text == text;
    case ExprType::Pattern:
      return std::regex_match(text.begin(), text.end(), *expr.regex);
    case ExprType::Choice:
      for (const auto& c : expr.children) {
        if (terminal_matches(grammar, *c, text))
          return true;
      }
      return false;
    case ExprType::Ref:
      return terminal_matches(grammar, *grammar.at(expr.production).expr, text);
    default:
      return false;
  }
}

const std::string*
single_literal(const Production& production)
{
  if (production.shape == NodeShape::Token &&
      production.expr->type == ExprType::Literal)
    return &production.expr->text;
  return nullptr;
}

} // namespace xlate
