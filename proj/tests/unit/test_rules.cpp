#include "fixtures.hpp"
#include "xlate/parser.hpp"
#include "xlate/rules.hpp"

#include <doctest.h>

#include <algorithm>
#include <functional>
#include <random>

using namespace xlate;

namespace {

const char* kComprehension =
  R"x((MatchExpand
  (fragment (py.list_comprehension (str "[") .
    (py.for_in_clause (str "for") (py.identifier _str_) (str "in") .) (str "]")))
  (fragment (js.call_expression
    (js.member_expression
      (js.call_expression
        (js.member_expression (js.identifier (str "Array")) (str ".") (js.identifier (str "from")))
        (js.arguments (str "(") .2 (str ")")))
      (str ".") (js.identifier (str "map")))
    (js.arguments (str "(")
      (js.arrow_function (js.formal_parameters (str "(") (js.identifier _str1_) (str ")"))
        (str "=>") .1)
      (str ")"))))))x";

AstPtr
arith(const char* text)
{
  return parse_source(fx::arithmetic(), text);
}

AstPtr
py_expr(const char* text)
{
  return parse_from(fx::python(), text, "_expression");
}

int
count_refs(const std::vector<Pattern>& ps)
{
  int n = 0;
  for (const auto& p : ps)
    n += (p.is_capture() ? 1 : 0) + count_refs(p.children);
  return n;
}

bool
contains_node(const AstNode& root, const AstNode* needle)
{
  if (&root == needle)
    return true;
  return std::any_of(root.children.begin(), root.children.end(),
                     [&](const AstPtr& c) { return contains_node(*c, needle); });
}

// Random well-formed rules for round-trip and ordering properties.
struct RuleGen
{
  std::mt19937 rng;
  int captures = 0;
  int templates = 0;

  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

  Pattern matcher(int depth)
  {
    Pattern p;
    const int roll = depth == 0 ? 0 : pick(7);
    switch (roll) {
      case 0:
      case 1: {
        p.type = pick(4) == 0 ? PatternType::NonTerminalTpl : PatternType::NonTerminal;
        if (p.type == PatternType::NonTerminalTpl)
          ++templates;
        if (p.type == PatternType::NonTerminal) {
          p.lang = "py";
          p.symbol = std::string(1, static_cast<char>('a' + pick(5)));
        }
        const int n = depth >= 3 ? 0 : pick(4);
        bool star = false;
        for (int i = 0; i < n; ++i) {
          auto c = matcher(depth + 1);
          if (c.type == PatternType::Sequence) {
            if (star) {
              --captures;
              continue;
            }
            star = true;
          }
          p.children.push_back(std::move(c));
        }
        break;
      }
      case 2:
        p.type = PatternType::Str;
        p.text = pick(2) ? "+" : "say \"hi\"\\";
        break;
      case 3:
        p.type = pick(2) ? PatternType::StrTpl : PatternType::ValTpl;
        ++templates;
        break;
      case 4:
        p.type = pick(2) ? PatternType::Val : PatternType::NoStr;
        p.text = p.type == PatternType::Val ? "'x'" : "";
        break;
      case 5:
        p.type = PatternType::Single;
        ++captures;
        break;
      default:
        p.type = PatternType::Sequence;
        ++captures;
        break;
    }
    return p;
  }

  Rule rule(int order)
  {
    captures = templates = 0;
    std::vector<Pattern> src{matcher(0)};
    std::vector<Pattern> trg;
    Pattern root;
    root.lang = "js";
    root.symbol = "t";
    for (int i = 1; i <= captures; ++i) {
      Pattern ref;
      ref.type = pick(2) ? PatternType::Single : PatternType::Sequence;
      ref.index = i;
      root.children.push_back(ref);
    }
    trg.push_back(root);
    return make_rule(std::move(src), std::move(trg), Provenance::Base, order);
  }
};

} // namespace

TEST_CASE("zero-capture rule")
{
  auto rs = parse_ruleset("# none\n(MatchExpand (fragment (py.none)) (fragment (js.null)))\n");
  REQUIRE(rs.rules.size() == 1);
  CHECK(rs.rules[0].capture_count == 0);
  CHECK(rs.rules[0].provenance == Provenance::Base);
  auto b = match_rule(rs.rules[0], *py_expr("None"));
  REQUIRE(b);
  auto out = expand_rule(rs.rules[0], *b, &fx::js());
  CHECK(out.slot_sources.empty());
  REQUIRE(out.roots.size() == 1);
  CHECK(out.roots[0]->terminal);
  CHECK(out.roots[0]->text == "null");
}

TEST_CASE("dangling references are rejected")
{
  CHECK_THROWS_AS(
    parse_ruleset("(MatchExpand (fragment (py.not_operator (str \"not\") .)) "
                  "(fragment (js.x .2)))"),
    DanglingReference);
  CHECK_THROWS_AS(parse_ruleset("(MatchExpand (fragment (py.comparison . _str_ .)) "
                                "(fragment (js.x .1 _str2_ .2)))"),
                  DanglingTemplateIndex);
  CHECK_THROWS_AS(parse_ruleset("(MatchExpand (fragment (py.comparison . _str_ .)) "
                                "(fragment (_nt1_ .1)))"),
                  DanglingTemplateIndex);
}

TEST_CASE("syntax errors carry a line")
{
  try {
    parse_ruleset("\n\n(MatchExpand (fragment (py.a . *  *)) (fragment (js.b .1)))");
    FAIL("expected DslSyntaxError");
  } catch (const DslSyntaxError& e) {
    CHECK(e.line == 3);
  }
  CHECK_THROWS_AS(parse_ruleset("(MatchExpand (fragment (py.a .1)) (fragment (js.b)))"),
                  DslSyntaxError);
  CHECK_THROWS_AS(parse_ruleset("(MatchExpand (fragment (py.a .)) (fragment (js.b .)))"),
                  DslSyntaxError);
  CHECK_THROWS_AS(parse_ruleset("(MatchExpand (fragment .) (fragment (js.b .1)))"),
                  DslSyntaxError);
  CHECK_THROWS_AS(parse_ruleset("(MatchExpand (fragment (py.a \"x\")) (fragment (js.b)))"),
                  DslSyntaxError);
  CHECK_THROWS_AS(parse_ruleset("(MatchExpand (fragment (py.a)"), DslSyntaxError);
  CHECK_THROWS_AS(parse_ruleset("(MatchExpand (fragment (py.a)) (fragment (js.b)))\n"
                                "(MatchExpand (fragment (py.a)) (fragment (js.b)))"),
                  DuplicateRule);
}

TEST_CASE("list comprehension rule has two captures and two references")
{
  auto r = parse_rule(kComprehension);
  CHECK(r.capture_count == 2);
  CHECK(r.template_count == 1);
  CHECK(count_refs(r.trg) == 2);

  auto src = py_expr("[w.upper() for w in words]");
  auto b = match_rule(r, *src);
  REQUIRE(b);
  CHECK(b->templates[0].value == "w");
  auto out = expand_rule(r, *b, &fx::js());
  CHECK(fx::render(out) ==
        "call_expression(member_expression(call_expression(member_expression("
        "Array,.,from),arguments((,q(words),))),.,map),arguments((,arrow_function("
        "formal_parameters((,w,)),=>,q(w . upper ( ))),)))");
}

TEST_CASE("multi-level matching")
{
  auto rs = parse_ruleset(fx::distribute_rules());
  const Rule& distribute = rs.rules[0];
  auto b = match_rule(distribute, *arith("(a+b)×c"));
  REQUIRE(b);
  REQUIRE(b->captures.size() == 3);
  CHECK(b->captures[0].nodes[0]->text == "a");
  CHECK(b->captures[1].nodes[0]->text == "b");
  CHECK(b->captures[2].nodes[0]->text == "c");
  CHECK_FALSE(match_rule(distribute, *arith("a×c")));

  auto out = expand_rule(distribute, *b);
  CHECK(fx::render(out) == "Add(Mult(q(a),q(c)),Mult(q(b),q(c)))");
  CHECK(out.slot_sources.size() == 4);
}

TEST_CASE("template matcher binds the operator")
{
  auto r = parse_rule("(MatchExpand (fragment (py.comparison . _str_ .)) "
                      "(fragment (js.relational_expression .1 _str1_ .2)))");
  auto b = match_rule(r, *py_expr("x<y"));
  REQUIRE(b);
  REQUIRE(b->templates.size() == 1);
  CHECK(b->templates[0].value == "<");
  auto out = expand_rule(r, *b, &fx::js());
  CHECK(fx::render(out) == "relational_expression(q(x),<,q(y))");
}

TEST_CASE("sequence captures are leftmost-shortest")
{
  auto r = parse_rule("(MatchExpand (fragment (py.argument_list (str \"(\") * . (str \")\"))) "
                      "(fragment (js.arguments *1 .2)))");
  auto b = match_rule(r, *py_expr("f(1, 2, 3)")->children[1]);
  REQUIRE(b);
  CHECK(b->captures[0].sequence);
  CHECK(b->captures[0].nodes.size() == 4);
  CHECK(b->captures[1].nodes[0]->text == "3");
  // Anonymous terminals inside `*` are copied, named nodes become slots.
  auto out = expand_rule(r, *b);
  CHECK(fx::render(out) == "arguments(q(1),,,q(2),,,q(3))");

  auto empty = match_rule(
    parse_rule("(MatchExpand (fragment (py.argument_list (str \"(\") * (str \")\"))) "
               "(fragment (js.arguments *1)))"),
    *py_expr("f()")->children[1]);
  REQUIRE(empty);
  CHECK(empty->captures[0].nodes.empty());
}

TEST_CASE("val, str and nostr")
{
  auto val = parse_rule("(MatchExpand (fragment (py.string (val \"hi\"))) "
                        "(fragment (js.string (str \"'hi'\"))))");
  CHECK(match_rule(val, *py_expr("'hi'")));
  CHECK(match_rule(val, *py_expr("\"hi\"")));
  CHECK_FALSE(match_rule(val, *py_expr("'ho'")));
  auto str = parse_rule("(MatchExpand (fragment (py.string (str \"'hi'\"))) "
                        "(fragment (js.string (str \"'hi'\"))))");
  CHECK(match_rule(str, *py_expr("'hi'")));
  CHECK_FALSE(match_rule(str, *py_expr("\"hi\"")));
  auto nostr = parse_rule("(MatchExpand (fragment (py.identifier (nostr))) "
                          "(fragment (js.identifier (nostr))))");
  CHECK(match_rule(nostr, *AstNode::make_terminal("identifier", std::nullopt)));
  CHECK_FALSE(match_rule(nostr, *py_expr("x")));
}

TEST_CASE("nt template binds and re-emits the kind")
{
  auto r = parse_rule("(MatchExpand (fragment (_nt_ . (str \"+\") .)) "
                      "(fragment (_nt1_ .2 (str \"+\") .1)))");
  auto b = match_rule(r, *py_expr("a + b"));
  REQUIRE(b);
  CHECK(b->templates[0].value == "additive");
  CHECK(fx::render(expand_rule(r, *b)) == "additive(q(b),+,q(a))");
}

TEST_CASE("specificity")
{
  auto rs = parse_ruleset(R"x(
(MatchExpand (fragment (py.call . .)) (fragment (js.call_expression .1 .2)))
(MatchExpand (fragment (py.call (py.identifier (str "range")) (py.argument_list (str "(") . (str ")"))))
             (fragment (js.x .1)))
(MatchExpand (fragment (py.a . .)) (fragment (js.b .1 .2)))
(MatchExpand (fragment (py.a . .)) (fragment (js.c .1 .2)))
)x");
  CHECK(specificity(rs.rules[1]) < specificity(rs.rules[0]));
  CHECK(specificity(rs.rules[2]) < specificity(rs.rules[3]));
  CHECK(specificity(rs.rules[2]) == specificity(rs.rules[2]));
}

TEST_CASE("property: serialize/parse round trip and total order")
{
  RuleGen gen{std::mt19937(7)};
  Ruleset rs;
  for (int i = 0; i < 300; ++i) {
    auto r = gen.rule(i);
    if (rs.find(r.id))
      continue;
    r.source_order = static_cast<int>(rs.rules.size());
    if (i % 5 == 0)
      r.provenance = Provenance::Inferred;
    rs.rules.push_back(r);
  }
  auto again = parse_ruleset(serialize_ruleset(rs));
  REQUIRE(again.rules.size() == rs.rules.size());
  for (std::size_t i = 0; i < rs.rules.size(); ++i) {
    CHECK(again.rules[i].src == rs.rules[i].src);
    CHECK(again.rules[i].trg == rs.rules[i].trg);
    CHECK(again.rules[i].id == rs.rules[i].id);
    CHECK(again.rules[i].provenance == rs.rules[i].provenance);
  }

  // Keys are distinct (source order differs), so the order is strict and
  // total; check antisymmetry and transitivity on all triples of a sample.
  const std::size_t n = std::min<std::size_t>(rs.rules.size(), 40);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      auto a = specificity(rs.rules[i]);
      auto b = specificity(rs.rules[j]);
      CHECK((i == j) == (a == b));
      CHECK_FALSE((a < b && b < a));
      for (std::size_t k = 0; k < n; ++k) {
        auto c = specificity(rs.rules[k]);
        if (a < b && b < c)
          CHECK(a < c);
      }
    }
  }
}

TEST_CASE("property: slots carry subtrees of the matched node and matching is pure")
{
  auto rs = parse_ruleset(fx::read_file(fx::repo_path("rules/corpus")));
  auto tree = parse_source(fx::python(),
                           fx::read_file(fx::repo_path("bench/words/source")));
  std::function<void(const AstPtr&)> walk = [&](const AstPtr& n) {
    for (const auto& r : rs.rules) {
      auto b = match_rule(r, *n);
      if (!b)
        continue;
      auto b2 = match_rule(r, *n);
      REQUIRE(b2);
      auto out = expand_rule(r, *b, &fx::js());
      CHECK(fx::render(out) == fx::render(expand_rule(r, *b2, &fx::js())));
      for (const auto& s : out.slot_sources)
        CHECK(contains_node(*n, s.get()));
    }
    for (const auto& c : n->children)
      walk(c);
  };
  walk(tree);
}
