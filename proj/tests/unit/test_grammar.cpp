#include "fixtures.hpp"
#include "xlate/parser.hpp"

#include <doctest.h>
#include <json.hpp>

using namespace xlate;

TEST_CASE("flat arithmetic grammar loads with two productions")
{
  auto g = load_grammar(fx::flat_arithmetic_document());
  CHECK(g.productions.size() == 2);
  CHECK(g.start_symbol == "expr");
  CHECK(g.layout_policy == LayoutPolicy::Freeform);
}

TEST_CASE("undefined reference is rejected")
{
  std::string doc = fx::flat_arithmetic_document();
  auto pos = doc.find(R"("name": "term"})");
  doc.replace(pos, 15, R"("name": "factor"})");
  CHECK_THROWS_AS(load_grammar(doc), DanglingReference);
}

TEST_CASE("schema violations")
{
  CHECK_THROWS_AS(load_grammar("[1]"), SchemaError);
  CHECK_THROWS_AS(load_grammar("{not json"), SchemaError);
  CHECK_THROWS_AS(
    load_grammar(R"({"name":"x","start":"s","rules":{"s":{"type":"literal","text":""}}})"),
    SchemaError);
  CHECK_THROWS_AS(
    load_grammar(R"({"name":"x","start":"s","rules":{"s":{"type":"choice","alternatives":[]}}})"),
    EmptyChoice);
  CHECK_THROWS_AS(
    load_grammar(R"({"name":"x","start":"t","rules":{"s":{"type":"literal","text":"a"}}})"),
    DanglingReference);
  CHECK_THROWS_AS(
    load_grammar(R"({"name":"x","start":"s","rules":{"s":{"type":"wat"}}})"),
    SchemaError);
  CHECK_THROWS_AS(
    load_grammar(R"({"name":"x","start":"s","rules":{"s":{"type":"repeat0",
      "child":{"type":"optional","child":{"type":"literal","text":"a"}}}}})"),
    SchemaError);
}

TEST_CASE("left recursion is rejected at load time")
{
  CHECK_THROWS_AS(load_grammar(R"({"name":"x","start":"s","rules":{
    "s":{"type":"choice","alternatives":[
      {"type":"seq","children":[{"type":"ref","name":"s"},{"type":"literal","text":"a"}]},
      {"type":"literal","text":"a"}]}}})"),
                  LeftRecursion);
  // Indirect, through a nullable prefix.
  CHECK_THROWS_AS(load_grammar(R"({"name":"x","start":"s","rules":{
    "s":{"type":"seq","children":[{"type":"optional","child":{"type":"literal","text":"b"}},
      {"type":"ref","name":"t"}]},
    "t":{"type":"seq","children":[{"type":"ref","name":"s"},{"type":"literal","text":"a"}]}}})"),
                  LeftRecursion);
}

TEST_CASE("bundled grammars match their manifests")
{
  for (auto [name, g] : {std::pair{"python_subset", &fx::python()},
                         std::pair{"js_subset", &fx::js()}}) {
    auto manifest = nlohmann::json::parse(
      fx::read_file(fx::repo_path(std::string("grammars/") + name + ".manifest")));
    CHECK(g->productions.size() == manifest["productions"].get<std::size_t>());
    CHECK(g->language_name == name);
  }
  CHECK(fx::python().layout_policy == LayoutPolicy::IndentationSensitive);
  CHECK(fx::js().layout_policy == LayoutPolicy::Freeform);
}

TEST_CASE("flat arithmetic parse keeps operators as anonymous terminals")
{
  auto g = load_grammar(fx::flat_arithmetic_document());
  auto t = parse_source(g, "a+b×c");
  CHECK(to_sexpr(*t) ==
        R"(expr(term:"a", +:"+", term:"b", ×:"×", term:"c"))");
  CHECK(t->children[2]->span == Span{2, 3});
}

TEST_CASE("incomplete input fails at the furthest offset")
{
  auto g = load_grammar(fx::flat_arithmetic_document());
  try {
    parse_source(g, "a+");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset == 2);
  }
  CHECK_THROWS_AS(parse_source(g, "a b"), ParseError);
}

TEST_CASE("python assignment")
{
  auto t = parse_source(fx::python(), "a = 5\n");
  REQUIRE(t->kind == "module");
  REQUIRE(t->children.size() == 1);
  CHECK(to_sexpr(*t->children[0]) ==
        R"(assignment(identifier:"a", =:"=", integer:"5"))");
  CHECK(preorder(*t->children[0]) ==
        std::vector<TraversalToken>{{TokenKind::EnterNode, "assignment", {}},
                                    {TokenKind::Token, "identifier", "a"},
                                    {TokenKind::Token, "=", "="},
                                    {TokenKind::Token, "integer", "5"},
                                    {TokenKind::ExitNode, "assignment", {}}});
}

TEST_CASE("python layout")
{
  const char* src = "def f(x):\n"
                    "    # comment\n"
                    "\n"
                    "    if x > 1:\n"
                    "        return [y for y in range(x)\n"
                    "                if y % 2 == 0]\n"
                    "    else:\n"
                    "        return None\n"
                    "print(f(4))";
  auto t = parse_source(fx::python(), src);
  REQUIRE(t->children.size() == 2);
  CHECK(t->children[0]->kind == "function_definition");
  CHECK(t->children[1]->kind == "expression_statement");
  CHECK(to_sexpr(*t->children[1]) ==
        R"(expression_statement(call(identifier:"print", argument_list()"
        R"x((:"(", call(identifier:"f", argument_list((:"(", integer:"4", ):")")), ):")"))))x");
  CHECK_THROWS_AS(parse_source(fx::python(), "if x:\n    a = 1\n  b = 2\n"),
                  ParseError);
}

TEST_CASE("python operators fold left and respect keywords")
{
  auto t = parse_source(fx::python(), "x = a - b - c\n");
  CHECK(to_term(*t->children[0]) == "assignment(x,=,additive(additive(a,-,b),-,c))");
  t = parse_source(fx::python(), "y = x not in s and not q\n");
  CHECK(to_term(*t->children[0]) ==
        "assignment(y,=,and_expression(comparison(x,not,in,s),and,not_operator(not,q)))");
  t = parse_source(fx::python(), "z = a.b(1)[2] // 3\n");
  CHECK(to_term(*t->children[0]) ==
        "assignment(z,=,multiplicative(subscript(call(attribute(a,.,b),"
        "argument_list((,1,))),[,2,]),//,3))");
  CHECK_THROWS_AS(parse_source(fx::python(), "if = 3\n"), ParseError);
  t = parse_source(fx::python(), "iffy = 3\n");
  CHECK(t->children[0]->children[0]->text == "iffy");
}

TEST_CASE("js declarations and maximal munch")
{
  auto t = parse_source(fx::js(), "let a = 5;");
  CHECK(to_sexpr(*t) ==
        R"(program(lexical_declaration(let:"let", variable_declarator()"
        R"(identifier:"a", =:"=", number:"5"), ;:";")))");
  t = parse_source(fx::js(), "x === y; i++; z = (w) => w + 1; // tail");
  CHECK(to_term(*t) ==
        "program(expression_statement(equality_expression(x,===,y),;),"
        "expression_statement(update_expression(i,++),;),"
        "expression_statement(assignment_expression(z,=,arrow_function("
        "formal_parameters((,w,)),=>,additive_expression(w,+,1))),;))");
  CHECK_THROWS_AS(parse_source(fx::js(), "let a[0] = 5;"), ParseError);
}

TEST_CASE("parsing is deterministic")
{
  const char* src = "for x in xs:\n    total += x * 2\n";
  CHECK(structurally_equal(*parse_source(fx::python(), src),
                           *parse_source(fx::python(), src)));
}

TEST_CASE("preorder length counts nodes twice and terminals once")
{
  auto t = parse_source(fx::python(), "while i < n:\n    i = i + f(i, 2)\n");
  CHECK(preorder(*t).size() == 2 * count_nonterminals(*t) + count_terminals(*t));
  auto leaf = AstNode::make_terminal("identifier", std::nullopt);
  CHECK(preorder(*leaf) ==
        std::vector<TraversalToken>{{TokenKind::Token, "identifier", std::nullopt}});
}
