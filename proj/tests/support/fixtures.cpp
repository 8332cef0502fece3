#include "fixtures.hpp"

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fx {

std::string
repo_path(const std::string& relative)
{
  return std::string(XLATE_SOURCE_DIR) + "/" + relative;
}

std::string
read_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int
run_cli(const std::string& args, std::string* out)
{
#if defined(XLATE_CLI)
  const std::string cmd = std::string("'") + XLATE_CLI + "' " + args + " 2>/dev/null";
#else
  const std::string cmd = "xlate " + args + " 2>/dev/null";
#endif
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe)
    throw std::runtime_error("cannot run " + cmd);
  std::string text;
  char buf[4096];
  while (const auto n = std::fread(buf, 1, sizeof buf, pipe))
    text.append(buf, n);
  const int status = ::pclose(pipe);
  if (out)
    *out = std::move(text);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TempDir::TempDir()
{
  std::random_device rd;
  const auto base = std::filesystem::temp_directory_path();
  for (int i = 0; i < 100; ++i) {
    auto p = base / ("xlate-test-" + std::to_string(rd()));
    if (std::filesystem::create_directory(p)) {
      path = p.string();
      return;
    }
  }
  throw std::runtime_error("cannot create a temporary directory");
}

TempDir::~TempDir()
{
  std::error_code ec;
  std::filesystem::remove_all(path, ec);
}

const xlate::GrammarDef&
python()
{
  static const auto g =
    xlate::load_grammar_file(repo_path("grammars/python_subset"));
  return g;
}

const xlate::GrammarDef&
js()
{
  static const auto g = xlate::load_grammar_file(repo_path("grammars/js_subset"));
  return g;
}

const char*
flat_arithmetic_document()
{
  return R"J({
  "name": "arith", "start": "expr", "layout": "freeform",
  "rules": {
    "expr": {"type": "seq", "children": [
      {"type": "ref", "name": "term"},
      {"type": "repeat0", "child": {"type": "seq", "children": [
        {"type": "choice", "alternatives": [
          {"type": "literal", "text": "+"}, {"type": "literal", "text": "×"}]},
        {"type": "ref", "name": "term"}]}}]},
    "term": {"type": "choice", "alternatives": [
      {"type": "literal", "text": "a"}, {"type": "literal", "text": "b"},
      {"type": "literal", "text": "c"}]}
  }})J";
}

const xlate::GrammarDef&
arithmetic()
{
  static const auto g = xlate::load_grammar(R"J({
  "name": "ar", "start": "add", "layout": "freeform",
  "rules": {
    "add": {"fold": true, "type": "seq", "children": [
      {"type": "ref", "name": "mul"},
      {"type": "repeat0", "child": {"type": "seq", "children": [
        {"type": "literal", "text": "+"}, {"type": "ref", "name": "mul"}]}}]},
    "mul": {"fold": true, "type": "seq", "children": [
      {"type": "ref", "name": "_atom"},
      {"type": "repeat0", "child": {"type": "seq", "children": [
        {"type": "literal", "text": "×"}, {"type": "ref", "name": "_atom"}]}}]},
    "_atom": {"type": "choice", "alternatives": [
      {"type": "ref", "name": "paren"}, {"type": "ref", "name": "var"}]},
    "paren": {"type": "seq", "children": [
      {"type": "literal", "text": "("}, {"type": "ref", "name": "add"},
      {"type": "literal", "text": ")"}]},
    "var": {"type": "choice", "alternatives": [
      {"type": "literal", "text": "a"}, {"type": "literal", "text": "b"},
      {"type": "literal", "text": "c"}]}
  }})J");
  return g;
}

const xlate::GrammarDef&
arithmetic_target()
{
  static const auto g = xlate::load_grammar(R"J({
  "name": "tg", "start": "_term", "layout": "freeform",
  "rules": {
    "_term": {"type": "choice", "alternatives": [
      {"type": "ref", "name": "Add"}, {"type": "ref", "name": "Mult"},
      {"type": "ref", "name": "A"}, {"type": "ref", "name": "B"},
      {"type": "ref", "name": "C"}]},
    "Add": {"type": "seq", "children": [
      {"type": "literal", "text": "Add("}, {"type": "ref", "name": "_term"},
      {"type": "literal", "text": ","}, {"type": "ref", "name": "_term"},
      {"type": "literal", "text": ")"}]},
    "Mult": {"type": "seq", "children": [
      {"type": "literal", "text": "Mult("}, {"type": "ref", "name": "_term"},
      {"type": "literal", "text": ","}, {"type": "ref", "name": "_term"},
      {"type": "literal", "text": ")"}]},
    "A": {"type": "literal", "text": "A"},
    "B": {"type": "literal", "text": "B"},
    "C": {"type": "literal", "text": "C"}
  }})J");
  return g;
}

const char*
distribute_rules()
{
  return R"J(
(MatchExpand
  (fragment (ar.mul (ar.paren (str "(") (ar.add . (str "+") .) (str ")")) (str "×") .))
  (fragment (tg.Add (tg.Mult .1 .3) (tg.Mult .2 .3))))
(MatchExpand (fragment (ar.var (str "a"))) (fragment (tg.A)))
(MatchExpand (fragment (ar.var (str "b"))) (fragment (tg.B)))
(MatchExpand (fragment (ar.var (str "c"))) (fragment (tg.C)))
)J";
}

namespace {

void
render_node(std::string& out, const xlate::TargetNode& n,
            const xlate::PartialTargetAst& ast)
{
  if (n.slot >= 0) {
    out += "q(" + xlate::leaf_text(*ast.slot_sources[n.slot]) + ")";
    return;
  }
  if (n.terminal) {
    out += n.text.value_or("<absent>");
    return;
  }
  out += n.kind;
  if (n.children.empty())
    return;
  out += '(';
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    if (i)
      out += ',';
    render_node(out, *n.children[i], ast);
  }
  out += ')';
}

} // namespace

std::string
render(const xlate::PartialTargetAst& ast)
{
  std::string out;
  for (std::size_t i = 0; i < ast.roots.size(); ++i) {
    if (i)
      out += ' ';
    render_node(out, *ast.roots[i], ast);
  }
  return out;
}

} // namespace fx
