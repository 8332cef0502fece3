#include "xlate/printer.hpp"

#include "xlate/pda.hpp"

#include <cctype>

namespace xlate {

namespace {

bool
is_word(std::string_view t)
{
  if (t.empty())
    return false;
  const unsigned char c = static_cast<unsigned char>(t[0]);
  return std::isalnum(c) || c == '_' || c == '$' || c == '\'' || c == '"' || c >= 0x80;
}

bool
is_keyword(const TokenContext& t)
{
  return t.kind == t.text && !t.text.empty() &&
         std::isalpha(static_cast<unsigned char>(t.text[0]));
}

bool
is_operator_start(std::string_view t)
{
  return !t.empty() && std::string_view("+-*/%<>=!&|^~?:").find(t[0]) != std::string_view::npos;
}

bool
is_layout_kind(std::string_view kind)
{
  return kind == "$NEWLINE" || kind == "$INDENT" || kind == "$DEDENT";
}

bool
has_layout(const AstNode& n)
{
  if (n.terminal)
    return is_layout_kind(n.kind);
  for (const auto& c : n.children) {
    if (has_layout(*c))
      return true;
  }
  return false;
}

class Writer
{
public:
  Writer(const GrammarDef& g, const PrintStyle& s)
    : grammar_(g)
    , style_(s)
  {
  }

  void walk(const AstNode& n, std::string_view parent, bool first, bool last, bool root)
  {
    if (n.terminal) {
      terminal(n, parent, first, last);
      return;
    }
    if (!(root && n.kind.empty()) && !grammar_.find(n.kind))
      throw UnprintableNode("grammar " + grammar_.language_name + " has no node kind '" +
                            n.kind + "'");
    const std::size_t count = n.children.size();
    for (std::size_t i = 0; i < count; ++i)
      walk(*n.children[i], n.kind, i == 0, i + 1 == count, false);
    if (style_.newline_after.count(n.kind) && parens_.back() == 0)
      newline();
  }

  Printed finish()
  {
    if (!out_.text.empty() && out_.text.back() != '\n')
      out_.text += '\n';
    return std::move(out_);
  }

private:
  void terminal(const AstNode& n, std::string_view parent, bool first, bool last)
  {
    if (n.kind == "$NEWLINE") {
      newline();
      return;
    }
    if (n.kind == "$INDENT") {
      ++indent_;
      return;
    }
    if (n.kind == "$DEDENT") {
      if (indent_ > 0)
        --indent_;
      return;
    }
    if (!n.text)
      throw UnprintableNode("terminal '" + n.kind + "' has no text");
    if (!n.anonymous() && !grammar_.find(n.kind))
      throw UnprintableNode("grammar " + grammar_.language_name + " has no token kind '" +
                            n.kind + "'");
    TokenContext ctx{*n.text, n.kind, parent, first, last};
    const bool block = style_.block_kinds.count(parent) != 0;
    if (block && *n.text == "}") {
      if (indent_ > 0)
        --indent_;
      if (parens_.size() > 1)
        parens_.pop_back();
      newline();
    }
    emit(ctx, n);
    if (block && *n.text == "{") {
      ++indent_;
      parens_.push_back(0);
      newline();
    }
  }

  void newline()
  {
    if (!at_line_start_)
      pending_newline_ = true;
  }

  void emit(const TokenContext& ctx, const AstNode& n)
  {
    if (pending_newline_) {
      out_.text += '\n';
      at_line_start_ = true;
      pending_newline_ = false;
    }
    if (at_line_start_) {
      for (int i = 0; i < indent_; ++i)
        out_.text += style_.indent_unit;
    } else if (prev_ && style_.space_between(*prev_, ctx)) {
      out_.text += ' ';
    }
    const std::size_t start = out_.text.size();
    out_.text += ctx.text;
    out_.tokens.push_back({{start, out_.text.size()}, n.tag, &n});
    at_line_start_ = false;
    prev_ = ctx;
    if (ctx.text == "(" || ctx.text == "[")
      ++parens_.back();
    else if ((ctx.text == ")" || ctx.text == "]") && parens_.back() > 0)
      --parens_.back();
  }

  const GrammarDef& grammar_;
  const PrintStyle& style_;
  Printed out_;
  int indent_ = 0;
  bool at_line_start_ = true;
  bool pending_newline_ = false;
  std::optional<TokenContext> prev_;
  // Open brackets per block nesting level.
  std::vector<int> parens_{0};
};

} // namespace

bool
default_spacing(const TokenContext& prev, const TokenContext& next)
{
  const auto p = prev.text;
  const auto n = next.text;
  if (p == "(" || p == "[" || p == "{")
    return false;
  if (n == ")" || n == "]" || n == "}")
    return false;
  if (n == "," || n == ";")
    return false;
  if (n == ":")
    return next.parent == "ternary_expression";
  if (p == "." || n == ".")
    return false;
  if (!is_word(p) && is_operator_start(n))
    return true;
  if (!is_word(p) && prev.first_child && !prev.last_child)
    return false;
  if ((n == "++" || n == "--") && next.last_child && !next.first_child)
    return false;
  if (n == "(" || n == "[") {
    if (is_word(p))
      return is_keyword(prev);
    return !(p == ")" || p == "]");
  }
  return true;
}

PrintStyle
js_style()
{
  PrintStyle s;
  s.indent_unit = "    ";
  s.newline_after = {"function_declaration", "lexical_declaration",  "if_statement",
                     "for_of_statement",     "for_in_statement",     "for_statement",
                     "while_statement",      "return_statement",     "break_statement",
                     "continue_statement",   "empty_statement",      "expression_statement"};
  s.block_kinds = {"statement_block"};
  s.space_between = default_spacing;
  return s;
}

PrintStyle
python_style()
{
  PrintStyle s;
  s.indent_unit = "    ";
  s.space_between = default_spacing;
  return s;
}

PrintStyle
style_for(const GrammarDef& grammar)
{
  return grammar.layout_policy == LayoutPolicy::IndentationSensitive ? python_style()
                                                                     : js_style();
}

AstPtr
with_layout(const AstPtr& tree, const GrammarDef& grammar)
{
  Pda pda(grammar);
  auto accepted = pda.accept(preorder(*tree));
  if (!accepted)
    throw UnprintableNode("tree does not conform to grammar " + grammar.language_name);
  return reconstruct_parse_tree(*accepted);
}

Printed
print_tree(const AstPtr& tree, const GrammarDef& grammar, const PrintStyle& style)
{
  AstPtr t = tree;
  if (grammar.layout_policy == LayoutPolicy::IndentationSensitive && !has_layout(*t))
    t = with_layout(t, grammar);
  Writer w(grammar, style);
  w.walk(*t, "", true, true, true);
  return w.finish();
}

std::string
pretty_print(const AstPtr& tree, const GrammarDef& grammar, const PrintStyle& style)
{
  return print_tree(tree, grammar, style).text;
}

std::string
pretty_print(const AstPtr& tree, const GrammarDef& grammar)
{
  return pretty_print(tree, grammar, style_for(grammar));
}

namespace {

std::size_t
visible_code_points(std::string_view s)
{
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) == 0x80)
      continue;
    if (c < 0x80 && std::isspace(c))
      continue;
    ++n;
  }
  return n;
}

} // namespace

double
bloat_ratio(std::string_view source, std::string_view target)
{
  const auto s = visible_code_points(source);
  if (s == 0)
    throw EmptySource("source has no non-whitespace characters");
  return static_cast<double>(visible_code_points(target)) / static_cast<double>(s);
}

} // namespace xlate
