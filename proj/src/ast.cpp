#include "xlate/ast.hpp"

#include <sstream>

namespace xlate {

AstPtr
AstNode::make_terminal(std::string kind,
                       std::optional<std::string> text,
                       std::optional<Span> span,
                       std::int32_t tag)
{
  auto node = std::make_shared<AstNode>();
  node->kind = std::move(kind);
  node->text = std::move(text);
  node->span = span;
  node->terminal = true;
  node->tag = tag;
  return node;
}

AstPtr
AstNode::make_node(std::string kind,
                   std::vector<AstPtr> children,
                   std::optional<Span> span)
{
  auto node = std::make_shared<AstNode>();
  node->kind = std::move(kind);
  node->children = std::move(children);
  if (!span) {
    for (const auto& child : node->children) {
      if (!child->span)
        continue;
      if (!span)
        span = child->span;
      else
        span->end = child->span->end;
    }
  }
  node->span = span;
  return node;
}

bool
structurally_equal(const AstNode& a, const AstNode& b)
{
  if (&a == &b)
    return true;
  if (a.terminal != b.terminal || a.kind != b.kind || a.text != b.text ||
      a.children.size() != b.children.size())
    return false;
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    if (!structurally_equal(*a.children[i], *b.children[i]))
      return false;
  }
  return true;
}

std::size_t
count_nodes(const AstNode& node)
{
  std::size_t n = 1;
  for (const auto& c : node.children)
    n += count_nodes(*c);
  return n;
}

std::size_t
count_terminals(const AstNode& node)
{
  if (node.terminal)
    return 1;
  std::size_t n = 0;
  for (const auto& c : node.children)
    n += count_terminals(*c);
  return n;
}

std::size_t
count_nonterminals(const AstNode& node)
{
  return count_nodes(node) - count_terminals(node);
}

namespace {

void
write_sexpr(std::ostream& os, const AstNode& node)
{
  if (node.terminal) {
    os << node.kind << ':';
    if (node.text)
      os << '"' << *node.text << '"';
    else
      os << "<absent>";
    return;
  }
  os << node.kind << '(';
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    if (i)
      os << ", ";
    write_sexpr(os, *node.children[i]);
  }
  os << ')';
}

void
write_term(std::ostream& os, const AstNode& node)
{
  if (node.terminal) {
    os << (node.text ? *node.text : node.kind);
    return;
  }
  os << node.kind;
  if (node.children.empty())
    return;
  os << '(';
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    if (i)
      os << ',';
    write_term(os, *node.children[i]);
  }
  os << ')';
}

void
write_leaves(std::string& out, const AstNode& node)
{
  if (node.terminal) {
    if (!node.text)
      return;
    if (!out.empty())
      out += ' ';
    out += *node.text;
    return;
  }
  for (const auto& c : node.children)
    write_leaves(out, *c);
}

} // namespace

std::string
to_sexpr(const AstNode& node)
{
  std::ostringstream os;
  write_sexpr(os, node);
  return os.str();
}

std::string
to_term(const AstNode& node)
{
  std::ostringstream os;
  write_term(os, node);
  return os.str();
}

std::string
leaf_text(const AstNode& node)
{
  std::string out;
  write_leaves(out, node);
  return out;
}

void
preorder_into(const AstNode& node, std::vector<TraversalToken>& out)
{
  if (node.terminal) {
    out.push_back({TokenKind::Token, node.kind, node.text, node.tag});
    return;
  }
  out.push_back({TokenKind::EnterNode, node.kind, std::nullopt, node.tag});
  for (const auto& c : node.children)
    preorder_into(*c, out);
  out.push_back({TokenKind::ExitNode, node.kind, std::nullopt, node.tag});
}

std::vector<TraversalToken>
preorder(const AstNode& node)
{
  std::vector<TraversalToken> out;
  preorder_into(node, out);
  return out;
}

std::ostream&
operator<<(std::ostream& os, const TraversalToken& tok)
{
  switch (tok.type) {
    case TokenKind::EnterNode:
      return os << "Enter(" << tok.kind << ')';
    case TokenKind::ExitNode:
      return os << "Exit";
    case TokenKind::Token:
      if (tok.text)
        return os << "Token(\"" << *tok.text << "\")";
      return os << "Token(absent)";
  }
  return os;
}

} // namespace xlate
