#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace xlate {

/// Half-open byte range into the text a node was parsed from.
struct Span
{
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const Span&) const = default;
  auto operator<=>(const Span&) const = default;
};

struct AstNode;
using AstPtr = std::shared_ptr<const AstNode>;

/// Universal tree representation for source programs, target programs and
/// snippet fragments.
///
/// A terminal carries text (or an absent text for a missing terminal) and no
/// children; a non-terminal carries children and no text. Nodes are immutable
/// once built and freely shared between trees.
struct AstNode
{
  std::string kind;
  std::optional<std::string> text;
  std::vector<AstPtr> children;
  std::optional<Span> span;
  bool terminal = false;
  /// Free annotation. The derivation engine stores the producing step here
  /// so that printed tokens can be traced back to rules.
  std::int32_t tag = -1;

  static AstPtr make_terminal(std::string kind,
                              std::optional<std::string> text,
                              std::optional<Span> span = std::nullopt,
                              std::int32_t tag = -1);
  static AstPtr make_node(std::string kind,
                          std::vector<AstPtr> children,
                          std::optional<Span> span = std::nullopt);

  /// Anonymous terminals are literal tokens whose kind is their own text.
  bool anonymous() const { return terminal && text && *text == kind; }
};

/// Structural equality: kinds, texts and child shapes. Spans and tags are
/// ignored.
bool structurally_equal(const AstNode& a, const AstNode& b);
inline bool structurally_equal(const AstPtr& a, const AstPtr& b)
{
  return structurally_equal(*a, *b);
}

std::size_t count_nodes(const AstNode& node);
std::size_t count_terminals(const AstNode& node);
std::size_t count_nonterminals(const AstNode& node);

/// Compact s-expression rendering, mainly for tests and diagnostics:
/// `kind(child, child)` for non-terminals and `kind:"text"` for terminals.
std::string to_sexpr(const AstNode& node);

/// Renders as `Kind(child,child)` with terminals shown by text only; used for
/// tree-shaped results such as `Add(Mult(A,C),Mult(B,C))`.
std::string to_term(const AstNode& node);

/// Concatenated terminal texts separated by single spaces.
std::string leaf_text(const AstNode& node);

/// Kind of traversal event emitted by preorder().
enum class TokenKind
{
  EnterNode,
  Token,
  ExitNode,
};

struct TraversalToken
{
  TokenKind type = TokenKind::Token;
  /// Node kind for EnterNode; terminal kind for Token.
  std::string kind;
  /// Token text; absent for missing terminals.
  std::optional<std::string> text;
  std::int32_t tag = -1;

  bool operator==(const TraversalToken&) const = default;
};

std::vector<TraversalToken> preorder(const AstNode& node);
void preorder_into(const AstNode& node, std::vector<TraversalToken>& out);

std::ostream& operator<<(std::ostream& os, const TraversalToken& tok);

} // namespace xlate
