#pragma once

#include "xlate/ast.hpp"
#include "xlate/grammar.hpp"

#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xlate {

class UnprintableNode : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class EmptySource : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// What the spacing predicate knows about one token.
struct TokenContext
{
  std::string_view text;
  std::string_view kind;
  /// Kind of the enclosing node ("" at the top).
  std::string_view parent;
  bool first_child = false;
  bool last_child = false;
};

struct PrintStyle
{
  std::string indent_unit = "    ";
  /// Node kinds followed by a line break (outside parentheses).
  std::set<std::string, std::less<>> newline_after;
  /// Node kinds whose `{` ... `}` delimit an indented block.
  std::set<std::string, std::less<>> block_kinds;
  std::function<bool(const TokenContext& prev, const TokenContext& next)> space_between;
  /// Not enforced; kept for configuration compatibility.
  std::optional<std::size_t> max_line;
};

/// Single spaces around binary operators, none inside brackets, before
/// separators, around `.`, after prefix or before postfix operators, or
/// between a callee and its argument list.
bool default_spacing(const TokenContext& prev, const TokenContext& next);

PrintStyle js_style();
PrintStyle python_style();
/// python_style for indentation-sensitive grammars, js_style otherwise.
PrintStyle style_for(const GrammarDef& grammar);

struct PrintedToken
{
  Span span;
  std::int32_t tag = -1;
  const AstNode* node = nullptr;
};

struct Printed
{
  std::string text;
  std::vector<PrintedToken> tokens;
};

/// Adds layout terminals by running the grammar's automaton over the tree.
/// Throws UnprintableNode when the tree does not conform to the grammar.
AstPtr with_layout(const AstPtr& tree, const GrammarDef& grammar);

/// Throws UnprintableNode for node kinds the grammar does not define and for
/// terminals without text.
Printed print_tree(const AstPtr& tree, const GrammarDef& grammar, const PrintStyle& style);

std::string pretty_print(const AstPtr& tree, const GrammarDef& grammar,
                         const PrintStyle& style);
std::string pretty_print(const AstPtr& tree, const GrammarDef& grammar);

/// Non-whitespace code points of `target` over those of `source`. Throws
/// EmptySource when the source has none.
double bloat_ratio(std::string_view source, std::string_view target);

} // namespace xlate
