#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xlate {

class GrammarError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public GrammarError
{
public:
  using GrammarError::GrammarError;
};

class DanglingReference : public GrammarError
{
public:
  using GrammarError::GrammarError;
};

class EmptyChoice : public GrammarError
{
public:
  using GrammarError::GrammarError;
};

class LeftRecursion : public GrammarError
{
public:
  using GrammarError::GrammarError;
};

enum class ExprType
{
  Seq,
  Choice,
  Repeat0,
  Repeat1,
  Optional,
  Literal,
  Pattern,
  Ref,
};

struct PegExpr;
using PegExprPtr = std::shared_ptr<const PegExpr>;

/// One node of a parsing expression.
struct PegExpr
{
  ExprType type = ExprType::Seq;
  std::vector<PegExprPtr> children;
  /// Literal text, pattern source, or referenced production name.
  std::string text;
  std::shared_ptr<const std::regex> regex;
  /// Resolved production index for Ref.
  int production = -1;

  static PegExprPtr seq(std::vector<PegExprPtr> children);
  static PegExprPtr choice(std::vector<PegExprPtr> alternatives);
  static PegExprPtr repeat0(PegExprPtr child);
  static PegExprPtr repeat1(PegExprPtr child);
  static PegExprPtr optional(PegExprPtr child);
  static PegExprPtr literal(std::string text);
  static PegExprPtr pattern(std::string source);
  static PegExprPtr ref(std::string name);
};

enum class LayoutPolicy
{
  Freeform,
  IndentationSensitive,
};

/// Layout pseudo-terminals. Indentation-sensitive grammars refer to them as
/// the literals `$NEWLINE`, `$INDENT` and `$DEDENT`; the layout pre-pass
/// encodes them as these control characters.
inline constexpr char kNewlineMark = '\x1e';
inline constexpr char kIndentMark = '\x1c';
inline constexpr char kDedentMark = '\x1d';

bool is_layout_literal(std::string_view text);
char layout_mark(std::string_view literal);

/// How a production materializes in the AST.
enum class NodeShape
{
  /// Regular node of the production's kind.
  Node,
  /// No node; children are spliced into the parent.
  Hidden,
  /// A terminal whose text is the whole match.
  Token,
  /// `head (tail)*` folded into left-nested nodes; a lone head collapses.
  Fold,
};

struct Production
{
  std::string name;
  PegExprPtr expr;
  NodeShape shape = NodeShape::Node;
  /// Set on productions used as fold tails whose nodes take their own kind.
  bool trailer = false;
};

struct GrammarDef
{
  std::string language_name;
  std::string start_symbol;
  std::vector<Production> productions;
  std::map<std::string, int, std::less<>> index;
  /// Word-like literals that must end on a word boundary.
  std::set<std::string, std::less<>> word_tokens;
  /// Token kinds holding literal values rather than names.
  std::set<std::string, std::less<>> value_tokens;
  LayoutPolicy layout_policy = LayoutPolicy::Freeform;
  /// Line comment prefix skipped as whitespace (may be empty).
  std::string line_comment;
  /// For each literal, the longer literals it is a prefix of. Used for
  /// maximal-munch tokenization of operators.
  std::map<std::string, std::vector<std::string>, std::less<>> longer_literals;

  const Production* find(std::string_view name) const;
  const Production& at(int index) const { return productions.at(index); }
  int start_index() const;
};

/// Parses and validates a grammar document (JSON schema, see README).
GrammarDef load_grammar(std::string_view document);
GrammarDef load_grammar_file(const std::string& path);

/// Resolves references, computes derived tables and checks every grammar
/// invariant. load_grammar calls this; it is exposed for grammars built in
/// code.
void finalize_grammar(GrammarDef& grammar);

/// Throws LeftRecursion when a production can reach itself without
/// consuming input.
void check_left_recursion(const GrammarDef& grammar);

bool nullable(const GrammarDef& grammar, const PegExpr& expr);

/// True when `text` is a complete match of the token production or terminal
/// expression.
bool terminal_matches(const GrammarDef& grammar, const PegExpr& expr,
                      std::string_view text);

/// For a Token production made of a single literal, that literal.
const std::string* single_literal(const Production& production);

} // namespace xlate
