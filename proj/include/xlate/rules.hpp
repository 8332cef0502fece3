#pragma once

#include "xlate/ast.hpp"
#include "xlate/grammar.hpp"

#include <compare>
#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xlate {

class DslSyntaxError : public std::runtime_error
{
public:
  DslSyntaxError(const std::string& message, std::size_t line)
    : std::runtime_error("line " + std::to_string(line) + ": " + message)
    , line(line)
  {
  }

  std::size_t line;
};

class DanglingTemplateIndex : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class DuplicateRule : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

enum class PatternType
{
  /// `(lang.Kind children...)`
  NonTerminal,
  /// `(str "text")`
  Str,
  /// `(nostr)`
  NoStr,
  /// `(val "text")`
  Val,
  /// `(_nt_ children...)` / `(_ntK_ children...)`
  NonTerminalTpl,
  /// `_str_` / `_strK_`
  StrTpl,
  /// `_val_` / `_valK_`
  ValTpl,
  /// `.` in a source pattern, `.K` in a target pattern
  Single,
  /// `*` in a source pattern, `*K` in a target pattern
  Sequence,
};

/// A node of either side of a rule. In source patterns (matchers) `index` is
/// the 1-based capture or template number assigned in preorder; in target
/// patterns (expanders) it is the capture or template being referenced.
struct Pattern
{
  PatternType type = PatternType::NonTerminal;
  std::string lang;
  std::string symbol;
  std::string text;
  std::vector<Pattern> children;
  int index = 0;

  bool is_capture() const
  {
    return type == PatternType::Single || type == PatternType::Sequence;
  }
  bool is_template() const
  {
    return type == PatternType::NonTerminalTpl ||
           type == PatternType::StrTpl || type == PatternType::ValTpl;
  }
  bool is_terminal_pattern() const
  {
    return type == PatternType::Str || type == PatternType::NoStr ||
           type == PatternType::Val || type == PatternType::StrTpl ||
           type == PatternType::ValTpl;
  }

  bool operator==(const Pattern&) const = default;
};

enum class Provenance
{
  Base,
  Inferred,
  HandEdited,
};

std::string_view to_string(Provenance p);

struct Rule
{
  std::string id;
  std::vector<Pattern> src;
  std::vector<Pattern> trg;
  Provenance provenance = Provenance::Base;
  int source_order = 0;
  int capture_count = 0;
  int template_count = 0;
};

struct Ruleset
{
  std::string name;
  std::vector<Rule> rules;

  const Rule* find(std::string_view id) const;
  int position(std::string_view id) const;
};

/// Numbers captures and templates, validates references and computes the id.
/// Throws DslSyntaxError, DanglingReference or DanglingTemplateIndex.
Rule make_rule(std::vector<Pattern> src,
               std::vector<Pattern> trg,
               Provenance provenance = Provenance::Base,
               int source_order = 0);

Ruleset parse_ruleset(std::string_view text, std::string name = {});
Ruleset load_ruleset_file(const std::string& path);

/// Parses a single `(MatchExpand ...)` form.
Rule parse_rule(std::string_view text);

std::string serialize_rule(const Rule& rule);
/// Rules separated by blank lines; non-base rules are preceded by their
/// provenance comment.
std::string serialize_ruleset(const Ruleset& rules);

/// Appends the rules of `more` that are not already present, renumbering
/// source order.
void append_rules(Ruleset& into, const Ruleset& more);

struct Capture
{
  std::vector<AstPtr> nodes;
  bool sequence = false;
};

struct TemplateBinding
{
  /// Bound terminal text, or bound kind for `_nt_`.
  std::optional<std::string> value;
  PatternType type = PatternType::StrTpl;
};

struct Bindings
{
  std::vector<Capture> captures;
  std::vector<TemplateBinding> templates;
};

std::optional<Bindings> match_rule(const Rule& rule, const AstNode& node);

struct TargetNode;
using TargetPtr = std::shared_ptr<const TargetNode>;

/// Target-side tree node. A node with `slot >= 0` is a pending q(x) whose
/// source is `PartialTargetAst::slot_sources[slot]`.
struct TargetNode
{
  std::string kind;
  std::optional<std::string> text;
  bool terminal = false;
  std::vector<TargetPtr> children;
  int slot = -1;
};

struct PartialTargetAst
{
  std::vector<TargetPtr> roots;
  std::vector<AstPtr> slot_sources;
};

/// Instantiates the target pattern. When `target` is given, a kind that is a
/// token production of that grammar becomes a terminal; otherwise a kind
/// with one terminal-pattern child does.
PartialTargetAst expand_rule(const Rule& rule,
                             const Bindings& bindings,
                             const GrammarDef* target = nullptr);

/// Orders rules from most to least specific.
struct SpecificityKey
{
  int neg_concrete = 0;
  int placeholders = 0;
  int source_order = 0;

  auto operator<=>(const SpecificityKey&) const = default;
};

SpecificityKey specificity(const Rule& rule);

/// Count of concrete (non-placeholder) matchers in the source pattern.
int concrete_matchers(const Rule& rule);

} // namespace xlate
