#pragma once

#include "xlate/ast.hpp"
#include "xlate/grammar.hpp"
#include "xlate/rules.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xlate {

class InferenceError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Statement and expression fragments mixed across lines.
class MixedKinds : public InferenceError
{
public:
  using InferenceError::InferenceError;
};

class IncompatibleRoots : public InferenceError
{
public:
  using InferenceError::InferenceError;
};

/// A target template placeholder without a string-equal source template, or
/// a target capture with no source capture to link to.
class UnexpectedTemplate : public InferenceError
{
public:
  using InferenceError::InferenceError;
};

/// Snippet line that does not parse.
class SnippetParseError : public InferenceError
{
public:
  SnippetParseError(const std::string& message, std::size_t line)
    : InferenceError("line " + std::to_string(line + 1) + ": " + message)
    , line(line)
  {
  }
  std::size_t line;
};

// ---- tree edit distance ------------------------------------------------------

std::size_t levenshtein(std::string_view a, std::string_view b);

/// Kind for non-terminals; for terminals the text when anonymous, otherwise
/// kind and text separated by a space.
std::string node_label(const AstNode& node);

/// Levenshtein distance of the labels over the longer label's length.
double rename_cost(const AstNode& a, const AstNode& b);

/// Minimum cost of unit insertions and deletions plus rename_cost renames
/// turning `a` into `b` (ordered trees, Zhang-Shasha).
double tree_edit_distance(const AstNode& a, const AstNode& b);

// ---- fragments and templates -------------------------------------------------

/// One fragment per non-blank line: the line's single statement, or its
/// expression when the statement only wraps an expression. `highlights`
/// (one span per line, relative to the line) select a node explicitly.
std::vector<AstPtr> extract_fragments(std::string_view code, const GrammarDef& grammar,
                                      const std::vector<Span>& highlights = {});

struct Site
{
  /// Capture or template number as used in rule patterns.
  int index = 0;
  PatternType type = PatternType::Single;
  /// Per fragment: the abstracted nodes (captures) or the bound text
  /// (templates, in `values`).
  std::vector<std::vector<AstPtr>> instances;
  std::vector<std::string> values;
};

struct AstTemplate
{
  Pattern root;
  std::vector<Site> captures;
  std::vector<Site> templates;
};

/// `lang` is the prefix used for non-terminal matchers. Throws
/// IncompatibleRoots when root kinds differ.
AstTemplate simultaneous_traversal(const std::vector<AstPtr>& fragments,
                                   const GrammarDef& grammar, const std::string& lang);

struct AmbiguousLink
{
  /// Target reference (position among the target captures, 1-based).
  int target_site = 0;
  /// Tied source captures; the first one was used.
  std::vector<int> candidates;
};

struct Inference
{
  Rule rule;
  std::vector<AmbiguousLink> ambiguous;
  /// Distance-assumption violations and similar soft findings.
  std::vector<std::string> warnings;
};

/// Short language prefix for rule patterns (`py`, `js`, ...).
std::string rule_lang(const GrammarDef& grammar);

Inference infer_rule(const std::vector<AstPtr>& src_fragments,
                     const std::vector<AstPtr>& trg_fragments,
                     const GrammarDef& src_grammar, const GrammarDef& trg_grammar);

/// Extracts fragments from both snippets and infers a rule. Line counts must
/// agree and be 1 or 2.
Inference infer_rule(std::string_view src_snippet, std::string_view trg_snippet,
                     const GrammarDef& src_grammar, const GrammarDef& trg_grammar);

} // namespace xlate
