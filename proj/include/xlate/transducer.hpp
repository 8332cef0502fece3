#pragma once

#include "xlate/ast.hpp"
#include "xlate/pda.hpp"
#include "xlate/rules.hpp"

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace xlate {

/// A pending q(x): the task of transducing one source subtree.
struct SlotNode
{
  int slot_id = -1;
  AstPtr source;
  /// Slot whose expansion created this one; -1 for the root.
  int parent = -1;
};

/// One applicable rule at a slot.
struct TransductionNode
{
  const Rule* rule = nullptr;
  std::string rule_id;
  Bindings bindings;
  PartialTargetAst fragment;
  /// One slot per distinct captured node, in order of first appearance.
  std::vector<int> child_slots;
  /// Fragment slot index -> index into child_slots. A capture referenced
  /// twice shares its slot, so its translation is derived once.
  std::vector<int> slot_map;

  /// Preorder events of the fragment. A Slot event marks where
  /// `child_slots[slot_id]` goes.
  std::vector<PdaEvent> events;
};

struct Choice
{
  int slot_id = -1;
  std::string rule_id;

  bool operator==(const Choice&) const = default;
};

/// Leftmost derivation trace.
struct DerivationPath
{
  std::vector<Choice> choices;

  bool operator==(const DerivationPath&) const = default;
};

/// Lazily expanded derivation tree. Slot ids are unique across all trees in
/// the process.
class DerivationTree
{
public:
  explicit DerivationTree(AstPtr source, const GrammarDef* target = nullptr);

  const SlotNode& root() const { return slots_.at(root_); }
  const SlotNode& slot(int slot_id) const { return slots_.at(slot_id); }
  const GrammarDef* target_grammar() const { return target_; }

  /// Applicable rules in specificity order, memoized per slot. Throws
  /// std::invalid_argument when called with a different ruleset than the
  /// first expansion.
  const std::vector<TransductionNode>& expand_slot(int slot_id, const Ruleset& rules);

  bool expanded(int slot_id) const { return cache_.count(slot_id) != 0; }
  std::size_t cache_size() const { return cache_.size(); }
  std::size_t slot_count() const { return slots_.size(); }

private:
  int new_slot(AstPtr source, int parent);

  int root_ = -1;
  const GrammarDef* target_;
  const Ruleset* ruleset_ = nullptr;
  std::size_t ruleset_size_ = 0;
  std::unordered_map<int, SlotNode> slots_;
  std::unordered_map<int, std::vector<TransductionNode>> cache_;
};

DerivationTree init_derivation(AstPtr source, const GrammarDef* target = nullptr);

/// A slot with no applicable rule.
class Stuck : public std::runtime_error
{
public:
  Stuck(int slot_id, AstPtr source, PartialTargetAst partial, DerivationPath path);

  int slot_id;
  AstPtr source;
  Span span;
  PartialTargetAst partial;
  DerivationPath path;
};

using ChoicePolicy =
  std::function<std::size_t(const SlotNode&, const std::vector<TransductionNode>&)>;

/// Always the most specific rule.
std::size_t first_choice(const SlotNode&, const std::vector<TransductionNode>&);

struct Derivation
{
  PartialTargetAst ast;
  DerivationPath path;
};

/// Leftmost derivation following `policy`, without syntax checking. Throws
/// Stuck with the partial result when a slot has no applicable rule.
Derivation derive(DerivationTree& tree, const Ruleset& rules,
                  const ChoicePolicy& policy = first_choice);

/// The partial target produced by applying `path` (slots the path does not
/// cover stay pending).
PartialTargetAst assemble(DerivationTree& tree, const Ruleset& rules,
                          const DerivationPath& path);

/// slot id -> excluded rule ids.
using PivotConstraints = std::map<int, std::set<std::string>>;

/// Next complete path in priority order. Choices before the earliest
/// constrained slot of `previous` are kept; constrained slots avoid their
/// excluded rules.
std::optional<DerivationPath> next_path(DerivationTree& tree, const Ruleset& rules,
                                        const DerivationPath& previous,
                                        const PivotConstraints& constraints = {});

/// Identifies a slot independently of slot ids: the source node's span and
/// kind, plus how many earlier slots in the path had the same span and kind.
struct SlotLocator
{
  Span span;
  std::string kind;
  int occurrence = 0;

  bool operator==(const SlotLocator&) const = default;
};

struct Override
{
  SlotLocator slot;
  std::string rule_id;
};

struct SearchRequest
{
  /// When set, every fragment is validated incrementally and only accepted
  /// derivations are returned.
  const Pda* pda = nullptr;
  PivotConstraints exclude;
  /// Choices forced at the start of the path.
  std::vector<Choice> frozen;
  /// Only paths strictly after this one in priority order.
  std::optional<DerivationPath> after;
  std::vector<Override> overrides;
  /// Branches tried before giving up.
  std::size_t budget = 20000;
  /// Give up at the first slot without applicable rules instead of
  /// backtracking around it.
  bool stop_when_stuck = false;
};

struct SearchResult
{
  std::optional<DerivationPath> path;
  /// Accepted target tree (with PDA) tagged by derivation step; otherwise
  /// the assembled target converted to an AST.
  AstPtr target;
  /// First slot found without applicable rules.
  std::optional<int> stuck_slot;
  bool budget_exhausted = false;
  std::size_t branches = 0;
};

/// Depth-first search over leftmost derivations in priority order.
SearchResult search(DerivationTree& tree, const Ruleset& rules, const SearchRequest& request);

/// Locator of every choice in `path`, in path order.
std::vector<SlotLocator> locate(const DerivationTree& tree, const DerivationPath& path);

/// A complete target converted to an AST; throws std::logic_error when slots
/// remain.
AstPtr to_ast(const PartialTargetAst& ast);

} // namespace xlate
