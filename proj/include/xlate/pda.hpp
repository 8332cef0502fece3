#pragma once

#include "xlate/ast.hpp"
#include "xlate/grammar.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xlate {

class IncompleteLog : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

enum class PdaState
{
  Start,
  Accept,
  Error,
};

enum class EventType
{
  Enter,
  Token,
  Exit,
  /// A pending slot whose content arrives later.
  Slot,
  End,
};

struct PdaEvent
{
  EventType type = EventType::Token;
  std::string kind;
  std::optional<std::string> text;
  std::int32_t tag = -1;
  int slot_id = -1;

  static PdaEvent from(const TraversalToken& token);
  static PdaEvent slot(int id);
  static PdaEvent end();
};

std::vector<PdaEvent> events_of(const std::vector<TraversalToken>& tokens);

enum class InstrType
{
  ChoseAlternative,
  MatchedToken,
  EnteredRepeat,
  ExitedRepeat,
  OpenedNode,
  ClosedNode,
};

struct InstructionRecord
{
  InstrType type = InstrType::MatchedToken;
  /// Production for ChoseAlternative and repeats, node kind for
  /// Opened/ClosedNode, terminal kind for MatchedToken.
  std::string kind;
  std::optional<std::string> text;
  int alternative = -1;
  std::int32_t tag = -1;
  bool layout = false;
  /// A missing terminal whose text could not be recovered from the grammar.
  bool flagged = false;
};

std::string to_string(const InstructionRecord& record);

/// Stack symbol annotated with the production it belongs to.
struct StackSymbol
{
  enum Type : std::uint8_t
  {
    NonTerminal,
    Expr,
    Close,
  };
  Type type = NonTerminal;
  int production = -1;
  const PegExpr* expr = nullptr;

  bool operator==(const StackSymbol&) const = default;
};

struct StackCell;
using StackPtr = std::shared_ptr<const StackCell>;

struct StackCell
{
  StackSymbol symbol;
  StackPtr next;
  std::size_t hash = 0;
  std::size_t depth = 0;
};

struct LogCell;
using LogPtr = std::shared_ptr<const LogCell>;

struct LogCell
{
  InstructionRecord record;
  LogPtr prev;
  std::size_t length = 0;
};

struct Obligation;
using ObligationPtr = std::shared_ptr<const Obligation>;

struct Obligation
{
  int slot_id = -1;
  StackPtr stack;
  ObligationPtr next;
};

/// Immutable configuration. Copying is constant time and copies share all
/// structure, which is what makes snapshots cheap.
struct PdaConfig
{
  PdaState state = PdaState::Start;
  StackPtr stack;
  LogPtr log;
  ObligationPtr suspended;

  std::vector<InstructionRecord> records() const;
  std::size_t log_length() const { return log ? log->length : 0; }
  /// Stack snapshot recorded when `slot_id` was suspended.
  std::optional<StackPtr> obligation(int slot_id) const;
};

inline PdaConfig
snapshot(const PdaConfig& config)
{
  return config;
}

struct Verdict
{
  bool rejected = false;
  std::vector<PdaConfig> configs;
};

class Pda
{
public:
  /// Throws LeftRecursion. `start` overrides the grammar's start symbol.
  explicit Pda(const GrammarDef& grammar, std::string_view start = {});

  const GrammarDef& grammar() const { return *grammar_; }

  PdaConfig initial() const;

  /// All successor configurations in priority order; a lone Error
  /// configuration when there are none.
  std::vector<PdaConfig> step(const PdaConfig& config, const PdaEvent& event) const;

  /// Steps every configuration through `events`, deduplicating and capping
  /// the configuration set.
  Verdict feed(const std::vector<PdaConfig>& configs,
               const std::vector<PdaEvent>& events) const;

  /// Feeds the tokens plus End from the initial configuration.
  std::optional<PdaConfig> accept(const std::vector<TraversalToken>& tokens) const;

  static constexpr std::size_t kMaxConfigs = 4096;

private:
  struct Out;
  void expand(const StackPtr& stack, const LogPtr& log, const PdaEvent& ev,
              Out& out, int depth) const;
  StackPtr push(StackPtr stack, StackSymbol sym) const;
  const PegExpr* repeat_tail(const PegExpr* repeat1) const;

  const GrammarDef* grammar_;
  int start_ = -1;
  /// Repeat0 twins of Repeat1 expressions.
  std::unordered_map<const PegExpr*, std::shared_ptr<PegExpr>> twins_;
  /// For each fold production, the trailer productions of its tail.
  std::vector<std::vector<int>> trailers_;
  /// For each fold production, the tail expression (the Repeat0 body).
  std::vector<const PegExpr*> fold_tail_;
};

Pda build_pda(const GrammarDef& grammar, std::string_view start = {});

Verdict validate_increment(const Pda& pda,
                           const std::vector<PdaConfig>& configs,
                           const std::vector<PdaEvent>& events);

/// Rebuilds the tree an accepting run recognized, including layout
/// terminals (kinds `$NEWLINE`, `$INDENT`, `$DEDENT`). Throws IncompleteLog
/// for non-accepting configurations.
AstPtr reconstruct_parse_tree(const PdaConfig& config);

/// One line per instruction.
std::string dump_log(const PdaConfig& config);

} // namespace xlate
