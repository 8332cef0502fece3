#pragma once

#include "xlate/ast.hpp"
#include "xlate/grammar.hpp"
#include "xlate/pda.hpp"
#include "xlate/printer.hpp"
#include "xlate/rules.hpp"
#include "xlate/transducer.hpp"

#include <chrono>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace xlate {

class RunnerUnavailable : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Bad benchmark or driver setup (exit code 4 in the CLI).
class SetupError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class NoLocation : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct RunResult
{
  int exit_code = 0;
  bool timed_out = false;
  std::string out;
  std::string err;
  /// Path the program was written to, for error-line patterns.
  std::string file;
  double seconds = 0;
};

/// How to run programs of one language.
struct RunnerProfile
{
  std::vector<std::string> command;
  std::string extension;
  /// Regular expressions with one group capturing a line number. `{file}`
  /// is replaced by the escaped program path.
  std::vector<std::string> line_patterns;
  std::chrono::milliseconds timeout{10000};
  /// Replaces the subprocess when set (tests).
  std::function<RunResult(const std::string& program)> run;
};

/// `command` is split on whitespace.
RunnerProfile node_runner(const std::string& command = "node");
RunnerProfile python_runner(const std::string& command = "python3");

/// Writes `program` to a temporary file and runs it with a wall-clock
/// timeout. Throws RunnerUnavailable when the command cannot be found.
RunResult run_program(const RunnerProfile& runner, const std::string& program);

/// Line numbers found in stderr, in order of appearance.
std::vector<int> error_lines(const RunnerProfile& runner, const RunResult& result);

struct MappingEntry
{
  Span target;
  std::optional<Span> source;
  std::string rule_id;
  int step = -1;
};

struct CandidateTranslation
{
  int index = 0;
  std::string text;
  std::vector<MappingEntry> mapping;
  DerivationPath path;
  /// Locator of each path step.
  std::vector<SlotLocator> locators;
};

struct TestCase
{
  std::string id;
  std::string driver_source;
  std::string driver_target;
  std::string expected;
};

enum class TestVerdict
{
  Pass,
  RuntimeError,
  OutputMismatch,
};

std::string_view to_string(TestVerdict v);

struct TestReport
{
  TestVerdict verdict = TestVerdict::Pass;
  /// Faulty line of the candidate text (1-based), when known.
  std::optional<int> line;
  std::string message;
  /// First differing stdout line (1-based) for OutputMismatch.
  std::optional<int> first_diff_line;
  std::string stdout_text;
  std::string stderr_text;
  double seconds = 0;
  std::string test_id;
};

/// Runs candidate text followed by each translated driver. Stops at the
/// first failing case.
TestReport run_tests(const CandidateTranslation& candidate, const std::vector<TestCase>& tests,
                     const RunnerProfile& runner);

/// Derivation steps with a printed token on the report's line. Throws
/// NoLocation when the report has no line or the line maps to nothing.
std::set<int> localize_fault(const TestReport& report, const CandidateTranslation& candidate);

/// Bookkeeping of how a tested candidate was produced.
struct ScheduleEntry
{
  int candidate = 0;
  /// Candidate whose fault segment was being varied (0 for the first
  /// candidate and global enumeration).
  int base = 0;
  /// Number of rule choices changed relative to `base`.
  int level = 0;
  /// Locators of the base's fault segment.
  std::vector<SlotLocator> segment;
};

struct SearchOutcome
{
  enum class Kind
  {
    Success,
    Stuck,
    Exhausted,
  };
  Kind kind = Kind::Stuck;
  std::optional<CandidateTranslation> candidate;
  int retries = 0;
  std::optional<Span> stuck_span;
  std::string slot_description;
  std::vector<CandidateTranslation> tested;
  std::vector<TestReport> reports;
  std::vector<ScheduleEntry> schedule;
  std::string diagnostic;
};

std::string_view to_string(SearchOutcome::Kind k);

struct SearchOptions
{
  int retry_limit = 20;
  /// Combinations tried per number of changed choices.
  std::size_t combination_cap = 512;
  std::size_t derivation_budget = 20000;
  /// Rule choices pinned by the user. They win over retry variations.
  std::vector<Override> overrides;
  std::function<void(const CandidateTranslation&, const TestReport&)> on_candidate;
};

/// Everything one translation needs.
struct Translator
{
  const GrammarDef& source;
  const GrammarDef& target;
  const Ruleset& rules;
};

/// First syntactically valid candidate. Throws SetupError when there is
/// none (used for drivers).
std::string translate_first(const Translator& t, const std::string& source_text);

/// Test-retry loop over candidate translations of `source`.
SearchOutcome search_translation(const Translator& t, const AstPtr& source,
                                 const std::vector<TestCase>& tests, const RunnerProfile& runner,
                                 const SearchOptions& options = {});

/// Number of rule choices at the segment's locators that differ between two
/// candidates; a locator missing on one side counts as a difference.
int changed_choices(const CandidateTranslation& a, const CandidateTranslation& b,
                    const std::vector<SlotLocator>& segment);

/// Translates each case's driver and, when `record_expected` is set, records
/// the expected output by running the source followed by the driver.
std::vector<TestCase> prepare_tests(const Translator& t, const std::string& source_text,
                                    std::vector<TestCase> cases,
                                    const RunnerProfile& source_runner,
                                    bool record_expected = true);

} // namespace xlate
