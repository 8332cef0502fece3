#pragma once

#include "xlate/grammar.hpp"
#include "xlate/rules.hpp"
#include "xlate/searcher.hpp"

#include <json.hpp>

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace xlate {

using Json = nlohmann::ordered_json;

/// Payload schema version carried as `v` in every request and response.
inline constexpr int kPayloadVersion = 1;

/// Error with an HTTP status, raised by service operations.
class ServiceError : public std::runtime_error
{
public:
  ServiceError(int status, const std::string& message)
    : std::runtime_error(message)
    , status(status)
  {
  }
  int status;
};

// ---- shared by the CLI and the service ---------------------------------------

/// One benchmark directory: `source`, `driver` and optional `expected`.
struct BenchDir
{
  std::string name;
  std::string source;
  std::vector<TestCase> tests;
  bool has_expected = false;
};

/// Throws SetupError when `source` or `driver` is missing.
BenchDir load_bench(const std::string& dir);

/// Every grammar document in `dir` (files without an extension), by name.
std::map<std::string, GrammarDef> load_grammars(const std::string& dir);

struct TranslationJob
{
  std::string source_text;
  /// Drivers in the source language; `expected` is recorded with the source
  /// runner unless `has_expected` is set.
  std::vector<TestCase> tests;
  bool has_expected = false;
  SearchOptions options;
};

/// Parses the source, prepares tests and runs the search. Throws SetupError
/// for unparsable sources and untranslatable drivers.
SearchOutcome run_job(const Translator& t, const TranslationJob& job,
                      const RunnerProfile& source_runner, const RunnerProfile& target_runner);

Json span_json(const Span& s);
Span span_from_json(const Json& j);
Json locator_json(const SlotLocator& l);
SlotLocator locator_from_json(const Json& j);

/// Outcome summary; `source_text` resolves the stuck span to a line.
Json outcome_json(const SearchOutcome& outcome, const std::string& source_text);

/// Text plus the rule mapping (target span, source span, rule id, step).
Json candidate_json(const CandidateTranslation& c);

/// Rule text, provenance, captures and the capture index of every target
/// reference in preorder.
Json rule_json(const Rule& r);

/// Rewrites the capture index of every target reference (preorder) and
/// revalidates the rule. Throws ServiceError(422) on invalid links.
Rule relink_rule(const Rule& r, const std::vector<int>& links);

// ---- rulesets on disk -----------------------------------------------------------

/// Rulesets loaded from a directory, versioned in memory and written back on
/// every mutation. Writes must name the version they were based on; a stale
/// version is rejected with 409.
class RulesetStore
{
public:
  explicit RulesetStore(std::string dir);

  struct Entry
  {
    Ruleset rules;
    int version = 1;
  };

  std::vector<std::string> names() const;
  /// Snapshot; throws ServiceError(404).
  Entry get(const std::string& name) const;
  /// Creates a ruleset (201) or replaces one at `expected_version` (200).
  int put(const std::string& name, Ruleset rules, std::optional<int> expected_version);
  /// Appends rules not already present. Returns the new version and whether
  /// anything was added.
  std::pair<int, bool> append(const std::string& name, const Ruleset& more,
                              std::optional<int> expected_version);
  /// Replaces one rule in place. Returns the new version.
  int replace_rule(const std::string& name, const std::string& rule_id, const Rule& rule,
                   int expected_version);

private:
  void check_version(const Entry& e, std::optional<int> expected) const;
  void persist(const std::string& name, const Entry& e) const;

  std::string dir_;
  mutable std::mutex mu_;
  std::map<std::string, Entry> entries_;
};

// ---- session service ------------------------------------------------------------

struct ServiceConfig
{
  std::string grammars_dir = "grammars";
  std::string rules_dir = "rules";
  /// Benchmarks addressable by name in POST /sessions.
  std::string bench_dir = "bench";
  RunnerProfile source_runner = python_runner();
  RunnerProfile target_runner = node_runner();
  int retry_limit = 20;
};

struct Response
{
  int status = 200;
  Json body;
};

class SessionService
{
public:
  explicit SessionService(ServiceConfig config);
  ~SessionService();

  /// Routes one request. Never throws; errors become JSON error bodies.
  Response handle(const std::string& method, const std::string& path, const std::string& body);

private:
  struct Session;

  Response create_session(const Json& req);
  Response get_session(const std::string& id);
  Response get_candidate(const std::string& id, int n);
  Response post_overrides(const std::string& id, const Json& req);
  Response post_snippets(const std::string& id, const Json& req);
  Response list_rulesets();
  Response post_ruleset(const Json& req);
  Response get_rule(const std::string& name, const std::string& rule_id);
  Response patch_rule(const std::string& name, const std::string& rule_id, const Json& req);
  Response list_grammars();

  std::shared_ptr<Session> find_session(const std::string& id);
  const GrammarDef& grammar(const std::string& name) const;
  Ruleset active_rules(const Session& s) const;
  void rerun(Session& s);
  Json session_json(const Session& s) const;

  ServiceConfig config_;
  std::map<std::string, GrammarDef> grammars_;
  RulesetStore store_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  int next_id_ = 1;
};

/// HTTP front end for a SessionService.
class HttpServer
{
public:
  explicit HttpServer(SessionService& service);
  ~HttpServer();

  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Returns the bound port, or -1 when binding fails.
  int start(const std::string& host, int port);
  /// Binds and serves on the calling thread until stop().
  bool listen(const std::string& host, int port);
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace xlate
