#include "xlate/service.hpp"

#include "xlate/inference.hpp"
#include "xlate/parser.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <regex>
#include <sstream>

namespace fs = std::filesystem;

namespace xlate {

namespace {

std::optional<std::string>
read_optional(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  if (!in)
    return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool
plain_file(const fs::directory_entry& e)
{
  const auto name = e.path().filename().string();
  return e.is_regular_file() && !name.empty() && name[0] != '.' && !e.path().has_extension();
}

bool
valid_name(const std::string& name)
{
  static const std::regex re("[A-Za-z0-9_-]+");
  return std::regex_match(name, re);
}

template <typename F>
void
each_pattern(std::vector<Pattern>& ps, F&& f)
{
  for (auto& p : ps) {
    f(p);
    each_pattern(p.children, f);
  }
}

template <typename F>
void
each_pattern(const std::vector<Pattern>& ps, F&& f)
{
  for (const auto& p : ps) {
    f(p);
    each_pattern(p.children, f);
  }
}

std::string_view
capture_kind(PatternType t)
{
  return t == PatternType::Sequence ? "sequence" : "single";
}

} // namespace

BenchDir
load_bench(const std::string& dir)
{
  BenchDir b;
  b.name = fs::path(dir).filename().string();
  if (b.name.empty())
    b.name = fs::path(dir).parent_path().filename().string();
  auto source = read_optional(fs::path(dir) / "source");
  auto driver = read_optional(fs::path(dir) / "driver");
  if (!source || !driver)
    throw SetupError("benchmark " + dir + " needs `source` and `driver` files");
  b.source = *source;
  TestCase tc;
  tc.id = "driver";
  tc.driver_source = *driver;
  if (auto expected = read_optional(fs::path(dir) / "expected")) {
    tc.expected = *expected;
    b.has_expected = true;
  }
  b.tests.push_back(std::move(tc));
  return b;
}

std::map<std::string, GrammarDef>
load_grammars(const std::string& dir)
{
  std::map<std::string, GrammarDef> out;
  if (!fs::is_directory(dir))
    return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (plain_file(e))
      out.emplace(e.path().filename().string(), load_grammar_file(e.path().string()));
  }
  return out;
}

SearchOutcome
run_job(const Translator& t, const TranslationJob& job, const RunnerProfile& source_runner,
        const RunnerProfile& target_runner)
{
  AstPtr tree;
  try {
    tree = parse_source(t.source, job.source_text);
  } catch (const ParseError& e) {
    throw SetupError(std::string("source does not parse: ") + e.what());
  }
  auto tests = prepare_tests(t, job.source_text, job.tests, source_runner, !job.has_expected);
  return search_translation(t, tree, tests, target_runner, job.options);
}

Json
span_json(const Span& s)
{
  return Json{{"start", s.start}, {"end", s.end}};
}

Span
span_from_json(const Json& j)
{
  return Span{j.at("start").get<std::size_t>(), j.at("end").get<std::size_t>()};
}

Json
locator_json(const SlotLocator& l)
{
  return Json{{"span", span_json(l.span)}, {"kind", l.kind}, {"occurrence", l.occurrence}};
}

SlotLocator
locator_from_json(const Json& j)
{
  SlotLocator l;
  l.span = span_from_json(j.at("span"));
  l.kind = j.at("kind").get<std::string>();
  l.occurrence = j.value("occurrence", 0);
  return l;
}

Json
outcome_json(const SearchOutcome& o, const std::string& source_text)
{
  Json j;
  j["kind"] = std::string(to_string(o.kind));
  j["retries"] = o.retries;
  j["diagnostic"] = o.diagnostic;
  if (o.candidate)
    j["candidate"] = Json{{"index", o.candidate->index}, {"text", o.candidate->text}};
  else
    j["candidate"] = nullptr;
  if (o.kind == SearchOutcome::Kind::Stuck) {
    Json s;
    s["slot"] = o.slot_description;
    if (o.stuck_span) {
      const auto& sp = *o.stuck_span;
      s["span"] = span_json(sp);
      s["line"] = line_of(source_text, sp.start);
      s["text"] = source_text.substr(sp.start, sp.end - sp.start);
    }
    j["stuck"] = s;
  } else {
    j["stuck"] = nullptr;
  }
  Json tested = Json::array();
  for (std::size_t i = 0; i < o.tested.size(); ++i) {
    const auto& rep = o.reports[i];
    Json t{{"index", o.tested[i].index}, {"verdict", std::string(to_string(rep.verdict))}};
    t["line"] = rep.line ? Json(*rep.line) : Json(nullptr);
    t["message"] = rep.message;
    if (i < o.schedule.size()) {
      t["base"] = o.schedule[i].base;
      t["level"] = o.schedule[i].level;
    }
    tested.push_back(std::move(t));
  }
  j["tested"] = std::move(tested);
  return j;
}

Json
candidate_json(const CandidateTranslation& c)
{
  Json j{{"index", c.index}, {"text", c.text}};
  Json mapping = Json::array();
  for (const auto& m : c.mapping) {
    mapping.push_back(Json{{"target", span_json(m.target)},
                           {"source", m.source ? span_json(*m.source) : Json(nullptr)},
                           {"rule_id", m.rule_id},
                           {"step", m.step}});
  }
  j["mapping"] = std::move(mapping);
  Json steps = Json::array();
  for (std::size_t i = 0; i < c.path.choices.size(); ++i) {
    Json s{{"step", i}, {"rule_id", c.path.choices[i].rule_id}};
    if (i < c.locators.size())
      s["slot"] = locator_json(c.locators[i]);
    steps.push_back(std::move(s));
  }
  j["steps"] = std::move(steps);
  return j;
}

Json
rule_json(const Rule& r)
{
  Json j{{"id", r.id},
         {"provenance", std::string(to_string(r.provenance))},
         {"source_order", r.source_order},
         {"text", serialize_rule(r)}};
  Json captures = Json::array();
  each_pattern(r.src, [&](const Pattern& p) {
    if (p.is_capture())
      captures.push_back(Json{{"index", p.index}, {"kind", capture_kind(p.type)}});
  });
  Json refs = Json::array();
  int pos = 0;
  each_pattern(r.trg, [&](const Pattern& p) {
    if (p.is_capture())
      refs.push_back(Json{{"position", ++pos}, {"index", p.index}, {"kind", capture_kind(p.type)}});
  });
  j["captures"] = std::move(captures);
  j["references"] = std::move(refs);
  return j;
}

Rule
relink_rule(const Rule& r, const std::vector<int>& links)
{
  std::map<int, PatternType> capture_types;
  each_pattern(r.src, [&](const Pattern& p) {
    if (p.is_capture())
      capture_types[p.index] = p.type;
  });
  auto trg = r.trg;
  std::size_t pos = 0;
  std::string problem;
  each_pattern(trg, [&](Pattern& p) {
    if (!p.is_capture())
      return;
    if (pos < links.size() && problem.empty()) {
      const int to = links[pos];
      const auto it = capture_types.find(to);
      if (it == capture_types.end())
        problem = "reference " + std::to_string(pos + 1) + " links to unknown capture " +
                  std::to_string(to);
      else if (it->second != p.type)
        problem = "reference " + std::to_string(pos + 1) + " and capture " +
                  std::to_string(to) + " differ in kind";
      else
        p.index = to;
    }
    ++pos;
  });
  if (pos != links.size())
    throw ServiceError(422, "expected " + std::to_string(pos) + " links, got " +
                              std::to_string(links.size()));
  if (!problem.empty())
    throw ServiceError(422, problem);
  if (trg == r.trg)
    return r;
  try {
    return make_rule(r.src, std::move(trg), Provenance::HandEdited, r.source_order);
  } catch (const std::exception& e) {
    throw ServiceError(422, e.what());
  }
}

// ---- RulesetStore ---------------------------------------------------------------

RulesetStore::RulesetStore(std::string dir)
  : dir_(std::move(dir))
{
  fs::create_directories(dir_);
  for (const auto& e : fs::directory_iterator(dir_)) {
    if (!plain_file(e) || !valid_name(e.path().filename().string()))
      continue;
    const auto name = e.path().filename().string();
    entries_[name] = Entry{load_ruleset_file(e.path().string()), 1};
  }
}

std::vector<std::string>
RulesetStore::names() const
{
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [name, e] : entries_)
    out.push_back(name);
  return out;
}

RulesetStore::Entry
RulesetStore::get(const std::string& name) const
{
  std::lock_guard lock(mu_);
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw ServiceError(404, "no ruleset named " + name);
  return it->second;
}

void
RulesetStore::check_version(const Entry& e, std::optional<int> expected) const
{
  if (expected && *expected != e.version)
    throw ServiceError(409, "ruleset changed: version " + std::to_string(e.version) +
                              ", request based on " + std::to_string(*expected));
}

void
RulesetStore::persist(const std::string& name, const Entry& e) const
{
  const auto path = fs::path(dir_) / name;
  const auto tmp = fs::path(dir_) / ("." + name + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << serialize_ruleset(e.rules);
    if (!out)
      throw ServiceError(500, "cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

int
RulesetStore::put(const std::string& name, Ruleset rules, std::optional<int> expected_version)
{
  if (!valid_name(name))
    throw ServiceError(400, "invalid ruleset name: " + name);
  std::lock_guard lock(mu_);
  rules.name = name;
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    Entry e{std::move(rules), 1};
    persist(name, e);
    entries_.emplace(name, std::move(e));
    return 1;
  }
  if (!expected_version)
    throw ServiceError(409, "ruleset " + name + " exists; send its version to replace it");
  check_version(it->second, expected_version);
  Entry e{std::move(rules), it->second.version + 1};
  persist(name, e);
  it->second = std::move(e);
  return it->second.version;
}

std::pair<int, bool>
RulesetStore::append(const std::string& name, const Ruleset& more,
                     std::optional<int> expected_version)
{
  std::lock_guard lock(mu_);
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw ServiceError(404, "no ruleset named " + name);
  check_version(it->second, expected_version);
  Entry e = it->second;
  const auto before = e.rules.rules.size();
  append_rules(e.rules, more);
  if (e.rules.rules.size() == before)
    return {e.version, false};
  ++e.version;
  persist(name, e);
  it->second = std::move(e);
  return {it->second.version, true};
}

int
RulesetStore::replace_rule(const std::string& name, const std::string& rule_id, const Rule& rule,
                           int expected_version)
{
  std::lock_guard lock(mu_);
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw ServiceError(404, "no ruleset named " + name);
  const int pos = it->second.rules.position(rule_id);
  if (pos < 0)
    throw ServiceError(404, "no rule " + rule_id + " in " + name);
  check_version(it->second, expected_version);
  auto& slot = it->second.rules.rules[static_cast<std::size_t>(pos)];
  if (slot.id == rule.id && slot.provenance == rule.provenance)
    return it->second.version;
  Entry e = it->second;
  e.rules.rules[static_cast<std::size_t>(pos)] = rule;
  ++e.version;
  persist(name, e);
  it->second = std::move(e);
  return it->second.version;
}

// ---- SessionService -------------------------------------------------------------

struct SessionService::Session
{
  std::mutex mu;
  std::string id;
  std::string source_text;
  AstPtr source;
  std::string src_grammar;
  std::string tgt_grammar;
  std::vector<std::string> rules;
  std::vector<TestCase> tests;
  int retry_limit = 20;
  std::vector<Override> overrides;
  std::vector<Json> history;
  std::optional<SearchOutcome> last;
};

namespace {

Json
error_body(const std::string& message)
{
  return Json{{"v", kPayloadVersion}, {"error", message}};
}

Response
ok(Json body, int status = 200)
{
  Json out{{"v", kPayloadVersion}};
  for (auto& [k, v] : body.items())
    out[k] = v;
  return Response{status, std::move(out)};
}

std::vector<std::string>
path_parts(const std::string& path)
{
  std::vector<std::string> out;
  const auto end = path.find('?');
  std::stringstream ss(path.substr(0, end));
  std::string part;
  while (std::getline(ss, part, '/')) {
    if (!part.empty())
      out.push_back(part);
  }
  return out;
}

const AstNode*
find_node(const AstNode& n, const Span& span, const std::string& kind)
{
  if (n.span && *n.span == span && n.kind == kind)
    return &n;
  for (const auto& c : n.children) {
    if (c->span && (c->span->start > span.start || c->span->end < span.end))
      continue;
    if (const auto* hit = find_node(*c, span, kind))
      return hit;
  }
  return nullptr;
}

std::vector<std::string>
applicable_rules(const Ruleset& rules, const AstNode& node)
{
  std::vector<const Rule*> hits;
  for (const auto& r : rules.rules) {
    if (match_rule(r, node))
      hits.push_back(&r);
  }
  std::stable_sort(hits.begin(), hits.end(), [](const Rule* a, const Rule* b) {
    return specificity(*a) < specificity(*b);
  });
  std::vector<std::string> out;
  for (const auto* r : hits)
    out.push_back(r->id);
  return out;
}

std::vector<std::string>
string_list(const Json& j)
{
  if (j.is_string())
    return {j.get<std::string>()};
  return j.get<std::vector<std::string>>();
}

} // namespace

SessionService::SessionService(ServiceConfig config)
  : config_(std::move(config))
  , grammars_(load_grammars(config_.grammars_dir))
  , store_(config_.rules_dir)
{
}

SessionService::~SessionService() = default;

Response
SessionService::handle(const std::string& method, const std::string& path, const std::string& body)
{
  try {
    Json req = Json::object();
    if (method == "POST" || method == "PATCH") {
      try {
        req = body.empty() ? Json::object() : Json::parse(body);
      } catch (const Json::parse_error& e) {
        throw ServiceError(400, std::string("malformed JSON: ") + e.what());
      }
      if (!req.is_object())
        throw ServiceError(400, "request body must be an object");
      if (req.contains("v") && req["v"] != kPayloadVersion)
        throw ServiceError(400, "unsupported payload version");
    }
    const auto p = path_parts(path);
    auto allow = [&](std::initializer_list<const char*> methods) {
      for (const char* m : methods) {
        if (method == m)
          return;
      }
      throw ServiceError(405, "method not allowed");
    };
    if (p.size() == 1 && p[0] == "sessions") {
      allow({"POST"});
      return create_session(req);
    }
    if (p.size() == 2 && p[0] == "sessions") {
      allow({"GET"});
      return get_session(p[1]);
    }
    if (p.size() == 4 && p[0] == "sessions" && p[2] == "candidates") {
      allow({"GET"});
      int n = 0;
      try {
        n = std::stoi(p[3]);
      } catch (const std::exception&) {
        throw ServiceError(404, "bad candidate index");
      }
      return get_candidate(p[1], n);
    }
    if (p.size() == 3 && p[0] == "sessions" && p[2] == "overrides") {
      allow({"POST"});
      return post_overrides(p[1], req);
    }
    if (p.size() == 3 && p[0] == "sessions" && p[2] == "snippets") {
      allow({"POST"});
      return post_snippets(p[1], req);
    }
    if (p.size() == 1 && p[0] == "rulesets") {
      allow({"GET", "POST"});
      return method == "GET" ? list_rulesets() : post_ruleset(req);
    }
    if (p.size() == 4 && p[0] == "rulesets" && p[2] == "rules") {
      allow({"GET", "PATCH"});
      return method == "GET" ? get_rule(p[1], p[3]) : patch_rule(p[1], p[3], req);
    }
    if (p.size() == 1 && p[0] == "grammars") {
      allow({"GET"});
      return list_grammars();
    }
    throw ServiceError(404, "no such endpoint: " + path);
  } catch (const ServiceError& e) {
    return Response{e.status, error_body(e.what())};
  } catch (const Json::exception& e) {
    return Response{400, error_body(std::string("bad request: ") + e.what())};
  } catch (const SetupError& e) {
    return Response{422, error_body(e.what())};
  } catch (const RunnerUnavailable& e) {
    return Response{503, error_body(e.what())};
  } catch (const std::exception& e) {
    return Response{500, error_body(e.what())};
  }
}

const GrammarDef&
SessionService::grammar(const std::string& name) const
{
  auto it = grammars_.find(name);
  if (it == grammars_.end())
    throw ServiceError(422, "unknown grammar " + name);
  return it->second;
}

Ruleset
SessionService::active_rules(const Session& s) const
{
  Ruleset out;
  for (const auto& name : s.rules) {
    const auto e = store_.get(name);
    for (const auto& r : e.rules.rules)
      out.rules.push_back(r);
  }
  // Concatenation keeps file order; source order follows position.
  for (std::size_t i = 0; i < out.rules.size(); ++i)
    out.rules[i].source_order = static_cast<int>(i);
  return out;
}

void
SessionService::rerun(Session& s)
{
  const auto rules = active_rules(s);
  const Translator t{grammar(s.src_grammar), grammar(s.tgt_grammar), rules};
  TranslationJob job;
  job.source_text = s.source_text;
  job.tests = s.tests;
  job.has_expected = true;
  job.options.retry_limit = s.retry_limit;
  job.options.overrides = s.overrides;
  auto outcome = run_job(t, job, config_.source_runner, config_.target_runner);
  s.history.push_back(outcome_json(outcome, s.source_text));
  s.last = std::move(outcome);
}

Json
SessionService::session_json(const Session& s) const
{
  Json j{{"session_id", s.id},
         {"source", s.source_text},
         {"src_grammar", s.src_grammar},
         {"tgt_grammar", s.tgt_grammar},
         {"rules", s.rules},
         {"retry_limit", s.retry_limit}};
  Json ov = Json::array();
  for (const auto& o : s.overrides)
    ov.push_back(Json{{"slot", locator_json(o.slot)}, {"rule_id", o.rule_id}});
  j["overrides"] = std::move(ov);
  j["outcomes"] = s.history;
  j["outcome"] = s.history.empty() ? Json(nullptr) : s.history.back();
  j["prompt"] = s.history.empty() ? Json(nullptr) : s.history.back()["stuck"];
  return j;
}

std::shared_ptr<SessionService::Session>
SessionService::find_session(const std::string& id)
{
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end())
    throw ServiceError(404, "no session " + id);
  return it->second;
}

Response
SessionService::create_session(const Json& req)
{
  auto s = std::make_shared<Session>();
  bool has_expected = false;
  if (req.contains("bench")) {
    const auto name = req["bench"].get<std::string>();
    if (!valid_name(name))
      throw ServiceError(400, "invalid benchmark name");
    auto b = load_bench((fs::path(config_.bench_dir) / name).string());
    s->source_text = b.source;
    s->tests = b.tests;
    has_expected = b.has_expected;
  }
  if (req.contains("source"))
    s->source_text = req["source"].get<std::string>();
  if (req.contains("tests")) {
    s->tests.clear();
    has_expected = true;
    int i = 0;
    for (const auto& t : req["tests"]) {
      TestCase tc;
      tc.id = t.value("id", "test" + std::to_string(++i));
      tc.driver_source = t.at("driver").get<std::string>();
      if (t.contains("expected"))
        tc.expected = t["expected"].get<std::string>();
      else
        has_expected = false;
      s->tests.push_back(std::move(tc));
    }
  }
  if (s->source_text.empty())
    throw ServiceError(400, "`source` or `bench` is required");
  s->src_grammar = req.value("src_grammar", "python_subset");
  s->tgt_grammar = req.value("tgt_grammar", "js_subset");
  s->rules = req.contains("rules") ? string_list(req["rules"]) : std::vector<std::string>{"corpus"};
  if (s->rules.empty())
    throw ServiceError(400, "`rules` must name at least one ruleset");
  s->retry_limit = req.value("retry_limit", config_.retry_limit);
  if (s->retry_limit < 1)
    throw ServiceError(400, "`retry_limit` must be positive");

  const auto& src = grammar(s->src_grammar);
  grammar(s->tgt_grammar);
  try {
    s->source = parse_source(src, s->source_text);
  } catch (const ParseError& e) {
    throw ServiceError(422, std::string("source does not parse: ") + e.what());
  }
  if (!has_expected) {
    const auto rules = active_rules(*s);
    const Translator t{src, grammar(s->tgt_grammar), rules};
    s->tests = prepare_tests(t, s->source_text, s->tests, config_.source_runner, true);
  }
  rerun(*s);
  {
    std::lock_guard lock(mu_);
    s->id = "s" + std::to_string(next_id_++);
    sessions_[s->id] = s;
  }
  std::lock_guard lock(s->mu);
  return ok(Json{{"session_id", s->id}, {"outcome", s->history.back()}}, 201);
}

Response
SessionService::get_session(const std::string& id)
{
  auto s = find_session(id);
  std::lock_guard lock(s->mu);
  return ok(session_json(*s));
}

Response
SessionService::get_candidate(const std::string& id, int n)
{
  auto s = find_session(id);
  std::lock_guard lock(s->mu);
  if (!s->last || n < 1 || n > static_cast<int>(s->last->tested.size()))
    throw ServiceError(404, "no candidate " + std::to_string(n));
  const auto& c = s->last->tested[static_cast<std::size_t>(n - 1)];
  const auto& rep = s->last->reports[static_cast<std::size_t>(n - 1)];
  Json j = candidate_json(c);
  j["verdict"] = std::string(to_string(rep.verdict));
  j["line"] = rep.line ? Json(*rep.line) : Json(nullptr);
  j["message"] = rep.message;
  const auto rules = active_rules(*s);
  for (auto& step : j["steps"]) {
    if (!step.contains("slot"))
      continue;
    const auto loc = locator_from_json(step["slot"]);
    if (const auto* node = find_node(*s->source, loc.span, loc.kind))
      step["alternatives"] = applicable_rules(rules, *node);
  }
  return ok(std::move(j));
}

Response
SessionService::post_overrides(const std::string& id, const Json& req)
{
  auto s = find_session(id);
  std::lock_guard lock(s->mu);
  const auto rules = active_rules(*s);
  auto overrides = req.value("clear", false) ? std::vector<Override>{} : s->overrides;
  for (const auto& o : req.value("overrides", Json::array())) {
    Override ov{locator_from_json(o.at("slot")), o.at("rule_id").get<std::string>()};
    const Rule* rule = rules.find(ov.rule_id);
    if (!rule)
      throw ServiceError(422, "rule " + ov.rule_id + " is not in the session's rulesets");
    const auto* node = find_node(*s->source, ov.slot.span, ov.slot.kind);
    if (!node)
      throw ServiceError(422, "no source node at the given slot");
    if (!match_rule(*rule, *node))
      throw ServiceError(422, "rule " + ov.rule_id + " does not apply at the given slot");
    std::erase_if(overrides, [&](const Override& x) { return x.slot == ov.slot; });
    overrides.push_back(std::move(ov));
  }
  s->overrides = std::move(overrides);
  rerun(*s);
  auto j = session_json(*s);
  return ok(Json{{"session_id", s->id}, {"overrides", j["overrides"]}, {"outcome", s->history.back()}});
}

Response
SessionService::post_snippets(const std::string& id, const Json& req)
{
  auto s = find_session(id);
  std::lock_guard lock(s->mu);
  const auto src_snippet = req.at("source").get<std::string>();
  const auto trg_snippet = req.at("target").get<std::string>();
  const auto target_set = req.value("ruleset", s->rules.back());
  if (std::find(s->rules.begin(), s->rules.end(), target_set) == s->rules.end())
    throw ServiceError(422, "ruleset " + target_set + " is not used by this session");
  Inference inf;
  try {
    inf = infer_rule(src_snippet, trg_snippet, grammar(s->src_grammar), grammar(s->tgt_grammar));
  } catch (const InferenceError& e) {
    throw ServiceError(422, e.what());
  } catch (const ParseError& e) {
    throw ServiceError(422, e.what());
  }
  Ruleset more;
  more.rules.push_back(inf.rule);
  std::optional<int> expected;
  if (req.contains("version"))
    expected = req["version"].get<int>();
  const auto [version, added] = store_.append(target_set, more, expected);
  rerun(*s);
  Json ambiguous = Json::array();
  for (const auto& a : inf.ambiguous)
    ambiguous.push_back(Json{{"reference", a.target_site}, {"candidates", a.candidates}});
  return ok(Json{{"rule", rule_json(inf.rule)},
                 {"added", added},
                 {"ambiguous", ambiguous},
                 {"warnings", inf.warnings},
                 {"ruleset", Json{{"name", target_set}, {"version", version}}},
                 {"outcome", s->history.back()}});
}

Response
SessionService::list_rulesets()
{
  Json list = Json::array();
  for (const auto& name : store_.names()) {
    const auto e = store_.get(name);
    Json rules = Json::array();
    for (const auto& r : e.rules.rules)
      rules.push_back(Json{{"id", r.id}, {"provenance", std::string(to_string(r.provenance))}});
    list.push_back(Json{{"name", name}, {"version", e.version}, {"rules", std::move(rules)}});
  }
  return ok(Json{{"rulesets", std::move(list)}});
}

Response
SessionService::post_ruleset(const Json& req)
{
  const auto name = req.at("name").get<std::string>();
  Ruleset rs;
  try {
    rs = parse_ruleset(req.value("text", ""), name);
  } catch (const std::exception& e) {
    throw ServiceError(422, e.what());
  }
  std::optional<int> expected;
  if (req.contains("version"))
    expected = req["version"].get<int>();
  const int version = store_.put(name, std::move(rs), expected);
  const auto e = store_.get(name);
  return ok(Json{{"name", name}, {"version", version}, {"rule_count", e.rules.rules.size()}},
            version == 1 ? 201 : 200);
}

Response
SessionService::get_rule(const std::string& name, const std::string& rule_id)
{
  const auto e = store_.get(name);
  const Rule* r = e.rules.find(rule_id);
  if (!r)
    throw ServiceError(404, "no rule " + rule_id + " in " + name);
  return ok(Json{{"ruleset", name}, {"version", e.version}, {"rule", rule_json(*r)}});
}

Response
SessionService::patch_rule(const std::string& name, const std::string& rule_id, const Json& req)
{
  if (!req.contains("version"))
    throw ServiceError(400, "`version` is required");
  const int expected = req["version"].get<int>();
  const auto e = store_.get(name);
  const Rule* r = e.rules.find(rule_id);
  if (!r)
    throw ServiceError(404, "no rule " + rule_id + " in " + name);
  const auto updated = relink_rule(*r, req.at("links").get<std::vector<int>>());
  const int version = store_.replace_rule(name, rule_id, updated, expected);
  return ok(Json{{"ruleset", name}, {"version", version}, {"rule", rule_json(updated)}});
}

Response
SessionService::list_grammars()
{
  Json list = Json::array();
  for (const auto& [name, g] : grammars_) {
    list.push_back(Json{{"name", name},
                        {"language", g.language_name},
                        {"lang", rule_lang(g)},
                        {"start", g.start_symbol},
                        {"productions", g.productions.size()}});
  }
  return ok(Json{{"grammars", std::move(list)}});
}

} // namespace xlate
