#include "xlate/searcher.hpp"

#include "xlate/parser.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

namespace xlate {

namespace {

std::vector<std::string>
split_words(const std::string& s)
{
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;)
    out.push_back(w);
  return out;
}

bool
executable_exists(const std::string& name)
{
  if (name.find('/') != std::string::npos)
    return ::access(name.c_str(), X_OK) == 0;
  const char* path = std::getenv("PATH");
  if (!path)
    return false;
  std::istringstream dirs(path);
  for (std::string dir; std::getline(dirs, dir, ':');) {
    if (dir.empty())
      continue;
    if (::access((dir + "/" + name).c_str(), X_OK) == 0)
      return true;
  }
  return false;
}

std::string
regex_escape(const std::string& s)
{
  static const std::string special = R"(\^$.|?*+()[]{})";
  std::string out;
  for (char c : s) {
    if (special.find(c) != std::string::npos)
      out += '\\';
    out += c;
  }
  return out;
}

std::vector<std::string>
lines_of(const std::string& s)
{
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    auto end = s.find('\n', pos);
    if (end == std::string::npos)
      end = s.size();
    out.push_back(s.substr(pos, end - pos));
    pos = end + 1;
  }
  return out;
}

std::string
error_message(const std::string& err)
{
  static const std::regex kError(R"(^\s*([A-Za-z]*Error\b.*)$)");
  for (const auto& line : lines_of(err)) {
    std::smatch m;
    if (std::regex_match(line, m, kError))
      return m[1];
  }
  for (const auto& line : lines_of(err)) {
    if (line.find_first_not_of(" \t") != std::string::npos)
      return line;
  }
  return {};
}

} // namespace

RunnerProfile
node_runner(const std::string& command)
{
  RunnerProfile p;
  p.command = split_words(command);
  // Modules are always strict, so undeclared assignments fail loudly.
  p.extension = ".mjs";
  p.line_patterns = {R"({file}:(\d+))"};
  return p;
}

RunnerProfile
python_runner(const std::string& command)
{
  RunnerProfile p;
  p.command = split_words(command);
  p.extension = ".py";
  p.line_patterns = {R"re(File "{file}", line (\d+))re"};
  return p;
}

RunResult
run_program(const RunnerProfile& runner, const std::string& program)
{
  if (runner.run)
    return runner.run(program);
  if (runner.command.empty() || !executable_exists(runner.command[0]))
    throw RunnerUnavailable("runner not found: " +
                            (runner.command.empty() ? std::string("<empty>") : runner.command[0]));

  auto tmpl = (std::filesystem::temp_directory_path() / ("xlate-XXXXXX" + runner.extension)).string();
  std::vector<char> name(tmpl.begin(), tmpl.end());
  name.push_back('\0');
  const int fd = ::mkstemps(name.data(), static_cast<int>(runner.extension.size()));
  if (fd < 0)
    throw RunnerUnavailable(std::string("cannot create temporary file: ") + std::strerror(errno));
  const std::string file(name.data());
  {
    const char* p = program.data();
    std::size_t left = program.size();
    while (left > 0) {
      const auto n = ::write(fd, p, left);
      if (n <= 0)
        break;
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    ::close(fd);
  }

  int out_pipe[2];
  int err_pipe[2];
  if (::pipe(out_pipe) != 0 || ::pipe(err_pipe) != 0) {
    std::filesystem::remove(file);
    throw RunnerUnavailable("pipe failed");
  }
  const auto start = std::chrono::steady_clock::now();
  const pid_t pid = ::fork();
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(out_pipe[1], 1);
    ::dup2(err_pipe[1], 2);
    ::close(out_pipe[0]);
    ::close(err_pipe[0]);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    std::vector<char*> argv;
    for (const auto& a : runner.command)
      argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(const_cast<char*>(file.c_str()));
    argv.push_back(nullptr);
    ::execvp(argv[0], argv.data());
    ::_exit(127);
  }
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);

  RunResult r;
  r.file = file;
  pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
  std::string* sinks[2] = {&r.out, &r.err};
  int open_fds = 2;
  const auto deadline = start + runner.timeout;
  char buf[4096];
  while (open_fds > 0) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                        deadline - std::chrono::steady_clock::now())
                        .count();
    if (left <= 0) {
      r.timed_out = true;
      ::kill(-pid, SIGKILL);
      break;
    }
    const int ready = ::poll(fds, 2, static_cast<int>(left));
    if (ready < 0 && errno == EINTR)
      continue;
    for (int i = 0; i < 2; ++i) {
      if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR)))
        continue;
      const auto n = ::read(fds[i].fd, buf, sizeof buf);
      if (n > 0) {
        sinks[i]->append(buf, static_cast<std::size_t>(n));
      } else {
        ::close(fds[i].fd);
        fds[i].fd = -1;
        --open_fds;
      }
    }
  }
  for (auto& f : fds) {
    if (f.fd >= 0)
      ::close(f.fd);
  }
  int status = 0;
  ::waitpid(pid, &status, 0);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::filesystem::remove(file);
  return r;
}

std::vector<int>
error_lines(const RunnerProfile& runner, const RunResult& result)
{
  std::vector<std::pair<std::size_t, int>> hits;
  for (auto pattern : runner.line_patterns) {
    const auto at = pattern.find("{file}");
    if (at != std::string::npos)
      pattern.replace(at, 6, regex_escape(result.file));
    const std::regex re(pattern);
    for (auto it = std::sregex_iterator(result.err.begin(), result.err.end(), re);
         it != std::sregex_iterator(); ++it) {
      hits.emplace_back(static_cast<std::size_t>(it->position(0)), std::stoi((*it)[1]));
    }
  }
  std::sort(hits.begin(), hits.end());
  std::vector<int> out;
  for (const auto& h : hits)
    out.push_back(h.second);
  return out;
}

std::string_view
to_string(TestVerdict v)
{
  switch (v) {
    case TestVerdict::Pass:
      return "Pass";
    case TestVerdict::RuntimeError:
      return "RuntimeError";
    case TestVerdict::OutputMismatch:
      return "OutputMismatch";
  }
  return "?";
}

std::string_view
to_string(SearchOutcome::Kind k)
{
  switch (k) {
    case SearchOutcome::Kind::Success:
      return "Success";
    case SearchOutcome::Kind::Stuck:
      return "Stuck";
    case SearchOutcome::Kind::Exhausted:
      return "Exhausted";
  }
  return "?";
}

TestReport
run_tests(const CandidateTranslation& candidate, const std::vector<TestCase>& tests,
          const RunnerProfile& runner)
{
  TestReport last;
  std::string text = candidate.text;
  if (!text.empty() && text.back() != '\n')
    text += '\n';
  const int own_lines = static_cast<int>(std::count(text.begin(), text.end(), '\n'));
  for (const auto& t : tests) {
    const auto r = run_program(runner, text + t.driver_target);
    TestReport rep;
    rep.test_id = t.id;
    rep.stdout_text = r.out;
    rep.stderr_text = r.err;
    rep.seconds = r.seconds;
    if (r.timed_out || r.exit_code != 0) {
      rep.verdict = TestVerdict::RuntimeError;
      rep.message = r.timed_out ? "timeout" : error_message(r.err);
      if (!r.timed_out) {
        for (int line : error_lines(runner, r)) {
          if (line >= 1 && line <= own_lines) {
            rep.line = line;
            break;
          }
        }
      }
      return rep;
    }
    if (r.out != t.expected) {
      rep.verdict = TestVerdict::OutputMismatch;
      const auto got = lines_of(r.out);
      const auto want = lines_of(t.expected);
      std::size_t i = 0;
      while (i < got.size() && i < want.size() && got[i] == want[i])
        ++i;
      rep.first_diff_line = static_cast<int>(i) + 1;
      rep.message = "output differs at line " + std::to_string(i + 1);
      return rep;
    }
    last = rep;
  }
  last.verdict = TestVerdict::Pass;
  return last;
}

std::set<int>
localize_fault(const TestReport& report, const CandidateTranslation& candidate)
{
  if (!report.line)
    throw NoLocation("report has no line number");
  std::size_t begin = 0;
  for (int l = 1; l < *report.line; ++l) {
    begin = candidate.text.find('\n', begin);
    if (begin == std::string::npos)
      throw NoLocation("line outside the candidate");
    ++begin;
  }
  auto end = candidate.text.find('\n', begin);
  if (end == std::string::npos)
    end = candidate.text.size();
  std::set<int> steps;
  for (const auto& m : candidate.mapping) {
    if (m.step >= 0 && m.target.start < end && m.target.end > begin)
      steps.insert(m.step);
  }
  if (steps.empty())
    throw NoLocation("line " + std::to_string(*report.line) + " maps to no rule");
  return steps;
}

int
changed_choices(const CandidateTranslation& a, const CandidateTranslation& b,
                const std::vector<SlotLocator>& segment)
{
  auto rule_at = [](const CandidateTranslation& c, const SlotLocator& l) -> const std::string* {
    for (std::size_t i = 0; i < c.locators.size(); ++i) {
      if (c.locators[i] == l)
        return &c.path.choices[i].rule_id;
    }
    return nullptr;
  };
  int n = 0;
  for (const auto& l : segment) {
    const auto* x = rule_at(a, l);
    const auto* y = rule_at(b, l);
    if (!x || !y || *x != *y)
      ++n;
  }
  return n;
}

namespace {

std::string
path_key(const DerivationPath& p)
{
  std::string k;
  for (const auto& c : p.choices) {
    k += std::to_string(c.slot_id);
    k += ':';
    k += c.rule_id;
    k += ';';
  }
  return k;
}

std::string
describe(const AstNode& n)
{
  auto text = leaf_text(n);
  if (text.size() > 60)
    text = text.substr(0, 57) + "...";
  return n.kind + " `" + text + "`";
}

class Session
{
public:
  Session(const Translator& t, const AstPtr& source, const SearchOptions& options)
    : t_(t)
    , options_(options)
    , tree_(source, &t.target)
    , pda_(build_pda(t.target))
  {
  }

  SearchResult derive(SearchRequest req)
  {
    req.pda = &pda_;
    req.stop_when_stuck = true;
    req.budget = options_.derivation_budget;
    req.overrides.insert(req.overrides.end(), options_.overrides.begin(), options_.overrides.end());
    return search(tree_, t_.rules, req);
  }

  CandidateTranslation candidate(const SearchResult& r)
  {
    CandidateTranslation c;
    c.path = *r.path;
    c.locators = locate(tree_, c.path);
    auto printed = print_tree(r.target, t_.target, style_for(t_.target));
    c.text = printed.text;
    for (const auto& tok : printed.tokens) {
      if (tok.tag < 0 || static_cast<std::size_t>(tok.tag) >= c.path.choices.size())
        continue;
      const auto& choice = c.path.choices[static_cast<std::size_t>(tok.tag)];
      c.mapping.push_back({tok.span, tree_.slot(choice.slot_id).source->span, choice.rule_id,
                           tok.tag});
    }
    return c;
  }

  std::vector<std::string> alternatives(const CandidateTranslation& c, int step)
  {
    const auto& choice = c.path.choices[static_cast<std::size_t>(step)];
    std::vector<std::string> out;
    for (const auto& n : tree_.expand_slot(choice.slot_id, t_.rules)) {
      if (n.rule_id != choice.rule_id)
        out.push_back(n.rule_id);
    }
    return out;
  }

  const SlotNode& slot(int id) const { return tree_.slot(id); }

private:
  const Translator& t_;
  const SearchOptions& options_;
  DerivationTree tree_;
  Pda pda_;
};

// Variations of one failing candidate on its fault segment: every way of
// changing 1 choice, then 2, and so on.
class SegmentVariations
{
public:
  SegmentVariations(Session& s, const CandidateTranslation& base, std::set<int> steps,
                    std::size_t cap)
    : base_(base)
    , steps_(steps.begin(), steps.end())
    , cap_(cap)
  {
    for (int st : steps_)
      alts_.push_back(s.alternatives(base, st));
    for (int st : steps_)
      segment_.push_back(base.locators[static_cast<std::size_t>(st)]);
  }

  using Change = std::vector<std::pair<int, std::string>>;

  std::optional<Change> next()
  {
    while (pos_ >= level_items_.size()) {
      if (capped_ || level_ >= steps_.size())
        return std::nullopt;
      ++level_;
      fill_level();
      pos_ = 0;
    }
    return level_items_[pos_++];
  }

  std::vector<Override> overrides(const Change& change) const
  {
    std::vector<Override> out;
    for (std::size_t i = 0; i < base_.path.choices.size(); ++i)
      out.push_back({base_.locators[i], base_.path.choices[i].rule_id});
    for (const auto& [step, rule] : change)
      out[static_cast<std::size_t>(step)].rule_id = rule;
    return out;
  }

  int level() const { return static_cast<int>(level_); }
  bool capped() const { return capped_; }
  const CandidateTranslation& base() const { return base_; }
  const std::vector<SlotLocator>& segment() const { return segment_; }
  int first_step() const { return steps_.front(); }

private:
  void fill_level()
  {
    level_items_.clear();
    std::vector<std::size_t> pick;
    std::function<bool(std::size_t)> choose = [&](std::size_t from) -> bool {
      if (pick.size() == level_)
        return product(pick);
      for (std::size_t i = from; i < steps_.size(); ++i) {
        if (alts_[i].empty())
          continue;
        pick.push_back(i);
        const bool more = choose(i + 1);
        pick.pop_back();
        if (!more)
          return false;
      }
      return true;
    };
    choose(0);
  }

  // Appends the alternatives product for the picked steps; false once the
  // cap is hit.
  bool product(const std::vector<std::size_t>& pick)
  {
    std::vector<std::size_t> digit(pick.size(), 0);
    while (true) {
      if (level_items_.size() >= cap_) {
        capped_ = true;
        return false;
      }
      Change c;
      for (std::size_t j = 0; j < pick.size(); ++j)
        c.emplace_back(steps_[pick[j]], alts_[pick[j]][digit[j]]);
      level_items_.push_back(std::move(c));
      std::size_t j = pick.size();
      while (j > 0) {
        --j;
        if (++digit[j] < alts_[pick[j]].size())
          break;
        digit[j] = 0;
        if (j == 0)
          return true;
      }
      if (pick.empty())
        return true;
    }
  }

  CandidateTranslation base_;
  std::vector<int> steps_;
  std::vector<std::vector<std::string>> alts_;
  std::vector<SlotLocator> segment_;
  std::size_t cap_;
  std::size_t level_ = 0;
  std::vector<Change> level_items_;
  std::size_t pos_ = 0;
  bool capped_ = false;
};

} // namespace

std::string
translate_first(const Translator& t, const std::string& source_text)
{
  AstPtr tree;
  try {
    tree = parse_source(t.source, source_text);
  } catch (const ParseError& e) {
    throw SetupError(std::string("driver does not parse: ") + e.what());
  }
  SearchOptions opts;
  Session s(t, tree, opts);
  auto r = s.derive({});
  if (!r.path) {
    std::string why = "driver has no valid translation";
    if (r.stuck_slot)
      why += ": no rule for " + describe(*s.slot(*r.stuck_slot).source);
    throw SetupError(why);
  }
  return s.candidate(r).text;
}

std::vector<TestCase>
prepare_tests(const Translator& t, const std::string& source_text, std::vector<TestCase> cases,
              const RunnerProfile& source_runner, bool record_expected)
{
  for (auto& c : cases) {
    c.driver_target = translate_first(t, c.driver_source);
    if (!record_expected)
      continue;
    std::string program = source_text;
    if (!program.empty() && program.back() != '\n')
      program += '\n';
    const auto r = run_program(source_runner, program + c.driver_source);
    if (r.timed_out || r.exit_code != 0)
      throw SetupError("source run of test " + c.id + " failed: " + error_message(r.err));
    c.expected = r.out;
  }
  return cases;
}

SearchOutcome
search_translation(const Translator& t, const AstPtr& source, const std::vector<TestCase>& tests,
                   const RunnerProfile& runner, const SearchOptions& options)
{
  SearchOutcome out;
  Session s(t, source, options);
  auto stuck = [&](std::optional<Span> span, std::string why) {
    out.kind = SearchOutcome::Kind::Stuck;
    out.stuck_span = span;
    out.slot_description = std::move(why);
    out.retries = static_cast<int>(out.tested.size());
    return out;
  };

  auto first = s.derive({});
  if (!first.path) {
    if (first.stuck_slot) {
      const auto& src = *s.slot(*first.stuck_slot).source;
      return stuck(src.span, "no rule for " + describe(src));
    }
    out.diagnostic = first.budget_exhausted ? "derivation budget exhausted"
                                            : "no syntactically valid candidate";
    return stuck(source->span, out.diagnostic);
  }

  std::set<std::string> seen;
  CandidateTranslation pending = s.candidate(first);
  ScheduleEntry meta;
  std::optional<SegmentVariations> vary;
  std::pair<int, std::string> vary_signature;

  while (true) {
    if (static_cast<int>(out.tested.size()) >= options.retry_limit) {
      out.kind = SearchOutcome::Kind::Exhausted;
      out.retries = static_cast<int>(out.tested.size());
      out.candidate = out.tested.back();
      return out;
    }
    pending.index = static_cast<int>(out.tested.size()) + 1;
    seen.insert(path_key(pending.path));
    auto report = run_tests(pending, tests, runner);
    meta.candidate = pending.index;
    out.tested.push_back(pending);
    out.reports.push_back(report);
    out.schedule.push_back(meta);
    if (options.on_candidate)
      options.on_candidate(pending, report);
    if (report.verdict == TestVerdict::Pass) {
      out.kind = SearchOutcome::Kind::Success;
      out.candidate = pending;
      out.retries = pending.index;
      return out;
    }

    const CandidateTranslation& failed = out.tested.back();
    std::optional<std::set<int>> segment;
    try {
      segment = localize_fault(report, failed);
    } catch (const NoLocation&) {
    }

    std::optional<CandidateTranslation> next;
    if (segment) {
      const std::pair<int, std::string> sig{*report.line, report.message};
      if (!vary || sig != vary_signature) {
        vary.emplace(s, failed, *segment, options.combination_cap);
        vary_signature = sig;
        meta.segment = vary->segment();
      }
      while (auto change = vary->next()) {
        SearchRequest req;
        req.overrides = vary->overrides(*change);
        auto r = s.derive(req);
        if (!r.path || seen.count(path_key(*r.path)))
          continue;
        next = s.candidate(r);
        meta.base = vary->base().index;
        meta.level = vary->level();
        meta.segment = vary->segment();
        break;
      }
      if (!next) {
        if (vary->capped()) {
          out.kind = SearchOutcome::Kind::Exhausted;
          out.retries = static_cast<int>(out.tested.size());
          out.candidate = out.tested.back();
          out.diagnostic = "more than " + std::to_string(options.combination_cap) +
                           " combinations on the fault segment of line " +
                           std::to_string(*report.line);
          return out;
        }
        const auto& choice =
          vary->base().path.choices[static_cast<std::size_t>(vary->first_step())];
        const auto& src = *s.slot(choice.slot_id).source;
        return stuck(src.span, "no alternatives left for " + describe(src));
      }
    } else {
      vary.reset();
      DerivationPath after = failed.path;
      while (!next) {
        SearchRequest req;
        req.after = after;
        auto r = s.derive(req);
        if (!r.path)
          return stuck(source->span, "no alternative translations left");
        after = *r.path;
        if (!seen.count(path_key(*r.path)))
          next = s.candidate(r);
      }
      meta.base = 0;
      meta.level = 0;
      meta.segment.clear();
    }
    pending = std::move(*next);
  }
}

} // namespace xlate
