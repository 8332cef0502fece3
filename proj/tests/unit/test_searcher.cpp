#include "fixtures.hpp"
#include "xlate/parser.hpp"
#include "xlate/searcher.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace xlate;

namespace {

struct Bench
{
  std::string source;
  std::vector<TestCase> tests;
};

Bench
load_bench(const std::string& name)
{
  const auto dir = fx::repo_path("bench/" + name);
  Bench b;
  b.source = fx::read_file(dir + "/source");
  b.tests.push_back(TestCase{"driver", fx::read_file(dir + "/driver"), "",
                             fx::read_file(dir + "/expected")});
  return b;
}

const Ruleset&
corpus()
{
  static const Ruleset rs = load_ruleset_file(fx::repo_path("rules/corpus"));
  return rs;
}

const Ruleset&
base()
{
  static const Ruleset rs = load_ruleset_file(fx::repo_path("rules/base"));
  return rs;
}

Ruleset
without(const Ruleset& rs, const std::string& needle)
{
  Ruleset out;
  out.name = rs.name;
  for (const auto& r : rs.rules) {
    if (serialize_rule(r).find(needle) == std::string::npos)
      out.rules.push_back(r);
  }
  return out;
}

RunnerProfile
fake(std::function<RunResult(const std::string&)> run)
{
  auto p = node_runner();
  p.run = std::move(run);
  return p;
}

RunResult
fail_at(int line, const std::string& message)
{
  RunResult r;
  r.exit_code = 1;
  r.file = "/tmp/prog.mjs";
  r.err = "file:///tmp/prog.mjs:" + std::to_string(line) + "\n    x\n    ^\n\n" + message + "\n";
  return r;
}

int
line_count(const std::string& s)
{
  return static_cast<int>(std::count(s.begin(), s.end(), '\n')) + (s.empty() || s.back() == '\n' ? 0 : 1);
}

SearchOutcome
search_bench(const Ruleset& rules, const std::string& name, const RunnerProfile& runner,
             SearchOptions options = {})
{
  const Translator t{fx::python(), fx::js(), rules};
  auto b = load_bench(name);
  auto tests = prepare_tests(t, b.source, b.tests, python_runner(), false);
  return search_translation(t, parse_source(fx::python(), b.source), tests, runner, options);
}

} // namespace

TEST_CASE("error_lines finds node and python locations in order")
{
  RunResult r;
  r.file = "/tmp/a+b.mjs";
  r.err = "file:///tmp/a+b.mjs:7\nboom\n    at f (file:///tmp/a+b.mjs:3:5)\n    at /tmp/other.mjs:2\n";
  CHECK(error_lines(node_runner(), r) == std::vector<int>{7, 3});

  RunResult p;
  p.file = "/tmp/x.py";
  p.err = "Traceback (most recent call last):\n  File \"/tmp/x.py\", line 12, in <module>\n"
          "  File \"/tmp/x.py\", line 4, in f\nNameError: name 'q' is not defined\n";
  CHECK(error_lines(python_runner(), p) == std::vector<int>{12, 4});
}

TEST_CASE("run_program reports a missing runner")
{
  CHECK_THROWS_AS(run_program(node_runner("no-such-runner-xyz"), "1\n"), RunnerUnavailable);
}

TEST_CASE("run_program runs node and enforces the timeout")
{
  auto r = run_program(node_runner(), "console.log(1 + 2);\n");
  CHECK(r.exit_code == 0);
  CHECK(r.out == "3\n");

  auto strict = run_program(node_runner(), "let a = 1;\nundeclared = 2;\n");
  CHECK(strict.exit_code != 0);
  CHECK(error_lines(node_runner(), strict).front() == 2);

  auto slow = node_runner();
  slow.timeout = std::chrono::milliseconds(300);
  auto t = run_program(slow, "while (true) {}\n");
  CHECK(t.timed_out);
  CHECK(t.seconds < 5);
}

TEST_CASE("run_tests maps error lines into the candidate and diffs output")
{
  CandidateTranslation c;
  c.index = 1;
  c.text = "a;\nb;\nc;";

  auto inside = fake([](const std::string&) { return fail_at(2, "ReferenceError: b is not defined"); });
  auto rep = run_tests(c, {TestCase{"t", "", "d;\n", ""}}, inside);
  CHECK(rep.verdict == TestVerdict::RuntimeError);
  REQUIRE(rep.line);
  CHECK(*rep.line == 2);
  CHECK(rep.message == "ReferenceError: b is not defined");

  // A line inside the driver has no location in the candidate.
  auto driver = fake([](const std::string&) { return fail_at(4, "TypeError: nope"); });
  rep = run_tests(c, {TestCase{"t", "", "d;\n", ""}}, driver);
  CHECK(rep.verdict == TestVerdict::RuntimeError);
  CHECK_FALSE(rep.line);

  std::string seen;
  auto ok = fake([&](const std::string& program) {
    seen = program;
    RunResult r;
    r.out = "1\n2\n4\n";
    return r;
  });
  rep = run_tests(c, {TestCase{"t", "", "d;\n", "1\n2\n3\n"}}, ok);
  CHECK(seen == "a;\nb;\nc;\nd;\n");
  CHECK(rep.verdict == TestVerdict::OutputMismatch);
  CHECK(rep.first_diff_line == 3);

  rep = run_tests(c, {TestCase{"t", "", "d;\n", "1\n2\n4\n"}}, ok);
  CHECK(rep.verdict == TestVerdict::Pass);
}

TEST_CASE("localize_fault selects the steps printed on the failing line")
{
  std::vector<CandidateTranslation> seen;
  SearchOptions o;
  o.retry_limit = 1;
  o.on_candidate = [&](const CandidateTranslation& c, const TestReport&) { seen.push_back(c); };
  auto out = search_bench(corpus(), "words",
                          fake([](const std::string&) { return fail_at(2, "ReferenceError: x"); }), o);
  REQUIRE(seen.size() == 1);
  const auto& c = seen.front();

  TestReport rep;
  rep.line = 2;
  const auto steps = localize_fault(rep, c);
  REQUIRE_FALSE(steps.empty());
  const auto line_begin = c.text.find('\n') + 1;
  const auto line_end = c.text.find('\n', line_begin);
  for (const auto& m : c.mapping) {
    const bool on_line = m.target.start < line_end && m.target.end > line_begin;
    if (on_line && m.step >= 0)
      CHECK(steps.count(m.step) == 1);
  }
  for (int s : steps) {
    const bool printed = std::any_of(c.mapping.begin(), c.mapping.end(), [&](const MappingEntry& m) {
      return m.step == s && m.target.start < line_end && m.target.end > line_begin;
    });
    CHECK(printed);
  }

  rep.line.reset();
  CHECK_THROWS_AS(localize_fault(rep, c), NoLocation);
  rep.line = line_count(c.text) + 5;
  CHECK_THROWS_AS(localize_fault(rep, c), NoLocation);
}

TEST_CASE("a fault that survives every alternative on its line is stuck there")
{
  SearchOptions o;
  o.retry_limit = 20;
  auto out = search_bench(corpus(), "words",
                          fake([](const std::string&) { return fail_at(2, "ReferenceError: x"); }), o);
  CHECK(out.kind == SearchOutcome::Kind::Stuck);
  CHECK(out.reports.size() > 1);
  CHECK(out.reports.size() < 20);
  CHECK_FALSE(out.candidate);
  REQUIRE(out.stuck_span);
  CHECK(line_of(load_bench("words").source, out.stuck_span->start) == 2);
}

TEST_CASE("a fault without location exhausts the retry budget exactly")
{
  SearchOptions o;
  o.retry_limit = 4;
  auto global = search_bench(corpus(), "words", fake([](const std::string&) {
                               RunResult r;
                               r.exit_code = 1;
                               r.err = "Error: somewhere else\n";
                               return r;
                             }),
                             o);
  CHECK(global.kind == SearchOutcome::Kind::Exhausted);
  CHECK(global.reports.size() == 4);
  for (const auto& s : global.schedule)
    CHECK(s.base == 0);
}

TEST_CASE("property: retries vary only the fault segment, never repeat, and are deterministic")
{
  std::mt19937 rng(20261016);
  const std::vector<std::string> names = {"words", "set_membership", "char_freq", "median",
                                          "histogram", "count_unique"};
  for (int round = 0; round < 12; ++round) {
    const auto& name = names[round % names.size()];
    const unsigned seed = rng();
    auto make_runner = [seed] {
      auto gen = std::make_shared<std::mt19937>(seed);
      return fake([gen](const std::string& program) {
        const int lines = std::max(1, line_count(program) - 3);
        std::uniform_int_distribution<int> pick(1, lines);
        std::uniform_int_distribution<int> msg(0, 2);
        return fail_at(pick(*gen), "Error: kind " + std::to_string(msg(*gen)));
      });
    };
    SearchOptions o;
    o.retry_limit = 15;
    auto a = search_bench(corpus(), name, make_runner(), o);
    auto b = search_bench(corpus(), name, make_runner(), o);
    CAPTURE(name);
    CAPTURE(seed);

    REQUIRE(a.tested.size() == b.tested.size());
    for (std::size_t i = 0; i < a.tested.size(); ++i)
      CHECK(a.tested[i].text == b.tested[i].text);

    for (std::size_t i = 0; i < a.tested.size(); ++i) {
      CHECK(a.tested[i].index == static_cast<int>(i) + 1);
      for (std::size_t j = 0; j < i; ++j)
        CHECK_FALSE(a.tested[i].path == a.tested[j].path);
    }
    for (const auto& s : a.schedule) {
      if (s.base == 0)
        continue;
      const auto& from = a.tested[s.base - 1];
      const auto& to = a.tested[s.candidate - 1];
      const int changed = changed_choices(from, to, s.segment);
      CHECK(changed >= 1);
      CHECK(changed <= s.level);
    }
  }
}

TEST_CASE("the motivating example recovers from an undeclared variable on line 2")
{
  std::vector<TestReport> reports;
  SearchOptions o;
  o.on_candidate = [&](const CandidateTranslation&, const TestReport& r) { reports.push_back(r); };
  auto out = search_bench(corpus(), "words", node_runner(), o);
  REQUIRE(out.kind == SearchOutcome::Kind::Success);
  CHECK(out.retries > 1);
  CHECK(out.retries <= 20);
  REQUIRE_FALSE(reports.empty());
  CHECK(reports.front().verdict == TestVerdict::RuntimeError);
  CHECK(reports.front().line == 2);
  CHECK(reports.front().message.find("ReferenceError") != std::string::npos);
  CHECK(reports.front().message.find("trwords") != std::string::npos);
  CHECK(reports.back().verdict == TestVerdict::Pass);
}

TEST_CASE("a missing comprehension rule is reported as stuck on line 2")
{
  const auto rules = without(corpus(), "list_comprehension");
  auto out = search_bench(rules, "words", node_runner());
  CHECK(out.kind == SearchOutcome::Kind::Stuck);
  REQUIRE(out.stuck_span);
  const auto src = load_bench("words").source;
  CHECK(line_of(src, out.stuck_span->start) == 2);
  CHECK(out.slot_description.find("list_comprehension") != std::string::npos);
}

TEST_CASE("set membership switches from indexOf to has after a TypeError")
{
  auto out = search_bench(corpus(), "set_membership", node_runner());
  REQUIRE(out.kind == SearchOutcome::Kind::Success);
  REQUIRE(out.tested.size() >= 2);
  const auto& before = out.tested[out.tested.size() - 2];
  const auto& report = out.reports[out.reports.size() - 2];
  CHECK(before.text.find("indexOf") != std::string::npos);
  CHECK(report.message.find("TypeError") != std::string::npos);
  CHECK(out.candidate->text.find("indexOf") == std::string::npos);
  CHECK(out.candidate->text.find(".has(") != std::string::npos);
}

TEST_CASE("an empty ruleset is stuck at the module")
{
  Ruleset empty;
  const Translator t{fx::python(), fx::js(), empty};
  const auto src = load_bench("gcd").source;
  auto out = search_translation(t, parse_source(fx::python(), src), {}, node_runner());
  CHECK(out.kind == SearchOutcome::Kind::Stuck);
  CHECK(out.tested.empty());
}

TEST_CASE("base rules alone do not translate builtins into passing programs")
{
  SearchOptions o;
  o.retry_limit = 5;
  auto out = search_bench(base(), "count_vowels", node_runner(), o);
  CHECK(out.kind != SearchOutcome::Kind::Success);
}

TEST_CASE("translate_first fails on untranslatable drivers")
{
  Ruleset empty;
  const Translator t{fx::python(), fx::js(), empty};
  CHECK_THROWS_AS(translate_first(t, "print(1)\n"), SetupError);
  const Translator ok{fx::python(), fx::js(), corpus()};
  CHECK(translate_first(ok, "print(1)\n") == "console.log(1);\n");
}
