#include "fixtures.hpp"
#include "xlate/service.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace xlate;
namespace fs = std::filesystem;

namespace {

std::string
q(const std::string& s)
{
  return "'" + s + "'";
}

std::string
translate_args(const std::string& bench, const std::string& rules, const std::string& out)
{
  return "translate --src " + q(fx::repo_path("bench/" + bench + "/source")) + " --rules " +
         q(fx::repo_path(rules)) + " --tests " + q(fx::repo_path("bench/" + bench)) + " --out " + q(out);
}

} // namespace

TEST_CASE("translate writes the program, the rule mapping and the retry log")
{
  fx::TempDir dir;
  std::string out;
  REQUIRE(fx::run_cli(translate_args("words", "rules/corpus", dir.path) + " --retry-limit 20", &out) ==
          0);
  const auto program = fx::read_file(dir.path + "/translation.js");
  CHECK(out == program);
  CHECK(program.find("let trwords = Array.from(words).map((w) => w.toUpperCase());") !=
        std::string::npos);
  const auto mapping = Json::parse(fx::read_file(dir.path + "/mapping.json"));
  CHECK(mapping["text"] == program);
  CHECK_FALSE(mapping["mapping"].empty());
  const auto log = fx::read_file(dir.path + "/retry.log");
  CHECK(log.rfind("candidate 1 base 0 level 0 RuntimeError line 2: ReferenceError", 0) == 0);
  CHECK(log.find("Success after") != std::string::npos);
  CHECK_FALSE(fs::exists(dir.path + "/prompt.txt"));
}

TEST_CASE("translate exit codes follow the search outcome")
{
  fx::TempDir dir;
  CHECK(fx::run_cli(translate_args("words", "rules/base", dir.path)) == 2);
  const auto prompt = fx::read_file(dir.path + "/prompt.txt");
  CHECK(prompt.find("list_comprehension") != std::string::npos);
  CHECK(prompt.find("line 2") != std::string::npos);
  CHECK(prompt.find("[w.upper() for w in words]") != std::string::npos);

  CHECK(fx::run_cli(translate_args("words", "rules/corpus", dir.path) + " --retry-limit 1") == 3);
  CHECK(fx::run_cli(translate_args("words", "rules/corpus", dir.path) + " --no-such-flag") == 4);
  CHECK(fx::run_cli("translate --src /nonexistent/file --out " + q(dir.path)) == 4);
  CHECK(fx::run_cli(translate_args("words", "rules/corpus", dir.path) + " --tgt-runner no-such-node") ==
        4);
  CHECK(fx::run_cli("frobnicate") == 4);
}

TEST_CASE("CLI and service produce byte-identical translations")
{
  fx::TempDir rules;
  fs::copy_file(fx::repo_path("rules/corpus"), fs::path(rules.path) / "corpus");
  ServiceConfig cfg;
  cfg.grammars_dir = fx::repo_path("grammars");
  cfg.bench_dir = fx::repo_path("bench");
  cfg.rules_dir = rules.path;
  SessionService svc(cfg);

  for (const char* bench : {"words", "set_membership", "fizzbuzz"}) {
    CAPTURE(bench);
    fx::TempDir dir;
    REQUIRE(fx::run_cli(translate_args(bench, "rules/corpus", dir.path)) == 0);
    const auto r = svc.handle("POST", "/sessions", Json{{"v", 1}, {"bench", bench}}.dump());
    REQUIRE(r.status == 201);
    CHECK(r.body["outcome"]["candidate"]["text"] == fx::read_file(dir.path + "/translation.js"));
    CHECK(Json::parse(fx::read_file(dir.path + "/outcome.json")) == r.body["outcome"]);
  }

  // Overrides given on the command line match POST /overrides.
  const auto created = svc.handle("POST", "/sessions", Json{{"v", 1}, {"bench", "set_membership"}}.dump());
  const auto id = created.body["session_id"].get<std::string>();
  const int n = created.body["outcome"]["candidate"]["index"].get<int>();
  const auto cand = svc.handle("GET", "/sessions/" + id + "/candidates/" + std::to_string(n), "");
  Json pick;
  for (const auto& step : cand.body["steps"]) {
    const auto alts = step["alternatives"].get<std::vector<std::string>>();
    if (step["slot"]["kind"] == "comparison" && alts.size() > 1) {
      pick = Json{{"slot", step["slot"]}, {"rule_id", alts.back()}};
      break;
    }
  }
  REQUIRE_FALSE(pick.is_null());
  const auto ov = svc.handle("POST", "/sessions/" + id + "/overrides",
                             Json{{"v", 1}, {"overrides", Json::array({pick})}}.dump());
  REQUIRE(ov.status == 200);
  const auto& slot = pick["slot"];
  const std::string flag = std::to_string(slot["span"]["start"].get<int>()) + ":" +
                           std::to_string(slot["span"]["end"].get<int>()) + ":" +
                           slot["kind"].get<std::string>() + ":" +
                           std::to_string(slot["occurrence"].get<int>()) + "=" +
                           pick["rule_id"].get<std::string>();
  fx::TempDir dir;
  const int code = fx::run_cli(translate_args("set_membership", "rules/corpus", dir.path) +
                               " --override " + q(flag));
  CHECK(Json::parse(fx::read_file(dir.path + "/outcome.json")) == ov.body["outcome"]);
  CHECK(code == (ov.body["outcome"]["kind"] == "Success" ? 0 : ov.body["outcome"]["kind"] == "Stuck" ? 2 : 3));
}

TEST_CASE("bench reports accuracy, bloat and handles an empty corpus")
{
  fx::TempDir corpus;
  for (const char* b : {"gcd", "words"})
    fs::copy(fx::repo_path(std::string("bench/") + b), fs::path(corpus.path) / b);
  fs::create_directory(fs::path(corpus.path) / "broken");
  const auto report = corpus.path + "/report.json";
  std::string out;
  REQUIRE(fx::run_cli("bench " + q(corpus.path) + " --rules " + q(fx::repo_path("rules/corpus")) +
                        " --report " + q(report),
                      &out) == 0);
  const auto j = Json::parse(fx::read_file(report));
  CHECK(j["summary"]["benchmarks"] == 3);
  CHECK(j["summary"]["successes"] == 2);
  CHECK(j["results"][0]["name"] == "broken");
  CHECK(j["results"][0]["verdict"] == "SetupError");
  CHECK(j["results"][1]["verdict"] == "Success");
  CHECK(j["results"][2]["verdict"] == "Success");
  CHECK(j["results"][2]["bloat"].get<double>() >= 1.0);
  CHECK(out.find("accuracy 66.7% (2/3)") != std::string::npos);

  fx::TempDir empty;
  REQUIRE(fx::run_cli("bench " + q(empty.path) + " --report " + q(empty.path + "/r.json"), &out) == 0);
  CHECK(out.find("accuracy N/A") != std::string::npos);
  CHECK(Json::parse(fx::read_file(empty.path + "/r.json"))["summary"]["accuracy"] == "N/A");
}

TEST_CASE("infer prints a provenance-tagged rule and can append it")
{
  fx::TempDir dir;
  const auto s = dir.path + "/s.py";
  const auto t = dir.path + "/t.js";
  {
    std::ofstream(s) << "[x + 1 for x in nums]\n[w for w in line.split()]\n";
    std::ofstream(t) << "Array.from(nums).map((x) => x + 1);\nArray.from(line.split()).map((w) => w);\n";
  }
  std::string out;
  const auto target = dir.path + "/mine";
  REQUIRE(fx::run_cli("infer --src-snippet " + q(s) + " --tgt-snippet " + q(t) + " --append " + q(target),
                      &out) == 0);
  CHECK(out.rfind("# @inferred\n(MatchExpand", 0) == 0);
  const auto saved = load_ruleset_file(target);
  REQUIRE(saved.rules.size() == 1);
  CHECK(saved.rules[0].provenance == Provenance::Inferred);
  CHECK(out == serialize_ruleset(saved));

  {
    std::ofstream(t) << "Array.from(nums).map((x) => x + 1);\n";
  }
  CHECK(fx::run_cli("infer --src-snippet " + q(s) + " --tgt-snippet " + q(t)) == 4);
}

TEST_CASE("check validates target programs and dumps the PDA trace")
{
  fx::TempDir dir;
  const auto good = dir.path + "/good.js";
  const auto bad = dir.path + "/bad.js";
  {
    std::ofstream(good) << "let a = [1, 2];\na[0] = 3;\n";
    std::ofstream(bad) << "let a[0] = 1;\n";
  }
  std::string out;
  CHECK(fx::run_cli("check " + q(good), &out) == 0);
  CHECK(out == "accepted\n");
  CHECK(fx::run_cli("check " + q(bad), &out) == 1);
  CHECK(out.rfind("rejected", 0) == 0);
  CHECK(fx::run_cli("check --trace " + q(good), &out) == 0);
  CHECK(out.find("lexical_declaration") != std::string::npos);
  CHECK(out.find("\n") < out.size() - 1);
  CHECK(fx::run_cli("check /nonexistent.js") == 4);
}
