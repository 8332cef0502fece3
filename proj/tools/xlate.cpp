#include "xlate/inference.hpp"
#include "xlate/parser.hpp"
#include "xlate/pda.hpp"
#include "xlate/printer.hpp"
#include "xlate/service.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace xlate;

namespace {

constexpr int kExitSuccess = 0;
constexpr int kExitRejected = 1;
constexpr int kExitStuck = 2;
constexpr int kExitExhausted = 3;
constexpr int kExitSetup = 4;

std::string
read_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw SetupError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void
write_file(const fs::path& path, const std::string& text)
{
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out)
    throw SetupError("cannot write " + path.string());
}

// A path as given, or relative to the source tree when it does not exist.
std::string
resolve(const std::string& path)
{
  if (fs::exists(path))
    return path;
  const auto bundled = fs::path(XLATE_SOURCE_DIR) / path;
  if (fs::exists(bundled))
    return bundled.string();
  return path;
}

struct Shared
{
  std::string src_grammar = "grammars/python_subset";
  std::string tgt_grammar = "grammars/js_subset";
  std::vector<std::string> rules;
  int retry_limit = 20;
  std::string src_runner = "python3";
  std::string tgt_runner = "node";
  int timeout_ms = 10000;
  bool trace = false;
};

void
add_shared(CLI::App& app, Shared& s, bool with_rules = true)
{
  app.add_option("--src-grammar", s.src_grammar, "source grammar file")->capture_default_str();
  app.add_option("--tgt-grammar", s.tgt_grammar, "target grammar file")->capture_default_str();
  if (with_rules)
    app.add_option("--rules", s.rules, "ruleset file (repeatable, concatenated in order)");
  app.add_option("--retry-limit", s.retry_limit, "candidates tested per translation")
    ->capture_default_str()
    ->check(CLI::PositiveNumber);
  app.add_option("--src-runner", s.src_runner, "command running source programs")
    ->capture_default_str();
  app.add_option("--tgt-runner", s.tgt_runner, "command running target programs")
    ->capture_default_str();
  app.add_option("--timeout-ms", s.timeout_ms, "wall-clock limit per program run")
    ->capture_default_str()
    ->check(CLI::PositiveNumber);
  app.add_flag("--trace", s.trace, "write the PDA instruction dump");
}

RunnerProfile
runner_for(const GrammarDef& g, const std::string& command, int timeout_ms)
{
  auto p = rule_lang(g) == "py" ? python_runner(command) : node_runner(command);
  p.timeout = std::chrono::milliseconds(timeout_ms);
  return p;
}

Ruleset
load_rules(const std::vector<std::string>& files)
{
  Ruleset out;
  const std::vector<std::string> defaults{"rules/corpus"};
  for (const auto& f : files.empty() ? defaults : files) {
    try {
      append_rules(out, load_ruleset_file(resolve(f)));
    } catch (const std::exception& e) {
      throw SetupError(f + ": " + e.what());
    }
  }
  return out;
}

GrammarDef
load_grammar_arg(const std::string& path)
{
  try {
    return load_grammar_file(resolve(path));
  } catch (const std::exception& e) {
    throw SetupError(path + ": " + e.what());
  }
}

// `START:END:KIND[:OCCURRENCE]=RULE_ID`
Override
parse_override(const std::string& text)
{
  const auto eq = text.rfind('=');
  if (eq == std::string::npos)
    throw SetupError("override needs `=RULE_ID`: " + text);
  std::vector<std::string> parts;
  std::stringstream ss(text.substr(0, eq));
  std::string part;
  while (std::getline(ss, part, ':'))
    parts.push_back(part);
  if (parts.size() < 3 || parts.size() > 4)
    throw SetupError("override must be START:END:KIND[:OCCURRENCE]=RULE_ID: " + text);
  Override o;
  try {
    o.slot.span = Span{std::stoul(parts[0]), std::stoul(parts[1])};
    o.slot.kind = parts[2];
    o.slot.occurrence = parts.size() == 4 ? std::stoi(parts[3]) : 0;
  } catch (const std::exception&) {
    throw SetupError("bad override: " + text);
  }
  o.rule_id = text.substr(eq + 1);
  return o;
}

std::string
extension_for(const GrammarDef& g)
{
  return rule_lang(g) == "py" ? ".py" : ".js";
}

std::string
retry_log(const SearchOutcome& o)
{
  std::ostringstream out;
  for (std::size_t i = 0; i < o.tested.size(); ++i) {
    const auto& rep = o.reports[i];
    out << "candidate " << o.tested[i].index;
    if (i < o.schedule.size())
      out << " base " << o.schedule[i].base << " level " << o.schedule[i].level;
    out << " " << to_string(rep.verdict);
    if (rep.line)
      out << " line " << *rep.line;
    if (!rep.message.empty())
      out << ": " << rep.message;
    out << "\n";
  }
  out << to_string(o.kind) << " after " << o.retries << " candidates";
  if (!o.diagnostic.empty())
    out << " (" << o.diagnostic << ")";
  out << "\n";
  return out.str();
}

std::string
trace_dump(const GrammarDef& g, const std::string& text)
{
  const auto tree = parse_source(g, text);
  const auto pda = build_pda(g);
  const auto config = pda.accept(preorder(*tree));
  if (!config)
    return "rejected\n";
  return dump_log(*config);
}

int
exit_code(SearchOutcome::Kind k)
{
  switch (k) {
    case SearchOutcome::Kind::Success:
      return kExitSuccess;
    case SearchOutcome::Kind::Stuck:
      return kExitStuck;
    case SearchOutcome::Kind::Exhausted:
      return kExitExhausted;
  }
  return kExitSetup;
}

// ---- translate ------------------------------------------------------------------

struct TranslateArgs
{
  Shared shared;
  std::string src;
  std::string tests;
  std::string out_dir = "xlate-out";
  std::vector<std::string> overrides;
};

int
cmd_translate(const TranslateArgs& a)
{
  const auto src_g = load_grammar_arg(a.shared.src_grammar);
  const auto tgt_g = load_grammar_arg(a.shared.tgt_grammar);
  const auto rules = load_rules(a.shared.rules);
  const Translator t{src_g, tgt_g, rules};

  TranslationJob job;
  job.source_text = read_file(a.src);
  if (!a.tests.empty()) {
    auto bench = load_bench(a.tests);
    job.tests = bench.tests;
    job.has_expected = bench.has_expected;
  }
  job.options.retry_limit = a.shared.retry_limit;
  for (const auto& o : a.overrides)
    job.options.overrides.push_back(parse_override(o));

  const auto outcome =
    run_job(t, job, runner_for(src_g, a.shared.src_runner, a.shared.timeout_ms),
            runner_for(tgt_g, a.shared.tgt_runner, a.shared.timeout_ms));

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  write_file(dir / "retry.log", retry_log(outcome));
  write_file(dir / "outcome.json", outcome_json(outcome, job.source_text).dump(2) + "\n");
  fs::remove(dir / "prompt.txt");
  if (outcome.candidate) {
    write_file(dir / ("translation" + extension_for(tgt_g)), outcome.candidate->text);
    write_file(dir / "mapping.json", candidate_json(*outcome.candidate).dump(2) + "\n");
    if (a.shared.trace)
      write_file(dir / "trace.txt", trace_dump(tgt_g, outcome.candidate->text));
  }
  if (outcome.kind == SearchOutcome::Kind::Stuck) {
    std::ostringstream p;
    p << "stuck: " << outcome.slot_description << "\n";
    if (outcome.stuck_span) {
      const auto& sp = *outcome.stuck_span;
      p << "line " << line_of(job.source_text, sp.start) << ", bytes " << sp.start << "-"
        << sp.end << "\n";
      p << job.source_text.substr(sp.start, sp.end - sp.start) << "\n";
    }
    p << "provide a source/target snippet pair for this construct (xlate infer)\n";
    write_file(dir / "prompt.txt", p.str());
    std::cerr << p.str();
  }
  if (outcome.kind == SearchOutcome::Kind::Success)
    std::cout << outcome.candidate->text;
  std::cerr << to_string(outcome.kind) << " after " << outcome.retries << " candidates\n";
  return exit_code(outcome.kind);
}

// ---- bench ----------------------------------------------------------------------

struct BenchArgs
{
  Shared shared;
  std::string corpus = "bench";
  std::string report = "bench-report.json";
};

int
cmd_bench(const BenchArgs& a)
{
  const auto src_g = load_grammar_arg(a.shared.src_grammar);
  const auto tgt_g = load_grammar_arg(a.shared.tgt_grammar);
  const auto rules = load_rules(a.shared.rules);
  const Translator t{src_g, tgt_g, rules};
  const auto corpus = resolve(a.corpus);
  if (!fs::is_directory(corpus))
    throw SetupError("no corpus directory " + a.corpus);

  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(corpus)) {
    if (e.is_directory())
      dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());

  const auto src_runner = runner_for(src_g, a.shared.src_runner, a.shared.timeout_ms);
  const auto tgt_runner = runner_for(tgt_g, a.shared.tgt_runner, a.shared.timeout_ms);
  Json rows = Json::array();
  int successes = 0;
  double bloat_sum = 0;
  double time_sum = 0;
  std::cout << std::left << std::setw(18) << "benchmark" << std::setw(11) << "verdict"
            << std::setw(9) << "retries" << std::setw(9) << "seconds" << "bloat\n";
  for (const auto& d : dirs) {
    Json row{{"name", d.filename().string()}};
    const auto start = std::chrono::steady_clock::now();
    try {
      auto bench = load_bench(d.string());
      TranslationJob job;
      job.source_text = bench.source;
      job.tests = bench.tests;
      job.has_expected = bench.has_expected;
      job.options.retry_limit = a.shared.retry_limit;
      const auto o = run_job(t, job, src_runner, tgt_runner);
      row["verdict"] = std::string(to_string(o.kind));
      row["retries"] = o.retries;
      if (o.kind == SearchOutcome::Kind::Success) {
        const double b = bloat_ratio(bench.source, o.candidate->text);
        row["bloat"] = b;
        bloat_sum += b;
        ++successes;
      } else {
        row["bloat"] = nullptr;
      }
      if (o.kind == SearchOutcome::Kind::Stuck)
        row["stuck"] = o.slot_description;
    } catch (const std::exception& e) {
      row["verdict"] = "SetupError";
      row["retries"] = 0;
      row["bloat"] = nullptr;
      row["error"] = e.what();
    }
    const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    row["seconds"] = secs;
    time_sum += secs;
    std::ostringstream bloat;
    if (row["bloat"].is_number())
      bloat << std::fixed << std::setprecision(2) << row["bloat"].get<double>();
    else
      bloat << "-";
    std::cout << std::left << std::setw(18) << row["name"].get<std::string>() << std::setw(11)
              << row["verdict"].get<std::string>() << std::setw(9) << row["retries"].get<int>()
              << std::setw(9) << std::fixed << std::setprecision(2) << secs << bloat.str() << "\n";
    rows.push_back(std::move(row));
  }

  Json summary{{"benchmarks", dirs.size()}, {"successes", successes}};
  if (dirs.empty()) {
    summary["accuracy"] = "N/A";
    summary["mean_bloat"] = "N/A";
    summary["mean_seconds"] = "N/A";
    std::cout << "accuracy N/A (empty corpus)\n";
  } else {
    const double acc = 100.0 * successes / static_cast<double>(dirs.size());
    summary["accuracy"] = acc;
    summary["mean_bloat"] = successes ? Json(bloat_sum / successes) : Json("N/A");
    summary["mean_seconds"] = time_sum / static_cast<double>(dirs.size());
    std::cout << "accuracy " << std::fixed << std::setprecision(1) << acc << "% (" << successes
              << "/" << dirs.size() << ")";
    if (successes)
      std::cout << ", mean bloat " << std::setprecision(2) << bloat_sum / successes;
    std::cout << ", mean time " << std::setprecision(2)
              << time_sum / static_cast<double>(dirs.size()) << "s\n";
  }
  write_file(a.report, Json{{"v", kPayloadVersion}, {"summary", summary}, {"results", rows}}.dump(2) +
                         "\n");
  return kExitSuccess;
}

// ---- infer ----------------------------------------------------------------------

struct InferArgs
{
  Shared shared;
  std::string src_snippet;
  std::string tgt_snippet;
  std::string append;
};

int
cmd_infer(const InferArgs& a)
{
  const auto src_g = load_grammar_arg(a.shared.src_grammar);
  const auto tgt_g = load_grammar_arg(a.shared.tgt_grammar);
  Inference inf;
  try {
    inf = infer_rule(read_file(a.src_snippet), read_file(a.tgt_snippet), src_g, tgt_g);
  } catch (const InferenceError& e) {
    throw SetupError(std::string("inference failed: ") + e.what());
  }
  Ruleset one;
  one.rules.push_back(inf.rule);
  const auto text = serialize_ruleset(one);
  std::cout << text;
  for (const auto& amb : inf.ambiguous) {
    std::cerr << "ambiguous link for reference " << amb.target_site << ": captures";
    for (int c : amb.candidates)
      std::cerr << " " << c;
    std::cerr << " (used " << amb.candidates.front() << ")\n";
  }
  for (const auto& w : inf.warnings)
    std::cerr << "warning: " << w << "\n";
  if (!a.append.empty()) {
    Ruleset target;
    if (fs::exists(a.append))
      target = load_ruleset_file(a.append);
    const auto before = target.rules.size();
    append_rules(target, one);
    if (target.rules.size() != before)
      write_file(a.append, serialize_ruleset(target));
  }
  return kExitSuccess;
}

// ---- check ----------------------------------------------------------------------

struct CheckArgs
{
  Shared shared;
  std::string file;
};

int
cmd_check(const CheckArgs& a)
{
  const auto g = load_grammar_arg(a.shared.tgt_grammar);
  const auto text = read_file(a.file);
  AstPtr tree;
  try {
    tree = parse_source(g, text);
  } catch (const ParseError& e) {
    std::cout << "rejected: " << e.what() << "\n";
    return kExitRejected;
  }
  const auto pda = build_pda(g);
  const auto config = pda.accept(preorder(*tree));
  if (!config) {
    std::cout << "rejected by the syntax checker\n";
    return kExitRejected;
  }
  if (a.shared.trace)
    std::cout << dump_log(*config);
  std::cout << "accepted\n";
  return kExitSuccess;
}

// ---- serve ----------------------------------------------------------------------

struct ServeArgs
{
  Shared shared;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string grammars_dir = "grammars";
  std::string rules_dir = "rules";
  std::string bench_dir = "bench";
};

HttpServer* g_server = nullptr;

int
cmd_serve(const ServeArgs& a)
{
  ServiceConfig cfg;
  cfg.grammars_dir = resolve(a.grammars_dir);
  cfg.rules_dir = resolve(a.rules_dir);
  cfg.bench_dir = resolve(a.bench_dir);
  cfg.retry_limit = a.shared.retry_limit;
  cfg.source_runner = python_runner(a.shared.src_runner);
  cfg.source_runner.timeout = std::chrono::milliseconds(a.shared.timeout_ms);
  cfg.target_runner = node_runner(a.shared.tgt_runner);
  cfg.target_runner.timeout = std::chrono::milliseconds(a.shared.timeout_ms);
  SessionService service(cfg);
  HttpServer server(service);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server)
      g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server)
      g_server->stop();
  });
  std::cerr << "listening on " << a.host << ":" << a.port << "\n";
  if (!server.listen(a.host, a.port)) {
    g_server = nullptr;
    throw SetupError("cannot listen on " + a.host + ":" + std::to_string(a.port));
  }
  g_server = nullptr;
  return kExitSuccess;
}

} // namespace

int
main(int argc, char** argv)
{
  CLI::App app{"Rule-based source-to-source translation with test-driven retries"};
  app.require_subcommand(1);

  TranslateArgs tr;
  auto* translate = app.add_subcommand("translate", "translate one program");
  add_shared(*translate, tr.shared);
  translate->add_option("--src", tr.src, "source program")->required();
  translate->add_option("--tests", tr.tests, "benchmark directory with driver and expected");
  translate->add_option("--out", tr.out_dir, "artifact directory")->capture_default_str();
  translate->add_option("--override", tr.overrides,
                        "pin a rule: START:END:KIND[:OCCURRENCE]=RULE_ID (repeatable)");

  BenchArgs bn;
  auto* bench = app.add_subcommand("bench", "run the benchmark harness");
  add_shared(*bench, bn.shared);
  bench->add_option("corpus", bn.corpus, "corpus directory")->capture_default_str();
  bench->add_option("--report", bn.report, "JSON report file")->capture_default_str();

  InferArgs in;
  auto* infer = app.add_subcommand("infer", "infer a rule from a snippet pair");
  add_shared(*infer, in.shared, false);
  infer->add_option("--src-snippet", in.src_snippet, "source snippet file")->required();
  infer->add_option("--tgt-snippet", in.tgt_snippet, "target snippet file")->required();
  infer->add_option("--append", in.append, "ruleset file to add the rule to");

  CheckArgs ck;
  auto* check = app.add_subcommand("check", "syntax-check a target program");
  add_shared(*check, ck.shared, false);
  check->add_option("file", ck.file, "target program")->required();

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "run the HTTP session service");
  add_shared(*serve, sv.shared, false);
  serve->add_option("--host", sv.host)->capture_default_str();
  serve->add_option("--port", sv.port)->capture_default_str();
  serve->add_option("--grammars-dir", sv.grammars_dir)->capture_default_str();
  serve->add_option("--rules-dir", sv.rules_dir)->capture_default_str();
  serve->add_option("--bench-dir", sv.bench_dir)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitSetup;
  }

  try {
    if (*translate)
      return cmd_translate(tr);
    if (*bench)
      return cmd_bench(bn);
    if (*infer)
      return cmd_infer(in);
    if (*check)
      return cmd_check(ck);
    if (*serve)
      return cmd_serve(sv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSetup;
  }
  return kExitSetup;
}
