#pragma once

#include "xlate/grammar.hpp"
#include "xlate/rules.hpp"

#include <string>

namespace fx {

std::string repo_path(const std::string& relative);
std::string read_file(const std::string& path);

/// Runs the xlate binary with `args` (shell syntax) and returns its exit
/// code. Stdout is captured into `out` when given; stderr is discarded.
int run_cli(const std::string& args, std::string* out = nullptr);

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir
{
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string path;
};

const xlate::GrammarDef& python();
const xlate::GrammarDef& js();

/// expr ::= term (("+"|"×") term)*; term ::= "a"|"b"|"c"
const char* flat_arithmetic_document();

/// Tree-shaped arithmetic used for transducer tests: sums of products of
/// parenthesized sums and the variables a, b, c.
const xlate::GrammarDef& arithmetic();

/// Target alphabet for the arithmetic example: Add, Mult and constants.
const xlate::GrammarDef& arithmetic_target();

/// The distribute rule plus a→A, b→B, c→C.
const char* distribute_rules();

/// `Kind(child,child)` rendering of a partial target where pending slots show
/// as `q(<source leaf text>)`.
std::string render(const xlate::PartialTargetAst& ast);

} // namespace fx
