#pragma once

#include "xlate/ast.hpp"

#include <random>
#include <string>

namespace gen {

/// Random program text in the JS subset. Always parses.
std::string js_program(std::mt19937& rng);

/// Random program text in the Python subset. Always parses.
std::string py_program(std::mt19937& rng);

/// A copy of `tree` with one random structural change: a terminal dropped, a
/// child duplicated, or two sibling subtrees swapped.
xlate::AstPtr mutate(const xlate::AstPtr& tree, std::mt19937& rng);

/// Terminal texts joined with single spaces.
std::string flat_text(const xlate::AstNode& tree);

/// Random tree with at most `max_nodes` nodes over a small label alphabet.
xlate::AstPtr small_tree(std::mt19937& rng, int max_nodes);

} // namespace gen
