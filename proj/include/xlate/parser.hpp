#pragma once

#include "xlate/ast.hpp"
#include "xlate/grammar.hpp"

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace xlate {

/// Raised when text does not parse. `offset` is the byte offset of the
/// furthest failure in the original text.
class ParseError : public std::runtime_error
{
public:
  ParseError(const std::string& message, std::size_t offset)
    : std::runtime_error(message)
    , offset(offset)
  {
  }

  std::size_t offset;
};

/// Parses `text` from the grammar's start symbol. The whole input must be
/// consumed.
AstPtr parse_source(const GrammarDef& grammar, std::string_view text);

/// Same as parse_source but starting from another production.
AstPtr parse_from(const GrammarDef& grammar,
                  std::string_view text,
                  std::string_view production);

/// 1-based line number of a byte offset.
std::size_t line_of(std::string_view text, std::size_t offset);

} // namespace xlate
