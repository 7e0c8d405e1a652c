// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <string_view>
#include <vector>

#include "stanvi/ast.hpp"
#include "stanvi/lexer.hpp"

namespace stanvi {

/// Builds the syntax tree for the supported Stan subset (docs/grammar.md).
///
/// Throws CompileError: SyntaxError names the offending token and the
/// expected set; UnsupportedConstruct names the Stan feature that lies
/// outside the subset.
Program parse(const std::vector<Token>& tokens);

/// tokenize + parse.
Program parse_source(std::string_view source);

}  // namespace stanvi
