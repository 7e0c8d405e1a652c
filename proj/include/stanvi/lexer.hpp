// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "stanvi/error.hpp"

namespace stanvi {

enum class TokenKind {
  Keyword,
  Identifier,
  IntLiteral,
  RealLiteral,
  Operator,
  Punctuation,
};

const char* to_string(TokenKind kind);

struct Token {
  TokenKind kind;
  std::string text;
  int line;    // 1-based
  int column;  // 1-based
  std::size_t offset;  // byte offset of text in the source

  SourceLoc loc() const { return {line, column}; }
  bool is(TokenKind k, std::string_view t) const { return kind == k && text == t; }
};

/// Splits Stan source into tokens. `//`, `/* */` and `#` comments are
/// dropped. Every token's text equals source.substr(offset, text.size()).
///
/// Throws CompileError (UnterminatedComment, IllegalCharacter).
std::vector<Token> tokenize(std::string_view source);

bool is_keyword(std::string_view word);

}  // namespace stanvi
