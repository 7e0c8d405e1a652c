// Apache License, Version 2.0, refer to LICENSE.txt

#include "stanvi/lexer.hpp"

#include <array>
#include <cctype>

namespace stanvi {

namespace {

constexpr std::array<std::string_view, 26> kKeywords = {
    "int",        "real",      "vector",     "row_vector",  "matrix",
    "simplex",    "ordered",   "array",      "if",          "else",
    "for",        "in",        "while",      "target",      "functions",
    "data",       "transformed", "parameters", "model",     "generated",
    "quantities", "return",    "break",      "continue",    "print",
    "reject",
};

// Longest first so that maximal munch works with a linear scan.
constexpr std::array<std::string_view, 29> kOperators = {
    ".*=", "./=", "+=", "-=", "*=", "/=", "==", "!=", "<=", ">=",
    "&&",  "||",  ".*", "./", "+",  "-",  "*",  "/",  "%",  "\\",
    "^",   "!",   "<",  ">",  "=",  "~",  "?",  ":",  "'",
};

constexpr std::string_view kPunctuation = "{}()[];,|";

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> tokens;
    while (true) {
      skip_space_and_comments();
      if (pos_ >= src_.size()) break;
      tokens.push_back(next());
    }
    return tokens;
  }

 private:
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  void skip_space_and_comments() {
    while (pos_ < src_.size()) {
      const char c = peek();
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '#' || (c == '/' && peek(1) == '/')) {
        while (pos_ < src_.size() && peek() != '\n') advance();
      } else if (c == '/' && peek(1) == '*') {
        const SourceLoc start{line_, column_};
        advance();
        advance();
        while (true) {
          if (pos_ >= src_.size()) {
            throw CompileError(CompileErrorKind::UnterminatedComment, start,
                               "block comment is never closed");
          }
          if (peek() == '*' && peek(1) == '/') {
            advance();
            advance();
            break;
          }
          advance();
        }
      } else {
        break;
      }
    }
  }

  Token make(TokenKind kind, std::size_t start, int line, int column) const {
    return Token{kind, std::string(src_.substr(start, pos_ - start)), line, column,
                 start};
  }

  Token next() {
    const std::size_t start = pos_;
    const int line = line_;
    const int column = column_;
    const char c = peek();

    if (std::isalpha(static_cast<unsigned char>(c))) {
      while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') advance();
      Token t = make(TokenKind::Identifier, start, line, column);
      if (is_keyword(t.text)) t.kind = TokenKind::Keyword;
      return t;
    }

    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      return number(start, line, column);
    }

    for (std::string_view op : kOperators) {
      if (src_.substr(pos_, op.size()) == op) {
        for (std::size_t i = 0; i < op.size(); ++i) advance();
        return make(TokenKind::Operator, start, line, column);
      }
    }

    if (kPunctuation.find(c) != std::string_view::npos) {
      advance();
      return make(TokenKind::Punctuation, start, line, column);
    }

    std::string shown(1, c);
    if (!std::isprint(static_cast<unsigned char>(c))) {
      shown = "\\x" + std::to_string(static_cast<unsigned char>(c));
    }
    throw CompileError(CompileErrorKind::IllegalCharacter, {line, column},
                       "unexpected character '" + shown + "'");
  }

  Token number(std::size_t start, int line, int column) {
    bool real = false;
    while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
    if (peek() == '.' && peek(1) != '*' && peek(1) != '/') {
      real = true;
      advance();
      while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
    }
    if (peek() == 'e' || peek() == 'E') {
      const char sign = peek(1);
      const std::size_t digits_at = (sign == '+' || sign == '-') ? 2 : 1;
      if (std::isdigit(static_cast<unsigned char>(peek(digits_at)))) {
        real = true;
        for (std::size_t i = 0; i < digits_at; ++i) advance();
        while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
      }
    }
    return make(real ? TokenKind::RealLiteral : TokenKind::IntLiteral, start, line,
                column);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int column_ = 1;
};

}  // namespace

const char* to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::Keyword: return "keyword";
    case TokenKind::Identifier: return "identifier";
    case TokenKind::IntLiteral: return "int-literal";
    case TokenKind::RealLiteral: return "real-literal";
    case TokenKind::Operator: return "operator";
    case TokenKind::Punctuation: return "punctuation";
  }
  return "?";
}

bool is_keyword(std::string_view word) {
  for (std::string_view k : kKeywords) {
    if (k == word) return true;
  }
  return false;
}

std::vector<Token> tokenize(std::string_view source) { return Lexer(source).run(); }

}  // namespace stanvi
