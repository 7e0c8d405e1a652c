// Apache License, Version 2.0, refer to LICENSE.txt

#include "stanvi/parser.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdlib>
#include <initializer_list>
#include <string>

namespace stanvi {

namespace {

constexpr std::array<std::string_view, 10> kUnsupportedTypes = {
    "cov_matrix",       "corr_matrix",  "cholesky_factor_cov", "cholesky_factor_corr",
    "unit_vector",      "positive_ordered", "complex",         "complex_vector",
    "complex_matrix",   "tuple",
};

class Parser {
 public:
  explicit Parser(const std::vector<Token>& tokens) : tokens_(tokens) {
    eof_ = Token{TokenKind::Punctuation, "<end of input>", 1, 1, 0};
    if (!tokens.empty()) {
      const Token& last = tokens.back();
      eof_.line = last.line;
      eof_.column = last.column + static_cast<int>(last.text.size());
      eof_.offset = last.offset + last.text.size();
    }
  }

  Program program() {
    Program prog;
    int last_rank = -1;
    while (!at_end()) {
      const Token& head = peek();
      const SourceLoc loc = head.loc();
      BlockKind kind = block_kind();
      const int rank = static_cast<int>(kind);
      if (kind == BlockKind::Functions) {
        unsupported(head, "functions block (user-defined functions)");
      }
      if (rank <= last_rank) {
        throw CompileError(CompileErrorKind::SyntaxError, loc,
                           std::string("block '") + to_string(kind) +
                               "' is duplicated or out of canonical order");
      }
      last_rank = rank;
      ProgramBlock block{kind, loc, {}};
      expect(TokenKind::Punctuation, "{");
      while (!check(TokenKind::Punctuation, "}")) {
        if (at_end()) fail({"'}'"});
        block.body.push_back(statement());
      }
      expect(TokenKind::Punctuation, "}");
      prog.blocks.push_back(std::move(block));
    }
    return prog;
  }

 private:
  // ---- token helpers -------------------------------------------------------

  bool at_end() const { return pos_ >= tokens_.size(); }

  const Token& peek(std::size_t ahead = 0) const {
    return pos_ + ahead < tokens_.size() ? tokens_[pos_ + ahead] : eof_;
  }

  bool check(TokenKind kind, std::string_view text, std::size_t ahead = 0) const {
    return pos_ + ahead < tokens_.size() && tokens_[pos_ + ahead].is(kind, text);
  }

  bool check_op(std::string_view text) const { return check(TokenKind::Operator, text); }
  bool check_punct(std::string_view text) const {
    return check(TokenKind::Punctuation, text);
  }

  bool accept(TokenKind kind, std::string_view text) {
    if (!check(kind, text)) return false;
    ++pos_;
    return true;
  }

  const Token& advance() { return tokens_[pos_++]; }

  [[noreturn]] void fail(std::initializer_list<std::string_view> expected) const {
    std::string set;
    for (std::string_view e : expected) {
      if (!set.empty()) set += ", ";
      set += e;
    }
    const Token& t = peek();
    throw CompileError(CompileErrorKind::SyntaxError, t.loc(),
                       "unexpected '" + t.text + "'; expected one of {" + set + "}");
  }

  [[noreturn]] void unsupported(const Token& at, const std::string& construct) const {
    throw CompileError(CompileErrorKind::UnsupportedConstruct, at.loc(),
                       construct + " is not supported");
  }

  const Token& expect(TokenKind kind, std::string_view text) {
    if (!check(kind, text)) {
      const std::string quoted = "'" + std::string(text) + "'";
      fail({quoted});
    }
    return advance();
  }

  const Token& expect_identifier() {
    if (at_end() || peek().kind != TokenKind::Identifier) fail({"identifier"});
    return advance();
  }

  // ---- blocks ----------------------------------------------------------------

  BlockKind block_kind() {
    const Token& t = peek();
    if (t.kind == TokenKind::Keyword) {
      if (t.text == "functions") return advance(), BlockKind::Functions;
      if (t.text == "data") return advance(), BlockKind::Data;
      if (t.text == "parameters") return advance(), BlockKind::Parameters;
      if (t.text == "model") return advance(), BlockKind::Model;
      if (t.text == "transformed") {
        advance();
        if (accept(TokenKind::Keyword, "data")) return BlockKind::TransformedData;
        if (accept(TokenKind::Keyword, "parameters")) {
          return BlockKind::TransformedParameters;
        }
        fail({"'data'", "'parameters'"});
      }
      if (t.text == "generated") {
        advance();
        expect(TokenKind::Keyword, "quantities");
        return BlockKind::GeneratedQuantities;
      }
    }
    fail({"'functions'", "'data'", "'transformed'", "'parameters'", "'model'",
          "'generated'"});
  }

  // ---- statements ------------------------------------------------------------

  static bool is_type_keyword(const Token& t) {
    if (t.kind != TokenKind::Keyword) return false;
    return t.text == "int" || t.text == "real" || t.text == "vector" ||
           t.text == "row_vector" || t.text == "matrix" || t.text == "simplex" ||
           t.text == "ordered" || t.text == "array";
  }

  Stmt statement() {
    const Token& t = peek();
    Stmt stmt;
    stmt.loc = t.loc();

    if (t.kind == TokenKind::Identifier &&
        std::find(kUnsupportedTypes.begin(), kUnsupportedTypes.end(), t.text) !=
            kUnsupportedTypes.end()) {
      unsupported(t, "type '" + t.text + "'");
    }
    if (t.kind == TokenKind::Keyword) {
      if (t.text == "while") unsupported(t, "while loop");
      if (t.text == "print" || t.text == "reject" || t.text == "return" ||
          t.text == "break" || t.text == "continue") {
        unsupported(t, "'" + t.text + "' statement");
      }
    }

    if (is_type_keyword(t)) {
      stmt.node = DeclStmt{declaration()};
      return stmt;
    }
    if (accept(TokenKind::Punctuation, ";")) {
      stmt.node = EmptyStmt{};
      return stmt;
    }
    if (accept(TokenKind::Punctuation, "{")) {
      BlockStmt block;
      while (!check_punct("}")) {
        if (at_end()) fail({"'}'"});
        block.body.push_back(statement());
      }
      expect(TokenKind::Punctuation, "}");
      stmt.node = std::move(block);
      return stmt;
    }
    if (accept(TokenKind::Keyword, "if")) {
      IfStmt node;
      expect(TokenKind::Punctuation, "(");
      node.condition = expression();
      expect(TokenKind::Punctuation, ")");
      node.then_branch.push_back(statement());
      if (accept(TokenKind::Keyword, "else")) node.else_branch.push_back(statement());
      stmt.node = std::move(node);
      return stmt;
    }
    if (accept(TokenKind::Keyword, "for")) {
      ForStmt node;
      expect(TokenKind::Punctuation, "(");
      node.variable = expect_identifier().text;
      expect(TokenKind::Keyword, "in");
      node.lower = expression();
      if (!check_op(":")) {
        unsupported(peek(), "foreach loop over a container");
      }
      advance();
      node.upper = expression();
      expect(TokenKind::Punctuation, ")");
      node.body.push_back(statement());
      stmt.node = std::move(node);
      return stmt;
    }
    if (accept(TokenKind::Keyword, "target")) {
      if (!check_op("+=")) fail({"'+='"});
      advance();
      TargetStmt node{expression()};
      expect(TokenKind::Punctuation, ";");
      stmt.node = std::move(node);
      return stmt;
    }
    if (t.kind == TokenKind::Identifier && t.text == "increment_log_prob") {
      unsupported(t, "increment_log_prob");
    }
    if (t.kind == TokenKind::Identifier && check(TokenKind::Punctuation, "(", 1)) {
      unsupported(t, "function call statement '" + t.text + "(...)'");
    }

    Expr lhs = postfix_expression();
    if (accept(TokenKind::Operator, "~")) {
      TildeStmt node;
      node.lhs = std::move(lhs);
      node.distribution = expect_identifier().text;
      expect(TokenKind::Punctuation, "(");
      if (!check_punct(")")) {
        do {
          node.args.push_back(expression());
        } while (accept(TokenKind::Punctuation, ","));
      }
      expect(TokenKind::Punctuation, ")");
      if (peek().kind == TokenKind::Identifier && peek().text == "T" &&
          check(TokenKind::Punctuation, "[", 1)) {
        unsupported(peek(), "truncation T[,]");
      }
      expect(TokenKind::Punctuation, ";");
      stmt.node = std::move(node);
      return stmt;
    }
    for (std::string_view op : {"=", "+=", "-=", "*=", "/=", ".*=", "./="}) {
      if (check_op(op)) {
        if (op == ".*=" || op == "./=") unsupported(peek(), "compound assignment " + std::string(op));
        advance();
        AssignStmt node;
        node.lhs = std::move(lhs);
        node.op = std::string(op);
        node.rhs = expression();
        expect(TokenKind::Punctuation, ";");
        stmt.node = std::move(node);
        return stmt;
      }
    }
    if (check_op("<") && check(TokenKind::Operator, "-", 1)) {
      unsupported(peek(), "legacy '<-' assignment");
    }
    fail({"'~'", "'='", "'+='", "'-='", "'*='", "'/='"});
  }

  VarDecl declaration() {
    VarDecl decl;
    if (accept(TokenKind::Keyword, "array")) {
      expect(TokenKind::Punctuation, "[");
      decl.array_size = expression();
      if (check_punct(",")) unsupported(peek(), "multi-dimensional array");
      expect(TokenKind::Punctuation, "]");
      if (check(TokenKind::Keyword, "array")) unsupported(peek(), "nested array");
    }
    const Token& type = advance();
    if (type.kind != TokenKind::Keyword) {
      --pos_;
      fail({"'int'", "'real'", "'vector'", "'row_vector'", "'matrix'", "'simplex'",
            "'ordered'"});
    }
    if (type.text == "int") {
      decl.base = BaseType::Int;
      decl.constraint = range_constraint();
    } else if (type.text == "real") {
      decl.base = BaseType::Real;
      decl.constraint = range_constraint();
    } else if (type.text == "vector" || type.text == "row_vector") {
      decl.base = type.text == "vector" ? BaseType::Vector : BaseType::RowVector;
      decl.constraint = range_constraint();
      expect(TokenKind::Punctuation, "[");
      decl.sizes.push_back(expression());
      expect(TokenKind::Punctuation, "]");
    } else if (type.text == "matrix") {
      decl.base = BaseType::Matrix;
      decl.constraint = range_constraint();
      expect(TokenKind::Punctuation, "[");
      decl.sizes.push_back(expression());
      expect(TokenKind::Punctuation, ",");
      decl.sizes.push_back(expression());
      expect(TokenKind::Punctuation, "]");
    } else if (type.text == "simplex" || type.text == "ordered") {
      decl.base = BaseType::Vector;
      decl.constraint.kind =
          type.text == "simplex" ? ConstraintKind::Simplex : ConstraintKind::Ordered;
      expect(TokenKind::Punctuation, "[");
      decl.sizes.push_back(expression());
      expect(TokenKind::Punctuation, "]");
    } else {
      --pos_;
      fail({"'int'", "'real'", "'vector'", "'row_vector'", "'matrix'", "'simplex'",
            "'ordered'"});
    }

    decl.name = expect_identifier().text;
    if (check_punct("[")) {
      if (decl.array_size) unsupported(peek(), "multi-dimensional array");
      advance();
      decl.array_size = expression();
      if (check_punct(",")) unsupported(peek(), "multi-dimensional array");
      expect(TokenKind::Punctuation, "]");
      if (check_punct("[")) unsupported(peek(), "multi-dimensional array");
    }
    if (accept(TokenKind::Operator, "=")) decl.init = expression();
    expect(TokenKind::Punctuation, ";");
    return decl;
  }

  Constraint range_constraint() {
    Constraint c;
    if (!accept(TokenKind::Operator, "<")) return c;
    bool first = true;
    do {
      const Token& key = peek();
      if (key.kind != TokenKind::Identifier) fail({"'lower'", "'upper'"});
      if (key.text == "offset" || key.text == "multiplier") {
        unsupported(key, "offset/multiplier transform");
      }
      if (key.text == "lower" && first) {
        advance();
        expect(TokenKind::Operator, "=");
        c.lower = additive();
      } else if (key.text == "upper" && !c.upper) {
        advance();
        expect(TokenKind::Operator, "=");
        c.upper = additive();
      } else {
        fail(first ? std::initializer_list<std::string_view>{"'lower'", "'upper'"}
                   : std::initializer_list<std::string_view>{"'upper'"});
      }
      first = false;
    } while (accept(TokenKind::Punctuation, ","));
    expect(TokenKind::Operator, ">");
    if (c.lower && c.upper) {
      c.kind = ConstraintKind::LowerUpper;
    } else if (c.lower) {
      c.kind = ConstraintKind::Lower;
    } else {
      c.kind = ConstraintKind::Upper;
    }
    return c;
  }

  // ---- expressions -------------------------------------------------------------

  static Expr binary(const Token& op, Expr lhs, Expr rhs) {
    Expr e;
    e.kind = ExprKind::Binary;
    e.loc = op.loc();
    e.text = op.text;
    e.args.push_back(std::move(lhs));
    e.args.push_back(std::move(rhs));
    return e;
  }

  Expr expression() {
    Expr e = logical_or();
    if (check_op("?")) unsupported(peek(), "conditional operator ?:");
    return e;
  }

  Expr logical_or() {
    Expr e = logical_and();
    while (check_op("||")) {
      const Token& op = advance();
      e = binary(op, std::move(e), logical_and());
    }
    return e;
  }

  Expr logical_and() {
    Expr e = equality();
    while (check_op("&&")) {
      const Token& op = advance();
      e = binary(op, std::move(e), equality());
    }
    return e;
  }

  Expr equality() {
    Expr e = comparison();
    while (check_op("==") || check_op("!=")) {
      const Token& op = advance();
      e = binary(op, std::move(e), comparison());
    }
    return e;
  }

  Expr comparison() {
    Expr e = additive();
    while (check_op("<") || check_op("<=") || check_op(">") || check_op(">=")) {
      const Token& op = advance();
      e = binary(op, std::move(e), additive());
    }
    return e;
  }

  Expr additive() {
    Expr e = multiplicative();
    while (check_op("+") || check_op("-")) {
      const Token& op = advance();
      e = binary(op, std::move(e), multiplicative());
    }
    return e;
  }

  Expr multiplicative() {
    Expr e = unary();
    while (check_op("*") || check_op("/") || check_op("%") || check_op("\\") ||
           check_op(".*") || check_op("./")) {
      const Token& op = advance();
      e = binary(op, std::move(e), unary());
    }
    return e;
  }

  Expr unary() {
    if (check_op("-") || check_op("!") || check_op("+")) {
      const Token& op = advance();
      Expr e;
      e.kind = ExprKind::Unary;
      e.loc = op.loc();
      e.text = op.text;
      e.args.push_back(unary());
      return e;
    }
    return power();
  }

  Expr power() {
    Expr base = postfix_expression();
    if (check_op("^")) {
      const Token& op = advance();
      return binary(op, std::move(base), unary());
    }
    return base;
  }

  Expr postfix_expression() {
    Expr e = primary();
    while (true) {
      if (check_punct("[")) {
        const Token& open = advance();
        Expr idx;
        idx.kind = ExprKind::Index;
        idx.loc = open.loc();
        idx.args.push_back(std::move(e));
        do {
          if (check_op(":")) unsupported(peek(), "slice indexing");
          idx.args.push_back(expression());
          if (check_op(":")) unsupported(peek(), "slice indexing");
        } while (accept(TokenKind::Punctuation, ","));
        expect(TokenKind::Punctuation, "]");
        e = std::move(idx);
      } else if (check_op("'")) {
        unsupported(peek(), "transpose operator '");
      } else {
        return e;
      }
    }
  }

  Expr primary() {
    const Token& t = peek();
    Expr e;
    e.loc = t.loc();
    if (t.kind == TokenKind::IntLiteral) {
      advance();
      e.kind = ExprKind::IntLiteral;
      e.text = t.text;
      auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(),
                                       e.int_value);
      if (ec != std::errc()) {
        throw CompileError(CompileErrorKind::SyntaxError, t.loc(),
                           "integer literal '" + t.text + "' out of range");
      }
      return e;
    }
    if (t.kind == TokenKind::RealLiteral) {
      advance();
      e.kind = ExprKind::RealLiteral;
      e.text = t.text;
      e.real_value = std::strtod(t.text.c_str(), nullptr);
      return e;
    }
    if (t.kind == TokenKind::Identifier) {
      advance();
      e.text = t.text;
      if (accept(TokenKind::Punctuation, "(")) {
        e.kind = ExprKind::Call;
        if (!check_punct(")")) {
          e.args.push_back(expression());
          if (accept(TokenKind::Punctuation, "|")) {
            e.conditional_bar = true;
            if (!check_punct(")")) {
              do {
                e.args.push_back(expression());
              } while (accept(TokenKind::Punctuation, ","));
            }
          } else {
            while (accept(TokenKind::Punctuation, ",")) e.args.push_back(expression());
          }
        }
        expect(TokenKind::Punctuation, ")");
      } else {
        e.kind = ExprKind::Variable;
      }
      return e;
    }
    if (t.kind == TokenKind::Keyword && t.text == "target") {
      unsupported(t, "target() expression");
    }
    if (accept(TokenKind::Punctuation, "(")) {
      Expr inner = expression();
      expect(TokenKind::Punctuation, ")");
      return inner;
    }
    if (t.is(TokenKind::Punctuation, "{")) unsupported(t, "array expression {...}");
    if (t.is(TokenKind::Punctuation, "[")) unsupported(t, "row-vector expression [...]");
    fail({"literal", "identifier", "'('", "'-'", "'!'"});
  }

  const std::vector<Token>& tokens_;
  Token eof_;
  std::size_t pos_ = 0;
};

}  // namespace

Program parse(const std::vector<Token>& tokens) { return Parser(tokens).program(); }

Program parse_source(std::string_view source) { return parse(tokenize(source)); }

}  // namespace stanvi
