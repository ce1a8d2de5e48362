#pragma once

#include <span>
#include <string>
#include <vector>

#include "favalon/expr.hpp"
#include "favalon/lexer.hpp"

namespace favalon {

struct ParseError : FavalonError {
  using FavalonError::FavalonError;
};

namespace detail {

inline int paren_class_of(const Token& t) {
  if (t.text == "(" || t.text == ")") return 0;
  if (t.text == "[" || t.text == "]") return 1;
  if (t.text == "{" || t.text == "}") return 2;
  return 3;  // angle brackets
}

inline ExprPtr term_of(const Token& t) {
  switch (t.kind) {
    case TokenKind::Identity:
    case TokenKind::Symbol:
      return variable(t.text, t.span);
    case TokenKind::StringLit:
      return constant(host_str(t.text), type_term("Str"), t.span);
    case TokenKind::Numeric:
      if (t.text.find('.') != std::string::npos)
        return constant(host_float(std::stod(t.text)), type_term("Float"), t.span);
      return constant(host_int(std::stoll(t.text)), type_term("Int"), t.span);
    default:
      throw ParseError("unexpected token '" + t.text + "'", t.span);
  }
}

class Parser {
 public:
  explicit Parser(std::span<const Token> tokens) : toks_(tokens) {}

  ExprPtr run() {
    ExprPtr e = parse_seq(-1, Span{});
    if (!e) throw ParseError("empty input", {});
    return e;
  }

 private:
  // Parses terms until the matching close paren (closing_class >= 0) or the
  // end of input. Returns null for an empty sequence.
  ExprPtr parse_seq(int closing_class, Span open_span) {
    std::vector<ExprPtr> terms;
    while (pos_ < toks_.size()) {
      const Token& t = toks_[pos_];
      if (t.kind == TokenKind::CloseParen) {
        if (closing_class < 0) throw ParseError("unmatched closing parenthesis", t.span);
        if (paren_class_of(t) != closing_class)
          throw ParseError("mismatched parenthesis '" + t.text + "'", t.span);
        ++pos_;
        return fold(terms);
      }
      if (t.kind == TokenKind::OpenParen) {
        ++pos_;
        ExprPtr inner = parse_seq(paren_class_of(t), t.span);
        if (!inner) throw ParseError("empty parenthesized group", t.span);
        terms.push_back(with_grouped(inner));
        continue;
      }
      if (t.kind == TokenKind::Symbol && t.text == ":") {
        // `term : typeExpr`: the annotation applies to the full folded
        // expression on the left; the type covers the rest of the group
        if (terms.empty()) throw ParseError("type annotation with no left-hand term", t.span);
        ++pos_;
        ExprPtr lhs = fold(terms);
        ExprPtr ty = parse_seq(closing_class, open_span);
        if (!ty) throw ParseError("type annotation with no type expression", t.span);
        return with_annotation(lhs, ty);
      }
      terms.push_back(term_of(t));
      ++pos_;
    }
    if (closing_class >= 0) throw ParseError("unbalanced parenthesis", open_span);
    return fold(terms);
  }

  static ExprPtr fold(const std::vector<ExprPtr>& terms) {
    if (terms.empty()) return nullptr;
    ExprPtr acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = apply(acc, terms[i]);
    return acc;
  }

  std::span<const Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Left-associative application tree from a token sequence. Annotations
/// (`expr : type`) land in the annotation slot of the left-hand expression.
inline ExprPtr parse(std::span<const Token> tokens) {
  if (tokens.empty()) throw ParseError("empty input", {});
  return detail::Parser(tokens).run();
}

inline ExprPtr parse_annotated(std::span<const Token> tokens) { return parse(tokens); }

inline ExprPtr parse_line(std::string_view text) {
  auto toks = tokenize(text);
  return parse(toks);
}

}  // namespace favalon
