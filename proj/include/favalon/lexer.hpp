#pragma once

#include <cstddef>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace favalon {

/// Byte range into the source line, half-open.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const Span&) const = default;
};

inline Span join(Span a, Span b) {
  if (a.end == 0 && a.begin == 0) return b;
  if (b.end == 0 && b.begin == 0) return a;
  return {a.begin < b.begin ? a.begin : b.begin, a.end > b.end ? a.end : b.end};
}

struct FavalonError : std::runtime_error {
  Span span;
  FavalonError(std::string msg, Span s) : std::runtime_error(std::move(msg)), span(s) {}
};

struct LexError : FavalonError {
  using FavalonError::FavalonError;
};

enum class TokenKind { Identity, StringLit, Numeric, OpenParen, CloseParen, Symbol };

struct Token {
  TokenKind kind;
  std::string text;  // string literals hold the unescaped content
  Span span;
};

namespace detail {

inline bool is_letter(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_ident_tail(char c) { return is_letter(c) || is_digit(c) || c == '_'; }
inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

// ASCII paren pairs plus the angle brackets U+27E8 / U+27E9.
inline int open_paren_class(std::string_view s, std::size_t i, std::size_t* len) {
  char c = s[i];
  *len = 1;
  if (c == '(') return 0;
  if (c == '[') return 1;
  if (c == '{') return 2;
  if (i + 2 < s.size() && (unsigned char)s[i] == 0xE2 && (unsigned char)s[i + 1] == 0x9F &&
      (unsigned char)s[i + 2] == 0xA8) {
    *len = 3;
    return 3;
  }
  return -1;
}
inline int close_paren_class(std::string_view s, std::size_t i, std::size_t* len) {
  char c = s[i];
  *len = 1;
  if (c == ')') return 0;
  if (c == ']') return 1;
  if (c == '}') return 2;
  if (i + 2 < s.size() && (unsigned char)s[i] == 0xE2 && (unsigned char)s[i + 1] == 0x9F &&
      (unsigned char)s[i + 2] == 0xA9) {
    *len = 3;
    return 3;
  }
  return -1;
}

inline bool is_symbol_char(char c) {
  if (is_letter(c) || is_digit(c) || c == '_' || c == '"') return false;
  if (is_space(c)) return false;
  switch (c) {
    case '(':
    case ')':
    case '[':
    case ']':
    case '{':
    case '}':
      return false;
    default:
      break;
  }
  return c > 0x20 && c < 0x7F;
}

}  // namespace detail

/// Tokenize one logical line. Pure; errors surface as LexError.
inline std::vector<Token> tokenize(std::string_view input) {
  using namespace detail;
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = input.size();

  auto prev_allows_sign = [&](std::size_t at) {
    if (at == 0) return true;
    char p = input[at - 1];
    if (is_space(p)) return true;
    std::size_t len = 0;
    // only single-byte opens can be checked one byte back; the multibyte
    // angle bracket ends exactly at `at` when it precedes a sign
    if (open_paren_class(input, at - 1, &len) >= 0 && len == 1) return true;
    if (at >= 3) {
      if (open_paren_class(input, at - 3, &len) == 3) return true;
    }
    return false;
  };

  auto scan_numeric = [&](std::size_t start) -> Token {
    std::size_t j = start;
    if (input[j] == '+' || input[j] == '-') ++j;
    while (j < n && is_digit(input[j])) ++j;
    if (j < n && input[j] == '.' && j + 1 < n && is_digit(input[j + 1])) {
      ++j;
      while (j < n && is_digit(input[j])) ++j;
      if (j < n && input[j] == '.' && j + 1 < n && is_digit(input[j + 1]))
        throw LexError("numeric literal with two decimal points", {start, j + 1});
    }
    return {TokenKind::Numeric, std::string(input.substr(start, j - start)), {start, j}};
  };

  while (i < n) {
    char c = input[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    std::size_t plen = 0;
    if (int cls = open_paren_class(input, i, &plen); cls >= 0) {
      out.push_back({TokenKind::OpenParen, std::string(input.substr(i, plen)), {i, i + plen}});
      i += plen;
      continue;
    }
    if (int cls = close_paren_class(input, i, &plen); cls >= 0) {
      out.push_back({TokenKind::CloseParen, std::string(input.substr(i, plen)), {i, i + plen}});
      i += plen;
      continue;
    }
    if (c == '"') {
      std::size_t start = i++;
      std::string text;
      bool closed = false;
      while (i < n) {
        char d = input[i];
        if (d == '"') {
          ++i;
          closed = true;
          break;
        }
        if (d == '\\' && i + 1 < n) {
          char e = input[i + 1];
          switch (e) {
            case '"': text.push_back('"'); break;
            case '\\': text.push_back('\\'); break;
            case 'n': text.push_back('\n'); break;
            case 't': text.push_back('\t'); break;
            default:
              text.push_back('\\');
              text.push_back(e);
              break;
          }
          i += 2;
          continue;
        }
        text.push_back(d);
        ++i;
      }
      if (!closed) throw LexError("unterminated string literal", {start, start + 1});
      out.push_back({TokenKind::StringLit, std::move(text), {start, i}});
      continue;
    }
    if (is_digit(c)) {
      out.push_back(scan_numeric(i));
      i = out.back().span.end;
      continue;
    }
    if ((c == '+' || c == '-') && i + 1 < n && is_digit(input[i + 1]) && prev_allows_sign(i)) {
      out.push_back(scan_numeric(i));
      i = out.back().span.end;
      continue;
    }
    if (is_letter(c)) {
      std::size_t j = i + 1;
      while (j < n && is_ident_tail(input[j])) ++j;
      // dotted names (System.Convert.ToInt32, sample.csv) lex as one identity
      while (j + 1 < n && input[j] == '.' && is_letter(input[j + 1])) {
        j += 2;
        while (j < n && is_ident_tail(input[j])) ++j;
      }
      out.push_back({TokenKind::Identity, std::string(input.substr(i, j - i)), {i, j}});
      i = j;
      continue;
    }
    if (is_symbol_char(c)) {
      std::size_t j = i + 1;
      while (j < n && is_symbol_char(input[j])) ++j;
      out.push_back({TokenKind::Symbol, std::string(input.substr(i, j - i)), {i, j}});
      i = j;
      continue;
    }
    throw LexError("unexpected character '" + std::string(1, c) + "'", {i, i + 1});
  }
  return out;
}

inline const char* token_kind_name(TokenKind k) {
  switch (k) {
    case TokenKind::Identity: return "Identity";
    case TokenKind::StringLit: return "String";
    case TokenKind::Numeric: return "Numeric";
    case TokenKind::OpenParen: return "OpenParen";
    case TokenKind::CloseParen: return "CloseParen";
    case TokenKind::Symbol: return "Symbol";
  }
  return "?";
}

}  // namespace favalon
