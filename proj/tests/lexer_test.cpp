#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "favalon/lexer.hpp"

using namespace favalon;

namespace {

std::string kinds_of(const std::vector<Token>& toks) {
  std::string s;
  for (const auto& t : toks) {
    s += token_kind_name(t.kind);
    s += "(" + t.text + ") ";
  }
  if (!s.empty()) s.pop_back();
  return s;
}

}  // namespace

TEST_CASE("pipeline line tokenizes to the four-token sequence") {
  auto toks = tokenize("echo \"abc def ghi\" | wc");
  REQUIRE(toks.size() == 4);
  CHECK(toks[0].kind == TokenKind::Identity);
  CHECK(toks[0].text == "echo");
  CHECK(toks[1].kind == TokenKind::StringLit);
  CHECK(toks[1].text == "abc def ghi");
  CHECK(toks[2].kind == TokenKind::Symbol);
  CHECK(toks[2].text == "|");
  CHECK(toks[3].kind == TokenKind::Identity);
  CHECK(toks[3].text == "wc");
}

TEST_CASE("empty line yields no tokens") { CHECK(tokenize("").empty()); }

TEST_CASE("tokens separate without whitespace") {
  // derived by hand from the grammar productions, character by character
  auto toks = tokenize("a(-|)b");
  REQUIRE(toks.size() == 5);
  CHECK(kinds_of(toks) == "Identity(a) OpenParen(() Symbol(-|) CloseParen()) Identity(b)");
}

TEST_CASE("numeric sign rule") {
  SUBCASE("infix stays three tokens") {
    auto toks = tokenize("123 + 456");
    REQUIRE(toks.size() == 3);
    CHECK(toks[0].kind == TokenKind::Numeric);
    CHECK(toks[1].kind == TokenKind::Symbol);
    CHECK(toks[2].kind == TokenKind::Numeric);
  }
  SUBCASE("leading minus binds at line start") {
    auto toks = tokenize("-5");
    REQUIRE(toks.size() == 1);
    CHECK(toks[0].text == "-5");
  }
  SUBCASE("minus binds after open paren") {
    auto toks = tokenize("(-5)");
    REQUIRE(toks.size() == 3);
    CHECK(toks[1].text == "-5");
  }
  SUBCASE("minus after identifier is a symbol") {
    auto toks = tokenize("a-5");
    REQUIRE(toks.size() == 3);
    CHECK(toks[1].kind == TokenKind::Symbol);
  }
}

TEST_CASE("floats and decimal errors") {
  auto toks = tokenize("1.5");
  REQUIRE(toks.size() == 1);
  CHECK(toks[0].text == "1.5");
  CHECK_THROWS_AS(tokenize("1.2.3"), LexError);
}

TEST_CASE("dotted names lex as one identity") {
  auto toks = tokenize("System.Convert.ToInt32 \"123\"");
  REQUIRE(toks.size() == 2);
  CHECK(toks[0].text == "System.Convert.ToInt32");
  auto file = tokenize("cat sample.csv");
  REQUIRE(file.size() == 2);
  CHECK(file[1].kind == TokenKind::Identity);
  CHECK(file[1].text == "sample.csv");
}

TEST_CASE("string escapes") {
  auto toks = tokenize(R"("a\"b\\c\nd")");
  REQUIRE(toks.size() == 1);
  CHECK(toks[0].text == "a\"b\\c\nd");
}

TEST_CASE("lex errors") {
  CHECK_THROWS_AS(tokenize("\"unterminated"), LexError);
  CHECK_THROWS_AS(tokenize("caf\xc3\xa9"), LexError);  // non-ASCII identifier
}

TEST_CASE("unicode angle brackets pair up") {
  auto toks = tokenize("a \xe2\x9f\xa8 b \xe2\x9f\xa9");
  REQUIRE(toks.size() == 4);
  CHECK(toks[1].kind == TokenKind::OpenParen);
  CHECK(toks[3].kind == TokenKind::CloseParen);
}

TEST_CASE("span coverage is gap-free over non-whitespace") {
  std::string input = "toInt \"12 3\" + (foo.bar -5)";
  auto toks = tokenize(input);
  std::vector<bool> covered(input.size(), false);
  for (const auto& t : toks)
    for (std::size_t i = t.span.begin; i < t.span.end; ++i) covered[i] = true;
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (input[i] == ' ') continue;
    CHECK(covered[i]);
  }
}

namespace {

// small random line generator over the token alphabet
std::string random_line(std::mt19937& rng) {
  static const char* pieces[] = {"abc", "x1",  "foo_bar", "12",   "3.5",  "-7",
                                 "\"s t\"", "+",   "|",       "->",   "(",    ")",
                                 "echo",    "::",  "a.b",     "0",    "&&"};
  std::uniform_int_distribution<int> len(1, 8);
  std::uniform_int_distribution<int> pick(0, std::size(pieces) - 1);
  std::uniform_int_distribution<int> space(0, 2);
  std::string line;
  int n = len(rng);
  int depth = 0;
  for (int i = 0; i < n; ++i) {
    const char* p = pieces[pick(rng)];
    if (p[0] == '(') ++depth;
    if (p[0] == ')') {
      if (depth == 0) {
        p = "x1";
      } else {
        --depth;
      }
    }
    line += p;
    if (space(rng) != 0) line += ' ';
  }
  while (depth-- > 0) line += ')';
  return line;
}

}  // namespace

TEST_CASE("determinism, whitespace insensitivity, maximal munch") {
  std::mt19937 rng(20240811);
  int checked = 0;
  for (int iter = 0; iter < 2000; ++iter) {
    std::string line = random_line(rng);
    std::vector<Token> toks;
    try {
      toks = tokenize(line);
    } catch (const LexError&) {
      continue;
    }
    // determinism
    auto again = tokenize(line);
    REQUIRE(again.size() == toks.size());
    for (std::size_t i = 0; i < toks.size(); ++i) {
      CHECK(again[i].kind == toks[i].kind);
      CHECK(again[i].text == toks[i].text);
    }
    // inserting a space between adjacent tokens of different kinds keeps
    // the sequence, except where it creates a numeric-sign context
    for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
      if (toks[i].kind == toks[i + 1].kind) continue;
      const Token& next = toks[i + 1];
      bool sign_boundary = next.kind == TokenKind::Symbol && !next.text.empty() &&
                           (next.text.back() == '+' || next.text.back() == '-') &&
                           i + 2 < toks.size() && toks[i + 2].span.begin == next.span.end &&
                           toks[i + 2].kind == TokenKind::Numeric;
      if (sign_boundary) continue;
      std::string spaced = line.substr(0, toks[i].span.end) + " " + line.substr(toks[i].span.end);
      std::vector<Token> retoks;
      try {
        retoks = tokenize(spaced);
      } catch (const LexError&) {
        continue;
      }
      REQUIRE(retoks.size() == toks.size());
      for (std::size_t k = 0; k < toks.size(); ++k) {
        CHECK(retoks[k].kind == toks[k].kind);
        CHECK(retoks[k].text == toks[k].text);
      }
    }
    // maximal munch: source-adjacent same-kind tokens must not merge into
    // one valid token of that kind
    for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
      if (toks[i].kind != toks[i + 1].kind) continue;
      if (toks[i].span.end != toks[i + 1].span.begin) continue;
      if (toks[i].kind == TokenKind::OpenParen || toks[i].kind == TokenKind::CloseParen) continue;
      std::string merged = toks[i].text + toks[i + 1].text;
      std::vector<Token> m;
      try {
        m = tokenize(merged);
      } catch (const LexError&) {
        continue;
      }
      CHECK(m.size() > 1);
    }
    ++checked;
  }
  CHECK(checked > 1000);
}
