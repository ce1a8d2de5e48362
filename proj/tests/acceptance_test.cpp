// Acceptance suite: replays the documented behaviors end to end and prints
// one pass/fail line per criterion.

#include <sys/stat.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "favalon/favalon.hpp"

using namespace favalon;
namespace fs = std::filesystem;

namespace {

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void expect(bool cond, const std::string& what) {
  if (!cond) throw CheckFailure(what);
}

void expect_eq(const std::string& got, const std::string& want, const std::string& what) {
  if (got != want) throw CheckFailure(what + "\n    want: " + want + "\n    got:  " + got);
}

TypeEnvironment fresh_env() { return install_prelude(TypeEnvironment{}); }

struct Captured {
  std::string out, err;
};

Captured run_session(const std::vector<std::string>& lines, Mode mode) {
  SessionOptions opt;
  opt.mode = mode;
  Session session(opt);
  Captured cap;
  session.set_sinks([&](std::string_view s) { cap.out += s; },
                    [&](std::string_view s) { cap.err += s; });
  for (const auto& line : lines) session.eval_line(line);
  return cap;
}

std::string shell_oracle(const std::string& cmdline) {
  std::string out;
  FILE* p = ::popen(cmdline.c_str(), "r");
  expect(p != nullptr, "popen failed");
  char buf[4096];
  std::size_t n;
  while ((n = ::fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
  ::pclose(p);
  return out;
}

// ---- criterion 1: figure replay ------------------------------------------------

void criterion_figures() {
  auto toks = tokenize("echo \"abc def ghi\" | wc");
  expect(toks.size() == 4, "token count");
  expect(toks[0].kind == TokenKind::Identity && toks[0].text == "echo", "token 1");
  expect(toks[1].kind == TokenKind::StringLit && toks[1].text == "abc def ghi", "token 2");
  expect(toks[2].kind == TokenKind::Symbol && toks[2].text == "|", "token 3");
  expect(toks[3].kind == TokenKind::Identity && toks[3].text == "wc", "token 4");

  expect_eq(serialize(parse(toks)),
            "Apply(Apply(Apply(echo, Constant(\"abc def ghi\", Str)), |), wc)", "parse tree");

  TypeEnvironment env = fresh_env();
  auto norm = [&](const std::string& line) {
    return serialize(normalize(parse_line(line), env));
  };
  expect_eq(norm("123 + 456"), "Apply(Apply(+, Constant(123, Int)), Constant(456, Int))",
            "infix pattern 1");
  expect_eq(norm("abc 123 + 456"),
            "Apply(Apply(Apply(abc, +), Constant(123, Int)), Constant(456, Int))",
            "infix pattern 2");
  expect_eq(norm("a -> b c"), "Apply(Apply(->, a), Apply(b, c))", "rotation pattern 1");
  expect_eq(norm("a b -> c d"), "Apply(Apply(Apply(a, ->), b), Apply(c, d))",
            "rotation pattern 2");

  // the CLI reproduces the same canonical forms
  if (const char* bin = std::getenv("FAVALON_BIN")) {
    fs::path script = fs::temp_directory_path() / "favalon_accept_dump.fav";
    {
      std::ofstream f(script);
      f << "123 + 456\nabc 123 + 456\na -> b c\na b -> c d\n";
    }
    std::string out =
        shell_oracle(std::string(bin) + " --dump-rewritten " + script.string() + " 2>/dev/null");
    expect_eq(out,
              "Apply(Apply(+, Constant(123, Int)), Constant(456, Int))\n"
              "Apply(Apply(Apply(abc, +), Constant(123, Int)), Constant(456, Int))\n"
              "Apply(Apply(->, a), Apply(b, c))\n"
              "Apply(Apply(Apply(a, ->), b), Apply(c, d))\n",
              "CLI --dump-rewritten");
    fs::remove(script);
  }
}

// ---- criterion 2: pipeline law -------------------------------------------------

void criterion_pipeline_law() {
  TypeEnvironment env = fresh_env();
  std::mt19937 rng(20260811);
  std::uniform_int_distribution<int> val(-1000, 1000);
  std::uniform_int_distribution<int> spick(0, 2);
  // ten (value, function) template pairs
  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"%d", "(x -> x)"},
      {"%d", "(x -> x + 1)"},
      {"%d", "(x -> x * 2)"},
      {"%d", "(x -> x - 7)"},
      {"%d", "((a -> b -> a) 5)"},
      {"\"%s\"", "(s -> s)"},
      {"\"%s\"", "(s -> charAt 0 \"xyz\")"},
      {"%d", "((f -> x -> f (f x)) (x -> x + 3))"},
      {"%d", "((f -> g -> x -> f (g x)) (x -> x + 1) (x -> x * 2))"},
      {"true", "(b -> b && true)"},
  };
  int cases = 0;
  for (int round = 0; round < 100; ++round) {
    for (const auto& [vt, ft] : pairs) {
      std::string v = vt;
      if (v == "%d") v = std::to_string(val(rng));
      if (v == "\"%s\"") v = "\"s" + std::to_string(spick(rng)) + "\"";
      auto run = [&](const std::string& line) {
        TypeEnvironment e2 = env;
        InferOptions opt;
        opt.allow_commands = false;
        Inference inf = infer(normalize(parse_line(line), e2), e2, opt);
        EvalContext ctx;
        ctx.env = &e2;
        return reduce(inf.expr, ctx);
      };
      ExprPtr piped = run(v + " | " + ft);
      ExprPtr direct = run(ft + " " + v);
      expect(equal(piped, direct), "law failed for " + v + " | " + ft + ": " +
                                       serialize(piped) + " vs " + serialize(direct));
      ++cases;
    }
  }
  expect(cases == 1000, "case count");
}

// ---- criterion 3: overload resolution scenario ---------------------------------

void criterion_overloads() {
  // script mode: ambiguous without the annotation
  {
    TypeEnvironment env = fresh_env();
    InferOptions opt;
    opt.mode = Mode::Script;
    opt.allow_commands = false;
    bool threw = false;
    try {
      infer(normalize(parse_line("toInt \"123\""), env), env, opt);
    } catch (const InferError& e) {
      threw = e.kind == InferError::Kind::Ambiguous;
      std::string msg = e.what();
      expect(msg.find("Str -> Int -> Int") != std::string::npos, "radix overload listed");
      expect(msg.find("Str -> Int") != std::string::npos, "plain overload listed");
    }
    expect(threw, "script-mode ambiguity");
  }
  // the annotation selects (2) Str -> Int exactly
  {
    TypeEnvironment env = fresh_env();
    InferOptions opt;
    opt.mode = Mode::Script;
    opt.allow_commands = false;
    Inference inf = infer(normalize(parse_line("toInt \"123\" : Int"), env), env, opt);
    expect_eq(display_type(inf.type), "Int", "annotated result type");
    auto terms = flatten_spine(inf.expr);
    const auto* fn = as<HostFn>(terms[0]);
    expect(fn != nullptr, "resolved head is the host function");
    expect_eq(display_type(chain_arrows(fn->params, fn->result)), "Str -> Int",
              "selected signature");
  }
  // REPL mode: auto-selected literal, value 123 printed
  {
    auto cap = run_session({"toInt \"123\""}, Mode::Repl);
    expect_eq(cap.out, "123 : Int\n", "repl output");
  }
}

// ---- criterion 4: priority tables ----------------------------------------------

void criterion_priority_tables() {
  expect(rank_literal(t_int()) == 1, "rank Int");
  expect(rank_literal(t_float()) == 2, "rank Float");
  expect(rank_literal(t_bool()) == 3, "rank Bool");
  expect(rank_literal(t_char()) == 3, "rank Char");
  expect(rank_literal(t_str()) == 4, "rank Str");
  expect(rank_literal(list_of(t_str())) == 5, "rank List");
  expect(rank_literal(lineseq_of(t_str())) == 6, "rank LineSeq");
  expect(rank_literal(t_bytestream()) == 7, "rank ByteStream");
  expect(rank_literal(t_textreader()) == 7, "rank TextReader");
  expect(rank_literal(t_textwriter()) == 7, "rank TextWriter");
  expect(rank_literal(t_exitstatus()) == 8, "rank ExitStatus");
  expect(!rank_literal(arrow(t_int(), t_int())).has_value(), "arrows are not literals");

  // conversion selection over candidate sets covering all three rows
  TypeEnvironment env = fresh_env();
  EvalContext ctx;
  ctx.env = &env;
  // row 1: byte stream input wins by identity, no copy
  auto chan = std::make_shared<ByteChannel>();
  HostValue row1 = adapt_stream(HostValue{ByteIn{chan}}, t_bytestream(), ctx);
  expect(row1.get_if<ByteIn>() && row1.get_if<ByteIn>()->chan == chan, "row 1 identity");
  // row 2: text writers choose tws once row 1 does not unify
  auto w = std::make_shared<TextWriterVal>();
  w->content = "x\n";
  HostValue row2 = adapt_stream(HostValue{w}, t_bytestream(), ctx);
  expect(row2.is<ByteIn>(), "row 2 tws");
  // row 3: line sequences only when rows 1-2 do not unify
  auto seq = std::make_shared<LineSeqVal>();
  auto fired = std::make_shared<bool>(false);
  seq->elem_type = t_str();
  seq->next = [fired]() -> std::optional<HostValue> {
    if (*fired) return std::nullopt;
    *fired = true;
    return host_str("line");
  };
  HostValue row3 = adapt_stream(HostValue{seq}, t_bytestream(), ctx);
  expect(row3.is<ByteIn>(), "row 3 lns");

  // wrapped commands list their overloads in table order
  CommandResolver resolver;
  auto wc = resolver.resolve("wc");
  expect(wc.has_value(), "wc resolves");
  auto set = wrap_command(*wc, "wc", env);
  expect(set.size() == 3, "three wrapped overloads");
  expect_eq(display_type(set[0].signature), "ByteStream -> ByteStream", "row 1 raw");
  expect_eq(display_type(set[1].signature), "TextWriter -> ByteStream", "row 2 wrapper");
  expect_eq(display_type(set[2].signature), "LineSeq Str -> ByteStream", "row 3 wrapper");
  expect(set[0].priority_class <= set[1].priority_class &&
             set[1].priority_class <= set[2].priority_class,
         "wrapped ordering follows the table");
}

// ---- criterion 5: external-command equivalence ---------------------------------

void criterion_command_equivalence() {
  std::string expected = shell_oracle("echo \"abc def ghi\" | wc");
  auto cap = run_session({"echo \"abc def ghi\" | wc"}, Mode::Script);
  expect_eq(cap.out, expected, "engine output vs platform shell");

  if (const char* bin = std::getenv("FAVALON_BIN")) {
    fs::path script = fs::temp_directory_path() / "favalon_accept_wc.fav";
    {
      std::ofstream f(script);
      f << "echo \"abc def ghi\" | wc\n";
    }
    std::string out = shell_oracle(std::string(bin) + " " + script.string());
    expect_eq(out, expected, "CLI output vs platform shell");
    fs::remove(script);
  }
}

// ---- criterion 6: CSV end to end ------------------------------------------------

// independent reference: a straight-line CSV reader and first-occurrence
// filter, sharing no code with the engine implementation
std::vector<std::string> reference_distinct_first_column(const std::string& text) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::size_t i = 0;
  while (i < text.size()) {
    std::string first;
    bool in_quotes = false, done_first = false;
    while (i < text.size()) {
      char c = text[i++];
      if (in_quotes) {
        if (c == '"' && i < text.size() && text[i] == '"') { first += '"'; ++i; }
        else if (c == '"') in_quotes = false;
        else first += c;
        continue;
      }
      if (c == '"' && first.empty() && !done_first) { in_quotes = true; continue; }
      if (c == ',') { done_first = true; continue; }
      if (c == '\n') break;
      if (c != '\r' && !done_first) first += c;
    }
    if (seen.insert(first).second) out.push_back(first);
  }
  return out;
}

void criterion_csv() {
  fs::path dir = fs::temp_directory_path() / "favalon_accept_csv";
  fs::create_directories(dir);
  fs::path fixture = dir / "fixture.csv";

  std::mt19937 rng(607);
  const std::vector<std::string> keys = {"alpha", "beta,x", "gamma", "say \"hi\"",
                                         "delta", "epsilon", "zeta"};
  std::ostringstream csv;
  std::uniform_int_distribution<int> pick(0, keys.size() - 1);
  auto quote = [](const std::string& s) {
    if (s.find(',') == std::string::npos && s.find('"') == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += "\"\"";
      else q += c;
    }
    return q + "\"";
  };
  std::vector<std::string> first_occurrence;
  std::set<std::string> seen;
  for (int row = 0; row < 100; ++row) {
    // guarantee all seven keys appear: first seven rows in order
    const std::string& key = row < 7 ? keys[row] : keys[pick(rng)];
    if (seen.insert(key).second) first_occurrence.push_back(key);
    csv << quote(key) << ",v" << row << ",n" << (row * 31 % 17) << "\n";
  }
  {
    std::ofstream f(fixture);
    f << csv.str();
  }
  expect(first_occurrence.size() == 7, "fixture has exactly 7 distinct keys");

  auto expected_keys = reference_distinct_first_column(csv.str());
  expect(expected_keys == first_occurrence, "reference script agrees with construction");
  std::string expected;
  for (const auto& k : expected_keys) expected += k + "\n";

  char saved_cwd[4096];
  expect(::getcwd(saved_cwd, sizeof saved_cwd) != nullptr, "getcwd");
  expect(::chdir(dir.c_str()) == 0, "chdir to fixture dir");
  auto cap = run_session({"cat fixture.csv | pcsv | elementAt 0 | distinct"}, Mode::Script);
  auto repl = run_session({"cat fixture.csv | pcsv | elementAt 0 | distinct"}, Mode::Repl);
  expect(::chdir(saved_cwd) == 0, "chdir back");
  expect_eq(cap.out, expected, "distinct first-column values");
  expect_eq(repl.out, cap.out, "script output equals interactive output");
  fs::remove_all(dir);
}

// ---- criterion 7: inference suite ----------------------------------------------

void criterion_inference() {
  TypeEnvironment base = fresh_env();
  auto type_of = [&](const std::string& line) {
    TypeEnvironment env = base;
    InferOptions opt;
    opt.allow_commands = false;
    Inference inf = infer(normalize(parse_line(line), env), env, opt);
    return display_type(inf.type);
  };
  const std::vector<std::pair<std::string, std::string>> golden = {
      {"x -> x", "a -> a"},
      {"x -> y -> x", "a -> b -> a"},
      {"f -> g -> x -> f (g x)", "(a -> b) -> (c -> a) -> c -> b"},
      {"f -> x -> f (f x)", "(a -> a) -> a -> a"},
      {"(|)", "a -> (a -> b) -> b"},
      {"f -> g -> g f", "a -> (a -> b) -> b"},
      {"toInt \"123\" : Int", "Int"},
      {"toInt \"ff\" 16", "Int"},
      {"x -> x | (y -> y)", "a -> a"},
      {"(f -> g -> x -> f (g x)) (x -> x + 1) (x -> x * 2)", "Int -> Int"},
  };
  for (const auto& [line, want] : golden)
    expect_eq(type_of(line), want, "principal type of " + line);

  // randomized unification properties
  std::mt19937 rng(73);
  std::function<ExprPtr(int)> random_type = [&](int depth) -> ExprPtr {
    std::uniform_int_distribution<int> pick(0, depth > 0 ? 5 : 3);
    switch (pick(rng)) {
      case 0: return t_int();
      case 1: return t_str();
      case 2: return t_bool();
      case 3: {
        std::uniform_int_distribution<int> var(1, 4);
        return placeholder(var(rng));
      }
      case 4: return arrow(random_type(depth - 1), random_type(depth - 1));
      default: return list_of(random_type(depth - 1));
    }
  };
  for (int i = 0; i < 10000; ++i) {
    ExprPtr a = random_type(3);
    ExprPtr b = random_type(3);
    Substitution s1, s2;
    bool ab = true, ba = true;
    try {
      unify(a, b, s1);
    } catch (const UnifyError&) {
      ab = false;
    }
    try {
      unify(b, a, s2);
    } catch (const UnifyError&) {
      ba = false;
    }
    expect(ab == ba, "unifiability is symmetric");
    if (ab) {
      ExprPtr once = s1.apply(a);
      expect(serialize(s1.apply(once)) == serialize(once), "substitution idempotent");
      expect(serialize(once) == serialize(s1.apply(b)), "substitution equalizes");
    }
  }
  // occurs-check rejection
  Substitution s;
  bool occurs_threw = false;
  try {
    unify(placeholder(1), arrow(placeholder(1), t_int()), s);
  } catch (const UnifyError& e) {
    occurs_threw = e.kind == UnifyError::Kind::Occurs;
  }
  expect(occurs_threw, "occurs check rejects");
}

// ---- criterion 8: idempotence and preservation ----------------------------------

void criterion_normalize_properties() {
  TypeEnvironment env = fresh_env();
  std::mt19937 rng(333);
  std::function<std::string(int)> gen = [&](int budget) -> std::string {
    static const char* atoms[] = {"x", "y", "z", "echo", "toInt", "1", "2.5", "\"s\"", "w"};
    static const char* ops[] = {"+", "|", "*", "&&"};
    std::uniform_int_distribution<int> n_terms(1, 5);
    std::uniform_int_distribution<int> atom(0, std::size(atoms) - 1);
    std::uniform_int_distribution<int> op(0, std::size(ops) - 1);
    std::uniform_int_distribution<int> coin(0, 3);
    std::string line;
    int n = n_terms(rng);
    for (int i = 0; i < n; ++i) {
      if (i > 0 && coin(rng) == 0) {
        line += ops[op(rng)];
        line += ' ';
      }
      if (budget > 0 && coin(rng) == 1) {
        line += "(" + gen(budget - 1) + ") ";
      } else {
        line += atoms[atom(rng)];
        line += ' ';
      }
    }
    return line;
  };
  int successes = 0;
  long attempts = 0;
  while (successes < 10000 && attempts < 200000) {
    ++attempts;
    std::string line = gen(2);
    ExprPtr tree, once;
    try {
      tree = parse_line(line);
      once = normalize(tree, env);
    } catch (const FavalonError&) {
      continue;
    }
    ExprPtr twice = normalize(once, env);
    expect(serialize(once) == serialize(twice), "normalize idempotent on: " + line);
    expect(leaf_multiset(tree) == leaf_multiset(once), "leaves preserved on: " + line);
    ++successes;
  }
  expect(successes == 10000, "10000 successful cases");
}

// ---- criterion 9: session integrity ----------------------------------------------

void criterion_session_integrity() {
  std::vector<std::string> transcript;
  // 40 successful lines interleaved with 10 injected errors
  for (int i = 0; i < 20; ++i) {
    transcript.push_back("v" + std::to_string(i) + " = " + std::to_string(i) + " + " +
                         std::to_string(i));
    transcript.push_back("v" + std::to_string(i) + " * 2");
    if (i % 2 == 0) {
      static const char* errors[] = {
          "zzz_unbound",          "1 +",           "\"s\" + 1",
          "toInt \"nope\" : Int", "(a b",          "x | y -> z",
          "toInt 5",              "1 / 0",         "()",
          "cat \"/no/such/file.txt\"",
      };
      transcript.push_back(errors[i / 2]);
    }
  }
  expect(transcript.size() == 50, "transcript is 50 lines");

  auto first = run_session(transcript, Mode::Repl);
  auto second = run_session(transcript, Mode::Repl);
  expect(first.out == second.out && first.err == second.err,
         "byte-reproducible across two runs");

  // all successful bindings remain resolvable with their values
  SessionOptions opt;
  Session session(opt);
  std::string out;
  session.set_sinks([&](std::string_view s) { out += std::string(s); },
                    [](std::string_view) {});
  int diagnostics = 0;
  for (const auto& line : transcript)
    if (session.eval_line(line)) ++diagnostics;
  expect(diagnostics == 10, "exactly ten diagnostics, got " + std::to_string(diagnostics));
  for (int i = 0; i < 20; ++i) {
    out.clear();
    expect(!session.eval_line("v" + std::to_string(i)).has_value(), "binding still resolves");
    expect_eq(out, std::to_string(2 * i) + " : Int\n", "binding v" + std::to_string(i));
  }
}

struct Criterion {
  int number;
  const char* title;
  void (*run)();
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {1, "figure replay (tokens, parse tree, rewrite forms)", criterion_figures},
      {2, "pipeline law: v | f reduces like f v (1000 cases)", criterion_pipeline_law},
      {3, "toInt overload scenario (script/annotated/REPL)", criterion_overloads},
      {4, "literal and conversion priority tables", criterion_priority_tables},
      {5, "external-command pipeline equals the platform shell", criterion_command_equivalence},
      {6, "CSV end to end: distinct first-column values", criterion_csv},
      {7, "inference golden corpus and unification properties", criterion_inference},
      {8, "normalize idempotence and leaf preservation (10000 cases)",
       criterion_normalize_properties},
      {9, "session integrity over a 50-line transcript", criterion_session_integrity},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    std::string note;
    bool ok = true;
    try {
      c.run();
    } catch (const std::exception& e) {
      ok = false;
      note = e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char line[256];
    std::snprintf(line, sizeof line, "criterion %d: %s - %s (%.2fs)", c.number,
                  ok ? "PASS" : "FAIL", c.title, secs);
    std::puts(line);
    if (!ok) {
      std::printf("  %s\n", note.c_str());
      ++failures;
    }
  }
  return failures == 0 ? 0 : 1;
}
