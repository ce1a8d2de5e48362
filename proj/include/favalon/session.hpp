#pragma once

#include <atomic>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "favalon/environment.hpp"
#include "favalon/eval.hpp"
#include "favalon/infer.hpp"
#include "favalon/lexer.hpp"
#include "favalon/parser.hpp"
#include "favalon/prelude.hpp"
#include "favalon/process.hpp"
#include "favalon/rewrite.hpp"

namespace favalon {

struct Diagnostic {
  std::string message;
  Span span{};
};

struct SessionOptions {
  Mode mode = Mode::Repl;
  bool install_prelude = true;
  bool allow_commands = true;
  bool execute_commands = true;
  bool dump_ast = false;
  bool dump_rewritten = false;
  bool dump_types = false;
};

/// Recognized top-level binding form: `name = expr`,
/// `name : type = expr`, or `(sym @ ATTRS) = expr`.
struct BindForm {
  std::string name;
  BoundAttributes attrs;
  std::vector<Token> annotation;  // empty when absent
  std::vector<Token> value;
};

namespace detail {

inline int top_level_equals(const std::vector<Token>& toks) {
  int depth = 0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].kind == TokenKind::OpenParen) ++depth;
    else if (toks[i].kind == TokenKind::CloseParen) --depth;
    else if (depth == 0 && toks[i].kind == TokenKind::Symbol && toks[i].text == "=")
      return static_cast<int>(i);
  }
  return -1;
}

inline std::optional<BoundAttributes> parse_attr_tokens(const std::vector<Token>& toks,
                                                        std::size_t begin, std::size_t end) {
  BoundAttributes attrs = kDefaultAttrs;
  bool expecting = true;
  for (std::size_t i = begin; i < end; ++i) {
    const Token& t = toks[i];
    if (t.kind == TokenKind::Symbol && t.text == ",") {
      if (expecting) return std::nullopt;
      expecting = true;
      continue;
    }
    if (!expecting || t.kind != TokenKind::Identity) return std::nullopt;
    if (t.text == "PREFIX") attrs.fixity = Fixity::Prefix;
    else if (t.text == "INFIX") attrs.fixity = Fixity::Infix;
    else if (t.text == "LTR") attrs.assoc = Assoc::Ltr;
    else if (t.text == "RTL") attrs.assoc = Assoc::Rtl;
    else return std::nullopt;
    expecting = false;
  }
  return expecting ? std::nullopt : std::optional<BoundAttributes>(attrs);
}

/// Splits a binding line at the first top-level `=`; null when the line is
/// an ordinary expression. Throws ParseError on a malformed binding head.
inline std::optional<BindForm> recognize_bind(const std::vector<Token>& toks) {
  int eq = top_level_equals(toks);
  if (eq < 0) return std::nullopt;
  std::vector<Token> lhs(toks.begin(), toks.begin() + eq);
  BindForm form;
  form.value.assign(toks.begin() + eq + 1, toks.end());
  if (form.value.empty())
    throw ParseError("binding has no right-hand expression", toks[eq].span);

  if (lhs.size() == 1 && lhs[0].kind == TokenKind::Identity) {
    form.name = lhs[0].text;
    form.attrs = kDefaultAttrs;
    return form;
  }
  if (lhs.size() >= 3 && lhs[0].kind == TokenKind::Identity &&
      lhs[1].kind == TokenKind::Symbol && lhs[1].text == ":") {
    form.name = lhs[0].text;
    form.attrs = kDefaultAttrs;
    form.annotation.assign(lhs.begin() + 2, lhs.end());
    return form;
  }
  if (lhs.size() >= 4 && lhs.front().kind == TokenKind::OpenParen &&
      lhs.back().kind == TokenKind::CloseParen &&
      (lhs[1].kind == TokenKind::Symbol || lhs[1].kind == TokenKind::Identity) &&
      lhs[2].kind == TokenKind::Symbol && lhs[2].text == "@") {
    auto attrs = parse_attr_tokens(lhs, 3, lhs.size() - 1);
    if (!attrs)
      throw ParseError("malformed attribute list; expected PREFIX/INFIX/LTR/RTL", lhs[2].span);
    form.name = lhs[1].text;
    form.attrs = *attrs;
    return form;
  }
  throw ParseError(
      "malformed binding; expected `name = expr`, `name : type = expr` or `(op @ ATTRS) = expr`",
      lhs.empty() ? toks[eq].span : lhs[0].span);
}

inline bool is_comment_or_blank(const std::string& line) {
  for (char c : line) {
    if (c == ' ' || c == '\t' || c == '\r') continue;
    return c == '#';
  }
  return true;
}

inline int unbalanced_parens(const std::string& line) {
  try {
    auto toks = tokenize(line);
    int depth = 0;
    for (const auto& t : toks) {
      if (t.kind == TokenKind::OpenParen) ++depth;
      else if (t.kind == TokenKind::CloseParen) --depth;
    }
    return depth;
  } catch (const LexError&) {
    return 0;  // let eval_line report it
  }
}

}  // namespace detail

/// One interactive or scripted evaluation session: persistent environment,
/// command resolution cache, output sinks, and cancellation.
class Session {
 public:
  using Sink = std::function<void(std::string_view)>;

  explicit Session(SessionOptions opt = {})
      : opt_(opt),
        out_([](std::string_view s) { std::fwrite(s.data(), 1, s.size(), stdout); }),
        err_([](std::string_view s) { std::fwrite(s.data(), 1, s.size(), stderr); }) {
    if (opt_.install_prelude) env_ = install_prelude(std::move(env_), &cancel_);
  }

  void set_sinks(Sink out, Sink err) {
    out_ = std::move(out);
    err_ = std::move(err);
  }

  TypeEnvironment& env() { return env_; }
  const TypeEnvironment& env() const { return env_; }
  std::atomic<bool>& cancel_flag() { return cancel_; }
  Mode mode() const { return opt_.mode; }
  void set_mode(Mode m) { opt_.mode = m; }
  int last_status() const { return last_status_; }

  std::vector<std::string> complete(const std::string& prefix) const {
    return env_.complete(prefix);
  }

  /// Evaluates one logical line. The environment only changes when the
  /// whole line succeeds.
  std::optional<Diagnostic> eval_line(const std::string& line) {
    if (detail::is_comment_or_blank(line)) return std::nullopt;
    cancel_.store(false);
    try {
      eval_line_inner(line);
      return std::nullopt;
    } catch (const FavalonError& e) {
      return render_diagnostic(line, e.what(), e.span);
    } catch (const std::exception& e) {
      return render_diagnostic(line, e.what(), {});
    }
  }

  /// Evaluates a script line-by-line with Script-mode overload resolution;
  /// stops at the first diagnostic. Returns the process exit status.
  int run_script(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
      err_("error: cannot open script '" + path + "'\n");
      return 1;
    }
    Mode saved = opt_.mode;
    opt_.mode = Mode::Script;
    int status = run_stream(in, /*stop_on_error=*/true);
    opt_.mode = saved;
    return status;
  }

  int run_stream(std::istream& in, bool stop_on_error) {
    std::string line, pending;
    int status = 0;
    while (std::getline(in, line)) {
      pending += line;
      if (detail::unbalanced_parens(pending) > 0) {
        pending += "\n";
        continue;
      }
      auto diag = eval_line(pending);
      pending.clear();
      if (diag) {
        status = 1;
        if (stop_on_error) return status;
      }
    }
    return status;
  }

  /// Runs an rc script at startup; diagnostics go to the error sink but do
  /// not stop the session.
  void run_rc(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
      err_("warning: cannot open rc file '" + path + "'\n");
      return;
    }
    run_stream(in, /*stop_on_error=*/false);
  }

 private:
  void eval_line_inner(const std::string& line) {
    auto tokens = tokenize(line);
    if (tokens.empty()) return;
    auto bind_form = detail::recognize_bind(tokens);

    std::vector<Token> expr_tokens = bind_form ? bind_form->value : tokens;
    ExprPtr tree = parse(expr_tokens);
    if (bind_form && !bind_form->annotation.empty())
      tree = with_annotation(tree, parse(bind_form->annotation));

    if (opt_.dump_ast) {
      out_(serialize(tree) + "\n");
    }

    CommandProbe probe = [this](const std::string& name) {
      return resolver_.resolve(name).has_value();
    };
    ExprPtr normalized = normalize(tree, env_, probe);
    if (opt_.dump_rewritten) {
      out_(serialize(normalized) + "\n");
    }
    if ((opt_.dump_ast || opt_.dump_rewritten) && !opt_.dump_types) return;

    // work on a copy; commit on success only
    TypeEnvironment working = env_;
    InferOptions iopt;
    iopt.mode = opt_.mode;
    iopt.allow_commands = opt_.allow_commands;
    iopt.resolver = &resolver_;
    Inference inf = infer(normalized, working, iopt);
    if (opt_.dump_types) {
      out_(serialize(normalized) + " : " + display_type(inf.type) + "\n");
      return;  // dump modes inspect, they do not run
    }

    EvalContext ctx;
    ctx.env = &working;
    ctx.execute_commands = opt_.execute_commands;
    ctx.cancel = &cancel_;
    ExprPtr value = reduce(inf.expr, ctx);

    if (bind_form) {
      if (!value->annotation) value = with_annotation(value, inf.type);
      working.bind(bind_form->name, bind_form->attrs, value, inf.quantified);
      if (opt_.mode == Mode::Repl)
        out_(bind_form->name + " : " + display_type(inf.type) + " = " + brief_value(value) +
             "\n");
    } else {
      render_result(value, inf.type);
    }
    finish_processes(ctx, working);
    env_ = std::move(working);
  }

  void finish_processes(EvalContext& ctx, TypeEnvironment& working) {
    bool any = false;
    int last = 0;
    for (auto& h : ctx.spawned) {
      bool done;
      if (h->output_eof) {
        h->reap();  // drained to EOF, the process is exiting
        done = true;
      } else {
        done = h->try_reap();
        if (!done && h.use_count() == 1) {
          // nothing holds the output stream any more; stop the orphan
          h->kill_now();
          h->reap();
          done = true;
        }
      }
      if (!done) continue;  // a bound stream value still owns this process
      if (!h->stderr_text.empty()) err_(h->stderr_text);
      last = h->exit_code;
      any = true;
    }
    if (any) {
      last_status_ = last;
      working.rebind("lastStatus", kDefaultAttrs,
                     constant(HostValue{ExitStatus{last}}, t_exitstatus()));
    }
  }

  void drain_bytes(const std::shared_ptr<ByteChannel>& chan) {
    if (!chan || !chan->read) return;
    char buf[8192];
    for (;;) {
      if (cancel_.load()) throw EvalError("evaluation cancelled", {});
      std::size_t n = chan->read(buf, sizeof buf);
      if (n == 0) break;
      out_(std::string_view(buf, n));
    }
    if (chan->on_close) {
      chan->on_close();
      chan->on_close = {};
    }
  }

  void render_result(const ExprPtr& value, const ExprPtr& type) {
    const bool repl = opt_.mode == Mode::Repl;
    if (const auto* c = as<Constant>(value)) {
      const HostValue& v = c->value;
      if (const auto* out = v.get_if<ByteOut>()) {
        drain_bytes(out->chan);
        return;
      }
      if (const auto* in = v.get_if<ByteIn>()) {
        drain_bytes(in->chan);
        return;
      }
      if (const auto* w = v.get_if<std::shared_ptr<TextWriterVal>>()) {
        out_((*w)->content);
        return;
      }
      if (const auto* r = v.get_if<std::shared_ptr<TextReaderVal>>()) {
        char buf[8192];
        while (std::size_t n = (*r)->read ? (*r)->read(buf, sizeof buf) : 0)
          out_(std::string_view(buf, n));
        return;
      }
      if (const auto* seq = v.get_if<std::shared_ptr<LineSeqVal>>()) {
        bool any = false;
        while (auto item = (*seq)->next ? (*seq)->next() : std::nullopt) {
          any = true;
          if (const auto* s = item->get_if<std::string>()) {
            out_(*s + "\n");
          } else if (const auto* list = item->get_if<std::shared_ptr<ListVal>>()) {
            std::string joined;
            for (std::size_t i = 0; i < (*list)->items.size(); ++i) {
              if (i) joined += ",";
              const auto* f = (*list)->items[i].get_if<std::string>();
              joined += f ? *f : constant_repr((*list)->items[i]);
            }
            out_(joined + "\n");
          } else {
            out_(constant_repr(*item) + "\n");
          }
        }
        if (!any && repl) out_(": " + display_type(type) + "\n");  // type line only
        return;
      }
      out_(constant_repr(v) + (repl ? " : " + display_type(type) : "") + "\n");
      return;
    }
    out_(brief_value(value) + (repl ? " : " + display_type(type) : "") + "\n");
  }

  std::string brief_value(const ExprPtr& value) {
    if (const auto* c = as<Constant>(value)) return constant_repr(c->value);
    if (is<LambdaNode>(value) || is<HostFn>(value)) return "<fun>";
    if (const auto* cmd = as<CommandTermNode>(value)) return "<command " + cmd->display_name + ">";
    if (const auto* t = as<TypeTermNode>(value)) return t->name;
    if (const auto* t = as<TypeCtorNode>(value)) return t->name;
    if (is<ApplyNode>(value)) {
      std::vector<ExprPtr> terms = flatten_spine(value);
      if (const auto* cmd = as<CommandTermNode>(terms[0])) {
        std::string s = "<command " + cmd->display_name;
        for (std::size_t i = 1; i < terms.size(); ++i) {
          const auto* arg = as<Constant>(terms[i]);
          if (arg && arg->value.is<std::string>()) s += " " + *arg->value.get_if<std::string>();
        }
        return s + ">";
      }
      if (is<TypeCtorNode>(terms[0]) || is<TypeTermNode>(terms[0])) return display_type(value);
      return "<fun>";
    }
    return serialize(value);
  }

  Diagnostic render_diagnostic(const std::string& line, const std::string& msg, Span span) {
    std::ostringstream os;
    os << "error: " << msg << "\n";
    if (span.end > span.begin && span.begin < line.size()) {
      os << "  " << line << "\n  ";
      for (std::size_t i = 0; i < span.begin; ++i) os << ' ';
      std::size_t width = std::min(span.end, line.size()) - span.begin;
      for (std::size_t i = 0; i < std::max<std::size_t>(width, 1); ++i) os << '^';
      os << "\n";
    }
    err_(os.str());
    return Diagnostic{msg, span};
  }

  SessionOptions opt_;
  TypeEnvironment env_;
  CommandResolver resolver_;
  std::atomic<bool> cancel_{false};
  int last_status_ = 0;
  Sink out_, err_;
};

}  // namespace favalon
