#pragma once

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cstdlib>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "favalon/environment.hpp"
#include "favalon/eval.hpp"
#include "favalon/types.hpp"

namespace favalon {

namespace hostfn {

inline std::int64_t need_int(const ExprPtr& e) {
  const auto* c = as<Constant>(e);
  const std::int64_t* v = c ? c->value.get_if<std::int64_t>() : nullptr;
  if (!v) throw EvalError("expected an Int value", e ? e->span : Span{});
  return *v;
}
inline double need_float(const ExprPtr& e) {
  const auto* c = as<Constant>(e);
  const double* v = c ? c->value.get_if<double>() : nullptr;
  if (!v) throw EvalError("expected a Float value", e ? e->span : Span{});
  return *v;
}
inline bool need_bool(const ExprPtr& e) {
  const auto* c = as<Constant>(e);
  const bool* v = c ? c->value.get_if<bool>() : nullptr;
  if (!v) throw EvalError("expected a Bool value", e ? e->span : Span{});
  return *v;
}
inline const std::string& need_str(const ExprPtr& e) {
  const auto* c = as<Constant>(e);
  const std::string* v = c ? c->value.get_if<std::string>() : nullptr;
  if (!v) throw EvalError("expected a Str value", e ? e->span : Span{});
  return *v;
}
template <class T>
std::shared_ptr<T> need_handle(const ExprPtr& e, const char* what) {
  const auto* c = as<Constant>(e);
  const std::shared_ptr<T>* v = c ? c->value.get_if<std::shared_ptr<T>>() : nullptr;
  if (!v || !*v) throw EvalError(std::string("expected a ") + what + " value", e ? e->span : Span{});
  return *v;
}

inline ExprPtr value_expr(HostValue v, Span s = {}) {
  ExprPtr ty = host_type_of(v);
  return constant(std::move(v), std::move(ty), s);
}

}  // namespace hostfn

inline void collect_placeholder_ids(const ExprPtr& t, std::vector<int>& out) {
  if (!t) return;
  if (const auto* p = as<PlaceholderNode>(t)) {
    for (int id : out)
      if (id == p->id) return;
    out.push_back(p->id);
    return;
  }
  if (const auto* a = as<ApplyNode>(t)) {
    collect_placeholder_ids(a->fn, out);
    collect_placeholder_ids(a->arg, out);
  }
}

/// Registers a host function as one more overload of `name`. Signatures are
/// unary-curried chains; an empty parameter list is rejected.
inline TypeEnvironment register_host_function(
    TypeEnvironment env, const std::string& name, std::vector<ExprPtr> params, ExprPtr result,
    BoundAttributes attrs, std::function<ExprPtr(EvalContext&, std::span<const ExprPtr>)> impl,
    bool effectful = false, bool special_form = false) {
  if (params.empty())
    throw std::invalid_argument("host function '" + name + "' must take at least one parameter");
  for (const auto& p : params)
    if (!p) throw std::invalid_argument("host function '" + name + "' has a missing parameter type");
  if (!result) throw std::invalid_argument("host function '" + name + "' has no result type");
  ExprPtr sig = chain_arrows(params, result);
  std::vector<int> quantified;
  collect_placeholder_ids(sig, quantified);
  HostFn fn{name, std::move(params), std::move(result), std::move(impl), special_form, effectful};
  env.bind(name, attrs, make_expr(std::move(fn), sig), std::move(quantified));
  return env;
}

/// Registers a stream conversion participating in command wrapping and
/// adapt_stream. A duplicate (from, to) pair replaces the old entry.
inline TypeEnvironment register_conversion(TypeEnvironment env, Conversion c,
                                           const std::function<void(const std::string&)>& warn = {}) {
  env.register_conversion(std::move(c), warn);
  return env;
}

namespace detail {

inline ExprPtr make_pipe_lambda() {
  // fun f -> fun g -> g f, fully annotated over scheme placeholders
  ExprPtr a = placeholder(-1);
  ExprPtr b = placeholder(-2);
  ExprPtr fa = arrow(a, b);
  ExprPtr g = with_annotation(variable("g"), fa);
  ExprPtr f = with_annotation(variable("f"), a);
  ExprPtr body = with_annotation(apply(g, f), b);
  ExprPtr inner = make_expr(LambdaNode{"g", body}, arrow(fa, b));
  return make_expr(LambdaNode{"f", inner}, arrow(a, arrow(fa, b)));
}

inline std::shared_ptr<ByteChannel> lineseq_to_channel(std::shared_ptr<LineSeqVal> seq) {
  auto chan = std::make_shared<ByteChannel>();
  auto pending = std::make_shared<std::string>();
  auto pos = std::make_shared<std::size_t>(0);
  chan->read = [seq, pending, pos](char* buf, std::size_t cap) -> std::size_t {
    while (*pos == pending->size()) {
      auto item = seq->next ? seq->next() : std::nullopt;
      if (!item) return 0;
      const std::string* s = item->get_if<std::string>();
      *pending = s ? *s : constant_repr(*item);
      pending->push_back('\n');
      *pos = 0;
    }
    std::size_t n = std::min(cap, pending->size() - *pos);
    std::memcpy(buf, pending->data() + *pos, n);
    *pos += n;
    return n;
  };
  return chan;
}

inline std::optional<char> reader_next(TextReaderVal& r) { return r.next_char(); }

/// Pulls one CSV record: comma separators, double-quote quoting with
/// doubled-quote escapes, records end at newline (quoted newlines stay in
/// the field).
inline std::optional<std::vector<std::string>> csv_next_record(TextReaderVal& r) {
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  int reprocess = -1;  // one pushed-back character, -1 when empty
  for (;;) {
    std::optional<char> oc;
    if (reprocess >= 0) {
      oc = static_cast<char>(reprocess);
      reprocess = -1;
    } else {
      oc = reader_next(r);
    }
    if (!oc) {
      if (!any) return std::nullopt;
      fields.push_back(std::move(field));
      return fields;
    }
    char c = *oc;
    any = true;
    if (in_quotes) {
      if (c != '"') {
        field.push_back(c);
        continue;
      }
      auto peek = reader_next(r);
      if (peek && *peek == '"') {
        field.push_back('"');  // doubled quote
      } else {
        in_quotes = false;
        if (!peek) {
          fields.push_back(std::move(field));
          return fields;
        }
        reprocess = static_cast<unsigned char>(*peek);  // handled below
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field.empty()) in_quotes = true;
        else field.push_back('"');
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        break;
      case '\r':
        break;
      case '\n':
        fields.push_back(std::move(field));
        return fields;
      default:
        field.push_back(c);
    }
  }
}

inline std::shared_ptr<TextReaderVal> open_file_reader(const std::string& path, Span span,
                                                       std::atomic<bool>* cancel) {
  struct stat st{};
  bool fifo = ::stat(path.c_str(), &st) == 0 && S_ISFIFO(st.st_mode);
  // a FIFO opens read-write so reads wait for a writer instead of hitting
  // instant EOF; cancellation interrupts the poll loop
  int flags = fifo ? O_RDWR | O_NONBLOCK : O_RDONLY | O_NONBLOCK;
  int fd = ::open(path.c_str(), flags);
  if (fd < 0) throw EvalError("cannot open '" + path + "': " + std::strerror(errno), span);
  auto owned = std::make_shared<favalon::detail::Fd>(fd);
  auto reader = std::make_shared<TextReaderVal>();
  reader->read = [owned, cancel](char* buf, std::size_t cap) -> std::size_t {
    for (;;) {
      if (cancel && cancel->load()) throw EvalError("evaluation cancelled", {});
      ssize_t n = ::read(owned->fd, buf, cap);
      if (n > 0) return static_cast<std::size_t>(n);
      if (n == 0) return 0;
      if (errno == EINTR) continue;
      if (errno == EAGAIN) {
        pollfd p{owned->fd, POLLIN, 0};
        ::poll(&p, 1, 50);
        continue;
      }
      return 0;
    }
  };
  return reader;
}

}  // namespace detail

/// Adapts a stream-kinded value to `target` using the highest-priority
/// registered conversion; identity when already there.
inline HostValue adapt_stream(const HostValue& value, const ExprPtr& target, EvalContext& ctx) {
  ExprPtr from = host_type_of(value);
  if (ctx.env) {
    for (const auto& conv : ctx.env->conversions()) {
      if (equal(conv.from, from) && equal(conv.to, target) && conv.impl)
        return conv.impl(ctx, value);
    }
  }
  if (equal(from, target)) return value;
  throw EvalError("no conversion from " + display_type(from) + " to " + display_type(target), {});
}

/// Installs the standard environment: the arrow and binding markers,
/// arithmetic and logic operators, the pipeline operator, conversions, and
/// the core host functions.
inline TypeEnvironment install_prelude(TypeEnvironment env,
                                       std::atomic<bool>* cancel = nullptr) {
  using namespace hostfn;

  // type names
  env.bind("Int", kDefaultAttrs, t_int());
  env.bind("Float", kDefaultAttrs, t_float());
  env.bind("Bool", kDefaultAttrs, t_bool());
  env.bind("bool", kDefaultAttrs, t_bool());
  env.bind("Char", kDefaultAttrs, t_char());
  env.bind("Str", kDefaultAttrs, t_str());
  env.bind("Unit", kDefaultAttrs, t_unit());
  env.bind("ByteStream", kDefaultAttrs, t_bytestream());
  env.bind("TextReader", kDefaultAttrs, t_textreader());
  env.bind("TextWriter", kDefaultAttrs, t_textwriter());
  env.bind("ExitStatus", kDefaultAttrs, t_exitstatus());
  env.bind("List", kDefaultAttrs, list_ctor());
  env.bind("LineSeq", kDefaultAttrs, lineseq_ctor());
  env.bind("Pair", kDefaultAttrs, pair_ctor());

  env.bind("true", kDefaultAttrs, constant(host_bool(true), t_bool()));
  env.bind("false", kDefaultAttrs, constant(host_bool(false), t_bool()));
  env.bind("lastStatus", kDefaultAttrs, constant(HostValue{ExitStatus{0}}, t_exitstatus()));

  // the arrow builds lambdas from unreduced operands; inference handles it
  // as a special form before this implementation is ever consulted
  {
    ExprPtr a = placeholder(-1), b = placeholder(-2);
    env = register_host_function(
        std::move(env), "->", {a, b}, arrow(a, b), kInfixRtl,
        [](EvalContext&, std::span<const ExprPtr> args) -> ExprPtr {
          const auto* v = as<Variable>(args[0]);
          if (!v)
            throw EvalError("lambda parameter must be an identifier", args[0]->span);
          return lambda(v->name, args[1]);
        },
        false, /*special_form=*/true);
  }
  {
    ExprPtr a = placeholder(-1), b = placeholder(-2);
    env = register_host_function(
        std::move(env), "=", {a, b}, b, kInfixRtl,
        [](EvalContext&, std::span<const ExprPtr> args) -> ExprPtr {
          throw EvalError("'=' is only valid in a top-level binding", args[0]->span);
        },
        false, /*special_form=*/true);
  }

  // pipeline: fun f -> fun g -> g f, no expression-specific code
  {
    ExprPtr pipe = detail::make_pipe_lambda();
    env.bind("|", kInfixLtr, pipe, {-1, -2});
  }

  // arithmetic over Int and Float as overloads
  auto wrap_int = [](std::int64_t (*fn)(std::int64_t, std::int64_t, Span)) {
    return [fn](EvalContext&, std::span<const ExprPtr> args) -> ExprPtr {
      return hostfn::value_expr(
          host_int(fn(hostfn::need_int(args[0]), hostfn::need_int(args[1]), args[1]->span)));
    };
  };
  auto wrap_float = [](double (*fn)(double, double, Span)) {
    return [fn](EvalContext&, std::span<const ExprPtr> args) -> ExprPtr {
      return hostfn::value_expr(
          host_float(fn(hostfn::need_float(args[0]), hostfn::need_float(args[1]), args[1]->span)));
    };
  };
  auto add_arith = [&](const char* name, std::int64_t (*i)(std::int64_t, std::int64_t, Span),
                       double (*f)(double, double, Span)) {
    env = register_host_function(std::move(env), name, {t_int(), t_int()}, t_int(), kInfixLtr,
                                 wrap_int(i));
    env = register_host_function(std::move(env), name, {t_float(), t_float()}, t_float(),
                                 kInfixLtr, wrap_float(f));
  };
  add_arith(
      "+",
      [](std::int64_t a, std::int64_t b, Span) {
        return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) +
                                         static_cast<std::uint64_t>(b));
      },
      [](double a, double b, Span) { return a + b; });
  add_arith(
      "-",
      [](std::int64_t a, std::int64_t b, Span) {
        return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) -
                                         static_cast<std::uint64_t>(b));
      },
      [](double a, double b, Span) { return a - b; });
  add_arith(
      "*",
      [](std::int64_t a, std::int64_t b, Span) {
        return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) *
                                         static_cast<std::uint64_t>(b));
      },
      [](double a, double b, Span) { return a * b; });
  add_arith(
      "/",
      [](std::int64_t a, std::int64_t b, Span s) -> std::int64_t {
        if (b == 0) throw EvalError("integer division by zero", s);
        return a / b;
      },
      [](double a, double b, Span) { return a / b; });

  auto add_logic = [&](const char* name, bool (*fn)(bool, bool)) {
    env = register_host_function(
        std::move(env), name, {t_bool(), t_bool()}, t_bool(), kInfixLtr,
        [fn](EvalContext&, std::span<const ExprPtr> args) -> ExprPtr {
          return hostfn::value_expr(
              host_bool(fn(hostfn::need_bool(args[0]), hostfn::need_bool(args[1]))));
        });
  };
  add_logic("&&", [](bool a, bool b) { return a && b; });
  add_logic("||", [](bool a, bool b) { return a || b; });

  // toInt, radix overload first as in the source library
  auto parse_int = [](const std::string& s, int base, Span span) -> std::int64_t {
    if (s.empty()) throw EvalError("cannot parse '' as Int", span);
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(s.c_str(), &end, base);
    if (errno != 0 || end != s.c_str() + s.size())
      throw EvalError("cannot parse '" + s + "' as Int", span);
    return v;
  };
  env = register_host_function(
      std::move(env), "toInt", {t_str(), t_int()}, t_int(), kDefaultAttrs,
      [parse_int](EvalContext&, std::span<const ExprPtr> args) -> ExprPtr {
        int base = static_cast<int>(hostfn::need_int(args[1]));
        return hostfn::value_expr(
            host_int(parse_int(hostfn::need_str(args[0]), base, args[0]->span)));
      });
  env = register_host_function(
      std::move(env), "toInt", {t_str()}, t_int(), kDefaultAttrs,
      [parse_int](EvalContext&, std::span<const ExprPtr> args) -> ExprPtr {
        return hostfn::value_expr(
            host_int(parse_int(hostfn::need_str(args[0]), 10, args[0]->span)));
      });

  // echo writes its argument plus one trailing newline
  env = register_host_function(
      std::move(env), "echo", {t_str()}, t_textwriter(), kDefaultAttrs,
      [](EvalContext&, std::span<const ExprPtr> args) -> ExprPtr {
        auto w = std::make_shared<TextWriterVal>();
        w->content = hostfn::need_str(args[0]) + "\n";
        return hostfn::value_expr(HostValue{std::move(w)});
      });

  env = register_host_function(
      std::move(env), "cat", {t_str()}, t_textreader(), kDefaultAttrs,
      [cancel](EvalContext& ctx, std::span<const ExprPtr> args) -> ExprPtr {
        auto reader = detail::open_file_reader(hostfn::need_str(args[0]), args[0]->span,
                                               ctx.cancel ? ctx.cancel : cancel);
        return hostfn::value_expr(HostValue{std::move(reader)});
      });

  env = register_host_function(
      std::move(env), "pcsv", {t_textreader()}, lineseq_of(list_of(t_str())), kDefaultAttrs,
      [](EvalContext&, std::span<const ExprPtr> args) -> ExprPtr {
        auto reader = hostfn::need_handle<TextReaderVal>(args[0], "TextReader");
        if (reader->consumed) throw EvalError("text reader already consumed", args[0]->span);
        reader->consumed = true;
        auto seq = std::make_shared<LineSeqVal>();
        seq->elem_type = list_of(t_str());
        seq->next = [reader]() -> std::optional<HostValue> {
          auto rec = detail::csv_next_record(*reader);
          if (!rec) return std::nullopt;
          auto list = std::make_shared<ListVal>();
          list->elem_type = t_str();
          for (auto& f : *rec) list->items.push_back(host_str(std::move(f)));
          return HostValue{std::move(list)};
        };
        return hostfn::value_expr(HostValue{std::move(seq)});
      });

  env = register_host_function(
      std::move(env), "elementAt", {t_int(), lineseq_of(list_of(t_str()))}, lineseq_of(t_str()),
      kDefaultAttrs, [](EvalContext&, std::span<const ExprPtr> args) -> ExprPtr {
        std::int64_t index = hostfn::need_int(args[0]);
        auto seq = hostfn::need_handle<LineSeqVal>(args[1], "LineSeq");
        if (seq->consumed) throw EvalError("line sequence already consumed", args[1]->span);
        seq->consumed = true;
        Span span = args[0]->span;
        auto out = std::make_shared<LineSeqVal>();
        out->elem_type = t_str();
        out->next = [seq, index, span]() -> std::optional<HostValue> {
          auto item = seq->next();
          if (!item) return std::nullopt;
          const auto* list = item->get_if<std::shared_ptr<ListVal>>();
          if (!list) throw EvalError("elementAt expects string-list rows", span);
          if (index < 0 || static_cast<std::size_t>(index) >= (*list)->items.size())
            throw EvalError("elementAt index " + std::to_string(index) + " out of range", span);
          return (*list)->items[static_cast<std::size_t>(index)];
        };
        return hostfn::value_expr(HostValue{std::move(out)});
      });

  env = register_host_function(
      std::move(env), "distinct", {lineseq_of(t_str())}, lineseq_of(t_str()), kDefaultAttrs,
      [](EvalContext&, std::span<const ExprPtr> args) -> ExprPtr {
        auto seq = hostfn::need_handle<LineSeqVal>(args[0], "LineSeq");
        if (seq->consumed) throw EvalError("line sequence already consumed", args[0]->span);
        seq->consumed = true;
        auto seen = std::make_shared<std::set<std::string>>();
        Span span = args[0]->span;
        auto out = std::make_shared<LineSeqVal>();
        out->elem_type = t_str();
        out->next = [seq, seen, span]() -> std::optional<HostValue> {
          for (;;) {
            auto item = seq->next();
            if (!item) return std::nullopt;
            const auto* s = item->get_if<std::string>();
            if (!s) throw EvalError("distinct expects string lines", span);
            if (seen->insert(*s).second) return item;
          }
        };
        return hostfn::value_expr(HostValue{std::move(out)});
      });

  // instance-style host function: index first, receiver string last
  env = register_host_function(
      std::move(env), "charAt", {t_int(), t_str()}, t_str(), kDefaultAttrs,
      [](EvalContext&, std::span<const ExprPtr> args) -> ExprPtr {
        std::int64_t i = hostfn::need_int(args[0]);
        const std::string& s = hostfn::need_str(args[1]);
        if (i < 0 || static_cast<std::size_t>(i) >= s.size())
          throw EvalError("charAt index out of range", args[0]->span);
        return hostfn::value_expr(host_str(std::string(1, s[static_cast<std::size_t>(i)])));
      });

  // stream conversions in table order
  auto tws_impl = [](EvalContext&, const HostValue& v) -> HostValue {
    const auto* w = v.get_if<std::shared_ptr<TextWriterVal>>();
    if (!w) throw EvalError("tws expects a TextWriter", {});
    return HostValue{ByteIn{channel_from_string((*w)->content)}};
  };
  env.register_conversion(Conversion{
      "bs", t_bytestream(), t_bytestream(), 1, [](EvalContext&, const HostValue& v) -> HostValue {
        if (const auto* out = v.get_if<ByteOut>()) return HostValue{ByteIn{out->chan}};
        return v;
      }});
  env.register_conversion(Conversion{"tws", t_textwriter(), t_bytestream(), 2, tws_impl});
  env.register_conversion(Conversion{
      "lns", lineseq_of(t_str()), t_bytestream(), 3, [](EvalContext&, const HostValue& v) -> HostValue {
        const auto* seq = v.get_if<std::shared_ptr<LineSeqVal>>();
        if (!seq) throw EvalError("lns expects a LineSeq", {});
        (*seq)->consumed = true;
        return HostValue{ByteIn{detail::lineseq_to_channel(*seq)}};
      }});

  // tws is also callable directly, matching the wrapped-command emulation
  env = register_host_function(
      std::move(env), "tws", {t_textwriter()}, t_bytestream(), kDefaultAttrs,
      [tws_impl](EvalContext& ctx, std::span<const ExprPtr> args) -> ExprPtr {
        auto w = hostfn::need_handle<TextWriterVal>(args[0], "TextWriter");
        return hostfn::value_expr(tws_impl(ctx, HostValue{w}));
      });

  return env;
}

}  // namespace favalon
