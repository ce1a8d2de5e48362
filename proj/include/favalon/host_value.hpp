#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace favalon {

struct Expression;
using ExprPtr = std::shared_ptr<const Expression>;
struct EvalContext;

struct Unit {
  bool operator==(const Unit&) const = default;
};

struct ExitStatus {
  int code = 0;
  bool operator==(const ExitStatus&) const = default;
};

/// Single-consumer pull source of raw bytes. Backed either by a live file
/// descriptor (command stdout), an in-memory buffer, or a generator.
struct ByteChannel {
  std::function<std::size_t(char*, std::size_t)> read;  // 0 = EOF
  std::function<void()> on_close;
  int raw_fd = -1;              // >= 0 when OS-backed; enables fd passing
  std::shared_ptr<void> producer;  // keeps a producing process alive
  bool consumed = false;

  ByteChannel() = default;
  ByteChannel(const ByteChannel&) = delete;
  ByteChannel& operator=(const ByteChannel&) = delete;
  ~ByteChannel() {
    if (on_close) on_close();
  }
};

/// Readable end of a byte stream offered to a command's stdin.
struct ByteIn {
  std::shared_ptr<ByteChannel> chan;
};

/// Byte stream produced by a command's stdout.
struct ByteOut {
  std::shared_ptr<ByteChannel> chan;
};

/// Single-consumer text source (character granularity, line helpers on top).
struct TextReaderVal {
  std::function<std::size_t(char*, std::size_t)> read;  // 0 = EOF
  bool consumed = false;

  // one-byte pull with internal buffering
  std::optional<char> next_char() {
    if (pos_ == len_) {
      if (!read) return std::nullopt;
      len_ = read(buf_, sizeof buf_);
      pos_ = 0;
      if (len_ == 0) return std::nullopt;
    }
    return buf_[pos_++];
  }

  std::optional<std::string> next_line() {
    std::string line;
    bool any = false;
    while (auto c = next_char()) {
      any = true;
      if (*c == '\n') break;
      line.push_back(*c);
    }
    if (!any) return std::nullopt;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

 private:
  char buf_[4096];
  std::size_t pos_ = 0, len_ = 0;
};

/// Accumulated text produced by a text-writing host function.
struct TextWriterVal {
  std::string content;
};

struct ListVal;
struct LineSeqVal;

/// Runtime value of the host layer. Streams are handles with shared state;
/// everything else has value semantics.
struct HostValue {
  using Rep = std::variant<std::int64_t,                   // Int
                           double,                         // Float
                           bool,                           // Bool
                           char,                           // Char
                           std::string,                    // Str
                           Unit,                           // Unit
                           std::shared_ptr<ListVal>,       // List
                           std::shared_ptr<LineSeqVal>,    // LineSeq
                           ByteIn, ByteOut,                // byte streams
                           std::shared_ptr<TextReaderVal>, // TextReader
                           std::shared_ptr<TextWriterVal>, // TextWriter
                           ExitStatus>;
  Rep rep;

  HostValue() : rep(Unit{}) {}
  HostValue(Rep r) : rep(std::move(r)) {}

  template <class T>
  const T* get_if() const {
    return std::get_if<T>(&rep);
  }
  template <class T>
  bool is() const {
    return std::holds_alternative<T>(rep);
  }
};

inline HostValue host_int(std::int64_t v) { return HostValue{v}; }
inline HostValue host_float(double v) { return HostValue{v}; }
inline HostValue host_bool(bool v) { return HostValue{v}; }
inline HostValue host_char(char v) { return HostValue{v}; }
inline HostValue host_str(std::string v) { return HostValue{std::move(v)}; }
inline HostValue host_unit() { return HostValue{Unit{}}; }

struct ListVal {
  std::vector<HostValue> items;
  ExprPtr elem_type;  // element type expression
};

/// Lazy, single-consumer sequence of values (text lines or string records).
struct LineSeqVal {
  std::function<std::optional<HostValue>()> next;
  ExprPtr elem_type;
  bool consumed = false;
};

bool host_values_equal(const HostValue& a, const HostValue& b);

inline bool host_values_equal(const HostValue& a, const HostValue& b) {
  if (a.rep.index() != b.rep.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b.rep);
        if constexpr (std::is_same_v<T, std::shared_ptr<ListVal>>) {
          if (x == y) return true;
          if (!x || !y || x->items.size() != y->items.size()) return false;
          for (std::size_t i = 0; i < x->items.size(); ++i)
            if (!host_values_equal(x->items[i], y->items[i])) return false;
          return true;
        } else if constexpr (std::is_same_v<T, std::shared_ptr<LineSeqVal>> ||
                             std::is_same_v<T, std::shared_ptr<TextReaderVal>> ||
                             std::is_same_v<T, std::shared_ptr<TextWriterVal>>) {
          return x == y;  // handle identity
        } else if constexpr (std::is_same_v<T, ByteIn> || std::is_same_v<T, ByteOut>) {
          return x.chan == y.chan;
        } else {
          return x == y;
        }
      },
      a.rep);
}

/// Host type name of a runtime value ("Int", "Str", ...). The full type
/// expression is built in types.hpp; this is the tag used by constants.
inline const char* host_type_name(const HostValue& v) {
  struct Namer {
    const char* operator()(std::int64_t) const { return "Int"; }
    const char* operator()(double) const { return "Float"; }
    const char* operator()(bool) const { return "Bool"; }
    const char* operator()(char) const { return "Char"; }
    const char* operator()(const std::string&) const { return "Str"; }
    const char* operator()(Unit) const { return "Unit"; }
    const char* operator()(const std::shared_ptr<ListVal>&) const { return "List"; }
    const char* operator()(const std::shared_ptr<LineSeqVal>&) const { return "LineSeq"; }
    const char* operator()(ByteIn) const { return "ByteStream"; }
    const char* operator()(ByteOut) const { return "ByteStream"; }
    const char* operator()(const std::shared_ptr<TextReaderVal>&) const { return "TextReader"; }
    const char* operator()(const std::shared_ptr<TextWriterVal>&) const { return "TextWriter"; }
    const char* operator()(ExitStatus) const { return "ExitStatus"; }
  };
  return std::visit(Namer{}, v.rep);
}

}  // namespace favalon
