#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "favalon/host_value.hpp"
#include "favalon/lexer.hpp"

namespace favalon {

struct Expression;
using ExprPtr = std::shared_ptr<const Expression>;
struct CommandSpec;
struct EvalContext;

struct Variable {
  std::string name;
};

struct Constant {
  HostValue value;
};

struct ApplyNode {
  ExprPtr fn;
  ExprPtr arg;
};

struct LambdaNode {
  std::string param;
  ExprPtr body;
};

/// A fully applied host type (kind *).
struct TypeTermNode {
  std::string name;
};

/// A type-level function, e.g. List : * -> * or the arrow constructor.
struct TypeCtorNode {
  std::string name;
  int arity = 1;
};

/// Imported host function with a unary-curried signature chain.
struct HostFn {
  std::string name;
  std::vector<ExprPtr> params;
  ExprPtr result;
  std::function<ExprPtr(EvalContext&, std::span<const ExprPtr>)> impl;
  bool special_form = false;  // receives unreduced argument expressions
  bool effectful = false;
};

/// Resolved external command as a typed function: argv_params leading Str
/// arguments, then one stream argument routed through `conversion`.
struct CommandTermNode {
  std::shared_ptr<const CommandSpec> spec;
  std::string display_name;
  int argv_params = 0;
  ExprPtr input_type;      // type of the stream parameter
  std::string conversion;  // registered conversion name; empty = raw bytes
};

/// Unresolved inference variable.
struct PlaceholderNode {
  int id = 0;
};

/// The distinguished annotation terminator `*`.
struct KindStarNode {};

struct Expression {
  using Node = std::variant<Variable, Constant, ApplyNode, LambdaNode, TypeTermNode,
                            TypeCtorNode, HostFn, CommandTermNode, PlaceholderNode, KindStarNode>;
  Node node;
  ExprPtr annotation;  // the node's type; null while unknown, chains end at `*`
  Span span{};
  bool grouped = false;  // parenthesized alone, or an operator the rewriter placed

  explicit Expression(Node n) : node(std::move(n)) {}
  Expression(Node n, ExprPtr ann, Span s, bool g = false)
      : node(std::move(n)), annotation(std::move(ann)), span(s), grouped(g) {}
};

template <class T>
const T* as(const ExprPtr& e) {
  return e ? std::get_if<T>(&e->node) : nullptr;
}
template <class T>
bool is(const ExprPtr& e) {
  return as<T>(e) != nullptr;
}

// ---- builders --------------------------------------------------------------

inline ExprPtr make_expr(Expression::Node n, ExprPtr ann = nullptr, Span s = {}, bool grouped = false) {
  return std::make_shared<Expression>(std::move(n), std::move(ann), s, grouped);
}

inline ExprPtr variable(std::string name, Span s = {}) {
  return make_expr(Variable{std::move(name)}, nullptr, s);
}
inline ExprPtr constant(HostValue v, ExprPtr type = nullptr, Span s = {}) {
  return make_expr(Constant{std::move(v)}, std::move(type), s);
}
inline ExprPtr apply(ExprPtr f, ExprPtr a, Span s = {}) {
  if (s == Span{}) s = join(f->span, a->span);
  return make_expr(ApplyNode{std::move(f), std::move(a)}, nullptr, s);
}
inline ExprPtr lambda(std::string param, ExprPtr body, Span s = {}) {
  return make_expr(LambdaNode{std::move(param), std::move(body)}, nullptr, s);
}
inline ExprPtr kind_star() {
  static const ExprPtr star = make_expr(KindStarNode{});
  return star;
}
inline ExprPtr type_term(std::string name) {
  return make_expr(TypeTermNode{std::move(name)}, kind_star());
}
inline ExprPtr placeholder(int id) { return make_expr(PlaceholderNode{id}); }

inline ExprPtr with_annotation(const ExprPtr& e, ExprPtr ann) {
  return make_expr(e->node, std::move(ann), e->span, e->grouped);
}
inline ExprPtr with_grouped(const ExprPtr& e) {
  return make_expr(e->node, e->annotation, e->span, true);
}

// ---- spine helpers ---------------------------------------------------------

/// Flatten the left application spine, stopping at grouped applies.
inline std::vector<ExprPtr> flatten_spine(const ExprPtr& e) {
  std::vector<ExprPtr> terms;
  ExprPtr cur = e;
  while (const auto* app = as<ApplyNode>(cur)) {
    if (cur != e && cur->grouped) break;  // parenthesized sub-application
    terms.push_back(app->arg);
    cur = app->fn;
  }
  terms.push_back(cur);
  std::reverse(terms.begin(), terms.end());
  return terms;
}

inline ExprPtr fold_spine(std::span<const ExprPtr> terms, Span s = {}) {
  ExprPtr acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = apply(acc, terms[i]);
  if (!(s == Span{})) acc = make_expr(acc->node, acc->annotation, s, acc->grouped);
  return acc;
}

// ---- canonical text form ----------------------------------------------------

std::string serialize(const ExprPtr& e);
std::string constant_repr(const HostValue& v);

inline std::string constant_repr(const HostValue& v) {
  std::ostringstream os;
  struct Writer {
    std::ostringstream& os;
    void operator()(std::int64_t x) { os << x; }
    void operator()(double x) {
      std::ostringstream tmp;
      tmp << x;
      std::string s = tmp.str();
      if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
          s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
        s += ".0";  // floats stay visibly floats
      os << s;
    }
    void operator()(bool x) { os << (x ? "true" : "false"); }
    void operator()(char x) { os << '\'' << x << '\''; }
    void operator()(const std::string& x) {
      os << '"';
      for (char c : x) {
        switch (c) {
          case '"': os << "\\\""; break;
          case '\\': os << "\\\\"; break;
          case '\n': os << "\\n"; break;
          case '\t': os << "\\t"; break;
          default: os << c;
        }
      }
      os << '"';
    }
    void operator()(Unit) { os << "()"; }
    void operator()(const std::shared_ptr<ListVal>& l) {
      os << "[";
      for (std::size_t i = 0; l && i < l->items.size(); ++i) {
        if (i) os << ", ";
        os << constant_repr(l->items[i]);
      }
      os << "]";
    }
    void operator()(const std::shared_ptr<LineSeqVal>&) { os << "<lineseq>"; }
    void operator()(ByteIn) { os << "<stream>"; }
    void operator()(ByteOut) { os << "<stream>"; }
    void operator()(const std::shared_ptr<TextReaderVal>&) { os << "<reader>"; }
    void operator()(const std::shared_ptr<TextWriterVal>&) { os << "<writer>"; }
    void operator()(ExitStatus e) { os << e.code; }
  };
  std::visit(Writer{os}, v.rep);
  return os.str();
}

namespace detail {

void serialize_to(std::ostringstream& os, const ExprPtr& e);

/// Compact type spelling for constant annotations: `Str`, `LineSeq (List
/// Str)`. Falls back to the structural form for anything unusual.
inline void compact_type_to(std::ostringstream& os, const ExprPtr& t, bool parens) {
  if (const auto* tt = std::get_if<TypeTermNode>(&t->node)) {
    os << tt->name;
    return;
  }
  if (const auto* tc = std::get_if<TypeCtorNode>(&t->node)) {
    os << tc->name;
    return;
  }
  if (const auto* app = std::get_if<ApplyNode>(&t->node)) {
    if (parens) os << "(";
    compact_type_to(os, app->fn, true);
    os << " ";
    compact_type_to(os, app->arg, !is<TypeTermNode>(app->arg) && !is<TypeCtorNode>(app->arg));
    if (parens) os << ")";
    return;
  }
  serialize_to(os, t);
}

inline void serialize_to(std::ostringstream& os, const ExprPtr& e) {
  if (!e) {
    os << "_";
    return;
  }
  const bool show_ann =
      e->annotation && !is<PlaceholderNode>(e->annotation) && !is<Constant>(e) &&
      !is<TypeTermNode>(e) && !is<TypeCtorNode>(e);
  struct V {
    std::ostringstream& os;
    const ExprPtr& e;
    bool show_ann;
    void finish() const {
      if (show_ann) {
        os << ", ";
        serialize_to(os, e->annotation);
      }
    }
    void operator()(const Variable& v) const {
      if (show_ann) {
        os << "Variable(" << v.name << ", ";
        serialize_to(os, e->annotation);
        os << ")";
      } else {
        os << v.name;
      }
    }
    void operator()(const Constant& c) const {
      os << "Constant(" << constant_repr(c.value) << ", ";
      if (e->annotation && !is<PlaceholderNode>(e->annotation)) {
        compact_type_to(os, e->annotation, false);
      } else {
        os << host_type_name(c.value);
      }
      os << ")";
    }
    void operator()(const ApplyNode& a) const {
      os << "Apply(";
      serialize_to(os, a.fn);
      os << ", ";
      serialize_to(os, a.arg);
      finish();
      os << ")";
    }
    void operator()(const LambdaNode& l) const {
      os << "Lambda(" << l.param << ", ";
      serialize_to(os, l.body);
      finish();
      os << ")";
    }
    void operator()(const TypeTermNode& t) const { os << "Type(" << t.name << ", *)"; }
    void operator()(const TypeCtorNode& t) const {
      os << "TypeCtor(" << t.name << ", " << t.arity << ")";
    }
    void operator()(const HostFn& h) const { os << "HostFn(" << h.name << ")"; }
    void operator()(const CommandTermNode& c) const { os << "Command(" << c.display_name << ")"; }
    void operator()(const PlaceholderNode& p) const { os << "_" << p.id; }
    void operator()(const KindStarNode&) const { os << "*"; }
  };
  std::visit(V{os, e, show_ann}, e->node);
}

}  // namespace detail

/// Canonical serialization: node, children, then annotation when meaningful.
inline std::string serialize(const ExprPtr& e) {
  std::ostringstream os;
  detail::serialize_to(os, e);
  return os.str();
}

// ---- structural equality and leaves -----------------------------------------

/// Structural equality; annotations are only compared when requested.
inline bool equal(const ExprPtr& a, const ExprPtr& b, bool with_annotations = false) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->node.index() != b->node.index()) return false;
  if (with_annotations) {
    bool ha = static_cast<bool>(a->annotation), hb = static_cast<bool>(b->annotation);
    if (ha != hb) return false;
    if (ha && !equal(a->annotation, b->annotation, true)) return false;
  }
  struct V {
    const ExprPtr& b;
    bool wa;
    bool operator()(const Variable& x) const { return x.name == as<Variable>(b)->name; }
    bool operator()(const Constant& x) const {
      return host_values_equal(x.value, as<Constant>(b)->value);
    }
    bool operator()(const ApplyNode& x) const {
      const auto* y = as<ApplyNode>(b);
      return equal(x.fn, y->fn, wa) && equal(x.arg, y->arg, wa);
    }
    bool operator()(const LambdaNode& x) const {
      const auto* y = as<LambdaNode>(b);
      return x.param == y->param && equal(x.body, y->body, wa);
    }
    bool operator()(const TypeTermNode& x) const { return x.name == as<TypeTermNode>(b)->name; }
    bool operator()(const TypeCtorNode& x) const {
      const auto* y = as<TypeCtorNode>(b);
      return x.name == y->name && x.arity == y->arity;
    }
    bool operator()(const HostFn& x) const {
      const auto* y = as<HostFn>(b);
      return x.name == y->name && x.params.size() == y->params.size();
    }
    bool operator()(const CommandTermNode& x) const {
      const auto* y = as<CommandTermNode>(b);
      return x.display_name == y->display_name && x.argv_params == y->argv_params &&
             x.conversion == y->conversion;
    }
    bool operator()(const PlaceholderNode& x) const { return x.id == as<PlaceholderNode>(b)->id; }
    bool operator()(const KindStarNode&) const { return true; }
  };
  return std::visit(V{b, with_annotations}, a->node);
}

/// In-order leaf descriptors (used by the leaf-preservation property).
inline void collect_leaves(const ExprPtr& e, std::vector<std::string>& out) {
  if (!e) return;
  if (const auto* a = as<ApplyNode>(e)) {
    collect_leaves(a->fn, out);
    collect_leaves(a->arg, out);
    return;
  }
  if (const auto* l = as<LambdaNode>(e)) {
    out.push_back("\\" + l->param);
    collect_leaves(l->body, out);
    return;
  }
  out.push_back(serialize(e));
}

inline std::map<std::string, int> leaf_multiset(const ExprPtr& e) {
  std::vector<std::string> leaves;
  collect_leaves(e, leaves);
  std::map<std::string, int> m;
  for (auto& s : leaves) ++m[s];
  return m;
}

}  // namespace favalon
