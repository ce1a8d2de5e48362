#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "favalon/expr.hpp"

namespace favalon {

struct UnifyError : FavalonError {
  enum class Kind { Mismatch, Occurs, KindArity };
  Kind kind;
  UnifyError(Kind k, std::string msg, Span s = {}) : FavalonError(std::move(msg), s), kind(k) {}
};

// ---- type constructors -------------------------------------------------------

inline ExprPtr arrow_ctor() {
  static const ExprPtr c = make_expr(TypeCtorNode{"->", 2});
  return c;
}
inline ExprPtr list_ctor() {
  static const ExprPtr c = make_expr(TypeCtorNode{"List", 1});
  return c;
}
inline ExprPtr lineseq_ctor() {
  static const ExprPtr c = make_expr(TypeCtorNode{"LineSeq", 1});
  return c;
}
inline ExprPtr pair_ctor() {
  static const ExprPtr c = make_expr(TypeCtorNode{"Pair", 2});
  return c;
}

#define FAVALON_PRIM_TYPE(fn, name)                \
  inline ExprPtr fn() {                            \
    static const ExprPtr t = type_term(name);      \
    return t;                                      \
  }
FAVALON_PRIM_TYPE(t_int, "Int")
FAVALON_PRIM_TYPE(t_float, "Float")
FAVALON_PRIM_TYPE(t_bool, "Bool")
FAVALON_PRIM_TYPE(t_char, "Char")
FAVALON_PRIM_TYPE(t_str, "Str")
FAVALON_PRIM_TYPE(t_unit, "Unit")
FAVALON_PRIM_TYPE(t_bytestream, "ByteStream")
FAVALON_PRIM_TYPE(t_textreader, "TextReader")
FAVALON_PRIM_TYPE(t_textwriter, "TextWriter")
FAVALON_PRIM_TYPE(t_exitstatus, "ExitStatus")
#undef FAVALON_PRIM_TYPE

inline ExprPtr arrow(ExprPtr a, ExprPtr b) {
  return make_expr(ApplyNode{make_expr(ApplyNode{arrow_ctor(), std::move(a)}), std::move(b)},
                   kind_star());
}
inline ExprPtr list_of(ExprPtr t) {
  return make_expr(ApplyNode{list_ctor(), std::move(t)}, kind_star());
}
inline ExprPtr lineseq_of(ExprPtr t) {
  return make_expr(ApplyNode{lineseq_ctor(), std::move(t)}, kind_star());
}

/// Splits `a -> b` into (a, b); null on anything else.
inline std::optional<std::pair<ExprPtr, ExprPtr>> split_arrow(const ExprPtr& t) {
  const auto* outer = as<ApplyNode>(t);
  if (!outer) return std::nullopt;
  const auto* inner = as<ApplyNode>(outer->fn);
  if (!inner) return std::nullopt;
  const auto* ctor = as<TypeCtorNode>(inner->fn);
  if (!ctor || ctor->name != "->") return std::nullopt;
  return std::make_pair(inner->arg, outer->arg);
}

inline ExprPtr chain_arrows(std::span<const ExprPtr> params, ExprPtr result) {
  ExprPtr t = std::move(result);
  for (auto it = params.rbegin(); it != params.rend(); ++it) t = arrow(*it, t);
  return t;
}

/// Full type expression of a runtime value.
inline ExprPtr host_type_of(const HostValue& v) {
  if (const auto* l = v.get_if<std::shared_ptr<ListVal>>())
    return list_of((*l)->elem_type ? (*l)->elem_type : t_str());
  if (const auto* l = v.get_if<std::shared_ptr<LineSeqVal>>())
    return lineseq_of((*l)->elem_type ? (*l)->elem_type : t_str());
  return type_term(host_type_name(v));
}

// ---- substitution ------------------------------------------------------------

/// Idempotent placeholder binding map with an occurs check.
class Substitution {
 public:
  bool contains(int id) const { return map_.count(id) != 0; }
  std::size_t size() const { return map_.size(); }

  /// Follow placeholder links until a non-bound head is reached.
  ExprPtr walk(ExprPtr t) const {
    while (t) {
      const auto* p = as<PlaceholderNode>(t);
      if (!p) return t;
      auto it = map_.find(p->id);
      if (it == map_.end()) return t;
      t = it->second;
    }
    return t;
  }

  /// Deep application; the result contains no bound placeholders.
  ExprPtr apply(const ExprPtr& t) const {
    if (!t) return t;
    ExprPtr w = walk(t);
    if (const auto* a = as<ApplyNode>(w)) {
      ExprPtr f = apply(a->fn), x = apply(a->arg);
      if (f == a->fn && x == a->arg) return w;
      return make_expr(ApplyNode{std::move(f), std::move(x)}, w->annotation, w->span);
    }
    return w;
  }

  bool occurs(int id, const ExprPtr& t) const {
    ExprPtr w = walk(t);
    if (const auto* p = as<PlaceholderNode>(w)) return p->id == id;
    if (const auto* a = as<ApplyNode>(w)) return occurs(id, a->fn) || occurs(id, a->arg);
    return false;
  }

  void bind(int id, const ExprPtr& t, Span where = {}) {
    if (occurs(id, t))
      throw UnifyError(UnifyError::Kind::Occurs,
                       "occurs check: placeholder _" + std::to_string(id) +
                           " would contain itself",
                       where);
    map_[id] = t;
  }

  void collect_free(const ExprPtr& t, std::vector<int>& out) const {
    ExprPtr w = walk(t);
    if (!w) return;
    if (const auto* p = as<PlaceholderNode>(w)) {
      for (int id : out)
        if (id == p->id) return;
      out.push_back(p->id);
      return;
    }
    if (const auto* a = as<ApplyNode>(w)) {
      collect_free(a->fn, out);
      collect_free(a->arg, out);
    }
  }

 private:
  std::unordered_map<int, ExprPtr> map_;
};

// ---- unification ---------------------------------------------------------------

namespace detail {
inline std::string type_head_name(const ExprPtr& t) {
  if (const auto* tt = as<TypeTermNode>(t)) return tt->name;
  if (const auto* tc = as<TypeCtorNode>(t)) return tc->name;
  if (is<KindStarNode>(t)) return "*";
  if (is<ApplyNode>(t)) return "<application>";
  if (const auto* p = as<PlaceholderNode>(t)) return "_" + std::to_string(p->id);
  return "<type>";
}
}  // namespace detail

std::string display_type(const ExprPtr& t, const Substitution* s = nullptr);

/// Robinson unification over type expressions. Mutates `s`; throws UnifyError.
inline void unify(const ExprPtr& a, const ExprPtr& b, Substitution& s, Span where = {}) {
  ExprPtr x = s.walk(a), y = s.walk(b);
  const auto* px = as<PlaceholderNode>(x);
  const auto* py = as<PlaceholderNode>(y);
  if (px && py && px->id == py->id) return;
  if (px) {
    s.bind(px->id, y, where);
    return;
  }
  if (py) {
    s.bind(py->id, x, where);
    return;
  }
  const auto* ax = as<ApplyNode>(x);
  const auto* ay = as<ApplyNode>(y);
  if (ax && ay) {
    unify(ax->fn, ay->fn, s, where);
    unify(ax->arg, ay->arg, s, where);
    return;
  }
  if ((ax && is<TypeCtorNode>(y)) || (ay && is<TypeCtorNode>(x))) {
    throw UnifyError(UnifyError::Kind::KindArity,
                     "type constructor arity mismatch: " + display_type(x, &s) + " vs " +
                         display_type(y, &s),
                     where);
  }
  const auto* tx = as<TypeTermNode>(x);
  const auto* ty = as<TypeTermNode>(y);
  if (tx && ty && tx->name == ty->name) return;
  const auto* cx = as<TypeCtorNode>(x);
  const auto* cy = as<TypeCtorNode>(y);
  if (cx && cy) {
    if (cx->name == cy->name && cx->arity == cy->arity) return;
    throw UnifyError(UnifyError::Kind::KindArity,
                     "type constructors differ: " + cx->name + " vs " + cy->name, where);
  }
  if (is<KindStarNode>(x) && is<KindStarNode>(y)) return;
  throw UnifyError(UnifyError::Kind::Mismatch,
                   "cannot unify " + display_type(x, &s) + " with " + display_type(y, &s), where);
}

/// Non-destructive check: does unify(a, b) succeed from this substitution?
inline bool unifiable(const ExprPtr& a, const ExprPtr& b, const Substitution& s) {
  Substitution trial = s;
  try {
    unify(a, b, trial);
    return true;
  } catch (const UnifyError&) {
    return false;
  }
}

// ---- literal priority ranking ---------------------------------------------------

/// Priority class of a fully applied type per the 8-row resolution table;
/// lower ranks first. Arrows and unresolved placeholders are not literals.
inline std::optional<int> rank_literal(const ExprPtr& t, const Substitution* s = nullptr) {
  ExprPtr w = s ? s->apply(t) : t;
  if (!w) return std::nullopt;
  if (split_arrow(w)) return std::nullopt;
  if (is<PlaceholderNode>(w)) return std::nullopt;
  if (const auto* tt = as<TypeTermNode>(w)) {
    const std::string& n = tt->name;
    if (n == "Int") return 1;
    if (n == "Float") return 2;
    if (n == "Bool" || n == "Char") return 3;
    if (n == "Str") return 4;
    if (n == "ByteStream" || n == "TextReader" || n == "TextWriter") return 7;
    return 8;  // ExitStatus, Unit, opaque host types
  }
  if (const auto* app = as<ApplyNode>(w)) {
    ExprPtr head = app->fn;
    while (const auto* inner = as<ApplyNode>(head)) head = inner->fn;
    if (const auto* ctor = as<TypeCtorNode>(head)) {
      if (ctor->name == "List") return 5;
      if (ctor->name == "LineSeq") return 6;
      return 8;
    }
  }
  return 8;
}

// ---- display ---------------------------------------------------------------------

namespace detail {

struct TypeNamer {
  std::unordered_map<int, std::string> names;
  std::string name_for(int id) {
    auto it = names.find(id);
    if (it != names.end()) return it->second;
    std::size_t k = names.size();
    std::string n;
    n.push_back(static_cast<char>('a' + k % 26));
    if (k >= 26) n += std::to_string(k / 26);
    names.emplace(id, n);
    return n;
  }
};

inline void display_to(std::ostringstream& os, const ExprPtr& t, const Substitution* s,
                       TypeNamer& namer, bool parens_arrow) {
  ExprPtr w = s ? s->walk(t) : t;
  if (!w) {
    os << "?";
    return;
  }
  if (const auto* p = as<PlaceholderNode>(w)) {
    os << namer.name_for(p->id);
    return;
  }
  if (auto arr = split_arrow(w)) {
    if (parens_arrow) os << "(";
    display_to(os, arr->first, s, namer, true);
    os << " -> ";
    display_to(os, arr->second, s, namer, false);
    if (parens_arrow) os << ")";
    return;
  }
  if (const auto* tt = as<TypeTermNode>(w)) {
    os << tt->name;
    return;
  }
  if (const auto* tc = as<TypeCtorNode>(w)) {
    os << tc->name;
    return;
  }
  if (is<KindStarNode>(w)) {
    os << "*";
    return;
  }
  if (const auto* app = as<ApplyNode>(w)) {
    display_to(os, app->fn, s, namer, true);
    os << " ";
    ExprPtr argw = s ? s->walk(app->arg) : app->arg;
    bool need = is<ApplyNode>(argw);
    if (need) os << "(";
    display_to(os, app->arg, s, namer, true);
    if (need) os << ")";
    return;
  }
  os << serialize(w);
}

}  // namespace detail

/// Human-readable type rendering; placeholders become a, b, c... in
/// first-occurrence order.
inline std::string display_type(const ExprPtr& t, const Substitution* s) {
  std::ostringstream os;
  detail::TypeNamer namer;
  detail::display_to(os, t, s, namer, false);
  return os.str();
}

/// Alpha-equivalence of type expressions: structure equal up to a bijection
/// between placeholder ids.
inline bool alpha_equal_types(const ExprPtr& a, const ExprPtr& b,
                              std::unordered_map<int, int>* fwd = nullptr,
                              std::unordered_map<int, int>* bwd = nullptr) {
  std::unordered_map<int, int> f_local, b_local;
  if (!fwd) {
    fwd = &f_local;
    bwd = &b_local;
  }
  if (!a || !b) return a == b;
  const auto* pa = as<PlaceholderNode>(a);
  const auto* pb = as<PlaceholderNode>(b);
  if (pa || pb) {
    if (!pa || !pb) return false;
    auto itf = fwd->find(pa->id);
    auto itb = bwd->find(pb->id);
    if (itf == fwd->end() && itb == bwd->end()) {
      fwd->emplace(pa->id, pb->id);
      bwd->emplace(pb->id, pa->id);
      return true;
    }
    return itf != fwd->end() && itb != bwd->end() && itf->second == pb->id &&
           itb->second == pa->id;
  }
  if (a->node.index() != b->node.index()) return false;
  if (const auto* aa = as<ApplyNode>(a)) {
    const auto* ab = as<ApplyNode>(b);
    return alpha_equal_types(aa->fn, ab->fn, fwd, bwd) &&
           alpha_equal_types(aa->arg, ab->arg, fwd, bwd);
  }
  return equal(a, b);
}

}  // namespace favalon
