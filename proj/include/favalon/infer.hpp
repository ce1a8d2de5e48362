#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "favalon/environment.hpp"
#include "favalon/process.hpp"
#include "favalon/types.hpp"

namespace favalon {

enum class Mode { Script, Repl };

struct InferError : FavalonError {
  enum class Kind { Unbound, Ambiguous, NoOverload, BadTerm, Type };
  Kind kind;
  InferError(Kind k, std::string msg, Span s = {}) : FavalonError(std::move(msg), s), kind(k) {}
};

/// One resolution candidate: an instantiable signature plus a way to
/// materialize the chosen expression.
struct OverloadCandidate {
  ExprPtr signature;            // curried type, quantified over `quantified`
  std::vector<int> quantified;
  int priority_class = 0;       // conversion-table rank for command wrappers
  int registration_index = 0;
  std::string display;
  std::function<ExprPtr(const std::unordered_map<int, int>&)> materialize;
};

struct InferOptions {
  Mode mode = Mode::Repl;
  bool allow_commands = true;
  CommandResolver* resolver = nullptr;
};

struct Inference {
  ExprPtr expr;  // fully annotated tree with variables resolved
  ExprPtr type;
  std::vector<int> quantified;
};

/// Typed wrappers for an external command seen with `applied_args`
/// arguments: `j` leading Str argv parameters (0..applied_args) followed by
/// the stream input routed through each registered conversion, in
/// conversion-table order. For the bare command this is the raw byte-stream
/// signature plus one derived overload per conversion.
std::vector<OverloadCandidate> wrap_command(const CommandSpec& spec, const std::string& name,
                                            const TypeEnvironment& env,
                                            std::size_t applied_args = 0);

namespace detail {

inline bool is_param_binding(const std::string& name, const OverloadList& list) {
  if (list.size() != 1) return false;
  const auto* v = as<Variable>(list[0].value);
  return v && v->name == name && list[0].value->annotation &&
         is<PlaceholderNode>(list[0].value->annotation);
}

inline const HostFn* special_marker(const OverloadList* list) {
  if (!list || list->size() != 1) return nullptr;
  const auto* h = as<HostFn>(list->front().value);
  return h && h->special_form ? h : nullptr;
}

/// Clones a tree, renaming the placeholder ids in `fresh` everywhere
/// (annotations included).
inline ExprPtr freshen(const ExprPtr& e, const std::unordered_map<int, int>& fresh) {
  if (!e) return e;
  ExprPtr ann = freshen(e->annotation, fresh);
  if (const auto* p = as<PlaceholderNode>(e)) {
    auto it = fresh.find(p->id);
    if (it == fresh.end() && ann == e->annotation) return e;
    return make_expr(PlaceholderNode{it == fresh.end() ? p->id : it->second}, ann, e->span,
                     e->grouped);
  }
  if (const auto* a = as<ApplyNode>(e)) {
    ExprPtr f = freshen(a->fn, fresh), x = freshen(a->arg, fresh);
    if (f == a->fn && x == a->arg && ann == e->annotation) return e;
    return make_expr(ApplyNode{std::move(f), std::move(x)}, ann, e->span, e->grouped);
  }
  if (const auto* l = as<LambdaNode>(e)) {
    ExprPtr b = freshen(l->body, fresh);
    if (b == l->body && ann == e->annotation) return e;
    return make_expr(LambdaNode{l->param, std::move(b)}, ann, e->span, e->grouped);
  }
  if (const auto* h = as<HostFn>(e)) {
    HostFn copy = *h;
    bool changed = ann != e->annotation;
    for (auto& p : copy.params) {
      ExprPtr q = freshen(p, fresh);
      changed |= q != p;
      p = std::move(q);
    }
    ExprPtr r = freshen(copy.result, fresh);
    changed |= r != copy.result;
    copy.result = std::move(r);
    if (!changed) return e;
    return make_expr(std::move(copy), ann, e->span, e->grouped);
  }
  if (ann == e->annotation) return e;
  return make_expr(e->node, ann, e->span, e->grouped);
}

}  // namespace detail

/// Quantifies the placeholders of `t` that are not free in the environment.
/// Top-level bindings store closed schemes, so in practice this collects
/// every free placeholder of the substituted type.
inline std::vector<int> generalize(const ExprPtr& t, const TypeEnvironment& env) {
  std::vector<int> out;
  env.subst().collect_free(env.subst().apply(t), out);
  return out;
}

/// Replaces the quantified placeholders of a scheme with fresh ones.
inline ExprPtr instantiate(const ExprPtr& t, const std::vector<int>& quantified,
                           TypeEnvironment& env) {
  std::unordered_map<int, int> fresh;
  for (int id : quantified) fresh.emplace(id, env.fresh_placeholder_id());
  return detail::freshen(t, fresh);
}

class Inferencer {
 public:
  Inferencer(TypeEnvironment& env, InferOptions opt) : env_(env), opt_(opt) {}

  Inference run(const ExprPtr& normalized) {
    ExprPtr ty = infer_node(normalized, env_);
    resolve_deferred();
    ExprPtr final_type = env_.subst().apply(ty);
    Inference result;
    result.expr = rebuild(normalized);
    result.type = final_type;
    result.quantified = generalize(final_type, env_);
    return result;
  }

  /// Spec-level entry for direct overload resolution: picks a candidate for
  /// already-observed argument types and an optional expected result.
  static const OverloadCandidate* resolve_overloads(
      const std::vector<OverloadCandidate>& candidates, std::span<const ExprPtr> arg_types,
      const ExprPtr& expected, Mode mode, TypeEnvironment& env, std::string* ambiguity = nullptr);

 private:
  struct Deferred {
    const Expression* node;
    int tau;
    std::size_t applied_args;
    std::vector<OverloadCandidate> candidates;
    std::string name;
    Span span;
    bool command = false;  // command wrappers resolve by conversion priority
  };

  TypeEnvironment& env_;
  InferOptions opt_;
  std::unordered_map<const Expression*, ExprPtr> types_;
  std::unordered_map<const Expression*, ExprPtr> replacements_;
  std::unordered_map<const Expression*, ExprPtr> param_anns_;
  std::vector<Deferred> deferred_;

  // ---- helpers ------------------------------------------------------------

  static ExprPtr kind_of_ctor(int arity) {
    ExprPtr k = kind_star();
    for (int i = 0; i < arity; ++i) k = arrow(kind_star(), k);
    return k;
  }

  ExprPtr fresh() { return env_.fresh_placeholder(); }

  /// Instantiates a binding into a typed value clone plus its type.
  std::pair<ExprPtr, ExprPtr> instantiate_binding(const Binding& b) {
    std::unordered_map<int, int> fresh_map;
    for (int id : b.quantified) fresh_map.emplace(id, env_.fresh_placeholder_id());
    ExprPtr value = detail::freshen(b.value, fresh_map);
    ExprPtr ty = value->annotation;
    if (!ty) {
      if (const auto* h = as<HostFn>(value))
        ty = chain_arrows(h->params, h->result);
      else if (is<TypeTermNode>(value))
        ty = kind_star();
      else if (const auto* c = as<TypeCtorNode>(value))
        ty = kind_of_ctor(c->arity);
      else if (const auto* cn = as<Constant>(value))
        ty = host_type_of(cn->value);
      else
        ty = fresh();
      value = with_annotation(value, ty);
    }
    return {value, ty};
  }

  std::vector<OverloadCandidate> candidates_from_overloads(const OverloadList& list) {
    std::vector<OverloadCandidate> out;
    int idx = 0;
    for (const auto& b : list) {
      OverloadCandidate c;
      if (b.value->annotation) {
        c.signature = b.value->annotation;
      } else if (const auto* h = as<HostFn>(b.value)) {
        c.signature = chain_arrows(h->params, h->result);
      } else if (const auto* cn = as<Constant>(b.value)) {
        c.signature = host_type_of(cn->value);
      } else {
        c.signature = fresh();
      }
      c.quantified = b.quantified;
      c.registration_index = idx++;
      c.display = display_type(c.signature);
      ExprPtr stored = b.value;
      c.materialize = [stored](const std::unordered_map<int, int>& fresh_map) {
        return detail::freshen(stored, fresh_map);
      };
      out.push_back(std::move(c));
    }
    return out;
  }

  std::vector<OverloadCandidate> command_candidates(const CommandSpec& spec,
                                                    const std::string& name, std::size_t k) {
    return wrap_command(spec, name, env_, k);
  }

  // ---- type elaboration ------------------------------------------------------

  ExprPtr elaborate_type(const ExprPtr& e, const TypeEnvironment& scope) {
    if (!e) return fresh();
    if (is<TypeTermNode>(e) || is<TypeCtorNode>(e) || is<KindStarNode>(e) ||
        is<PlaceholderNode>(e))
      return e;
    if (const auto* v = as<Variable>(e)) {
      if (v->name == "->") return arrow_ctor();
      const auto* list = scope.lookup(v->name);
      if (list)
        for (const auto& b : *list) {
          if (is<TypeTermNode>(b.value) || is<TypeCtorNode>(b.value)) return b.value;
        }
      throw InferError(InferError::Kind::Type, "unknown type name '" + v->name + "'", e->span);
    }
    if (const auto* a = as<ApplyNode>(e)) {
      ExprPtr f = elaborate_type(a->fn, scope);
      ExprPtr x = elaborate_type(a->arg, scope);
      ExprPtr result_kind = fresh();
      unify(kind_of(f), arrow(kind_of(x), result_kind), env_.subst(), e->span);
      return make_expr(ApplyNode{std::move(f), std::move(x)}, env_.subst().apply(result_kind),
                       e->span);
    }
    throw InferError(InferError::Kind::Type,
                     "expression is not valid in type position: " + serialize(e), e->span);
  }

  ExprPtr kind_of(const ExprPtr& t) {
    ExprPtr w = env_.subst().walk(t);
    if (const auto* c = as<TypeCtorNode>(w)) return kind_of_ctor(c->arity);
    if (is<TypeTermNode>(w)) return kind_star();
    if (is<KindStarNode>(w)) return kind_star();
    if (const auto* a = as<ApplyNode>(w)) {
      ExprPtr kf = kind_of(a->fn);
      if (auto arr = split_arrow(kf)) return arr->second;
      return kind_star();
    }
    return kind_star();
  }

  void handle_annotation(const ExprPtr& e, const ExprPtr& ty, const TypeEnvironment& scope) {
    if (!e->annotation || is<PlaceholderNode>(e->annotation)) return;
    ExprPtr expected = elaborate_type(e->annotation, scope);
    unify(ty, expected, env_.subst(), e->span);
  }

  // ---- the walk ---------------------------------------------------------------

  ExprPtr infer_node(const ExprPtr& e, const TypeEnvironment& scope) {
    ExprPtr ty = infer_node_inner(e, scope);
    types_[e.get()] = ty;
    return ty;
  }

  ExprPtr infer_node_inner(const ExprPtr& e, const TypeEnvironment& scope) {
    if (const auto* c = as<Constant>(e)) {
      ExprPtr ty = host_type_of(c->value);
      handle_annotation(e, ty, scope);
      return ty;
    }
    if (is<ApplyNode>(e)) return infer_apply(e, scope);
    if (const auto* l = as<LambdaNode>(e)) {
      auto pit = param_anns_.find(e.get());
      ExprPtr pann = pit == param_anns_.end() ? nullptr : pit->second;
      ExprPtr ty = infer_lambda(l->param, pann, l->body, scope, e->span);
      handle_annotation(e, ty, scope);
      return ty;
    }
    if (const auto* v = as<Variable>(e)) return infer_variable(e, *v, scope);
    if (is<TypeTermNode>(e)) return kind_star();
    if (const auto* tc = as<TypeCtorNode>(e)) return kind_of_ctor(tc->arity);
    if (const auto* h = as<HostFn>(e)) return chain_arrows(h->params, h->result);
    if (const auto* cmd = as<CommandTermNode>(e)) {
      std::vector<ExprPtr> params(static_cast<std::size_t>(cmd->argv_params), t_str());
      params.push_back(cmd->input_type ? cmd->input_type : t_bytestream());
      return chain_arrows(params, t_bytestream());
    }
    if (is<PlaceholderNode>(e)) return e;
    if (is<KindStarNode>(e)) return kind_star();
    throw InferError(InferError::Kind::BadTerm, "cannot infer " + serialize(e), e->span);
  }

  ExprPtr infer_lambda(const std::string& param, const ExprPtr& param_ann, const ExprPtr& body,
                       const TypeEnvironment& scope, Span span) {
    ExprPtr alpha = fresh();
    if (param_ann && !is<PlaceholderNode>(param_ann))
      unify(alpha, elaborate_type(param_ann, scope), env_.subst(), span);
    TypeEnvironment inner = scope.push_scope();
    inner.bind(param, kDefaultAttrs, with_annotation(variable(param, span), alpha));
    ExprPtr body_ty = infer_node(body, inner);
    return arrow(alpha, body_ty);
  }

  ExprPtr infer_variable(const ExprPtr& e, const Variable& v, const TypeEnvironment& scope,
                         std::size_t applied_args = 0) {
    const auto* list = scope.lookup(v.name);
    if (list && !list->empty()) {
      if (detail::is_param_binding(v.name, *list)) {
        ExprPtr ty = list->front().value->annotation;
        replacements_[e.get()] = with_annotation(variable(v.name, e->span), ty);
        handle_annotation(e, ty, scope);
        return ty;
      }
      if (const auto* marker = detail::special_marker(list); marker && marker->name == "=") {
        throw InferError(InferError::Kind::BadTerm,
                         "'=' is only valid in a top-level binding", e->span);
      }
      if (list->size() == 1) {
        auto [value, ty] = instantiate_binding(list->front());
        replacements_[e.get()] = value;
        handle_annotation(e, ty, scope);
        return ty;
      }
      return defer(e, v.name, candidates_from_overloads(*list), applied_args, scope);
    }
    if (opt_.allow_commands && opt_.resolver) {
      if (auto spec = opt_.resolver->resolve(v.name)) {
        return defer(e, v.name, command_candidates(*spec, v.name, applied_args), applied_args,
                     scope, /*command=*/true);
      }
    }
    if (v.name.find('.') != std::string::npos) {
      // path-shaped bare word: a file name argument, not an identifier
      ExprPtr value = constant(host_str(v.name), t_str(), e->span);
      replacements_[e.get()] = with_annotation(value, t_str());
      handle_annotation(e, t_str(), scope);
      return t_str();
    }
    throw InferError(InferError::Kind::Unbound,
                     "unbound identifier '" + v.name + "' (no binding, no such command)", e->span);
  }

  ExprPtr defer(const ExprPtr& e, const std::string& name, std::vector<OverloadCandidate> cands,
                std::size_t applied_args, const TypeEnvironment& scope, bool command = false) {
    int tau = env_.fresh_placeholder_id();
    deferred_.push_back(
        Deferred{e.get(), tau, applied_args, std::move(cands), name, e->span, command});
    ExprPtr ty = placeholder(tau);
    handle_annotation(e, ty, scope);
    return ty;
  }

  const HostFn* arrow_marker(const ExprPtr& h, const TypeEnvironment& scope) {
    const auto* v = as<Variable>(h);
    if (!v) return nullptr;
    const auto* list = scope.lookup(v->name);
    if (!list || detail::is_param_binding(v->name, *list)) return nullptr;
    const auto* marker = detail::special_marker(list);
    return marker && marker->name == "->" ? marker : nullptr;
  }

  ExprPtr infer_apply(const ExprPtr& e, const TypeEnvironment& scope) {
    std::vector<ExprPtr> terms = flatten_spine(e);
    ExprPtr head = terms[0];
    std::span<const ExprPtr> args(terms.data() + 1, terms.size() - 1);

    // `param -> body` builds a lambda before ordinary inference sees it
    if (arrow_marker(head, scope) && args.size() >= 2) {
      const auto* pv = as<Variable>(args[0]);
      if (!pv)
        throw InferError(InferError::Kind::BadTerm,
                         "lambda parameter must be an identifier", args[0]->span);
      ExprPtr lam = lambda(pv->name, args[1], e->span);
      std::vector<ExprPtr> rest;
      rest.push_back(lam);
      rest.insert(rest.end(), args.begin() + 2, args.end());
      ExprPtr new_expr = rest.size() == 1 ? rest[0] : fold_spine(rest, e->span);
      if (e->annotation) new_expr = with_annotation(new_expr, e->annotation);
      const Expression* lam_node = rest.size() == 1 ? new_expr.get() : lam.get();
      if (args[0]->annotation && !is<PlaceholderNode>(args[0]->annotation))
        param_anns_[lam_node] = args[0]->annotation;
      ExprPtr ty = infer_node(new_expr, scope);
      replacements_[e.get()] = new_expr;
      return ty;
    }

    // arguments first, then the function (annotation joins at the end)
    std::vector<ExprPtr> arg_types;
    arg_types.reserve(args.size());
    for (const auto& a : args) arg_types.push_back(infer_node(a, scope));

    ExprPtr head_ty;
    if (const auto* v = as<Variable>(head)) {
      head_ty = infer_variable(head, *v, scope, args.size());
      types_[head.get()] = head_ty;
    } else {
      head_ty = infer_node(head, scope);
    }

    // spine nodes from the inside out, for intermediate annotations
    std::vector<const Expression*> spine_nodes;
    {
      const Expression* cur = e.get();
      while (std::get_if<ApplyNode>(&cur->node)) {
        if (cur != e.get() && cur->grouped) break;
        spine_nodes.push_back(cur);
        cur = std::get_if<ApplyNode>(&cur->node)->fn.get();
      }
      std::reverse(spine_nodes.begin(), spine_nodes.end());
    }

    ExprPtr t = head_ty;
    for (std::size_t i = 0; i < args.size(); ++i) {
      ExprPtr beta = fresh();
      unify(t, arrow(arg_types[i], beta), env_.subst(), args[i]->span);
      t = beta;
      if (i < spine_nodes.size()) types_[spine_nodes[i]] = t;
    }
    handle_annotation(e, t, scope);
    return t;
  }

  // ---- deferred overload resolution ------------------------------------------

  struct Survivor {
    const OverloadCandidate* cand;
    ExprPtr type;
    std::unordered_map<int, int> fresh_map;
    Substitution trial;
  };

  ExprPtr peel(ExprPtr t, std::size_t n, const Substitution& s) const {
    for (std::size_t i = 0; i < n; ++i) {
      auto arr = split_arrow(s.walk(t));
      if (!arr) return nullptr;
      t = arr->second;
    }
    return s.apply(t);
  }

  void resolve_deferred() {
    for (auto& d : deferred_) {
      std::vector<Survivor> survivors;
      for (const auto& cand : d.candidates) {
        std::unordered_map<int, int> fresh_map;
        for (int id : cand.quantified) fresh_map.emplace(id, env_.fresh_placeholder_id());
        ExprPtr ct = detail::freshen(cand.signature, fresh_map);
        Substitution trial = env_.subst();
        try {
          unify(ct, placeholder(d.tau), trial, d.span);
        } catch (const UnifyError&) {
          continue;
        }
        survivors.push_back(Survivor{&cand, ct, std::move(fresh_map), std::move(trial)});
      }
      if (survivors.empty()) {
        std::string msg = "no overload of '" + d.name + "' matches";
        const ExprPtr shape = env_.subst().apply(placeholder(d.tau));
        if (!is<PlaceholderNode>(shape)) msg += " " + display_type(shape);
        msg += "; candidates:";
        for (const auto& c : d.candidates) msg += "\n  " + d.name + " : " + c.display;
        throw InferError(InferError::Kind::NoOverload, msg, d.span);
      }
      const Survivor* winner = nullptr;
      if (survivors.size() == 1) {
        winner = &survivors[0];
      } else if (d.command) {
        // conversion-priority table: most data-preserving wrapper wins
        for (const auto& sv : survivors) {
          if (!winner || sv.cand->priority_class < winner->cand->priority_class ||
              (sv.cand->priority_class == winner->cand->priority_class &&
               sv.cand->registration_index < winner->cand->registration_index))
            winner = &sv;
        }
      } else if (opt_.mode == Mode::Repl) {
        // prefer candidates whose remaining type is a literal, ranked by
        // the priority table; registration order breaks remaining ties
        int best_rank = 1 << 20;
        for (const auto& sv : survivors) {
          ExprPtr remaining = peel(sv.type, d.applied_args, sv.trial);
          auto rank = remaining ? rank_literal(remaining, &sv.trial) : std::nullopt;
          if (!rank) continue;
          int key = *rank;
          if (!winner || key < best_rank ||
              (key == best_rank &&
               sv.cand->registration_index < winner->cand->registration_index)) {
            winner = &sv;
            best_rank = key;
          }
        }
      }
      if (!winner) {
        std::string msg = "ambiguous overloads for '" + d.name + "':";
        for (const auto& sv : survivors) {
          ExprPtr remaining = peel(sv.type, d.applied_args, sv.trial);
          auto rank = remaining ? rank_literal(remaining, &sv.trial) : std::nullopt;
          msg += "\n  " + d.name + " : " + sv.cand->display +
                 (rank ? " (literal rank " + std::to_string(*rank) + ")" : " (not a literal)");
        }
        msg += "\nadd a type annotation to choose one";
        throw InferError(InferError::Kind::Ambiguous, msg, d.span);
      }
      unify(winner->type, placeholder(d.tau), env_.subst(), d.span);
      ExprPtr replacement = winner->cand->materialize(winner->fresh_map);
      if (!replacement->annotation) replacement = with_annotation(replacement, winner->type);
      replacements_[d.node] = replacement;
    }
  }

  // ---- output construction ------------------------------------------------------

  ExprPtr rebuild(const ExprPtr& e) {
    if (!e) return e;
    auto rit = replacements_.find(e.get());
    if (rit != replacements_.end()) {
      ExprPtr r = rit->second;
      if (types_.count(r.get())) return rebuild(r);
      // instantiated clones are fully annotated already; substitute
      // through so no bound placeholders remain
      return apply_subst_deep(r);
    }
    ExprPtr ann;
    auto tit = types_.find(e.get());
    if (tit != types_.end())
      ann = env_.subst().apply(tit->second);
    else if (e->annotation)
      ann = env_.subst().apply(e->annotation);
    if (const auto* a = as<ApplyNode>(e)) {
      return make_expr(ApplyNode{rebuild(a->fn), rebuild(a->arg)}, ann, e->span, e->grouped);
    }
    if (const auto* l = as<LambdaNode>(e)) {
      return make_expr(LambdaNode{l->param, rebuild(l->body)}, ann, e->span, e->grouped);
    }
    if (is<TypeTermNode>(e) || is<TypeCtorNode>(e) || is<KindStarNode>(e)) return e;
    return make_expr(e->node, ann, e->span, e->grouped);
  }

  ExprPtr apply_subst_deep(const ExprPtr& e) {
    if (!e) return e;
    ExprPtr ann = e->annotation ? env_.subst().apply(e->annotation) : nullptr;
    if (const auto* a = as<ApplyNode>(e))
      return make_expr(ApplyNode{apply_subst_deep(a->fn), apply_subst_deep(a->arg)}, ann, e->span,
                       e->grouped);
    if (const auto* l = as<LambdaNode>(e))
      return make_expr(LambdaNode{l->param, apply_subst_deep(l->body)}, ann, e->span, e->grouped);
    if (is<PlaceholderNode>(e)) {
      ExprPtr w = env_.subst().apply(e);
      return w == e ? e : w;
    }
    if (ann == e->annotation) return e;
    return make_expr(e->node, ann, e->span, e->grouped);
  }
};

/// Hindley-Milner inference over a normalized tree. Resolves variables
/// against the environment (with external-command fallback), annotates
/// every node, and returns the principal type.
inline Inference infer(const ExprPtr& normalized, TypeEnvironment& env,
                       const InferOptions& opt = {}) {
  return Inferencer(env, opt).run(normalized);
}

inline std::vector<OverloadCandidate> wrap_command(const CommandSpec& spec,
                                                   const std::string& name,
                                                   const TypeEnvironment& env,
                                                   std::size_t applied_args) {
  std::vector<OverloadCandidate> out;
  auto spec_ptr = std::make_shared<const CommandSpec>(spec);
  int idx = 0;
  auto add = [&](std::size_t argv_n, const Conversion& conv) {
    OverloadCandidate c;
    std::vector<ExprPtr> params(argv_n, t_str());
    ExprPtr input = conv.from;
    params.push_back(input);
    c.signature = chain_arrows(params, t_bytestream());
    c.priority_class = conv.priority;
    c.registration_index = idx++;
    c.display = display_type(c.signature);
    bool identity = equal(conv.from, t_bytestream()) && equal(conv.to, t_bytestream());
    std::string conv_name = identity ? "" : conv.name;
    c.materialize = [spec_ptr, name, argv_n, conv_name,
                     input](const std::unordered_map<int, int>&) {
      return make_expr(
          CommandTermNode{spec_ptr, name, static_cast<int>(argv_n), input, conv_name});
    };
    out.push_back(std::move(c));
  };
  static const Conversion raw{"", t_bytestream(), t_bytestream(), 1, {}};
  const auto& convs = env.conversions();
  for (std::size_t j = 0; j <= applied_args; ++j) {
    bool has_identity = false;
    for (const auto& conv : convs) {
      add(j, conv);
      if (equal(conv.from, t_bytestream())) has_identity = true;
    }
    if (!has_identity) add(j, raw);
  }
  return out;
}

inline const OverloadCandidate* Inferencer::resolve_overloads(
    const std::vector<OverloadCandidate>& candidates, std::span<const ExprPtr> arg_types,
    const ExprPtr& expected, Mode mode, TypeEnvironment& env, std::string* ambiguity) {
  // build the observed shape argTypes -> ... -> expected
  ExprPtr shape = expected ? expected : env.fresh_placeholder();
  for (auto it = arg_types.rbegin(); it != arg_types.rend(); ++it) shape = arrow(*it, shape);
  struct Sv {
    const OverloadCandidate* cand;
    ExprPtr type;
    Substitution trial;
  };
  std::vector<Sv> survivors;
  for (const auto& cand : candidates) {
    std::unordered_map<int, int> fresh;
    for (int id : cand.quantified) fresh.emplace(id, env.fresh_placeholder_id());
    ExprPtr ct = detail::freshen(cand.signature, fresh);
    Substitution trial = env.subst();
    try {
      unify(ct, shape, trial);
    } catch (const UnifyError&) {
      continue;
    }
    survivors.push_back(Sv{&cand, ct, std::move(trial)});
  }
  if (survivors.empty()) return nullptr;
  if (survivors.size() == 1) return survivors[0].cand;
  if (mode == Mode::Repl) {
    const Sv* best = nullptr;
    int best_rank = 1 << 20;
    for (const auto& sv : survivors) {
      ExprPtr t = sv.trial.apply(sv.type);
      for (std::size_t i = 0; i < arg_types.size(); ++i) {
        auto arr = split_arrow(t);
        if (!arr) {
          t = nullptr;
          break;
        }
        t = arr->second;
      }
      auto rank = t ? rank_literal(t, &sv.trial) : std::nullopt;
      if (!rank) continue;
      if (!best || *rank < best_rank ||
          (*rank == best_rank && sv.cand->registration_index < best->cand->registration_index)) {
        best = &sv;
        best_rank = *rank;
      }
    }
    if (best) return best->cand;
  }
  if (ambiguity) {
    *ambiguity = "ambiguous candidates:";
    for (const auto& sv : survivors) *ambiguity += "\n  " + sv.cand->display;
  }
  return nullptr;
}

}  // namespace favalon
