#pragma once

#include <functional>
#include <string>
#include <vector>

#include "favalon/environment.hpp"
#include "favalon/expr.hpp"

namespace favalon {

struct RewriteError : FavalonError {
  using FavalonError::FavalonError;
};

/// Optional hook letting the rewriter treat resolvable external command
/// names as application heads (the shell wires this to command lookup).
using CommandProbe = std::function<bool(const std::string&)>;

namespace detail {

/// Operator role of a spine term. Only plain (non-grouped, not already
/// placed) variables bound with INFIX attributes participate in rewriting.
inline std::optional<Assoc> operator_role(const ExprPtr& term, const TypeEnvironment& env) {
  if (term->grouped) return std::nullopt;
  const auto* v = as<Variable>(term);
  if (!v) return std::nullopt;
  auto attrs = env.attributes(v->name);
  if (!attrs || attrs->fixity != Fixity::Infix) return std::nullopt;
  return attrs->assoc;
}

inline ExprPtr placed(const ExprPtr& op) { return with_grouped(op); }

inline ExprPtr fold_terms(const std::vector<ExprPtr>& terms) {
  ExprPtr acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = apply(acc, terms[i]);
  return acc;
}

/// True when `head` can start a typable application, making the whole
/// accumulated application one operand. A bare variable that resolves to
/// nothing heads an untypable line, which keeps the purely mechanical
/// sibling-swap shape of the transformation figures.
inline bool is_unit_head(const ExprPtr& head, const TypeEnvironment& env,
                         const CommandProbe& probe) {
  const auto* v = as<Variable>(head);
  if (!v || head->grouped) return true;
  if (env.lookup(v->name)) return true;
  return probe && probe(v->name);
}

inline ExprPtr rewrite_spine(std::vector<ExprPtr> terms, const TypeEnvironment& env,
                             const CommandProbe& probe, bool do_ltr, bool do_rtl) {
  if (terms.size() == 1) return terms[0];

  std::size_t first_op = 0;
  std::optional<Assoc> first_role;
  for (std::size_t i = 1; i < terms.size(); ++i) {
    if (auto role = operator_role(terms[i], env)) {
      first_op = i;
      first_role = role;
      break;
    }
  }
  if (!first_role) return fold_terms(terms);

  if (*first_role == Assoc::Rtl) {
    if (!do_rtl) return fold_terms(terms);
    std::size_t i = first_op;
    const auto* v = as<Variable>(terms[i]);
    std::vector<ExprPtr> rest(terms.begin() + i + 1, terms.end());
    if (rest.empty())
      throw RewriteError("right-associative operator '" + v->name + "' has no right operand",
                         terms[i]->span);
    ExprPtr rest_expr =
        rest.size() == 1 ? rest[0] : rewrite_spine(std::move(rest), env, probe, do_ltr, do_rtl);
    std::vector<ExprPtr> out;
    if (i > 1 && is_unit_head(terms[0], env, probe)) {
      // the whole left application becomes the operand
      std::vector<ExprPtr> left(terms.begin(), terms.begin() + i);
      out.push_back(placed(terms[i]));
      out.push_back(fold_terms(left));
    } else {
      // sibling swap; any leading terms stay applied in front
      out.assign(terms.begin(), terms.begin() + (i - 1));
      out.push_back(placed(terms[i]));
      out.push_back(terms[i - 1]);
    }
    out.push_back(std::move(rest_expr));
    return fold_terms(out);
  }

  if (!do_ltr) return fold_terms(terms);

  // Left-to-right scan. A placed operator holds its left operand and
  // accumulates the application segment to its right; the next operator
  // (or the end of the spine) closes that segment into one argument.
  struct Pending {
    ExprPtr op;
    ExprPtr left;
    std::vector<ExprPtr> right;
  };
  std::optional<Pending> pending;
  std::vector<ExprPtr> acc;

  auto close_pending = [&](Span at) {
    if (pending->right.empty())
      throw RewriteError("infix operator '" + as<Variable>(pending->op)->name +
                             "' has no right operand",
                         at);
    ExprPtr segment = fold_terms(pending->right);
    ExprPtr unit = apply(apply(pending->op, pending->left), segment);
    pending.reset();
    return unit;
  };

  for (std::size_t i = 0; i < terms.size(); ++i) {
    std::optional<Assoc> role = i == 0 ? std::optional<Assoc>{} : operator_role(terms[i], env);
    if (!role) {
      if (pending)
        pending->right.push_back(terms[i]);
      else
        acc.push_back(terms[i]);
      continue;
    }
    if (*role == Assoc::Rtl)
      throw RewriteError(
          "mix of left- and right-associative operators in one expression; parenthesize",
          terms[i]->span);
    if (pending) {
      ExprPtr unit = close_pending(terms[i]->span);
      pending = Pending{placed(terms[i]), std::move(unit), {}};
      continue;
    }
    if (acc.empty())
      throw RewriteError(
          "infix operator '" + as<Variable>(terms[i])->name + "' has no left operand",
          terms[i]->span);
    if (acc.size() == 1 || is_unit_head(acc[0], env, probe)) {
      ExprPtr left = fold_terms(acc);
      acc.clear();
      pending = Pending{placed(terms[i]), std::move(left), {}};
      continue;
    }
    // untypable head: keep the mechanical shape, swapping with the
    // immediate left sibling only
    ExprPtr last = acc.back();
    acc.back() = placed(terms[i]);
    acc.push_back(std::move(last));
  }
  if (pending) return close_pending(terms.back()->span);  // acc is empty here
  return fold_terms(acc);
}

/// True when the selected pass would restructure this spine: the first
/// argument-position operator's associativity matches an enabled pass.
inline bool pass_transforms(const std::vector<ExprPtr>& terms, const TypeEnvironment& env,
                            bool do_ltr, bool do_rtl) {
  for (std::size_t i = 1; i < terms.size(); ++i) {
    if (auto role = operator_role(terms[i], env))
      return *role == Assoc::Rtl ? do_rtl : do_ltr;
  }
  return false;
}

inline ExprPtr rewrite_expr(const ExprPtr& e, const TypeEnvironment& env,
                            const CommandProbe& probe, bool do_ltr, bool do_rtl) {
  ExprPtr ann = e->annotation ? rewrite_expr(e->annotation, env, probe, do_ltr, do_rtl) : nullptr;

  if (!as<ApplyNode>(e)) {
    if (const auto* l = as<LambdaNode>(e)) {
      ExprPtr body = rewrite_expr(l->body, env, probe, do_ltr, do_rtl);
      if (body == l->body && ann == e->annotation) return e;
      return make_expr(LambdaNode{l->param, std::move(body)}, ann, e->span, e->grouped);
    }
    if (ann == e->annotation) return e;
    return make_expr(e->node, ann, e->span, e->grouped);
  }

  std::vector<ExprPtr> terms = flatten_spine(e);
  bool changed = false;
  for (auto& t : terms) {
    ExprPtr r = rewrite_expr(t, env, probe, do_ltr, do_rtl);
    if (r != t) {
      t = std::move(r);
      changed = true;
    }
  }
  if (!changed && ann == e->annotation && !pass_transforms(terms, env, do_ltr, do_rtl)) return e;

  ExprPtr result = rewrite_spine(std::move(terms), env, probe, do_ltr, do_rtl);
  if (ann) result = with_annotation(result, ann);
  if (e->grouped && !result->grouped) result = with_grouped(result);
  return result;
}

}  // namespace detail

/// Converts argument-position INFIX/LTR operators to prefix form.
inline ExprPtr infix_to_prefix(const ExprPtr& e, const TypeEnvironment& env,
                               const CommandProbe& probe = {}) {
  return detail::rewrite_expr(e, env, probe, /*do_ltr=*/true, /*do_rtl=*/false);
}

/// Re-associates INFIX/RTL operators: the operator swaps ahead of its left
/// operand and everything to its right becomes its argument.
inline ExprPtr rotate_right(const ExprPtr& e, const TypeEnvironment& env,
                            const CommandProbe& probe = {}) {
  return detail::rewrite_expr(e, env, probe, /*do_ltr=*/false, /*do_rtl=*/true);
}

/// Full attribute-driven rewrite, bottom-up; idempotent.
inline ExprPtr normalize(const ExprPtr& e, const TypeEnvironment& env,
                         const CommandProbe& probe = {}) {
  return detail::rewrite_expr(e, env, probe, /*do_ltr=*/true, /*do_rtl=*/true);
}

}  // namespace favalon
