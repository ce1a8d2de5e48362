#pragma once

#include <atomic>
#include <set>
#include <string>
#include <vector>

#include "favalon/environment.hpp"
#include "favalon/process.hpp"
#include "favalon/types.hpp"

namespace favalon {

struct EvalError : FavalonError {
  using FavalonError::FavalonError;
};

/// Shared state for one reduction: conversion table, command execution
/// switch (off = command applications stay as inert plans), cancellation,
/// spawned process bookkeeping, and the recursion guard.
struct EvalContext {
  const TypeEnvironment* env = nullptr;
  bool execute_commands = true;
  bool applicative_order = false;  // reduce arguments first (test oracle)
  std::atomic<bool>* cancel = nullptr;
  int depth_limit = 10000;
  long step_limit = -1;  // >= 0 enables partial reduction
  long steps = 0;
  std::vector<std::shared_ptr<ProcessHandle>> spawned;

  const Conversion* find_conversion(const std::string& name) const {
    if (!env) return nullptr;
    for (const auto& c : env->conversions())
      if (c.name == name) return &c;
    return nullptr;
  }
};

// ---- capture-avoiding substitution -------------------------------------------

inline void free_vars(const ExprPtr& e, std::set<std::string>& out) {
  if (!e) return;
  if (const auto* v = as<Variable>(e)) {
    out.insert(v->name);
    return;
  }
  if (const auto* a = as<ApplyNode>(e)) {
    free_vars(a->fn, out);
    free_vars(a->arg, out);
    return;
  }
  if (const auto* l = as<LambdaNode>(e)) {
    std::set<std::string> inner;
    free_vars(l->body, inner);
    inner.erase(l->param);
    out.insert(inner.begin(), inner.end());
  }
}

/// Replaces free occurrences of `name` in `body` with `value`, renaming
/// inner binders that would capture free names of `value`.
inline ExprPtr substitute(const ExprPtr& body, const std::string& name, const ExprPtr& value) {
  if (const auto* v = as<Variable>(body)) {
    return v->name == name ? value : body;
  }
  if (const auto* a = as<ApplyNode>(body)) {
    ExprPtr f = substitute(a->fn, name, value);
    ExprPtr x = substitute(a->arg, name, value);
    if (f == a->fn && x == a->arg) return body;
    return make_expr(ApplyNode{std::move(f), std::move(x)}, body->annotation, body->span,
                     body->grouped);
  }
  if (const auto* l = as<LambdaNode>(body)) {
    if (l->param == name) return body;  // shadowed
    std::set<std::string> body_free;
    free_vars(l->body, body_free);
    if (!body_free.count(name)) return body;
    std::set<std::string> value_free;
    free_vars(value, value_free);
    std::string param = l->param;
    ExprPtr inner = l->body;
    if (value_free.count(param)) {
      std::string fresh = param;
      do {
        fresh += "'";
      } while (value_free.count(fresh) || body_free.count(fresh));
      inner = substitute(inner, param, variable(fresh, body->span));
      param = fresh;
    }
    return make_expr(LambdaNode{param, substitute(inner, name, value)}, body->annotation,
                     body->span, body->grouped);
  }
  return body;
}

namespace detail {

/// True when reducing `e` may run a process or another observable host
/// effect; such arguments evaluate call-by-value to keep effect order
/// predictable.
inline bool contains_effects(const ExprPtr& e, const EvalContext& ctx) {
  if (!e) return false;
  if (is<CommandTermNode>(e)) return ctx.execute_commands;
  if (const auto* h = as<HostFn>(e)) return h->effectful;
  if (const auto* a = as<ApplyNode>(e))
    return contains_effects(a->fn, ctx) || contains_effects(a->arg, ctx);
  if (const auto* l = as<LambdaNode>(e)) return contains_effects(l->body, ctx);
  return false;
}

inline HostValue expect_value(const ExprPtr& e, const char* what) {
  const auto* c = as<Constant>(e);
  if (!c) throw EvalError(std::string("expected a ") + what + " value", e ? e->span : Span{});
  return c->value;
}

}  // namespace detail

ExprPtr reduce(const ExprPtr& expr, EvalContext& ctx, int depth = 0);

namespace detail {

/// Adapts a reduced stream argument to the raw byte input of a command.
inline std::shared_ptr<ByteChannel> to_byte_channel(const ExprPtr& arg, EvalContext& ctx,
                                                    const std::string& conversion) {
  const auto* c = as<Constant>(arg);
  if (!c) throw EvalError("command input must reduce to a stream value", arg->span);
  HostValue v = c->value;
  if (!conversion.empty()) {
    const Conversion* conv = ctx.find_conversion(conversion);
    if (!conv) throw EvalError("conversion '" + conversion + "' is not registered", arg->span);
    v = conv->impl(ctx, v);
  }
  if (const auto* in = v.get_if<ByteIn>()) {
    if (in->chan->consumed) throw EvalError("byte stream already consumed", arg->span);
    in->chan->consumed = true;
    return in->chan;
  }
  if (const auto* out = v.get_if<ByteOut>()) {
    if (out->chan->consumed) throw EvalError("byte stream already consumed", arg->span);
    out->chan->consumed = true;
    return out->chan;
  }
  throw EvalError(std::string("no conversion from ") + host_type_name(v) + " to ByteStream",
                  arg->span);
}

inline ExprPtr run_command(const CommandTermNode& cmd, std::span<const ExprPtr> args,
                           EvalContext& ctx, Span span) {
  std::vector<std::string> argv;
  for (int i = 0; i < cmd.argv_params; ++i) {
    HostValue v = expect_value(args[i], "string argument");
    const auto* s = v.get_if<std::string>();
    if (!s) throw EvalError("command arguments must be strings", args[i]->span);
    argv.push_back(*s);
  }
  auto input = to_byte_channel(args[cmd.argv_params], ctx, cmd.conversion);

  PipelineStage stage{*cmd.spec, argv};
  PipelineRun run;
  if (input->raw_fd >= 0) {
    // a live pipe feeds the child directly, no copying
    Fd reader;
    auto handle = spawn_one(stage.spec, stage.argv, input->raw_fd, nullptr, &reader, 0);
    if (input->on_close) input->on_close();  // child owns its dup now
    input->on_close = {};
    input->raw_fd = -1;
    input->read = {};
    run.output = channel_from_process(handle, std::move(reader), ctx.cancel);
    auto keep = std::make_shared<std::pair<std::shared_ptr<ProcessHandle>, std::shared_ptr<void>>>(
        handle, input->producer);
    run.output->producer = keep;
    run.handles.push_back(handle);
  } else {
    auto source = input->read;
    run = spawn_pipeline({stage}, [input, source](char* buf, std::size_t cap) {
      return source ? source(buf, cap) : 0;
    }, ctx.cancel);
  }
  for (auto& h : run.handles) ctx.spawned.push_back(h);
  return constant(HostValue{ByteOut{run.output}}, t_bytestream(), span);
}

}  // namespace detail

/// Normal-order β-reduction to a value form; host and command applications
/// evaluate call-by-value. A non-negative step limit stops early and
/// returns the partially reduced tree.
inline ExprPtr reduce(const ExprPtr& expr, EvalContext& ctx, int depth) {
  if (depth > ctx.depth_limit)
    throw EvalError("reduction depth limit exceeded", expr ? expr->span : Span{});
  if (ctx.cancel && ctx.cancel->load()) throw EvalError("evaluation cancelled", {});
  if (!expr) return expr;

  const auto* app = as<ApplyNode>(expr);
  if (!app) return expr;  // constants, lambdas, terms are value forms

  if (ctx.step_limit >= 0 && ctx.steps >= ctx.step_limit) return expr;

  std::vector<ExprPtr> terms = flatten_spine(expr);
  ExprPtr head = reduce(terms[0], ctx, depth + 1);
  std::vector<ExprPtr> args(terms.begin() + 1, terms.end());

  std::size_t i = 0;
  for (;;) {
    if (ctx.cancel && ctx.cancel->load()) throw EvalError("evaluation cancelled", {});
    if (ctx.step_limit >= 0 && ctx.steps >= ctx.step_limit) break;
    if (i >= args.size()) break;

    if (const auto* lam = as<LambdaNode>(head)) {
      ++ctx.steps;
      ExprPtr arg = args[i];
      if (ctx.applicative_order || detail::contains_effects(arg, ctx))
        arg = reduce(arg, ctx, depth + 1);
      head = reduce(substitute(lam->body, lam->param, arg), ctx, depth + 1);
      ++i;
      continue;
    }
    if (const auto* host = as<HostFn>(head)) {
      std::size_t need = host->params.size();
      if (args.size() - i < need) break;  // partial application is a value
      ++ctx.steps;
      std::vector<ExprPtr> call(args.begin() + i, args.begin() + i + need);
      if (!host->special_form)
        for (auto& a : call) a = reduce(a, ctx, depth + 1);
      ExprPtr result = host->impl(ctx, call);
      head = reduce(result, ctx, depth + 1);
      i += need;
      continue;
    }
    if (const auto* cmd = as<CommandTermNode>(head)) {
      std::size_t need = static_cast<std::size_t>(cmd->argv_params) + 1;
      if (args.size() - i < need) break;
      if (!ctx.execute_commands) break;  // keep the plan inert
      ++ctx.steps;
      std::vector<ExprPtr> call(args.begin() + i, args.begin() + i + need);
      for (auto& a : call) a = reduce(a, ctx, depth + 1);
      head = detail::run_command(*cmd, call, ctx, expr->span);
      i += need;
      continue;
    }
    if (is<TypeCtorNode>(head) || is<TypeTermNode>(head)) {
      // type-level application: List Str and friends are value forms
      break;
    }
    if (is<Constant>(head))
      throw EvalError("value is not a function", head->span);
    break;  // stuck (free variable under an open term)
  }

  if (i == args.size()) return head;
  std::vector<ExprPtr> rest;
  rest.push_back(head);
  rest.insert(rest.end(), args.begin() + i, args.end());
  ExprPtr leftover = fold_spine(rest, expr->span);
  // the leftover application keeps the type of the whole expression
  if (expr->annotation && !leftover->annotation)
    leftover = with_annotation(leftover, expr->annotation);
  return leftover;
}

/// Step-limited variant exposing partial reduction.
inline ExprPtr reduce_steps(const ExprPtr& expr, EvalContext& ctx, long max_steps) {
  ctx.step_limit = max_steps;
  ctx.steps = 0;
  return reduce(expr, ctx, 0);
}

}  // namespace favalon
