#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "modelgate/expr.hpp"

namespace modelgate {

/// Inclusive bounds of a transition parameter, evaluated against the
/// pre-state and instance. Bounds are part of transition applicability.
struct ParamRange {
  Expr lower;
  Expr upper;

  friend bool operator==(const ParamRange&, const ParamRange&) = default;
};

struct ParamField {
  std::string name;
  std::optional<ParamRange> range;

  friend bool operator==(const ParamField&, const ParamField&) = default;
};

struct Update {
  std::string field;
  Expr value;

  friend bool operator==(const Update&, const Update&) = default;
};

/// A guarded, parameterized transition system over integer state fields.
struct Model {
  std::string name;
  std::vector<std::string> instance_symbols;
  std::vector<std::string> state_fields;
  std::vector<ParamField> param_fields;
  Expr valid_pred = truth(true);
  Expr initial_pred = truth(true);
  Expr final_pred = truth(true);
  Expr guard = truth(true);
  std::vector<Update> update;
  std::vector<Expr> constraints;

  friend bool operator==(const Model&, const Model&) = default;

  std::vector<std::string> param_names() const {
    std::vector<std::string> out;
    out.reserve(param_fields.size());
    for (const auto& p : param_fields) out.push_back(p.name);
    return out;
  }

  std::optional<std::size_t> state_index(std::string_view field) const {
    auto it = std::find(state_fields.begin(), state_fields.end(), field);
    if (it == state_fields.end()) return std::nullopt;
    return static_cast<std::size_t>(it - state_fields.begin());
  }

  const Expr* update_for(std::string_view field) const {
    for (const auto& u : update) {
      if (u.field == field) return &u.value;
    }
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Validation

struct Diagnostic {
  enum class Category { unknown_symbol, sort_error, missing_update, duplicate_name };

  Category category;
  std::string location;
  std::string message;
};

inline std::string_view to_string(Diagnostic::Category c) {
  switch (c) {
    case Diagnostic::Category::unknown_symbol: return "unknown-symbol";
    case Diagnostic::Category::sort_error: return "sort-error";
    case Diagnostic::Category::missing_update: return "missing-update";
    case Diagnostic::Category::duplicate_name: return "duplicate-name";
  }
  return "?";
}

namespace detail {

using Scope = std::set<std::string, std::less<>>;

inline std::optional<Sort> infer_sort(const Expr& e, const Scope& scope, std::vector<Diagnostic>& diags,
                                      const std::string& location) {
  using Cat = Diagnostic::Category;
  switch (e.op) {
    case Op::literal: return Sort::integer;
    case Op::truth: return Sort::boolean;
    case Op::symbol:
      if (!scope.contains(e.name)) {
        diags.push_back({Cat::unknown_symbol, location, "symbol '" + e.name + "' is not in scope"});
      }
      return Sort::integer;
    default: break;
  }

  const OpInfo& info = op_info(e.op);
  const auto n = e.args.size();
  if (n < info.min_arity || (info.max_arity != unbounded_arity && n > info.max_arity)) {
    diags.push_back({Cat::sort_error, location,
                     "'" + std::string(info.spelling) + "' applied to " + std::to_string(n) + " argument(s)"});
    return std::nullopt;
  }

  if (e.op == Op::ite) {
    auto c = infer_sort(e.args[0], scope, diags, location);
    auto a = infer_sort(e.args[1], scope, diags, location);
    auto b = infer_sort(e.args[2], scope, diags, location);
    if (c && *c != Sort::boolean) {
      diags.push_back({Cat::sort_error, location, "ite condition must be Bool"});
    }
    if (a && b && *a != *b) {
      diags.push_back({Cat::sort_error, location, "ite branches have different sorts"});
      return std::nullopt;
    }
    return a ? a : b;
  }

  bool ok = true;
  for (const auto& arg : e.args) {
    auto s = infer_sort(arg, scope, diags, location);
    if (s && *s != info.arg_sort) {
      diags.push_back({Cat::sort_error, location,
                       "'" + std::string(info.spelling) + "' expects " + std::string(to_string(info.arg_sort)) +
                           " operands"});
      ok = false;
    }
  }
  if (!ok) return std::nullopt;
  return info.result;
}

inline void expect_sort(const Expr& e, Sort want, const Scope& scope, std::vector<Diagnostic>& diags,
                        const std::string& location) {
  auto s = infer_sort(e, scope, diags, location);
  if (s && *s != want) {
    diags.push_back({Diagnostic::Category::sort_error, location,
                     "expected " + std::string(to_string(want)) + ", found " + std::string(to_string(*s))});
  }
}

}  // namespace detail

/// Checks the structural invariants of a model. An empty result means the
/// model is well-formed.
inline std::vector<Diagnostic> validate_model(const Model& model) {
  using Cat = Diagnostic::Category;
  std::vector<Diagnostic> diags;

  detail::Scope instance, state, params;
  detail::Scope all_names;
  auto declare = [&](detail::Scope& into, const std::string& name, const char* kind) {
    if (!all_names.insert(name).second) {
      diags.push_back({Cat::duplicate_name, kind, "name '" + name + "' is declared more than once"});
    }
    into.insert(name);
  };
  for (const auto& n : model.instance_symbols) declare(instance, n, "instance");
  for (const auto& n : model.state_fields) declare(state, n, "state");
  for (const auto& p : model.param_fields) declare(params, p.name, "params");

  detail::Scope state_scope = state;
  state_scope.insert(instance.begin(), instance.end());
  detail::Scope step_scope = state_scope;
  step_scope.insert(params.begin(), params.end());

  detail::expect_sort(model.valid_pred, Sort::boolean, state_scope, diags, "valid");
  detail::expect_sort(model.initial_pred, Sort::boolean, state_scope, diags, "initial");
  detail::expect_sort(model.final_pred, Sort::boolean, state_scope, diags, "final");
  detail::expect_sort(model.guard, Sort::boolean, step_scope, diags, "guard");

  for (const auto& p : model.param_fields) {
    if (!p.range) continue;
    detail::expect_sort(p.range->lower, Sort::integer, state_scope, diags, "params[" + p.name + "]");
    detail::expect_sort(p.range->upper, Sort::integer, state_scope, diags, "params[" + p.name + "]");
  }

  std::set<std::string> updated;
  for (const auto& u : model.update) {
    const std::string loc = "update[" + u.field + "]";
    if (!state.contains(u.field)) {
      diags.push_back({Cat::unknown_symbol, loc, "update target '" + u.field + "' is not a state field"});
    } else if (!updated.insert(u.field).second) {
      diags.push_back({Cat::duplicate_name, loc, "state field '" + u.field + "' is updated more than once"});
    }
    detail::expect_sort(u.value, Sort::integer, step_scope, diags, loc);
  }
  for (const auto& f : model.state_fields) {
    if (!updated.contains(f)) {
      diags.push_back({Cat::missing_update, "update", "no update for state field '" + f + "'"});
    }
  }

  for (std::size_t i = 0; i < model.constraints.size(); ++i) {
    detail::expect_sort(model.constraints[i], Sort::boolean, state_scope, diags,
                        "constrain#" + std::to_string(i + 1));
  }
  return diags;
}

// ---------------------------------------------------------------------------
// Concrete evaluation

using ConcreteBinding = std::map<std::string, std::int64_t, std::less<>>;

/// Values of a model's state fields, in declaration order.
struct ConcreteState {
  std::vector<std::int64_t> values;

  friend auto operator<=>(const ConcreteState&, const ConcreteState&) = default;
};

inline std::string format_state(const ConcreteState& s) {
  std::string out = "<";
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(s.values[i]);
  }
  return out + ">";
}

class EvalError : public std::runtime_error {
 public:
  enum class Kind { unbound_symbol, sort_mismatch, overflow };

  EvalError(Kind kind, std::string detail)
      : std::runtime_error(describe(kind, detail)), kind_(kind), detail_(std::move(detail)) {}

  Kind kind() const noexcept { return kind_; }
  /// The offending symbol for unbound_symbol, otherwise the operator.
  const std::string& detail() const noexcept { return detail_; }

 private:
  static std::string describe(Kind kind, const std::string& detail) {
    switch (kind) {
      case Kind::unbound_symbol: return "unbound symbol '" + detail + "'";
      case Kind::sort_mismatch: return "sort mismatch in '" + detail + "'";
      case Kind::overflow: return "integer overflow in '" + detail + "'";
    }
    return detail;
  }

  Kind kind_;
  std::string detail_;
};

using Value = std::variant<std::int64_t, bool>;

namespace detail {

inline std::int64_t checked(Op op, std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  bool overflow = false;
  switch (op) {
    case Op::add: overflow = __builtin_add_overflow(a, b, &r); break;
    case Op::sub: overflow = __builtin_sub_overflow(a, b, &r); break;
    case Op::mul: overflow = __builtin_mul_overflow(a, b, &r); break;
    default: break;
  }
  if (overflow) throw EvalError(EvalError::Kind::overflow, std::string(op_info(op).spelling));
  return r;
}

inline std::int64_t checked_neg(std::int64_t a) {
  if (a == std::numeric_limits<std::int64_t>::min()) throw EvalError(EvalError::Kind::overflow, "-");
  return -a;
}

inline std::int64_t as_int(const Value& v, Op op) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  throw EvalError(EvalError::Kind::sort_mismatch, std::string(op_info(op).spelling));
}

inline bool as_bool(const Value& v, Op op) {
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  throw EvalError(EvalError::Kind::sort_mismatch, std::string(op_info(op).spelling));
}

inline bool compare(Op op, std::int64_t a, std::int64_t b) {
  switch (op) {
    case Op::eq: return a == b;
    case Op::neq: return a != b;
    case Op::lt: return a < b;
    case Op::le: return a <= b;
    case Op::gt: return a > b;
    case Op::ge: return a >= b;
    default: return false;
  }
}

}  // namespace detail

/// Evaluates an expression under a concrete binding. All operands are
/// evaluated (no short-circuit) so a missing symbol is always reported.
inline Value eval_expr(const Expr& e, const ConcreteBinding& binding) {
  switch (e.op) {
    case Op::literal: return e.value;
    case Op::truth: return e.value != 0;
    case Op::symbol: {
      auto it = binding.find(e.name);
      if (it == binding.end()) throw EvalError(EvalError::Kind::unbound_symbol, e.name);
      return it->second;
    }
    default: break;
  }

  std::vector<Value> vals;
  vals.reserve(e.args.size());
  for (const auto& a : e.args) vals.push_back(eval_expr(a, binding));
  if (vals.empty()) throw EvalError(EvalError::Kind::sort_mismatch, std::string(op_info(e.op).spelling));

  switch (e.op) {
    case Op::add:
    case Op::sub:
    case Op::mul: {
      std::int64_t acc = detail::as_int(vals[0], e.op);
      for (std::size_t i = 1; i < vals.size(); ++i) acc = detail::checked(e.op, acc, detail::as_int(vals[i], e.op));
      return acc;
    }
    case Op::neg: return detail::checked_neg(detail::as_int(vals[0], e.op));
    case Op::eq:
    case Op::neq:
    case Op::lt:
    case Op::le:
    case Op::gt:
    case Op::ge:
      if (vals.size() != 2) throw EvalError(EvalError::Kind::sort_mismatch, std::string(op_info(e.op).spelling));
      return detail::compare(e.op, detail::as_int(vals[0], e.op), detail::as_int(vals[1], e.op));
    case Op::logical_and: {
      bool r = true;
      for (const auto& v : vals) r = detail::as_bool(v, e.op) && r;
      return r;
    }
    case Op::logical_or: {
      bool r = false;
      for (const auto& v : vals) r = detail::as_bool(v, e.op) || r;
      return r;
    }
    case Op::logical_not: return !detail::as_bool(vals[0], e.op);
    case Op::implies:
      return !detail::as_bool(vals[0], e.op) || detail::as_bool(vals.at(1), e.op);
    case Op::ite: {
      if (vals.size() != 3 || vals[1].index() != vals[2].index()) {
        throw EvalError(EvalError::Kind::sort_mismatch, "ite");
      }
      return detail::as_bool(vals[0], e.op) ? vals[1] : vals[2];
    }
    default: throw EvalError(EvalError::Kind::sort_mismatch, std::string(op_info(e.op).spelling));
  }
}

inline bool eval_bool(const Expr& e, const ConcreteBinding& b) { return detail::as_bool(eval_expr(e, b), e.op); }
inline std::int64_t eval_int(const Expr& e, const ConcreteBinding& b) { return detail::as_int(eval_expr(e, b), e.op); }

/// Merges a state with optional parameter and instance bindings.
inline ConcreteBinding bind_state(const Model& model, const ConcreteState& state, const ConcreteBinding& params = {},
                                  const ConcreteBinding& instance = {}) {
  ConcreteBinding out = instance;
  for (const auto& [k, v] : params) out[k] = v;
  for (std::size_t i = 0; i < model.state_fields.size() && i < state.values.size(); ++i) {
    out[model.state_fields[i]] = state.values[i];
  }
  return out;
}

/// Guard plus declared parameter ranges.
inline bool transition_enabled(const Model& model, const ConcreteBinding& step_binding) {
  bool ok = eval_bool(model.guard, step_binding);
  for (const auto& p : model.param_fields) {
    if (!p.range) continue;
    auto it = step_binding.find(p.name);
    if (it == step_binding.end()) throw EvalError(EvalError::Kind::unbound_symbol, p.name);
    ok = ok && eval_int(p.range->lower, step_binding) <= it->second &&
         it->second <= eval_int(p.range->upper, step_binding);
  }
  return ok;
}

/// Applies the transition with simultaneous assignment: every update is
/// evaluated against the pre-state. Returns nullopt when the guard (or a
/// parameter range) does not hold. The post-state is not checked for
/// validity.
inline std::optional<ConcreteState> apply_transition(const Model& model, const ConcreteState& state,
                                                     const ConcreteBinding& params, const ConcreteBinding& instance) {
  const ConcreteBinding binding = bind_state(model, state, params, instance);
  if (!transition_enabled(model, binding)) return std::nullopt;

  ConcreteState next;
  next.values.reserve(model.state_fields.size());
  for (const auto& field : model.state_fields) {
    const Expr* rhs = model.update_for(field);
    if (!rhs) throw EvalError(EvalError::Kind::unbound_symbol, "update of " + field);
    next.values.push_back(eval_int(*rhs, binding));
  }
  return next;
}

// ---------------------------------------------------------------------------
// Compiled evaluation for hot loops (the oracle). Symbols are resolved to
// slot indices once; evaluation runs a postfix program over a value stack.
// Booleans are carried as 0/1.

class SlotLayout {
 public:
  SlotLayout() = default;

  explicit SlotLayout(const Model& model) {
    for (const auto& f : model.state_fields) add(f);
    for (const auto& p : model.param_fields) add(p.name);
    for (const auto& i : model.instance_symbols) add(i);
  }

  std::size_t add(const std::string& name) {
    auto [it, inserted] = index_.emplace(name, index_.size());
    return it->second;
  }

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return index_.size(); }

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

class CompiledExpr {
 public:
  CompiledExpr() = default;

  static CompiledExpr compile(const Expr& e, const SlotLayout& layout) {
    CompiledExpr c;
    c.emit(e, layout);
    return c;
  }

  std::int64_t run(std::span<const std::int64_t> slots) const {
    thread_local std::vector<std::int64_t> stack;
    stack.clear();
    for (const auto& ins : code_) {
      switch (ins.op) {
        case Op::literal:
        case Op::truth: stack.push_back(ins.operand); break;
        case Op::symbol: stack.push_back(slots[static_cast<std::size_t>(ins.operand)]); break;
        default: {
          const std::size_t n = ins.arity;
          const std::size_t base = stack.size() - n;
          const std::int64_t result = apply(ins.op, std::span<const std::int64_t>(stack.data() + base, n));
          stack.resize(base);
          stack.push_back(result);
        }
      }
    }
    return stack.back();
  }

 private:
  struct Instr {
    Op op;
    std::uint32_t arity;
    std::int64_t operand;
  };

  void emit(const Expr& e, const SlotLayout& layout) {
    if (e.op == Op::symbol) {
      auto slot = layout.find(e.name);
      if (!slot) throw EvalError(EvalError::Kind::unbound_symbol, e.name);
      code_.push_back({Op::symbol, 0, static_cast<std::int64_t>(*slot)});
      return;
    }
    if (is_leaf(e.op)) {
      code_.push_back({e.op, 0, e.value});
      return;
    }
    for (const auto& a : e.args) emit(a, layout);
    code_.push_back({e.op, static_cast<std::uint32_t>(e.args.size()), 0});
  }

  static std::int64_t apply(Op op, std::span<const std::int64_t> v) {
    switch (op) {
      case Op::add:
      case Op::sub:
      case Op::mul: {
        std::int64_t acc = v[0];
        for (std::size_t i = 1; i < v.size(); ++i) acc = detail::checked(op, acc, v[i]);
        return acc;
      }
      case Op::neg: return detail::checked_neg(v[0]);
      case Op::eq:
      case Op::neq:
      case Op::lt:
      case Op::le:
      case Op::gt:
      case Op::ge: return detail::compare(op, v[0], v[1]) ? 1 : 0;
      case Op::logical_and: return std::all_of(v.begin(), v.end(), [](auto x) { return x != 0; }) ? 1 : 0;
      case Op::logical_or: return std::any_of(v.begin(), v.end(), [](auto x) { return x != 0; }) ? 1 : 0;
      case Op::logical_not: return v[0] ? 0 : 1;
      case Op::implies: return (!v[0] || v[1]) ? 1 : 0;
      case Op::ite: return v[0] ? v[1] : v[2];
      default: return 0;
    }
  }

  std::vector<Instr> code_;
};

}  // namespace modelgate
