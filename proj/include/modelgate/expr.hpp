#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace modelgate {

enum class Sort : std::uint8_t { integer, boolean };

inline std::string_view to_string(Sort sort) {
  return sort == Sort::integer ? "Int" : "Bool";
}

enum class Op : std::uint8_t {
  literal,
  truth,
  symbol,
  add,
  sub,
  mul,
  neg,
  eq,
  neq,
  lt,
  le,
  gt,
  ge,
  logical_and,
  logical_or,
  logical_not,
  implies,
  ite,
};

// Static signature of an operator. `arg_sort` is unused for ite (mixed) and
// the leaf kinds. A max_arity of 0 means unbounded.
struct OpInfo {
  std::string_view spelling;
  Sort result;
  Sort arg_sort;
  std::size_t min_arity;
  std::size_t max_arity;
};

inline constexpr std::size_t unbounded_arity = 0;

inline const OpInfo& op_info(Op op) {
  static const OpInfo table[] = {
      {"<literal>", Sort::integer, Sort::integer, 0, 0},
      {"<truth>", Sort::boolean, Sort::boolean, 0, 0},
      {"<symbol>", Sort::integer, Sort::integer, 0, 0},
      {"+", Sort::integer, Sort::integer, 2, unbounded_arity},
      {"-", Sort::integer, Sort::integer, 2, unbounded_arity},
      {"*", Sort::integer, Sort::integer, 2, unbounded_arity},
      {"-", Sort::integer, Sort::integer, 1, 1},
      {"=", Sort::boolean, Sort::integer, 2, 2},
      {"distinct", Sort::boolean, Sort::integer, 2, 2},
      {"<", Sort::boolean, Sort::integer, 2, 2},
      {"<=", Sort::boolean, Sort::integer, 2, 2},
      {">", Sort::boolean, Sort::integer, 2, 2},
      {">=", Sort::boolean, Sort::integer, 2, 2},
      {"and", Sort::boolean, Sort::boolean, 1, unbounded_arity},
      {"or", Sort::boolean, Sort::boolean, 1, unbounded_arity},
      {"not", Sort::boolean, Sort::boolean, 1, 1},
      {"=>", Sort::boolean, Sort::boolean, 2, 2},
      {"ite", Sort::integer, Sort::boolean, 3, 3},
  };
  return table[static_cast<std::size_t>(op)];
}

inline bool is_leaf(Op op) {
  return op == Op::literal || op == Op::truth || op == Op::symbol;
}

/// Integer/boolean expression tree over model symbols.
///
/// Leaves carry their payload in `value` (integer literal, or 0/1 for a truth
/// constant) or `name` (symbol reference). Interior nodes keep operands in
/// `args`. Sorts are not stored; they are inferred against a model scope.
struct Expr {
  Op op = Op::truth;
  std::int64_t value = 0;
  std::string name;
  std::vector<Expr> args;

  friend bool operator==(const Expr&, const Expr&) = default;
};

inline Expr lit(std::int64_t v) { return Expr{Op::literal, v, {}, {}}; }
inline Expr truth(bool b) { return Expr{Op::truth, b ? 1 : 0, {}, {}}; }
inline Expr sym(std::string name) { return Expr{Op::symbol, 0, std::move(name), {}}; }
inline Expr make(Op op, std::vector<Expr> args) { return Expr{op, 0, {}, std::move(args)}; }

inline void for_each_symbol(const Expr& e, const std::function<void(const std::string&)>& fn) {
  if (e.op == Op::symbol) {
    fn(e.name);
    return;
  }
  for (const auto& a : e.args) for_each_symbol(a, fn);
}

inline std::set<std::string> symbols_of(const Expr& e) {
  std::set<std::string> out;
  for_each_symbol(e, [&](const std::string& s) { out.insert(s); });
  return out;
}

/// True when some multiplication has two or more non-literal factors.
inline bool is_nonlinear(const Expr& e) {
  if (e.op == Op::mul) {
    std::size_t symbolic = 0;
    for (const auto& a : e.args) {
      if (a.op != Op::literal) ++symbolic;
    }
    if (symbolic > 1) return true;
  }
  for (const auto& a : e.args) {
    if (is_nonlinear(a)) return true;
  }
  return false;
}

/// Renders an expression in SMT-LIB surface syntax. `render_symbol` maps a
/// model symbol to its text in the target context (a prefixed constant, a
/// function argument, an array select, ...). Negative literals are written
/// as `(- n)`, which is the only form SMT-LIB accepts.
inline void write_smt(std::string& out, const Expr& e,
                      const std::function<std::string(const std::string&)>& render_symbol) {
  switch (e.op) {
    case Op::literal:
      if (e.value < 0) {
        // Avoid negating INT64_MIN.
        auto magnitude = static_cast<std::uint64_t>(-(e.value + 1)) + 1;
        out += "(- " + std::to_string(magnitude) + ")";
      } else {
        out += std::to_string(e.value);
      }
      return;
    case Op::truth:
      out += e.value ? "true" : "false";
      return;
    case Op::symbol:
      out += render_symbol(e.name);
      return;
    default:
      break;
  }
  out += '(';
  out += op_info(e.op).spelling;
  for (const auto& a : e.args) {
    out += ' ';
    write_smt(out, a, render_symbol);
  }
  out += ')';
}

inline std::string to_smt(const Expr& e,
                          const std::function<std::string(const std::string&)>& render_symbol) {
  std::string out;
  write_smt(out, e, render_symbol);
  return out;
}

inline std::string to_smt(const Expr& e) {
  return to_smt(e, [](const std::string& s) { return s; });
}

}  // namespace modelgate
