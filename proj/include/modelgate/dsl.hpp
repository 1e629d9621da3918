#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "modelgate/expr.hpp"
#include "modelgate/model.hpp"
#include "modelgate/sexpr.hpp"

// Text format for models (.tsm). Grammar summary:
//
//   file      = { form } ;
//   form      = "(" "model" IDENT ")"
//             | "(" "instance" { decl } ")"
//             | "(" "state" { decl } ")"
//             | "(" "params" { pdecl } ")"
//             | "(" ("valid" | "initial" | "final" | "guard") expr ")"
//             | "(" "update" { "(" IDENT expr ")" } ")"
//             | "(" "constrain" expr ")" ;
//   decl      = "(" IDENT "Int" ")" ;
//   pdecl     = "(" IDENT "Int" [ expr expr ] ")" ;
//   expr      = NUMERAL | "-" NUMERAL | "true" | "false" | IDENT
//             | "(" OP expr { expr } ")" ;
//
// Every form except constrain appears at most once.

namespace modelgate {

struct ParseResult {
  std::optional<Model> model;
  std::vector<ParseError> errors;

  bool ok() const { return model.has_value(); }
};

namespace detail {

inline constexpr std::array<std::string_view, 10> dsl_forms = {
    "model", "instance", "state", "params", "valid", "initial", "final", "guard", "update", "constrain"};

inline constexpr std::array<std::string_view, 12> dsl_reserved = {
    "and", "or", "not", "ite", "distinct", "true", "false", "Int", "Bool", "let", "forall", "exists"};

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  if (!alpha(s[0])) return false;
  for (char c : s) {
    if (!alpha(c) && !(c >= '0' && c <= '9')) return false;
  }
  return std::find(dsl_reserved.begin(), dsl_reserved.end(), s) == dsl_reserved.end();
}

inline bool looks_numeric(std::string_view s) {
  if (!s.empty() && s[0] == '-') s.remove_prefix(1);
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

struct ExprOp {
  std::string_view spelling;
  Op op;
};

inline constexpr std::array<ExprOp, 14> dsl_operators = {{
    {"+", Op::add},
    {"-", Op::sub},
    {"*", Op::mul},
    {"=", Op::eq},
    {"distinct", Op::neq},
    {"<", Op::lt},
    {"<=", Op::le},
    {">", Op::gt},
    {">=", Op::ge},
    {"and", Op::logical_and},
    {"or", Op::logical_or},
    {"not", Op::logical_not},
    {"=>", Op::implies},
    {"ite", Op::ite},
}};

enum class SymbolClass { instance, state, param };

class ModelBuilder {
 public:
  explicit ModelBuilder(std::vector<ParseError>& errors) : errors_(errors) {}

  std::optional<Model> build(const std::vector<SExpr>& forms, const SourceSpan& eof) {
    std::map<std::string, const SExpr*, std::less<>> seen;
    std::vector<const SExpr*> constrains;

    for (const auto& form : forms) {
      if (!form.is_list() || form.items.empty() || !form.items[0].is_atom()) {
        error(form.span, "expected a top-level form", expected_forms());
        continue;
      }
      const SExpr& head = form.items[0];
      if (std::find(dsl_forms.begin(), dsl_forms.end(), head.text) == dsl_forms.end()) {
        std::string msg = "unknown form '" + head.text + "'";
        if (auto guess = closest_form(head.text)) msg += "; did you mean '" + std::string(*guess) + "'?";
        error(head.span, msg, expected_forms());
        continue;
      }
      if (head.text == "constrain") {
        constrains.push_back(&form);
        continue;
      }
      auto [it, inserted] = seen.emplace(head.text, &form);
      if (!inserted) {
        error(head.span, "duplicate (" + head.text + " ...) form; first given at line " +
                             std::to_string(it->second->span.line));
      }
    }

    Model model;
    auto get = [&](std::string_view key) -> const SExpr* {
      auto it = seen.find(key);
      return it == seen.end() ? nullptr : it->second;
    };

    if (const SExpr* f = get("model")) read_name(*f, model);
    if (const SExpr* f = get("instance")) read_decls(*f, model.instance_symbols, SymbolClass::instance);
    if (const SExpr* f = get("state")) read_decls(*f, model.state_fields, SymbolClass::state);
    if (const SExpr* f = get("params")) read_params_names(*f, model);

    if (const SExpr* f = get("params")) read_params_ranges(*f, model);
    read_pred(get("valid"), model.valid_pred, false);
    read_pred(get("initial"), model.initial_pred, false);
    read_pred(get("final"), model.final_pred, false);
    read_pred(get("guard"), model.guard, true);
    if (const SExpr* f = get("update")) read_updates(*f, model);
    for (const SExpr* f : constrains) {
      if (f->items.size() != 2) {
        error(f->span, "(constrain EXPR) takes exactly one expression");
        continue;
      }
      context_ = "constrain";
      if (auto e = expr(f->items[1], Sort::boolean, false)) model.constraints.push_back(std::move(*e));
    }

    if (!errors_.empty()) return std::nullopt;

    for (std::string_view required : {"model", "state", "valid", "initial", "final", "guard", "update"}) {
      if (!get(required)) error(eof, "missing (" + std::string(required) + " ...) form", {std::string(required)});
    }
    if (!errors_.empty()) return std::nullopt;

    for (const auto& d : validate_model(model)) {
      error(SourceSpan{}, std::string(to_string(d.category)) + " in " + d.location + ": " + d.message);
    }
    if (!errors_.empty()) return std::nullopt;
    return model;
  }

 private:
  static std::vector<std::string> expected_forms() {
    return std::vector<std::string>(dsl_forms.begin(), dsl_forms.end());
  }

  static std::optional<std::string_view> closest_form(std::string_view word) {
    std::optional<std::string_view> best;
    std::size_t best_d = 3;
    for (auto f : dsl_forms) {
      const auto d = edit_distance(word, f);
      if (d < best_d) {
        best_d = d;
        best = f;
      }
    }
    return best;
  }

  void error(const SourceSpan& span, std::string msg, std::vector<std::string> expected = {}) {
    errors_.push_back(ParseError{span, std::move(msg), std::move(expected)});
  }

  bool identifier_at(const SExpr& e, const char* what) {
    if (!e.is_atom() || !is_identifier(e.text)) {
      error(e.span, std::string("expected ") + what + " name", {"identifier"});
      return false;
    }
    return true;
  }

  void read_name(const SExpr& form, Model& model) {
    if (form.items.size() != 2) {
      error(form.span, "(model NAME) takes exactly one name");
      return;
    }
    if (identifier_at(form.items[1], "model")) model.name = form.items[1].text;
  }

  bool declare(const SExpr& name, SymbolClass cls) {
    if (!identifier_at(name, "symbol")) return false;
    auto [it, inserted] = scope_.emplace(name.text, cls);
    if (!inserted) {
      error(name.span, "'" + name.text + "' is already declared");
      return false;
    }
    return true;
  }

  bool int_sort_at(const SExpr& e) {
    if (!e.is_atom("Int")) {
      error(e.span, "only Int is supported here", {"Int"});
      return false;
    }
    return true;
  }

  void read_decls(const SExpr& form, std::vector<std::string>& into, SymbolClass cls) {
    for (std::size_t i = 1; i < form.items.size(); ++i) {
      const SExpr& d = form.items[i];
      if (!d.is_list() || d.items.size() != 2) {
        error(d.span, "expected (NAME Int)");
        continue;
      }
      if (declare(d.items[0], cls) && int_sort_at(d.items[1])) into.push_back(d.items[0].text);
    }
  }

  void read_params_names(const SExpr& form, Model& model) {
    for (std::size_t i = 1; i < form.items.size(); ++i) {
      const SExpr& d = form.items[i];
      if (!d.is_list() || (d.items.size() != 2 && d.items.size() != 4)) {
        error(d.span, "expected (NAME Int) or (NAME Int LOWER UPPER)");
        continue;
      }
      if (declare(d.items[0], SymbolClass::param) && int_sort_at(d.items[1])) {
        model.param_fields.push_back(ParamField{d.items[0].text, std::nullopt});
      }
    }
  }

  void read_params_ranges(const SExpr& form, Model& model) {
    for (std::size_t i = 1; i < form.items.size(); ++i) {
      const SExpr& d = form.items[i];
      if (!d.is_list() || d.items.size() != 4 || !d.items[0].is_atom()) continue;
      auto field = std::find_if(model.param_fields.begin(), model.param_fields.end(),
                                [&](const ParamField& p) { return p.name == d.items[0].text; });
      if (field == model.param_fields.end()) continue;
      context_ = "the bounds of parameter '" + field->name + "'";
      auto lo = expr(d.items[2], Sort::integer, false);
      auto hi = expr(d.items[3], Sort::integer, false);
      if (lo && hi) field->range = ParamRange{std::move(*lo), std::move(*hi)};
    }
  }

  void read_pred(const SExpr* form, Expr& into, bool params_allowed) {
    if (!form) return;
    if (form->items.size() != 2) {
      error(form->span, "(" + form->items[0].text + " EXPR) takes exactly one expression");
      return;
    }
    context_ = form->items[0].text;
    if (auto e = expr(form->items[1], Sort::boolean, params_allowed)) into = std::move(*e);
  }

  void read_updates(const SExpr& form, Model& model) {
    context_ = "update";
    std::set<std::string> done;
    for (std::size_t i = 1; i < form.items.size(); ++i) {
      const SExpr& u = form.items[i];
      if (!u.is_list() || u.items.size() != 2 || !u.items[0].is_atom()) {
        error(u.span, "expected (FIELD EXPR)");
        continue;
      }
      const SExpr& target = u.items[0];
      auto it = scope_.find(target.text);
      if (it == scope_.end() || it->second != SymbolClass::state) {
        error(target.span, "'" + target.text + "' is not a state field");
        continue;
      }
      if (!done.insert(target.text).second) {
        error(target.span, "state field '" + target.text + "' is updated more than once");
        continue;
      }
      if (auto e = expr(u.items[1], Sort::integer, true)) model.update.push_back({target.text, std::move(*e)});
    }
    for (const auto& f : model.state_fields) {
      if (!done.contains(f)) error(form.items[0].span, "no update for state field '" + f + "'");
    }
  }

  std::optional<Expr> expr(const SExpr& e, Sort want, bool params_allowed) {
    Sort got = Sort::integer;
    auto out = convert(e, params_allowed, got);
    if (out && got != want) {
      error(e.span, "expected " + std::string(to_string(want)) + " expression, found " + std::string(to_string(got)));
      return std::nullopt;
    }
    return out;
  }

  std::optional<Expr> convert(const SExpr& e, bool params_allowed, Sort& sort) {
    if (e.kind == SExpr::Kind::string) {
      error(e.span, "string literals are not expressions");
      return std::nullopt;
    }
    if (e.is_atom()) return convert_atom(e, params_allowed, sort);

    if (e.items.empty()) {
      error(e.span, "empty expression", {"operator"});
      return std::nullopt;
    }
    const SExpr& head = e.items[0];
    auto op_it = std::find_if(dsl_operators.begin(), dsl_operators.end(),
                              [&](const ExprOp& o) { return head.is_atom() && head.text == o.spelling; });
    if (op_it == dsl_operators.end()) {
      std::vector<std::string> expected;
      for (const auto& o : dsl_operators) expected.emplace_back(o.spelling);
      error(head.span, "unknown operator '" + (head.is_atom() ? head.text : to_string(head)) + "'", expected);
      return std::nullopt;
    }
    Op op = op_it->op;
    const std::size_t argc = e.items.size() - 1;
    if (op == Op::sub && argc == 1) op = Op::neg;

    const OpInfo& info = op_info(op);
    if (argc < info.min_arity || (info.max_arity != unbounded_arity && argc > info.max_arity)) {
      error(head.span, "'" + head.text + "' does not take " + std::to_string(argc) + " argument(s)");
      return std::nullopt;
    }

    std::vector<Expr> args;
    std::vector<Sort> sorts;
    bool ok = true;
    for (std::size_t i = 1; i < e.items.size(); ++i) {
      Sort s = Sort::integer;
      auto a = convert(e.items[i], params_allowed, s);
      if (!a) {
        ok = false;
        continue;
      }
      args.push_back(std::move(*a));
      sorts.push_back(s);
    }
    if (!ok) return std::nullopt;

    if (op == Op::ite) {
      if (sorts[0] != Sort::boolean) {
        error(e.items[1].span, "ite condition must be Bool");
        return std::nullopt;
      }
      if (sorts[1] != sorts[2]) {
        error(e.items[3].span, "ite branches must have the same sort");
        return std::nullopt;
      }
      sort = sorts[1];
      return make(op, std::move(args));
    }

    for (std::size_t i = 0; i < sorts.size(); ++i) {
      if (sorts[i] != info.arg_sort) {
        error(e.items[i + 1].span, "'" + head.text + "' expects " + std::string(to_string(info.arg_sort)) +
                                       " operands");
        ok = false;
      }
    }
    if (!ok) return std::nullopt;
    sort = info.result;
    return make(op, std::move(args));
  }

  std::optional<Expr> convert_atom(const SExpr& e, bool params_allowed, Sort& sort) {
    if (e.text == "true" || e.text == "false") {
      sort = Sort::boolean;
      return truth(e.text == "true");
    }
    if (looks_numeric(e.text)) {
      sort = Sort::integer;
      std::int64_t v = 0;
      const char* first = e.text.data();
      const char* last = first + e.text.size();
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last) {
        error(e.span, "integer literal out of range (limit is 2^63-1 in magnitude)");
        return std::nullopt;
      }
      return lit(v);
    }
    if (!is_identifier(e.text)) {
      error(e.span, "unexpected token '" + e.text + "'", {"identifier", "numeral"});
      return std::nullopt;
    }
    auto it = scope_.find(e.text);
    if (it == scope_.end()) {
      error(e.span, "undeclared symbol '" + e.text + "'");
      return std::nullopt;
    }
    if (it->second == SymbolClass::param && !params_allowed) {
      error(e.span, "parameter '" + e.text + "' cannot appear in " + context_);
      return std::nullopt;
    }
    sort = Sort::integer;
    return sym(e.text);
  }

  std::vector<ParseError>& errors_;
  std::map<std::string, SymbolClass, std::less<>> scope_;
  std::string context_ = "this position";
};

inline SourceSpan end_of(std::string_view src) {
  SourceSpan s;
  for (char c : src) {
    if (c == '\n') {
      ++s.line;
      s.column = 1;
    } else if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) {
      ++s.column;
    }
  }
  return s;
}

}  // namespace detail

/// Parses `.tsm` text into a validated model, or returns positioned errors.
inline ParseResult parse_model(std::string_view source) {
  ParseResult result;
  auto forms = read_sexprs(source, result.errors);
  if (!result.errors.empty()) return result;
  if (forms.empty()) {
    result.errors.push_back(ParseError{SourceSpan{1, 1, 1}, "empty model source", {"(model NAME)"}});
    return result;
  }
  detail::ModelBuilder builder(result.errors);
  result.model = builder.build(forms, detail::end_of(source));
  if (!result.errors.empty()) result.model.reset();
  return result;
}

namespace detail {

inline void write_dsl_expr(std::string& out, const Expr& e) {
  switch (e.op) {
    case Op::literal: out += std::to_string(e.value); return;
    case Op::truth: out += e.value ? "true" : "false"; return;
    case Op::symbol: out += e.name; return;
    default: break;
  }
  out += '(';
  out += op_info(e.op).spelling;
  for (const auto& a : e.args) {
    out += ' ';
    write_dsl_expr(out, a);
  }
  out += ')';
}

}  // namespace detail

inline std::string to_dsl(const Expr& e) {
  std::string out;
  detail::write_dsl_expr(out, e);
  return out;
}

/// Writes a model back to `.tsm` text. parse_model of the result yields a
/// model equal to the input.
inline std::string serialize_model(const Model& model) {
  std::string out = "(model " + model.name + ")\n";
  auto decls = [&](const char* form, const std::vector<std::string>& names) {
    if (names.empty()) return;
    out += "(";
    out += form;
    for (const auto& n : names) out += " (" + n + " Int)";
    out += ")\n";
  };
  decls("instance", model.instance_symbols);
  decls("state", model.state_fields);
  if (!model.param_fields.empty()) {
    out += "(params";
    for (const auto& p : model.param_fields) {
      out += " (" + p.name + " Int";
      if (p.range) out += " " + to_dsl(p.range->lower) + " " + to_dsl(p.range->upper);
      out += ")";
    }
    out += ")\n";
  }
  out += "(valid " + to_dsl(model.valid_pred) + ")\n";
  out += "(initial " + to_dsl(model.initial_pred) + ")\n";
  out += "(final " + to_dsl(model.final_pred) + ")\n";
  out += "(guard " + to_dsl(model.guard) + ")\n";
  out += "(update";
  for (const auto& u : model.update) out += "\n  (" + u.field + " " + to_dsl(u.value) + ")";
  out += ")\n";
  for (const auto& c : model.constraints) out += "(constrain " + to_dsl(c) + ")\n";
  return out;
}

/// Parses a standalone expression (used for --constrain flags). Symbols
/// are resolved against the model's instance symbols and state fields.
inline std::optional<Expr> parse_expr(std::string_view text, const Model& model, std::vector<ParseError>& errors) {
  auto forms = read_sexprs(text, errors);
  if (!errors.empty()) return std::nullopt;
  if (forms.size() != 1) {
    errors.push_back(ParseError{SourceSpan{}, "expected exactly one expression", {}});
    return std::nullopt;
  }
  // Route through the model builder with a synthetic scope so the same
  // sort and scope rules apply as inside a (constrain ...) form.
  std::string src = serialize_model(model) + "(constrain " + to_string(forms[0]) + ")\n";
  auto parsed = parse_model(src);
  if (!parsed.ok()) {
    for (auto& e : parsed.errors) {
      e.span = SourceSpan{};
      errors.push_back(std::move(e));
    }
    return std::nullopt;
  }
  return parsed.model->constraints.back();
}

}  // namespace modelgate
