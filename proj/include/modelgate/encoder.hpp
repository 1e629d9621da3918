#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "modelgate/expr.hpp"
#include "modelgate/model.hpp"

namespace modelgate {

enum class Property { vfs, pfs };
enum class PfsMode { recursive, unrolled };

inline constexpr int default_depth_bound = 100;

inline std::string_view to_string(Property p) { return p == Property::vfs ? "vfs" : "pfs"; }
inline std::string_view to_string(PfsMode m) { return m == PfsMode::recursive ? "recursive" : "unrolled"; }

struct EncodingConfig {
  Property property = Property::vfs;
  std::optional<PfsMode> pfs_mode;
  /// Maximum number of transition applications. Zero admits only the
  /// zero-length path.
  std::optional<int> depth_bound;
  std::map<std::string, std::int64_t, std::less<>> instance_fixing;
  /// Boolean expressions over instance symbols and (initial) state fields.
  std::vector<Expr> extra_constraints;
  bool produce_model = true;
};

/// What a declared solver name stands for. Array kinds are flattened through
/// the script's field layout: element i of a state array is state field i;
/// element w*k + j of a parameter array is parameter j at step k, where w
/// is the number of parameters.
enum class SymbolKind { state_field, param, instance, step_count, state_array, param_array };

inline std::string_view to_string(SymbolKind k) {
  switch (k) {
    case SymbolKind::state_field: return "state-field";
    case SymbolKind::param: return "param";
    case SymbolKind::instance: return "instance";
    case SymbolKind::step_count: return "step-count";
    case SymbolKind::state_array: return "state-array";
    case SymbolKind::param_array: return "param-array";
  }
  return "?";
}

struct SymbolEntry {
  SymbolKind kind;
  std::string element;  // field, parameter or instance name; empty for counts and arrays
  int step = 0;

  friend bool operator==(const SymbolEntry&, const SymbolEntry&) = default;
};

using SymbolMap = std::map<std::string, SymbolEntry, std::less<>>;

struct SmtScript {
  std::string text;
  SymbolMap symbol_map;
  EncodingConfig config;
  std::vector<std::string> state_fields;
  std::vector<std::string> param_fields;
};

class EncodingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string inst_name(std::string_view n) { return "i_" + std::string(n); }
inline std::string arg_name(std::string_view n) { return "x_" + std::string(n); }
inline std::string state_name(int step, std::string_view n) { return "s" + std::to_string(step) + "_" + std::string(n); }
inline std::string param_name(int step, std::string_view n) { return "p" + std::to_string(step) + "_" + std::string(n); }

inline constexpr std::string_view step_count_name = "n";
inline constexpr std::string_view state_array_name = "state";
inline constexpr std::string_view param_array_name = "params";

using Renderer = std::function<std::string(const std::string&)>;

/// Renders symbols for the current context: state fields and parameters go
/// through the given callbacks, instance symbols to their global constants.
inline Renderer renderer(const Model& model, const std::function<std::string(std::size_t)>& state,
                         const std::function<std::string(std::size_t)>& param) {
  return [&model, state, param](const std::string& name) -> std::string {
    for (std::size_t i = 0; i < model.state_fields.size(); ++i) {
      if (model.state_fields[i] == name) return state(i);
    }
    for (std::size_t j = 0; j < model.param_fields.size(); ++j) {
      if (model.param_fields[j].name == name) return param(j);
    }
    return inst_name(name);
  };
}

inline Renderer argument_renderer(const Model& model) {
  return renderer(
      model, [&model](std::size_t i) { return arg_name(model.state_fields[i]); },
      [&model](std::size_t j) { return arg_name(model.param_fields[j].name); });
}

inline std::string state_params_decl(const Model& model, bool with_params) {
  std::string out;
  for (const auto& f : model.state_fields) {
    if (!out.empty()) out += ' ';
    out += "(" + arg_name(f) + " Int)";
  }
  if (with_params) {
    for (const auto& p : model.param_fields) {
      if (!out.empty()) out += ' ';
      out += "(" + arg_name(p.name) + " Int)";
    }
  }
  return out;
}

/// `(fn a0 a1 ...)`, or just `fn` when there are no arguments.
inline std::string call(std::string_view fn, const std::vector<std::string>& args) {
  if (args.empty()) return std::string(fn);
  std::string out = "(" + std::string(fn);
  for (const auto& a : args) out += " " + a;
  return out + ")";
}

inline std::vector<std::string> state_at(const Model& model, int step) {
  std::vector<std::string> out;
  for (const auto& f : model.state_fields) out.push_back(state_name(step, f));
  return out;
}

inline std::vector<std::string> params_at(const Model& model, int step) {
  std::vector<std::string> out;
  for (const auto& p : model.param_fields) out.push_back(param_name(step, p.name));
  return out;
}

inline std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

inline void require_valid(const Model& model) {
  auto diags = validate_model(model);
  if (!diags.empty()) {
    throw EncodingError("model '" + model.name + "' is not well-formed: " + std::string(to_string(diags[0].category)) +
                        " in " + diags[0].location + ": " + diags[0].message);
  }
}

inline void check_common(const Model& model, const EncodingConfig& config) {
  require_valid(model);
  for (const auto& [name, value] : config.instance_fixing) {
    if (std::find(model.instance_symbols.begin(), model.instance_symbols.end(), name) ==
        model.instance_symbols.end()) {
      throw EncodingError("instance fixing names '" + name + "', which is not an instance symbol");
    }
  }
  detail::Scope scope(model.instance_symbols.begin(), model.instance_symbols.end());
  scope.insert(model.state_fields.begin(), model.state_fields.end());
  for (std::size_t i = 0; i < config.extra_constraints.size(); ++i) {
    std::vector<Diagnostic> diags;
    detail::expect_sort(config.extra_constraints[i], Sort::boolean, scope, diags, "constraint");
    if (!diags.empty()) {
      throw EncodingError("extra constraint " + std::to_string(i + 1) + ": " + diags[0].message);
    }
  }
}

inline int checked_depth(const EncodingConfig& config) {
  if (!config.depth_bound) throw EncodingError("PFS encoding requires a depth bound");
  if (*config.depth_bound < 0) throw EncodingError("depth bound must be non-negative");
  return *config.depth_bound;
}

inline bool needs_nonlinear(const Model& model, const EncodingConfig& config) {
  std::vector<const Expr*> all = {&model.valid_pred, &model.initial_pred, &model.final_pred, &model.guard};
  for (const auto& u : model.update) all.push_back(&u.value);
  for (const auto& c : model.constraints) all.push_back(&c);
  for (const auto& c : config.extra_constraints) all.push_back(&c);
  for (const auto& p : model.param_fields) {
    if (p.range) {
      all.push_back(&p.range->lower);
      all.push_back(&p.range->upper);
    }
  }
  for (const Expr* e : all) {
    if (is_nonlinear(*e)) return true;
  }
  return false;
}

inline std::string header(const Model& model, const EncodingConfig& config) {
  std::string out = "; modelgate: " + model.name + " " + std::string(to_string(config.property));
  if (config.pfs_mode) out += " " + std::string(to_string(*config.pfs_mode));
  if (config.property == Property::pfs && config.depth_bound) out += " depth " + std::to_string(*config.depth_bound);
  out += "\n";
  if (config.produce_model) out += "(set-option :produce-models true)\n";
  return out;
}

/// Instance fixing, model constraints and extra constraints, with state
/// fields rendered by `state`.
inline std::string constraint_block(const Model& model, const EncodingConfig& config,
                                    const std::function<std::string(std::size_t)>& state) {
  const auto render = renderer(model, state, [](std::size_t) { return std::string("<param>"); });
  std::string out;
  for (const auto& [name, value] : config.instance_fixing) {
    out += "(assert (= " + inst_name(name) + " " + to_smt(lit(value)) + "))\n";
  }
  for (const auto& c : model.constraints) out += "(assert " + to_smt(c, render) + ")\n";
  for (const auto& c : config.extra_constraints) out += "(assert " + to_smt(c, render) + ")\n";
  if (!out.empty()) out = "; instance constraints\n" + out;
  return out;
}

inline std::string trailer(const EncodingConfig& config) {
  std::string out = "(check-sat)\n";
  if (config.produce_model) out += "(get-model)\n";
  return out;
}

inline void fill_layout(SmtScript& script, const Model& model) {
  script.state_fields = model.state_fields;
  script.param_fields = model.param_names();
  for (const auto& i : model.instance_symbols) script.symbol_map[inst_name(i)] = {SymbolKind::instance, i, 0};
}

}  // namespace detail

inline std::string smt_logic_for(const Model& model, const EncodingConfig& config = {}) {
  return detail::needs_nonlinear(model, config) ? "QF_NIA" : "QF_LIA";
}

/// Shared script prefix: logic selection (when given), instance symbol
/// declarations and the per-state model functions valid, initial, final,
/// guard, param_ok and one next_<field> per state field. Functions take one
/// Int argument per state field (x_<field>), followed by one per parameter
/// for the step functions. param_ok encodes the declared parameter ranges;
/// encoders assert it alongside guard at every step.
inline std::string emit_prelude(const Model& model, const std::optional<std::string>& logic) {
  detail::require_valid(model);
  const auto render = detail::argument_renderer(model);
  const std::string state_args = detail::state_params_decl(model, false);
  const std::string step_args = detail::state_params_decl(model, true);

  std::string out;
  if (logic) out += "(set-logic " + *logic + ")\n";
  if (!model.instance_symbols.empty()) {
    out += "; instance symbols\n";
    for (const auto& i : model.instance_symbols) out += "(declare-const " + detail::inst_name(i) + " Int)\n";
  }
  out += "; model predicates\n";
  out += "(define-fun valid (" + state_args + ") Bool\n  " + to_smt(model.valid_pred, render) + ")\n";
  out += "(define-fun initial (" + state_args + ") Bool\n  " + to_smt(model.initial_pred, render) + ")\n";
  out += "(define-fun final (" + state_args + ") Bool\n  " + to_smt(model.final_pred, render) + ")\n";
  out += "; transition\n";
  out += "(define-fun guard (" + step_args + ") Bool\n  " + to_smt(model.guard, render) + ")\n";

  std::vector<Expr> ranges;
  for (const auto& p : model.param_fields) {
    if (!p.range) continue;
    ranges.push_back(make(Op::le, {p.range->lower, sym(p.name)}));
    ranges.push_back(make(Op::le, {sym(p.name), p.range->upper}));
  }
  const Expr range_pred = ranges.empty() ? truth(true) : make(Op::logical_and, std::move(ranges));
  out += "(define-fun param_ok (" + step_args + ") Bool\n  " + to_smt(range_pred, render) + ")\n";
  for (const auto& f : model.state_fields) {
    out += "(define-fun next_" + f + " (" + step_args + ") Int\n  " + to_smt(*model.update_for(f), render) + ")\n";
  }
  return out;
}

inline std::string emit_prelude(const Model& model) { return emit_prelude(model, smt_logic_for(model)); }

/// Valid final state: exists s. valid(s) and final(s), with s realized as
/// free constants s0_<field>.
inline SmtScript encode_vfs(const Model& model, const EncodingConfig& config) {
  if (config.property != Property::vfs) throw EncodingError("encode_vfs needs property vfs");
  if (config.pfs_mode) throw EncodingError("a PFS encoding mode is meaningless for VFS");
  detail::check_common(model, config);

  SmtScript script;
  script.config = config;
  detail::fill_layout(script, model);

  std::string& t = script.text;
  t += detail::header(model, config);
  t += emit_prelude(model, smt_logic_for(model, config));
  t += "; candidate state\n";
  for (const auto& f : model.state_fields) {
    const auto name = detail::state_name(0, f);
    t += "(declare-const " + name + " Int)\n";
    script.symbol_map[name] = {SymbolKind::state_field, f, 0};
  }
  t += detail::constraint_block(model, config, [&](std::size_t i) { return detail::state_name(0, model.state_fields[i]); });
  const auto s0 = detail::state_at(model, 0);
  t += "; property\n";
  t += "(assert (and " + detail::call("valid", s0) + " " + detail::call("final", s0) + "))\n";
  t += detail::trailer(config);
  return script;
}

/// Bounded path to a final state with one constant per field per step.
/// Satisfiable iff some path of length at most the depth bound exists.
inline SmtScript encode_pfs_unrolled(const Model& model, const EncodingConfig& config) {
  if (config.property != Property::pfs) throw EncodingError("encode_pfs_unrolled needs property pfs");
  if (config.pfs_mode && *config.pfs_mode != PfsMode::unrolled) throw EncodingError("mode mismatch: expected unrolled");
  const int depth = detail::checked_depth(config);
  detail::check_common(model, config);

  SmtScript script;
  script.config = config;
  script.config.pfs_mode = PfsMode::unrolled;
  detail::fill_layout(script, model);

  std::string& t = script.text;
  t += detail::header(model, script.config);
  t += emit_prelude(model, smt_logic_for(model, config));

  t += "; states and parameters per step\n";
  for (int k = 0; k <= depth; ++k) {
    for (const auto& f : model.state_fields) {
      const auto name = detail::state_name(k, f);
      t += "(declare-const " + name + " Int)\n";
      script.symbol_map[name] = {SymbolKind::state_field, f, k};
    }
    if (k == depth) break;
    for (const auto& p : model.param_fields) {
      const auto name = detail::param_name(k, p.name);
      t += "(declare-const " + name + " Int)\n";
      script.symbol_map[name] = {SymbolKind::param, p.name, k};
    }
  }
  const std::string n(detail::step_count_name);
  t += "(declare-const " + n + " Int)\n";
  script.symbol_map[n] = {SymbolKind::step_count, "", 0};
  t += "(assert (and (<= 0 " + n + ") (<= " + n + " " + std::to_string(depth) + ")))\n";

  t += detail::constraint_block(model, config, [&](std::size_t i) { return detail::state_name(0, model.state_fields[i]); });

  const auto s0 = detail::state_at(model, 0);
  t += "; initial state\n";
  t += "(assert (and " + detail::call("initial", s0) + " " + detail::call("valid", s0) + "))\n";

  if (depth > 0) t += "; steps taken while k < n\n";
  for (int k = 0; k < depth; ++k) {
    const auto sk = detail::state_at(model, k);
    const auto step_args = detail::concat(sk, detail::params_at(model, k));
    const auto next = detail::state_at(model, k + 1);
    t += "(assert (=> (< " + std::to_string(k) + " " + n + ")\n  (and " + detail::call("guard", step_args) + " " +
         detail::call("param_ok", step_args);
    for (std::size_t i = 0; i < model.state_fields.size(); ++i) {
      t += "\n       (= " + next[i] + " " + detail::call("next_" + model.state_fields[i], step_args) + ")";
    }
    t += "\n       " + detail::call("valid", next) + ")))\n";
  }

  t += "; final after exactly n steps\n(assert (or";
  for (int k = 0; k <= depth; ++k) {
    t += "\n  (and (= " + n + " " + std::to_string(k) + ") " + detail::call("final", detail::state_at(model, k)) + ")";
  }
  t += "))\n";
  t += detail::trailer(config);
  return script;
}

/// Path to a final state through a recursive n-step transition function
/// over array-valued states. `tran` threads the last valid state and the
/// size of the parameter array; `path_ok` requires every step it takes to
/// be enabled and to land on a valid state.
inline SmtScript encode_pfs_recursive(const Model& model, const EncodingConfig& config) {
  if (config.property != Property::pfs) throw EncodingError("encode_pfs_recursive needs property pfs");
  if (config.pfs_mode && *config.pfs_mode != PfsMode::recursive) throw EncodingError("mode mismatch: expected recursive");
  const int depth = detail::checked_depth(config);
  detail::check_common(model, config);

  SmtScript script;
  script.config = config;
  script.config.pfs_mode = PfsMode::recursive;
  detail::fill_layout(script, model);

  const std::size_t width = model.param_fields.size();
  const std::size_t fields = model.state_fields.size();
  auto select = [](std::string_view arr, const std::string& idx) {
    return "(select " + std::string(arr) + " " + idx + ")";
  };
  auto state_elems = [&](std::string_view s) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < fields; ++i) out.push_back(select(s, std::to_string(i)));
    return out;
  };
  auto param_args = [&]() {
    std::vector<std::string> out;
    for (const auto& p : model.param_fields) out.push_back(detail::arg_name(p.name));
    return out;
  };
  // Parameters of the current step inside tran/path_ok.
  const std::string base = "(- size (* " + std::to_string(width) + " k))";
  auto step_params = [&]() {
    std::vector<std::string> out;
    for (std::size_t j = 0; j < width; ++j) {
      out.push_back(select("p", j == 0 ? base : "(+ " + base + " " + std::to_string(j) + ")"));
    }
    return out;
  };
  std::string param_decl;
  for (const auto& p : model.param_fields) param_decl += " (" + detail::arg_name(p.name) + " Int)";

  std::string& t = script.text;
  t += detail::header(model, script.config);
  t += "(define-sort State () (Array Int Int))\n";
  t += "(define-sort Parameters () (Array Int Int))\n";
  t += emit_prelude(model, std::nullopt);

  t += "; array-valued state\n";
  t += "(define-fun valid_state ((s State)) Bool " + detail::call("valid", state_elems("s")) + ")\n";
  t += "(define-fun initial_state ((s State)) Bool " + detail::call("initial", state_elems("s")) + ")\n";
  t += "(define-fun final_state ((s State)) Bool " + detail::call("final", state_elems("s")) + ")\n";
  {
    const auto args = detail::concat(state_elems("s"), param_args());
    t += "(define-fun enabled ((s State)" + param_decl + ") Bool\n  (and " + detail::call("guard", args) + " " +
         detail::call("param_ok", args) + "))\n";
    std::string body = "s";
    for (std::size_t i = 0; i < fields; ++i) {
      body = "(store " + body + " " + std::to_string(i) + " " +
             detail::call("next_" + model.state_fields[i], args) + ")";
    }
    t += "(define-fun transition ((s State)" + param_decl + ") State\n  " + body + ")\n";
  }
  {
    const auto sp = step_params();
    const std::string enabled = detail::call("enabled", detail::concat({"s"}, sp));
    const std::string next = detail::call("transition", detail::concat({"s"}, sp));
    t += "(define-fun-rec tran ((k Int) (s State) (p Parameters) (last State) (size Int)) State\n"
         "  (ite (not (valid_state s)) last\n"
         "  (ite (<= k 0) s\n"
         "  (ite " + enabled + "\n"
         "       (tran (- k 1) " + next + " p s size)\n"
         "       s))))\n";
    t += "(define-fun-rec path_ok ((k Int) (s State) (p Parameters) (size Int)) Bool\n"
         "  (or (<= k 0)\n"
         "      (and " + enabled + "\n"
         "           (valid_state " + next + ")\n"
         "           (path_ok (- k 1) " + next + " p size))))\n";
  }

  const std::string n(detail::step_count_name);
  const std::string st(detail::state_array_name);
  const std::string ps(detail::param_array_name);
  t += "; initial state, step count and flattened parameters (length " + std::to_string(width) + " * n)\n";
  t += "(declare-const " + st + " State)\n";
  t += "(declare-const " + n + " Int)\n";
  t += "(declare-const " + ps + " Parameters)\n";
  script.symbol_map[st] = {SymbolKind::state_array, "", 0};
  script.symbol_map[n] = {SymbolKind::step_count, "", 0};
  script.symbol_map[ps] = {SymbolKind::param_array, "", 0};
  t += "(assert (and (<= 0 " + n + ") (<= " + n + " " + std::to_string(depth) + ")))\n";
  t += detail::constraint_block(model, config, [&](std::size_t i) { return select(st, std::to_string(i)); });

  const std::string size = "(* " + std::to_string(width) + " " + n + ")";
  t += "; property\n";
  t += "(assert (valid_state " + st + "))\n";
  t += "(assert (path_ok " + n + " " + st + " " + ps + " " + size + "))\n";
  t += "(assert (and (initial_state " + st + ")\n             (final_state (tran " + n + " " + st + " " + ps + " " + st +
       " " + size + "))))\n";
  t += detail::trailer(config);
  return script;
}

inline SmtScript encode(const Model& model, const EncodingConfig& config) {
  if (config.property == Property::vfs) return encode_vfs(model, config);
  if (config.pfs_mode.value_or(PfsMode::unrolled) == PfsMode::recursive) return encode_pfs_recursive(model, config);
  return encode_pfs_unrolled(model, config);
}

/// Structural checks on generated text: balanced parentheses, every mapped
/// name declared before any other use, and the expected command tail.
/// Returns a description of each problem found.
inline std::vector<std::string> check_script(const SmtScript& script) {
  std::vector<std::string> problems;
  const std::string& t = script.text;

  std::vector<std::string> tokens;
  long depth = 0;
  bool negative = false;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < t.size(); ++i) {
    const char c = t[i];
    if (c == ';') {
      flush();
      while (i < t.size() && t[i] != '\n') ++i;
    } else if (c == '(' || c == ')') {
      flush();
      depth += c == '(' ? 1 : -1;
      if (depth < 0) negative = true;
      tokens.emplace_back(1, c);
    } else if (c == ' ' || c == '\n' || c == '\t' || c == '\r') {
      flush();
    } else {
      cur += c;
    }
  }
  flush();
  if (depth != 0 || negative) problems.push_back("unbalanced parentheses");

  for (const auto& [name, entry] : script.symbol_map) {
    std::optional<std::size_t> declared, first_use;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i] != name) continue;
      if (i >= 1 && tokens[i - 1] == "declare-const") {
        if (!declared) declared = i;
      } else if (!first_use) {
        first_use = i;
      }
    }
    if (!declared) {
      problems.push_back("'" + name + "' is never declared");
    } else if (first_use && *first_use < *declared) {
      problems.push_back("'" + name + "' is used before its declaration");
    }
  }

  const std::string tail = script.config.produce_model ? "(check-sat)\n(get-model)\n" : "(check-sat)\n";
  if (t.size() < tail.size() || t.compare(t.size() - tail.size(), tail.size(), tail) != 0) {
    problems.push_back("script does not end with the expected check-sat/get-model commands");
  }
  return problems;
}

}  // namespace modelgate
