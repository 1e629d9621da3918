#pragma once

#include <stdlib.h>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "modelgate/encoder.hpp"
#include "modelgate/model.hpp"
#include "modelgate/process.hpp"
#include "modelgate/sexpr.hpp"

namespace modelgate {

inline constexpr std::string_view solver_env_var = "MODELGATE_SOLVER";

/// The solver executable: $MODELGATE_SOLVER when set, otherwise z3 from PATH.
inline std::string default_solver_path() {
  if (const char* env = std::getenv(std::string(solver_env_var).c_str()); env && *env) return env;
  return "z3";
}

struct SolverConfig {
  std::string executable_path = default_solver_path();
  std::vector<std::string> extra_args;
  double timeout_seconds = 300.0;
  std::optional<int> memory_note_mb;  // advisory only
  bool keep_scripts = false;
};

enum class Outcome { sat, unsat, unknown };

inline std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::sat: return "sat";
    case Outcome::unsat: return "unsat";
    case Outcome::unknown: return "unknown";
  }
  return "?";
}

struct Verdict {
  Outcome outcome = Outcome::unknown;
  std::optional<std::string> raw_model;
  std::map<std::string, double> stats;
  double wall_time = 0.0;
  std::string solver_identity;
  std::string reason;  // unknown/timeout explanation, if any
  std::optional<std::filesystem::path> script_path;  // set when the script was retained

  bool timed_out() const { return stats.contains("timeout"); }
};

class SolverError : public std::runtime_error {
 public:
  enum class Kind { launch_failure, protocol_error, nonzero_exit, disagreement };

  SolverError(Kind kind, std::string message, std::string diagnostics = {})
      : std::runtime_error(std::move(message)), kind_(kind), diagnostics_(std::move(diagnostics)) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& diagnostics() const noexcept { return diagnostics_; }

 private:
  Kind kind_;
  std::string diagnostics_;
};

inline std::string_view to_string(SolverError::Kind k) {
  switch (k) {
    case SolverError::Kind::launch_failure: return "launch-failure";
    case SolverError::Kind::protocol_error: return "protocol-error";
    case SolverError::Kind::nonzero_exit: return "nonzero-exit";
    case SolverError::Kind::disagreement: return "solver-disagreement";
  }
  return "?";
}

/// Returns the solver's version banner (`<exe> --version`).
inline std::string probe_solver(const SolverConfig& config) {
  if (config.executable_path.empty()) throw SolverError(SolverError::Kind::launch_failure, "empty solver path");
  ProcessResult r;
  try {
    r = run_process(config.executable_path, {"--version"}, std::min(config.timeout_seconds, 10.0));
  } catch (const LaunchError& e) {
    throw SolverError(SolverError::Kind::launch_failure, e.what());
  }
  if (r.timed_out) throw SolverError(SolverError::Kind::protocol_error, "version probe timed out");
  if (r.exit_code != 0) {
    throw SolverError(SolverError::Kind::nonzero_exit,
                      "'" + config.executable_path + " --version' exited with status " + std::to_string(r.exit_code),
                      r.err + r.out);
  }
  std::string text = r.out;
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' ')) text.pop_back();
  if (text.empty()) throw SolverError(SolverError::Kind::protocol_error, "solver printed no version text");
  return text;
}

namespace detail {

inline std::string solver_identity(const SolverConfig& config) {
  static std::mutex mu;
  static std::map<std::string, std::string> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(config.executable_path);
  if (it != cache.end()) return it->second;
  std::string id;
  try {
    id = probe_solver(config);
  } catch (const SolverError&) {
    id = config.executable_path;
  }
  cache.emplace(config.executable_path, id);
  return id;
}

class ScratchDir {
 public:
  ScratchDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "modelgate-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw SolverError(SolverError::Kind::launch_failure, "cannot create temp directory");
    path_ = tmpl;
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  ~ScratchDir() {
    if (!keep_) {
      std::error_code ec;
      std::filesystem::remove_all(path_, ec);
    }
  }

  const std::filesystem::path& path() const { return path_; }
  void keep() { keep_ = true; }

 private:
  std::filesystem::path path_;
  bool keep_ = false;
};

inline void parse_stats(const SExpr& list, std::map<std::string, double>& stats) {
  for (std::size_t i = 0; i + 1 < list.items.size(); i += 2) {
    const SExpr& key = list.items[i];
    const SExpr& val = list.items[i + 1];
    if (!key.is_atom() || key.text.empty() || key.text[0] != ':' || !val.is_atom()) continue;
    double d = 0;
    auto [ptr, ec] = std::from_chars(val.text.data(), val.text.data() + val.text.size(), d);
    if (ec == std::errc() && ptr == val.text.data() + val.text.size()) stats[key.text.substr(1)] = d;
  }
}

}  // namespace detail

/// Interprets raw solver stdout. The first top-level status token decides
/// the outcome; the s-expression after a `sat` is the model when one was
/// requested; lists of `:key value` pairs are harvested as statistics.
/// Returns nullopt when no status token is present.
inline std::optional<Verdict> interpret_output(std::string_view out, bool model_requested) {
  std::vector<ParseError> ignored;
  const auto forms = read_sexprs(out, ignored, ReadOptions{8192, 64});
  Verdict v;
  bool have_status = false;
  for (const auto& f : forms) {
    if (!have_status) {
      if (f.is_atom("sat") || f.is_atom("unsat") || f.is_atom("unknown")) {
        v.outcome = f.text == "sat" ? Outcome::sat : f.text == "unsat" ? Outcome::unsat : Outcome::unknown;
        have_status = true;
      }
      continue;
    }
    if (f.head_is("error")) {
      if (f.items.size() > 1 && v.reason.empty()) v.reason = f.items[1].text;
      continue;
    }
    if (f.is_list() && !f.items.empty() && f.items[0].is_atom() && !f.items[0].text.empty() &&
        f.items[0].text[0] == ':') {
      detail::parse_stats(f, v.stats);
      continue;
    }
    if (f.is_list() && v.outcome == Outcome::sat && model_requested && !v.raw_model) {
      v.raw_model = to_string(f);
    }
  }
  if (!have_status) return std::nullopt;
  return v;
}

/// Runs the solver once on `script`, passing it as a file argument.
inline Verdict run_solver(const SmtScript& script, const SolverConfig& config) {
  if (!(config.timeout_seconds > 0)) throw SolverError(SolverError::Kind::launch_failure, "timeout must be positive");
  if (config.executable_path.empty()) throw SolverError(SolverError::Kind::launch_failure, "empty solver path");
  if (!find_executable(config.executable_path)) {
    throw SolverError(SolverError::Kind::launch_failure, "cannot find solver '" + config.executable_path + "'");
  }

  detail::ScratchDir dir;
  const auto file = dir.path() / "query.smt2";
  {
    std::ofstream os(file, std::ios::binary);
    os << script.text;
    if (!os) throw SolverError(SolverError::Kind::launch_failure, "cannot write " + file.string());
  }

  std::vector<std::string> args = config.extra_args;
  args.push_back(file.string());
  ProcessResult r;
  try {
    r = run_process(config.executable_path, args, config.timeout_seconds);
  } catch (const LaunchError& e) {
    dir.keep();
    throw SolverError(SolverError::Kind::launch_failure, e.what());
  }

  auto retain = [&](Verdict& v) {
    dir.keep();
    v.script_path = file;
  };

  auto parsed = interpret_output(r.out, script.config.produce_model);
  Verdict v;
  if (parsed) {
    v = std::move(*parsed);
  } else if (r.timed_out) {
    v.outcome = Outcome::unknown;
  } else if (r.exit_code != 0) {
    dir.keep();
    throw SolverError(SolverError::Kind::nonzero_exit,
                      "solver exited with status " + std::to_string(r.exit_code) + " without a verdict (script kept at " +
                          file.string() + ")",
                      r.err + r.out);
  } else {
    dir.keep();
    throw SolverError(SolverError::Kind::protocol_error,
                      "no sat/unsat/unknown in solver output (script kept at " + file.string() + ")", r.err + r.out);
  }

  if (r.timed_out) {
    // Partial output is not trusted once the deadline has passed.
    v = Verdict{};
    v.outcome = Outcome::unknown;
    v.stats["timeout"] = 1;
    v.reason = "timeout after " + std::to_string(config.timeout_seconds) + " s";
    retain(v);
  }
  if (v.outcome != Outcome::sat) v.raw_model.reset();
  if (v.outcome == Outcome::unknown && v.reason.empty()) v.reason = r.err;
  v.wall_time = r.wall_seconds;
  v.solver_identity = detail::solver_identity(config);
  if (config.keep_scripts) retain(v);
  return v;
}

/// Solvers are sound, so two decided verdicts on the same script must match.
inline void check_agreement(const Verdict& a, const Verdict& b) {
  if (a.outcome == Outcome::unknown || b.outcome == Outcome::unknown) return;
  if (a.outcome != b.outcome) {
    throw SolverError(SolverError::Kind::disagreement, "solvers disagree: '" + a.solver_identity + "' says " +
                                                           std::string(to_string(a.outcome)) + ", '" +
                                                           b.solver_identity + "' says " +
                                                           std::string(to_string(b.outcome)));
  }
}

// ---------------------------------------------------------------------------
// Witnesses

/// A model element with its step: state field k, parameter k, instance
/// symbol, or the step count.
struct ElementRef {
  SymbolKind kind;
  std::string name;
  int step = 0;

  friend auto operator<=>(const ElementRef&, const ElementRef&) = default;
};

struct Witness {
  std::map<ElementRef, std::int64_t> assignments;
  std::optional<std::int64_t> step_count;

  std::optional<std::int64_t> get(SymbolKind kind, std::string_view name, int step = 0) const {
    auto it = assignments.find(ElementRef{kind, std::string(name), step});
    if (it == assignments.end()) return std::nullopt;
    return it->second;
  }
};

class WitnessError : public std::runtime_error {
 public:
  enum class Kind { parse_error, missing_symbol, range_error };

  WitnessError(Kind kind, std::string message) : std::runtime_error(std::move(message)), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

namespace detail {

struct TermScope;

/// A name bound by let, a lambda or a function parameter. Let bindings are
/// kept as unevaluated terms because they may be arrays.
struct Bound {
  std::int64_t value = 0;
  const SExpr* term = nullptr;
  std::shared_ptr<const TermScope> scope;
};

struct TermScope {
  std::map<std::string, Bound, std::less<>> names;
};

struct ModelDef {
  std::vector<std::string> params;
  const SExpr* body = nullptr;
};

/// Evaluates the integer and array terms solvers print in models: numerals,
/// arithmetic, ite, let, constant arrays, store chains, as-array references
/// and lambdas.
class ModelTermEvaluator {
 public:
  explicit ModelTermEvaluator(const std::map<std::string, ModelDef, std::less<>>& defs) : defs_(defs) {}

  using Env = std::map<std::string, Bound, std::less<>>;

  std::int64_t value(const SExpr& t, const Env& env = {}) { return eval(t, env, 0); }
  std::int64_t element(const SExpr& array, std::int64_t index) { return select(array, index, {}, 0); }

 private:
  static constexpr int max_depth = 4096;

  [[noreturn]] static void fail(const SExpr& t, const std::string& why) {
    std::string excerpt = to_string(t);
    if (excerpt.size() > 80) excerpt = excerpt.substr(0, 77) + "...";
    throw WitnessError(WitnessError::Kind::parse_error, why + ": " + excerpt);
  }

  static std::int64_t numeral(const SExpr& t) {
    std::int64_t v = 0;
    const char* b = t.text.data();
    const char* e = b + t.text.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec == std::errc::result_out_of_range) {
      throw WitnessError(WitnessError::Kind::range_error, "value " + t.text + " exceeds the signed 64-bit range");
    }
    if (ec != std::errc() || ptr != e) fail(t, "not a numeral");
    return v;
  }

  static bool is_numeral(const SExpr& t) {
    return t.is_atom() && !t.text.empty() && std::all_of(t.text.begin(), t.text.end(), [](char c) {
             return c >= '0' && c <= '9';
           });
  }

  static std::int64_t arith(const SExpr& t, char op, std::int64_t a, std::int64_t b) {
    std::int64_t r = 0;
    bool o = op == '+' ? __builtin_add_overflow(a, b, &r) : op == '-' ? __builtin_sub_overflow(a, b, &r)
                                                                      : __builtin_mul_overflow(a, b, &r);
    if (o) throw WitnessError(WitnessError::Kind::range_error, "overflow evaluating " + to_string(t));
    return r;
  }

  Env bind_let(const SExpr& t, const Env& env, int depth) {
    if (t.items.size() != 3 || !t.items[1].is_list()) fail(t, "malformed let");
    (void)depth;
    auto outer = std::make_shared<const TermScope>(TermScope{env});
    Env inner = env;
    for (const auto& b : t.items[1].items) {
      if (!b.is_list() || b.items.size() != 2 || !b.items[0].is_atom()) fail(t, "malformed let binding");
      inner[b.items[0].text] = Bound{0, &b.items[1], outer};
    }
    return inner;
  }

  std::int64_t apply(const SExpr& t, const ModelDef& def, const std::vector<std::int64_t>& args, int depth) {
    if (def.params.size() != args.size()) fail(t, "wrong number of arguments");
    Env inner;
    for (std::size_t i = 0; i < args.size(); ++i) inner[def.params[i]] = Bound{args[i], nullptr, nullptr};
    return eval(*def.body, inner, depth + 1);
  }

  std::int64_t eval(const SExpr& t, const Env& env, int depth) {
    if (depth > max_depth) fail(t, "term nested too deeply");
    if (t.is_atom()) {
      if (is_numeral(t)) return numeral(t);
      if (t.text == "true") return 1;
      if (t.text == "false") return 0;
      if (auto it = env.find(t.text); it != env.end()) {
        const Bound& b = it->second;
        return b.term ? eval(*b.term, b.scope->names, depth + 1) : b.value;
      }
      if (auto it = defs_.find(t.text); it != defs_.end() && it->second.params.empty()) {
        return eval(*it->second.body, {}, depth + 1);
      }
      fail(t, "unknown symbol");
    }
    if (!t.is_list() || t.items.empty() || !t.items[0].is_atom()) fail(t, "unsupported term");
    const std::string& h = t.items[0].text;
    const std::size_t argc = t.items.size() - 1;
    auto arg = [&](std::size_t i) { return eval(t.items[i + 1], env, depth + 1); };

    if (h == "let") return eval(t.items[2], bind_let(t, env, depth), depth + 1);
    if (h == "select") {
      if (argc != 2) fail(t, "malformed select");
      return select(t.items[1], arg(1), env, depth + 1);
    }
    if (h == "ite") {
      if (argc != 3) fail(t, "malformed ite");
      return arg(0) ? arg(1) : arg(2);
    }
    if (h == "-" && argc == 1) return arith(t, '-', 0, arg(0));
    if ((h == "+" || h == "-" || h == "*") && argc >= 1) {
      std::int64_t acc = arg(0);
      for (std::size_t i = 1; i < argc; ++i) acc = arith(t, h[0], acc, arg(i));
      return acc;
    }
    if (argc == 2 && (h == "=" || h == "<" || h == "<=" || h == ">" || h == ">=")) {
      const auto a = arg(0), b = arg(1);
      if (h == "=") return a == b;
      if (h == "<") return a < b;
      if (h == "<=") return a <= b;
      if (h == ">") return a > b;
      return a >= b;
    }
    if (h == "and" || h == "or") {
      bool r = h == "and";
      for (std::size_t i = 0; i < argc; ++i) r = h == "and" ? (r && arg(i)) : (r || arg(i));
      return r;
    }
    if (h == "not" && argc == 1) return !arg(0);
    if (h == "=>" && argc == 2) return !arg(0) || arg(1);
    if (auto it = defs_.find(h); it != defs_.end()) {
      std::vector<std::int64_t> args;
      for (std::size_t i = 0; i < argc; ++i) args.push_back(arg(i));
      return apply(t, it->second, args, depth);
    }
    fail(t, "unsupported operator '" + h + "'");
  }

  std::int64_t select(const SExpr& a, std::int64_t index, const Env& env, int depth) {
    if (depth > max_depth) fail(a, "array term nested too deeply");
    if (a.is_atom()) {
      if (auto b = env.find(a.text); b != env.end() && b->second.term) {
        return select(*b->second.term, index, b->second.scope->names, depth + 1);
      }
      auto it = defs_.find(a.text);
      if (it == defs_.end() || !it->second.params.empty()) fail(a, "unknown array");
      return select(*it->second.body, index, {}, depth + 1);
    }
    if (!a.is_list() || a.items.empty()) fail(a, "unsupported array term");
    const SExpr& h = a.items[0];
    // ((as const (Array Int Int)) v)
    if (h.is_list() && h.head_is("as") && h.items.size() >= 2 && h.items[1].is_atom("const")) {
      if (a.items.size() != 2) fail(a, "malformed constant array");
      return eval(a.items[1], env, depth + 1);
    }
    if (h.is_atom("store")) {
      if (a.items.size() != 4) fail(a, "malformed store");
      if (eval(a.items[2], env, depth + 1) == index) return eval(a.items[3], env, depth + 1);
      return select(a.items[1], index, env, depth + 1);
    }
    if (h.is_atom("_") && a.items.size() == 3 && a.items[1].is_atom("as-array")) {
      auto it = defs_.find(a.items[2].text);
      if (it == defs_.end()) fail(a, "as-array names an undefined function");
      return apply(a, it->second, {index}, depth);
    }
    if (h.is_atom("lambda")) {
      if (a.items.size() != 3 || !a.items[1].is_list() || a.items[1].items.size() != 1 ||
          !a.items[1].items[0].is_list() || a.items[1].items[0].items.empty()) {
        fail(a, "malformed lambda");
      }
      Env inner = env;
      inner[a.items[1].items[0].items[0].text] = Bound{index, nullptr, nullptr};
      return eval(a.items[2], inner, depth + 1);
    }
    if (h.is_atom("ite") && a.items.size() == 4) {
      return eval(a.items[1], env, depth + 1) ? select(a.items[2], index, env, depth + 1)
                                              : select(a.items[3], index, env, depth + 1);
    }
    if (h.is_atom("let")) return select(a.items[2], index, bind_let(a, env, depth), depth + 1);
    fail(a, "unsupported array term");
  }

  const std::map<std::string, ModelDef, std::less<>>& defs_;
};

}  // namespace detail

/// Decodes a sat verdict's model through the script's symbol map. Names the
/// map does not know are ignored; array values are flattened by index.
inline Witness parse_witness(const Verdict& verdict, const SmtScript& script) {
  if (verdict.outcome != Outcome::sat || !verdict.raw_model) {
    throw WitnessError(WitnessError::Kind::parse_error, "verdict carries no model");
  }
  std::vector<ParseError> errors;
  auto forms = read_sexprs(*verdict.raw_model, errors, ReadOptions{8192, 64});
  if (!errors.empty() || forms.size() != 1 || !forms[0].is_list()) {
    std::string excerpt = verdict.raw_model->substr(0, 80);
    throw WitnessError(WitnessError::Kind::parse_error,
                       (errors.empty() ? std::string("expected one model s-expression") : errors[0].message) + ": " +
                           excerpt);
  }
  const SExpr& root = forms[0];
  std::map<std::string, detail::ModelDef, std::less<>> defs;
  for (std::size_t i = root.head_is("model") ? 1 : 0; i < root.items.size(); ++i) {
    const SExpr& d = root.items[i];
    if (!d.head_is("define-fun")) continue;
    if (d.items.size() != 5 || !d.items[1].is_atom() || !d.items[2].is_list()) {
      throw WitnessError(WitnessError::Kind::parse_error, "malformed define-fun: " + to_string(d).substr(0, 80));
    }
    detail::ModelDef def;
    for (const auto& p : d.items[2].items) {
      if (!p.is_list() || p.items.empty() || !p.items[0].is_atom()) {
        throw WitnessError(WitnessError::Kind::parse_error, "malformed parameter in " + d.items[1].text);
      }
      def.params.push_back(p.items[0].text);
    }
    def.body = &d.items[4];
    defs[d.items[1].text] = std::move(def);
  }

  detail::ModelTermEvaluator ev(defs);
  Witness w;
  std::vector<std::string> missing;
  const auto width = static_cast<std::int64_t>(script.param_fields.size());
  const int depth = script.config.depth_bound.value_or(0);

  for (const auto& [name, entry] : script.symbol_map) {
    auto def = defs.find(name);
    if (def == defs.end() || !def->second.params.empty()) {
      missing.push_back(name);
      continue;
    }
    const SExpr& body = *def->second.body;
    switch (entry.kind) {
      case SymbolKind::state_field:
      case SymbolKind::param:
      case SymbolKind::instance:
        w.assignments[ElementRef{entry.kind, entry.element, entry.step}] = ev.value(body);
        break;
      case SymbolKind::step_count:
        w.step_count = ev.value(body);
        w.assignments[ElementRef{SymbolKind::step_count, "", 0}] = *w.step_count;
        break;
      case SymbolKind::state_array:
        for (std::size_t i = 0; i < script.state_fields.size(); ++i) {
          w.assignments[ElementRef{SymbolKind::state_field, script.state_fields[i], entry.step}] =
              ev.element(body, static_cast<std::int64_t>(i));
        }
        break;
      case SymbolKind::param_array:
        for (int k = 0; k < depth; ++k) {
          for (std::int64_t j = 0; j < width; ++j) {
            w.assignments[ElementRef{SymbolKind::param, script.param_fields[static_cast<std::size_t>(j)], k}] =
                ev.element(body, width * k + j);
          }
        }
        break;
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw WitnessError(WitnessError::Kind::missing_symbol, "model has no value for: " + list);
  }
  return w;
}

inline ConcreteState witness_state(const Witness& w, const std::vector<std::string>& fields, int step) {
  ConcreteState s;
  for (const auto& f : fields) {
    auto v = w.get(SymbolKind::state_field, f, step);
    if (!v) throw WitnessError(WitnessError::Kind::missing_symbol, "no value for " + f + " at step " + std::to_string(step));
    s.values.push_back(*v);
  }
  return s;
}

inline ConcreteBinding witness_params(const Witness& w, const std::vector<std::string>& params, int step) {
  ConcreteBinding b;
  for (const auto& p : params) {
    auto v = w.get(SymbolKind::param, p, step);
    if (!v) throw WitnessError(WitnessError::Kind::missing_symbol, "no value for " + p + " at step " + std::to_string(step));
    b[p] = *v;
  }
  return b;
}

inline ConcreteBinding witness_instance(const Witness& w) {
  ConcreteBinding b;
  for (const auto& [ref, value] : w.assignments) {
    if (ref.kind == SymbolKind::instance) b[ref.name] = value;
  }
  return b;
}

}  // namespace modelgate
