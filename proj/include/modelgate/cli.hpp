#pragma once

// Command implementations behind the modelgate executable. Argument parsing
// lives in tools/modelgate.cpp; everything here writes to caller-supplied
// streams so tests can drive the commands in-process.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "modelgate/dsl.hpp"
#include "modelgate/encoder.hpp"
#include "modelgate/oracle.hpp"
#include "modelgate/solver.hpp"

namespace modelgate::cli {

namespace exit_code {
inline constexpr int sat = 0;
inline constexpr int unsat = 1;
inline constexpr int unknown = 2;
inline constexpr int input_error = 3;    // usage, missing file, parse or encoding error
inline constexpr int solver_error = 4;   // launch failure, protocol error, crash
inline constexpr int check_failed = 5;   // witness, replay or oracle failure
inline constexpr int disagreement = 6;   // two solvers, or solver and oracle, disagree
inline constexpr int bench_mismatch = 7; // a bench verdict differs from the manifest
}  // namespace exit_code

inline int exit_code_for(Outcome o) {
  switch (o) {
    case Outcome::sat: return exit_code::sat;
    case Outcome::unsat: return exit_code::unsat;
    case Outcome::unknown: return exit_code::unknown;
  }
  return exit_code::unknown;
}

enum class Format { text, records };

/// Instance flags as given on the command line, before they are resolved
/// against a model.
struct InstanceSpec {
  std::vector<std::pair<std::string, std::int64_t>> assignments;  // --nm/--nc/--bcap/--fix
  std::vector<std::string> constraints;                           // --constrain
};

struct Options {
  Property property = Property::vfs;
  std::optional<PfsMode> mode;
  std::optional<int> depth;
  int max_depth = default_depth_bound;
  InstanceSpec instance;
  SolverConfig solver;
  std::optional<std::string> solver2;
  Format format = Format::text;
  int jobs = 1;
  std::size_t node_cap = default_node_cap;
  std::optional<IntRange> field_range;  // oracle VFS enumeration domain
  bool cross_check = false;
  std::optional<std::filesystem::path> compare;  // oracle: prior records to compare against
};

struct PlanReport {
  ConcreteState start;
  std::vector<ConcreteBinding> steps;
  std::vector<ConcreteState> states;  // state after each step
  bool replayed = false;
};

struct RunReport {
  std::string command;
  std::string model;
  std::string file;
  std::string property;
  std::string mode;
  std::optional<int> depth;
  ConcreteBinding instance;
  std::vector<std::string> constraints;
  std::string outcome;  // sat, unsat, unknown or error
  std::string note;
  double wall_time = 0.0;
  std::string solver;
  std::map<std::string, double> stats;
  std::vector<std::string> state_fields;
  std::vector<std::string> param_fields;
  std::optional<ConcreteState> witness_state;
  std::optional<PlanReport> plan;
  std::optional<std::string> oracle;
  std::optional<std::string> expected;
  std::string error;
  int exit = exit_code::unknown;
};

class CliError : public std::runtime_error {
 public:
  CliError(int code, std::string message) : std::runtime_error(std::move(message)), code_(code) {}
  int code() const noexcept { return code_; }

 private:
  int code_;
};

// ---------------------------------------------------------------------------
// Rendering

inline nlohmann::json to_json(const ConcreteBinding& b) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : b) j[k] = v;
  return j;
}

inline nlohmann::json to_json(const RunReport& r) {
  nlohmann::json j;
  j["command"] = r.command;
  j["model"] = r.model;
  j["file"] = r.file;
  j["property"] = r.property;
  if (!r.mode.empty()) j["mode"] = r.mode;
  if (r.depth) j["depth"] = *r.depth;
  j["instance"] = to_json(r.instance);
  j["constraints"] = r.constraints;
  j["outcome"] = r.outcome;
  if (!r.note.empty()) j["note"] = r.note;
  j["wall_time"] = r.wall_time;
  if (!r.solver.empty()) j["solver"] = r.solver;
  if (!r.stats.empty()) j["stats"] = r.stats;
  if (r.witness_state) {
    nlohmann::json s = nlohmann::json::object();
    for (std::size_t i = 0; i < r.state_fields.size(); ++i) s[r.state_fields[i]] = r.witness_state->values[i];
    j["witness_state"] = s;
  }
  if (r.plan) {
    nlohmann::json p;
    p["length"] = r.plan->steps.size();
    p["start"] = r.plan->start.values;
    p["steps"] = nlohmann::json::array();
    for (const auto& s : r.plan->steps) p["steps"].push_back(to_json(s));
    p["states"] = nlohmann::json::array();
    for (const auto& s : r.plan->states) p["states"].push_back(s.values);
    p["replayed"] = r.plan->replayed;
    j["plan"] = p;
  }
  if (r.oracle) j["oracle"] = *r.oracle;
  if (r.expected) j["expected"] = *r.expected;
  if (!r.error.empty()) j["error"] = r.error;
  j["exit_code"] = r.exit;
  return j;
}

inline void print_text(std::ostream& os, const RunReport& r) {
  os << (r.model.empty() ? r.file : r.model) << " " << r.property;
  if (!r.mode.empty()) os << " " << r.mode;
  if (r.depth) os << " depth " << *r.depth;
  os << ": " << r.outcome;
  if (!r.note.empty()) os << " (" << r.note << ")";
  os << "  [" << std::fixed << std::setprecision(3) << r.wall_time << " s]\n";
  os.unsetf(std::ios::floatfield);
  if (!r.instance.empty() || !r.constraints.empty()) {
    os << "  instance:";
    for (const auto& [k, v] : r.instance) os << " " << k << "=" << v;
    for (const auto& c : r.constraints) os << " " << c;
    os << "\n";
  }
  if (r.witness_state) {
    os << (r.command == "oracle" ? "  vfs state:" : "  witness:");
    for (std::size_t i = 0; i < r.state_fields.size(); ++i) os << " " << r.state_fields[i] << "=" << r.witness_state->values[i];
    os << "\n";
  }
  if (r.plan) {
    os << "  plan (" << r.plan->steps.size() << " steps" << (r.plan->replayed ? ", replay-verified" : "") << "):\n";
    os << "    start " << format_state(r.plan->start) << "\n";
    for (std::size_t k = 0; k < r.plan->steps.size(); ++k) {
      os << "    " << std::setw(3) << k + 1 << ":";
      for (const auto& p : r.param_fields) os << " " << p << "=" << r.plan->steps[k].at(p);
      if (k < r.plan->states.size()) os << "  -> " << format_state(r.plan->states[k]);
      os << "\n";
    }
  }
  if (r.oracle) os << "  oracle: " << *r.oracle << "\n";
  if (!r.error.empty()) os << "  error: " << r.error << "\n";
}

inline void emit_report(std::ostream& os, const RunReport& r, Format f) {
  if (f == Format::records) {
    os << to_json(r).dump() << "\n";
  } else {
    print_text(os, r);
  }
}

// ---------------------------------------------------------------------------
// Shared steps

inline Model load_model(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw CliError(exit_code::input_error, file.string() + ": file not found or unreadable");
  std::stringstream ss;
  ss << in.rdbuf();
  auto parsed = parse_model(ss.str());
  if (!parsed.ok()) {
    std::string msg;
    for (const auto& e : parsed.errors) msg += (msg.empty() ? "" : "\n") + format_error(e, file.string());
    throw CliError(exit_code::input_error, msg);
  }
  return std::move(*parsed.model);
}

struct ResolvedInstance {
  std::map<std::string, std::int64_t, std::less<>> fixing;
  std::vector<Expr> extra;
  std::vector<std::string> texts;  // constraint spellings for reports
};

/// Assignments to instance symbols become instance fixings; assignments to
/// state fields constrain the initial state.
inline ResolvedInstance resolve_instance(const Model& model, const InstanceSpec& spec) {
  ResolvedInstance out;
  for (const auto& [name, value] : spec.assignments) {
    const bool is_instance =
        std::find(model.instance_symbols.begin(), model.instance_symbols.end(), name) != model.instance_symbols.end();
    if (is_instance) {
      out.fixing[name] = value;
    } else if (model.state_index(name)) {
      Expr e = make(Op::eq, {sym(name), lit(value)});
      out.texts.push_back(to_dsl(e));
      out.extra.push_back(std::move(e));
    } else {
      throw CliError(exit_code::input_error,
                     "'" + name + "' is neither an instance symbol nor a state field of " + model.name);
    }
  }
  for (const auto& text : spec.constraints) {
    std::vector<ParseError> errors;
    auto e = parse_expr(text, model, errors);
    if (!e) {
      throw CliError(exit_code::input_error,
                     "--constrain '" + text + "': " + (errors.empty() ? std::string("invalid") : errors[0].message));
    }
    out.texts.push_back(to_dsl(*e));
    out.extra.push_back(std::move(*e));
  }
  return out;
}

inline RunReport base_report(std::string command, const Model& model, const std::filesystem::path& file,
                             const ResolvedInstance& inst) {
  RunReport r;
  r.command = std::move(command);
  r.model = model.name;
  r.file = file.string();
  for (const auto& [k, v] : inst.fixing) r.instance[k] = v;
  r.constraints = inst.texts;
  r.state_fields = model.state_fields;
  r.param_fields = model.param_names();
  return r;
}

inline void fill_verdict(RunReport& r, const Verdict& v) {
  r.outcome = std::string(to_string(v.outcome));
  r.wall_time += v.wall_time;
  r.solver = v.solver_identity;
  r.stats = v.stats;
  if (v.outcome == Outcome::unknown && !v.reason.empty()) r.note = v.reason;
  r.exit = exit_code_for(v.outcome);
}

/// Runs the primary solver and, when configured, the second one on the same
/// script; decided outcomes must match.
inline Verdict solve(const SmtScript& script, const Options& opts) {
  Verdict v = run_solver(script, opts.solver);
  if (opts.solver2) {
    SolverConfig second = opts.solver;
    second.executable_path = *opts.solver2;
    check_agreement(v, run_solver(script, second));
  }
  return v;
}

/// Replays a PFS witness and records the plan. Throws CliError when the
/// witness does not replay to a valid final state.
inline PlanReport replay_witness(const Model& model, const Witness& w, const SmtScript& script) {
  const WitnessPlan wp = plan_from_witness(w, script);
  PlanReport pr;
  pr.start = wp.start;
  pr.steps = wp.plan.steps;
  ConcreteState s = wp.start;
  for (std::size_t k = 0; k < wp.plan.steps.size(); ++k) {
    auto r = replay_plan(model, wp.instance, s, Plan{{wp.plan.steps[k]}});
    if (auto* f = std::get_if<ReplayFailure>(&r)) {
      throw CliError(exit_code::check_failed,
                     "witness plan fails at step " + std::to_string(k + 1) + ": " + std::string(to_string(f->reason)));
    }
    s = std::get<ConcreteState>(r);
    pr.states.push_back(s);
  }
  const auto b = bind_state(model, wp.start, {}, wp.instance.bindings);
  if (!eval_bool(model.initial_pred, b) || !eval_bool(model.valid_pred, b)) {
    throw CliError(exit_code::check_failed, "witness start state " + format_state(wp.start) + " is not valid and initial");
  }
  if (!is_final(model, wp.instance, s)) {
    throw CliError(exit_code::check_failed, "witness plan ends in non-final state " + format_state(s));
  }
  pr.replayed = true;
  return pr;
}

/// Runs `body`, mapping every library error to a report with a tool-error
/// exit code.
template <typename F>
RunReport guarded(RunReport r, F&& body) {
  try {
    body(r);
  } catch (const CliError& e) {
    r.outcome = "error";
    r.error = e.what();
    r.exit = e.code();
  } catch (const SolverError& e) {
    r.outcome = "error";
    r.error = std::string(to_string(e.kind())) + ": " + e.what();
    if (!e.diagnostics().empty()) r.error += "\n" + e.diagnostics();
    r.exit = e.kind() == SolverError::Kind::disagreement ? exit_code::disagreement : exit_code::solver_error;
  } catch (const EncodingError& e) {
    r.outcome = "error";
    r.error = std::string("encoding: ") + e.what();
    r.exit = exit_code::input_error;
  } catch (const WitnessError& e) {
    r.outcome = "error";
    r.error = std::string("witness: ") + e.what();
    r.exit = exit_code::check_failed;
  } catch (const OracleError& e) {
    r.outcome = "error";
    r.error = std::string(to_string(e.kind())) + ": " + e.what();
    r.exit = exit_code::check_failed;
  } catch (const EvalError& e) {
    r.outcome = "error";
    r.error = std::string("evaluation: ") + e.what();
    r.exit = exit_code::check_failed;
  }
  return r;
}

inline EncodingConfig encoding_config(const Options& opts, const ResolvedInstance& inst) {
  EncodingConfig cfg;
  cfg.property = opts.property;
  cfg.instance_fixing = inst.fixing;
  cfg.extra_constraints = inst.extra;
  if (opts.property == Property::pfs) {
    cfg.pfs_mode = opts.mode.value_or(PfsMode::unrolled);
    cfg.depth_bound = opts.depth.value_or(default_depth_bound);
  } else {
    cfg.pfs_mode = opts.mode;  // rejected by the encoder
  }
  return cfg;
}

inline void require_full_instance(const Model& model, const ResolvedInstance& inst) {
  for (const auto& s : model.instance_symbols) {
    if (!inst.fixing.contains(s)) throw CliError(exit_code::input_error, "instance symbol '" + s + "' must be fixed");
  }
}

inline Instance oracle_instance(const ResolvedInstance& inst) {
  Instance out;
  for (const auto& [k, v] : inst.fixing) out.bindings[k] = v;
  out.pins = inst.extra;
  return out;
}

// ---------------------------------------------------------------------------
// Commands

/// Encodes, solves and, on sat, decodes and checks the witness.
inline RunReport check_model(const Model& model, const std::filesystem::path& file, const Options& opts) {
  RunReport r;
  r.command = "check";
  r.model = model.name;
  r.file = file.string();
  return guarded(std::move(r), [&](RunReport& r) {
    const auto inst = resolve_instance(model, opts.instance);
    r = base_report("check", model, file, inst);
    r.property = std::string(to_string(opts.property));
    const auto cfg = encoding_config(opts, inst);
    if (cfg.property == Property::pfs) {
      r.mode = std::string(to_string(*cfg.pfs_mode));
      r.depth = cfg.depth_bound;
    }
    const SmtScript script = encode(model, cfg);
    const Verdict v = solve(script, opts);
    fill_verdict(r, v);
    if (v.outcome == Outcome::sat) {
      const Witness w = parse_witness(v, script);
      if (cfg.property == Property::vfs) {
        const ConcreteState s = witness_state(w, model.state_fields, 0);
        r.witness_state = s;
        const Instance wi{witness_instance(w), {}};
        if (!is_valid(model, wi, s) || !is_final(model, wi, s)) {
          throw CliError(exit_code::check_failed, "witness state " + format_state(s) + " is not valid and final");
        }
      } else {
        r.plan = replay_witness(model, w, script);
      }
    }
    if (opts.cross_check && cfg.property == Property::pfs && v.outcome != Outcome::unknown) {
      require_full_instance(model, inst);
      BfsOptions bo;
      bo.node_cap = opts.node_cap;
      const auto res = bfs_reachability(model, oracle_instance(inst), *cfg.depth_bound, bo);
      const bool found = std::holds_alternative<PlanFound>(res);
      r.oracle = found ? "plan of length " + std::to_string(std::get<PlanFound>(res).plan.length())
                       : "no plan within depth " + std::to_string(*cfg.depth_bound);
      if (found != (v.outcome == Outcome::sat)) {
        throw CliError(exit_code::disagreement, "solver says " + r.outcome + " but the oracle finds " + *r.oracle);
      }
    }
  });
}

inline RunReport cmd_check(const std::filesystem::path& file, const Options& opts) {
  try {
    return check_model(load_model(file), file, opts);
  } catch (const CliError& e) {
    RunReport r;
    r.command = "check";
    r.file = file.string();
    r.property = std::string(to_string(opts.property));
    r.outcome = "error";
    r.error = e.what();
    r.exit = e.code();
    return r;
  }
}

/// Smallest-depth plan by iterating unrolled PFS from depth 0 upwards.
inline RunReport cmd_plan(const std::filesystem::path& file, const Options& opts) {
  RunReport r;
  r.command = "plan";
  r.file = file.string();
  r.property = "pfs";
  return guarded(std::move(r), [&](RunReport& r) {
    const Model model = load_model(file);
    const auto inst = resolve_instance(model, opts.instance);
    require_full_instance(model, inst);
    r = base_report("plan", model, file, inst);
    r.property = "pfs";
    r.mode = "unrolled";
    if (opts.max_depth < 0) throw CliError(exit_code::input_error, "--max-depth must be non-negative");

    Options step = opts;
    step.property = Property::pfs;
    step.mode = PfsMode::unrolled;
    bool saw_unknown = false;
    for (int d = 0; d <= opts.max_depth; ++d) {
      step.depth = d;
      const auto cfg = encoding_config(step, inst);
      const SmtScript script = encode(model, cfg);
      const Verdict v = solve(script, step);
      fill_verdict(r, v);
      r.depth = d;
      if (v.outcome == Outcome::unknown) {
        saw_unknown = true;
        continue;
      }
      if (v.outcome == Outcome::unsat) continue;
      r.plan = replay_witness(model, parse_witness(v, script), script);
      if (saw_unknown) r.note = "a smaller depth was undecided; plan may not be minimal";
      return;
    }
    r.depth = opts.max_depth;
    if (saw_unknown) {
      r.outcome = "unknown";
      r.note = "some depths were undecided";
      r.exit = exit_code::unknown;
    } else {
      r.outcome = "unsat";
      r.note = "unsat-within-bound " + std::to_string(opts.max_depth);
      r.exit = exit_code::unsat;
    }
  });
}

namespace detail {

/// Default VFS enumeration range: 0 up to the largest number the instance
/// mentions, and at least 3.
inline IntRange default_field_range(const ResolvedInstance& inst) {
  std::int64_t hi = 3;
  for (const auto& [k, v] : inst.fixing) hi = std::max(hi, v);
  for (const auto& e : inst.extra) {
    std::function<void(const Expr&)> walk = [&](const Expr& x) {
      if (x.op == Op::literal) hi = std::max(hi, x.value);
      for (const auto& a : x.args) walk(a);
    };
    walk(e);
  }
  return IntRange{0, hi};
}

struct PriorRecord {
  std::string property;
  std::string outcome;
  std::optional<int> depth;
};

inline std::vector<PriorRecord> read_records(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw CliError(exit_code::input_error, file.string() + ": cannot read prior report");
  std::vector<PriorRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("property") || !j.contains("outcome")) {
      throw CliError(exit_code::input_error, file.string() + ": not a records-format report line: " + line.substr(0, 80));
    }
    PriorRecord rec;
    rec.property = j["property"].get<std::string>();
    rec.outcome = j["outcome"].get<std::string>();
    if (j.contains("depth")) rec.depth = j["depth"].get<int>();
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace detail

/// Ground truth by search: BFS for PFS and bounded enumeration for VFS.
/// Exit code follows the PFS answer (0 plan found, 1 none).
inline RunReport cmd_oracle(const std::filesystem::path& file, const Options& opts) {
  RunReport r;
  r.command = "oracle";
  r.file = file.string();
  r.property = "pfs";
  return guarded(std::move(r), [&](RunReport& r) {
    const Model model = load_model(file);
    const auto resolved = resolve_instance(model, opts.instance);
    require_full_instance(model, resolved);
    r = base_report("oracle", model, file, resolved);
    r.property = "pfs";
    r.mode = "bfs";
    const int depth = opts.depth.value_or(opts.max_depth);
    if (depth < 0) throw CliError(exit_code::input_error, "depth must be non-negative");
    r.depth = depth;
    const Instance inst = oracle_instance(resolved);

    const auto t0 = std::chrono::steady_clock::now();
    const IntRange fr = opts.field_range.value_or(detail::default_field_range(resolved));
    const auto vfs = enumerate_vfs(model, inst, StateDomain(model.state_fields.size(), fr), opts.node_cap);
    BfsOptions bo;
    bo.node_cap = opts.node_cap;
    const auto res = bfs_reachability(model, inst, depth, bo);
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const std::string range = std::to_string(fr.lo) + ".." + std::to_string(fr.hi);
    std::string summary = vfs ? "VFS found " + format_state(*vfs) : "VFS none in fields " + range;
    if (const auto* p = std::get_if<PlanFound>(&res)) {
      r.outcome = "sat";
      r.exit = exit_code::sat;
      PlanReport pr;
      pr.start = p->start;
      pr.steps = p->plan.steps;
      ConcreteState s = p->start;
      for (const auto& st : p->plan.steps) {
        s = std::get<ConcreteState>(replay_plan(model, inst, s, Plan{{st}}));
        pr.states.push_back(s);
      }
      pr.replayed = is_final(model, inst, s);
      r.plan = pr;
      summary += "; plan length " + std::to_string(p->plan.length()) + " (" + std::to_string(p->explored) + " states)";
    } else {
      const auto& ex = std::get<Exhausted>(res);
      r.outcome = "unsat";
      r.exit = exit_code::unsat;
      r.note = ex.space_exhausted ? "state space exhausted" : "no plan within depth " + std::to_string(depth);
      summary += "; no plan (" + std::to_string(ex.explored) + " states)";
    }
    if (vfs) r.witness_state = *vfs;
    r.oracle = summary;

    if (opts.compare) {
      const bool space_done = std::holds_alternative<Exhausted>(res) && std::get<Exhausted>(res).space_exhausted;
      for (const auto& rec : detail::read_records(*opts.compare)) {
        if (rec.outcome != "sat" && rec.outcome != "unsat") continue;
        std::string conflict;
        if (rec.property == "vfs") {
          if (rec.outcome == "unsat" && vfs) conflict = "prior vfs unsat, but the oracle found " + format_state(*vfs);
        } else if (rec.property == "pfs" && rec.depth) {
          std::optional<bool> truth;
          if (const auto* p = std::get_if<PlanFound>(&res)) {
            truth = static_cast<int>(p->plan.length()) <= *rec.depth;  // BFS length is minimal
          } else if (space_done || *rec.depth <= depth) {
            truth = false;
          }
          if (truth && *truth != (rec.outcome == "sat")) {
            conflict = "prior pfs depth " + std::to_string(*rec.depth) + " " + rec.outcome + " contradicts the oracle";
          }
        }
        if (!conflict.empty()) throw CliError(exit_code::disagreement, conflict);
      }
    }
  });
}

/// Prints the generated script without running a solver.
inline int cmd_emit(const std::filesystem::path& file, const Options& opts, std::ostream& out, std::ostream& err) {
  try {
    const Model model = load_model(file);
    const auto inst = resolve_instance(model, opts.instance);
    out << encode(model, encoding_config(opts, inst)).text;
    return exit_code::sat;
  } catch (const CliError& e) {
    err << "error: " << e.what() << "\n";
    return e.code();
  } catch (const EncodingError& e) {
    err << "error: encoding: " << e.what() << "\n";
    return exit_code::input_error;
  }
}

inline int cmd_doctor(const Options& opts, std::ostream& out, std::ostream& err) {
  out << "solver: " << opts.solver.executable_path << "\n";
  if (auto p = find_executable(opts.solver.executable_path)) out << "path: " << p->string() << "\n";
  try {
    out << "version: " << probe_solver(opts.solver) << "\n";
  } catch (const SolverError& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code::solver_error;
  }
  return exit_code::sat;
}

// ---------------------------------------------------------------------------
// Bench

struct BenchRow {
  std::string file;
  std::vector<std::string> constraints;
  std::map<std::string, std::int64_t> fix;
  std::map<std::string, std::string> expect;  // property -> outcome
};

struct BenchManifest {
  int depth = default_depth_bound;
  std::vector<std::string> constraints{"(< 2 nm)", "(< 2 nc)", "(< 2 bcap)"};
  std::vector<BenchRow> rows;
  bool from_file = false;
};

inline constexpr std::string_view bench_manifest_name = "bench.json";

/// Reads <dir>/bench.json when present, otherwise lists every .tsm file in
/// the directory (sorted) with the default constraints.
inline BenchManifest load_bench_manifest(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw CliError(exit_code::input_error, dir.string() + ": not a directory");
  BenchManifest m;
  const fs::path manifest = dir / std::string(bench_manifest_name);
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw CliError(exit_code::input_error, manifest.string() + ": invalid JSON");
    try {
      m.from_file = true;
      if (j.contains("depth")) m.depth = j["depth"].get<int>();
      if (j.contains("constraints")) m.constraints = j["constraints"].get<std::vector<std::string>>();
      for (const auto& row : j.value("rows", nlohmann::json::array())) {
        BenchRow br;
        br.file = row.at("model").get<std::string>();
        br.constraints = row.value("constraints", m.constraints);
        if (row.contains("fix")) br.fix = row["fix"].get<std::map<std::string, std::int64_t>>();
        if (row.contains("expect")) br.expect = row["expect"].get<std::map<std::string, std::string>>();
        m.rows.push_back(std::move(br));
      }
    } catch (const nlohmann::json::exception& e) {
      throw CliError(exit_code::input_error, manifest.string() + ": " + e.what());
    }
    return m;
  }
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".tsm") files.push_back(entry.path().filename().string());
  }
  std::sort(files.begin(), files.end());
  for (auto& f : files) m.rows.push_back(BenchRow{std::move(f), m.constraints, {}, {}});
  return m;
}

struct BenchResult {
  std::vector<RunReport> reports;  // two per row: vfs then pfs
  int exit = exit_code::sat;
};

/// Runs VFS and PFS for every manifest row, up to opts.jobs queries at a
/// time. Reports keep manifest order.
inline BenchResult cmd_bench(const std::filesystem::path& dir, const Options& opts) {
  const BenchManifest m = load_bench_manifest(dir);
  struct Job {
    std::size_t row;
    Property property;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    jobs.push_back({i, Property::vfs});
    jobs.push_back({i, Property::pfs});
  }
  BenchResult result;
  result.reports.resize(jobs.size());

  auto run_job = [&](const Job& job) {
    const BenchRow& row = m.rows[job.row];
    const auto file = dir / row.file;
    Options o = opts;
    o.property = job.property;
    o.mode = job.property == Property::pfs ? std::optional(opts.mode.value_or(PfsMode::unrolled)) : std::nullopt;
    o.depth = job.property == Property::pfs ? std::optional(opts.depth.value_or(m.depth)) : std::nullopt;
    o.instance = InstanceSpec{};
    for (const auto& [k, v] : row.fix) o.instance.assignments.emplace_back(k, v);
    RunReport r;
    try {
      const Model model = load_model(file);
      for (const auto& c : row.constraints) {
        // Without a manifest, default constraints apply only where the
        // model has the symbols they mention.
        if (!m.from_file) {
          std::vector<ParseError> ignored;
          if (!parse_expr(c, model, ignored)) continue;
        }
        o.instance.constraints.push_back(c);
      }
      r = check_model(model, file, o);
    } catch (const CliError& e) {
      r.command = "check";
      r.file = file.string();
      r.model = row.file;
      r.outcome = "error";
      r.error = e.what();
      r.exit = e.code();
    }
    r.command = "bench";
    r.property = std::string(to_string(job.property));
    if (auto it = row.expect.find(r.property); it != row.expect.end()) r.expected = it->second;
    return r;
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) result.reports[i] = run_job(jobs[i]);
  };
  const int n = std::max(1, std::min<int>(opts.jobs, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (const auto& r : result.reports) {
    if (r.outcome == "error") {
      result.exit = std::max(result.exit, exit_code::input_error);
    } else if (r.expected && *r.expected != r.outcome && r.exit != exit_code::unknown) {
      result.exit = exit_code::bench_mismatch;
    }
  }
  if (result.exit == exit_code::sat) {
    for (const auto& r : result.reports) {
      if (r.outcome == "unknown") result.exit = exit_code::unknown;
    }
  }
  return result;
}

inline void print_bench_table(std::ostream& os, const BenchResult& b) {
  os << std::left << std::setw(14) << "model" << std::setw(9) << "VFS" << std::setw(11) << "time (s)" << std::setw(9)
     << "PFS" << std::setw(11) << "time (s)" << "expected\n";
  for (std::size_t i = 0; i + 1 < b.reports.size(); i += 2) {
    const auto& v = b.reports[i];
    const auto& p = b.reports[i + 1];
    auto time = [](const RunReport& r) {
      std::ostringstream ss;
      ss << std::fixed << std::setprecision(3) << r.wall_time;
      return ss.str();
    };
    std::string expected = v.expected.value_or("-") + "/" + p.expected.value_or("-");
    const bool match = (!v.expected || *v.expected == v.outcome) && (!p.expected || *p.expected == p.outcome);
    if (v.expected || p.expected) expected += match ? "  ok" : "  MISMATCH";
    os << std::setw(14) << (v.model.empty() ? p.model : v.model) << std::setw(9) << v.outcome << std::setw(11) << time(v)
       << std::setw(9) << p.outcome << std::setw(11) << time(p) << expected << "\n";
    for (const auto* r : {&v, &p}) {
      if (!r->error.empty()) os << "  " << r->property << " error: " << r->error << "\n";
    }
  }
  os << std::right;
}

}  // namespace modelgate::cli
