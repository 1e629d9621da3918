#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "modelgate/encoder.hpp"
#include "modelgate/model.hpp"
#include "modelgate/solver.hpp"

namespace modelgate {

/// A concrete problem instance: values for every instance symbol plus
/// optional pins, boolean expressions over instance symbols and state fields
/// that the initial state must satisfy (e.g. `(= bcap 2)` when the capacity
/// is a state field).
struct Instance {
  ConcreteBinding bindings;
  std::vector<Expr> pins;
};

/// Builds the oracle instance a solver run with `config` describes.
inline Instance instance_from_config(const EncodingConfig& config) {
  Instance inst;
  for (const auto& [k, v] : config.instance_fixing) inst.bindings[k] = v;
  inst.pins = config.extra_constraints;
  return inst;
}

struct Plan {
  std::vector<ConcreteBinding> steps;

  std::size_t length() const { return steps.size(); }
};

inline std::string format_plan(const Plan& plan, const std::vector<std::string>& params) {
  std::string out;
  for (std::size_t k = 0; k < plan.steps.size(); ++k) {
    out += std::to_string(k + 1) + ": <";
    for (std::size_t j = 0; j < params.size(); ++j) {
      if (j) out += ",";
      auto it = plan.steps[k].find(params[j]);
      out += it == plan.steps[k].end() ? "?" : std::to_string(it->second);
    }
    out += ">\n";
  }
  return out;
}

class OracleError : public std::runtime_error {
 public:
  enum class Kind {
    instance_incomplete,
    initial_state_undetermined,
    param_domain_unbounded,
    state_space_budget_exceeded,
    domain_budget_exceeded,
  };

  OracleError(Kind kind, std::string message) : std::runtime_error(std::move(message)), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline std::string_view to_string(OracleError::Kind k) {
  switch (k) {
    case OracleError::Kind::instance_incomplete: return "instance-incomplete";
    case OracleError::Kind::initial_state_undetermined: return "initial-state-undetermined";
    case OracleError::Kind::param_domain_unbounded: return "param-domain-unbounded";
    case OracleError::Kind::state_space_budget_exceeded: return "state-space-budget-exceeded";
    case OracleError::Kind::domain_budget_exceeded: return "domain-budget-exceeded";
  }
  return "?";
}

struct IntRange {
  std::int64_t lo = 0;
  std::int64_t hi = -1;  // inclusive; empty when hi < lo
};

/// Per-parameter ranges supplied by the caller. Parameters without an entry
/// use their declared bounds; when both exist the intersection is used.
using ParamDomain = std::map<std::string, IntRange, std::less<>>;
using StateDomain = std::vector<IntRange>;  // one range per state field

inline constexpr std::size_t default_node_cap = 10'000'000;

struct BfsOptions {
  ParamDomain param_domain;
  std::optional<StateDomain> initial_domain;  // for models without a closed-form initial state
  std::size_t node_cap = default_node_cap;
};

struct PlanFound {
  ConcreteState start;
  Plan plan;
  ConcreteState end;
  std::size_t explored = 0;
};

struct Exhausted {
  int depth = 0;
  std::size_t explored = 0;
  bool space_exhausted = false;  // no reachable valid state is left unexpanded
};

using BfsResult = std::variant<PlanFound, Exhausted>;

namespace detail {

inline void require_instance(const Model& model, const Instance& inst) {
  std::string missing;
  for (const auto& s : model.instance_symbols) {
    if (!inst.bindings.contains(s)) missing += (missing.empty() ? "" : ", ") + s;
  }
  if (!missing.empty()) {
    throw OracleError(OracleError::Kind::instance_incomplete, "instance leaves unbound: " + missing);
  }
}

inline std::vector<Expr> initial_conditions(const Model& model, const Instance& inst) {
  std::vector<Expr> out{model.initial_pred};
  out.insert(out.end(), model.constraints.begin(), model.constraints.end());
  out.insert(out.end(), inst.pins.begin(), inst.pins.end());
  return out;
}

inline void flatten_conjuncts(const Expr& e, std::vector<const Expr*>& out) {
  if (e.op == Op::logical_and) {
    for (const auto& a : e.args) flatten_conjuncts(a, out);
  } else {
    out.push_back(&e);
  }
}

/// Solves top-level equalities `field = expr` (either orientation) where
/// expr is computable from the instance and fields already solved.
inline std::optional<ConcreteState> closed_form_initial(const Model& model, const Instance& inst,
                                                        const std::vector<Expr>& conditions) {
  std::vector<const Expr*> conj;
  for (const auto& c : conditions) flatten_conjuncts(c, conj);

  ConcreteBinding known = inst.bindings;
  std::set<std::string, std::less<>> solved;
  bool progress = true;
  while (progress && solved.size() < model.state_fields.size()) {
    progress = false;
    for (const Expr* c : conj) {
      if (c->op != Op::eq || c->args.size() != 2) continue;
      for (int side = 0; side < 2; ++side) {
        const Expr& lhs = c->args[side];
        const Expr& rhs = c->args[1 - side];
        if (lhs.op != Op::symbol || !model.state_index(lhs.name) || solved.contains(lhs.name)) continue;
        try {
          const auto v = eval_expr(rhs, known);
          if (!std::holds_alternative<std::int64_t>(v)) continue;
          known[lhs.name] = std::get<std::int64_t>(v);
          solved.insert(lhs.name);
          progress = true;
          break;
        } catch (const EvalError&) {
        }
      }
    }
  }
  if (solved.size() < model.state_fields.size()) return std::nullopt;
  ConcreteState s;
  for (const auto& f : model.state_fields) s.values.push_back(known.at(f));
  return s;
}

/// Visits every state of `domain` in lexicographic order (first field
/// outermost). Stops early when `fn` returns false.
inline void for_each_state(const StateDomain& domain, std::size_t budget,
                           const std::function<bool(const ConcreteState&)>& fn) {
  std::uint64_t total = 1;
  for (const auto& r : domain) {
    if (r.hi < r.lo) return;
    const auto width = static_cast<std::uint64_t>(r.hi - r.lo) + 1;
    if (width > budget || total > budget / width) {
      throw OracleError(OracleError::Kind::domain_budget_exceeded,
                        "state domain exceeds the budget of " + std::to_string(budget) + " states");
    }
    total *= width;
  }
  ConcreteState s;
  for (const auto& r : domain) s.values.push_back(r.lo);
  while (true) {
    if (!fn(s)) return;
    std::size_t i = domain.size();
    while (i > 0) {
      --i;
      if (s.values[i] < domain[i].hi) {
        ++s.values[i];
        break;
      }
      s.values[i] = domain[i].lo;
      if (i == 0) return;
    }
    if (domain.empty()) return;
  }
}

struct StateHash {
  std::size_t operator()(const std::vector<std::int64_t>& v) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (auto x : v) {
      h ^= static_cast<std::uint64_t>(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace detail

/// The initial state an instance determines. Uses the closed form when the
/// initial predicate, model constraints and pins fix every field through
/// equalities; otherwise enumerates `domain` and requires exactly one
/// candidate.
inline ConcreteState derive_initial_state(const Model& model, const Instance& inst,
                                          const std::optional<StateDomain>& domain = std::nullopt,
                                          std::size_t budget = default_node_cap) {
  detail::require_instance(model, inst);
  const auto conditions = detail::initial_conditions(model, inst);
  auto holds = [&](const ConcreteState& s) {
    const auto b = bind_state(model, s, {}, inst.bindings);
    for (const auto& c : conditions) {
      if (!eval_bool(c, b)) return false;
    }
    return true;
  };

  if (auto s = detail::closed_form_initial(model, inst, conditions)) {
    if (!holds(*s)) {
      throw OracleError(OracleError::Kind::initial_state_undetermined,
                        "the instance admits no initial state (closed form " + format_state(*s) + " fails)");
    }
    return *s;
  }
  if (!domain) {
    throw OracleError(OracleError::Kind::initial_state_undetermined,
                      "the initial predicate does not fix every state field; supply a state domain");
  }
  if (domain->size() != model.state_fields.size()) {
    throw OracleError(OracleError::Kind::initial_state_undetermined, "state domain has the wrong number of fields");
  }
  std::optional<ConcreteState> found;
  bool ambiguous = false;
  detail::for_each_state(*domain, budget, [&](const ConcreteState& s) {
    if (!holds(s)) return true;
    if (found) {
      ambiguous = true;
      return false;
    }
    found = s;
    return true;
  });
  if (!found || ambiguous) {
    throw OracleError(OracleError::Kind::initial_state_undetermined,
                      ambiguous ? "several initial states exist in the domain" : "no initial state exists in the domain");
  }
  return *found;
}

/// Breadth-first search over valid states from the instance's initial
/// state. Every parameter combination whose transition is enabled and whose
/// successor is valid is expanded; the first plan found is of minimal
/// length.
inline BfsResult bfs_reachability(const Model& model, const Instance& inst, int max_depth, const BfsOptions& opts = {}) {
  if (max_depth < 0) throw std::invalid_argument("max_depth must be non-negative");
  const ConcreteState start = derive_initial_state(model, inst, opts.initial_domain, opts.node_cap);

  const SlotLayout layout(model);
  const std::size_t nf = model.state_fields.size();
  const std::size_t np = model.param_fields.size();
  auto compile = [&](const Expr& e) { return CompiledExpr::compile(e, layout); };
  const auto valid = compile(model.valid_pred);
  const auto final = compile(model.final_pred);
  const auto guard = compile(model.guard);
  std::vector<CompiledExpr> next;
  for (const auto& f : model.state_fields) next.push_back(compile(*model.update_for(f)));

  struct Bound {
    std::optional<CompiledExpr> lo, hi;
    std::optional<IntRange> fixed;
  };
  std::vector<Bound> bounds(np);
  for (std::size_t j = 0; j < np; ++j) {
    const auto& p = model.param_fields[j];
    if (p.range) {
      bounds[j].lo = compile(p.range->lower);
      bounds[j].hi = compile(p.range->upper);
    }
    if (auto it = opts.param_domain.find(p.name); it != opts.param_domain.end()) bounds[j].fixed = it->second;
    if (!p.range && !bounds[j].fixed) {
      throw OracleError(OracleError::Kind::param_domain_unbounded,
                        "parameter '" + p.name + "' has neither declared bounds nor a supplied domain");
    }
  }

  std::vector<std::int64_t> slots(layout.size(), 0);
  for (const auto& i : model.instance_symbols) slots[*layout.find(i)] = inst.bindings.at(i);
  auto load_state = [&](const std::vector<std::int64_t>& s) { std::copy(s.begin(), s.end(), slots.begin()); };

  struct Node {
    std::vector<std::int64_t> state;
    std::size_t parent;
    std::vector<std::int64_t> params;
  };
  std::vector<Node> nodes;
  std::unordered_set<std::vector<std::int64_t>, detail::StateHash> visited;

  auto found_at = [&](std::size_t idx) {
    PlanFound r;
    r.start = start;
    r.end.values = nodes[idx].state;
    std::vector<std::size_t> chain;
    for (std::size_t i = idx; i != 0; i = nodes[i].parent) chain.push_back(i);
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      ConcreteBinding b;
      for (std::size_t j = 0; j < np; ++j) b[model.param_fields[j].name] = nodes[*it].params[j];
      r.plan.steps.push_back(std::move(b));
    }
    r.explored = nodes.size();
    return r;
  };

  load_state(start.values);
  if (!valid.run(slots)) return Exhausted{max_depth, 1, true};
  nodes.push_back(Node{start.values, 0, {}});
  visited.insert(start.values);
  if (final.run(slots)) return found_at(0);

  std::size_t layer_begin = 0;
  std::vector<std::int64_t> lo(np), hi(np), cur(np), succ(nf);
  for (int depth = 1; depth <= max_depth; ++depth) {
    const std::size_t layer_end = nodes.size();
    if (layer_begin == layer_end) return Exhausted{max_depth, nodes.size(), true};
    for (std::size_t idx = layer_begin; idx < layer_end; ++idx) {
      const std::vector<std::int64_t> state = nodes[idx].state;
      load_state(state);
      bool empty = false;
      for (std::size_t j = 0; j < np; ++j) {
        lo[j] = std::numeric_limits<std::int64_t>::min();
        hi[j] = std::numeric_limits<std::int64_t>::max();
        if (bounds[j].lo) {
          lo[j] = bounds[j].lo->run(slots);
          hi[j] = bounds[j].hi->run(slots);
        }
        if (bounds[j].fixed) {
          lo[j] = std::max(lo[j], bounds[j].fixed->lo);
          hi[j] = std::min(hi[j], bounds[j].fixed->hi);
        }
        if (hi[j] < lo[j]) empty = true;
      }
      if (empty) continue;
      cur = lo;
      while (true) {
        for (std::size_t j = 0; j < np; ++j) slots[nf + j] = cur[j];
        if (guard.run(slots)) {
          for (std::size_t i = 0; i < nf; ++i) succ[i] = next[i].run(slots);
          load_state(succ);
          if (valid.run(slots) && !visited.contains(succ)) {
            if (nodes.size() >= opts.node_cap) {
              throw OracleError(OracleError::Kind::state_space_budget_exceeded,
                                "more than " + std::to_string(opts.node_cap) + " states explored");
            }
            visited.insert(succ);
            nodes.push_back(Node{succ, idx, cur});
            if (final.run(slots)) return found_at(nodes.size() - 1);
          }
          load_state(state);
        }
        // Advance the parameter odometer (last parameter fastest).
        bool wrapped = true;
        for (std::size_t j = np; j-- > 0;) {
          if (cur[j] < hi[j]) {
            ++cur[j];
            wrapped = false;
            break;
          }
          cur[j] = lo[j];
        }
        if (wrapped) break;
      }
    }
    layer_begin = layer_end;
  }
  return Exhausted{max_depth, nodes.size(), layer_begin == nodes.size()};
}

/// The lexicographically first state of `domain` satisfying valid and
/// final together with the model constraints and the instance pins.
inline std::optional<ConcreteState> enumerate_vfs(const Model& model, const Instance& inst, const StateDomain& domain,
                                                  std::size_t budget = default_node_cap) {
  detail::require_instance(model, inst);
  if (domain.size() != model.state_fields.size()) {
    throw std::invalid_argument("state domain needs one range per state field");
  }
  std::vector<Expr> conditions{model.valid_pred, model.final_pred};
  conditions.insert(conditions.end(), model.constraints.begin(), model.constraints.end());
  conditions.insert(conditions.end(), inst.pins.begin(), inst.pins.end());
  const SlotLayout layout(model);
  std::vector<CompiledExpr> compiled;
  for (const auto& c : conditions) compiled.push_back(CompiledExpr::compile(c, layout));
  std::vector<std::int64_t> slots(layout.size(), 0);
  for (const auto& i : model.instance_symbols) slots[*layout.find(i)] = inst.bindings.at(i);

  std::optional<ConcreteState> found;
  detail::for_each_state(domain, budget, [&](const ConcreteState& s) {
    std::copy(s.values.begin(), s.values.end(), slots.begin());
    for (const auto& c : compiled) {
      if (!c.run(slots)) return true;
    }
    found = s;
    return false;
  });
  return found;
}

struct ReplayFailure {
  enum class Reason { guard_failed, invalid_state };

  std::size_t step = 0;
  Reason reason = Reason::guard_failed;
};

inline std::string_view to_string(ReplayFailure::Reason r) {
  return r == ReplayFailure::Reason::guard_failed ? "guard-failed" : "invalid-state";
}

using ReplayResult = std::variant<ConcreteState, ReplayFailure>;

/// Applies the plan step by step, checking validity after every step.
inline ReplayResult replay_plan(const Model& model, const Instance& inst, const ConcreteState& start, const Plan& plan) {
  ConcreteState s = start;
  for (std::size_t k = 0; k < plan.steps.size(); ++k) {
    auto next = apply_transition(model, s, plan.steps[k], inst.bindings);
    if (!next) return ReplayFailure{k, ReplayFailure::Reason::guard_failed};
    if (!eval_bool(model.valid_pred, bind_state(model, *next, {}, inst.bindings))) {
      return ReplayFailure{k, ReplayFailure::Reason::invalid_state};
    }
    s = std::move(*next);
  }
  return s;
}

inline bool is_final(const Model& model, const Instance& inst, const ConcreteState& s) {
  return eval_bool(model.final_pred, bind_state(model, s, {}, inst.bindings));
}

inline bool is_valid(const Model& model, const Instance& inst, const ConcreteState& s) {
  return eval_bool(model.valid_pred, bind_state(model, s, {}, inst.bindings));
}

struct WitnessPlan {
  Instance instance;  // instance symbols as the solver chose them
  ConcreteState start;
  Plan plan;
};

/// Reads the start state, instance and the first n parameter tuples out of
/// a PFS witness.
inline WitnessPlan plan_from_witness(const Witness& w, const SmtScript& script) {
  if (!w.step_count) throw WitnessError(WitnessError::Kind::missing_symbol, "witness has no step count");
  const auto n = *w.step_count;
  const int depth = script.config.depth_bound.value_or(0);
  if (n < 0 || n > depth) {
    throw WitnessError(WitnessError::Kind::range_error, "step count " + std::to_string(n) + " outside 0.." + std::to_string(depth));
  }
  WitnessPlan out;
  out.instance.bindings = witness_instance(w);
  out.instance.pins = script.config.extra_constraints;
  out.start = witness_state(w, script.state_fields, 0);
  for (int k = 0; k < n; ++k) out.plan.steps.push_back(witness_params(w, script.param_fields, k));
  return out;
}

}  // namespace modelgate
