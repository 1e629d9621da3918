// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Ground truth for the derived criteria is the BFS oracle.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "modelgate/cli.hpp"
#include "modelgate/dsl.hpp"
#include "modelgate/encoder.hpp"
#include "modelgate/oracle.hpp"
#include "modelgate/process.hpp"
#include "modelgate/solver.hpp"

using namespace modelgate;
namespace fs = std::filesystem;

namespace {

const fs::path source_dir{MODELGATE_SOURCE_DIR};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Model load(const std::string& name) {
  auto r = parse_model(slurp(source_dir / "corpus" / (name + ".tsm")));
  if (!r.ok()) throw std::runtime_error(name + ": " + format_error(r.errors.at(0)));
  return *r.model;
}

// Criterion number -> (passed, detail); printed in order at the end.
std::map<int, std::pair<bool, std::string>> results;

void report(int n, bool ok, const std::string& detail) {
  std::cerr << "criterion " << n << " done" << std::endl;
  results[n] = {ok, detail};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<Expr> instance_constraints() {
  return {make(Op::lt, {lit(2), sym("nm")}), make(Op::lt, {lit(2), sym("nc")}), make(Op::lt, {lit(2), sym("bcap")})};
}

EncodingConfig grid_config(int nm, int nc, int bcap, int depth, PfsMode mode) {
  EncodingConfig c;
  c.property = Property::pfs;
  c.pfs_mode = mode;
  c.depth_bound = depth;
  c.instance_fixing = {{"nm", nm}, {"nc", nc}};
  c.extra_constraints = {make(Op::eq, {sym("bcap"), lit(bcap)})};
  return c;
}

Instance oracle_instance(int nm, int nc, int bcap) {
  Instance inst;
  inst.bindings = {{"nm", nm}, {"nc", nc}};
  inst.pins = {make(Op::eq, {sym("bcap"), lit(bcap)})};
  return inst;
}

std::string name_of(Outcome o) { return std::string(to_string(o)); }

// Criteria 1 and 2 share the solver runs.
void verdict_matrix_and_witnesses() {
  struct Row {
    std::string model;
    std::map<std::string, std::int64_t, std::less<>> fixing;
    std::optional<std::int64_t> bcap;
    Outcome vfs, pfs;
  };
  const std::vector<Row> rows = {
      {"mc_model1", {}, std::nullopt, Outcome::sat, Outcome::sat},
      {"mc_model2", {}, std::nullopt, Outcome::unsat, Outcome::unsat},
      {"mc_model3", {{"nm", 3}, {"nc", 3}}, 3, Outcome::sat, Outcome::unsat},
  };
  bool matrix_ok = true, witnesses_ok = true;
  int witnesses = 0;
  double model3_pfs_time = 0.0;
  std::ostringstream detail, wdetail;
  SolverConfig solver;
  solver.timeout_seconds = 600;
  for (const auto& row : rows) {
    const Model m = load(row.model);
    for (Property p : {Property::vfs, Property::pfs}) {
      EncodingConfig c;
      c.property = p;
      if (p == Property::pfs) {
        c.pfs_mode = PfsMode::unrolled;
        c.depth_bound = 100;
      }
      c.instance_fixing = row.fixing;
      c.extra_constraints = instance_constraints();
      if (row.bcap) c.extra_constraints.push_back(make(Op::eq, {sym("bcap"), lit(*row.bcap)}));
      const SmtScript script = encode(m, c);
      Verdict v;
      try {
        v = run_solver(script, solver);
      } catch (const SolverError& e) {
        detail << row.model << " " << to_string(p) << " error: " << e.what() << "; ";
        matrix_ok = false;
        continue;
      }
      const Outcome want = p == Property::vfs ? row.vfs : row.pfs;
      detail << row.model << " " << to_string(p) << "=" << name_of(v.outcome) << " ";
      if (v.outcome != want) matrix_ok = false;
      if (row.model == "mc_model3" && p == Property::pfs) model3_pfs_time = v.wall_time;

      if (p == Property::vfs && v.outcome == Outcome::sat) {
        ++witnesses;
        try {
          const Witness w = parse_witness(v, script);
          const auto s = witness_state(w, m.state_fields, 0);
          const auto b = bind_state(m, s, {}, witness_instance(w));
          const bool ok = eval_bool(m.valid_pred, b) && eval_bool(m.final_pred, b);
          wdetail << row.model << " " << format_state(s) << (ok ? " valid+final; " : " NOT valid+final; ");
          witnesses_ok = witnesses_ok && ok;
        } catch (const std::exception& e) {
          wdetail << row.model << " decode failed: " << e.what() << "; ";
          witnesses_ok = false;
        }
      }
    }
  }
  const bool fast = model3_pfs_time > 0.0 && model3_pfs_time < 120.0;
  detail << "| mc_model3 pinned PFS " << std::fixed << std::setprecision(1) << model3_pfs_time << " s (limit 120 s)";
  report(1, matrix_ok && fast, detail.str());
  report(2, witnesses_ok && witnesses == 2, std::to_string(witnesses) + " sat VFS witnesses: " + wdetail.str());
}

struct Cell {
  int nm, nc, bcap, depth;
  bool oracle_sat = false;
  Outcome unrolled = Outcome::unknown;
  Outcome recursive = Outcome::unknown;
  std::string error;
};

// Criteria 3 and 6 share the grid.
void grid() {
  const auto t0 = std::chrono::steady_clock::now();
  const Model m = load("mc_model1");
  std::vector<Cell> cells;
  for (int nm = 1; nm <= 4; ++nm)
    for (int nc = 1; nc <= 4; ++nc)
      for (int bcap = 2; bcap <= 4; ++bcap) {
        // One BFS per instance gives the minimal plan length; depth d is
        // reachable exactly when that length is at most d.
        const auto r = bfs_reachability(m, oracle_instance(nm, nc, bcap), 12);
        const std::optional<std::size_t> shortest =
            std::holds_alternative<PlanFound>(r) ? std::optional(std::get<PlanFound>(r).plan.length()) : std::nullopt;
        for (int d = 0; d <= 12; ++d) {
          cells.push_back(Cell{nm, nc, bcap, d, shortest && *shortest <= static_cast<std::size_t>(d), Outcome::unknown, Outcome::unknown, {}});
        }
      }

  SolverConfig solver;
  solver.timeout_seconds = 60;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      Cell& c = cells[i];
      for (PfsMode mode : {PfsMode::unrolled, PfsMode::recursive}) {
        try {
          const auto v = run_solver(encode(m, grid_config(c.nm, c.nc, c.bcap, c.depth, mode)), solver);
          (mode == PfsMode::unrolled ? c.unrolled : c.recursive) = v.outcome;
        } catch (const std::exception& e) {
          c.error = e.what();
        }
      }
    }
  };
  const unsigned n = std::max(2u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  const double elapsed = seconds_since(t0);

  int disagree = 0, unknown = 0, errors = 0, decided_pairs = 0, mode_mismatch = 0;
  std::string first_problem;
  for (const auto& c : cells) {
    if (!c.error.empty()) {
      ++errors;
      if (first_problem.empty()) first_problem = "error: " + c.error;
      continue;
    }
    if (c.unrolled == Outcome::unknown) {
      ++unknown;
    } else if ((c.unrolled == Outcome::sat) != c.oracle_sat) {
      ++disagree;
      if (first_problem.empty()) {
        first_problem = "disagreement at " + std::to_string(c.nm) + "/" + std::to_string(c.nc) + "/" +
                        std::to_string(c.bcap) + " depth " + std::to_string(c.depth);
      }
    }
    if (c.unrolled != Outcome::unknown && c.recursive != Outcome::unknown) {
      ++decided_pairs;
      if (c.unrolled != c.recursive) ++mode_mismatch;
    }
  }
  const double unknown_share = static_cast<double>(unknown) / static_cast<double>(cells.size());
  std::ostringstream d3;
  d3 << cells.size() << " cells, " << disagree << " disagreements, " << unknown << " unknown ("
     << std::setprecision(3) << 100.0 * unknown_share << "% < 5%), " << errors << " errors, " << std::fixed
     << std::setprecision(0) << elapsed << " s for both encodings (budget 600 s)";
  if (!first_problem.empty()) d3 << "; first: " << first_problem;
  report(3, disagree == 0 && errors == 0 && unknown_share < 0.05 && elapsed < 600.0, d3.str());

  std::ostringstream d6;
  d6 << decided_pairs << " cells decided by both encodings, " << mode_mismatch << " verdict differences";
  report(6, mode_mismatch == 0 && errors == 0 && decided_pairs > 0, d6.str());
}

void minimal_plan() {
  constexpr std::size_t frozen_length = 11;
  const Model m = load("mc_model1");
  const auto bfs = bfs_reachability(m, oracle_instance(3, 3, 2), 30);
  const bool oracle_found = std::holds_alternative<PlanFound>(bfs);
  const std::size_t oracle_len = oracle_found ? std::get<PlanFound>(bfs).plan.length() : 0;

  cli::Options opts;
  opts.instance.assignments = {{"nm", 3}, {"nc", 3}, {"bcap", 2}};
  opts.max_depth = 30;
  const auto r = cli::cmd_plan(source_dir / "corpus" / "mc_model1.tsm", opts);
  const bool replayed = r.plan && r.plan->replayed;
  const std::size_t len = r.plan ? r.plan->steps.size() : 0;
  std::ostringstream d;
  d << "plan " << (r.plan ? std::to_string(len) : "none") << " steps" << (replayed ? " (replay-verified)" : "")
    << ", oracle minimum " << (oracle_found ? std::to_string(oracle_len) : "none") << ", frozen " << frozen_length;
  report(4, replayed && oracle_found && oracle_len == len && len == frozen_length, d.str());
}

void unsolvable_instance() {
  const Model m = load("mc_model1");
  const auto bfs = bfs_reachability(m, oracle_instance(4, 4, 2), 20);
  const bool exhausted = std::holds_alternative<Exhausted>(bfs) && std::get<Exhausted>(bfs).space_exhausted;
  int unsat = 0;
  std::string other;
  for (int d = 0; d <= 20; ++d) {
    try {
      const auto v = run_solver(encode(m, grid_config(4, 4, 2, d, PfsMode::unrolled)), SolverConfig{});
      if (v.outcome == Outcome::unsat) {
        ++unsat;
      } else if (other.empty()) {
        other = "depth " + std::to_string(d) + " " + name_of(v.outcome);
      }
    } catch (const std::exception& e) {
      if (other.empty()) other = e.what();
    }
  }
  std::ostringstream d;
  d << "BFS " << (exhausted ? "exhausted the reachable space" : "did not exhaust") << ", unrolled PFS unsat at " << unsat
    << "/21 depths";
  if (!other.empty()) d << "; " << other;
  report(5, exhausted && unsat == 21, d.str());
}

void determinism_and_goldens() {
  int checked = 0, mismatched = 0, unstable = 0;
  std::string first;
  for (const char* name : {"mc_model1", "mc_model2", "mc_model3"}) {
    const Model m = load(name);
    std::vector<std::pair<std::string, EncodingConfig>> cases;
    cases.emplace_back("vfs", EncodingConfig{});
    for (PfsMode mode : {PfsMode::unrolled, PfsMode::recursive}) {
      EncodingConfig c;
      c.property = Property::pfs;
      c.pfs_mode = mode;
      c.depth_bound = 4;
      cases.emplace_back(std::string("pfs-") + std::string(to_string(mode)), c);
    }
    for (const auto& [suffix, cfg] : cases) {
      const std::string a = encode(m, cfg).text;
      if (a != encode(load(name), cfg).text) ++unstable;
      const auto path = source_dir / "tests" / "golden" / (std::string(name) + "." + suffix + ".smt2");
      ++checked;
      if (!fs::exists(path) || slurp(path) != a) {
        ++mismatched;
        if (first.empty()) first = path.filename().string();
      }
    }
  }
  std::ostringstream d;
  d << checked << " snapshots (3 models x VFS + PFS in 2 modes; VFS has no mode), " << mismatched << " mismatched, "
    << unstable << " non-deterministic";
  if (!first.empty()) d << "; first mismatch " << first;
  report(7, mismatched == 0 && unstable == 0 && checked == 9, d.str());
}

void round_trip_and_fuzz() {
  int round_trip_failures = 0;
  std::vector<std::string> seeds;
  for (const char* name : {"mc_model1", "mc_model2", "mc_model3"}) {
    const Model m = load(name);
    const auto again = parse_model(serialize_model(m));
    if (!again.ok() || !(*again.model == m)) ++round_trip_failures;
    seeds.push_back(slurp(source_dir / "corpus" / (std::string(name) + ".tsm")));
  }
  std::mt19937 rng(424242u);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  const std::string alphabet = "() \n;\"-0123456789abnmcx=<>+*";
  int crashes = 0;
  std::size_t largest = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string input;
    if (i % 3 == 0) {
      input = seeds[pick(seeds.size())];
      for (int k = 0, edits = 1 + static_cast<int>(pick(6)); k < edits && !input.empty(); ++k) {
        input[pick(input.size())] = alphabet[pick(alphabet.size())];
      }
    } else if (i % 3 == 1) {
      for (std::size_t k = 0, n = pick(1024); k < n; ++k) input += static_cast<char>(pick(256));
    } else {
      const std::size_t n = i % 1000 == 2 ? (1u << 20) : pick(4096);
      while (input.size() < n) input += alphabet[pick(alphabet.size())];
    }
    largest = std::max(largest, input.size());
    try {
      const auto r = parse_model(input);
      if (!r.ok() && r.errors.empty()) ++crashes;
    } catch (...) {
      ++crashes;
    }
  }
  std::ostringstream d;
  d << "round trip failures " << round_trip_failures << "/3, 10000 fuzzed inputs (largest " << largest
    << " bytes), " << crashes << " crashes";
  report(8, round_trip_failures == 0 && crashes == 0 && largest <= (1u << 20), d.str());
}

void exit_codes() {
  char tmpl[] = "/tmp/modelgate-accept-XXXXXX";
  const fs::path dir = ::mkdtemp(tmpl);
  const fs::path unknown_solver = dir / "unknown-solver";
  std::ofstream(unknown_solver) << "#!/bin/sh\necho unknown\n";
  fs::permissions(unknown_solver, fs::perms::owner_all, fs::perm_options::add);
  const std::string m1 = (source_dir / "corpus" / "mc_model1.tsm").string();
  const std::string m2 = (source_dir / "corpus" / "mc_model2.tsm").string();
  auto code = [](std::vector<std::string> args) { return run_process(MODELGATE_CLI, args, 300).exit_code; };
  const int sat = code({"check", m1});
  const int unsat = code({"check", m2});
  const int unknown = code({"check", m1, "--solver", unknown_solver.string()});
  const int missing = code({"check", (dir / "absent.tsm").string()});
  const int bad_solver = code({"check", m1, "--solver", (dir / "absent-solver").string()});
  fs::remove_all(dir);
  std::ostringstream d;
  d << "sat->" << sat << " unsat->" << unsat << " unknown->" << unknown << " missing file->" << missing
    << " missing solver->" << bad_solver;
  report(9, sat == 0 && unsat == 1 && unknown == 2 && missing > 2 && bad_solver > 2, d.str());
}

template <typename F>
void guarded(int n, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    report(n, false, std::string("exception: ") + e.what());
  }
}

}  // namespace

int main() {
  if (!find_executable(default_solver_path())) {
    std::cout << "no SMT solver found; set MODELGATE_SOLVER or put z3 on PATH\n";
    return 1;
  }
  guarded(1, verdict_matrix_and_witnesses);
  guarded(3, grid);
  guarded(4, minimal_plan);
  guarded(5, unsolvable_instance);
  guarded(7, determinism_and_goldens);
  guarded(8, round_trip_and_fuzz);
  guarded(9, exit_codes);
  int failures = 0;
  for (int n = 1; n <= 9; ++n) {
    const auto it = results.find(n);
    const bool ok = it != results.end() && it->second.first;
    failures += !ok;
    std::cout << "criterion " << n << ": " << (ok ? "PASS" : "FAIL") << "  "
              << (it != results.end() ? it->second.second : "not run") << "\n";
  }
  std::cout << (failures == 0 ? "all criteria PASS" : std::to_string(failures) + " criteria FAIL") << std::endl;
  return failures == 0 ? 0 : 1;
}
