// modelgate: check transition-system models with an SMT solver.
//
//   modelgate check  MODEL.tsm --property {vfs,pfs} [--mode M] [--depth N]
//   modelgate plan   MODEL.tsm --nm 3 --nc 3 --bcap 2 [--max-depth N]
//   modelgate oracle MODEL.tsm --nm 3 --nc 3 --bcap 2 [--depth N]
//   modelgate bench  CORPUS_DIR [--jobs N]
//   modelgate emit   MODEL.tsm --property pfs --mode recursive
//   modelgate doctor
//
// Exit codes: 0 sat, 1 unsat, 2 unknown, 3 input error, 4 solver error,
// 5 witness/replay/oracle failure, 6 disagreement, 7 bench mismatch.

#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "modelgate/cli.hpp"

namespace mg = modelgate;
namespace cli = modelgate::cli;

namespace {

struct Flags {
  cli::Options opts;
  std::string target;
  std::vector<std::string> fixes;
  std::optional<std::int64_t> nm, nc, bcap;
  std::string field_range;
  std::string compare;
  std::string solver;
  std::string solver2;
  std::string property;
  std::string mode;
  std::string format;
  double timeout = 300.0;
  bool keep_scripts = false;
};

const std::map<std::string, mg::Property> property_names{{"vfs", mg::Property::vfs}, {"pfs", mg::Property::pfs}};
const std::map<std::string, mg::PfsMode> mode_names{{"recursive", mg::PfsMode::recursive},
                                                    {"unrolled", mg::PfsMode::unrolled}};
const std::map<std::string, cli::Format> format_names{{"text", cli::Format::text}, {"records", cli::Format::records}};

void add_instance_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--nm", f.nm, "Number of missionaries (corpus models)");
  sub->add_option("--nc", f.nc, "Number of cannibals (corpus models)");
  sub->add_option("--bcap", f.bcap, "Boat capacity (corpus models)");
  sub->add_option("--fix", f.fixes, "Fix an instance symbol or initial state field: NAME=VALUE")->type_name("NAME=VALUE");
  sub->add_option("--constrain", f.opts.instance.constraints, "Extra constraint, e.g. '(< 2 nm)'")->type_name("EXPR");
}

void add_solver_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--solver", f.solver, "Solver executable (default $MODELGATE_SOLVER or z3)");
  sub->add_option("--solver2", f.solver2, "Second solver; decided verdicts must agree");
  sub->add_option("--timeout", f.timeout, "Per-query timeout in seconds")->check(CLI::PositiveNumber);
  sub->add_flag("--keep-scripts", f.keep_scripts, "Keep generated scripts in the temp directory");
  sub->add_option("--format", f.format, "Output format: text or records")->check(CLI::IsMember(format_names));
}

void add_encoding_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--property", f.property, "Property to check: vfs or pfs")->check(CLI::IsMember(property_names));
  sub->add_option("--mode", f.mode, "PFS encoding: unrolled or recursive")->check(CLI::IsMember(mode_names));
  sub->add_option("--depth", f.opts.depth, "PFS depth bound (default 100)")->check(CLI::NonNegativeNumber);
}

/// Folds the sugar flags into the options; returns an error message or "".
std::string finish(Flags& f) {
  auto& a = f.opts.instance.assignments;
  if (f.nm) a.emplace_back("nm", *f.nm);
  if (f.nc) a.emplace_back("nc", *f.nc);
  if (f.bcap) a.emplace_back("bcap", *f.bcap);
  for (const auto& fix : f.fixes) {
    const auto eq = fix.find('=');
    if (eq == std::string::npos || eq == 0) return "--fix expects NAME=VALUE, got '" + fix + "'";
    try {
      std::size_t used = 0;
      const std::string value = fix.substr(eq + 1);
      const long long v = std::stoll(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      a.emplace_back(fix.substr(0, eq), v);
    } catch (const std::exception&) {
      return "--fix value is not an integer: '" + fix + "'";
    }
  }
  if (!f.field_range.empty()) {
    const auto dots = f.field_range.find("..");
    try {
      if (dots == std::string::npos) throw std::invalid_argument(f.field_range);
      f.opts.field_range = mg::IntRange{std::stoll(f.field_range.substr(0, dots)), std::stoll(f.field_range.substr(dots + 2))};
    } catch (const std::exception&) {
      return "--field-range expects LO..HI, got '" + f.field_range + "'";
    }
  }
  if (!f.property.empty()) f.opts.property = property_names.at(f.property);
  if (!f.mode.empty()) f.opts.mode = mode_names.at(f.mode);
  if (!f.format.empty()) f.opts.format = format_names.at(f.format);
  if (!f.compare.empty()) f.opts.compare = f.compare;
  if (!f.solver.empty()) f.opts.solver.executable_path = f.solver;
  if (!f.solver2.empty()) f.opts.solver2 = f.solver2;
  f.opts.solver.timeout_seconds = f.timeout;
  f.opts.solver.keep_scripts = f.keep_scripts;
  return "";
}

int report(const cli::RunReport& r, cli::Format format) {
  cli::emit_report(std::cout, r, format);
  if (!r.error.empty()) std::cerr << "error: " << r.error << "\n";
  return r.exit;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Check transition-system models for valid final states and paths to them"};
  app.require_subcommand(1);
  Flags f;

  auto* check = app.add_subcommand("check", "Encode, solve and decode one property");
  check->add_option("model", f.target, "Model file (.tsm)")->required();
  add_encoding_flags(check, f);
  add_instance_flags(check, f);
  add_solver_flags(check, f);
  check->add_flag("--cross-check", f.opts.cross_check, "Confirm PFS verdicts with the search oracle");
  check->add_option("--node-cap", f.opts.node_cap, "Oracle state budget");

  auto* plan = app.add_subcommand("plan", "Find a shortest plan by iterating the depth bound");
  plan->add_option("model", f.target, "Model file (.tsm)")->required();
  plan->add_option("--max-depth", f.opts.max_depth, "Largest depth to try")->check(CLI::NonNegativeNumber);
  add_instance_flags(plan, f);
  add_solver_flags(plan, f);

  auto* oracle = app.add_subcommand("oracle", "Answer both properties by exhaustive search");
  oracle->add_option("model", f.target, "Model file (.tsm)")->required();
  oracle->add_option("--depth", f.opts.depth, "Search depth (default 100)")->check(CLI::NonNegativeNumber);
  oracle->add_option("--node-cap", f.opts.node_cap, "State budget");
  oracle->add_option("--field-range", f.field_range, "VFS enumeration range for every state field")->type_name("LO..HI");
  oracle->add_option("--compare", f.compare, "Records-format report whose verdicts must agree");
  oracle->add_option("--format", f.format, "Output format: text or records")->check(CLI::IsMember(format_names));
  add_instance_flags(oracle, f);

  auto* bench = app.add_subcommand("bench", "Run the verdict matrix over a corpus directory");
  bench->add_option("corpus", f.target, "Directory with .tsm files and optional bench.json")->required();
  bench->add_option("--jobs", f.opts.jobs, "Concurrent queries")->check(CLI::PositiveNumber);
  bench->add_option("--mode", f.mode, "PFS encoding: unrolled or recursive")->check(CLI::IsMember(mode_names));
  bench->add_option("--depth", f.opts.depth, "PFS depth bound (default from manifest)")->check(CLI::NonNegativeNumber);
  add_solver_flags(bench, f);

  auto* emit = app.add_subcommand("emit", "Print the SMT-LIB script without solving");
  emit->add_option("model", f.target, "Model file (.tsm)")->required();
  add_encoding_flags(emit, f);
  add_instance_flags(emit, f);

  auto* doctor = app.add_subcommand("doctor", "Check that the solver can be launched");
  doctor->add_option("--solver", f.solver, "Solver executable (default $MODELGATE_SOLVER or z3)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : cli::exit_code::input_error;
  }
  if (const auto err = finish(f); !err.empty()) {
    std::cerr << "error: " << err << "\n";
    return cli::exit_code::input_error;
  }

  try {
    if (*check) return report(cli::cmd_check(f.target, f.opts), f.opts.format);
    if (*plan) return report(cli::cmd_plan(f.target, f.opts), f.opts.format);
    if (*oracle) return report(cli::cmd_oracle(f.target, f.opts), f.opts.format);
    if (*emit) return cli::cmd_emit(f.target, f.opts, std::cout, std::cerr);
    if (*doctor) return cli::cmd_doctor(f.opts, std::cout, std::cerr);
    if (*bench) {
      const auto result = cli::cmd_bench(f.target, f.opts);
      if (f.opts.format == cli::Format::records) {
        for (const auto& r : result.reports) cli::emit_report(std::cout, r, f.opts.format);
      } else {
        cli::print_bench_table(std::cout, result);
      }
      return result.exit;
    }
  } catch (const cli::CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code();
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return cli::exit_code::check_failed;
  }
  return cli::exit_code::input_error;
}
