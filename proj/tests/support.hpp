#pragma once

#include <gtest/gtest.h>
#include <sys/stat.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "modelgate/dsl.hpp"
#include "modelgate/model.hpp"
#include "modelgate/process.hpp"
#include "modelgate/solver.hpp"

namespace testing_support {

namespace fs = std::filesystem;
using namespace modelgate;

inline fs::path source_dir() { return fs::path(MODELGATE_SOURCE_DIR); }
inline fs::path corpus_dir() { return source_dir() / "corpus"; }
inline fs::path corpus_file(const std::string& name) { return corpus_dir() / (name + ".tsm"); }

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Model corpus_model(const std::string& name) {
  auto r = parse_model(slurp(corpus_file(name)));
  if (!r.ok()) throw std::runtime_error(name + ": " + format_error(r.errors.at(0)));
  return *r.model;
}

inline Model parse_or_die(std::string_view src) {
  auto r = parse_model(src);
  if (!r.ok()) throw std::runtime_error(format_error(r.errors.at(0)));
  return *r.model;
}

inline bool have_solver() { return find_executable(default_solver_path()).has_value(); }

#define REQUIRE_SOLVER() \
  if (!::testing_support::have_solver()) GTEST_SKIP() << "no SMT solver on PATH"

/// A scratch directory removed at scope exit.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "modelgate-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

  fs::path write(const std::string& name, const std::string& text, bool executable = false) const {
    const auto p = path_ / name;
    std::ofstream(p, std::ios::binary) << text;
    if (executable) fs::permissions(p, fs::perms::owner_all, fs::perm_options::add);
    return p;
  }

 private:
  fs::path path_;
};

/// Writes a /bin/sh script acting as a stand-in solver.
inline fs::path fake_solver(const TempDir& dir, const std::string& name, const std::string& body) {
  return dir.write(name, "#!/bin/sh\n" + body + "\n", true);
}

struct CliRun {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline CliRun run_cli(const std::vector<std::string>& args, double timeout = 600) {
  auto r = run_process(MODELGATE_CLI, args, timeout);
  return CliRun{r.exit_code, r.out, r.err};
}

// Random well-sorted expressions over integer symbols.
class ExprGen {
 public:
  ExprGen(std::vector<std::string> symbols, std::uint32_t seed) : symbols_(std::move(symbols)), rng_(seed) {}

  Expr integer(int depth) {
    const int pick = depth <= 0 ? pick_in(0, 1) : pick_in(0, 5);
    switch (pick) {
      case 0: return lit(pick_in(-3, 3));
      case 1: return sym(symbols_[pick_in(0, static_cast<int>(symbols_.size()) - 1)]);
      case 2: return make(Op::add, args(depth, 2, 3, [&](int d) { return integer(d); }));
      case 3: return make(Op::sub, args(depth, 2, 3, [&](int d) { return integer(d); }));
      case 4:
        if (pick_in(0, 1)) return make(Op::mul, args(depth, 2, 3, [&](int d) { return integer(d); }));
        return make(Op::neg, {integer(depth - 1)});
      default: return make(Op::ite, {boolean(depth - 1), integer(depth - 1), integer(depth - 1)});
    }
  }

  Expr boolean(int depth) {
    const int pick = depth <= 0 ? 0 : pick_in(0, 6);
    static constexpr Op cmp[] = {Op::eq, Op::neq, Op::lt, Op::le, Op::gt, Op::ge};
    switch (pick) {
      case 0: return pick_in(0, 3) == 0 ? truth(pick_in(0, 1) == 1) : make(cmp[pick_in(0, 5)], {integer(0), integer(0)});
      case 1: return make(cmp[pick_in(0, 5)], {integer(depth - 1), integer(depth - 1)});
      case 2: return make(Op::logical_and, args(depth, 1, 3, [&](int d) { return boolean(d); }));
      case 3: return make(Op::logical_or, args(depth, 1, 3, [&](int d) { return boolean(d); }));
      case 4: return make(Op::logical_not, {boolean(depth - 1)});
      case 5: return make(Op::implies, {boolean(depth - 1), boolean(depth - 1)});
      default: return make(Op::ite, {boolean(depth - 1), boolean(depth - 1), boolean(depth - 1)});
    }
  }

  ConcreteBinding binding(std::int64_t lo, std::int64_t hi) {
    ConcreteBinding b;
    for (const auto& s : symbols_) b[s] = std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_);
    return b;
  }

  int pick_in(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  std::mt19937& rng() { return rng_; }

 private:
  template <typename F>
  std::vector<Expr> args(int depth, int lo, int hi, F&& f) {
    std::vector<Expr> out;
    const int n = pick_in(lo, hi);
    for (int i = 0; i < n; ++i) out.push_back(f(depth - 1));
    return out;
  }

  std::vector<std::string> symbols_;
  std::mt19937 rng_;
};

}  // namespace testing_support
