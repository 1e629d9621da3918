#include <gtest/gtest.h>

#include <cstdlib>

#include "modelgate/encoder.hpp"
#include "support.hpp"

using namespace modelgate;
using testing_support::corpus_model;

namespace {

EncodingConfig vfs() { return EncodingConfig{}; }

EncodingConfig pfs(PfsMode mode, int depth) {
  EncodingConfig c;
  c.property = Property::pfs;
  c.pfs_mode = mode;
  c.depth_bound = depth;
  return c;
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

struct GoldenCase {
  std::string model;
  std::string suffix;
  EncodingConfig config;
};

std::vector<GoldenCase> golden_cases() {
  std::vector<GoldenCase> out;
  for (const char* m : {"mc_model1", "mc_model2", "mc_model3"}) {
    out.push_back({m, "vfs", vfs()});
    out.push_back({m, "pfs-unrolled", pfs(PfsMode::unrolled, 4)});
    out.push_back({m, "pfs-recursive", pfs(PfsMode::recursive, 4)});
  }
  return out;
}

}  // namespace

TEST(Encoder, DeterministicAcrossRuns) {
  for (const auto& g : golden_cases()) {
    const Model m = corpus_model(g.model);
    EXPECT_EQ(encode(m, g.config).text, encode(corpus_model(g.model), g.config).text) << g.model << " " << g.suffix;
  }
}

TEST(Encoder, GoldenSnapshots) {
  const bool update = std::getenv("MODELGATE_UPDATE_GOLDEN") != nullptr;
  for (const auto& g : golden_cases()) {
    const auto path = testing_support::source_dir() / "tests" / "golden" / (g.model + "." + g.suffix + ".smt2");
    const std::string text = encode(corpus_model(g.model), g.config).text;
    if (update) std::ofstream(path, std::ios::binary) << text;
    ASSERT_TRUE(std::filesystem::exists(path)) << path;
    EXPECT_EQ(text, testing_support::slurp(path)) << "snapshot differs: " << path;
  }
}

TEST(Encoder, ScriptsAreWellFormed) {
  for (const auto& g : golden_cases()) {
    for (bool produce : {true, false}) {
      auto cfg = g.config;
      cfg.produce_model = produce;
      cfg.extra_constraints = {make(Op::lt, {lit(2), sym("nm")}), make(Op::eq, {sym("bcap"), lit(3)})};
      cfg.instance_fixing = {{"nc", 3}};
      const auto script = encode(corpus_model(g.model), cfg);
      EXPECT_TRUE(check_script(script).empty()) << g.model << " " << g.suffix << ": " << check_script(script)[0];
      EXPECT_EQ(script.text.ends_with("(check-sat)\n(get-model)\n"), produce);
      if (!produce) {
        EXPECT_TRUE(script.text.ends_with(")\n(check-sat)\n"));
      }
    }
  }
}

TEST(Encoder, CheckScriptCatchesDefects) {
  auto script = encode(corpus_model("mc_model1"), vfs());
  auto broken = script;
  broken.text.insert(0, "(");
  EXPECT_FALSE(check_script(broken).empty());
  broken = script;
  broken.symbol_map["ghost"] = {SymbolKind::state_field, "bcap", 9};
  EXPECT_FALSE(check_script(broken).empty());
  broken = script;
  broken.text += "(exit)\n";
  EXPECT_FALSE(check_script(broken).empty());
}

TEST(Encoder, VfsDeclaresOneConstantPerField) {
  const auto script = encode(corpus_model("mc_model1"), vfs());
  for (const char* f : {"bcap", "nm1", "nc1", "bp", "nm2", "nc2"}) {
    EXPECT_EQ(count(script.text, "(declare-const s0_" + std::string(f) + " Int)"), 1u) << f;
  }
  EXPECT_EQ(count(script.text, "(declare-const i_nm Int)"), 1u);
  EXPECT_NE(script.text.find("(set-logic QF_LIA)"), std::string::npos);
  EXPECT_EQ(script.symbol_map.at("s0_bp"), (SymbolEntry{SymbolKind::state_field, "bp", 0}));
  EXPECT_EQ(script.symbol_map.at("i_nc"), (SymbolEntry{SymbolKind::instance, "nc", 0}));
}

TEST(Encoder, VfsRejectsAModeAndPfsNeedsADepth) {
  auto cfg = vfs();
  cfg.pfs_mode = PfsMode::unrolled;
  EXPECT_THROW(encode(corpus_model("mc_model1"), cfg), EncodingError);
  auto p = pfs(PfsMode::unrolled, 3);
  p.depth_bound.reset();
  EXPECT_THROW(encode(corpus_model("mc_model1"), p), EncodingError);
  p = pfs(PfsMode::recursive, -1);
  EXPECT_THROW(encode(corpus_model("mc_model1"), p), EncodingError);
}

TEST(Encoder, InstanceFixingMustNameInstanceSymbols) {
  auto cfg = vfs();
  cfg.instance_fixing = {{"bcap", 3}};
  EXPECT_THROW(encode(corpus_model("mc_model1"), cfg), EncodingError);
  cfg.instance_fixing.clear();
  cfg.extra_constraints = {make(Op::lt, {lit(0), sym("mm")})};
  EXPECT_THROW(encode(corpus_model("mc_model1"), cfg), EncodingError);
}

TEST(Encoder, UnrolledDeclaresDPlusOneStates) {
  const auto script = encode(corpus_model("mc_model1"), pfs(PfsMode::unrolled, 3));
  for (int k = 0; k <= 3; ++k) EXPECT_EQ(count(script.text, "(declare-const s" + std::to_string(k) + "_bcap Int)"), 1u);
  EXPECT_EQ(count(script.text, "(declare-const s4_bcap"), 0u);
  EXPECT_EQ(count(script.text, "(declare-const p2_mm Int)"), 1u);
  EXPECT_EQ(count(script.text, "(declare-const p3_mm"), 0u);
  EXPECT_EQ(script.symbol_map.at("p2_mc"), (SymbolEntry{SymbolKind::param, "mc", 2}));
  EXPECT_EQ(script.symbol_map.at("n"), (SymbolEntry{SymbolKind::step_count, "", 0}));
}

TEST(Encoder, DepthZeroIsAllowed) {
  const auto script = encode(corpus_model("mc_model1"), pfs(PfsMode::unrolled, 0));
  EXPECT_TRUE(check_script(script).empty());
  EXPECT_EQ(count(script.text, "(declare-const p0_"), 0u);
  EXPECT_TRUE(check_script(encode(corpus_model("mc_model1"), pfs(PfsMode::recursive, 0))).empty());
}

TEST(Encoder, RecursiveUsesRecursiveDefinitions) {
  const auto script = encode(corpus_model("mc_model1"), pfs(PfsMode::recursive, 100));
  EXPECT_NE(script.text.find("(define-fun-rec tran ((k Int) (s State) (p Parameters) (last State) (size Int)) State"),
            std::string::npos);
  EXPECT_EQ(script.text.find("(set-logic"), std::string::npos);
  EXPECT_EQ(script.symbol_map.at("params").kind, SymbolKind::param_array);
  EXPECT_EQ(script.symbol_map.at("state").kind, SymbolKind::state_array);
  EXPECT_NE(script.text.find("(<= n 100)"), std::string::npos);
}

TEST(Prelude, FinalFunctionAndParameterRanges) {
  const std::string pre = emit_prelude(corpus_model("mc_model1"));
  EXPECT_NE(pre.find("(define-fun final ((x_bcap Int) (x_nm1 Int) (x_nc1 Int) (x_bp Int) (x_nm2 Int) (x_nc2 Int)) Bool\n"
                     "  (and (= x_nm2 i_nm) (= x_nc2 i_nc) (= x_bp 2)))"),
            std::string::npos)
      << pre;
  EXPECT_NE(pre.find("(and (<= 0 x_mm) (<= x_mm x_bcap) (<= 0 x_mc) (<= x_mc x_bcap))"), std::string::npos) << pre;
  EXPECT_EQ(pre, emit_prelude(corpus_model("mc_model1")));
}

TEST(Prelude, NoInstanceSymbolsNoDeclarations) {
  const Model m = testing_support::parse_or_die(
      "(model plain) (state (x Int)) (valid true) (initial (= x 0)) (final (= x 1)) (guard true) (update (x x))");
  const std::string pre = emit_prelude(m);
  EXPECT_EQ(pre.find("declare-const"), std::string::npos);
  EXPECT_NE(pre.find("(set-logic QF_LIA)"), std::string::npos);
}

TEST(Prelude, NonlinearModelsSelectNia) {
  const Model m = testing_support::parse_or_die(
      "(model sq) (state (x Int)) (valid true) (initial (= x 2)) (final (= x 16)) (guard true) (update (x (* x x)))");
  EXPECT_NE(emit_prelude(m).find("(set-logic QF_NIA)"), std::string::npos);
}

TEST(Encoder, ConstraintsBindToTheInitialState) {
  auto cfg = pfs(PfsMode::unrolled, 2);
  cfg.extra_constraints = {make(Op::eq, {sym("bcap"), lit(2)})};
  cfg.instance_fixing = {{"nm", 3}};
  const auto text = encode(corpus_model("mc_model1"), cfg).text;
  EXPECT_NE(text.find("(assert (= i_nm 3))"), std::string::npos);
  EXPECT_NE(text.find("(assert (= s0_bcap 2))"), std::string::npos);
  cfg.pfs_mode = PfsMode::recursive;
  EXPECT_NE(encode(corpus_model("mc_model1"), cfg).text.find("(assert (= (select state 0) 2))"), std::string::npos);
}

TEST(Encoder, NegativeLiteralsAreWellFormed) {
  auto cfg = vfs();
  cfg.instance_fixing = {{"nm", -5}};
  cfg.extra_constraints = {make(Op::lt, {lit(INT64_MIN), sym("nc")})};
  const auto script = encode(corpus_model("mc_model1"), cfg);
  EXPECT_NE(script.text.find("(= i_nm (- 5))"), std::string::npos);
  EXPECT_TRUE(check_script(script).empty());
}
