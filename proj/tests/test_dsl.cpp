#include <gtest/gtest.h>

#include <random>

#include "modelgate/dsl.hpp"
#include "support.hpp"

using namespace modelgate;
using testing_support::corpus_file;
using testing_support::corpus_model;
using testing_support::slurp;

namespace {

std::vector<ParseError> errors_of(std::string_view src) {
  auto r = parse_model(src);
  EXPECT_FALSE(r.ok());
  return r.errors;
}

// Byte offset of the 1-based (line, column) position; columns count code points.
std::size_t offset_of(std::string_view src, SourceSpan span) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (line == span.line && col == span.column) return i;
    const auto c = static_cast<unsigned char>(src[i]);
    if (c == '\n') {
      ++line;
      col = 1;
    } else if ((c & 0xC0) != 0x80) {
      ++col;
    }
  }
  return src.size();
}

bool span_inside(std::string_view src, SourceSpan s) {
  if (s.line < 1 || s.column < 1 || s.length < 1) return false;
  const auto lines = 1 + std::count(src.begin(), src.end(), '\n');
  return s.line <= lines;
}

}  // namespace

TEST(ParseModel, CorpusShapes) {
  const Model m = corpus_model("mc_model1");
  EXPECT_EQ(m.name, "mc_model1");
  EXPECT_EQ(m.state_fields.size(), 6u);
  EXPECT_EQ(m.param_fields.size(), 2u);
  EXPECT_EQ(m.instance_symbols, (std::vector<std::string>{"nm", "nc"}));
  EXPECT_EQ(m.state_fields[0], "bcap");
  ASSERT_TRUE(m.param_fields[0].range);
  EXPECT_EQ(corpus_model("mc_model3").constraints.size(), 1u);
}

TEST(ParseModel, EmptyInputErrorsAtOrigin) {
  for (const char* src : {"", "   \n", "; only a comment\n"}) {
    const auto errs = errors_of(src);
    ASSERT_EQ(errs.size(), 1u);
    EXPECT_EQ(errs[0].span.line, 1);
    EXPECT_EQ(errs[0].span.column, 1);
  }
}

TEST(ParseModel, MisspelledKeywordGivesOneErrorAtTheKeyword) {
  std::string src = slurp(corpus_file("mc_model1"));
  const auto pos = src.find("(valid");
  ASSERT_NE(pos, std::string::npos);
  src.replace(pos + 1, 5, "vald");
  const auto errs = errors_of(src);
  ASSERT_EQ(errs.size(), 1u) << format_error(errs[0]);
  EXPECT_EQ(offset_of(src, errs[0].span), pos + 1);
  EXPECT_EQ(errs[0].span.length, 4);
  EXPECT_NE(errs[0].message.find("valid"), std::string::npos);
}

TEST(ParseModel, DuplicateFormIsAnError) {
  std::string src = slurp(corpus_file("mc_model1")) + "(guard true)\n";
  const auto errs = errors_of(src);
  ASSERT_EQ(errs.size(), 1u);
  EXPECT_NE(errs[0].message.find("guard"), std::string::npos);
  EXPECT_EQ(offset_of(src, errs[0].span), src.rfind("guard"));
}

TEST(ParseModel, UnknownSymbolPointsAtTheSymbol) {
  std::string src = slurp(corpus_file("mc_model1"));
  const auto pos = src.find("(bp (- 3 bp))");
  ASSERT_NE(pos, std::string::npos);
  src.replace(pos, 13, "(bp (- 3 bq))");
  const auto errs = errors_of(src);
  ASSERT_EQ(errs.size(), 1u);
  EXPECT_EQ(offset_of(src, errs[0].span), pos + 9);
  EXPECT_NE(errs[0].message.find("bq"), std::string::npos);
}

TEST(ParseModel, ParamsAreRejectedInStatePredicates) {
  std::string src = slurp(corpus_file("mc_model1"));
  const auto pos = src.find("(= bp 2)))");
  src.replace(pos, 8, "(= mm 2)");
  EXPECT_FALSE(parse_model(src).ok());
}

TEST(ParseModel, ParamMisuseNamesTheForm) {
  const std::string head = "(model m) (state (x Int)) (params (k Int 0 2) (j Int 0 k)) ";
  const std::string tail = "(valid true) (initial true) (final true) (guard true) (update (x x))";
  auto errs = errors_of(head + tail + "(constrain (< k 1))");
  ASSERT_EQ(errs.size(), 2u);
  EXPECT_NE(errs[0].message.find("bounds of parameter 'j'"), std::string::npos) << errs[0].message;
  EXPECT_NE(errs[1].message.find("constrain"), std::string::npos) << errs[1].message;
}

TEST(ParseModel, MissingUpdateIsReported) {
  std::string src = slurp(corpus_file("mc_model1"));
  const auto pos = src.find("  (bp (- 3 bp))\n");
  src.erase(pos, 16);
  const auto errs = errors_of(src);
  ASSERT_FALSE(errs.empty());
  EXPECT_NE(errs[0].message.find("bp"), std::string::npos);
}

TEST(ParseModel, LiteralOutOfRange) {
  const auto errs = errors_of(
      "(model m) (state (x Int)) (valid (< x 9223372036854775808)) (initial true) (final true) (guard true) "
      "(update (x x))");
  ASSERT_EQ(errs.size(), 1u);
  EXPECT_NE(errs[0].message.find("range"), std::string::npos);
}

TEST(ParseModel, LexicalErrors) {
  EXPECT_FALSE(parse_model("(model m").ok());
  EXPECT_FALSE(parse_model("(model m))").ok());
  EXPECT_FALSE(parse_model("(model \"m)").ok());
  const auto errs = errors_of("(model m)\n(state (x\x01 Int))");
  EXPECT_EQ(errs[0].span.line, 2);
}

TEST(ParseModel, ColumnsCountCodePoints) {
  const auto errs = errors_of("; \xC3\xA9t\xC3\xA9\n(model m) (st\xC3\xA9 (x Int))");
  ASSERT_FALSE(errs.empty());
  EXPECT_EQ(errs[0].span.line, 2);
  EXPECT_EQ(errs[0].span.column, 14);
}

TEST(ParseModel, FormOrderIsFree) {
  const Model a = corpus_model("mc_model1");
  const Model b = testing_support::parse_or_die(
      "(update (x (+ x k))) (guard (< k 2)) (final (= x 3)) (initial (= x 0)) (valid (>= x 0))"
      "(params (k Int 1 1)) (state (x Int)) (model counter)");
  EXPECT_EQ(b.state_fields.size(), 1u);
  EXPECT_NE(a, b);
}

TEST(Serialize, CorpusRoundTrip) {
  for (const char* name : {"mc_model1", "mc_model2", "mc_model3"}) {
    const Model m = corpus_model(name);
    auto again = parse_model(serialize_model(m));
    ASSERT_TRUE(again.ok()) << name << ": " << format_error(again.errors[0]);
    EXPECT_EQ(*again.model, m) << name;
    EXPECT_EQ(serialize_model(*again.model), serialize_model(m));
  }
}

TEST(Serialize, NestedIteKeepsShape) {
  Model m = testing_support::parse_or_die(
      "(model n) (state (x Int)) (valid true) (initial (= x 0)) (final (= x 5)) (guard true)"
      "(update (x (ite (< x 2) (ite (= x 0) 1 2) (ite (< x 4) (+ x 1) (ite (= x 4) 5 x)))))");
  auto again = parse_model(serialize_model(m));
  ASSERT_TRUE(again.ok());
  EXPECT_EQ(again.model->update, m.update);
}

TEST(Serialize, OperatorChainIsUnambiguous) {
  // a + b - c built as a tree, not parsed, so serialization must supply the grouping.
  Model m = testing_support::parse_or_die(
      "(model chain) (instance (c Int)) (state (a Int) (b Int)) (valid true) (initial true) (final true)"
      "(guard true) (update (a a) (b b))");
  const Expr left = make(Op::sub, {make(Op::add, {sym("a"), sym("b")}), sym("c")});
  const Expr right = make(Op::add, {sym("a"), make(Op::sub, {sym("b"), sym("c")})});
  m.constraints = {make(Op::eq, {left, left}), make(Op::eq, {right, right})};
  m.update[0].value = left;
  m.update[1].value = right;
  auto again = parse_model(serialize_model(m));
  ASSERT_TRUE(again.ok());
  EXPECT_EQ(*again.model, m);

  testing_support::ExprGen gen({"a", "b", "c"}, 99u);
  for (int i = 0; i < 100; ++i) {
    const auto b = gen.binding(-1000, 1000);
    EXPECT_EQ(eval_int(again.model->update[0].value, b), eval_int(left, b));
    EXPECT_EQ(eval_int(again.model->update[1].value, b), eval_int(right, b));
  }
}

TEST(Serialize, RandomExpressionsRoundTripThroughConstrain) {
  Model m = testing_support::parse_or_die(
      "(model r) (instance (c Int)) (state (a Int) (b Int)) (valid true) (initial true) (final true)"
      "(guard true) (update (a a) (b b))");
  testing_support::ExprGen gen({"a", "b", "c"}, 5u);
  for (int i = 0; i < 300; ++i) {
    const Expr x = gen.boolean(3);
    std::vector<ParseError> errs;
    auto back = parse_expr(to_dsl(x), m, errs);
    ASSERT_TRUE(back) << to_dsl(x);
    EXPECT_EQ(*back, x) << to_dsl(x);
  }
}

TEST(ParseExpr, ScopeAndSortChecks) {
  const Model m = corpus_model("mc_model1");
  std::vector<ParseError> errs;
  EXPECT_TRUE(parse_expr("(< 2 nm)", m, errs));
  EXPECT_TRUE(parse_expr("(= bcap 3)", m, errs));
  EXPECT_TRUE(errs.empty());
  EXPECT_FALSE(parse_expr("(< 2 mm)", m, errs));
  EXPECT_FALSE(parse_expr("(+ 2 nm)", m, errs));
  EXPECT_FALSE(parse_expr("(< 2 nm) (< 2 nc)", m, errs));
}

TEST(Fuzz, TerminatesOnMutatedAndRandomInputs) {
  const std::string seeds[] = {slurp(corpus_file("mc_model1")), slurp(corpus_file("mc_model2")),
                               slurp(corpus_file("mc_model3"))};
  const std::string alphabet = "()  \n;\"|-0123456789abxyz=<>+*";
  std::mt19937 rng(12345u);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  std::size_t total_bytes = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string input;
    switch (i % 5) {
      case 0:
      case 1: {
        input = seeds[pick(3)];
        const int edits = 1 + static_cast<int>(pick(8));
        for (int k = 0; k < edits && !input.empty(); ++k) {
          const std::size_t at = pick(input.size());
          switch (pick(3)) {
            case 0: input.erase(at, 1 + pick(4)); break;
            case 1: input.insert(at, 1, alphabet[pick(alphabet.size())]); break;
            default: input[at] = static_cast<char>(pick(256));
          }
        }
        break;
      }
      case 2: {
        const std::size_t n = pick(512);
        for (std::size_t k = 0; k < n; ++k) input += static_cast<char>(pick(256));
        break;
      }
      case 3: {
        const std::size_t n = pick(2048);
        for (std::size_t k = 0; k < n; ++k) input += alphabet[pick(alphabet.size())];
        break;
      }
      default: {
        // Occasionally large: deep nesting or long flat lists up to 1 MiB.
        const std::size_t n = i % 500 == 4 ? (1u << 20) / 2 : pick(4096);
        if (pick(2)) {
          input = std::string(n, '(') + std::string(pick(2) ? n : n / 2, ')');
        } else {
          input = "(model m) (state";
          while (input.size() + 8 < n) input += " (x Int)";
        }
        input.resize(std::min<std::size_t>(input.size(), 1u << 20));
      }
    }
    ASSERT_LE(input.size(), 1u << 20);
    total_bytes += input.size();
    auto r = parse_model(input);
    if (!r.ok()) {
      ASSERT_FALSE(r.errors.empty());
      for (const auto& e : r.errors) {
        ASSERT_FALSE(e.message.empty());
        ASSERT_TRUE(span_inside(input, e.span)) << format_error(e);
      }
    }
  }
  EXPECT_GT(total_bytes, 1u << 20);
}
