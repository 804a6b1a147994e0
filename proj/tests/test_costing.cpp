#include <budgetens/costing.hpp>

#include <gtest/gtest.h>

#include <random>
#include <string>

using namespace budgetens;

namespace {

ModelSpec toy(double n = 1, std::int64_t layers = 1, std::int64_t width = 1, std::int64_t ctx = 1 << 20,
              double cpt = 4.0) {
  ModelSpec m;
  m.name = "toy";
  m.n_params = n;
  m.n_layer = layers;
  m.d_model = width;
  m.max_ctx = ctx;
  m.chars_per_token = cpt;
  return m;
}

}  // namespace

TEST(CountTokens, CharsRatio) {
  EXPECT_EQ(count_tokens(toy(), "hello world", TokenMode::chars_ratio), 3);  // ceil(11 / 4)
  EXPECT_EQ(count_tokens(toy(), "abcd", TokenMode::chars_ratio), 1);
  EXPECT_EQ(count_tokens(toy(), "abcde", TokenMode::chars_ratio), 2);
  EXPECT_EQ(count_tokens(toy(1, 1, 1, 1 << 20, 2.5), "abcde", TokenMode::chars_ratio), 2);
}

TEST(CountTokens, CharsRatioCountsCodePoints) {
  // Four two-byte code points.
  EXPECT_EQ(count_tokens(toy(), "\xc3\xa9\xc3\xa9\xc3\xa9\xc3\xa9", TokenMode::chars_ratio), 1);
}

TEST(CountTokens, Whitespace) {
  EXPECT_EQ(count_tokens(toy(), "hello world", TokenMode::whitespace), 2);
  EXPECT_EQ(count_tokens(toy(), "  a\tb\n\nc  ", TokenMode::whitespace), 3);
  EXPECT_EQ(count_tokens(toy(), "   ", TokenMode::whitespace), 0);
}

TEST(CountTokens, EmptyIsZero) {
  EXPECT_EQ(count_tokens(toy(), "", TokenMode::chars_ratio), 0);
  EXPECT_EQ(count_tokens(toy(), "", TokenMode::whitespace), 0);
}

TEST(PerTokenCost, HandArithmetic) {
  // 2 * 6.7e9 + 2 * 32 * 512 * 4096
  EXPECT_EQ(per_token_cost(toy(6.7e9, 32, 4096), 512), 13'534'217'728.0);
  EXPECT_EQ(per_token_cost(toy(1, 1, 1), 1), 4.0);
  EXPECT_EQ(per_token_cost(toy(6.7e9, 32, 4096), 0), 2 * 6.7e9);
}

TEST(PerTokenCost, AffineInContext) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::int64_t> layers(1, 96), width(64, 12288), ctx(0, 8192);
  for (int trial = 0; trial < 200; ++trial) {
    const auto spec = toy(1e8 + static_cast<double>(rng() % 100000) * 1e6, layers(rng), width(rng));
    const auto a = ctx(rng), b = a + 1 + ctx(rng);
    const double slope = (per_token_cost(spec, b) - per_token_cost(spec, a)) / static_cast<double>(b - a);
    const double expected = 2.0 * static_cast<double>(spec.n_layer) * static_cast<double>(spec.d_model);
    EXPECT_NEAR(slope, expected, expected * 1e-12);
    EXPECT_EQ(per_token_cost(spec, 0), 2.0 * spec.n_params);
  }
}

TEST(QueryCost, Examples) {
  EXPECT_EQ(query_cost(toy(), ""), 0.0);
  EXPECT_EQ(query_cost(toy(), "abcd"), 4.0);  // t = 1, (2 + 2) * 1
  // Clamped: 40 chars at 4 chars/token = 10 tokens, max_ctx = 3.
  const auto clamped = toy(1, 1, 1, 3);
  const std::string long_text(40, 'x');
  EXPECT_EQ(clamped_tokens(clamped, long_text, TokenMode::chars_ratio), 3);
  EXPECT_EQ(query_cost(clamped, long_text), per_token_cost(clamped, 3) * 3);
}

TEST(QueryCost, MonotoneUnderConcatenation) {
  std::mt19937_64 rng(11);
  const auto spec = toy(6.7e9, 32, 4096, 2048);
  for (int trial = 0; trial < 200; ++trial) {
    std::string a(rng() % 3000, 'a'), b(rng() % 3000, 'b');
    EXPECT_GE(query_cost(spec, a + b), query_cost(spec, a));
  }
}

TEST(QueryContext, ComponentwiseEqualsIndependentCalls) {
  auto a = toy(1e9, 8, 512);
  a.name = "a";
  auto b = toy(2e9, 16, 1024);
  b.name = "b";
  auto c = toy(3e9, 24, 2048, 50, 3.0);
  c.name = "c";
  const Registry reg({a, b, c});
  const std::string text(400, 'q');
  const auto ctx = build_query_context(reg, "q1", text);
  ASSERT_EQ(ctx.costs.size(), 3u);
  EXPECT_EQ(ctx.costs[0], query_cost(a, text));
  EXPECT_EQ(ctx.costs[1], query_cost(b, text));
  EXPECT_EQ(ctx.costs[2], query_cost(c, text));
  EXPECT_EQ(ctx.token_counts[2], 50);
  EXPECT_TRUE(ctx.clamped[2]);
  EXPECT_FALSE(ctx.clamped[0]);
  EXPECT_EQ(ctx.total_baseline_cost(), ctx.costs[0] + ctx.costs[1] + ctx.costs[2]);
}

TEST(QueryContext, SymmetryAndEmptyText) {
  auto a = toy(1e9, 8, 512);
  a.name = "a";
  auto b = a;
  b.name = "b";
  const Registry reg({a, b});
  const auto ctx = build_query_context(reg, "q", "some query text");
  EXPECT_EQ(ctx.costs[0], ctx.costs[1]);
  const auto empty = build_query_context(reg, "q", "");
  EXPECT_EQ(empty.costs[0], 0.0);
  EXPECT_EQ(empty.costs[1], 0.0);
  EXPECT_EQ(empty.total_baseline_cost(), 0.0);
}
