#pragma once

// Inference cost model. A model's cost for a query is its forward-pass FLOPs
// per token, 2N + 2 * n_layer * n_ctx * d_model, times the query's token count,
// with n_ctx taken as that model's own (clamped) token count.

#include <budgetens/registry.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

namespace budgetens {

namespace detail {

// Number of UTF-8 code points; continuation bytes are not counted.
inline std::size_t utf8_length(std::string_view text) noexcept {
  return static_cast<std::size_t>(std::count_if(text.begin(), text.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0u) != 0x80u;
  }));
}

inline bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace detail

inline std::int64_t count_tokens(const ModelSpec& spec, std::string_view text, TokenMode mode) {
  if (text.empty()) return 0;
  if (mode == TokenMode::whitespace) {
    std::int64_t runs = 0;
    bool in_run = false;
    for (char c : text) {
      const bool space = detail::is_space(c);
      if (!space && !in_run) ++runs;
      in_run = !space;
    }
    return runs;
  }
  const auto chars = static_cast<double>(detail::utf8_length(text));
  return static_cast<std::int64_t>(std::ceil(chars / spec.chars_per_token));
}

// FLOPs per token of one forward pass at context length n_ctx.
inline double per_token_cost(const ModelSpec& spec, std::int64_t n_ctx) {
  return 2.0 * spec.n_params +
         2.0 * static_cast<double>(spec.n_layer) * static_cast<double>(n_ctx) *
             static_cast<double>(spec.d_model);
}

inline std::int64_t clamped_tokens(const ModelSpec& spec, std::string_view text, TokenMode mode) {
  return std::min(count_tokens(spec, text, mode), spec.max_ctx);
}

inline double query_cost(const ModelSpec& spec, std::string_view text,
                         TokenMode mode = TokenMode::chars_ratio) {
  const auto t = clamped_tokens(spec, text, mode);
  return per_token_cost(spec, t) * static_cast<double>(t);
}

struct QueryContext {
  std::string query_id;
  std::string text;
  std::vector<std::int64_t> token_counts;
  std::vector<double> costs;  // FLOPs
  std::vector<bool> clamped;  // token count hit max_ctx

  double total_baseline_cost() const { return std::accumulate(costs.begin(), costs.end(), 0.0); }
};

inline QueryContext build_query_context(const Registry& registry, std::string query_id, std::string text,
                                        std::optional<TokenMode> mode = std::nullopt) {
  const TokenMode m = mode.value_or(registry.defaults().token_mode);
  QueryContext ctx;
  ctx.query_id = std::move(query_id);
  ctx.text = std::move(text);
  ctx.token_counts.reserve(registry.size());
  ctx.costs.reserve(registry.size());
  ctx.clamped.reserve(registry.size());
  for (const auto& spec : registry.models()) {
    const auto raw = count_tokens(spec, ctx.text, m);
    const auto t = std::min(raw, spec.max_ctx);
    ctx.token_counts.push_back(t);
    ctx.clamped.push_back(raw > spec.max_ctx);
    ctx.costs.push_back(per_token_cost(spec, t) * static_cast<double>(t));
  }
  return ctx;
}

}  // namespace budgetens
