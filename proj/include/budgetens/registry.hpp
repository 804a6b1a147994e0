#pragma once

// Model registry: the ordered, immutable set of candidate models plus the
// pipeline defaults. Registry order is the canonical model index used by the
// predictor output slots, cost vectors and selections.

#include <budgetens/errors.hpp>

#include <json.hpp>

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace budgetens {

inline constexpr const char* kConfigEnvVar = "BUDGETENS_CONFIG";

struct ModelSpec {
  std::string name;
  std::string endpoint = "mock";
  double n_params = 0;  // non-embedding parameters
  std::int64_t n_layer = 0;
  std::int64_t d_model = 0;
  std::int64_t max_ctx = 0;
  double chars_per_token = 4.0;
};

enum class FailurePolicy { fail_fast, fuse_partial };
enum class FusionMode { remote, best_predicted };
enum class InfeasiblePolicy { error, cheapest_model };
enum class TokenMode { chars_ratio, whitespace };

struct PipelineConfig {
  double budget_fraction = 0.2;
  std::int64_t grid_resolution = 1000;
  std::chrono::milliseconds dispatch_timeout{30000};
  FailurePolicy failure_policy = FailurePolicy::fuse_partial;
  // Unset means: remote when a fuser endpoint is configured, otherwise
  // best_predicted.
  std::optional<FusionMode> fusion_mode;
  InfeasiblePolicy infeasible_policy = InfeasiblePolicy::cheapest_model;
  TokenMode token_mode = TokenMode::chars_ratio;
  // Upper bound on concurrent outbound generation calls; 0 = no cap.
  std::size_t max_parallel = 0;
  std::int64_t max_tokens = 256;
};

inline std::string to_string(FailurePolicy p) {
  return p == FailurePolicy::fail_fast ? "fail_fast" : "fuse_partial";
}
inline std::string to_string(FusionMode m) {
  return m == FusionMode::remote ? "remote" : "best_predicted";
}
inline std::string to_string(InfeasiblePolicy p) {
  return p == InfeasiblePolicy::error ? "error" : "cheapest_model";
}
inline std::string to_string(TokenMode m) {
  return m == TokenMode::chars_ratio ? "chars_ratio" : "whitespace";
}

inline FailurePolicy parse_failure_policy(std::string_view s) {
  if (s == "fail_fast") return FailurePolicy::fail_fast;
  if (s == "fuse_partial") return FailurePolicy::fuse_partial;
  throw ValidationError("invalid failure_policy '" + std::string(s) + "'");
}
inline FusionMode parse_fusion_mode(std::string_view s) {
  if (s == "remote") return FusionMode::remote;
  if (s == "best_predicted") return FusionMode::best_predicted;
  throw ValidationError("invalid fusion_mode '" + std::string(s) + "'");
}
inline InfeasiblePolicy parse_infeasible_policy(std::string_view s) {
  if (s == "error") return InfeasiblePolicy::error;
  if (s == "cheapest_model") return InfeasiblePolicy::cheapest_model;
  throw ValidationError("invalid infeasible_policy '" + std::string(s) + "'");
}
inline TokenMode parse_token_mode(std::string_view s) {
  if (s == "chars_ratio") return TokenMode::chars_ratio;
  if (s == "whitespace") return TokenMode::whitespace;
  throw ValidationError("invalid token_mode '" + std::string(s) + "'");
}

inline void validate(const ModelSpec& m) {
  auto fail = [&](const std::string& what) {
    throw ValidationError("model '" + m.name + "': " + what);
  };
  if (m.name.empty()) throw ValidationError("model with empty name");
  if (!(m.n_params >= 1)) fail("n_params must be >= 1");
  if (m.n_layer < 1) fail("n_layer must be >= 1");
  if (m.d_model < 1) fail("d_model must be >= 1");
  if (m.max_ctx < 1) fail("max_ctx must be >= 1");
  if (!(m.chars_per_token > 0)) fail("chars_per_token must be > 0");
  if (m.endpoint.empty()) fail("endpoint must not be empty");
}

inline void validate(const PipelineConfig& c) {
  if (!(c.budget_fraction > 0 && c.budget_fraction <= 1))
    throw ValidationError("budget_fraction must lie in (0, 1]");
  if (c.grid_resolution < 1) throw ValidationError("grid_resolution must be >= 1");
  if (c.dispatch_timeout.count() <= 0) throw ValidationError("dispatch_timeout must be > 0");
  if (c.max_tokens < 1) throw ValidationError("max_tokens must be >= 1");
}

class Registry {
 public:
  Registry(std::vector<ModelSpec> models, std::optional<std::string> fuser_endpoint = std::nullopt,
           PipelineConfig defaults = {})
      : models_(std::move(models)), fuser_endpoint_(std::move(fuser_endpoint)), defaults_(defaults) {
    if (models_.empty()) throw ValidationError("registry must contain at least one model");
    std::unordered_set<std::string> seen;
    for (const auto& m : models_) {
      validate(m);
      if (!seen.insert(m.name).second)
        throw ValidationError("duplicate model name '" + m.name + "'");
    }
    validate(defaults_);
  }

  const std::vector<ModelSpec>& models() const noexcept { return models_; }
  std::size_t size() const noexcept { return models_.size(); }
  const ModelSpec& operator[](std::size_t i) const { return models_.at(i); }
  const std::optional<std::string>& fuser_endpoint() const noexcept { return fuser_endpoint_; }
  const PipelineConfig& defaults() const noexcept { return defaults_; }

  FusionMode default_fusion_mode() const {
    if (defaults_.fusion_mode) return *defaults_.fusion_mode;
    return fuser_endpoint_ ? FusionMode::remote : FusionMode::best_predicted;
  }

  std::size_t index_of(std::string_view name) const {
    for (std::size_t i = 0; i < models_.size(); ++i)
      if (models_[i].name == name) return i;
    throw UnknownModelError(std::string(name));
  }

  bool contains(std::string_view name) const noexcept {
    for (const auto& m : models_)
      if (m.name == name) return true;
    return false;
  }

 private:
  std::vector<ModelSpec> models_;
  std::optional<std::string> fuser_endpoint_;
  PipelineConfig defaults_;
};

inline std::size_t model_index(const Registry& registry, std::string_view name) {
  return registry.index_of(name);
}

namespace detail {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

}  // namespace detail

inline PipelineConfig parse_pipeline_config(const nlohmann::json& j) {
  PipelineConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw ParseError("'defaults' must be an object");
  c.budget_fraction = detail::get_or(j, "budget_fraction", c.budget_fraction);
  c.grid_resolution = detail::get_or(j, "grid_resolution", c.grid_resolution);
  c.dispatch_timeout =
      std::chrono::milliseconds(detail::get_or<std::int64_t>(j, "dispatch_timeout_ms", c.dispatch_timeout.count()));
  if (j.contains("failure_policy"))
    c.failure_policy = parse_failure_policy(j.at("failure_policy").get<std::string>());
  if (j.contains("fusion_mode") && !j.at("fusion_mode").is_null())
    c.fusion_mode = parse_fusion_mode(j.at("fusion_mode").get<std::string>());
  if (j.contains("infeasible_policy"))
    c.infeasible_policy = parse_infeasible_policy(j.at("infeasible_policy").get<std::string>());
  if (j.contains("token_mode")) c.token_mode = parse_token_mode(j.at("token_mode").get<std::string>());
  c.max_parallel = detail::get_or<std::size_t>(j, "max_parallel", c.max_parallel);
  c.max_tokens = detail::get_or(j, "max_tokens", c.max_tokens);
  return c;
}

inline ModelSpec parse_model_spec(const nlohmann::json& j, std::size_t position) {
  if (!j.is_object()) throw ParseError("models[" + std::to_string(position) + "] must be an object");
  ModelSpec m;
  m.name = detail::get_or<std::string>(j, "name", "");
  try {
    m.endpoint = detail::get_or<std::string>(j, "endpoint", m.endpoint);
    m.n_params = detail::get_or(j, "n_params", 0.0);
    m.n_layer = detail::get_or<std::int64_t>(j, "n_layer", 0);
    m.d_model = detail::get_or<std::int64_t>(j, "d_model", 0);
    m.max_ctx = detail::get_or<std::int64_t>(j, "max_ctx", 0);
    m.chars_per_token = detail::get_or(j, "chars_per_token", m.chars_per_token);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model '" + m.name + "': " + e.what());
  }
  return m;
}

inline Registry parse_registry(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("registry: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("models") || !doc.at("models").is_array())
    throw ParseError("registry: expected an object with a 'models' array");

  std::vector<ModelSpec> models;
  const auto& arr = doc.at("models");
  for (std::size_t i = 0; i < arr.size(); ++i) models.push_back(parse_model_spec(arr[i], i));

  std::optional<std::string> fuser;
  if (doc.contains("fuser_endpoint") && !doc.at("fuser_endpoint").is_null())
    fuser = doc.at("fuser_endpoint").get<std::string>();

  PipelineConfig defaults;
  try {
    defaults = parse_pipeline_config(doc.contains("defaults") ? doc.at("defaults") : nlohmann::json());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("registry defaults: ") + e.what());
  }
  return Registry(std::move(models), std::move(fuser), defaults);
}

inline Registry load_registry(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open registry file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_registry(ss.str());
}

// Resolution order: explicit flag, then $BUDGETENS_CONFIG, then nothing.
inline std::optional<std::string> resolve_config_path(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return flag;
  if (const char* env = std::getenv(kConfigEnvVar); env && *env) return std::string(env);
  return std::nullopt;
}

inline nlohmann::json to_json(const ModelSpec& m) {
  return {{"name", m.name},       {"endpoint", m.endpoint}, {"n_params", m.n_params},
          {"n_layer", m.n_layer}, {"d_model", m.d_model},   {"max_ctx", m.max_ctx},
          {"chars_per_token", m.chars_per_token}};
}

}  // namespace budgetens
