#include <budgetens/registry.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <string>

using namespace budgetens;

namespace {

std::string model_json(const std::string& name, int n_layer = 32) {
  return R"({"name": ")" + name + R"(", "endpoint": "mock", "n_params": 6.7e9, "n_layer": )" +
         std::to_string(n_layer) + R"(, "d_model": 4096, "max_ctx": 2048})";
}

std::string registry_json(const std::string& models) { return R"({"models": [)" + models + "]}"; }

}  // namespace

TEST(Registry, LoadsModelsInFileOrder) {
  const auto r = parse_registry(registry_json(model_json("alpaca") + "," + model_json("vicuna")));
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].name, "alpaca");
  EXPECT_EQ(r[1].name, "vicuna");
  EXPECT_DOUBLE_EQ(r[0].n_params, 6.7e9);
  EXPECT_EQ(r[0].n_layer, 32);
  EXPECT_DOUBLE_EQ(r[0].chars_per_token, 4.0);
}

TEST(Registry, DuplicateNameIsRejectedByName) {
  try {
    parse_registry(registry_json(model_json("alpaca") + "," + model_json("alpaca")));
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("alpaca"), std::string::npos);
  }
}

TEST(Registry, NonPositiveFieldsAreRejected) {
  try {
    parse_registry(registry_json(model_json("broken", 0)));
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("broken"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("n_layer"), std::string::npos);
  }
  EXPECT_THROW(parse_registry(registry_json(
                   R"({"name":"m","n_params":1,"n_layer":1,"d_model":1,"max_ctx":1,"chars_per_token":0})")),
               ValidationError);
  EXPECT_THROW(parse_registry(registry_json(R"({"name":"m","n_params":0,"n_layer":1,"d_model":1,"max_ctx":1})")),
               ValidationError);
}

TEST(Registry, MalformedFileIsParseError) {
  EXPECT_THROW(parse_registry("{ not json"), ParseError);
  EXPECT_THROW(parse_registry(R"({"models": 3})"), ParseError);
  EXPECT_THROW(parse_registry(R"({"models": [{"name": "m", "n_layer": "many"}]})"), ParseError);
  EXPECT_THROW(load_registry("/nonexistent/registry.json"), ParseError);
}

TEST(Registry, EmptyModelListIsInvalid) { EXPECT_THROW(parse_registry(R"({"models": []})"), ValidationError); }

TEST(Registry, ModelIndex) {
  const auto r = parse_registry(registry_json(model_json("m1") + "," + model_json("m2") + "," + model_json("m3")));
  EXPECT_EQ(model_index(r, "m1"), 0u);
  EXPECT_EQ(model_index(r, "m2"), 1u);
  EXPECT_THROW(model_index(r, "gpt4"), UnknownModelError);
}

TEST(Registry, DefaultsParseAndValidate) {
  const auto r = parse_registry(R"({"models": [)" + model_json("m") + R"(],
    "fuser_endpoint": "http://localhost:9/fuse",
    "defaults": {"budget_fraction": 0.5, "grid_resolution": 64, "dispatch_timeout_ms": 250,
                 "failure_policy": "fail_fast", "infeasible_policy": "error", "token_mode": "whitespace"}})");
  EXPECT_DOUBLE_EQ(r.defaults().budget_fraction, 0.5);
  EXPECT_EQ(r.defaults().grid_resolution, 64);
  EXPECT_EQ(r.defaults().dispatch_timeout.count(), 250);
  EXPECT_EQ(r.defaults().failure_policy, FailurePolicy::fail_fast);
  EXPECT_EQ(r.defaults().infeasible_policy, InfeasiblePolicy::error);
  EXPECT_EQ(r.defaults().token_mode, TokenMode::whitespace);
  EXPECT_EQ(r.default_fusion_mode(), FusionMode::remote);

  EXPECT_THROW(parse_registry(R"({"models": [)" + model_json("m") + R"(], "defaults": {"budget_fraction": 0}})"),
               ValidationError);
  EXPECT_THROW(parse_registry(R"({"models": [)" + model_json("m") + R"(], "defaults": {"budget_fraction": 1.5}})"),
               ValidationError);
  EXPECT_THROW(parse_registry(R"({"models": [)" + model_json("m") + R"(], "defaults": {"grid_resolution": 0}})"),
               ValidationError);
  EXPECT_THROW(parse_registry(R"({"models": [)" + model_json("m") + R"(], "defaults": {"fusion_mode": "vote"}})"),
               ValidationError);
}

TEST(Registry, FusionModeDefaultsToBestPredictedWithoutFuser) {
  const auto r = parse_registry(registry_json(model_json("m")));
  EXPECT_EQ(r.default_fusion_mode(), FusionMode::best_predicted);
}

TEST(Registry, LoadIsDeterministic) {
  const std::string path = std::string(BUDGETENS_DATA_DIR) + "/toy_registry.json";
  const auto a = load_registry(path);
  const auto b = load_registry(path);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(to_json(a[i]), to_json(b[i]));
}

TEST(Registry, BundledRegistriesLoad) {
  EXPECT_EQ(load_registry(std::string(BUDGETENS_DATA_DIR) + "/toy_registry.json").size(), 4u);
  EXPECT_EQ(load_registry(std::string(BUDGETENS_DATA_DIR) + "/example_registry.json").size(), 8u);
}

TEST(Registry, ConfigPathResolution) {
  ::unsetenv(kConfigEnvVar);
  EXPECT_FALSE(resolve_config_path(std::nullopt));
  ::setenv(kConfigEnvVar, "/from/env.json", 1);
  EXPECT_EQ(*resolve_config_path(std::nullopt), "/from/env.json");
  EXPECT_EQ(*resolve_config_path(std::string("/from/flag.json")), "/from/flag.json");
  ::unsetenv(kConfigEnvVar);
}
