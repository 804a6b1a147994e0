#pragma once

// End-to-end pipeline per query:
//   embed -> predict -> cost -> select -> dispatch -> fuse
// plus the HTTP service wrapping it and a scripted mock model backend.
//
// Model wire contract:  POST <endpoint>  {"prompt": str, "max_tokens": int}
//                       -> 200 {"text": str}
// Fuser wire contract:  POST <fuser>     {"query": str, "candidates": [str]}
//                       -> 200 {"text": str}

#include <budgetens/costing.hpp>
#include <budgetens/errors.hpp>
#include <budgetens/predictor.hpp>
#include <budgetens/registry.hpp>
#include <budgetens/selector.hpp>

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

namespace budgetens {

using Clock = std::chrono::steady_clock;
using std::chrono::milliseconds;

enum class ResponseStatus { ok, timeout, error };

inline std::string to_string(ResponseStatus s) {
  switch (s) {
    case ResponseStatus::ok: return "ok";
    case ResponseStatus::timeout: return "timeout";
    case ResponseStatus::error: return "error";
  }
  return "error";
}

struct ModelResponse {
  std::size_t model_index = 0;
  std::optional<std::string> text;  // set iff status == ok
  milliseconds latency{0};
  ResponseStatus status = ResponseStatus::error;
  std::string error;

  bool ok() const noexcept { return status == ResponseStatus::ok; }
};

// ---------------------------------------------------------------------------
// HTTP plumbing

namespace detail {

struct UrlParts {
  std::string base;  // scheme://host[:port]
  std::string path;
};

inline UrlParts split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ValidationError("endpoint '" + url + "' is not an absolute URL");
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

struct HttpOutcome {
  enum class Kind { ok, timeout, transport_error } kind = Kind::transport_error;
  int status = 0;
  std::string body;
  std::string error;
};

inline HttpOutcome post_json(const std::string& url, const nlohmann::json& payload, milliseconds timeout) {
  HttpOutcome out;
  UrlParts parts;
  try {
    parts = split_url(url);
  } catch (const Error& e) {
    out.error = e.what();
    return out;
  }
  httplib::Client cli(parts.base);
  const auto sec = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout - sec);
  cli.set_connection_timeout(sec.count(), usec.count());
  cli.set_read_timeout(sec.count(), usec.count());
  cli.set_write_timeout(sec.count(), usec.count());
  const auto started = Clock::now();
  auto res = cli.Post(parts.path, payload.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                           (err == httplib::Error::Read && Clock::now() - started >= timeout);
    out.kind = timed_out ? HttpOutcome::Kind::timeout : HttpOutcome::Kind::transport_error;
    out.error = httplib::to_string(err);
    return out;
  }
  out.kind = HttpOutcome::Kind::ok;
  out.status = res->status;
  out.body = res->body;
  return out;
}

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  if (from.empty()) return s;
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Model backends

struct GenerationRequest {
  std::string prompt;
  std::int64_t max_tokens = 256;
};

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  // Must not throw for model-side failures; report them in the status.
  virtual ModelResponse generate(std::size_t model_index, const ModelSpec& spec, const GenerationRequest& req,
                                 milliseconds timeout) const = 0;
};

// Endpoint "mock" answers in-process with "[<name>] <prompt>"; anything else
// is treated as a URL speaking the model wire contract.
class HttpModelBackend : public ModelBackend {
 public:
  ModelResponse generate(std::size_t model_index, const ModelSpec& spec, const GenerationRequest& req,
                         milliseconds timeout) const override {
    ModelResponse r;
    r.model_index = model_index;
    const auto started = Clock::now();
    auto finish = [&](ModelResponse& resp) -> ModelResponse {
      resp.latency = std::chrono::duration_cast<milliseconds>(Clock::now() - started);
      return resp;
    };
    if (spec.endpoint == "mock") {
      r.status = ResponseStatus::ok;
      r.text = "[" + spec.name + "] " + req.prompt;
      return finish(r);
    }
    const auto http = detail::post_json(spec.endpoint, {{"prompt", req.prompt}, {"max_tokens", req.max_tokens}},
                                        timeout);
    if (http.kind == detail::HttpOutcome::Kind::timeout) {
      r.status = ResponseStatus::timeout;
      r.error = "timed out after " + std::to_string(timeout.count()) + " ms";
      return finish(r);
    }
    if (http.kind == detail::HttpOutcome::Kind::transport_error) {
      r.status = ResponseStatus::error;
      r.error = http.error;
      return finish(r);
    }
    if (http.status != 200) {
      r.status = ResponseStatus::error;
      r.error = "HTTP " + std::to_string(http.status);
      return finish(r);
    }
    try {
      const auto j = nlohmann::json::parse(http.body);
      auto text = j.at("text").get<std::string>();
      if (text.empty()) {
        r.status = ResponseStatus::error;
        r.error = "empty response text";
      } else {
        r.status = ResponseStatus::ok;
        r.text = std::move(text);
      }
    } catch (const nlohmann::json::exception& e) {
      r.status = ResponseStatus::error;
      r.error = std::string("malformed response: ") + e.what();
    }
    return finish(r);
  }
};

// Issues one request per selected model, at most `max_parallel` in flight
// (0 = all at once). Results come back in selection order.
inline std::vector<ModelResponse> dispatch(const Registry& registry, std::span<const std::size_t> selection,
                                           const std::string& text, const PipelineConfig& config,
                                           const ModelBackend& backend) {
  if (selection.empty()) throw ValidationError("dispatch: empty selection");
  std::vector<ModelResponse> out(selection.size());
  const GenerationRequest req{text, config.max_tokens};
  const std::size_t workers =
      config.max_parallel == 0 ? selection.size() : std::min(config.max_parallel, selection.size());

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < selection.size(); k = next++) {
      const auto idx = selection[k];
      try {
        out[k] = backend.generate(idx, registry[idx], req, config.dispatch_timeout);
      } catch (const std::exception& e) {
        out[k] = ModelResponse{idx, std::nullopt, milliseconds{0}, ResponseStatus::error, e.what()};
      }
      out[k].model_index = idx;
      if (out[k].ok() != out[k].text.has_value()) {
        out[k].status = ResponseStatus::error;
        out[k].text.reset();
        if (out[k].error.empty()) out[k].error = "backend returned inconsistent status";
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fusion

struct FuseResult {
  std::string text;
  FusionMode mode_used = FusionMode::best_predicted;
  std::vector<std::string> warnings;
};

inline std::string fuse_best_predicted(std::span<const ModelResponse> responses,
                                       std::span<const double> predicted_scores) {
  const ModelResponse* best = nullptr;
  for (const auto& r : responses) {
    if (!r.ok()) continue;
    if (r.model_index >= predicted_scores.size()) throw DimensionError("fuse: predicted score missing for model");
    if (!best) {
      best = &r;
      continue;
    }
    const double s = predicted_scores[r.model_index];
    const double b = predicted_scores[best->model_index];
    if (s > b || (s == b && r.model_index < best->model_index)) best = &r;
  }
  if (!best) throw FusionError("fusion impossible: no successful responses");
  return *best->text;
}

inline FuseResult fuse(std::string_view query, std::span<const ModelResponse> responses,
                       std::span<const double> predicted_scores, FusionMode mode,
                       const std::optional<std::string>& fuser_endpoint,
                       milliseconds timeout = milliseconds{30000}) {
  FuseResult out;
  const auto fallback = fuse_best_predicted(responses, predicted_scores);
  if (mode == FusionMode::best_predicted) {
    out.text = fallback;
    out.mode_used = FusionMode::best_predicted;
    return out;
  }

  auto degrade = [&](const std::string& why) {
    out.text = fallback;
    out.mode_used = FusionMode::best_predicted;
    out.warnings.push_back("remote fuser unavailable (" + why + "); used best_predicted");
    return out;
  };
  if (!fuser_endpoint) return degrade("no fuser endpoint configured");

  nlohmann::json candidates = nlohmann::json::array();
  for (const auto& r : responses)
    if (r.ok()) candidates.push_back(*r.text);
  const auto http =
      detail::post_json(*fuser_endpoint, {{"query", std::string(query)}, {"candidates", candidates}}, timeout);
  if (http.kind != detail::HttpOutcome::Kind::ok) return degrade(http.error.empty() ? "timeout" : http.error);
  if (http.status != 200) return degrade("HTTP " + std::to_string(http.status));
  try {
    auto text = nlohmann::json::parse(http.body).at("text").get<std::string>();
    if (text.empty()) return degrade("empty fused text");
    out.text = std::move(text);
    out.mode_used = FusionMode::remote;
  } catch (const nlohmann::json::exception& e) {
    return degrade(std::string("malformed reply: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

struct QueryOverrides {
  std::optional<double> budget_fraction;
  std::optional<FusionMode> fusion_mode;
  std::optional<FailurePolicy> failure_policy;
  std::optional<InfeasiblePolicy> infeasible_policy;
  std::optional<std::int64_t> grid_resolution;
};

struct BudgetInfo {
  double fraction = 0;
  double epsilon = 0;
  double baseline_cost = 0;
};

struct EnsembleResponse {
  std::string query_id;
  std::string fused_text;
  std::vector<ModelResponse> responses;
  SelectionResult selection;
  std::vector<double> predicted_scores;
  std::vector<double> costs;
  BudgetInfo budget;
  FusionMode fusion_mode_used = FusionMode::best_predicted;
  bool fallback_selection = false;  // cheapest-model fallback was applied
  std::vector<std::string> warnings;
};

struct Pipeline {
  const Registry& registry;
  const PredictorHead& head;
  const Encoder& encoder;
  const ModelBackend& backend;
};

inline void check_pipeline_dims(const Pipeline& p) {
  if (p.head.n_models() != p.registry.size())
    throw DimensionError("predictor head has " + std::to_string(p.head.n_models()) + " outputs, registry has " +
                         std::to_string(p.registry.size()) + " models");
  if (p.encoder.dim() != p.head.input_dim())
    throw DimensionError("encoder produces " + std::to_string(p.encoder.dim()) + "-dim vectors, head expects " +
                         std::to_string(p.head.input_dim()));
}

inline EnsembleResponse answer_query(const Pipeline& p, const std::string& query_id, const std::string& text,
                                     const QueryOverrides& overrides = {}) {
  check_pipeline_dims(p);
  PipelineConfig cfg = p.registry.defaults();
  if (overrides.budget_fraction) cfg.budget_fraction = *overrides.budget_fraction;
  if (overrides.failure_policy) cfg.failure_policy = *overrides.failure_policy;
  if (overrides.infeasible_policy) cfg.infeasible_policy = *overrides.infeasible_policy;
  if (overrides.grid_resolution) cfg.grid_resolution = *overrides.grid_resolution;
  validate(cfg);
  const FusionMode mode = overrides.fusion_mode.value_or(p.registry.default_fusion_mode());
  if (text.empty()) throw ValidationError("query text must not be empty");

  EnsembleResponse resp;
  resp.query_id = query_id;
  resp.predicted_scores = predict(p.head, p.encoder.embed(query_id, text));

  const auto ctx = build_query_context(p.registry, query_id, text, cfg.token_mode);
  resp.costs = ctx.costs;
  for (std::size_t i = 0; i < ctx.clamped.size(); ++i)
    if (ctx.clamped[i])
      resp.warnings.push_back("query truncated to max_ctx=" + std::to_string(p.registry[i].max_ctx) + " tokens for '" +
                              p.registry[i].name + "'");
  resp.budget.fraction = cfg.budget_fraction;
  resp.budget.baseline_cost = ctx.total_baseline_cost();
  resp.budget.epsilon = cfg.budget_fraction * resp.budget.baseline_cost;

  const auto candidates = make_candidates(resp.predicted_scores, ctx.costs);
  resp.selection = select(candidates, resp.budget.epsilon, cfg.grid_resolution);

  if (resp.selection.infeasible) {
    if (cfg.infeasible_policy == InfeasiblePolicy::error)
      throw InfeasibleBudgetError("no model fits the budget of " + std::to_string(resp.budget.epsilon) +
                                  " FLOPs (fraction " + std::to_string(cfg.budget_fraction) + ")");
    const auto cheapest = static_cast<std::size_t>(
        std::min_element(ctx.costs.begin(), ctx.costs.end()) - ctx.costs.begin());
    auto& sel = resp.selection;
    sel.selected = {cheapest};
    sel.total_cost = ctx.costs[cheapest];
    sel.total_cost_units = sel.items[cheapest].cost_units;
    sel.total_target_score = sel.items[cheapest].target_score;
    resp.fallback_selection = true;
    resp.warnings.push_back("budget infeasible; fell back to cheapest model '" + p.registry[cheapest].name +
                            "' exceeding epsilon");
  }

  resp.responses = dispatch(p.registry, resp.selection.selected, text, cfg, p.backend);
  std::size_t ok = 0;
  for (const auto& r : resp.responses) {
    if (r.ok()) {
      ++ok;
      continue;
    }
    const auto msg = "model '" + p.registry[r.model_index].name + "' " + to_string(r.status) + ": " + r.error;
    if (cfg.failure_policy == FailurePolicy::fail_fast) throw PipelineError(msg);
    resp.warnings.push_back(msg);
  }
  if (ok == 0) throw PipelineError("all dispatched models failed");

  auto fused = fuse(text, resp.responses, resp.predicted_scores, mode, p.registry.fuser_endpoint(),
                    cfg.dispatch_timeout);
  resp.fused_text = std::move(fused.text);
  resp.fusion_mode_used = fused.mode_used;
  for (auto& w : fused.warnings) resp.warnings.push_back(std::move(w));
  return resp;
}

// ---------------------------------------------------------------------------
// Structured documents

inline nlohmann::json to_json(const ModelResponse& r, const Registry& registry) {
  nlohmann::json j{{"model_index", r.model_index},
                   {"model", registry[r.model_index].name},
                   {"status", to_string(r.status)},
                   {"latency_ms", r.latency.count()}};
  j["text"] = r.text ? nlohmann::json(*r.text) : nlohmann::json(nullptr);
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

inline nlohmann::json to_json(const SelectionResult& s) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : s.items)
    items.push_back({{"model_index", it.model_index},
                     {"quality", it.quality},
                     {"cost", it.cost},
                     {"target_score", it.target_score},
                     {"cost_units", it.cost_units}});
  nlohmann::json j{{"selected", s.selected},
                   {"total_cost", s.total_cost},
                   {"total_cost_units", s.total_cost_units},
                   {"total_target_score", s.total_target_score},
                   {"alpha", s.alpha},
                   {"epsilon", s.epsilon},
                   {"grid_resolution", s.grid_resolution},
                   {"infeasible", s.infeasible},
                   {"items", items}};
  if (s.raw_score_optimal) j["raw_score_optimal"] = *s.raw_score_optimal;
  return j;
}

inline nlohmann::json to_json(const EnsembleResponse& r, const Registry& registry) {
  nlohmann::json responses = nlohmann::json::array();
  for (const auto& x : r.responses) responses.push_back(to_json(x, registry));
  nlohmann::json names = nlohmann::json::array();
  for (auto i : r.selection.selected) names.push_back(registry[i].name);
  return {{"query_id", r.query_id},
          {"fused_text", r.fused_text},
          {"responses", responses},
          {"selection", to_json(r.selection)},
          {"selected_models", names},
          {"predicted_scores", r.predicted_scores},
          {"costs", r.costs},
          {"budget", {{"fraction", r.budget.fraction}, {"epsilon", r.budget.epsilon}, {"baseline_cost", r.budget.baseline_cost}}},
          {"fusion_mode_used", to_string(r.fusion_mode_used)},
          {"fallback_selection", r.fallback_selection},
          {"warnings", r.warnings}};
}

inline nlohmann::json models_document(const Registry& registry) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < registry.size(); ++i) {
    auto j = to_json(registry[i]);
    j["index"] = i;
    j["base_cost_per_token"] = per_token_cost(registry[i], 0);
    j["cost_per_context_token"] = 2.0 * static_cast<double>(registry[i].n_layer) * static_cast<double>(registry[i].d_model);
    arr.push_back(std::move(j));
  }
  return {{"models", arr}};
}

// ---------------------------------------------------------------------------
// Service

struct HttpReply {
  int status = 200;
  nlohmann::json body;
};

inline HttpReply error_reply(int status, std::string kind, std::string message) {
  return {status, {{"error", {{"kind", std::move(kind)}, {"message", std::move(message)}}}}};
}

// Request handling without the socket layer; the server delegates here.
class QueryService {
 public:
  explicit QueryService(Pipeline pipeline) : p_(pipeline) { check_pipeline_dims(p_); }

  HttpReply handle_query(std::string_view body) const {
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      return error_reply(400, "bad_request", std::string("malformed JSON: ") + e.what());
    }
    if (!req.is_object()) return error_reply(400, "bad_request", "request body must be an object");

    std::string text, query_id;
    QueryOverrides ov;
    try {
      if (!req.contains("text") || !req.at("text").is_string())
        return error_reply(400, "bad_request", "'text' is required and must be a string");
      text = req.at("text").get<std::string>();
      if (text.empty()) return error_reply(400, "bad_request", "'text' must not be empty");
      if (req.contains("query_id") && !req.at("query_id").is_null()) {
        query_id = req.at("query_id").get<std::string>();
      } else {
        query_id = "q-" + detail::hex64(detail::fnv1a64(text));
      }
      if (req.contains("budget_fraction") && !req.at("budget_fraction").is_null()) {
        if (!req.at("budget_fraction").is_number())
          return error_reply(400, "bad_request", "'budget_fraction' must be a number");
        const double f = req.at("budget_fraction").get<double>();
        if (!(f > 0 && f <= 1)) return error_reply(400, "bad_request", "'budget_fraction' must lie in (0, 1]");
        ov.budget_fraction = f;
      }
      if (req.contains("fusion_mode") && !req.at("fusion_mode").is_null())
        ov.fusion_mode = parse_fusion_mode(req.at("fusion_mode").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      return error_reply(400, "bad_request", e.what());
    } catch (const ValidationError& e) {
      return error_reply(400, "bad_request", e.what());
    }

    try {
      const auto resp = answer_query(p_, query_id, text, ov);
      return {200, to_json(resp, p_.registry)};
    } catch (const InfeasibleBudgetError& e) {
      return error_reply(500, "infeasible_budget", e.what());
    } catch (const PipelineError& e) {
      return error_reply(502, "dispatch_failed", e.what());
    } catch (const ValidationError& e) {
      return error_reply(400, "bad_request", e.what());
    } catch (const std::exception& e) {
      return error_reply(500, "internal", e.what());
    }
  }

  HttpReply handle_models() const { return {200, models_document(p_.registry)}; }

  const Pipeline& pipeline() const noexcept { return p_; }

 private:
  Pipeline p_;
};

inline void install_routes(httplib::Server& server, const QueryService& service) {
  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
  };
  server.Post("/v1/query", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.handle_query(req.body));
  });
  server.Get("/v1/models", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.handle_models());
  });
  server.Get("/healthz", [send](const httplib::Request&, httplib::Response& res) {
    send(res, {200, {{"status", "ok"}}});
  });
}

// Blocks until the server stops.
inline bool serve(const QueryService& service, const std::string& host, int port) {
  httplib::Server server;
  install_routes(server, service);
  return server.listen(host, port);
}

// Runs a server on a background thread for the lifetime of the object.
class BackgroundServer {
 public:
  template <typename Setup>
  explicit BackgroundServer(Setup&& setup, const std::string& host = "127.0.0.1") : host_(host) {
    setup(server_);
    port_ = server_.bind_to_any_port(host_);
    if (port_ <= 0) throw Error("failed to bind a local port");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~BackgroundServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }
  BackgroundServer(const BackgroundServer&) = delete;
  BackgroundServer& operator=(const BackgroundServer&) = delete;

  int port() const noexcept { return port_; }
  std::string base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }
  void stop() { server_.stop(); }

 private:
  httplib::Server server_;
  std::string host_;
  int port_ = 0;
  std::thread thread_;
};

// ---------------------------------------------------------------------------
// Scripted mock backend

struct MockBehavior {
  std::string text = "echo: {query}";  // {query} and {model} are expanded
  milliseconds latency{0};
  int http_status = 200;
};

struct MockScript {
  std::map<std::string, MockBehavior> models;
  // Fuser answers "fused(<n>): <first candidate>" unless disabled.
  bool fuser_enabled = true;
  int fuser_status = 200;

  static MockScript from_json(const nlohmann::json& j) {
    MockScript s;
    if (j.contains("models")) {
      for (const auto& [name, b] : j.at("models").items()) {
        MockBehavior mb;
        mb.text = b.value("text", mb.text);
        mb.latency = milliseconds(b.value("latency_ms", std::int64_t{0}));
        mb.http_status = b.value("status", 200);
        s.models[name] = mb;
      }
    }
    if (j.contains("fuser")) {
      s.fuser_enabled = j.at("fuser").value("enabled", true);
      s.fuser_status = j.at("fuser").value("status", 200);
    }
    return s;
  }
};

inline std::string expand_template(const std::string& tmpl, std::string_view query, std::string_view model) {
  return detail::replace_all(detail::replace_all(tmpl, "{query}", query), "{model}", model);
}

// Serves POST /v1/generate/<model> and POST /v1/fuse per the script.
class MockBackendServer {
 public:
  explicit MockBackendServer(MockScript script)
      : script_(std::move(script)), server_([this](httplib::Server& s) { install(s); }) {}

  std::string endpoint_for(const std::string& model) const { return server_.base_url() + "/v1/generate/" + model; }
  std::string fuser_endpoint() const { return server_.base_url() + "/v1/fuse"; }
  int port() const noexcept { return server_.port(); }
  std::size_t request_count() const noexcept { return requests_.load(); }

 private:
  void install(httplib::Server& s) {
    s.Post(R"(/v1/generate/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      const std::string model = req.matches[1];
      const auto it = script_.models.find(model);
      const MockBehavior behavior = it == script_.models.end() ? MockBehavior{} : it->second;
      if (behavior.latency.count() > 0) std::this_thread::sleep_for(behavior.latency);
      if (behavior.http_status != 200) {
        res.status = behavior.http_status;
        res.set_content(nlohmann::json{{"error", "scripted failure"}}.dump(), "application/json");
        return;
      }
      std::string prompt;
      try {
        prompt = nlohmann::json::parse(req.body).at("prompt").get<std::string>();
      } catch (const nlohmann::json::exception&) {
        res.status = 400;
        return;
      }
      res.set_content(nlohmann::json{{"text", expand_template(behavior.text, prompt, model)}}.dump(),
                      "application/json");
    });
    s.Post("/v1/fuse", [this](const httplib::Request& req, httplib::Response& res) {
      if (!script_.fuser_enabled || script_.fuser_status != 200) {
        res.status = script_.fuser_enabled ? script_.fuser_status : 503;
        return;
      }
      try {
        const auto j = nlohmann::json::parse(req.body);
        const auto& c = j.at("candidates");
        const std::string first = c.empty() ? "" : c.at(0).get<std::string>();
        res.set_content(
            nlohmann::json{{"text", "fused(" + std::to_string(c.size()) + "): " + first}}.dump(),
            "application/json");
      } catch (const nlohmann::json::exception&) {
        res.status = 400;
      }
    });
  }

  MockScript script_;
  std::atomic<std::size_t> requests_{0};
  BackgroundServer server_;
};

}  // namespace budgetens
