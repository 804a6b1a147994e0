// budgetens: command-line front end.
//
//   budgetens ingest          --dataset FILE
//   budgetens cost            --text STR | --text-file FILE
//   budgetens select          --candidates FILE (--budget-fraction F | --epsilon E)
//   budgetens sweep           --candidates FILE | --dataset FILE  [--fractions ...]
//   budgetens compare         --dataset FILE [--fraction F] [--trials N]
//   budgetens train-predictor --dataset FILE --out CHECKPOINT
//   budgetens predict         --checkpoint FILE --text STR
//   budgetens route           --checkpoint FILE [--bind HOST:PORT]
//   budgetens mock-backend    --script FILE [--bind HOST:PORT]
//
// Global flags: --config, --seed, --grid, --format (text|csv|json).

#include <budgetens/budgetens.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace budgetens;

namespace {

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  std::int64_t grid = 0;  // 0 = registry default
  std::string format = "text";
};

Registry require_registry(const Globals& g) {
  const auto path = resolve_config_path(g.config.empty() ? std::nullopt : std::optional<std::string>(g.config));
  if (!path) throw ValidationError(std::string("no registry: pass --config or set ") + kConfigEnvVar);
  return load_registry(*path);
}

std::int64_t grid_for(const Globals& g, const std::optional<Registry>& reg) {
  if (g.grid > 0) return g.grid;
  return reg ? reg->defaults().grid_resolution : PipelineConfig{}.grid_resolution;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::pair<std::string, int> parse_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw ValidationError("--bind expects HOST:PORT");
  return {bind.substr(0, colon), std::stoi(bind.substr(colon + 1))};
}

std::string g6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

// Candidate file: CSV with header "model,quality,cost" (cost in FLOPs).
struct CandidateFile {
  std::vector<std::string> names;
  std::vector<CandidateInput> inputs;
};

CandidateFile load_candidates(const std::string& path) {
  std::istringstream in(read_file(path));
  CandidateFile f;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.rfind("model,", 0) == 0) continue;
    std::istringstream row(line);
    std::string name, q, c;
    if (!std::getline(row, name, ',') || !std::getline(row, q, ',') || !std::getline(row, c, ','))
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected model,quality,cost");
    try {
      f.inputs.push_back({f.names.size(), std::stod(q), std::stod(c)});
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": bad number");
    }
    f.names.push_back(name);
  }
  if (f.inputs.empty()) throw ValidationError(path + ": no candidates");
  return f;
}

std::vector<std::string> names_of(const std::vector<std::size_t>& idx, const std::vector<std::string>& names) {
  std::vector<std::string> out;
  for (auto i : idx) out.push_back(names.at(i));
  return out;
}

Encoder make_encoder(const std::string& embeddings, std::size_t dim, std::uint64_t seed) {
  if (!embeddings.empty()) return Encoder::from_store(EmbeddingStore::load(embeddings));
  return Encoder::hashed_ngram(dim, seed);
}

Encoder encoder_for_checkpoint(const Checkpoint& ck, const std::string& embeddings) {
  if (!embeddings.empty()) return Encoder::from_store(EmbeddingStore::load(embeddings));
  if (ck.encoder) return Encoder::hashed_ngram(ck.encoder->dim, ck.encoder->seed);
  throw ValidationError("checkpoint has no built-in encoder; pass --embeddings");
}

std::vector<double> parse_fractions(const std::vector<double>& given) {
  if (!given.empty()) return given;
  return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
}

// ---------------------------------------------------------------------------

int cmd_ingest(const Globals& g, const std::string& dataset) {
  const auto reg = require_registry(g);
  const auto records = load_dataset(dataset, reg);
  std::vector<double> sum(reg.size(), 0.0);
  std::vector<std::size_t> count(reg.size(), 0);
  for (const auto& r : records)
    for (const auto& c : r.candidates) {
      const auto i = reg.index_of(c.model);
      sum[i] += c.oracle_score;
      ++count[i];
    }
  if (g.format == "json") {
    nlohmann::json models = nlohmann::json::array();
    for (std::size_t i = 0; i < reg.size(); ++i)
      models.push_back({{"model", reg[i].name},
                        {"candidates", count[i]},
                        {"mean_oracle_score", count[i] ? sum[i] / static_cast<double>(count[i]) : 0.0}});
    std::cout << nlohmann::json{{"records", records.size()}, {"models", models}}.dump(2) << "\n";
    return 0;
  }
  if (g.format == "csv") {
    std::cout << "model,candidates,mean_oracle_score\n";
    for (std::size_t i = 0; i < reg.size(); ++i)
      std::cout << reg[i].name << "," << count[i] << "," << g6(count[i] ? sum[i] / count[i] : 0.0) << "\n";
    return 0;
  }
  std::cout << "records: " << records.size() << "\n";
  for (std::size_t i = 0; i < reg.size(); ++i)
    std::cout << "  " << reg[i].name << ": " << count[i] << " candidates, mean oracle score "
              << g6(count[i] ? sum[i] / count[i] : 0.0) << "\n";
  return 0;
}

int cmd_cost(const Globals& g, std::string text, const std::string& text_file, const std::string& token_mode) {
  const auto reg = require_registry(g);
  if (!text_file.empty()) text = read_file(text_file);
  const auto mode = token_mode.empty() ? reg.defaults().token_mode : parse_token_mode(token_mode);
  const auto ctx = build_query_context(reg, "cli", text, mode);
  const double total = ctx.total_baseline_cost();
  if (g.format == "csv" || g.format == "json") {
    nlohmann::json rows = nlohmann::json::array();
    if (g.format == "csv") std::cout << "model,tokens,clamped,flops_per_token,cost_flops,share\n";
    for (std::size_t i = 0; i < reg.size(); ++i) {
      const double ptc = per_token_cost(reg[i], ctx.token_counts[i]);
      const double share = total > 0 ? ctx.costs[i] / total : 0.0;
      if (g.format == "csv")
        std::cout << reg[i].name << "," << ctx.token_counts[i] << "," << (ctx.clamped[i] ? 1 : 0) << "," << g6(ptc)
                  << "," << g6(ctx.costs[i]) << "," << g6(share) << "\n";
      else
        rows.push_back({{"model", reg[i].name},
                        {"tokens", ctx.token_counts[i]},
                        {"clamped", static_cast<bool>(ctx.clamped[i])},
                        {"flops_per_token", ptc},
                        {"cost_flops", ctx.costs[i]},
                        {"share", share}});
    }
    if (g.format == "json") std::cout << nlohmann::json{{"models", rows}, {"total_baseline_cost", total}}.dump(2) << "\n";
    return 0;
  }
  std::printf("%-36s %8s %14s %14s %7s\n", "model", "tokens", "FLOPs/token", "cost (FLOPs)", "share");
  for (std::size_t i = 0; i < reg.size(); ++i)
    std::printf("%-36s %8lld%s %14.6g %14.6g %6.2f%%\n", reg[i].name.c_str(),
                static_cast<long long>(ctx.token_counts[i]), ctx.clamped[i] ? "*" : " ",
                per_token_cost(reg[i], ctx.token_counts[i]), ctx.costs[i], total > 0 ? 100 * ctx.costs[i] / total : 0.0);
  std::printf("total baseline cost: %.6g FLOPs\n", total);
  return 0;
}

void print_selection(const Globals& g, const SelectionResult& r, const std::vector<std::string>& names,
                     double fraction) {
  const auto chosen = names_of(r.selected, names);
  if (g.format == "json") {
    auto j = to_json(r);
    j["selected_models"] = chosen;
    if (r.raw_score_optimal) j["raw_score_optimal_models"] = names_of(*r.raw_score_optimal, names);
    std::cout << j.dump(2) << "\n";
    return;
  }
  if (g.format == "csv") {
    std::cout << "fraction,epsilon,alpha,total_target_score,total_cost,total_cost_units,infeasible,selected\n";
    std::cout << g6(fraction) << "," << g6(r.epsilon) << "," << g6(r.alpha) << "," << g6(r.total_target_score) << ","
              << g6(r.total_cost) << "," << r.total_cost_units << "," << (r.infeasible ? 1 : 0) << ","
              << join(chosen, ";") << "\n";
    return;
  }
  std::cout << "epsilon:            " << g6(r.epsilon) << " FLOPs\n";
  std::cout << "alpha:              " << g6(r.alpha) << "\n";
  std::cout << "grid:               " << r.grid_resolution << " units\n";
  std::cout << "selected:           " << (chosen.empty() ? "(none: infeasible)" : join(chosen, ", ")) << "\n";
  std::cout << "total target score: " << g6(r.total_target_score) << "\n";
  std::cout << "total cost:         " << g6(r.total_cost) << " FLOPs (" << r.total_cost_units << " units)\n";
  if (r.raw_score_optimal)
    std::cout << "raw-score optimum:  " << join(names_of(*r.raw_score_optimal, names), ", ") << "\n";
}

int cmd_select(const Globals& g, const std::string& file, double fraction, double epsilon, bool raw) {
  const auto cands = load_candidates(file);
  double total = 0;
  for (const auto& c : cands.inputs) total += c.cost;
  if (epsilon <= 0) {
    if (!(fraction > 0 && fraction <= 1)) throw ValidationError("--budget-fraction must lie in (0, 1]");
    epsilon = fraction * total;
  } else {
    fraction = total > 0 ? epsilon / total : 0;
  }
  const auto r = select(cands.inputs, epsilon, grid_for(g, std::nullopt), {.report_raw_optimum = raw});
  print_selection(g, r, cands.names, fraction);
  return r.infeasible ? 3 : 0;
}

int cmd_sweep_candidates(const Globals& g, const std::string& file, const std::vector<double>& fractions) {
  const auto cands = load_candidates(file);
  double total = 0;
  for (const auto& c : cands.inputs) total += c.cost;
  const auto pts = budget_sweep(cands.inputs, fractions, total, grid_for(g, std::nullopt));
  std::cout << "fraction,score,cost,selected\n";
  for (const auto& p : pts)
    std::cout << g6(p.fraction) << "," << g6(p.result.total_target_score) << "," << g6(p.result.total_cost) << ","
              << join(names_of(p.result.selected, cands.names), ";") << "\n";
  return 0;
}

int cmd_sweep_dataset(const Globals& g, const std::string& dataset, const std::vector<double>& fractions,
                      const std::string& checkpoint, const std::string& embeddings, const std::string& out) {
  const auto reg = require_registry(g);
  const auto records = load_dataset(dataset, reg);
  SweepMetadata meta;
  meta.dataset_id = dataset;
  meta.seed = g.seed;
  SweepReport report;
  if (checkpoint.empty()) {
    report = replay_sweep(records, reg, ScoreSource::oracle(), fractions, grid_for(g, reg), meta);
  } else {
    const auto ck = load_checkpoint(checkpoint);
    const auto enc = encoder_for_checkpoint(ck, embeddings);
    report = replay_sweep(records, reg, ScoreSource::predictor(ck.head, enc), fractions, grid_for(g, reg), meta);
  }
  const auto text = report_emit(report, g.format == "json" ? ReportFormat::structured : ReportFormat::csv);
  if (out.empty()) std::cout << text;
  else write_file(out, text);
  return 0;
}

int cmd_compare(const Globals& g, const std::string& dataset, double fraction, std::size_t trials,
                const std::string& checkpoint, const std::string& embeddings) {
  const auto reg = require_registry(g);
  const auto records = load_dataset(dataset, reg);
  std::optional<Checkpoint> ck;
  std::optional<Encoder> enc;
  std::optional<ScoreSource> pred;
  if (!checkpoint.empty()) {
    ck = load_checkpoint(checkpoint);
    enc = encoder_for_checkpoint(*ck, embeddings);
    pred = ScoreSource::predictor(ck->head, *enc);
  }
  const auto table = baseline_compare(records, reg, fraction, trials, g.seed, grid_for(g, reg), pred);
  if (g.format == "json") {
    std::cout << comparison_json(table).dump(2) << "\n";
    return 0;
  }
  if (g.format == "csv") {
    std::cout << comparison_csv(table);
    return 0;
  }
  std::printf("fraction %.3g, %zu trials, seed %llu (%s)\n", fraction, trials,
              static_cast<unsigned long long>(g.seed), kRealizedProxyNote);
  std::printf("%-40s %9s %14s %10s %8s\n", "strategy", "feasible", "mean quality", "cost ratio", "size");
  for (const auto& r : table.rows)
    std::printf("%-40s %9zu %14.6g %10.4f %8.3f\n", r.strategy.c_str(), r.feasible_records, r.mean_realized_quality,
                r.mean_cost_ratio, r.mean_selected_size);
  return 0;
}

struct TrainOptions {
  std::string dataset, out, embeddings, targets = "raw";
  std::size_t dim = 256, hidden = 256, glu = 128;
  double dropout = 0.2;
  TrainConfig cfg;
};

int cmd_train(const Globals& g, TrainOptions o) {
  const auto reg = require_registry(g);
  const auto records = load_dataset(o.dataset, reg);
  const auto enc = make_encoder(o.embeddings, o.dim, g.seed);
  const auto mode = o.targets == "shifted" ? TargetMode::shifted : TargetMode::raw;
  if (o.targets != "raw" && o.targets != "shifted") throw ValidationError("--targets must be raw or shifted");
  const auto data = build_training_set(records, reg, enc, mode);
  o.cfg.seed = g.seed;
  const auto head = init_head({enc.dim(), o.hidden, o.glu, reg.size()}, g.seed, o.dropout);
  const auto result = train(head, data, o.cfg);
  Checkpoint ck;
  ck.head = result.head;
  if (enc.is_hashed()) ck.encoder = enc.hashed();
  ck.train_config = o.cfg;
  save_checkpoint(o.out, ck);
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
    std::cout << "epoch " << e + 1 << " loss " << g6(result.epoch_loss[e]) << "\n";
  std::cout << "final eval loss " << g6(evaluate_loss(result.head, data, o.cfg.delta)) << "\n";
  std::cout << "wrote " << o.out << "\n";
  return 0;
}

int cmd_predict(const Globals& g, const std::string& checkpoint, const std::string& text, const std::string& query_id,
                const std::string& embeddings) {
  const auto ck = load_checkpoint(checkpoint);
  const auto enc = encoder_for_checkpoint(ck, embeddings);
  const auto scores = predict(ck.head, enc.embed(query_id, text));
  std::optional<Registry> reg;
  if (!g.config.empty() || std::getenv(kConfigEnvVar)) reg = require_registry(g);
  auto name = [&](std::size_t i) { return reg && i < reg->size() ? (*reg)[i].name : "model_" + std::to_string(i); };
  if (g.format == "json") {
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t i = 0; i < scores.size(); ++i) j.push_back({{"model", name(i)}, {"predicted_score", scores[i]}});
    std::cout << j.dump(2) << "\n";
  } else {
    if (g.format == "csv") std::cout << "model,predicted_score\n";
    for (std::size_t i = 0; i < scores.size(); ++i)
      std::cout << name(i) << (g.format == "csv" ? "," : "\t") << g6(scores[i]) << "\n";
  }
  return 0;
}

int cmd_route(const Globals& g, const std::string& checkpoint, const std::string& embeddings, const std::string& bind,
              double fraction, const std::string& fusion) {
  auto reg = require_registry(g);
  PipelineConfig cfg = reg.defaults();
  if (fraction > 0) cfg.budget_fraction = fraction;
  if (!fusion.empty()) cfg.fusion_mode = parse_fusion_mode(fusion);
  if (g.grid > 0) cfg.grid_resolution = g.grid;
  reg = Registry(reg.models(), reg.fuser_endpoint(), cfg);

  Checkpoint ck;
  std::optional<Encoder> enc;
  if (checkpoint.empty()) {
    std::cerr << "warning: no --checkpoint; serving an untrained head over the hashed encoder\n";
    ck.head = init_head({256, 256, 128, reg.size()}, g.seed);
    enc = Encoder::hashed_ngram(256, g.seed);
  } else {
    ck = load_checkpoint(checkpoint);
    enc = encoder_for_checkpoint(ck, embeddings);
  }
  HttpModelBackend backend;
  QueryService service(Pipeline{reg, ck.head, *enc, backend});
  const auto [host, port] = parse_bind(bind);
  std::cerr << "listening on " << host << ":" << port << "\n";
  return serve(service, host, port) ? 0 : 1;
}

int cmd_mock_backend(const std::string& script_path, const std::string& bind) {
  const auto script = MockScript::from_json(nlohmann::json::parse(read_file(script_path)));
  const auto [host, port] = parse_bind(bind);
  httplib::Server server;
  // Same handlers as MockBackendServer, bound to the requested address.
  server.Post(R"(/v1/generate/([^/]+))", [&](const httplib::Request& req, httplib::Response& res) {
    const std::string model = req.matches[1];
    const auto it = script.models.find(model);
    const MockBehavior b = it == script.models.end() ? MockBehavior{} : it->second;
    if (b.latency.count() > 0) std::this_thread::sleep_for(b.latency);
    if (b.http_status != 200) {
      res.status = b.http_status;
      return;
    }
    const auto prompt = nlohmann::json::parse(req.body).value("prompt", std::string{});
    res.set_content(nlohmann::json{{"text", expand_template(b.text, prompt, model)}}.dump(), "application/json");
  });
  server.Post("/v1/fuse", [&](const httplib::Request& req, httplib::Response& res) {
    if (!script.fuser_enabled || script.fuser_status != 200) {
      res.status = script.fuser_enabled ? script.fuser_status : 503;
      return;
    }
    const auto j = nlohmann::json::parse(req.body);
    const auto& c = j.at("candidates");
    res.set_content(nlohmann::json{{"text", "fused(" + std::to_string(c.size()) + "): " +
                                                (c.empty() ? std::string{} : c.at(0).get<std::string>())}}
                        .dump(),
                    "application/json");
  });
  std::cerr << "mock backend on " << host << ":" << port << " (POST /v1/generate/<model>, POST /v1/fuse)\n";
  return server.listen(host, port) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budget-constrained LLM ensemble selection toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Registry file (default: $BUDGETENS_CONFIG)");
  app.add_option("--seed", g.seed, "Seed for encoders, initialization, shuffling and sampling");
  app.add_option("--grid", g.grid, "Knapsack cost grid resolution (default: registry setting)");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"text", "csv", "json"}));

  std::string dataset;
  auto* ingest = app.add_subcommand("ingest", "Validate a dataset against the registry");
  ingest->add_option("--dataset", dataset, "Dataset (JSON lines)")->required();

  std::string text, text_file, token_mode;
  auto* cost = app.add_subcommand("cost", "Per-model FLOPs cost table for a query");
  cost->add_option("--text", text, "Query text");
  cost->add_option("--text-file", text_file, "Read the query from a file");
  cost->add_option("--token-mode", token_mode, "chars_ratio or whitespace");

  std::string candidates;
  double fraction = 0.2, epsilon = 0;
  bool raw = false;
  auto* sel = app.add_subcommand("select", "Select models for one query from a candidate file");
  sel->add_option("--candidates", candidates, "CSV: model,quality,cost")->required();
  sel->add_option("--budget-fraction", fraction, "Budget as a fraction of the summed cost");
  sel->add_option("--epsilon", epsilon, "Absolute budget in FLOPs (overrides --budget-fraction)");
  sel->add_flag("--raw-diagnostic", raw, "Also report the subset optimal for un-shifted scores");

  std::vector<double> fractions;
  std::string checkpoint, embeddings, out;
  auto* sweep = app.add_subcommand("sweep", "Budget sweep over a candidate file or a replay dataset");
  auto* sweep_src = sweep->add_option_group("source");
  sweep_src->add_option("--candidates", candidates, "CSV: model,quality,cost");
  sweep_src->add_option("--dataset", dataset, "Replay dataset (JSON lines)");
  sweep_src->require_option(1);
  sweep->add_option("--fractions", fractions, "Budget fractions")->delimiter(',');
  sweep->add_option("--checkpoint", checkpoint, "Use predicted scores from this head (dataset mode)");
  sweep->add_option("--embeddings", embeddings, "Precomputed embeddings (JSON lines)");
  sweep->add_option("--out", out, "Write the report here instead of stdout");

  std::size_t trials = 10;
  double cmp_fraction = 0.2;
  auto* compare = app.add_subcommand("compare", "Knapsack vs random and single-model baselines");
  compare->add_option("--dataset", dataset, "Replay dataset")->required();
  compare->add_option("--fraction", cmp_fraction, "Budget fraction");
  compare->add_option("--trials", trials, "Random draws per record");
  compare->add_option("--checkpoint", checkpoint, "Also evaluate knapsack over predicted scores");
  compare->add_option("--embeddings", embeddings, "Precomputed embeddings (JSON lines)");

  TrainOptions topt;
  auto* trainc = app.add_subcommand("train-predictor", "Train the quality regression head");
  trainc->add_option("--dataset", topt.dataset, "Training dataset")->required();
  trainc->add_option("--out", topt.out, "Checkpoint path")->required();
  trainc->add_option("--embeddings", topt.embeddings, "Precomputed embeddings (default: hashed n-grams)");
  trainc->add_option("--dim", topt.dim, "Hashed encoder dimension");
  trainc->add_option("--hidden", topt.hidden, "First linear layer width");
  trainc->add_option("--glu", topt.glu, "GLU output width");
  trainc->add_option("--dropout", topt.dropout, "Dropout probability");
  trainc->add_option("--epochs", topt.cfg.epochs, "Epochs");
  trainc->add_option("--lr", topt.cfg.learning_rate, "Adam learning rate");
  trainc->add_option("--weight-decay", topt.cfg.weight_decay, "Decoupled weight decay");
  trainc->add_option("--delta", topt.cfg.delta, "Huber threshold");
  trainc->add_option("--batch-size", topt.cfg.batch_size, "Minibatch size");
  trainc->add_option("--targets", topt.targets, "raw or shifted");

  std::string query_id = "cli";
  auto* pred = app.add_subcommand("predict", "Predicted quality per model for a query");
  pred->add_option("--checkpoint", checkpoint, "Head checkpoint")->required();
  pred->add_option("--text", text, "Query text");
  pred->add_option("--query-id", query_id, "Query id (file encoders)");
  pred->add_option("--embeddings", embeddings, "Precomputed embeddings (JSON lines)");

  std::string bind = "127.0.0.1:8080", fusion;
  double route_fraction = 0;
  auto* route = app.add_subcommand("route", "Serve the pipeline over HTTP");
  route->add_option("--checkpoint", checkpoint, "Head checkpoint");
  route->add_option("--embeddings", embeddings, "Precomputed embeddings (JSON lines)");
  route->add_option("--bind", bind, "HOST:PORT");
  route->add_option("--budget-fraction", route_fraction, "Default budget fraction");
  route->add_option("--fusion-mode", fusion, "remote or best_predicted");

  std::string script;
  auto* mock = app.add_subcommand("mock-backend", "Run scripted mock model and fuser endpoints");
  mock->add_option("--script", script, "Behaviour script (JSON)")->required();
  mock->add_option("--bind", bind, "HOST:PORT");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(g, dataset);
    if (*cost) return cmd_cost(g, text, text_file, token_mode);
    if (*sel) return cmd_select(g, candidates, fraction, epsilon, raw);
    if (*sweep) {
      const auto fr = parse_fractions(fractions);
      if (!candidates.empty()) return cmd_sweep_candidates(g, candidates, fr);
      return cmd_sweep_dataset(g, dataset, fr, checkpoint, embeddings, out);
    }
    if (*compare) return cmd_compare(g, dataset, cmp_fraction, trials, checkpoint, embeddings);
    if (*trainc) return cmd_train(g, topt);
    if (*pred) return cmd_predict(g, checkpoint, text, query_id, embeddings);
    if (*route) return cmd_route(g, checkpoint, embeddings, bind, route_fraction, fusion);
    if (*mock) return cmd_mock_backend(script, bind);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
