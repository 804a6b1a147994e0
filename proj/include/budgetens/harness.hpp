#pragma once

// Offline replay over MixInstruct-shaped datasets: each record carries the
// query plus every model's candidate response and an oracle quality score
// (BARTScore scale). No live models are contacted; the realized quality of a
// selection is proxied by the best oracle score among the selected models.

#include <budgetens/costing.hpp>
#include <budgetens/errors.hpp>
#include <budgetens/predictor.hpp>
#include <budgetens/registry.hpp>
#include <budgetens/selector.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace budgetens {

inline constexpr const char* kRealizedProxyNote =
    "realized quality = max oracle score among selected models (stand-in for fused-response quality)";

struct Candidate {
  std::string model;
  std::string text;
  double oracle_score = 0;
};

struct ReplayRecord {
  std::string query_id;
  std::string instruction;
  std::string input;
  std::vector<Candidate> candidates;
};

// Text used for costing and embedding.
inline std::string query_text(const ReplayRecord& r) { return r.instruction + "\n" + r.input; }

inline ReplayRecord parse_record(const nlohmann::json& j, const Registry& registry, const std::string& where) {
  auto fail = [&](const std::string& what) -> ValidationError { return ValidationError(where + ": " + what); };
  if (!j.is_object()) throw fail("record must be an object");
  ReplayRecord r;
  try {
    if (j.contains("query_id")) r.query_id = j.at("query_id").get<std::string>();
    else if (j.contains("id")) r.query_id = j.at("id").get<std::string>();
    else throw fail("missing 'id'");
    r.instruction = j.value("instruction", std::string{});
    r.input = j.value("input", std::string{});
    if (!j.contains("candidates") || !j.at("candidates").is_array()) throw fail("missing 'candidates' array");
    for (const auto& c : j.at("candidates")) {
      Candidate cand;
      cand.model = c.at("model").get<std::string>();
      cand.text = c.value("text", std::string{});
      if (c.contains("oracle_score")) cand.oracle_score = c.at("oracle_score").get<double>();
      else if (c.contains("scores") && c.at("scores").contains("bartscore"))
        cand.oracle_score = c.at("scores").at("bartscore").get<double>();
      else throw fail("candidate '" + cand.model + "' has no oracle score");
      if (!registry.contains(cand.model)) throw fail("unknown model '" + cand.model + "'");
      if (!std::isfinite(cand.oracle_score)) throw fail("non-finite score for model '" + cand.model + "'");
      for (const auto& prev : r.candidates)
        if (prev.model == cand.model) throw fail("duplicate candidate for model '" + cand.model + "'");
      r.candidates.push_back(std::move(cand));
    }
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
  return r;
}

// One JSON object per line; blank lines are skipped.
inline std::vector<ReplayRecord> parse_dataset(std::istream& in, const Registry& registry,
                                               const std::string& name = "<dataset>") {
  std::vector<ReplayRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(where + ": " + e.what());
    }
    out.push_back(parse_record(j, registry, where));
  }
  return out;
}

inline std::vector<ReplayRecord> load_dataset(const std::string& path, const Registry& registry) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset '" + path + "'");
  return parse_dataset(in, registry, path);
}

// Oracle scores in registry order; every registry model must be covered.
inline std::vector<double> oracle_scores(const ReplayRecord& r, const Registry& registry) {
  std::vector<double> s(registry.size(), 0.0);
  std::vector<bool> seen(registry.size(), false);
  for (const auto& c : r.candidates) {
    const auto i = registry.index_of(c.model);
    s[i] = c.oracle_score;
    seen[i] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) throw ValidationError("record '" + r.query_id + "' has no candidate for model '" + registry[i].name + "'");
  return s;
}

enum class TargetMode { raw, shifted };

inline std::vector<TrainingExample> build_training_set(std::span<const ReplayRecord> records, const Registry& registry,
                                                       const Encoder& encoder, TargetMode mode = TargetMode::raw) {
  std::vector<TrainingExample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    TrainingExample ex;
    ex.target = oracle_scores(r, registry);
    if (mode == TargetMode::shifted) ex.target = transform_scores(ex.target, choose_alpha(ex.target));
    ex.embedding = encoder.embed(r.query_id, query_text(r));
    out.push_back(std::move(ex));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Replay

struct ScoreSource {
  // Oracle scores when head is null, otherwise predictions.
  const PredictorHead* head = nullptr;
  const Encoder* encoder = nullptr;

  static ScoreSource oracle() { return {}; }
  static ScoreSource predictor(const PredictorHead& h, const Encoder& e) { return {&h, &e}; }
  bool is_oracle() const noexcept { return head == nullptr; }
  std::string name() const { return is_oracle() ? "oracle" : "predictor"; }

  std::vector<double> scores(const ReplayRecord& r, const Registry& registry) const {
    if (is_oracle()) return oracle_scores(r, registry);
    if (encoder->dim() != head->input_dim() || head->n_models() != registry.size())
      throw DimensionError("predictor dims do not match encoder/registry");
    return predict(*head, encoder->embed(r.query_id, query_text(r)));
  }
};

struct ReplayOutcome {
  double fraction = 0;
  double baseline_cost = 0;
  SelectionResult selection;
  std::optional<double> realized;  // unset when infeasible
};

inline double realized_proxy(std::span<const std::size_t> selected, std::span<const double> oracle) {
  double best = -std::numeric_limits<double>::infinity();
  for (auto i : selected) best = std::max(best, oracle[i]);
  return best;
}

inline std::vector<ReplayOutcome> replay_record(const ReplayRecord& r, const Registry& registry,
                                                const ScoreSource& source, std::span<const double> fractions,
                                                std::int64_t grid) {
  const auto oracle = oracle_scores(r, registry);
  const auto scores = source.is_oracle() ? oracle : source.scores(r, registry);
  const auto ctx = build_query_context(registry, r.query_id, query_text(r));
  const double baseline = ctx.total_baseline_cost();
  if (!(baseline > 0)) throw ValidationError("record '" + r.query_id + "' has zero baseline cost");
  std::vector<CandidateInput> cands;
  for (std::size_t i = 0; i < registry.size(); ++i) cands.push_back({i, scores[i], ctx.costs[i]});

  std::vector<ReplayOutcome> out;
  for (const auto& pt : budget_sweep(cands, fractions, baseline, grid)) {
    ReplayOutcome o;
    o.fraction = pt.fraction;
    o.baseline_cost = baseline;
    o.selection = pt.result;
    if (!o.selection.infeasible) o.realized = realized_proxy(o.selection.selected, oracle);
    out.push_back(std::move(o));
  }
  return out;
}

struct SweepRow {
  double fraction = 0;
  std::size_t n_records = 0;
  std::size_t infeasible = 0;
  double mean_selected_size = 0;
  double mean_realized_quality = 0;  // over feasible records
  double mean_predicted_target_score = 0;
  double mean_cost_ratio = 0;
};

struct SweepMetadata {
  std::string dataset_id;
  std::string encoder;
  std::string scores_source;
  std::uint64_t seed = 0;
  std::int64_t grid = 1000;
  std::string proxy = kRealizedProxyNote;
};

struct SweepReport {
  SweepMetadata metadata;
  std::vector<SweepRow> rows;
};

inline SweepReport replay_sweep(std::span<const ReplayRecord> records, const Registry& registry,
                                const ScoreSource& source, std::span<const double> fractions, std::int64_t grid,
                                SweepMetadata metadata = {}) {
  if (records.empty()) throw ValidationError("replay_sweep: no records");
  if (fractions.empty()) throw ValidationError("replay_sweep: no fractions");
  metadata.grid = grid;
  metadata.scores_source = source.name();
  if (metadata.encoder.empty()) metadata.encoder = source.is_oracle() ? "none" : source.encoder->describe();

  struct Acc {
    double size = 0, realized = 0, predicted = 0, ratio = 0;
    std::size_t feasible = 0, infeasible = 0;
  };
  std::vector<Acc> acc(fractions.size());
  for (const auto& r : records) {
    const auto outcomes = replay_record(r, registry, source, fractions, grid);
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
      const auto& o = outcomes[k];
      auto& a = acc[k];
      a.size += static_cast<double>(o.selection.selected.size());
      a.predicted += o.selection.total_target_score;
      a.ratio += o.selection.total_cost / o.baseline_cost;
      if (o.realized) {
        a.realized += *o.realized;
        ++a.feasible;
      } else {
        ++a.infeasible;
      }
    }
  }

  SweepReport report;
  report.metadata = std::move(metadata);
  const double n = static_cast<double>(records.size());
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    const auto& a = acc[k];
    SweepRow row;
    row.fraction = fractions[k];
    row.n_records = records.size();
    row.infeasible = a.infeasible;
    row.mean_selected_size = a.size / n;
    row.mean_realized_quality = a.feasible ? a.realized / static_cast<double>(a.feasible) : 0.0;
    row.mean_predicted_target_score = a.predicted / n;
    row.mean_cost_ratio = a.ratio / n;
    report.rows.push_back(row);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Baseline comparison

// A random non-empty subset with sum(units) <= capacity: up to 32 uniform
// draws, then a randomized greedy fill. Empty when no single item fits.
inline std::vector<std::size_t> sample_random_feasible(std::span<const std::int64_t> units, std::int64_t capacity,
                                                       Rng& rng) {
  const std::size_t n = units.size();
  std::vector<std::size_t> subset;
  for (int attempt = 0; attempt < 32; ++attempt) {
    subset.clear();
    std::int64_t used = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (rng() & 1u) {
        subset.push_back(i);
        used += units[i];
      }
    }
    if (!subset.empty() && used <= capacity) return subset;
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  subset.clear();
  std::int64_t used = 0;
  for (auto i : order) {
    if (used + units[i] <= capacity) {
      subset.push_back(i);
      used += units[i];
    }
  }
  std::sort(subset.begin(), subset.end());
  return subset;
}

struct ComparisonRow {
  std::string strategy;
  std::size_t feasible_records = 0;
  double mean_realized_quality = 0;
  double mean_cost_ratio = 0;
  double mean_selected_size = 0;
};

// Per-record optimality evidence: the oracle knapsack's objective next to
// every random subset's objective under the same alpha and grid.
struct RecordSamples {
  std::string query_id;
  double knapsack_target_score = 0;
  std::vector<double> random_target_scores;
};

struct ComparisonTable {
  double fraction = 0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::int64_t grid = 0;
  std::vector<ComparisonRow> rows;
  std::vector<RecordSamples> samples;
};

inline ComparisonTable baseline_compare(std::span<const ReplayRecord> records, const Registry& registry, double fraction,
                                        std::size_t trials, std::uint64_t seed, std::int64_t grid,
                                        std::optional<ScoreSource> predictor = std::nullopt) {
  if (trials < 1) throw ValidationError("baseline_compare: trials must be >= 1");
  if (!(fraction > 0 && fraction <= 1)) throw ValidationError("baseline_compare: fraction must lie in (0, 1]");
  Rng rng(seed);
  ComparisonTable table;
  table.fraction = fraction;
  table.trials = trials;
  table.seed = seed;
  table.grid = grid;

  struct Acc {
    double realized = 0, ratio = 0, size = 0;
    std::size_t feasible = 0, draws = 0;
    void add(double q, double r, double s) {
      realized += q;
      ratio += r;
      size += s;
      ++draws;
    }
  };
  const std::size_t n_models = registry.size();
  Acc knap_oracle, knap_pred, random;
  std::vector<Acc> single(n_models);

  for (const auto& r : records) {
    const auto oracle = oracle_scores(r, registry);
    const auto ctx = build_query_context(registry, r.query_id, query_text(r));
    const double baseline = ctx.total_baseline_cost();
    const double eps = fraction * baseline;

    auto run_knapsack = [&](std::span<const double> scores, Acc& a) {
      const auto sel = select(make_candidates(scores, ctx.costs), eps, grid);
      if (sel.infeasible) return sel;
      ++a.feasible;
      a.add(realized_proxy(sel.selected, oracle), sel.total_cost / baseline,
            static_cast<double>(sel.selected.size()));
      return sel;
    };
    const auto oracle_sel = run_knapsack(oracle, knap_oracle);
    if (predictor) run_knapsack(predictor->scores(r, registry), knap_pred);

    RecordSamples rs;
    rs.query_id = r.query_id;
    rs.knapsack_target_score = oracle_sel.total_target_score;
    const auto quant = quantize_costs(ctx.costs, eps, grid);
    const auto shifted = transform_scores(oracle, oracle_sel.alpha);
    bool any_feasible = false;
    for (std::size_t t = 0; t < trials; ++t) {
      const auto subset = sample_random_feasible(quant.units, quant.capacity, rng);
      if (subset.empty()) break;
      any_feasible = true;
      double cost = 0, target = 0;
      for (auto i : subset) {
        cost += ctx.costs[i];
        target += shifted[i];
      }
      rs.random_target_scores.push_back(target);
      random.add(realized_proxy(subset, oracle), cost / baseline, static_cast<double>(subset.size()));
    }
    if (any_feasible) ++random.feasible;
    table.samples.push_back(std::move(rs));

    for (std::size_t i = 0; i < n_models; ++i) {
      if (ctx.costs[i] > eps) continue;
      ++single[i].feasible;
      single[i].add(oracle[i], ctx.costs[i] / baseline, 1.0);
    }
  }

  auto row = [](std::string name, const Acc& a) {
    ComparisonRow out;
    out.strategy = std::move(name);
    out.feasible_records = a.feasible;
    if (a.draws) {
      const double d = static_cast<double>(a.draws);
      out.mean_realized_quality = a.realized / d;
      out.mean_cost_ratio = a.ratio / d;
      out.mean_selected_size = a.size / d;
    }
    return out;
  };
  table.rows.push_back(row("knapsack-oracle", knap_oracle));
  if (predictor) table.rows.push_back(row("knapsack-predictor", knap_pred));
  table.rows.push_back(row("random", random));
  for (std::size_t i = 0; i < n_models; ++i) table.rows.push_back(row("single:" + registry[i].name, single[i]));
  return table;
}

// ---------------------------------------------------------------------------
// Reports. Numbers are written with 6 significant digits in a fixed column
// order so identical reports produce identical bytes.

namespace detail {

inline std::string fmt6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline double round6(double x) { return std::strtod(fmt6(x).c_str(), nullptr); }

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

}  // namespace detail

enum class ReportFormat { csv, structured };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "structured" || s == "json") return ReportFormat::structured;
  throw ValidationError("invalid report format '" + std::string(s) + "'");
}

inline constexpr const char* kSweepCsvHeader =
    "fraction,n_records,infeasible,mean_selected_size,mean_realized_quality,mean_predicted_target_score,"
    "mean_cost_ratio";

inline std::string sweep_csv(const SweepReport& report) {
  std::string out = std::string(kSweepCsvHeader) + "\n";
  for (const auto& r : report.rows) {
    out += detail::fmt6(r.fraction) + "," + std::to_string(r.n_records) + "," + std::to_string(r.infeasible) + "," +
           detail::fmt6(r.mean_selected_size) + "," + detail::fmt6(r.mean_realized_quality) + "," +
           detail::fmt6(r.mean_predicted_target_score) + "," + detail::fmt6(r.mean_cost_ratio) + "\n";
  }
  return out;
}

inline nlohmann::json sweep_json(const SweepReport& report) {
  using detail::round6;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"fraction", round6(r.fraction)},
                    {"n_records", r.n_records},
                    {"infeasible", r.infeasible},
                    {"mean_selected_size", round6(r.mean_selected_size)},
                    {"mean_realized_quality", round6(r.mean_realized_quality)},
                    {"mean_predicted_target_score", round6(r.mean_predicted_target_score)},
                    {"mean_cost_ratio", round6(r.mean_cost_ratio)}});
  const auto& m = report.metadata;
  return {{"metadata",
           {{"dataset_id", m.dataset_id},
            {"encoder", m.encoder},
            {"scores_source", m.scores_source},
            {"seed", m.seed},
            {"grid", m.grid},
            {"proxy", m.proxy}}},
          {"rows", rows}};
}

inline std::string report_emit(const SweepReport& report, ReportFormat format) {
  if (format == ReportFormat::csv) return sweep_csv(report);
  return sweep_json(report).dump(2) + "\n";
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
  if (!out) throw Error("failed writing '" + path + "'");
}

inline SweepReport parse_sweep_json(const std::string& text) {
  SweepReport report;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto& m = j.at("metadata");
    report.metadata.dataset_id = m.at("dataset_id").get<std::string>();
    report.metadata.encoder = m.at("encoder").get<std::string>();
    report.metadata.scores_source = m.at("scores_source").get<std::string>();
    report.metadata.seed = m.at("seed").get<std::uint64_t>();
    report.metadata.grid = m.at("grid").get<std::int64_t>();
    report.metadata.proxy = m.at("proxy").get<std::string>();
    for (const auto& r : j.at("rows")) {
      SweepRow row;
      row.fraction = r.at("fraction").get<double>();
      row.n_records = r.at("n_records").get<std::size_t>();
      row.infeasible = r.at("infeasible").get<std::size_t>();
      row.mean_selected_size = r.at("mean_selected_size").get<double>();
      row.mean_realized_quality = r.at("mean_realized_quality").get<double>();
      row.mean_predicted_target_score = r.at("mean_predicted_target_score").get<double>();
      row.mean_cost_ratio = r.at("mean_cost_ratio").get<double>();
      report.rows.push_back(row);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("sweep report: ") + e.what());
  }
  return report;
}

inline std::string comparison_csv(const ComparisonTable& t) {
  std::string out = "strategy,feasible_records,mean_realized_quality,mean_cost_ratio,mean_selected_size\n";
  for (const auto& r : t.rows)
    out += detail::csv_field(r.strategy) + "," + std::to_string(r.feasible_records) + "," +
           detail::fmt6(r.mean_realized_quality) + "," + detail::fmt6(r.mean_cost_ratio) + "," +
           detail::fmt6(r.mean_selected_size) + "\n";
  return out;
}

inline nlohmann::json comparison_json(const ComparisonTable& t) {
  using detail::round6;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"strategy", r.strategy},
                    {"feasible_records", r.feasible_records},
                    {"mean_realized_quality", round6(r.mean_realized_quality)},
                    {"mean_cost_ratio", round6(r.mean_cost_ratio)},
                    {"mean_selected_size", round6(r.mean_selected_size)}});
  return {{"fraction", round6(t.fraction)}, {"trials", t.trials}, {"seed", t.seed},
          {"grid", t.grid},                 {"proxy", kRealizedProxyNote}, {"rows", rows}};
}

}  // namespace budgetens
