#pragma once

// Quality predictor: a small regression head mapping a query embedding to one
// predicted quality score per registry model.
//
//   dropout(p) -> GELU -> Linear(d, h) -> GLU(h, g) -> Linear(g, n_models)
//
// GELU is the exact x * Phi(x). GLU uses two separate projections,
// (zW + b) * sigmoid(zV + c). Training minimizes the mean per-model Huber loss
// with Adam and decoupled weight decay. Gradients are analytic.

#include <budgetens/errors.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace budgetens {

using Rng = std::mt19937_64;

namespace detail {

// Uniform double in [0, 1) from the top 53 bits; independent of the
// standard library's distribution implementations.
inline double unit_uniform(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ull) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Activations and loss

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double gelu(double x) { return x * normal_cdf(x); }

inline double gelu_derivative(double x) {
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return normal_cdf(x) + x * pdf;
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double huber(double residual, double delta) {
  const double a = std::abs(residual);
  return a <= delta ? 0.5 * residual * residual : delta * (a - 0.5 * delta);
}

inline double huber_derivative(double residual, double delta) { return std::clamp(residual, -delta, delta); }

// Mean over components.
inline double huber_loss(std::span<const double> pred, std::span<const double> target, double delta) {
  if (pred.size() != target.size()) throw DimensionError("huber_loss: length mismatch");
  if (!(delta > 0)) throw ValidationError("huber_loss: delta must be > 0");
  if (pred.empty()) return 0.0;
  double s = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += huber(pred[i] - target[i], delta);
  return s / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------
// Parameters

// Affine map y = x W + b with W stored row-major as (in x out).
struct Linear {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  Linear() = default;
  Linear(std::size_t in_dim, std::size_t out_dim)
      : in(in_dim), out(out_dim), weight(in_dim * out_dim, 0.0), bias(out_dim, 0.0) {}

  double& w(std::size_t i, std::size_t o) { return weight[i * out + o]; }
  double w(std::size_t i, std::size_t o) const { return weight[i * out + o]; }

  std::vector<double> apply(std::span<const double> x) const {
    if (x.size() != in) throw DimensionError("linear: expected input of length " + std::to_string(in) +
                                             ", got " + std::to_string(x.size()));
    std::vector<double> y(bias);
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = x[i];
      if (xi == 0) continue;
      const double* row = weight.data() + i * out;
      for (std::size_t o = 0; o < out; ++o) y[o] += xi * row[o];
    }
    return y;
  }
};

struct HeadParams {
  Linear linear1;  // d -> h
  Linear glu_w;    // h -> g, linear branch
  Linear glu_v;    // h -> g, gate branch
  Linear linear2;  // g -> n_models

  // Visits every tensor in a fixed order; the order defines the checkpoint
  // layout and the optimizer state layout.
  template <typename Self, typename Fn>
  static void visit(Self& self, Fn&& fn) {
    fn("linear1.weight", self.linear1.weight);
    fn("linear1.bias", self.linear1.bias);
    fn("glu.W", self.glu_w.weight);
    fn("glu.b", self.glu_w.bias);
    fn("glu.V", self.glu_v.weight);
    fn("glu.c", self.glu_v.bias);
    fn("linear2.weight", self.linear2.weight);
    fn("linear2.bias", self.linear2.bias);
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    visit(*this, std::forward<Fn>(fn));
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    visit(*this, std::forward<Fn>(fn));
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_tensor([&](const char*, const std::vector<double>& t) { n += t.size(); });
    return n;
  }
};

struct HeadDims {
  std::size_t d = 256;
  std::size_t h = 256;
  std::size_t g = 128;
  std::size_t n_models = 1;

  bool operator==(const HeadDims&) const = default;
};

struct PredictorHead {
  double dropout_p = 0.2;
  HeadParams params;

  PredictorHead() = default;
  PredictorHead(HeadDims dims, double dropout = 0.2) : dropout_p(dropout) {
    if (dims.d == 0 || dims.h == 0 || dims.g == 0 || dims.n_models == 0)
      throw DimensionError("predictor head dims must all be >= 1");
    if (!(dropout >= 0 && dropout < 1)) throw ValidationError("dropout_p must lie in [0, 1)");
    params.linear1 = Linear(dims.d, dims.h);
    params.glu_w = Linear(dims.h, dims.g);
    params.glu_v = Linear(dims.h, dims.g);
    params.linear2 = Linear(dims.g, dims.n_models);
  }

  HeadDims dims() const {
    return {params.linear1.in, params.linear1.out, params.glu_w.out, params.linear2.out};
  }
  std::size_t input_dim() const { return params.linear1.in; }
  std::size_t n_models() const { return params.linear2.out; }
};

// Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases.
inline PredictorHead init_head(HeadDims dims, std::uint64_t seed, double dropout_p = 0.2) {
  PredictorHead head(dims, dropout_p);
  Rng rng(seed);
  auto fill = [&](Linear& l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    for (auto& w : l.weight) w = (2.0 * detail::unit_uniform(rng) - 1.0) * limit;
  };
  fill(head.params.linear1);
  fill(head.params.glu_w);
  fill(head.params.glu_v);
  fill(head.params.linear2);
  return head;
}

// ---------------------------------------------------------------------------
// Forward / backward

struct GluParams {
  const Linear& linear;
  const Linear& gate;
};

inline std::vector<double> glu(std::span<const double> x, GluParams p) {
  if (p.linear.in != p.gate.in || p.linear.out != p.gate.out)
    throw DimensionError("glu: linear and gate projections differ in shape");
  auto a = p.linear.apply(x);
  const auto b = p.gate.apply(x);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] *= sigmoid(b[i]);
  return a;
}

// Per-coordinate multiplier applied by dropout: 0 for dropped units and
// 1/(1-p) for kept ones.
using DropoutMask = std::vector<double>;

inline DropoutMask sample_dropout_mask(std::size_t d, double p, Rng& rng) {
  DropoutMask mask(d, 1.0);
  if (p <= 0) return mask;
  const double keep_scale = 1.0 / (1.0 - p);
  for (auto& m : mask) m = detail::unit_uniform(rng) < p ? 0.0 : keep_scale;
  return mask;
}

struct ForwardTrace {
  std::vector<double> dropped;  // after dropout
  std::vector<double> z;        // linear1 output
  std::vector<double> lin;      // GLU linear branch
  std::vector<double> gate;     // sigmoid of the gate branch
  std::vector<double> glu_out;
  std::vector<double> output;
};

inline ForwardTrace forward_trace(const PredictorHead& head, std::span<const double> x,
                                  const DropoutMask* mask = nullptr) {
  if (x.size() != head.input_dim())
    throw DimensionError("embedding has dimension " + std::to_string(x.size()) + ", head expects " +
                         std::to_string(head.input_dim()));
  ForwardTrace t;
  t.dropped.assign(x.begin(), x.end());
  if (mask) {
    if (mask->size() != x.size()) throw DimensionError("dropout mask length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) t.dropped[i] *= (*mask)[i];
  }
  std::vector<double> act(t.dropped.size());
  std::transform(t.dropped.begin(), t.dropped.end(), act.begin(), [](double v) { return gelu(v); });
  t.z = head.params.linear1.apply(act);
  t.lin = head.params.glu_w.apply(t.z);
  t.gate = head.params.glu_v.apply(t.z);
  t.glu_out.resize(t.lin.size());
  for (std::size_t j = 0; j < t.lin.size(); ++j) {
    t.gate[j] = sigmoid(t.gate[j]);
    t.glu_out[j] = t.lin[j] * t.gate[j];
  }
  t.output = head.params.linear2.apply(t.glu_out);
  return t;
}

// With training=true a fresh dropout mask is drawn from rng (required then).
inline std::vector<double> forward(const PredictorHead& head, std::span<const double> x, bool training,
                                   Rng* rng = nullptr) {
  if (training && head.dropout_p > 0) {
    if (!rng) throw ValidationError("forward: training mode needs an rng");
    const auto mask = sample_dropout_mask(x.size(), head.dropout_p, *rng);
    return forward_trace(head, x, &mask).output;
  }
  return forward_trace(head, x).output;
}

inline std::vector<double> predict(const PredictorHead& head, std::span<const double> x) {
  return forward(head, x, false);
}

struct LossAndGradients {
  double loss = 0;
  std::vector<double> output;
  HeadParams grad;
};

inline HeadParams zeros_like(const HeadParams& p) {
  HeadParams z;
  z.linear1 = Linear(p.linear1.in, p.linear1.out);
  z.glu_w = Linear(p.glu_w.in, p.glu_w.out);
  z.glu_v = Linear(p.glu_v.in, p.glu_v.out);
  z.linear2 = Linear(p.linear2.in, p.linear2.out);
  return z;
}

// Exact gradient of huber_loss(forward(head, x), target) with respect to all
// weights and biases. `mask` fixes the dropout pattern (nullptr = no dropout).
inline LossAndGradients backward(const PredictorHead& head, std::span<const double> x,
                                 std::span<const double> target, double delta,
                                 const DropoutMask* mask = nullptr) {
  if (target.size() != head.n_models())
    throw DimensionError("target has " + std::to_string(target.size()) + " entries, head predicts " +
                         std::to_string(head.n_models()));
  const auto& P = head.params;
  const auto t = forward_trace(head, x, mask);

  LossAndGradients r;
  r.loss = huber_loss(t.output, target, delta);
  r.output = t.output;
  r.grad = zeros_like(P);
  auto& G = r.grad;

  const std::size_t n = t.output.size();
  const std::size_t g = t.glu_out.size();
  const std::size_t h = t.z.size();
  const std::size_t d = t.dropped.size();

  std::vector<double> d_out(n);
  for (std::size_t k = 0; k < n; ++k)
    d_out[k] = huber_derivative(t.output[k] - target[k], delta) / static_cast<double>(n);

  std::vector<double> d_glu(g, 0.0);
  for (std::size_t j = 0; j < g; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      G.linear2.w(j, k) = t.glu_out[j] * d_out[k];
      d_glu[j] += P.linear2.w(j, k) * d_out[k];
    }
  }
  G.linear2.bias = d_out;

  std::vector<double> d_lin(g), d_gate(g);
  for (std::size_t j = 0; j < g; ++j) {
    d_lin[j] = d_glu[j] * t.gate[j];
    d_gate[j] = d_glu[j] * t.lin[j] * t.gate[j] * (1.0 - t.gate[j]);
  }

  std::vector<double> d_z(h, 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < g; ++j) {
      G.glu_w.w(i, j) = t.z[i] * d_lin[j];
      G.glu_v.w(i, j) = t.z[i] * d_gate[j];
      d_z[i] += P.glu_w.w(i, j) * d_lin[j] + P.glu_v.w(i, j) * d_gate[j];
    }
  }
  G.glu_w.bias = d_lin;
  G.glu_v.bias = d_gate;

  for (std::size_t m = 0; m < d; ++m) {
    const double u = gelu(t.dropped[m]);
    if (u == 0) continue;
    for (std::size_t i = 0; i < h; ++i) G.linear1.w(m, i) = u * d_z[i];
  }
  G.linear1.bias = d_z;
  return r;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double delta = 0.3;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double weight_decay = 0.01;
  double adam_epsilon = 1e-8;
  std::size_t epochs = 3;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
};

inline void validate(const TrainConfig& c) {
  if (!(c.delta > 0)) throw ValidationError("delta must be > 0");
  if (!(c.beta1 >= 0 && c.beta1 < 1) || !(c.beta2 >= 0 && c.beta2 < 1))
    throw ValidationError("betas must lie in [0, 1)");
  if (c.epochs < 1) throw ValidationError("epochs must be >= 1");
  if (c.batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(c.learning_rate >= 0) || !(c.weight_decay >= 0)) throw ValidationError("learning_rate and weight_decay must be >= 0");
}

struct TrainingExample {
  std::vector<double> embedding;
  std::vector<double> target;
};

// Adam with decoupled weight decay: every step first shrinks each parameter
// by (1 - learning_rate * weight_decay), outside the adaptive moments, then
// applies the bias-corrected Adam update.
class AdamW {
 public:
  AdamW(const HeadParams& shape, const TrainConfig& cfg)
      : cfg_(cfg), m_(zeros_like(shape)), v_(zeros_like(shape)) {}

  void step(HeadParams& params, const HeadParams& grad) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::vector<std::vector<double>*> p, m, v;
    std::vector<const std::vector<double>*> gr;
    params.for_each_tensor([&](const char*, std::vector<double>& x) { p.push_back(&x); });
    m_.for_each_tensor([&](const char*, std::vector<double>& x) { m.push_back(&x); });
    v_.for_each_tensor([&](const char*, std::vector<double>& x) { v.push_back(&x); });
    grad.for_each_tensor([&](const char*, const std::vector<double>& x) { gr.push_back(&x); });
    for (std::size_t k = 0; k < p.size(); ++k) {
      auto& P = *p[k];
      auto& M = *m[k];
      auto& V = *v[k];
      const auto& G = *gr[k];
      for (std::size_t i = 0; i < P.size(); ++i) {
        M[i] = cfg_.beta1 * M[i] + (1.0 - cfg_.beta1) * G[i];
        V[i] = cfg_.beta2 * V[i] + (1.0 - cfg_.beta2) * G[i] * G[i];
        const double mhat = M[i] / bc1;
        const double vhat = V[i] / bc2;
        P[i] *= (1.0 - cfg_.learning_rate * cfg_.weight_decay);
        P[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.adam_epsilon);
      }
    }
  }

  std::uint64_t steps() const noexcept { return t_; }

 private:
  TrainConfig cfg_;
  HeadParams m_;
  HeadParams v_;
  std::uint64_t t_ = 0;
};

struct TrainResult {
  PredictorHead head;
  std::vector<double> epoch_loss;  // mean per-example training loss
};

inline TrainResult train(PredictorHead head, std::span<const TrainingExample> data, const TrainConfig& cfg) {
  validate(cfg);
  if (data.empty()) throw TrainingError("train: empty dataset");
  for (const auto& ex : data) {
    if (ex.embedding.size() != head.input_dim() || ex.target.size() != head.n_models())
      throw DimensionError("train: example dims do not match the head");
  }

  Rng shuffle_rng(cfg.seed);
  Rng dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  AdamW opt(head.params, cfg);
  TrainResult result;

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng() % i]);

    double epoch_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      HeadParams acc = zeros_like(head.params);
      for (std::size_t b = start; b < stop; ++b) {
        const auto& ex = data[order[b]];
        const auto mask = sample_dropout_mask(ex.embedding.size(), head.dropout_p, dropout_rng);
        auto lg = backward(head, ex.embedding, ex.target, cfg.delta, &mask);
        if (!std::isfinite(lg.loss))
          throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) + ", example " +
                              std::to_string(order[b]));
        epoch_sum += lg.loss;
        std::vector<std::vector<double>*> dst;
        acc.for_each_tensor([&](const char*, std::vector<double>& x) { dst.push_back(&x); });
        std::size_t k = 0;
        lg.grad.for_each_tensor([&](const char*, const std::vector<double>& x) {
          auto& out = *dst[k++];
          for (std::size_t i = 0; i < x.size(); ++i) out[i] += x[i] * scale;
        });
      }
      opt.step(head.params, acc);
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(data.size()));
  }
  result.head = std::move(head);
  return result;
}

// Mean Huber loss over a dataset at inference (no dropout).
inline double evaluate_loss(const PredictorHead& head, std::span<const TrainingExample> data, double delta) {
  if (data.empty()) return 0.0;
  double s = 0;
  for (const auto& ex : data) s += huber_loss(predict(head, ex.embedding), ex.target, delta);
  return s / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Encoders

struct HashedNgramEncoder {
  std::size_t dim = 256;
  std::uint64_t seed = 0;
};

// Character 3-grams (over bytes) hashed into `dim` buckets, L2-normalized.
// Texts shorter than three bytes hash as a single gram.
inline std::vector<double> embed_hashed(std::string_view text, const HashedNgramEncoder& enc) {
  if (enc.dim == 0) throw DimensionError("encoder dim must be >= 1");
  std::vector<double> v(enc.dim, 0.0);
  if (text.empty()) return v;
  const std::uint64_t basis = detail::fnv1a64(std::to_string(enc.seed));
  auto add = [&](std::string_view gram) { v[detail::fnv1a64(gram, basis) % enc.dim] += 1.0; };
  if (text.size() < 3) {
    add(text);
  } else {
    for (std::size_t i = 0; i + 3 <= text.size(); ++i) add(text.substr(i, 3));
  }
  double norm = 0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

class EmbeddingStore {
 public:
  EmbeddingStore() = default;

  // One JSON object per line: {"query_id": "...", "vector": [...]}.
  static EmbeddingStore load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open embedding file '" + path + "'");
    EmbeddingStore store;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        store.insert(j.at("query_id").get<std::string>(), j.at("vector").get<std::vector<double>>());
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
      } catch (const DimensionError& e) {
        throw DimensionError(path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    return store;
  }

  void insert(std::string query_id, std::vector<double> vec) {
    if (dim_ == 0) dim_ = vec.size();
    if (vec.size() != dim_)
      throw DimensionError("embedding for '" + query_id + "' has dimension " + std::to_string(vec.size()) +
                           ", expected " + std::to_string(dim_));
    for (double x : vec)
      if (!std::isfinite(x)) throw ValidationError("embedding for '" + query_id + "' has a non-finite entry");
    vectors_[std::move(query_id)] = std::move(vec);
  }

  const std::vector<double>& at(const std::string& query_id) const {
    auto it = vectors_.find(query_id);
    if (it == vectors_.end()) throw ValidationError("no embedding for query_id '" + query_id + "'");
    return it->second;
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return vectors_.size(); }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write embedding file '" + path + "'");
    for (const auto& [id, vec] : vectors_) out << nlohmann::json{{"query_id", id}, {"vector", vec}}.dump() << '\n';
  }

 private:
  std::map<std::string, std::vector<double>> vectors_;
  std::size_t dim_ = 0;
};

// Either the built-in hashed n-gram featurizer or a table of precomputed
// vectors keyed by query id.
class Encoder {
 public:
  static Encoder hashed_ngram(std::size_t dim, std::uint64_t seed) {
    Encoder e;
    e.hashed_ = HashedNgramEncoder{dim, seed};
    return e;
  }
  static Encoder from_store(EmbeddingStore store) {
    Encoder e;
    e.store_ = std::move(store);
    return e;
  }

  std::vector<double> embed(const std::string& query_id, std::string_view text) const {
    if (hashed_) return embed_hashed(text, *hashed_);
    return store_->at(query_id);
  }

  std::size_t dim() const { return hashed_ ? hashed_->dim : store_->dim(); }
  bool is_hashed() const noexcept { return hashed_.has_value(); }
  const std::optional<HashedNgramEncoder>& hashed() const noexcept { return hashed_; }

  std::string describe() const {
    if (hashed_) return "hashed_ngram(d=" + std::to_string(hashed_->dim) + ",seed=" + std::to_string(hashed_->seed) + ")";
    return "file(d=" + std::to_string(store_->dim()) + ")";
  }

 private:
  Encoder() = default;
  std::optional<HashedNgramEncoder> hashed_;
  std::optional<EmbeddingStore> store_;
};

// ---------------------------------------------------------------------------
// Checkpoints
//
// Text format, one item per line:
//
//   budgetens-head 1
//   dims <d> <h> <g> <n_models>
//   dropout_p <hexfloat>
//   [encoder hashed_ngram <dim> <seed>]
//   [train delta=<hexfloat> lr=<hexfloat> beta1=... beta2=... weight_decay=... epochs=<n> batch_size=<n> seed=<n>]
//   tensor <name> <count>
//   <count hexfloat values separated by spaces>
//   ... (eight tensors, fixed order)
//   checksum <16 hex digits>
//
// The checksum is FNV-1a 64 over every byte preceding the checksum line.
// Hex floats make the round trip exact.

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  PredictorHead head;
  std::optional<HashedNgramEncoder> encoder;
  std::optional<TrainConfig> train_config;
};

namespace detail {

inline std::string hexfloat(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

inline double parse_double(const std::string& s) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ParseError("checkpoint: bad number '" + s + "'");
  }
  if (pos != s.size()) throw ParseError("checkpoint: bad number '" + s + "'");
  return v;
}

inline std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  const auto dims = ck.head.dims();
  std::ostringstream out;
  out << "budgetens-head " << kCheckpointVersion << '\n';
  out << "dims " << dims.d << ' ' << dims.h << ' ' << dims.g << ' ' << dims.n_models << '\n';
  out << "dropout_p " << detail::hexfloat(ck.head.dropout_p) << '\n';
  if (ck.encoder) out << "encoder hashed_ngram " << ck.encoder->dim << ' ' << ck.encoder->seed << '\n';
  if (ck.train_config) {
    const auto& c = *ck.train_config;
    out << "train delta=" << detail::hexfloat(c.delta) << " lr=" << detail::hexfloat(c.learning_rate)
        << " beta1=" << detail::hexfloat(c.beta1) << " beta2=" << detail::hexfloat(c.beta2)
        << " weight_decay=" << detail::hexfloat(c.weight_decay) << " epochs=" << c.epochs
        << " batch_size=" << c.batch_size << " seed=" << c.seed << '\n';
  }
  ck.head.params.for_each_tensor([&](const char* name, const std::vector<double>& t) {
    out << "tensor " << name << ' ' << t.size() << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) out << (i ? " " : "") << detail::hexfloat(t[i]);
    out << '\n';
  });
  std::string body = out.str();
  body += "checksum " + detail::hex64(detail::fnv1a64(body)) + "\n";
  return body;
}

inline Checkpoint parse_checkpoint(const std::string& text) {
  const auto pos = text.rfind("checksum ");
  if (pos == std::string::npos || (pos > 0 && text[pos - 1] != '\n'))
    throw ParseError("checkpoint: missing checksum line");
  const std::string body = text.substr(0, pos);
  std::string stored = text.substr(pos + 9);
  while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r')) stored.pop_back();
  if (stored != detail::hex64(detail::fnv1a64(body))) throw ParseError("checkpoint: checksum mismatch");

  std::istringstream in(body);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "budgetens-head") throw ParseError("checkpoint: bad magic");
  if (version != kCheckpointVersion)
    throw ParseError("checkpoint: unsupported format version " + std::to_string(version));

  Checkpoint ck;
  HeadDims dims;
  std::string key;
  in >> key >> dims.d >> dims.h >> dims.g >> dims.n_models;
  if (key != "dims" || !in) throw ParseError("checkpoint: bad dims line");
  std::string tok;
  in >> key >> tok;
  if (key != "dropout_p") throw ParseError("checkpoint: bad dropout line");
  ck.head = PredictorHead(dims, detail::parse_double(tok));

  std::vector<std::vector<double>*> tensors;
  std::vector<std::string> names;
  ck.head.params.for_each_tensor([&](const char* name, std::vector<double>& t) {
    tensors.push_back(&t);
    names.emplace_back(name);
  });

  std::size_t next = 0;
  while (in >> key) {
    if (key == "encoder") {
      std::string kind;
      HashedNgramEncoder enc;
      in >> kind >> enc.dim >> enc.seed;
      if (kind != "hashed_ngram" || !in) throw ParseError("checkpoint: bad encoder line");
      ck.encoder = enc;
    } else if (key == "train") {
      std::string line;
      std::getline(in, line);
      std::istringstream fields(line);
      std::string kv;
      TrainConfig c;
      while (fields >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ParseError("checkpoint: bad train field '" + kv + "'");
        const auto k = kv.substr(0, eq);
        const auto v = kv.substr(eq + 1);
        if (k == "delta") c.delta = detail::parse_double(v);
        else if (k == "lr") c.learning_rate = detail::parse_double(v);
        else if (k == "beta1") c.beta1 = detail::parse_double(v);
        else if (k == "beta2") c.beta2 = detail::parse_double(v);
        else if (k == "weight_decay") c.weight_decay = detail::parse_double(v);
        else if (k == "epochs") c.epochs = std::stoull(v);
        else if (k == "batch_size") c.batch_size = std::stoull(v);
        else if (k == "seed") c.seed = std::stoull(v);
      }
      ck.train_config = c;
    } else if (key == "tensor") {
      std::string name;
      std::size_t count = 0;
      in >> name >> count;
      if (next >= tensors.size() || name != names[next])
        throw ParseError("checkpoint: unexpected tensor '" + name + "'");
      if (count != tensors[next]->size())
        throw ParseError("checkpoint: tensor '" + name + "' has " + std::to_string(count) + " values, expected " +
                         std::to_string(tensors[next]->size()));
      for (auto& x : *tensors[next]) {
        if (!(in >> tok)) throw ParseError("checkpoint: truncated tensor '" + name + "'");
        x = detail::parse_double(tok);
        if (!std::isfinite(x)) throw ParseError("checkpoint: non-finite weight in '" + name + "'");
      }
      ++next;
    } else {
      throw ParseError("checkpoint: unknown record '" + key + "'");
    }
  }
  if (next != tensors.size()) throw ParseError("checkpoint: missing tensors");
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  out << serialize_checkpoint(ck);
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace budgetens
