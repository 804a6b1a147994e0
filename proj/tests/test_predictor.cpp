#include "oracles.hpp"

#include <budgetens/predictor.hpp>

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <random>

using namespace budgetens;

namespace {

PredictorHead unit_toy_head() {
  PredictorHead h({1, 1, 1, 1}, 0.2);
  h.params.linear1.weight = {1};
  h.params.glu_w.weight = {1};
  h.params.glu_v.weight = {1};
  h.params.linear2.weight = {1};
  return h;
}

PredictorHead random_head(HeadDims dims, std::uint64_t seed) {
  auto h = init_head(dims, seed, 0.2);
  Rng rng(seed + 1000);
  std::normal_distribution<double> n(0, 0.5);
  h.params.for_each_tensor([&](const char*, std::vector<double>& t) {
    for (auto& x : t) x += n(rng);
  });
  return h;
}

}  // namespace

TEST(Gelu, Values) {
  EXPECT_EQ(gelu(0.0), 0.0);
  EXPECT_NEAR(gelu(1.0), 0.841345, 1e-6);
  EXPECT_NEAR(gelu(-1.0), -0.158655, 1e-6);
  for (double x = -6; x <= 6; x += 0.37) EXPECT_NEAR(gelu(x), x * oracle::normal_cdf_quadrature(x), 1e-10);
}

TEST(Gelu, OddPartIdentity) {
  for (double x = -6; x <= 6; x += 0.01)
    EXPECT_NEAR(gelu(x) + gelu(-x), x * std::erf(x / std::sqrt(2.0)), 1e-9);
}

TEST(Gelu, DerivativeMatchesFiniteDifference) {
  for (double x = -5; x <= 5; x += 0.25) {
    const double fd = (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6;
    EXPECT_NEAR(gelu_derivative(x), fd, 1e-7);
  }
}

TEST(Glu, Values) {
  Linear w(1, 1), v(1, 1);
  w.weight = {1};
  EXPECT_EQ(glu(std::vector<double>{0.0}, {w, v})[0], 0.0);

  v.bias = {20};
  EXPECT_NEAR(glu(std::vector<double>{2.0}, {w, v})[0], 2.0 * oracle::logistic(20), 1e-15);
  EXPECT_NEAR(glu(std::vector<double>{2.0}, {w, v})[0], 2.0, 1e-8);

  v.bias = {0};
  v.weight = {1};
  EXPECT_NEAR(glu(std::vector<double>{1.0}, {w, v})[0], 0.731059, 1e-6);
}

TEST(Glu, DimensionMismatch) {
  Linear w(2, 3), v(2, 3), bad(2, 4);
  EXPECT_THROW(glu(std::vector<double>{1.0}, {w, v}), DimensionError);
  EXPECT_THROW(glu(std::vector<double>{1.0, 2.0}, {w, bad}), DimensionError);
}

TEST(Huber, Values) {
  const std::vector<double> zero{0.0};
  EXPECT_NEAR(huber_loss(std::vector<double>{0.1}, zero, 0.3), 0.005, 1e-15);
  EXPECT_NEAR(huber_loss(std::vector<double>{1.0}, zero, 0.3), 0.255, 1e-15);
  EXPECT_NEAR(huber(0.3, 0.3), 0.045, 1e-15);
  EXPECT_NEAR(0.5 * 0.3 * 0.3, 0.3 * (0.3 - 0.15), 1e-15);
  EXPECT_LE(std::abs(huber(0.3 - 1e-9, 0.3) - huber(0.3 + 1e-9, 0.3)), 1e-8);
  EXPECT_NEAR(huber_loss(std::vector<double>{0.1, 1.0}, std::vector<double>{0.0, 0.0}, 0.3), (0.005 + 0.255) / 2,
              1e-15);
  EXPECT_THROW(huber_loss(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}, 0.3), DimensionError);
}

TEST(Forward, ZeroHeadGivesZeros) {
  const PredictorHead h({4, 3, 2, 5});
  const auto out = forward(h, std::vector<double>{1, -2, 3, 0.5}, false);
  EXPECT_EQ(out, std::vector<double>(5, 0.0));
}

TEST(Forward, ToyHeadComposite) {
  const auto h = unit_toy_head();
  const double g = 1.0 * oracle::normal_cdf_quadrature(1.0);
  const double expected = g * oracle::logistic(g);  // 0.587888...
  EXPECT_NEAR(predict(h, std::vector<double>{1.0})[0], expected, 1e-12);
  EXPECT_NEAR(predict(h, std::vector<double>{1.0})[0], 0.587888, 1e-6);
}

TEST(Forward, InferenceIsDeterministic) {
  const auto h = init_head({8, 6, 4, 3}, 42);
  const std::vector<double> x{0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8};
  EXPECT_EQ(forward(h, x, false), forward(h, x, false));
  EXPECT_EQ(predict(h, x), predict(h, x));
}

TEST(Forward, DimensionMismatch) {
  const auto h = init_head({8, 6, 4, 3}, 42);
  EXPECT_THROW(predict(h, std::vector<double>(7, 0.0)), DimensionError);
}

TEST(Forward, TrainingModeNeedsRngAndDropsUnits) {
  const auto h = init_head({64, 8, 4, 2}, 1);
  const std::vector<double> x(64, 1.0);
  EXPECT_THROW(forward(h, x, true), ValidationError);
  Rng rng(3);
  EXPECT_NE(forward(h, x, true, &rng), predict(h, x));
}

TEST(Dropout, InvertedScalingPreservesExpectation) {
  const std::vector<double> x{1.0, -2.0, 0.5, 3.0};
  Rng rng(8);
  std::vector<double> mean(x.size(), 0.0);
  const int draws = 100000;
  for (int k = 0; k < draws; ++k) {
    const auto m = sample_dropout_mask(x.size(), 0.2, rng);
    for (std::size_t i = 0; i < x.size(); ++i) mean[i] += x[i] * m[i];
  }
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(mean[i] / draws, x[i], 0.01 * std::abs(x[i]));
}

TEST(Backward, ZeroResidualGivesZeroGradient) {
  const auto h = random_head({5, 4, 3, 2}, 7);
  const std::vector<double> x{0.3, -0.1, 0.8, 0.0, -1.2};
  const auto target = predict(h, x);
  const auto lg = backward(h, x, target, 0.3);
  EXPECT_EQ(lg.loss, 0.0);
  lg.grad.for_each_tensor([](const char* name, const std::vector<double>& t) {
    for (double g : t) EXPECT_EQ(g, 0.0) << name;
  });
}

TEST(Backward, OutputSlotWithZeroResidualHasZeroGradient) {
  const auto h = random_head({3, 4, 3, 2}, 11);
  const std::vector<double> x{0.5, -0.4, 0.9};
  auto target = predict(h, x);
  target[0] += 1.0;  // only slot 0 has a residual
  const auto lg = backward(h, x, target, 0.3);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(lg.grad.linear2.w(j, 1), 0.0);
  EXPECT_EQ(lg.grad.linear2.bias[1], 0.0);
  EXPECT_NE(lg.grad.linear2.bias[0], 0.0);
}

TEST(Backward, MatchesFiniteDifferences) {
  Rng rng(123);
  std::normal_distribution<double> n(0, 1);
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    HeadDims dims{1 + rng() % 8, 1 + rng() % 8, 1 + rng() % 8, 1 + rng() % 8};
    auto h = random_head(dims, seed);
    std::vector<double> x(dims.d), target(dims.n_models);
    for (auto& v : x) v = n(rng);
    for (auto& v : target) v = n(rng);
    const double delta = 0.3;
    const bool with_mask = seed % 2 == 1;
    DropoutMask mask;
    if (with_mask) mask = sample_dropout_mask(dims.d, 0.2, rng);
    const DropoutMask* mp = with_mask ? &mask : nullptr;

    const auto lg = backward(h, x, target, delta, mp);
    std::vector<std::vector<double>*> params;
    h.params.for_each_tensor([&](const char*, std::vector<double>& t) { params.push_back(&t); });
    std::vector<const std::vector<double>*> grads;
    lg.grad.for_each_tensor([&](const char*, const std::vector<double>& t) { grads.push_back(&t); });
    auto loss = [&] { return huber_loss(forward_trace(h, x, mp).output, target, delta); };
    for (std::size_t k = 0; k < params.size(); ++k) {
      for (std::size_t i = 0; i < params[k]->size(); ++i) {
        const double fd = oracle::central_difference(loss, (*params[k])[i], 1e-5);
        const double an = (*grads[k])[i];
        const double err = std::abs(fd - an);
        EXPECT_TRUE(err <= 1e-8 || err <= 1e-4 * std::max(std::abs(fd), std::abs(an)))
            << "seed " << seed << " tensor " << k << " index " << i << " fd=" << fd << " an=" << an;
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 1000u);
}

TEST(AdamW, DecayIsDecoupledFromAdaptiveUpdate) {
  auto h = init_head({3, 2, 2, 1}, 5);
  const auto before = h.params;
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.5;
  AdamW opt(h.params, cfg);
  const auto zero = zeros_like(h.params);
  opt.step(h.params, zero);
  opt.step(h.params, zero);
  const double factor = (1.0 - 0.1 * 0.5) * (1.0 - 0.1 * 0.5);
  for (std::size_t i = 0; i < before.linear1.weight.size(); ++i)
    EXPECT_DOUBLE_EQ(h.params.linear1.weight[i], before.linear1.weight[i] * factor);

  // Zero learning rate freezes the parameters.
  auto frozen = h;
  cfg.learning_rate = 0;
  AdamW still(frozen.params, cfg);
  still.step(frozen.params, zero);
  EXPECT_EQ(frozen.params.linear1.weight, h.params.linear1.weight);
}

namespace {

std::vector<TrainingExample> linear_task(std::size_t n, std::size_t d, std::size_t models, std::uint64_t seed,
                                         double scale = 0.3) {
  Rng rng(seed);
  std::normal_distribution<double> N(0, 1);
  std::vector<double> A(d * models);
  for (auto& a : A) a = N(rng) * scale / std::sqrt(static_cast<double>(d));
  std::vector<TrainingExample> data;
  for (std::size_t s = 0; s < n; ++s) {
    TrainingExample ex;
    ex.embedding.resize(d);
    for (auto& x : ex.embedding) x = N(rng);
    ex.target.assign(models, 0.0);
    for (std::size_t k = 0; k < models; ++k) {
      for (std::size_t i = 0; i < d; ++i) ex.target[k] += A[i * models + k] * ex.embedding[i];
      ex.target[k] += 0.01 * N(rng);
    }
    data.push_back(std::move(ex));
  }
  return data;
}

}  // namespace

TEST(Train, AlreadyOptimalStaysNearZero) {
  auto h = init_head({6, 5, 4, 3}, 2);
  h.dropout_p = 0.0;
  std::vector<TrainingExample> data;
  Rng rng(1);
  std::normal_distribution<double> N(0, 1);
  for (int i = 0; i < 20; ++i) {
    TrainingExample ex;
    ex.embedding.resize(6);
    for (auto& x : ex.embedding) x = N(rng);
    ex.target = predict(h, ex.embedding);
    data.push_back(ex);
  }
  TrainConfig cfg;
  cfg.weight_decay = 0;
  const auto r = train(h, data, cfg);
  EXPECT_NEAR(r.epoch_loss.front(), 0.0, 1e-6);
  for (double l : r.epoch_loss) EXPECT_LT(l, 1e-6);
}

TEST(Train, LossDecreasesOnLinearTask) {
  const auto data = linear_task(200, 256, 4, 7);
  const auto r = train(init_head({256, 256, 128, 4}, 1), data, TrainConfig{});
  ASSERT_EQ(r.epoch_loss.size(), 3u);
  EXPECT_LE(r.epoch_loss.back(), 0.5 * r.epoch_loss.front());
}

TEST(Train, SameSeedIsBitwiseReproducible) {
  const auto data = linear_task(50, 16, 3, 3);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.seed = 99;
  const auto a = train(init_head({16, 8, 8, 3}, 1), data, cfg);
  const auto b = train(init_head({16, 8, 8, 3}, 1), data, cfg);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  EXPECT_EQ(a.head.params.linear2.weight, b.head.params.linear2.weight);
  cfg.seed = 100;
  const auto c = train(init_head({16, 8, 8, 3}, 1), data, cfg);
  EXPECT_NE(a.epoch_loss, c.epoch_loss);
}

TEST(Train, Errors) {
  const auto h = init_head({4, 4, 4, 2}, 1);
  EXPECT_THROW(train(h, std::vector<TrainingExample>{}, TrainConfig{}), TrainingError);
  std::vector<TrainingExample> bad{{{1, 2, 3}, {0, 0}}};
  EXPECT_THROW(train(h, bad, TrainConfig{}), DimensionError);
  std::vector<TrainingExample> huge{{{1e300, 1e300, 1e300, 1e300}, {0, 0}}};
  auto big = h;
  big.dropout_p = 0;
  for (auto& w : big.params.linear1.weight) w = 1e300;
  EXPECT_THROW(train(big, huge, TrainConfig{}), TrainingError);
  TrainConfig cfg;
  cfg.delta = 0;
  std::vector<TrainingExample> ok{{{1, 2, 3, 4}, {0, 0}}};
  EXPECT_THROW(train(h, ok, cfg), ValidationError);
}

TEST(Embed, HashedNgram) {
  const HashedNgramEncoder enc{64, 7};
  EXPECT_EQ(embed_hashed("a query", enc), embed_hashed("a query", enc));
  EXPECT_EQ(embed_hashed("", enc), std::vector<double>(64, 0.0));
  for (const char* s : {"x", "ab", "hello world", "a considerably longer query about something"}) {
    const auto v = embed_hashed(s, enc);
    double n = 0;
    for (double x : v) n += x * x;
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-12) << s;
  }
  EXPECT_NE(embed_hashed("hello world", enc), embed_hashed("hello world", HashedNgramEncoder{64, 8}));
}

TEST(Embed, FileStore) {
  const auto path = std::filesystem::temp_directory_path() / "budgetens_embeddings_test.jsonl";
  {
    std::ofstream out(path);
    out << R"({"query_id": "q1", "vector": [0.5, -1.0, 2.0]})" << "\n\n";
    out << R"({"query_id": "q2", "vector": [1, 2, 3]})" << "\n";
  }
  const auto enc = Encoder::from_store(EmbeddingStore::load(path.string()));
  EXPECT_EQ(enc.dim(), 3u);
  EXPECT_EQ(enc.embed("q1", "ignored"), (std::vector<double>{0.5, -1.0, 2.0}));
  EXPECT_THROW(enc.embed("missing", ""), ValidationError);
  {
    std::ofstream out(path);
    out << R"({"query_id": "q1", "vector": [0.5, -1.0, 2.0]})" << "\n";
    out << R"({"query_id": "q2", "vector": [1, 2]})" << "\n";
  }
  EXPECT_THROW(EmbeddingStore::load(path.string()), DimensionError);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RoundTripIsExact) {
  Checkpoint ck;
  ck.head = random_head({5, 4, 3, 2}, 3);
  ck.encoder = HashedNgramEncoder{5, 9};
  TrainConfig cfg;
  cfg.seed = 42;
  cfg.batch_size = 8;
  ck.train_config = cfg;
  const auto text = serialize_checkpoint(ck);
  const auto back = parse_checkpoint(text);
  EXPECT_EQ(back.head.dims(), ck.head.dims());
  EXPECT_EQ(back.head.dropout_p, ck.head.dropout_p);
  EXPECT_EQ(back.head.params.linear1.weight, ck.head.params.linear1.weight);
  EXPECT_EQ(back.head.params.glu_v.bias, ck.head.params.glu_v.bias);
  EXPECT_EQ(back.head.params.linear2.weight, ck.head.params.linear2.weight);
  ASSERT_TRUE(back.encoder);
  EXPECT_EQ(back.encoder->seed, 9u);
  ASSERT_TRUE(back.train_config);
  EXPECT_EQ(back.train_config->seed, 42u);
  EXPECT_EQ(back.train_config->batch_size, 8u);
  EXPECT_EQ(back.train_config->beta2, 0.98);
  EXPECT_EQ(serialize_checkpoint(back), text);
}

TEST(Checkpoint, CorruptionIsDetected) {
  Checkpoint ck;
  ck.head = random_head({2, 2, 2, 1}, 1);
  auto text = serialize_checkpoint(ck);
  auto flipped = text;
  flipped[flipped.find("tensor") + 20] ^= 1;
  EXPECT_THROW(parse_checkpoint(flipped), ParseError);
  EXPECT_THROW(parse_checkpoint(text.substr(0, text.size() / 2)), ParseError);
  auto versioned = text;
  versioned.replace(0, std::string("budgetens-head 1").size(), "budgetens-head 9");
  EXPECT_THROW(parse_checkpoint(versioned), ParseError);
}
