#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "scripta/error.hpp"
#include "scripta/mlp.hpp"
#include "synthetic.hpp"

using namespace scripta;
namespace fs = std::filesystem;

namespace {

MlpArchitecture small_arch(std::size_t in, std::size_t h1, std::size_t h2, std::size_t c,
                           OutputActivation out = OutputActivation::softmax) {
  MlpArchitecture a;
  a.input_dim = in;
  a.hidden1 = h1;
  a.hidden2 = h2;
  a.n_classes = c;
  a.output = out;
  return a;
}

// Gaussian blobs around well-separated class centres.
FeatureStore blobs(std::size_t per_class, std::size_t classes, std::size_t dim, std::uint64_t seed, double spread = 0.05) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0.0f, static_cast<float>(spread));
  FeatureStore s;
  s.dim = static_cast<std::uint32_t>(dim);
  for (std::size_t c = 0; c < classes; ++c) s.class_list.push_back("c" + std::to_string(c));
  s.config_digest = FeatureConfig{}.digest();
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t c = 0; c < classes; ++c) {
      std::vector<float> row(dim);
      for (std::size_t j = 0; j < dim; ++j) row[j] = (j % classes == c ? 1.0f : 0.0f) + noise(rng);
      s.append(row, static_cast<std::uint32_t>(c));
    }
  }
  return s;
}

Mlp model_for(const FeatureStore& s, std::size_t h1, std::size_t h2, std::uint64_t seed,
              OutputActivation out = OutputActivation::softmax) {
  return Mlp::init(small_arch(s.dim, h1, h2, s.class_list.size(), out), seed, ModelMeta{s.class_list, s.config_digest, seed});
}

double train_accuracy(const Mlp& m, const FeatureStore& s) {
  const auto p = m.embed_store(s, 3);
  std::size_t ok = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index arg;
    p.row(i).maxCoeff(&arg);
    ok += static_cast<std::uint32_t>(arg) == s.labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(ok) / static_cast<double>(s.size());
}

}  // namespace

TEST(Architecture, FullSizeParameterCount) {
  EXPECT_EQ(small_arch(9216, 1024, 512, 10).parameter_count(), 9968138u);
  const auto m = init_model(9216, 10, 3);
  EXPECT_EQ(m.parameter_count(), 9968138u);
  EXPECT_EQ(m.architecture().layer_sizes(), (std::array<std::size_t, 4>{9216, 1024, 512, 10}));
}

TEST(Architecture, SmallCount) {
  const auto a = small_arch(4, 3, 2, 2);
  EXPECT_EQ(a.parameter_count(), 29u);
  EXPECT_EQ(Mlp(a, {}).parameter_count(), 29u);
}

TEST(Architecture, CountFormulaMatchesAllocation) {
  std::mt19937_64 rng(30);
  for (int i = 0; i < 30; ++i) {
    const auto a = small_arch(1 + rng() % 50, 1 + rng() % 20, 1 + rng() % 20, 2 + rng() % 9);
    EXPECT_EQ(BasicMlp<double>(a, {}).parameter_count(), a.parameter_count());
  }
}

TEST(Architecture, RejectsSingleClass) {
  EXPECT_THROW(init_model(10, 1, 0), ArgumentError);
  EXPECT_THROW(init_model(0, 3, 0), ArgumentError);
}

TEST(Init, DeterministicAndBounded) {
  const auto a = small_arch(40, 30, 20, 5);
  const auto m1 = Mlp::init(a, 99);
  const auto m2 = Mlp::init(a, 99);
  EXPECT_EQ(m1, m2);
  EXPECT_FALSE(m1 == Mlp::init(a, 100));
  EXPECT_EQ(m1.meta().seed, 99u);
  for (const auto& l : m1.layers()) {
    const float limit = static_cast<float>(std::sqrt(6.0 / static_cast<double>(l.weights.rows() + l.weights.cols())));
    EXPECT_LE(l.weights.cwiseAbs().maxCoeff(), limit);
    EXPECT_GT(l.weights.cwiseAbs().maxCoeff(), 0.5f * limit);
    EXPECT_EQ(l.bias.cwiseAbs().maxCoeff(), 0.0f);
  }
}

TEST(Forward, ZeroModelIsUniform) {
  const Mlp m(small_arch(6, 5, 4, 4), {});
  const std::vector<float> x{1, 2, 3, 4, 5, 6};
  const auto acts = m.forward(std::span<const float>(x));
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_FLOAT_EQ(acts.out(i), 0.25f);
}

TEST(Forward, ZeroInputGivesZeroHidden) {
  const auto m = Mlp::init(small_arch(8, 6, 5, 3), 4);
  const std::vector<float> x(8, 0.0f);
  const auto acts = m.forward(std::span<const float>(x));
  EXPECT_EQ(acts.a1.cwiseAbs().maxCoeff(), 0.0f);
  EXPECT_EQ(acts.a2.cwiseAbs().maxCoeff(), 0.0f);
}

TEST(Forward, OutputsAreDistributions) {
  std::mt19937_64 rng(31);
  std::normal_distribution<float> big(0.0f, 30.0f);
  for (auto out : {OutputActivation::softmax, OutputActivation::logistic}) {
    const auto m = Mlp::init(small_arch(12, 9, 7, 6, out), 5);
    for (int t = 0; t < 50; ++t) {
      std::vector<float> x(12);
      for (auto& v : x) v = big(rng);
      const auto acts = m.forward(std::span<const float>(x));
      EXPECT_NEAR(acts.out.sum(), 1.0f, 1e-6f);
      EXPECT_GE(acts.out.minCoeff(), 0.0f);
      EXPECT_LT(acts.a1.cwiseAbs().maxCoeff(), 1.0f + 1e-7f);
    }
  }
}

TEST(Forward, DimensionMismatch) {
  const auto m = Mlp::init(small_arch(5, 4, 3, 2), 1);
  const std::vector<float> x(4);
  EXPECT_THROW(m.forward(std::span<const float>(x)), ArgumentError);
}

TEST(Forward, TrainModeUsesMasks) {
  const auto m = Mlp::init(small_arch(5, 8, 6, 3), 2);
  std::uint64_t state = 7;
  const auto masks = m.sample_masks(1, 0.5, state);
  for (Eigen::Index i = 0; i < masks.hidden1.size(); ++i) {
    const float v = masks.hidden1.data()[i];
    EXPECT_TRUE(v == 0.0f || v == 2.0f);
  }
  const std::vector<float> x{0.3f, -0.2f, 0.9f, 0.1f, -0.5f};
  const auto eval = m.forward(std::span<const float>(x));
  const auto train = m.forward(std::span<const float>(x), masks);
  for (Eigen::Index i = 0; i < 8; ++i) EXPECT_FLOAT_EQ(train.a1(i), eval.a1(i) * masks.hidden1(0, i));
}

TEST(Dropout, KeepRateIsRoughlyHalf) {
  const auto m = Mlp::init(small_arch(5, 1000, 500, 3), 2);
  std::uint64_t state = 8;
  const auto masks = m.sample_masks(10, 0.5, state);
  const double kept = (masks.hidden1.array() > 0).template cast<double>().mean();
  EXPECT_NEAR(kept, 0.5, 0.02);
  EXPECT_THROW(m.sample_masks(1, 1.0, state), ArgumentError);
}

TEST(CrossEntropy, Cases) {
  ColVector<double> p(3);
  p << 0.0, 1.0, 0.0;
  EXPECT_EQ(cross_entropy(p, 1), 0.0);
  EXPECT_NEAR(cross_entropy(p, 0), -std::log(1e-12), 1e-9);
  ColVector<double> u = ColVector<double>::Constant(10, 0.1);
  EXPECT_NEAR(cross_entropy(u, 4), 2.302585, 1e-6);
  EXPECT_THROW(cross_entropy(u, 10), ArgumentError);
}

TEST(Backward, FiniteDifferenceSpecModel) {
  std::mt19937_64 rng(32);
  for (auto out : {OutputActivation::softmax, OutputActivation::logistic}) {
    auto m = BasicMlp<double>::init(small_arch(20, 7, 5, 3, out), 33);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> x(20);
    for (auto& v : x) v = n(rng);
    EXPECT_LT(scripta::testing::gradient_check(m, x, 2), 1e-4);
  }
}

TEST(Backward, FiniteDifferenceRandomModels) {
  std::mt19937_64 rng(34);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto out : {OutputActivation::softmax, OutputActivation::logistic}) {
    for (int i = 0; i < 20; ++i) {
      const auto m = scripta::testing::random_small_model(rng, out);
      std::vector<double> x(m.architecture().input_dim);
      for (auto& v : x) v = n(rng);
      const auto target = static_cast<std::uint32_t>(rng() % m.architecture().n_classes);
      EXPECT_LT(scripta::testing::gradient_check(m, x, target), 1e-4) << "model " << i << " " << to_string(out);
    }
  }
}

TEST(Backward, WithDropoutMasksMatchesFiniteDifferences) {
  // Fixed masks make the train-mode network a deterministic function to differentiate.
  auto m = BasicMlp<double>::init(small_arch(6, 8, 5, 3), 35);
  std::uint64_t state = 3;
  const auto masks = m.sample_masks(1, 0.5, state);
  const std::vector<double> x{0.5, -1.0, 0.25, 2.0, -0.3, 0.8};
  const auto g = m.backward(std::span<const double>(x), 1, &masks);
  const double h = 1e-5;
  auto loss = [&](const BasicMlp<double>& net) { return cross_entropy(net.forward(std::span<const double>(x), masks).out, 1); };
  for (std::size_t l = 0; l < 3; ++l) {
    for (Eigen::Index i = 0; i < m.layers()[l].weights.size(); ++i) {
      auto up = m, down = m;
      up.layers()[l].weights.data()[i] += h;
      down.layers()[l].weights.data()[i] -= h;
      const double fd = (loss(up) - loss(down)) / (2 * h);
      EXPECT_NEAR(g[l].weights.data()[i], fd, 1e-7 + 1e-4 * std::abs(fd));
    }
  }
}

TEST(Backward, ZeroInputZeroBiasGivesZeroFirstLayerGradient) {
  const auto m = BasicMlp<double>::init(small_arch(7, 5, 4, 3), 36);
  const std::vector<double> x(7, 0.0);
  const auto g = m.backward(std::span<const double>(x), 0);
  EXPECT_EQ(g[0].weights.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, SoftmaxDeltaIsOutMinusOneHot) {
  const auto m = BasicMlp<double>::init(small_arch(5, 4, 3, 4), 37);
  const std::vector<double> x{0.1, 0.2, -0.3, 0.4, 0.5};
  const auto acts = m.forward(std::span<const double>(x));
  const auto g = m.backward(std::span<const double>(x), 2);
  // The output bias gradient is dL/dz3 itself.
  for (Eigen::Index j = 0; j < 4; ++j) EXPECT_NEAR(g[2].bias(j), acts.out(j) - (j == 2 ? 1.0 : 0.0), 1e-14);
}

TEST(Backward, BatchGradientIsMeanOfSampleGradients) {
  const auto m = BasicMlp<double>::init(small_arch(4, 3, 3, 2), 38);
  RowMatrix<double> x(3, 4);
  x << 1, 2, 3, 4, -1, 0.5, 0, 2, 0.3, 0.3, -0.7, 1;
  const std::vector<std::uint32_t> t{0, 1, 1};
  const auto g = m.backward_batch(x, t, m.forward_batch(x));
  RowMatrix<double> mean = RowMatrix<double>::Zero(3, 4);
  for (int i = 0; i < 3; ++i) {
    const RowMatrix<double> row = x.row(i);
    mean += m.backward(std::span<const double>(row.data(), 4), t[i])[0].weights / 3.0;
  }
  EXPECT_LT((g[0].weights - mean).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(TrainConfig, BatchRule) {
  TrainConfig c;
  EXPECT_EQ(c.batch_size(320, 10), 32u);
  EXPECT_EQ(c.batch_size(100, 10), 32u);
  EXPECT_EQ(c.batch_size(1000, 10), 100u);
  c.batch_factor = 0.5;
  EXPECT_EQ(c.batch_size(1000, 10), 50u);
  EXPECT_EQ(c.batch_size(10, 10), 32u);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.dropout_rate = 1.0;
  EXPECT_THROW(c.validate(), ArgumentError);
  c = {};
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), ArgumentError);
}

TEST(Train, OverfitsSeparableBlobs) {
  const auto s = blobs(10, 4, 16, 40);
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.epochs = 200;
  cfg.seed = 5;
  const auto r = train(model_for(s, 32, 16, 5), s, cfg);
  EXPECT_EQ(train_accuracy(r.model, s), 1.0);
  EXPECT_EQ(r.history.epochs.size(), 200u);
}

TEST(Train, LossNonIncreasingWithSmallLr) {
  const auto s = blobs(8, 4, 10, 41);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 60;
  cfg.dropout_rate = 0.0;
  cfg.seed = 6;
  // 32 samples and batch >= 32: one full batch per epoch, so the recorded loss is the
  // pre-step loss on the whole training set.
  const auto r = train(model_for(s, 12, 8, 6), s, cfg);
  for (std::size_t e = 1; e < r.history.epochs.size(); ++e) {
    EXPECT_LE(r.history.epochs[e].train_loss, r.history.epochs[e - 1].train_loss + 1e-6) << "epoch " << e + 1;
  }
  EXPECT_LT(r.history.epochs.back().train_loss, r.history.epochs.front().train_loss);
}

TEST(Train, Deterministic) {
  const auto s = blobs(12, 3, 9, 42, 0.3);
  const auto val = blobs(4, 3, 9, 43, 0.3);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.epochs = 15;
  cfg.seed = 11;
  const auto a = train(model_for(s, 10, 7, 11), s, cfg, &val);
  const auto b = train(model_for(s, 10, 7, 11), s, cfg, &val);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.history, b.history);
  cfg.seed = 12;
  const auto c = train(model_for(s, 10, 7, 11), s, cfg, &val);
  EXPECT_FALSE(a.model == c.model);
}

TEST(Train, HistoryHasValidationErrors) {
  const auto s = blobs(10, 3, 9, 44);
  const auto val = blobs(5, 3, 9, 45);
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.epochs = 5;
  const auto r = train(model_for(s, 10, 7, 1), s, cfg, &val);
  for (const auto& e : r.history.epochs) {
    ASSERT_TRUE(e.output_error && e.layer1_error && e.layer2_error);
    for (double v : {*e.output_error, *e.layer1_error, *e.layer2_error}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_EQ(r.history.epochs[2].epoch, 3u);
}

TEST(Train, ValidationFractionHoldsOut) {
  const auto s = blobs(10, 3, 9, 46);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.validation_fraction = 0.2;
  std::size_t callbacks = 0;
  const auto r = train(model_for(s, 10, 7, 1), s, cfg, nullptr, [&](const EpochRecord&) { ++callbacks; });
  EXPECT_EQ(callbacks, 2u);
  EXPECT_TRUE(r.history.epochs[0].layer1_error.has_value());
  cfg.validation_fraction = 0.0;
  EXPECT_FALSE(train(model_for(s, 10, 7, 1), s, cfg).history.epochs[0].layer1_error.has_value());
}

TEST(Train, Errors) {
  const auto s = blobs(4, 3, 9, 47);
  TrainConfig cfg;
  cfg.epochs = 1;
  auto wrong_digest = model_for(s, 5, 4, 1);
  wrong_digest.meta().config_digest = FeatureConfig{{1}, ZoneMode::global}.digest();
  EXPECT_THROW(train(wrong_digest, s, cfg), ConfigError);
  FeatureStore empty = s.subset(std::vector<std::size_t>{});
  EXPECT_THROW(train(model_for(s, 5, 4, 1), empty, cfg), ArgumentError);
}

TEST(Embed, MatchesForwardAndShapes) {
  const auto m = init_model(9216, 10, 1);
  std::vector<float> x(9216, 1.0f / 256);
  const auto acts = m.forward(std::span<const float>(x));
  const auto e1 = m.embed(std::span<const float>(x), 1);
  const auto e2 = m.embed(std::span<const float>(x), 2);
  EXPECT_EQ(e1.size(), 1024);
  EXPECT_EQ(e2.size(), 512);
  EXPECT_EQ(e1, acts.a1);
  EXPECT_EQ(e2, acts.a2);
  EXPECT_THROW(m.embed(std::span<const float>(x), 3), ArgumentError);
  EXPECT_THROW(m.embed(std::span<const float>(x), 0), ArgumentError);
}

TEST(Embed, StoreRowsMatchSingleEmbedding) {
  const auto s = blobs(3, 3, 9, 48);
  const auto m = model_for(s, 10, 7, 2);
  const auto all = m.embed_store(s, 1);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto e = m.embed(s.row(i), 1);
    for (Eigen::Index j = 0; j < e.size(); ++j) EXPECT_NEAR(all(static_cast<Eigen::Index>(i), j), e(j), 1e-6f);
  }
}

TEST(Persistence, RoundTrip) {
  const auto dir = scripta::testing::fresh_dir("model");
  auto m = Mlp::init(small_arch(30, 12, 8, 4, OutputActivation::logistic), 7, ModelMeta{{"a", "b", "c", "d"}, FeatureConfig{}.digest(), 0});
  save_model(m, dir / "m.smlp");
  const auto back = load_model(dir / "m.smlp");
  EXPECT_EQ(back, m);
  EXPECT_EQ(back.meta().seed, 7u);
  std::mt19937_64 rng(49);
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (int i = 0; i < 100; ++i) {
    std::vector<float> x(30);
    for (auto& v : x) v = n(rng);
    EXPECT_EQ(back.forward(std::span<const float>(x)).out, m.forward(std::span<const float>(x)).out);
    EXPECT_EQ(back.embed(std::span<const float>(x), 2), m.embed(std::span<const float>(x), 2));
  }
}

TEST(Persistence, Header) {
  const auto dir = scripta::testing::fresh_dir("model-header");
  save_model(Mlp::init(small_arch(3, 2, 2, 2), 1), dir / "m.smlp");
  std::ifstream in(dir / "m.smlp", std::ios::binary);
  std::string head(12, '\0');
  in.read(head.data(), 12);
  EXPECT_EQ(head.substr(0, 4), "SMLP");
  EXPECT_EQ(head[4], 1);
  const auto len = static_cast<unsigned char>(head[8]) | static_cast<unsigned char>(head[9]) << 8;
  std::string json(static_cast<std::size_t>(len), '\0');
  in.read(json.data(), len);
  EXPECT_NE(json.find("\"layer_sizes\":[3,2,2,2]"), std::string::npos) << json;
  EXPECT_NE(json.find("\"activations\":[\"tanh\",\"tanh\",\"softmax\"]"), std::string::npos) << json;
  EXPECT_EQ(fs::file_size(dir / "m.smlp"), 12u + len + 4u * small_arch(3, 2, 2, 2).parameter_count());
}

TEST(Persistence, Corrupt) {
  const auto dir = scripta::testing::fresh_dir("model-bad");
  save_model(Mlp::init(small_arch(10, 6, 4, 3), 1), dir / "m.smlp");
  fs::copy_file(dir / "m.smlp", dir / "t.smlp");
  fs::resize_file(dir / "t.smlp", fs::file_size(dir / "t.smlp") - 8);
  EXPECT_THROW(load_model(dir / "t.smlp"), FormatError);
  {
    std::fstream f(dir / "m.smlp", std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(4);
    const char v2[4] = {2, 0, 0, 0};
    f.write(v2, 4);
  }
  EXPECT_THROW(load_model(dir / "m.smlp"), FormatError);
  {
    std::fstream f(dir / "m.smlp", std::ios::binary | std::ios::in | std::ios::out);
    f.write("NOPE", 4);
  }
  EXPECT_THROW(load_model(dir / "m.smlp"), FormatError);
}
