#pragma once

// Fully connected network input -> 1024 (tanh) -> 512 (tanh) -> C (softmax or logistic),
// trained with minibatch SGD on categorical cross-entropy with inverted dropout on both
// hidden layers. Hidden activations double as embeddings for nearest-neighbour search.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scripta/dataset.hpp"
#include "scripta/digest.hpp"

namespace scripta {

enum class OutputActivation { softmax, logistic };

std::string to_string(OutputActivation act);
OutputActivation parse_output_activation(std::string_view text);

struct MlpArchitecture {
  std::size_t input_dim = 0;
  std::size_t hidden1 = 1024;
  std::size_t hidden2 = 512;
  std::size_t n_classes = 0;
  OutputActivation output = OutputActivation::softmax;

  /// Sum of (fan_in + 1) * fan_out over the three layers.
  std::size_t parameter_count() const;
  std::array<std::size_t, 4> layer_sizes() const { return {input_dim, hidden1, hidden2, n_classes}; }

  bool operator==(const MlpArchitecture&) const = default;
};

/// What a model was trained on; carried through persistence.
struct ModelMeta {
  std::vector<std::string> class_list;
  Digest config_digest{};
  std::uint64_t seed = 0;

  bool operator==(const ModelMeta&) const = default;
};

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ColVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// weights is fan_out x fan_in.
template <typename T>
struct DenseLayer {
  RowMatrix<T> weights;
  ColVector<T> bias;

  bool operator==(const DenseLayer& o) const { return weights == o.weights && bias == o.bias; }
};

template <typename T>
struct BasicLayerActivations {
  ColVector<T> a1;
  ColVector<T> a2;
  /// Class probabilities (normalised even for logistic outputs).
  ColVector<T> out;
};

/// Per-row multipliers for the hidden activations: 0 for dropped units, 1/keep for kept ones.
template <typename T>
struct DropoutMasks {
  RowMatrix<T> hidden1;
  RowMatrix<T> hidden2;
};

template <typename T>
using Gradients = std::array<DenseLayer<T>, 3>;

/// Activations of a batch, one sample per row. pre-dropout a1/a2 are kept for backprop.
template <typename T>
struct BatchActivations {
  RowMatrix<T> a1;
  RowMatrix<T> a2;
  RowMatrix<T> a1_dropped;
  RowMatrix<T> a2_dropped;
  RowMatrix<T> out;
};

inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr std::size_t kMinBatch = 32;

template <typename T>
class BasicMlp {
 public:
  using Matrix = RowMatrix<T>;
  using Vector = ColVector<T>;

  /// All weights and biases zero.
  BasicMlp(MlpArchitecture arch, ModelMeta meta);

  /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases, deterministic in `seed`.
  static BasicMlp init(MlpArchitecture arch, std::uint64_t seed, ModelMeta meta = {});

  const MlpArchitecture& architecture() const { return arch_; }
  const ModelMeta& meta() const { return meta_; }
  ModelMeta& meta() { return meta_; }
  std::array<DenseLayer<T>, 3>& layers() { return layers_; }
  const std::array<DenseLayer<T>, 3>& layers() const { return layers_; }

  /// Counts the parameters actually allocated.
  std::size_t parameter_count() const;

  BatchActivations<T> forward_batch(const Matrix& x, const DropoutMasks<T>* masks = nullptr) const;

  /// Gradient of the mean batch loss.
  Gradients<T> backward_batch(const Matrix& x, std::span<const std::uint32_t> targets, const BatchActivations<T>& acts,
                              const DropoutMasks<T>* masks = nullptr) const;

  /// Eval-mode forward pass of one sample.
  template <typename In>
  BasicLayerActivations<T> forward(std::span<const In> x) const {
    return forward_single(to_row(x), nullptr);
  }

  /// Train-mode forward pass with explicit masks (one row each).
  template <typename In>
  BasicLayerActivations<T> forward(std::span<const In> x, const DropoutMasks<T>& masks) const {
    return forward_single(to_row(x), &masks);
  }

  /// Gradient of cross_entropy(forward(x, masks), target).
  template <typename In>
  Gradients<T> backward(std::span<const In> x, std::uint32_t target, const DropoutMasks<T>* masks = nullptr) const {
    const Matrix row = to_row(x);
    const auto acts = forward_batch(row, masks);
    return backward_batch(row, std::span<const std::uint32_t>(&target, 1), acts, masks);
  }

  /// Hidden activation of layer 1 or 2 in eval mode.
  template <typename In>
  Vector embed(std::span<const In> x, int layer) const {
    check_layer(layer);
    const auto acts = forward_single(to_row(x), nullptr);
    return layer == 1 ? acts.a1 : acts.a2;
  }

  /// Eval-mode embeddings (layer 1 or 2) or output probabilities (layer 3) of every store row.
  Matrix embed_store(const FeatureStore& store, int layer) const;

  DropoutMasks<T> sample_masks(std::size_t rows, double dropout_rate, std::uint64_t& rng_state) const;

  void apply_sgd(const Gradients<T>& grads, T learning_rate);

  template <typename U>
  BasicMlp<U> cast() const {
    BasicMlp<U> out(arch_, meta_);
    for (std::size_t i = 0; i < 3; ++i) {
      out.layers()[i].weights = layers_[i].weights.template cast<U>();
      out.layers()[i].bias = layers_[i].bias.template cast<U>();
    }
    return out;
  }

  bool operator==(const BasicMlp& o) const { return arch_ == o.arch_ && meta_ == o.meta_ && layers_ == o.layers_; }

 private:
  template <typename In>
  Matrix to_row(std::span<const In> x) const {
    if (x.size() != arch_.input_dim) throw_dim_mismatch(x.size());
    Matrix row(1, x.size());
    for (std::size_t i = 0; i < x.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = static_cast<T>(x[i]);
    return row;
  }
  BasicLayerActivations<T> forward_single(const Matrix& row, const DropoutMasks<T>* masks) const;
  [[noreturn]] void throw_dim_mismatch(std::size_t got) const;
  static void check_layer(int layer);

  MlpArchitecture arch_;
  ModelMeta meta_;
  std::array<DenseLayer<T>, 3> layers_;
};

extern template class BasicMlp<float>;
extern template class BasicMlp<double>;

using Mlp = BasicMlp<float>;
using LayerActivations = BasicLayerActivations<float>;

/// -log(max(out[target], 1e-12)).
template <typename T>
T cross_entropy(const ColVector<T>& out, std::uint32_t target);

/// Convenience: init with the default 1024/512 hidden layers.
Mlp init_model(std::size_t input_dim, std::size_t n_classes, std::uint64_t seed, ModelMeta meta = {},
               OutputActivation output = OutputActivation::softmax);

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 100;
  double dropout_rate = 0.5;
  /// Batch size = max(32, round(batch_factor * n_train / n_classes)).
  double batch_factor = 1.0;
  std::uint64_t seed = 1;
  /// Held out (per class, seeded) when no explicit validation store is given.
  double validation_fraction = 0.0;

  std::size_t batch_size(std::size_t n_train, std::size_t n_classes) const;
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> output_error;
  std::optional<double> layer1_error;
  std::optional<double> layer2_error;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;

  bool operator==(const TrainingHistory&) const = default;
};

struct TrainResult {
  Mlp model;
  TrainingHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minibatch SGD. Validation metrics use 1-NN (euclidean) with the training rows as gallery.
TrainResult train(Mlp model, const FeatureStore& train_store, const TrainConfig& cfg,
                  const FeatureStore* validation = nullptr, const EpochCallback& on_epoch = {});

void save_model(const Mlp& model, const std::filesystem::path& path);
Mlp load_model(const std::filesystem::path& path);

}  // namespace scripta
