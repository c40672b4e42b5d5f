#include "scripta/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "json.hpp"

#include "scripta/binary_io.hpp"
#include "scripta/error.hpp"
#include "scripta/knn.hpp"

namespace scripta {

std::string to_string(OutputActivation act) { return act == OutputActivation::softmax ? "softmax" : "logistic"; }

OutputActivation parse_output_activation(std::string_view text) {
  if (text == "softmax") return OutputActivation::softmax;
  if (text == "logistic") return OutputActivation::logistic;
  throw ParseError("unknown output activation '" + std::string(text) + "' (expected softmax or logistic)");
}

std::size_t MlpArchitecture::parameter_count() const {
  const auto s = layer_sizes();
  std::size_t total = 0;
  for (std::size_t i = 0; i < 3; ++i) total += (s[i] + 1) * s[i + 1];
  return total;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t state = seed;
  std::uint64_t a = splitmix64(state) ^ (stream * 0xD1B54A32D192ED03ull);
  state = a;
  a = splitmix64(state) ^ (index * 0x8CB92BA72F3D8DD7ull);
  state = a;
  return splitmix64(state);
}

double unit_uniform(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

// Unbiased index in [0, bound) by rejection.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

enum : std::uint64_t { kStreamShuffle = 1, kStreamDropout = 2, kStreamValidation = 3 };

}  // namespace

template <typename T>
BasicMlp<T>::BasicMlp(MlpArchitecture arch, ModelMeta meta) : arch_(arch), meta_(std::move(meta)) {
  if (arch_.input_dim < 1) throw ArgumentError("input_dim must be at least 1");
  if (arch_.n_classes < 2) throw ArgumentError("n_classes must be at least 2, got " + std::to_string(arch_.n_classes));
  if (arch_.hidden1 < 1 || arch_.hidden2 < 1) throw ArgumentError("hidden layer sizes must be positive");
  const auto s = arch_.layer_sizes();
  for (std::size_t i = 0; i < 3; ++i) {
    layers_[i].weights = Matrix::Zero(static_cast<Eigen::Index>(s[i + 1]), static_cast<Eigen::Index>(s[i]));
    layers_[i].bias = Vector::Zero(static_cast<Eigen::Index>(s[i + 1]));
  }
}

template <typename T>
BasicMlp<T> BasicMlp<T>::init(MlpArchitecture arch, std::uint64_t seed, ModelMeta meta) {
  meta.seed = seed;
  BasicMlp model(arch, std::move(meta));
  std::mt19937_64 rng(seed);
  for (auto& layer : model.layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weights.rows() + layer.weights.cols()));
    T* w = layer.weights.data();
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
      w[i] = static_cast<T>((2.0 * unit_uniform(rng()) - 1.0) * limit);
    }
  }
  return model;
}

template <typename T>
std::size_t BasicMlp<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& l : layers_) total += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return total;
}

template <typename T>
void BasicMlp<T>::throw_dim_mismatch(std::size_t got) const {
  throw ArgumentError("input has dim " + std::to_string(got) + ", model expects " + std::to_string(arch_.input_dim));
}

template <typename T>
void BasicMlp<T>::check_layer(int layer) {
  if (layer != 1 && layer != 2) throw ArgumentError("embedding layer must be 1 or 2, got " + std::to_string(layer));
}

namespace {

template <typename T>
void softmax_rows(RowMatrix<T>& z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    auto row = z.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

template <typename T>
RowMatrix<T> sigmoid(const RowMatrix<T>& z) {
  return (T(1) / (T(1) + (-z.array()).exp())).matrix();
}

}  // namespace

template <typename T>
BatchActivations<T> BasicMlp<T>::forward_batch(const Matrix& x, const DropoutMasks<T>* masks) const {
  if (static_cast<std::size_t>(x.cols()) != arch_.input_dim) throw_dim_mismatch(static_cast<std::size_t>(x.cols()));
  BatchActivations<T> acts;
  Matrix z1 = x * layers_[0].weights.transpose();
  z1.rowwise() += layers_[0].bias.transpose();
  acts.a1 = z1.array().tanh().matrix();
  acts.a1_dropped = masks ? Matrix(acts.a1.cwiseProduct(masks->hidden1)) : acts.a1;

  Matrix z2 = acts.a1_dropped * layers_[1].weights.transpose();
  z2.rowwise() += layers_[1].bias.transpose();
  acts.a2 = z2.array().tanh().matrix();
  acts.a2_dropped = masks ? Matrix(acts.a2.cwiseProduct(masks->hidden2)) : acts.a2;

  Matrix z3 = acts.a2_dropped * layers_[2].weights.transpose();
  z3.rowwise() += layers_[2].bias.transpose();
  if (arch_.output == OutputActivation::softmax) {
    softmax_rows(z3);
    acts.out = std::move(z3);
  } else {
    Matrix s = sigmoid<T>(z3);
    for (Eigen::Index i = 0; i < s.rows(); ++i) s.row(i) /= s.row(i).sum();
    acts.out = std::move(s);
  }
  return acts;
}

template <typename T>
Gradients<T> BasicMlp<T>::backward_batch(const Matrix& x, std::span<const std::uint32_t> targets,
                                         const BatchActivations<T>& acts, const DropoutMasks<T>* masks) const {
  const Eigen::Index batch = x.rows();
  if (static_cast<std::size_t>(batch) != targets.size()) throw ArgumentError("target count does not match batch rows");
  for (auto t : targets) {
    if (t >= arch_.n_classes) throw ArgumentError("target class " + std::to_string(t) + " out of range");
  }
  const T inv_batch = T(1) / static_cast<T>(batch);

  // Output delta dL/dz3 of the mean loss.
  Matrix dz3;
  if (arch_.output == OutputActivation::softmax) {
    dz3 = acts.out;
    for (Eigen::Index i = 0; i < batch; ++i) dz3(i, targets[i]) -= T(1);
  } else {
    Matrix z3 = acts.a2_dropped * layers_[2].weights.transpose();
    z3.rowwise() += layers_[2].bias.transpose();
    const Matrix s = sigmoid<T>(z3);
    dz3 = s.cwiseProduct((Matrix::Ones(s.rows(), s.cols()) - s));
    for (Eigen::Index i = 0; i < batch; ++i) {
      dz3.row(i) /= s.row(i).sum();
      dz3(i, targets[i]) -= T(1) - s(i, targets[i]);
    }
  }
  dz3 *= inv_batch;

  Gradients<T> g;
  g[2].weights = dz3.transpose() * acts.a2_dropped;
  g[2].bias = dz3.colwise().sum().transpose();

  Matrix da2 = dz3 * layers_[2].weights;
  if (masks) da2 = da2.cwiseProduct(masks->hidden2);
  const Matrix dz2 = da2.cwiseProduct((T(1) - acts.a2.array().square()).matrix());
  g[1].weights = dz2.transpose() * acts.a1_dropped;
  g[1].bias = dz2.colwise().sum().transpose();

  Matrix da1 = dz2 * layers_[1].weights;
  if (masks) da1 = da1.cwiseProduct(masks->hidden1);
  const Matrix dz1 = da1.cwiseProduct((T(1) - acts.a1.array().square()).matrix());
  g[0].weights = dz1.transpose() * x;
  g[0].bias = dz1.colwise().sum().transpose();
  return g;
}

template <typename T>
BasicLayerActivations<T> BasicMlp<T>::forward_single(const Matrix& row, const DropoutMasks<T>* masks) const {
  const auto acts = forward_batch(row, masks);
  return {acts.a1_dropped.row(0).transpose(), acts.a2_dropped.row(0).transpose(), acts.out.row(0).transpose()};
}

template <typename T>
typename BasicMlp<T>::Matrix BasicMlp<T>::embed_store(const FeatureStore& store, int layer) const {
  if (layer != 3) check_layer(layer);
  if (store.dim != arch_.input_dim) throw_dim_mismatch(store.dim);
  const std::size_t width = layer == 1 ? arch_.hidden1 : layer == 2 ? arch_.hidden2 : arch_.n_classes;
  Matrix out(static_cast<Eigen::Index>(store.size()), static_cast<Eigen::Index>(width));
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < store.size(); start += kChunk) {
    const std::size_t rows = std::min(kChunk, store.size() - start);
    const Eigen::Map<const RowMatrix<float>> block(store.matrix.data() + start * store.dim, static_cast<Eigen::Index>(rows),
                                                   static_cast<Eigen::Index>(store.dim));
    const auto acts = forward_batch(block.template cast<T>(), nullptr);
    const Matrix& src = layer == 1 ? acts.a1 : layer == 2 ? acts.a2 : acts.out;
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(rows)) = src;
  }
  return out;
}

template <typename T>
DropoutMasks<T> BasicMlp<T>::sample_masks(std::size_t rows, double dropout_rate, std::uint64_t& rng_state) const {
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ArgumentError("dropout rate must lie in [0, 1)");
  const double keep = 1.0 - dropout_rate;
  const T scale = static_cast<T>(1.0 / keep);
  auto draw = [&](std::size_t cols) {
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    T* p = m.data();
    for (Eigen::Index i = 0; i < m.size(); ++i) p[i] = unit_uniform(splitmix64(rng_state)) < keep ? scale : T(0);
    return m;
  };
  DropoutMasks<T> masks;
  masks.hidden1 = draw(arch_.hidden1);
  masks.hidden2 = draw(arch_.hidden2);
  return masks;
}

template <typename T>
void BasicMlp<T>::apply_sgd(const Gradients<T>& grads, T learning_rate) {
  for (std::size_t i = 0; i < 3; ++i) {
    layers_[i].weights.noalias() -= learning_rate * grads[i].weights;
    layers_[i].bias.noalias() -= learning_rate * grads[i].bias;
  }
}

template class BasicMlp<float>;
template class BasicMlp<double>;

template <typename T>
T cross_entropy(const ColVector<T>& out, std::uint32_t target) {
  if (target >= static_cast<std::size_t>(out.size())) {
    throw ArgumentError("target class " + std::to_string(target) + " outside output of size " + std::to_string(out.size()));
  }
  return static_cast<T>(-std::log(std::max(static_cast<double>(out(target)), kProbabilityFloor)));
}

template float cross_entropy<float>(const ColVector<float>&, std::uint32_t);
template double cross_entropy<double>(const ColVector<double>&, std::uint32_t);

Mlp init_model(std::size_t input_dim, std::size_t n_classes, std::uint64_t seed, ModelMeta meta, OutputActivation output) {
  MlpArchitecture arch;
  arch.input_dim = input_dim;
  arch.n_classes = n_classes;
  arch.output = output;
  return Mlp::init(arch, seed, std::move(meta));
}

std::size_t TrainConfig::batch_size(std::size_t n_train, std::size_t n_classes) const {
  const auto proportional = static_cast<std::size_t>(std::llround(batch_factor * static_cast<double>(n_train) / static_cast<double>(n_classes)));
  return std::max(kMinBatch, proportional);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ArgumentError("learning rate must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ArgumentError("dropout rate must lie in [0, 1)");
  if (!(batch_factor > 0.0)) throw ArgumentError("batch factor must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) throw ArgumentError("validation fraction must lie in [0, 1)");
}

namespace {

// Per-class holdout of round(fraction * n_c) rows, never emptying a class.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(const FeatureStore& store, double fraction,
                                                                                 std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class(store.class_list.size());
  for (std::size_t i = 0; i < store.size(); ++i) by_class[store.labels[i]].push_back(i);
  std::mt19937_64 rng(mix_seed(seed, kStreamValidation, 0));
  std::vector<std::size_t> train_idx, val_idx;
  for (auto& members : by_class) {
    shuffle(members, rng);
    const auto want = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    const std::size_t take = members.empty() ? 0 : std::min(want, members.size() - 1);
    val_idx.insert(val_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    train_idx.insert(train_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  return {train_idx, val_idx};
}

double knn_error(const Mlp::Matrix& gallery, std::span<const std::uint32_t> gallery_labels, const Mlp::Matrix& probes,
                 std::span<const std::uint32_t> probe_labels, std::size_t n_classes) {
  std::vector<std::string> classes(n_classes);
  KnnIndex index(std::vector<float>(gallery.data(), gallery.data() + gallery.size()), static_cast<std::size_t>(gallery.cols()),
                 std::vector<std::uint32_t>(gallery_labels.begin(), gallery_labels.end()), classes);
  const auto predicted = index.classify_all(std::span<const float>(probes.data(), static_cast<std::size_t>(probes.size())), 1);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) wrong += predicted[i] != probe_labels[i];
  return static_cast<double>(wrong) / static_cast<double>(predicted.size());
}

double output_error(const Mlp::Matrix& probs, std::span<const std::uint32_t> labels) {
  std::size_t wrong = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index arg = 0;
    probs.row(i).maxCoeff(&arg);
    wrong += static_cast<std::uint32_t>(arg) != labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(wrong) / static_cast<double>(probs.rows());
}

}  // namespace

TrainResult train(Mlp model, const FeatureStore& train_store, const TrainConfig& cfg, const FeatureStore* validation,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  train_store.validate();
  const auto& arch = model.architecture();
  if (train_store.config_digest != model.meta().config_digest) {
    throw ConfigError("feature store digest " + to_hex(train_store.config_digest) + " does not match model digest " +
                      to_hex(model.meta().config_digest));
  }
  if (train_store.dim != arch.input_dim) {
    throw ArgumentError("feature store dim " + std::to_string(train_store.dim) + " does not match model input " +
                        std::to_string(arch.input_dim));
  }
  for (auto l : train_store.labels) {
    if (l >= arch.n_classes) throw ArgumentError("label " + std::to_string(l) + " outside the model's " + std::to_string(arch.n_classes) + " classes");
  }
  if (model.meta().class_list.empty()) model.meta().class_list = train_store.class_list;

  FeatureStore fit = train_store;
  FeatureStore held_out;
  const FeatureStore* val = validation;
  if (val) {
    if (val->config_digest != train_store.config_digest) throw ConfigError("validation store digest does not match training store");
    if (val->dim != train_store.dim) throw ArgumentError("validation store dim does not match training store");
  } else if (cfg.validation_fraction > 0.0) {
    auto [train_idx, val_idx] = stratified_holdout(train_store, cfg.validation_fraction, cfg.seed);
    fit = train_store.subset(train_idx);
    held_out = train_store.subset(val_idx);
    if (held_out.size() > 0) val = &held_out;
  }
  if (fit.size() == 0) throw ArgumentError("empty training set");
  if (val && val->size() == 0) val = nullptr;

  const std::size_t n = fit.size();
  const std::size_t dim = fit.dim;
  const std::size_t batch = cfg.batch_size(n, arch.n_classes);
  const auto lr = static_cast<float>(cfg.learning_rate);

  TrainResult result{std::move(model), {}};
  Mlp& net = result.model;
  std::vector<std::size_t> order(n);
  std::vector<std::uint32_t> targets;
  Mlp::Matrix x;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix_seed(cfg.seed, kStreamShuffle, epoch));
    shuffle(order, rng);
    std::uint64_t mask_state = mix_seed(cfg.seed, kStreamDropout, epoch);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t rows = std::min(batch, n - start);
      x.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
      targets.resize(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        const auto src = fit.row(order[start + r]);
        std::copy(src.begin(), src.end(), x.row(static_cast<Eigen::Index>(r)).data());
        targets[r] = fit.labels[order[start + r]];
      }
      std::optional<DropoutMasks<float>> masks;
      if (cfg.dropout_rate > 0.0) masks = net.sample_masks(rows, cfg.dropout_rate, mask_state);
      const DropoutMasks<float>* mp = masks ? &*masks : nullptr;
      const auto acts = net.forward_batch(x, mp);
      for (std::size_t r = 0; r < rows; ++r) {
        loss_sum += -std::log(std::max(static_cast<double>(acts.out(static_cast<Eigen::Index>(r), targets[r])), kProbabilityFloor));
      }
      const auto grads = net.backward_batch(x, targets, acts, mp);
      net.apply_sgd(grads, lr);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n);
    if (val) {
      const auto gallery1 = net.embed_store(fit, 1);
      const auto gallery2 = net.embed_store(fit, 2);
      rec.layer1_error = knn_error(gallery1, fit.labels, net.embed_store(*val, 1), val->labels, arch.n_classes);
      rec.layer2_error = knn_error(gallery2, fit.labels, net.embed_store(*val, 2), val->labels, arch.n_classes);
      rec.output_error = output_error(net.embed_store(*val, 3), val->labels);
    }
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

namespace {

constexpr char kModelMagic[4] = {'S', 'M', 'L', 'P'};
constexpr std::uint32_t kModelVersion = 1;

}  // namespace

void save_model(const Mlp& model, const std::filesystem::path& path) {
  const auto& arch = model.architecture();
  nlohmann::ordered_json header;
  const auto sizes = arch.layer_sizes();
  header["layer_sizes"] = std::vector<std::size_t>(sizes.begin(), sizes.end());
  header["activations"] = {"tanh", "tanh", to_string(arch.output)};
  header["class_list"] = model.meta().class_list;
  header["config_digest"] = to_hex(model.meta().config_digest);
  header["seed"] = model.meta().seed;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  binary::write_bytes(out, kModelMagic, 4);
  binary::write_u32(out, kModelVersion);
  binary::write_u32(out, static_cast<std::uint32_t>(text.size()));
  binary::write_bytes(out, text.data(), text.size());
  for (const auto& layer : model.layers()) {
    binary::write_f32_array(out, layer.weights.data(), static_cast<std::size_t>(layer.weights.size()));
    binary::write_f32_array(out, layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Mlp load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model " + path.string());
  const std::string where = "model " + path.string();
  char magic[4];
  binary::read_bytes(in, magic, 4, where + " magic");
  if (!std::equal(magic, magic + 4, kModelMagic)) throw FormatError(where + ": bad magic (expected SMLP)");
  const auto version = binary::read_u32(in, where + " version");
  if (version != kModelVersion) throw FormatError(where + ": unsupported version " + std::to_string(version));
  const auto header_len = binary::read_u32(in, where + " header length");
  if (header_len > std::filesystem::file_size(path)) throw FormatError(where + ": header length exceeds file size");
  std::string text(header_len, '\0');
  binary::read_bytes(in, text.data(), text.size(), where + " header");

  MlpArchitecture arch;
  ModelMeta meta;
  try {
    const auto header = nlohmann::json::parse(text);
    const auto sizes = header.at("layer_sizes").get<std::vector<std::size_t>>();
    if (sizes.size() != 4) throw FormatError(where + ": expected 4 layer sizes");
    const auto acts = header.at("activations").get<std::vector<std::string>>();
    if (acts.size() != 3 || acts[0] != "tanh" || acts[1] != "tanh") throw FormatError(where + ": unsupported activations");
    arch.input_dim = sizes[0];
    arch.hidden1 = sizes[1];
    arch.hidden2 = sizes[2];
    arch.n_classes = sizes[3];
    arch.output = parse_output_activation(acts[2]);
    meta.class_list = header.at("class_list").get<std::vector<std::string>>();
    meta.config_digest = digest_from_hex(header.at("config_digest").get<std::string>());
    meta.seed = header.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + ": invalid header: " + e.what());
  } catch (const ParseError& e) {
    throw FormatError(where + ": invalid header: " + e.what());
  }

  const std::uint64_t expected = 12 + static_cast<std::uint64_t>(header_len) + 4 * static_cast<std::uint64_t>(arch.parameter_count());
  if (std::filesystem::file_size(path) != expected) {
    throw FormatError(where + ": size " + std::to_string(std::filesystem::file_size(path)) + " does not match header (expected " +
                      std::to_string(expected) + ")");
  }
  Mlp model(arch, std::move(meta));
  for (auto& layer : model.layers()) {
    binary::read_f32_array(in, layer.weights.data(), static_cast<std::size_t>(layer.weights.size()), where + " weights");
    binary::read_f32_array(in, layer.bias.data(), static_cast<std::size_t>(layer.bias.size()), where + " biases");
  }
  return model;
}

}  // namespace scripta
