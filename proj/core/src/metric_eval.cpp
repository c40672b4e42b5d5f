#include "scripta/metric_eval.hpp"

#include <algorithm>

#include "scripta/error.hpp"

namespace scripta {

std::vector<float> flatten(const RowMatrix<float>& m) { return {m.data(), m.data() + m.size()}; }

namespace {

void check_stores(const Mlp& model, const FeatureStore& gallery, const FeatureStore& probes) {
  gallery.validate();
  probes.validate();
  const auto& want = model.meta().config_digest;
  if (gallery.config_digest != want) {
    throw ConfigError("gallery digest " + to_hex(gallery.config_digest) + " does not match model digest " + to_hex(want));
  }
  if (probes.config_digest != want) {
    throw ConfigError("probe digest " + to_hex(probes.config_digest) + " does not match model digest " + to_hex(want));
  }
  if (gallery.class_list != probes.class_list) throw ConfigError("gallery and probe stores have different class lists");
  if (gallery.size() == 0) throw ArgumentError("empty gallery");
  if (probes.size() == 0) throw ArgumentError("empty probe set");
}

std::vector<std::uint32_t> knn_predict(const Mlp& model, const FeatureStore& gallery, const FeatureStore& probes, int layer,
                                       std::size_t k, Metric metric, std::size_t workers) {
  const auto g = model.embed_store(gallery, layer);
  const auto p = model.embed_store(probes, layer);
  const auto source = layer == 1 ? EmbeddingSource::layer1 : EmbeddingSource::layer2;
  const KnnIndex index(flatten(g), static_cast<std::size_t>(g.cols()), gallery.labels, gallery.class_list, metric, source);
  const auto queries = flatten(p);
  return index.classify_all(queries, k, workers);
}

EvalReport report_for(const FeatureStore& probes, const std::vector<std::uint32_t>& predicted) {
  return summarize(confusion(probes.labels, predicted, probes.class_list));
}

}  // namespace

LayerwiseResult evaluate_layerwise(const Mlp& model, const FeatureStore& gallery, const FeatureStore& probes,
                                   std::size_t k, Metric metric, std::size_t workers) {
  check_stores(model, gallery, probes);

  // Model output index -> probe class index, by name.
  const auto& model_classes = model.meta().class_list;
  std::vector<std::uint32_t> to_probe(model_classes.size());
  for (std::size_t i = 0; i < model_classes.size(); ++i) {
    const auto it = std::find(probes.class_list.begin(), probes.class_list.end(), model_classes[i]);
    if (it == probes.class_list.end()) {
      throw ConfigError("model class '" + model_classes[i] + "' is missing from the probe class list");
    }
    to_probe[i] = static_cast<std::uint32_t>(it - probes.class_list.begin());
  }

  LayerwiseResult out;
  out.layer1 = report_for(probes, knn_predict(model, gallery, probes, 1, k, metric, workers));
  out.layer2 = report_for(probes, knn_predict(model, gallery, probes, 2, k, metric, workers));

  const auto probs = model.embed_store(probes, 3);
  std::vector<std::uint32_t> predicted(probes.size());
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index best = 0;
    probs.row(r).maxCoeff(&best);
    predicted[static_cast<std::size_t>(r)] = to_probe[static_cast<std::size_t>(best)];
  }
  out.output = report_for(probes, predicted);
  return out;
}

CrossDomainResult cross_domain_eval(const Mlp& model, const FeatureStore& gallery, const FeatureStore& probes, int layer,
                                    std::size_t k, Metric metric, std::size_t workers) {
  if (layer != 1 && layer != 2) throw ArgumentError("layer must be 1 or 2, got " + std::to_string(layer));
  check_stores(model, gallery, probes);

  CrossDomainResult out;
  out.layer = layer;
  out.report = report_for(probes, knn_predict(model, gallery, probes, layer, k, metric, workers));

  const auto& known = model.meta().class_list;
  out.seen.resize(probes.class_list.size());
  double seen_sum = 0.0, unseen_sum = 0.0;
  std::size_t seen_n = 0, unseen_n = 0;
  for (std::size_t c = 0; c < probes.class_list.size(); ++c) {
    out.seen[c] = std::find(known.begin(), known.end(), probes.class_list[c]) != known.end();
    const auto& acc = out.report.per_class[c];
    if (!acc) continue;
    if (out.seen[c]) {
      seen_sum += *acc;
      ++seen_n;
    } else {
      unseen_sum += *acc;
      ++unseen_n;
    }
  }
  if (seen_n) out.seen_accuracy = seen_sum / static_cast<double>(seen_n);
  if (unseen_n) out.unseen_accuracy = unseen_sum / static_cast<double>(unseen_n);
  return out;
}

}  // namespace scripta
