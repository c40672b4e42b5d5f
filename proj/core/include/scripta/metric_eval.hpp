#pragma once

#include <cstddef>
#include <vector>

#include "scripta/dataset.hpp"
#include "scripta/eval_report.hpp"
#include "scripta/knn.hpp"
#include "scripta/mlp.hpp"

namespace scripta {

struct LayerwiseResult {
  EvalReport layer1;
  EvalReport layer2;
  EvalReport output;
};

/// k-NN on layer-1 and layer-2 embeddings (gallery rows as references) plus output argmax.
/// Both stores must carry the model's config digest and the same class list.
LayerwiseResult evaluate_layerwise(const Mlp& model, const FeatureStore& gallery, const FeatureStore& probes,
                                   std::size_t k = 1, Metric metric = Metric::euclidean, std::size_t workers = 1);

struct CrossDomainResult {
  int layer = 1;
  EvalReport report;
  /// Per class of the probe class list: known to the model by name.
  std::vector<bool> seen;
  /// Mean per-class accuracy over seen / unseen classes that have probes; nullopt when none.
  std::optional<double> seen_accuracy;
  std::optional<double> unseen_accuracy;
};

/// Embeds a foreign gallery and probe set with `model` and classifies by k-NN. Class lists of
/// the stores may contain classes the model never saw.
CrossDomainResult cross_domain_eval(const Mlp& model, const FeatureStore& gallery, const FeatureStore& probes,
                                    int layer = 1, std::size_t k = 1, Metric metric = Metric::euclidean,
                                    std::size_t workers = 1);

/// Row-major copy of an embedding matrix.
std::vector<float> flatten(const RowMatrix<float>& m);

}  // namespace scripta
