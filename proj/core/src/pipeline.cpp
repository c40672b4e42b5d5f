#include "scripta/pipeline.hpp"

#include <numeric>

#include "scripta/error.hpp"
#include "scripta/image.hpp"
#include "scripta/parallel.hpp"

namespace scripta {

FeatureStore extract_store(const Manifest& manifest, std::span<const std::size_t> indices, const FeatureConfig& config,
                           std::size_t workers) {
  config.validate();
  const std::size_t dim = config.dim();
  FeatureStore store;
  store.dim = static_cast<std::uint32_t>(dim);
  store.config_digest = config.digest();
  store.class_list = manifest.class_list;
  store.config = config;
  store.matrix.resize(indices.size() * dim);
  store.labels.resize(indices.size());

  parallel_for(indices.size(), workers, [&](std::size_t i) {
    const auto& rec = manifest.records.at(indices[i]);
    FeatureVector fv;
    try {
      fv = extract_features(preprocess(read_image(rec.path)), config);
    } catch (const Error& e) {
      throw Error(rec.path.string() + ": " + e.what());
    }
    std::copy(fv.values.begin(), fv.values.end(), store.matrix.begin() + static_cast<std::ptrdiff_t>(i * dim));
    store.labels[i] = manifest.class_index(rec.label);
  });
  return store;
}

FeatureStore extract_store(const Manifest& manifest, const FeatureConfig& config, std::size_t workers) {
  std::vector<std::size_t> all(manifest.records.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return extract_store(manifest, all, config, workers);
}

}  // namespace scripta
