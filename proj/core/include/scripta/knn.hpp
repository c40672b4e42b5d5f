#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scripta {

enum class Metric { euclidean, cosine };
enum class EmbeddingSource { raw, layer1, layer2 };

std::string to_string(Metric metric);
Metric parse_metric(std::string_view text);
std::string to_string(EmbeddingSource source);

struct KnnPrediction {
  std::uint32_t label = 0;
  /// Gallery rows ordered by (distance, insertion order).
  std::vector<std::size_t> neighbor_ids;
  std::vector<double> distances;
};

/// Exhaustive nearest-neighbour classifier over an immutable gallery.
class KnnIndex {
 public:
  /// `vectors` is row-major, labels.size() rows of `dim` values.
  KnnIndex(std::vector<float> vectors, std::size_t dim, std::vector<std::uint32_t> labels,
           std::vector<std::string> class_list, Metric metric = Metric::euclidean,
           EmbeddingSource source = EmbeddingSource::raw);

  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return dim_; }
  Metric metric() const { return metric_; }
  EmbeddingSource source() const { return source_; }
  const std::vector<std::string>& class_list() const { return class_list_; }
  const std::vector<std::uint32_t>& labels() const { return labels_; }
  std::span<const float> vector(std::size_t i) const { return {vectors_.data() + i * dim_, dim_}; }

  double distance(std::span<const float> a, std::span<const float> b) const;

  /// Majority vote of the k nearest; distance ties go to the earlier-inserted row, vote ties to
  /// the class of the nearer neighbour.
  KnnPrediction classify(std::span<const float> query, std::size_t k) const;

  /// Labels for every row of a row-major query matrix.
  std::vector<std::uint32_t> classify_all(std::span<const float> queries, std::size_t k, std::size_t workers = 1) const;

 private:
  std::vector<float> vectors_;
  std::size_t dim_;
  std::vector<std::uint32_t> labels_;
  std::vector<std::string> class_list_;
  Metric metric_;
  EmbeddingSource source_;
  std::vector<double> norms_;
};

}  // namespace scripta
