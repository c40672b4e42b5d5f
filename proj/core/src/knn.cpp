#include "scripta/knn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scripta/error.hpp"
#include "scripta/parallel.hpp"

namespace scripta {

std::string to_string(Metric metric) { return metric == Metric::euclidean ? "euclidean" : "cosine"; }

Metric parse_metric(std::string_view text) {
  if (text == "euclidean") return Metric::euclidean;
  if (text == "cosine") return Metric::cosine;
  throw ParseError("unknown metric '" + std::string(text) + "' (expected euclidean or cosine)");
}

std::string to_string(EmbeddingSource source) {
  switch (source) {
    case EmbeddingSource::raw:
      return "raw";
    case EmbeddingSource::layer1:
      return "layer1";
    case EmbeddingSource::layer2:
      return "layer2";
  }
  return "raw";
}

namespace {

double squared_euclidean(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

// Cosine distance 1 - cos; a zero vector has similarity 0 with everything.
double cosine_distance(double ab, double norm_a, double norm_b) {
  if (norm_a == 0.0 || norm_b == 0.0) return 1.0;
  return 1.0 - ab / (norm_a * norm_b);
}

}  // namespace

KnnIndex::KnnIndex(std::vector<float> vectors, std::size_t dim, std::vector<std::uint32_t> labels,
                   std::vector<std::string> class_list, Metric metric, EmbeddingSource source)
    : vectors_(std::move(vectors)),
      dim_(dim),
      labels_(std::move(labels)),
      class_list_(std::move(class_list)),
      metric_(metric),
      source_(source) {
  if (labels_.empty()) throw ArgumentError("cannot build a k-NN index from an empty vector set");
  if (dim_ == 0) throw ArgumentError("k-NN vectors must have positive dimension");
  if (vectors_.size() != labels_.size() * dim_) {
    throw ArgumentError("k-NN vector buffer holds " + std::to_string(vectors_.size()) + " values, expected " +
                        std::to_string(labels_.size()) + " x " + std::to_string(dim_));
  }
  for (auto l : labels_) {
    if (l >= class_list_.size()) {
      throw ArgumentError("k-NN label " + std::to_string(l) + " outside class list of size " + std::to_string(class_list_.size()));
    }
  }
  if (metric_ == Metric::cosine) {
    norms_.resize(labels_.size());
    for (std::size_t i = 0; i < labels_.size(); ++i) norms_[i] = std::sqrt(dot(vector(i), vector(i)));
  }
}

double KnnIndex::distance(std::span<const float> a, std::span<const float> b) const {
  if (a.size() != b.size()) throw ArgumentError("distance between vectors of different dimension");
  if (metric_ == Metric::euclidean) return std::sqrt(squared_euclidean(a, b));
  return cosine_distance(dot(a, b), std::sqrt(dot(a, a)), std::sqrt(dot(b, b)));
}

KnnPrediction KnnIndex::classify(std::span<const float> query, std::size_t k) const {
  if (query.size() != dim_) {
    throw ArgumentError("query dim " + std::to_string(query.size()) + " does not match index dim " + std::to_string(dim_));
  }
  if (k < 1 || k > size()) throw ArgumentError("k = " + std::to_string(k) + " outside [1, " + std::to_string(size()) + "]");

  // Ranking key: squared distance for euclidean (monotone in the distance), 1 - cos for cosine.
  std::vector<std::pair<double, std::size_t>> ranked(size());
  const double query_norm = metric_ == Metric::cosine ? std::sqrt(dot(query, query)) : 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    const double key = metric_ == Metric::euclidean ? squared_euclidean(query, vector(i))
                                                    : cosine_distance(dot(query, vector(i)), query_norm, norms_[i]);
    ranked[i] = {key, i};
  }
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end());

  KnnPrediction out;
  out.neighbor_ids.reserve(k);
  out.distances.reserve(k);
  std::vector<std::size_t> votes(class_list_.size(), 0);
  for (std::size_t j = 0; j < k; ++j) {
    const auto [key, id] = ranked[j];
    out.neighbor_ids.push_back(id);
    out.distances.push_back(metric_ == Metric::euclidean ? std::sqrt(key) : key);
    ++votes[labels_[id]];
  }
  const std::size_t best_votes = *std::max_element(votes.begin(), votes.end());
  for (std::size_t id : out.neighbor_ids) {
    if (votes[labels_[id]] == best_votes) {
      out.label = labels_[id];
      break;
    }
  }
  return out;
}

std::vector<std::uint32_t> KnnIndex::classify_all(std::span<const float> queries, std::size_t k, std::size_t workers) const {
  if (queries.size() % dim_ != 0) throw ArgumentError("query matrix size is not a multiple of the index dim");
  const std::size_t n = queries.size() / dim_;
  std::vector<std::uint32_t> out(n);
  parallel_for(n, workers, [&](std::size_t i) { out[i] = classify(queries.subspan(i * dim_, dim_), k).label; });
  return out;
}

}  // namespace scripta
