#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scripta/digest.hpp"
#include "scripta/srs_lbp.hpp"

namespace scripta {

enum class Split { train, val, test };

std::string to_string(Split split);
std::optional<Split> parse_split(std::string_view text);

struct SampleRecord {
  std::filesystem::path path;
  std::string label;
  Split split = Split::train;
  std::optional<std::string> group;
};

struct Manifest {
  std::vector<SampleRecord> records;
  /// Sorted distinct labels; a class index is a position in this list.
  std::vector<std::string> class_list;

  std::uint32_t class_index(std::string_view label) const;
  std::vector<std::uint32_t> labels() const;
  /// Indices of records whose split is in `splits`, in manifest order.
  std::vector<std::size_t> select(std::initializer_list<Split> splits) const;
};

/// CSV with header `path,label,split,group`. Relative paths resolve against `base_dir`.
Manifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir, std::string_view source_name);
Manifest load_manifest(const std::filesystem::path& path);

struct Fold {
  std::string group;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Leave-one-group-out folds, ordered by group name.
std::vector<Fold> make_group_folds(const Manifest& manifest, std::size_t n_folds_expected);

/// Records of `b` whose path (after normalisation) also occurs in `a`, as (index in a, index in b).
std::vector<std::pair<std::size_t, std::size_t>> find_duplicate_paths(const Manifest& a, const Manifest& b);

/// Row-major n_samples x dim feature matrix with class labels.
struct FeatureStore {
  std::uint32_t dim = 0;
  std::vector<float> matrix;
  std::vector<std::uint32_t> labels;
  Digest config_digest{};
  std::vector<std::string> class_list;
  /// Extraction setup, when the rows are SRS-LBP features.
  std::optional<FeatureConfig> config;

  std::size_t size() const { return labels.size(); }
  std::span<const float> row(std::size_t i) const { return {matrix.data() + i * dim, dim}; }
  void append(std::span<const float> values, std::uint32_t label);
  FeatureStore subset(std::span<const std::size_t> indices) const;
  /// Throws ArgumentError when shapes or labels are inconsistent.
  void validate() const;

  bool operator==(const FeatureStore&) const = default;
};

/// Binary store plus `<path>.json` sidecar holding the class list and extraction config.
void write_features(const FeatureStore& store, const std::filesystem::path& path);
FeatureStore read_features(const std::filesystem::path& path, const std::optional<Digest>& expected_digest = std::nullopt);

std::filesystem::path sidecar_path(const std::filesystem::path& store_path);

}  // namespace scripta
