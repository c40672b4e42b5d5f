#pragma once

// Synthetic texture datasets: each class is a periodic pattern at its own scale, drawn with
// random phase, random colours and pixel noise.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "scripta/image.hpp"

namespace scripta::testing {

/// Names of the available patterns, index = pattern id.
const std::vector<std::string>& pattern_names();

RasterImage render_texture(std::size_t pattern, int size, std::uint64_t seed);

struct DatasetSpec {
  std::vector<std::size_t> patterns{0, 1, 2, 3, 4};
  int train_per_class = 60;
  int val_per_class = 0;
  int test_per_class = 40;
  int size = 96;
  std::uint64_t seed = 1;
  bool png = false;
};

/// Writes images and manifest.csv under `dir`; returns the manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const DatasetSpec& spec);

/// `groups` groups of `per_group` samples cycling through the first `n_patterns` patterns;
/// every row is split=test. Returns the manifest path.
std::filesystem::path write_grouped_dataset(const std::filesystem::path& dir, int groups, int per_group, int size,
                                            std::uint64_t seed, std::size_t n_patterns = 5);

/// Fresh empty directory under the system temp dir.
std::filesystem::path fresh_dir(std::string_view name);

}  // namespace scripta::testing
