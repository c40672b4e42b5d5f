#pragma once

#include <cstddef>
#include <span>

#include "scripta/dataset.hpp"
#include "scripta/srs_lbp.hpp"

namespace scripta {

/// Reads, preprocesses and describes the selected manifest records. Labels index
/// manifest.class_list; rows keep the order of `indices`. Runs on `workers` threads.
FeatureStore extract_store(const Manifest& manifest, std::span<const std::size_t> indices, const FeatureConfig& config,
                           std::size_t workers = 1);

/// Every record of the manifest.
FeatureStore extract_store(const Manifest& manifest, const FeatureConfig& config, std::size_t workers = 1);

}  // namespace scripta
