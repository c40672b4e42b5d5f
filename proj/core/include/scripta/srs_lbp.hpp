#pragma once

// Sparse radial sampling LBP: one 8-neighbour ring per radius, with the
// centre/neighbour difference threshold chosen per (image, radius) by Otsu's method.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scripta/digest.hpp"
#include "scripta/image.hpp"

namespace scripta {

inline constexpr int kRingSamples = 8;
inline constexpr int kMaxRadius = 12;
inline constexpr int kCodeBins = 256;

using Histogram256 = std::array<std::uint64_t, kCodeBins>;

struct RingSpec {
  int radius = 1;

  /// Pixels within this distance of a border carry no code.
  int margin() const { return radius; }
};

/// Code map of one radius. codes outside [margin, dim - margin) are zero and invalid.
struct CodeMap {
  int width = 0;
  int height = 0;
  int radius = 0;
  int margin = 0;
  /// Real-valued difference threshold; a bit is set when difference > threshold.
  double threshold = 0.0;
  std::vector<std::uint8_t> codes;

  bool valid(int x, int y) const { return x >= margin && y >= margin && x < width - margin && y < height - margin; }
  std::uint8_t operator()(int x, int y) const { return codes[static_cast<std::size_t>(y) * width + x]; }
  std::size_t valid_count() const {
    return static_cast<std::size_t>(width - 2 * margin) * static_cast<std::size_t>(height - 2 * margin);
  }
};

enum class ZoneMode { three_halves, global };

std::string to_string(ZoneMode mode);
ZoneMode parse_zone_mode(std::string_view text);

/// Half-open row interval [begin, end).
struct RowRange {
  int begin = 0;
  int end = 0;
};

/// three_halves: upper half, central half, lower half (floor rounding). global: all rows.
std::vector<RowRange> zone_rows(ZoneMode mode, int height);

/// Otsu threshold over a 256-bin histogram: the bin t maximising the between-class variance of
/// {bins <= t} and {bins > t}, smallest t on ties. A single occupied bin is returned as-is.
/// Throws ArgumentError for an empty histogram or a total count >= 2^32.
int otsu_threshold(std::span<const std::uint64_t, kCodeBins> hist);

/// Bilinear samples at angles k*45 degrees counter-clockwise from +x (image y grows downward).
std::array<double, kRingSamples> sample_ring(const GrayImage& img, int x, int y, RingSpec ring);

CodeMap srs_code_map(const GrayImage& img, RingSpec ring);

std::vector<Histogram256> pool_zone_histograms(const CodeMap& map, ZoneMode mode);

/// Maps a code to the code of the same neighbourhood rotated by 180 degrees.
constexpr std::uint8_t rotate_code_half_turn(std::uint8_t code) {
  return static_cast<std::uint8_t>(((code << 4) | (code >> 4)) & 0xFF);
}

struct FeatureConfig {
  std::vector<int> radii = default_radii();
  ZoneMode zones = ZoneMode::three_halves;

  static std::vector<int> default_radii();

  std::size_t zone_count() const { return zones == ZoneMode::three_halves ? 3 : 1; }
  std::size_t dim() const { return static_cast<std::size_t>(kCodeBins) * radii.size() * zone_count(); }
  /// Radii sorted, unique, in [1, 12]; throws ArgumentError otherwise.
  void validate() const;
  std::string canonical() const;
  Digest digest() const;

  bool operator==(const FeatureConfig&) const = default;
};

/// Parses "a..b" (inclusive) or a comma list "1,3,5".
std::vector<int> parse_radii(std::string_view text);
std::string format_radii(const std::vector<int>& radii);

struct FeatureVector {
  std::vector<float> values;
  Digest config_digest{};

  std::size_t dim() const { return values.size(); }
};

/// Radius-major, then zone, then bin. Each 256-block is L1-normalised (all-zero for an empty zone).
FeatureVector extract_features(const GrayImage& img, const FeatureConfig& config);

}  // namespace scripta
