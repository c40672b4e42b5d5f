#include "scripta/srs_lbp.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "scripta/error.hpp"

namespace scripta {

std::string to_string(ZoneMode mode) { return mode == ZoneMode::three_halves ? "three-halves" : "global"; }

ZoneMode parse_zone_mode(std::string_view text) {
  if (text == "three-halves") return ZoneMode::three_halves;
  if (text == "global") return ZoneMode::global;
  throw ParseError("unknown zone mode '" + std::string(text) + "' (expected three-halves or global)");
}

std::vector<RowRange> zone_rows(ZoneMode mode, int height) {
  if (mode == ZoneMode::global) return {{0, height}};
  return {{0, height / 2}, {height / 4, (3 * height) / 4}, {height / 2, height}};
}

int otsu_threshold(std::span<const std::uint64_t, kCodeBins> hist) {
  using boost::multiprecision::int256_t;
  using boost::multiprecision::uint256_t;

  std::uint64_t total = 0;
  std::uint64_t weighted = 0;
  int occupied = 0;
  int last_occupied = 0;
  for (int i = 0; i < kCodeBins; ++i) {
    total += hist[i];
    weighted += static_cast<std::uint64_t>(i) * hist[i];
    if (hist[i] != 0) {
      ++occupied;
      last_occupied = i;
    }
    if (total >= (std::uint64_t{1} << 32)) throw ArgumentError("otsu_threshold: histogram total must be below 2^32");
  }
  if (total == 0) throw ArgumentError("otsu_threshold: empty histogram");
  if (occupied == 1) return last_occupied;

  // Between-class variance is proportional to (N*S0 - n0*S)^2 / (n0*n1); compared by cross-multiplication.
  int best = -1;
  uint256_t best_num = 0;
  uint256_t best_den = 1;
  std::uint64_t n0 = 0;
  std::uint64_t s0 = 0;
  for (int t = 0; t < kCodeBins - 1; ++t) {
    n0 += hist[t];
    s0 += static_cast<std::uint64_t>(t) * hist[t];
    const std::uint64_t n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const int256_t diff = int256_t(total) * s0 - int256_t(n0) * weighted;
    uint256_t num(diff < 0 ? -diff : diff);
    num *= num;
    const uint256_t den = uint256_t(n0) * n1;
    if (best < 0 || num * best_den > best_num * den) {
      best = t;
      best_num = num;
      best_den = den;
    }
  }
  return best;
}

namespace {

// Bilinear sample between corners a=(dx0,dy0), b=(dx1,dy0), c=(dx0,dy1), d=(dx1,dy1). An
// integral coordinate collapses its corner pair, so constant regions sample exactly.
struct Tap {
  int dx0, dy0, dx1, dy1;
  double fx, fy;
};

struct RingTaps {
  std::array<Tap, kRingSamples> taps;
};

// Directions 4..7 reuse the taps of 0..3 with negated offsets, so a half-turn rotation of the
// image reproduces every sample bit-for-bit.
RingTaps make_ring_taps(int radius) {
  const double r = static_cast<double>(radius);
  const double diag = r * std::sqrt(0.5);
  const std::array<std::array<double, 2>, 4> offsets = {{{r, 0.0}, {diag, -diag}, {0.0, -r}, {-diag, -diag}}};
  RingTaps out;
  for (int k = 0; k < 4; ++k) {
    const double fx0 = std::floor(offsets[k][0]);
    const double fy0 = std::floor(offsets[k][1]);
    Tap t;
    t.fx = offsets[k][0] - fx0;
    t.fy = offsets[k][1] - fy0;
    t.dx0 = static_cast<int>(fx0);
    t.dy0 = static_cast<int>(fy0);
    t.dx1 = t.fx == 0.0 ? t.dx0 : t.dx0 + 1;
    t.dy1 = t.fy == 0.0 ? t.dy0 : t.dy0 + 1;
    out.taps[k] = t;
    out.taps[k + 4] = {-t.dx0, -t.dy0, -t.dx1, -t.dy1, t.fx, t.fy};
  }
  return out;
}

const RingTaps& ring_taps(int radius) {
  static const std::array<RingTaps, kMaxRadius + 1> table = [] {
    std::array<RingTaps, kMaxRadius + 1> t;
    for (int r = 1; r <= kMaxRadius; ++r) t[r] = make_ring_taps(r);
    return t;
  }();
  return table[radius];
}

void check_radius(int radius) {
  if (radius < 1 || radius > kMaxRadius) {
    throw ArgumentError("radius " + std::to_string(radius) + " outside [1, " + std::to_string(kMaxRadius) + "]");
  }
}

double sample(const GrayImage& img, int x, int y, const Tap& t) {
  const double a = img(x + t.dx0, y + t.dy0);
  const double b = img(x + t.dx1, y + t.dy0);
  const double c = img(x + t.dx0, y + t.dy1);
  const double d = img(x + t.dx1, y + t.dy1);
  const double top = a + t.fx * (b - a);
  const double bottom = c + t.fx * (d - c);
  return top + t.fy * (bottom - top);
}

}  // namespace

std::array<double, kRingSamples> sample_ring(const GrayImage& img, int x, int y, RingSpec ring) {
  check_radius(ring.radius);
  const int m = ring.margin();
  if (x < m || y < m || x >= img.width - m || y >= img.height - m) {
    throw ArgumentError("sample_ring: centre (" + std::to_string(x) + ", " + std::to_string(y) + ") closer than " +
                        std::to_string(m) + " pixels to the border");
  }
  const RingTaps& taps = ring_taps(ring.radius);
  std::array<double, kRingSamples> out{};
  for (int k = 0; k < kRingSamples; ++k) out[k] = sample(img, x, y, taps.taps[k]);
  return out;
}

CodeMap srs_code_map(const GrayImage& img, RingSpec ring) {
  check_radius(ring.radius);
  const int m = ring.margin();
  if (img.width <= 2 * m || img.height <= 2 * m) {
    throw ArgumentError("image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                        " too small for radius " + std::to_string(ring.radius));
  }
  CodeMap map;
  map.width = img.width;
  map.height = img.height;
  map.radius = ring.radius;
  map.margin = m;
  map.codes.assign(static_cast<std::size_t>(img.width) * img.height, 0);

  const RingTaps& taps = ring_taps(ring.radius);
  const int inner_w = img.width - 2 * m;
  const int inner_h = img.height - 2 * m;
  std::vector<double> diffs(static_cast<std::size_t>(inner_w) * inner_h * kRingSamples);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::size_t idx = 0;
  for (int y = m; y < img.height - m; ++y) {
    for (int x = m; x < img.width - m; ++x) {
      const double centre = img(x, y);
      for (int k = 0; k < kRingSamples; ++k) {
        const double d = sample(img, x, y, taps.taps[k]) - centre;
        diffs[idx++] = d;
        lo = std::min(lo, d);
        hi = std::max(hi, d);
      }
    }
  }

  if (!(hi > lo)) {
    map.threshold = 0.0;
    return map;
  }

  const double range = hi - lo;
  const double to_bin = kCodeBins / range;
  Histogram256 hist{};
  for (double d : diffs) {
    const auto bin = std::min(static_cast<int>((d - lo) * to_bin), kCodeBins - 1);
    ++hist[bin];
  }
  const int t = otsu_threshold(hist);
  map.threshold = lo + (t + 1) * (range / kCodeBins);

  idx = 0;
  for (int y = m; y < img.height - m; ++y) {
    for (int x = m; x < img.width - m; ++x) {
      std::uint8_t code = 0;
      for (int k = 0; k < kRingSamples; ++k) {
        if (diffs[idx++] > map.threshold) code |= static_cast<std::uint8_t>(1u << k);
      }
      map.codes[static_cast<std::size_t>(y) * img.width + x] = code;
    }
  }
  return map;
}

std::vector<Histogram256> pool_zone_histograms(const CodeMap& map, ZoneMode mode) {
  const auto zones = zone_rows(mode, map.height);
  std::vector<Histogram256> out(zones.size(), Histogram256{});
  for (std::size_t z = 0; z < zones.size(); ++z) {
    const int y_begin = std::max(zones[z].begin, map.margin);
    const int y_end = std::min(zones[z].end, map.height - map.margin);
    for (int y = y_begin; y < y_end; ++y) {
      for (int x = map.margin; x < map.width - map.margin; ++x) ++out[z][map(x, y)];
    }
  }
  return out;
}

std::vector<int> FeatureConfig::default_radii() {
  std::vector<int> r(kMaxRadius);
  for (int i = 0; i < kMaxRadius; ++i) r[i] = i + 1;
  return r;
}

void FeatureConfig::validate() const {
  if (radii.empty()) throw ArgumentError("feature config needs at least one radius");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    check_radius(radii[i]);
    if (i > 0 && radii[i] <= radii[i - 1]) throw ArgumentError("radii must be strictly ascending");
  }
}

std::string FeatureConfig::canonical() const {
  return "srs-lbp/v1;samples=8;interp=bilinear;radii=" + format_radii(radii) + ";zones=" + to_string(zones) +
         ";norm=l1-per-block;order=radius-zone-bin;preprocess=pca-gray+central-band-polarity";
}

Digest FeatureConfig::digest() const { return sha256(canonical()); }

namespace {

int parse_int(std::string_view text, std::string_view whole) {
  int value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) throw ParseError("invalid radii specification '" + std::string(whole) + "'");
  return value;
}

}  // namespace

std::vector<int> parse_radii(std::string_view text) {
  std::vector<int> out;
  if (const auto dots = text.find(".."); dots != std::string_view::npos) {
    const int a = parse_int(text.substr(0, dots), text);
    const int b = parse_int(text.substr(dots + 2), text);
    if (a > b) throw ParseError("invalid radii range '" + std::string(text) + "'");
    for (int r = a; r <= b; ++r) out.push_back(r);
  } else {
    std::size_t start = 0;
    while (start <= text.size()) {
      const auto comma = text.find(',', start);
      const auto piece = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      out.push_back(parse_int(piece, text));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  FeatureConfig{out, ZoneMode::global}.validate();
  return out;
}

std::string format_radii(const std::vector<int>& radii) {
  std::ostringstream os;
  for (std::size_t i = 0; i < radii.size(); ++i) os << (i ? "," : "") << radii[i];
  return os.str();
}

FeatureVector extract_features(const GrayImage& img, const FeatureConfig& config) {
  config.validate();
  const int largest = config.radii.back();
  if (img.width <= 2 * largest || img.height <= 2 * largest) {
    throw ArgumentError("image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                        " too small for radius " + std::to_string(largest));
  }
  FeatureVector out;
  out.config_digest = config.digest();
  out.values.reserve(config.dim());
  for (int radius : config.radii) {
    const CodeMap map = srs_code_map(img, RingSpec{radius});
    for (const Histogram256& hist : pool_zone_histograms(map, config.zones)) {
      std::uint64_t total = 0;
      for (auto c : hist) total += c;
      for (auto c : hist) {
        out.values.push_back(total == 0 ? 0.0f : static_cast<float>(static_cast<double>(c) / static_cast<double>(total)));
      }
    }
  }
  return out;
}

}  // namespace scripta
