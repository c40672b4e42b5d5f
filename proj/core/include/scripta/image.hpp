#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace scripta {

/// 8-bit RGB raster, row-major, three bytes per pixel.
struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  RasterImage() = default;
  RasterImage(int w, int h);
  RasterImage(int w, int h, std::vector<std::uint8_t> pixels);

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  std::uint8_t* at(int x, int y) { return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const std::uint8_t* at(int x, int y) const { return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x); }

  bool operator==(const RasterImage&) const = default;
};

/// Single-channel image with intensities in [0, 1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  bool polarity_flipped = false;

  GrayImage() = default;
  GrayImage(int w, int h, std::vector<double> v, bool flipped = false);

  double operator()(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  double& operator()(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const GrayImage&) const = default;
};

/// Decodes PNG or binary PNM (P5/P6). Gray sources are replicated to three channels.
RasterImage decode_image(std::span<const std::uint8_t> bytes);
RasterImage read_image(const std::filesystem::path& path);

/// Binary P6 encoding.
std::vector<std::uint8_t> encode_pnm(const RasterImage& img);
/// 8-bit RGB PNG encoding.
std::vector<std::uint8_t> encode_png(const RasterImage& img);
void write_image(const RasterImage& img, const std::filesystem::path& path);

/// Min-max rescales arbitrary real intensities to [0, 1]. A constant input maps to 0.5.
GrayImage rescale_to_unit(int width, int height, std::span<const double> values);

/// Projects each pixel colour onto the leading principal component of the image's colour
/// covariance, oriented so the component has a non-negative sum, then rescales to [0, 1].
/// Falls back to Rec.601 luminance when the leading component is not unique.
GrayImage pca_gray(const RasterImage& img);

/// Inverts the image when the band of columns [W/4, 3W/4) is darker than the whole image.
/// polarity_flipped toggles on inversion, so it stays false for images left untouched.
GrayImage normalize_polarity(GrayImage img);

/// pca_gray followed by normalize_polarity.
GrayImage preprocess(const RasterImage& img);

GrayImage invert(GrayImage img);
GrayImage rotate180(const GrayImage& img);

}  // namespace scripta
