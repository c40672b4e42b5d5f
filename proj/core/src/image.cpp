#include "scripta/image.hpp"

#include <png.h>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "scripta/error.hpp"

namespace scripta {

RasterImage::RasterImage(int w, int h) : RasterImage(w, h, std::vector<std::uint8_t>(3 * static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0))) {}

RasterImage::RasterImage(int w, int h, std::vector<std::uint8_t> pixels) : width(w), height(h), rgb(std::move(pixels)) {
  if (w < 1 || h < 1) throw ArgumentError("raster dimensions must be positive");
  if (rgb.size() != 3 * pixel_count()) throw ArgumentError("raster buffer length does not match width*height*3");
}

GrayImage::GrayImage(int w, int h, std::vector<double> v, bool flipped)
    : width(w), height(h), values(std::move(v)), polarity_flipped(flipped) {
  if (w < 1 || h < 1) throw ArgumentError("gray image dimensions must be positive");
  if (values.size() != static_cast<std::size_t>(w) * h) throw ArgumentError("gray buffer length does not match width*height");
}

namespace {

bool is_pnm_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

class PnmHeaderReader {
 public:
  explicit PnmHeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  unsigned read_uint(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) fail(std::string("truncated header while reading ") + what);
    if (bytes_[pos_] < '0' || bytes_[pos_] > '9') fail(std::string("expected decimal ") + what);
    std::uint64_t value = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > std::numeric_limits<int>::max()) fail(std::string(what) + " out of range");
      ++pos_;
    }
    return static_cast<unsigned>(value);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void consume_single_space() {
    if (pos_ >= bytes_.size()) fail("truncated header before raster");
    if (!is_pnm_space(bytes_[pos_])) fail("expected whitespace after maxval");
    ++pos_;
  }

  [[noreturn]] void fail(const std::string& reason) const {
    throw DecodeError("PNM decode error at offset " + std::to_string(pos_) + ": " + reason);
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (is_pnm_space(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

RasterImage decode_pnm(std::span<const std::uint8_t> bytes) {
  const bool gray = bytes[1] == '5';
  PnmHeaderReader header(bytes);
  const unsigned width = header.read_uint("width");
  const unsigned height = header.read_uint("height");
  const unsigned maxval = header.read_uint("maxval");
  if (width == 0 || height == 0) header.fail("zero image dimension");
  if (maxval == 0) header.fail("maxval must be positive");
  if (maxval > 255) throw UnsupportedFormatError("PNM with maxval > 255 (16-bit samples) is not supported");
  header.consume_single_space();

  const std::size_t channels = gray ? 1 : 3;
  const std::size_t n_pixels = static_cast<std::size_t>(width) * height;
  const std::size_t raster_start = header.offset();
  const std::size_t needed = n_pixels * channels;
  if (bytes.size() - raster_start < needed) {
    throw DecodeError("PNM decode error at offset " + std::to_string(bytes.size()) + ": raster truncated, expected " +
                      std::to_string(needed) + " bytes from offset " + std::to_string(raster_start));
  }

  auto scale = [maxval](std::uint8_t v) -> std::uint8_t {
    if (maxval == 255) return v;
    const unsigned clamped = std::min<unsigned>(v, maxval);
    return static_cast<std::uint8_t>((clamped * 255u + maxval / 2) / maxval);
  };

  RasterImage out(static_cast<int>(width), static_cast<int>(height));
  const std::uint8_t* src = bytes.data() + raster_start;
  for (std::size_t i = 0; i < n_pixels; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      out.rgb[3 * i + c] = scale(gray ? src[i] : src[3 * i + c]);
    }
  }
  return out;
}

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    std::string reason = image.message;
    png_image_free(&image);
    throw DecodeError("PNG decode error: " + reason);
  }
  image.format = PNG_FORMAT_RGB;
  if (image.width == 0 || image.height == 0 || image.width > static_cast<png_uint_32>(std::numeric_limits<int>::max()) ||
      image.height > static_cast<png_uint_32>(std::numeric_limits<int>::max())) {
    png_image_free(&image);
    throw DecodeError("PNG decode error: invalid dimensions");
  }
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    std::string reason = image.message;
    png_image_free(&image);
    throw DecodeError("PNG decode error: " + reason);
  }
  return RasterImage(static_cast<int>(image.width), static_cast<int>(image.height), std::move(pixels));
}

}  // namespace

RasterImage decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw DecodeError("image decode error at offset 0: empty input");
  static constexpr std::array<std::uint8_t, 8> kPngSignature = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (bytes.size() >= kPngSignature.size() && std::equal(kPngSignature.begin(), kPngSignature.end(), bytes.begin())) {
    return decode_png(bytes);
  }
  if (bytes[0] == 'P') {
    if (bytes.size() < 2) throw DecodeError("image decode error at offset 1: truncated PNM magic");
    if (bytes[1] == '5' || bytes[1] == '6') return decode_pnm(bytes);
    throw UnsupportedFormatError(std::string("unsupported PNM variant P") + static_cast<char>(bytes[1]));
  }
  throw UnsupportedFormatError("unsupported image format (expected PNG or binary PNM)");
}

RasterImage read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_image(bytes);
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  } catch (const UnsupportedFormatError& e) {
    throw UnsupportedFormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_pnm(const RasterImage& img) {
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.rgb.begin(), img.rgb.end());
  return out;
}

std::vector<std::uint8_t> encode_png(const RasterImage& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.rgb.data(), 0, nullptr)) {
    throw Error(std::string("PNG encode error: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.rgb.data(), 0, nullptr)) {
    throw Error(std::string("PNG encode error: ") + image.message);
  }
  out.resize(size);
  return out;
}

void write_image(const RasterImage& img, const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  const auto bytes = (ext == ".png" || ext == ".PNG") ? encode_png(img) : encode_pnm(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

GrayImage rescale_to_unit(int width, int height, std::span<const double> values) {
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  std::vector<double> out(values.size());
  if (!(hi > lo)) {
    std::fill(out.begin(), out.end(), 0.5);
  } else {
    const double range = hi - lo;
    std::transform(values.begin(), values.end(), out.begin(),
                   [lo, range](double v) { return std::clamp((v - lo) / range, 0.0, 1.0); });
  }
  return GrayImage(width, height, std::move(out));
}

namespace {

GrayImage luminance_gray(const RasterImage& img) {
  std::vector<double> lum(img.pixel_count());
  for (std::size_t i = 0; i < lum.size(); ++i) {
    lum[i] = 0.299 * img.rgb[3 * i] + 0.587 * img.rgb[3 * i + 1] + 0.114 * img.rgb[3 * i + 2];
  }
  return rescale_to_unit(img.width, img.height, lum);
}

}  // namespace

GrayImage pca_gray(const RasterImage& img) {
  const std::size_t n = img.pixel_count();
  // Integer moments keep the covariance exactly shift-invariant.
  std::array<std::int64_t, 3> sum{};
  std::array<std::int64_t, 6> sum_sq{};  // rr, rg, rb, gg, gb, bb
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t r = img.rgb[3 * i], g = img.rgb[3 * i + 1], b = img.rgb[3 * i + 2];
    sum[0] += r;
    sum[1] += g;
    sum[2] += b;
    sum_sq[0] += r * r;
    sum_sq[1] += r * g;
    sum_sq[2] += r * b;
    sum_sq[3] += g * g;
    sum_sq[4] += g * b;
    sum_sq[5] += b * b;
  }
  const auto nn = static_cast<__int128>(n);
  auto scatter = [&](int k, int a, int b) {
    return static_cast<double>(nn * sum_sq[k] - static_cast<__int128>(sum[a]) * sum[b]);
  };
  // n^2 * covariance; the common factor does not affect eigenvectors.
  Eigen::Matrix3d cov;
  cov << scatter(0, 0, 0), scatter(1, 0, 1), scatter(2, 0, 2),  //
      scatter(1, 0, 1), scatter(3, 1, 1), scatter(4, 1, 2),      //
      scatter(2, 0, 2), scatter(4, 1, 2), scatter(5, 2, 2);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  const Eigen::Vector3d eigenvalues = solver.eigenvalues();
  const double top = eigenvalues(2);
  if (solver.info() != Eigen::Success || !(top > 0.0) || eigenvalues(2) - eigenvalues(1) <= 1e-9 * top) {
    return luminance_gray(img);
  }

  Eigen::Vector3d axis = solver.eigenvectors().col(2);
  const double along_gray = axis.sum();
  if (std::abs(along_gray) <= 1e-9) {
    for (int c = 0; c < 3; ++c) {
      if (std::abs(axis(c)) > 1e-9) {
        if (axis(c) < 0) axis = -axis;
        break;
      }
    }
  } else if (along_gray < 0) {
    axis = -axis;
  }

  std::vector<double> projected(n);
  const auto n64 = static_cast<std::int64_t>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int c = 0; c < 3; ++c) {
      acc += axis(c) * static_cast<double>(n64 * img.rgb[3 * i + c] - sum[c]);
    }
    projected[i] = acc;
  }
  return rescale_to_unit(img.width, img.height, projected);
}

GrayImage normalize_polarity(GrayImage img) {
  const int band_begin = img.width / 4;
  const int band_end = (3 * img.width) / 4;
  double band_sum = 0.0;
  double all_sum = 0.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double v = img(x, y);
      all_sum += v;
      if (x >= band_begin && x < band_end) band_sum += v;
    }
  }
  const double band_count = static_cast<double>(band_end - band_begin) * img.height;
  if (band_count == 0) return img;
  const double band_mean = band_sum / band_count;
  const double all_mean = all_sum / static_cast<double>(img.values.size());
  if (band_mean < all_mean) {
    img = invert(std::move(img));
    img.polarity_flipped = !img.polarity_flipped;
  }
  return img;
}

GrayImage preprocess(const RasterImage& img) { return normalize_polarity(pca_gray(img)); }

GrayImage invert(GrayImage img) {
  for (double& v : img.values) v = 1.0 - v;
  return img;
}

GrayImage rotate180(const GrayImage& img) {
  GrayImage out = img;
  std::reverse(out.values.begin(), out.values.end());
  return out;
}

}  // namespace scripta
