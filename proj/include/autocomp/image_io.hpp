#pragma once

// 8-bit image file I/O: PNG (gray, RGB, RGBA) and binary PGM/PPM.
// Loading detects the format from the file signature.

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "autocomp/error.hpp"
#include "autocomp/imgcore.hpp"

namespace autocomp {

enum class IoFailure { MissingFile, UnsupportedFormat, CorruptStream, Unwritable };

class ImageIoError : public DataError {
 public:
  ImageIoError(IoFailure failure, const std::string& what) : DataError(what), failure_(failure) {}
  IoFailure failure() const noexcept { return failure_; }

 private:
  IoFailure failure_;
};

enum class ImageFormat { Png, Pnm };

// round-half-up, clamped to [0,255]
inline std::uint8_t quantize_sample(float s) {
  const double v = std::floor(static_cast<double>(s) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

inline float dequantize_sample(std::uint8_t b) { return static_cast<float>(b) / 255.0f; }

// Snaps every sample to the 8-bit grid, exactly as a save/load round trip would.
inline Image quantize(const Image& img) {
  Image out = img;
  for (auto& s : out.data()) s = dequantize_sample(quantize_sample(s));
  return out;
}

inline SoftMask quantize(const SoftMask& mask) {
  SoftMask out = mask;
  for (auto& s : out.data()) s = dequantize_sample(quantize_sample(s));
  return out;
}

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec))
    throw ImageIoError(IoFailure::MissingFile, "no such image file: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError(IoFailure::MissingFile, "cannot open image file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Image decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
    throw ImageIoError(IoFailure::CorruptStream, "corrupt PNG " + name + ": " + png.message);

  int channels = 3;
  if (png.format & PNG_FORMAT_FLAG_ALPHA) {
    png.format = PNG_FORMAT_RGBA;
    channels = 4;
  } else if (png.format & PNG_FORMAT_FLAG_COLOR) {
    png.format = PNG_FORMAT_RGB;
  } else {
    png.format = PNG_FORMAT_GRAY;
    channels = 1;
  }
  std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, raw.data(), 0, nullptr)) {
    png_image_free(&png);
    throw ImageIoError(IoFailure::CorruptStream, "corrupt PNG " + name + ": " + png.message);
  }
  Image img(static_cast<int>(png.height), static_cast<int>(png.width), channels);
  std::transform(raw.begin(), raw.end(), img.data().begin(), dequantize_sample);
  return img;
}

inline Image decode_pnm(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  const bool color = bytes[1] == '6';
  std::size_t pos = 2;
  auto next_int = [&]() -> long {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
      throw ImageIoError(IoFailure::CorruptStream, "corrupt PNM header in " + name);
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1L << 24)) throw ImageIoError(IoFailure::CorruptStream, "PNM header value too large in " + name);
    }
    return v;
  };
  const long w = next_int();
  const long h = next_int();
  const long maxval = next_int();
  if (w < 1 || h < 1) throw ImageIoError(IoFailure::CorruptStream, "PNM with empty dimensions: " + name);
  if (maxval != 255) throw ImageIoError(IoFailure::UnsupportedFormat, "only 8-bit PNM is supported: " + name);
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw ImageIoError(IoFailure::CorruptStream, "corrupt PNM header in " + name);
  ++pos;
  const int channels = color ? 3 : 1;
  const std::size_t need = static_cast<std::size_t>(w) * h * channels;
  if (bytes.size() - pos < need) throw ImageIoError(IoFailure::CorruptStream, "truncated PNM payload in " + name);
  Image img(static_cast<int>(h), static_cast<int>(w), channels);
  std::transform(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                 bytes.begin() + static_cast<std::ptrdiff_t>(pos + need), img.data().begin(), dequantize_sample);
  return img;
}

inline bool has_png_signature(const std::vector<std::uint8_t>& bytes) {
  static constexpr std::array<std::uint8_t, 8> sig{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return bytes.size() >= sig.size() && std::equal(sig.begin(), sig.end(), bytes.begin());
}

inline bool has_pnm_signature(const std::vector<std::uint8_t>& bytes) {
  return bytes.size() >= 3 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6') && std::isspace(bytes[2]);
}

}  // namespace detail

inline Image load_image(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  if (detail::has_png_signature(bytes)) return detail::decode_png(bytes, path.string());
  if (detail::has_pnm_signature(bytes)) return detail::decode_pnm(bytes, path.string());
  throw ImageIoError(IoFailure::UnsupportedFormat, "unsupported image format: " + path.string());
}

// Single-channel view of a mask file: the alpha channel of an RGBA image,
// otherwise the first channel.
inline SoftMask load_mask(const std::filesystem::path& path) {
  const Image img = load_image(path);
  return to_mask(img, img.channels() == 4 ? 3 : 0);
}

inline ImageFormat format_for_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return ImageFormat::Pnm;
  return ImageFormat::Png;
}

inline std::vector<std::uint8_t> encode_bytes(const Image& img) {
  std::vector<std::uint8_t> raw(img.data().size());
  std::transform(img.data().begin(), img.data().end(), raw.begin(), quantize_sample);
  return raw;
}

inline void save_image(const Image& img, const std::filesystem::path& path) {
  if (img.empty()) throw DataError("cannot save an empty image: " + path.string());
  const auto raw = encode_bytes(img);
  if (format_for_path(path) == ImageFormat::Pnm) {
    if (img.channels() != 1 && img.channels() != 3)
      throw ImageIoError(IoFailure::UnsupportedFormat, "PNM output needs 1 or 3 channels: " + path.string());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ImageIoError(IoFailure::Unwritable, "cannot write image: " + path.string());
    out << (img.channels() == 3 ? "P6" : "P5") << '\n' << img.width() << ' ' << img.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw ImageIoError(IoFailure::Unwritable, "failed writing image: " + path.string());
    return;
  }
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width());
  png.height = static_cast<png_uint_32>(img.height());
  png.format = img.channels() == 1 ? PNG_FORMAT_GRAY : img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_RGBA;
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, raw.data(), 0, nullptr))
    throw ImageIoError(IoFailure::Unwritable, "cannot write image " + path.string() + ": " + png.message);
}

inline void save_mask(const SoftMask& mask, const std::filesystem::path& path) { save_image(to_image(mask), path); }

}  // namespace autocomp
