#pragma once

// 8-bit raster images and decoders for PNG (libpng), JPEG (libjpeg) and the
// binary/ASCII netpbm formats (PGM/PPM). Files are identified by content,
// not by extension.

#include <cctype>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "elmdoc/binary_io.hpp"
#include "elmdoc/error.hpp"

namespace elmdoc {

/// Interleaved 8-bit pixels, 1 (gray) or 3 (RGB) channels.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), pixels(w * h * c, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c = 0) { return pixels[(y * width + x) * channels + c]; }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c = 0) const {
    return pixels[(y * width + x) * channels + c];
  }
  friend bool operator==(const Image&, const Image&) = default;
};

namespace detail {

inline Image decode_pnm(std::string_view bytes, const std::string& what) {
  auto fail = [&](const std::string& msg) -> FormatError {
    return FormatError(FormatError::Kind::invalid, what + ": " + msg);
  };
  const char type = bytes.size() >= 2 ? bytes[1] : '\0';
  if (type != '2' && type != '3' && type != '5' && type != '6') throw fail("unsupported netpbm variant");
  std::size_t pos = 2;
  auto next_int = [&]() -> std::size_t {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size()) throw FormatError(FormatError::Kind::truncated, what + ": truncated netpbm header");
    std::size_t v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos++] - '0');
      any = true;
      if (v > (1u << 30)) throw fail("header value out of range");
    }
    if (!any) throw fail("malformed header");
    return v;
  };
  Image img;
  img.channels = (type == '3' || type == '6') ? 3 : 1;
  img.width = next_int();
  img.height = next_int();
  const std::size_t maxval = next_int();
  if (img.width == 0 || img.height == 0) throw fail("zero image dimension");
  if (maxval == 0 || maxval > 65535) throw fail("bad maxval");
  const std::size_t count = img.width * img.height * img.channels;
  img.pixels.resize(count);
  auto scale = [&](std::size_t v) -> std::uint8_t {
    if (v > maxval) throw fail("sample exceeds maxval");
    return static_cast<std::uint8_t>((v * 255 + maxval / 2) / maxval);
  };
  if (type == '2' || type == '3') {
    for (std::size_t i = 0; i < count; ++i) img.pixels[i] = scale(next_int());
    return img;
  }
  ++pos;  // single whitespace after maxval
  const std::size_t bps = maxval < 256 ? 1 : 2;
  if (bytes.size() < pos || bytes.size() - pos < count * bps)
    throw FormatError(FormatError::Kind::truncated, what + ": truncated netpbm pixel data");
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t v = static_cast<unsigned char>(bytes[pos + i * bps]);
    if (bps == 2) v = (v << 8) | static_cast<unsigned char>(bytes[pos + i * bps + 1]);
    img.pixels[i] = scale(v);
  }
  return img;
}

inline Image decode_png(std::string_view bytes, const std::string& what) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw FormatError(FormatError::Kind::invalid, what + ": " + png.message);
  }
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image img(png.width, png.height, color ? 3 : 1);
  png_color white{255, 255, 255};
  if (!png_image_finish_read(&png, &white, img.pixels.data(), 0, nullptr)) {
    std::string msg = png.message;
    png_image_free(&png);
    throw FormatError(FormatError::Kind::invalid, what + ": " + msg);
  }
  return img;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// Kept free of C++ objects with destructors so longjmp stays well-defined.
inline bool decode_jpeg_raw(const unsigned char* data, unsigned long size, Image* img, char* message) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.message[0] = '\0';
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    std::snprintf(message, JMSG_LENGTH_MAX, "%s", err.message);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, data, size);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);
  img->width = cinfo.output_width;
  img->height = cinfo.output_height;
  img->channels = static_cast<std::size_t>(cinfo.output_components);
  img->pixels.resize(img->width * img->height * img->channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img->pixels.data() + cinfo.output_scanline * img->width * img->channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

inline Image decode_jpeg(std::string_view bytes, const std::string& what) {
  Image img;
  char message[JMSG_LENGTH_MAX] = {};
  if (!decode_jpeg_raw(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), &img, message)) {
    throw FormatError(FormatError::Kind::invalid, what + ": " + message);
  }
  return img;
}

}  // namespace detail

inline Image decode_image(std::string_view bytes, const std::string& what = "image") {
  if (bytes.size() >= 8 && bytes.substr(0, 8) == std::string_view("\x89PNG\r\n\x1a\n", 8))
    return detail::decode_png(bytes, what);
  if (bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xFF && static_cast<unsigned char>(bytes[1]) == 0xD8)
    return detail::decode_jpeg(bytes, what);
  if (bytes.size() >= 2 && bytes[0] == 'P') return detail::decode_pnm(bytes, what);
  throw FormatError(FormatError::Kind::bad_magic, what + ": not a PNG, JPEG or PGM/PPM file");
}

inline Image load_image(const std::filesystem::path& path) { return decode_image(io::read_file(path), path.string()); }

/// Binary PGM (1 channel) or PPM (3 channels).
inline std::string encode_pnm(const Image& img) {
  std::ostringstream os;
  os << (img.channels == 1 ? "P5" : "P6") << "\n" << img.width << " " << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  return os.str();
}

inline std::string encode_png(const Image& img) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, img.pixels.data(), 0, nullptr))
    throw FormatError(FormatError::Kind::io, std::string("png encode: ") + png.message);
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, img.pixels.data(), 0, nullptr))
    throw FormatError(FormatError::Kind::io, std::string("png encode: ") + png.message);
  out.resize(size);
  return out;
}

}  // namespace elmdoc
