#ifndef LOWLIGHT_IMAGE_IO_HPP
#define LOWLIGHT_IMAGE_IO_HPP

// 8-bit PNG I/O through libpng. Requires linking against libpng.

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "lowlight/isp.hpp"

namespace lowlight {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline unsigned char to_u8(double v) {
  const double c = std::min(1.0, std::max(0.0, v));
  return static_cast<unsigned char>(std::lrint(c * 255.0));
}

inline void write_png_rows(const std::string& path, std::size_t w, std::size_t h, int color_type,
                           const std::vector<unsigned char>& pixels, std::size_t channels) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng error writing '" + path + "'");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < h; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels.data() + y * w * channels));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace detail

/// Writes a 3 x H x W tensor in [0, 1] as 8-bit RGB (values clamped, rounded).
inline void write_png_rgb(const std::string& path, const Tensor& img) {
  require_image3(img, "write_png_rgb");
  const std::size_t h = img.dim(1), w = img.dim(2);
  std::vector<unsigned char> px(h * w * 3);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) px[(y * w + x) * 3 + c] = detail::to_u8(img(c, y, x));
  detail::write_png_rows(path, w, h, PNG_COLOR_TYPE_RGB, px, 3);
}

/// Writes an H x W tensor as 8-bit grayscale after dividing by `scale`.
inline void write_png_gray(const std::string& path, const Tensor& img, double scale = 1.0) {
  require_rank(img, 2, "write_png_gray");
  const std::size_t h = img.dim(0), w = img.dim(1);
  std::vector<unsigned char> px(h * w);
  for (std::size_t i = 0; i < h * w; ++i) px[i] = detail::to_u8(scale > 0.0 ? img[i] / scale : 0.0);
  detail::write_png_rows(path, w, h, PNG_COLOR_TYPE_GRAY, px, 1);
}

/// Reads any PNG as 8-bit RGB, returning a 3 x H x W sRGB image in [0, 1].
inline SrgbImage read_png_rgb(const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read PNG '" + path + "': " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG '" + path + "': " + msg);
  }
  const std::size_t h = image.height, w = image.width;
  SrgbImage out{Tensor(Shape{3, h, w}), 8};
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) out.pixels(c, y, x) = buf[(y * w + x) * 3 + c] / 255.0;
  return out;
}

}  // namespace lowlight

#endif  // LOWLIGHT_IMAGE_IO_HPP
