#include "c2f/io/png.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

#include "c2f/errors.hpp"

namespace c2f::io {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open(const std::filesystem::path& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

// libpng reports through longjmp; the message is stashed for the throw.
struct ErrorSink {
  std::string message;
};

void on_error(png_structp png, png_const_charp msg) {
  auto* sink = static_cast<ErrorSink*>(png_get_error_ptr(png));
  if (sink) sink->message = msg;
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

}  // namespace

Image8 read_png(const std::filesystem::path& path) {
  File file = open(path, "rb");
  png_byte signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw IoError(path.string() + " is not a PNG file");
  }
  ErrorSink sink;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, on_error, on_warning);
  if (!png) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialisation failed");
  }

  Image8 image;
  std::string unsupported;
  // Declared before setjmp: objects created after it are not unwound.
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path.string() + ": " + sink.message);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  const int interlace = png_get_interlace_type(png, info);
  if (depth != 8) {
    unsupported = "bit depth " + std::to_string(depth);
  } else if (interlace != PNG_INTERLACE_NONE) {
    unsupported = "interlaced image";
  } else if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_RGB) {
    unsupported = "color type " + std::to_string(color);
  }
  if (!unsupported.empty()) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw UnsupportedFormatError(path.string() + ": unsupported PNG (" + unsupported +
                                 "); expected non-interlaced 8-bit gray or RGB");
  }

  image.width = png_get_image_width(png, info);
  image.height = png_get_image_height(png, info);
  image.channels = color == PNG_COLOR_TYPE_RGB ? 3 : 1;
  image.pixels.assign(image.width * image.height * image.channels, 0);
  rows.resize(image.height);
  for (std::size_t y = 0; y < image.height; ++y) {
    rows[y] = image.pixels.data() + y * image.width * image.channels;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void write_png(const std::filesystem::path& path, const Image8& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw ContractError("write_png supports 1 or 3 channels, got " +
                        std::to_string(image.channels));
  }
  if (image.width == 0 || image.height == 0 ||
      image.pixels.size() != image.width * image.height * image.channels) {
    throw DimensionError("write_png: pixel buffer does not match image size");
  }
  File file = open(path, "wb");
  ErrorSink sink;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink, on_error, on_warning);
  if (!png) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialisation failed");
  }
  std::vector<png_bytep> rows(image.height);
  for (std::size_t y = 0; y < image.height; ++y) {
    rows[y] = const_cast<png_bytep>(image.pixels.data() + y * image.width * image.channels);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path.string() + ": " + sink.message);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw IoError("write failed: " + path.string());
}

}  // namespace c2f::io
