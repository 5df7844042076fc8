#include "thermodepth/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace thermodepth {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw Error(mode[0] == 'r' ? Errc::kMissingFile : Errc::kIo, "cannot open " + path);
  }
  return f;
}

// libpng reports errors by longjmp to the buffer armed with setjmp below;
// nothing with a destructor is created between setjmp and the libpng calls.
void on_warning(png_structp, png_const_charp) {}

void write(const std::string& path, int width, int height, int bit_depth, int color_type,
           const std::vector<png_bytep>& rows) {
  FilePtr f = open(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, on_warning);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(Errc::kIo, "png: failed to write " + path);
  }
  {
    png_init_io(png, f.get());
    png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    // PNG stores 16-bit samples big-endian.
    if (bit_depth == 16) png_set_swap(png);
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
  }
  png_destroy_write_struct(&png, &info);
}

struct Decoded {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  std::vector<std::uint16_t> samples;  // grayscale
};

Decoded read_gray(const std::string& path) {
  FilePtr f = open(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw Error(Errc::kMalformedData, path + " is not a PNG file");
  }
  Decoded d;
  std::vector<png_byte> buf;
  std::vector<png_bytep> rows;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, on_warning);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(Errc::kMalformedData, "png: corrupt file " + path);
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  d.width = static_cast<int>(png_get_image_width(png, info));
  d.height = static_cast<int>(png_get_image_height(png, info));
  d.bit_depth = png_get_bit_depth(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(Errc::kMalformedData, path + " is not a grayscale PNG");
  }
  if (d.bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (d.bit_depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  buf.resize(stride * d.height);
  rows.resize(d.height);
  for (int y = 0; y < d.height; ++y) rows[y] = buf.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (d.bit_depth < 8) d.bit_depth = 8;
  d.samples.resize(static_cast<std::size_t>(d.width) * d.height);
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      std::uint16_t v;
      if (d.bit_depth == 16) {
        std::memcpy(&v, rows[y] + 2 * x, 2);
      } else {
        v = rows[y][x];
      }
      d.samples[static_cast<std::size_t>(y) * d.width + x] = v;
    }
  }
  return d;
}

}  // namespace

void write_png16(const std::string& path, const Grid<std::uint16_t>& image) {
  std::vector<png_bytep> rows(image.height);
  for (int y = 0; y < image.height; ++y) {
    rows[y] = reinterpret_cast<png_bytep>(const_cast<std::uint16_t*>(image.data.data() + y * image.width));
  }
  write(path, image.width, image.height, 16, PNG_COLOR_TYPE_GRAY, rows);
}

Grid<std::uint16_t> read_png16(const std::string& path) {
  Decoded d = read_gray(path);
  if (d.bit_depth != 16) throw Error(Errc::kMalformedData, path + " is not a 16-bit PNG");
  Grid<std::uint16_t> g(d.width, d.height);
  g.data = std::move(d.samples);
  return g;
}

void write_png8(const std::string& path, const Image8& image) {
  std::vector<png_bytep> rows(image.height);
  for (int y = 0; y < image.height; ++y) rows[y] = const_cast<png_bytep>(image.data.data() + y * image.width);
  write(path, image.width, image.height, 8, PNG_COLOR_TYPE_GRAY, rows);
}

Image8 read_png8(const std::string& path) {
  Decoded d = read_gray(path);
  Image8 g(d.width, d.height);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.data[i] = static_cast<std::uint8_t>(d.bit_depth == 16 ? d.samples[i] >> 8 : d.samples[i]);
  }
  return g;
}

void write_png_rgb(const std::string& path, const ImageRgb& image) {
  static_assert(sizeof(Rgb8) == 3);
  std::vector<png_bytep> rows(image.height);
  for (int y = 0; y < image.height; ++y) {
    rows[y] = reinterpret_cast<png_bytep>(const_cast<Rgb8*>(image.data.data() + y * image.width));
  }
  write(path, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, rows);
}

}  // namespace thermodepth
