#pragma once

#include <cstdint>
#include <string>

#include "thermodepth/common.hpp"

namespace thermodepth {

// Grayscale and RGB PNG files. Sample values are written and read verbatim
// (no gamma handling), so 16-bit round trips are exact.

void write_png16(const std::string& path, const Grid<std::uint16_t>& image);
Grid<std::uint16_t> read_png16(const std::string& path);

void write_png8(const std::string& path, const Image8& image);
/// Reads an 8- or 16-bit grayscale file; 16-bit samples are scaled to 8 bits.
Image8 read_png8(const std::string& path);

void write_png_rgb(const std::string& path, const ImageRgb& image);

}  // namespace thermodepth
