#pragma once

#include <string>

#include "reid/types.hpp"

namespace reid {

// CLI-boundary image adapter. The core works on raw pixel grids; this reads
// binary PPM (P6) and uncompressed 24/32-bit BMP, which covers the synthetic
// fixtures and the VIPeR bitmaps. Other formats must be converted first.
PersonImage read_image(const std::string& path);

// 8-bit binary PPM with rounding; used for fixtures and montages.
void write_ppm(const PersonImage& image, const std::string& path);

}  // namespace reid
