#pragma once

#include <string>

#include "fdfl/freq.hpp"

namespace fdfl::io {

// Reads an 8-bit PNG or JPEG (sniffed by magic bytes) into [0,255] doubles.
freq::ImageRGB load_image(const std::string& path);

void save_png(const std::string& path, const freq::ImageRGB& img);
void save_jpeg(const std::string& path, const freq::ImageRGB& img, int quality);

// Bilinear resize used by the ingestion layer to standardize dims to
// multiples of 8. Preprocessing itself rejects non-multiple-of-8 input.
freq::ImageRGB resize_bilinear(const freq::ImageRGB& img, int out_h, int out_w);

}  // namespace fdfl::io
