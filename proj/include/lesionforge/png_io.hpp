#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lesionforge/image.hpp"

namespace lesionforge {

// Minimal PNG codec (8-bit grayscale and RGB, non-interlaced), zlib-backed.
// The encoder always emits filter type 0 and zlib level 6 so that output
// bytes depend only on pixel content.

// round(v*255), clamped, per channel.
void write_png_rgb8(const std::filesystem::path& path, const Image& img);

// mask pixels become 0 or 255.
void write_png_gray8(const std::filesystem::path& path, const Mask& mask);

void write_png_rgb8_raw(const std::filesystem::path& path, int width, int height,
                        const std::vector<uint8_t>& rgb);

// Reads gray (expanded to gray levels /255 as mask>=128) or RGB PNGs.
Image read_png_rgb(const std::filesystem::path& path);
Mask read_png_mask(const std::filesystem::path& path);

std::vector<uint8_t> quantize_rgb8(const Image& img);

}  // namespace lesionforge
