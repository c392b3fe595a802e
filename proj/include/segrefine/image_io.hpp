#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "segrefine/raster.hpp"

namespace segrefine {

/// 3-channel RGB raster with values in [0, 1]. Throws IoError when unreadable.
Raster2D read_image(const std::filesystem::path& path);

/// 8-bit single-channel mask with values 0 or 255. Other values raise
/// DataFormatError; an unreadable file raises IoError.
BinaryMask read_mask(const std::filesystem::path& path);

/// Like read_mask, but accepts any 8-bit gray level and maps it to [0, 1].
ProbMask read_soft_mask(const std::filesystem::path& path);

void write_image(const std::filesystem::path& path, const Raster2D& rgb);
/// Writes 255 where value >= threshold, 0 elsewhere.
void write_mask(const std::filesystem::path& path, const ProbMask& mask, float threshold = 0.5f);
/// Writes round(255 * value) as an 8-bit gray image.
void write_confidence(const std::filesystem::path& path, const ProbMask& mask);
/// Image with the binarized mask tinted red on top.
void write_overlay(const std::filesystem::path& path, const Raster2D& rgb, const ProbMask& mask,
                   float threshold = 0.5f);

/// Indexed label map stored as an 8- or 16-bit single-channel image.
struct LabelImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint16_t> labels;
};
LabelImage read_label_image(const std::filesystem::path& path);
/// Writes 8-bit when every label fits, 16-bit otherwise.
void write_label_image(const std::filesystem::path& path, const LabelImage& labels);

}  // namespace segrefine
