// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace emtnet {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit single-channel image, row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), pixels(w * h, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Reads 8-bit PNG (any color type, converted to gray) or binary/ASCII PGM.
GrayImage read_image(const std::filesystem::path& path);

void write_png(const GrayImage& image, const std::filesystem::path& path);
void write_pgm(const GrayImage& image, const std::filesystem::path& path);

}  // namespace emtnet
