// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#include "emtnet/image.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <string>

namespace emtnet {

namespace {

GrayImage read_png(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw ImageIoError("cannot read PNG '" + path.string() + "': " + img.message);
  }
  img.format = PNG_FORMAT_GRAY;
  GrayImage out(img.width, img.height);
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw ImageIoError("cannot decode PNG '" + path.string() + "': " + msg);
  }
  return out;
}

std::size_t read_pgm_token(std::istream& in, const std::filesystem::path& path) {
  std::string token;
  while (in >> token) {
    if (token[0] == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    try {
      return std::stoul(token);
    } catch (const std::exception&) {
      break;
    }
  }
  throw ImageIoError("malformed PGM header in '" + path.string() + "'");
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  in >> magic;
  const std::size_t w = read_pgm_token(in, path);
  const std::size_t h = read_pgm_token(in, path);
  const std::size_t maxval = read_pgm_token(in, path);
  if (w == 0 || h == 0 || maxval == 0 || maxval > 255) {
    throw ImageIoError("unsupported PGM geometry or depth in '" + path.string() + "'");
  }
  GrayImage out(w, h);
  if (magic == "P5") {
    in.get();  // single whitespace after maxval
    in.read(reinterpret_cast<char*>(out.pixels.data()), static_cast<std::streamsize>(out.pixels.size()));
    if (static_cast<std::size_t>(in.gcount()) != out.pixels.size()) {
      throw ImageIoError("truncated PGM '" + path.string() + "'");
    }
  } else {
    for (auto& p : out.pixels) p = static_cast<std::uint8_t>(read_pgm_token(in, path));
  }
  if (maxval != 255) {
    for (auto& p : out.pixels) p = static_cast<std::uint8_t>((p * 255u + maxval / 2) / maxval);
  }
  return out;
}

}  // namespace

GrayImage read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open image '" + path.string() + "'");
  char sig[8] = {};
  in.read(sig, sizeof sig);
  in.close();
  if (png_sig_cmp(reinterpret_cast<png_const_bytep>(sig), 0, 8) == 0) return read_png(path);
  if (sig[0] == 'P' && (sig[1] == '5' || sig[1] == '2')) return read_pgm(path);
  throw ImageIoError("'" + path.string() + "' is neither PNG nor PGM");
}

void write_png(const GrayImage& image, const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw ImageIoError("cannot write PNG '" + path.string() + "': " + img.message);
  }
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageIoError("cannot open '" + path.string() + "' for writing");
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw ImageIoError("failed writing '" + path.string() + "'");
}

}  // namespace emtnet
