// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "emtnet/image.hpp"
#include "emtnet/tensor.hpp"

namespace emtnet {

/// A grayscale image, its binary tumor mask (0/1) and the class label
/// (0 benign, 1 malignant).
struct Sample {
  GrayImage image;
  GrayImage mask;
  int label = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Zero-pads the shorter axis so the sample becomes max(H, W) square. The
/// odd leftover pixel goes to the bottom/right.
Sample pad_to_square(const Sample& sample);

/// Bilinear (half-pixel centers) for the image, nearest neighbour for the
/// mask. Throws ShapeError on non-square input.
Sample resize_to(const Sample& sample, std::size_t size = 224);

/// 1 x H x W tensor with values / 255.
Tensor normalize(const GrayImage& image);

/// Network-ready sample: 3 x S x S image (gray replicated), S x S mask.
struct PreparedSample {
  Tensor image;
  std::vector<double> mask;
  int label = 0;
};

/// pad_to_square -> resize_to -> normalize -> replicate to 3 channels.
PreparedSample prepare(const Sample& sample, std::size_t size);

// ---------------------------------------------------------------- splitting

struct SplitSpec {
  enum class Kind { kfold, holdout };

  Kind kind = Kind::kfold;
  std::size_t k = 4;
  double train_pct = 70.0, val_pct = 15.0, test_pct = 15.0;
  std::uint64_t seed = 42;

  static SplitSpec kfold(std::size_t k, std::uint64_t seed = 42);
  static SplitSpec holdout(double train_pct = 70.0, double val_pct = 15.0, double test_pct = 15.0,
                           std::uint64_t seed = 42);
  void validate() const;
};

/// Sample indices for one train/val/test assignment.
struct Fold {
  std::vector<std::size_t> train, val, test;

  friend bool operator==(const Fold&, const Fold&) = default;
};

/// Seeded shuffle then partition. kfold(K) yields K folds; in fold f the
/// f-th block is held out and split in half, first half validation and the
/// rest test. holdout yields a single fold. Throws when K > n or n == 0.
std::vector<Fold> split(std::size_t n, const SplitSpec& spec);

// ----------------------------------------------------------------- manifest

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ManifestRecord {
  std::filesystem::path image;  // relative to the manifest directory
  std::filesystem::path mask;
  int label = 0;
};

struct DatasetManifest {
  std::string provenance = "clinical";
  std::filesystem::path directory;
  std::vector<ManifestRecord> records;
  std::vector<Sample> samples;  // loaded, parallel to records

  std::size_t size() const { return samples.size(); }
};

/// Parses `image,mask,label` CSV (optional `# provenance: <tag>` line) and
/// loads every record. Errors name the record number and the offending path.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Writes manifest.csv into manifest.directory.
std::filesystem::path write_manifest(const DatasetManifest& manifest);

/// Masks are stored as 0/255; values >= 128 count as tumor on load.
GrayImage mask_to_file(const GrayImage& mask);

// ---------------------------------------------------------------- synthetic

struct SynthOptions {
  std::size_t n = 256;
  std::uint64_t seed = 42;
  std::size_t image_size = 224;
  double malignant_fraction = 0.4;
};

/// In-memory ultrasound-like samples: speckled background with one darker
/// tumor. Benign tumors are smooth, near-anechoic ellipses; malignant ones have
/// a lobulated boundary, weaker contrast and an echogenic rim. Exactly
/// round(fraction * n) are malignant.
std::vector<Sample> synth_samples(const SynthOptions& options);

/// synth_samples written as PNGs plus manifest.csv under `out_dir`.
DatasetManifest synth_generate(const SynthOptions& options, const std::filesystem::path& out_dir);

}  // namespace emtnet
