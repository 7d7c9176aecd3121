// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "emtnet/tensor.hpp"

namespace emtnet {

/// Malformed or truncated weight file.
class WeightFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A store does not fit the network it is loaded into.
class WeightMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WeightEntry {
  std::string name;
  Tensor value;

  friend bool operator==(const WeightEntry&, const WeightEntry&) = default;
};

/// Named parameter tensors in a fixed order, plus free-form metadata
/// (the network variant and width travel with every checkpoint).
struct WeightStore {
  std::map<std::string, std::string> metadata;
  std::vector<WeightEntry> entries;

  const Tensor* find(const std::string& name) const;
  std::size_t blob_bytes() const;

  friend bool operator==(const WeightStore&, const WeightStore&) = default;
};

// On-disk layout: a UTF-8 manifest
//
//   EMTNET-WEIGHTS 1
//   meta <key> <value>
//   param <name> f32 <d0>x<d1>x... <byte offset>
//   blob <total bytes>
//
// followed immediately by the raw blob: little-endian IEEE-754 binary32
// values of every parameter, in manifest order.
void write_weights(const WeightStore& store, std::ostream& out);
void save_weights(const WeightStore& store, const std::filesystem::path& path);
WeightStore load_weights(const std::filesystem::path& path);

}  // namespace emtnet
