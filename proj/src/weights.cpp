// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#include "emtnet/weights.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace emtnet {

namespace {

constexpr const char* kMagic = "EMTNET-WEIGHTS 1";

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
}

Shape parse_shape(const std::string& text, const std::string& name) {
  Shape shape;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(part, &used);
      if (used != part.size() || v == 0) throw std::invalid_argument(part);
      shape.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw WeightFormatError("bad shape '" + text + "' for parameter '" + name + "'");
    }
  }
  if (shape.empty()) throw WeightFormatError("empty shape for parameter '" + name + "'");
  return shape;
}

}  // namespace

const Tensor* WeightStore::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e.value;
  }
  return nullptr;
}

std::size_t WeightStore::blob_bytes() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.value.size() * sizeof(float);
  return n;
}

void write_weights(const WeightStore& store, std::ostream& out) {
  out << kMagic << '\n';
  for (const auto& [key, value] : store.metadata) {
    if (key.find_first_of(" \n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw std::invalid_argument("metadata key/value contains a separator: " + key);
    }
    out << "meta " << key << ' ' << value << '\n';
  }
  std::size_t offset = 0;
  for (const auto& e : store.entries) {
    std::string dims;
    for (std::size_t i = 0; i < e.value.rank(); ++i) dims += (i ? "x" : "") + std::to_string(e.value.dim(i));
    out << "param " << e.name << " f32 " << dims << ' ' << offset << '\n';
    offset += e.value.size() * sizeof(float);
  }
  out << "blob " << offset << '\n';
  for (const auto& e : store.entries) {
    for (float v : e.value.values()) {
      const std::uint32_t le = to_little_endian(std::bit_cast<std::uint32_t>(v));
      out.write(reinterpret_cast<const char*>(&le), sizeof le);
    }
  }
}

void save_weights(const WeightStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write_weights(store, out);
  out.flush();
  if (!out) throw std::runtime_error("failed writing weights to '" + path.string() + "'");
}

WeightStore load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WeightFormatError("cannot open weight file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw WeightFormatError("'" + path.string() + "' is not an EMT-Net weight file");
  }

  struct Record {
    std::string name;
    Shape shape;
    std::size_t offset;
  };
  WeightStore store;
  std::vector<Record> records;
  std::size_t blob = 0;
  bool have_blob = false;
  while (!have_blob && std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "meta") {
      std::string key, value;
      ls >> key;
      std::getline(ls >> std::ws, value);
      store.metadata[key] = value;
    } else if (tag == "param") {
      std::string name, dtype, dims;
      std::size_t offset = 0;
      if (!(ls >> name >> dtype >> dims >> offset)) throw WeightFormatError("malformed manifest line: " + line);
      if (dtype != "f32") throw WeightFormatError("unsupported dtype '" + dtype + "' for parameter '" + name + "'");
      records.push_back({name, parse_shape(dims, name), offset});
    } else if (tag == "blob") {
      if (!(ls >> blob)) throw WeightFormatError("malformed blob line: " + line);
      have_blob = true;
    } else {
      throw WeightFormatError("unknown manifest record: " + line);
    }
  }
  if (!have_blob) throw WeightFormatError("weight manifest in '" + path.string() + "' has no blob record");

  std::size_t expected = 0;
  for (const auto& r : records) {
    if (r.offset != expected) throw WeightFormatError("parameter '" + r.name + "' has inconsistent byte offset");
    expected += shape_numel(r.shape) * sizeof(float);
  }
  if (expected != blob) throw WeightFormatError("manifest sizes do not add up to the declared blob size");

  std::vector<char> bytes(blob);
  in.read(bytes.data(), static_cast<std::streamsize>(blob));
  if (static_cast<std::size_t>(in.gcount()) != blob) {
    throw WeightFormatError("weight blob truncated: expected " + std::to_string(blob) + " bytes, got " +
                            std::to_string(in.gcount()));
  }
  if (in.peek() != std::ifstream::traits_type::eof()) throw WeightFormatError("trailing bytes after weight blob");

  for (const auto& r : records) {
    std::vector<float> values(shape_numel(r.shape));
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::uint32_t le = 0;
      std::memcpy(&le, bytes.data() + r.offset + i * sizeof(float), sizeof le);
      values[i] = std::bit_cast<float>(to_little_endian(le));
    }
    store.entries.push_back({r.name, Tensor(r.shape, std::move(values))});
  }
  return store;
}

}  // namespace emtnet
