// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#include "emtnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace emtnet {

namespace {

double uniform01(std::mt19937_64& engine) { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& engine, double lo, double hi) { return lo + (hi - lo) * uniform01(engine); }

std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Fisher-Yates with an explicit draw so the permutation does not depend on
/// the standard library's distribution implementation.
void shuffle(std::vector<std::size_t>& v, std::mt19937_64& engine) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform01(engine) * static_cast<double>(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

GrayImage pad_image(const GrayImage& img, std::size_t side) {
  GrayImage out(side, side, 0);
  const std::size_t top = (side - img.height) / 2;
  const std::size_t left = (side - img.width) / 2;
  for (std::size_t y = 0; y < img.height; ++y) {
    std::copy_n(img.pixels.begin() + static_cast<std::ptrdiff_t>(y * img.width), img.width,
                out.pixels.begin() + static_cast<std::ptrdiff_t>((y + top) * side + left));
  }
  return out;
}

GrayImage resize_bilinear(const GrayImage& img, std::size_t size) {
  GrayImage out(size, size);
  const double scale = static_cast<double>(img.width) / static_cast<double>(size);
  const auto axis = [&](std::size_t d, std::size_t& i0, std::size_t& i1, double& frac) {
    const double src = std::clamp((static_cast<double>(d) + 0.5) * scale - 0.5, 0.0,
                                  static_cast<double>(img.width - 1));
    i0 = static_cast<std::size_t>(src);
    i1 = std::min(i0 + 1, img.width - 1);
    frac = src - static_cast<double>(i0);
  };
  for (std::size_t y = 0; y < size; ++y) {
    std::size_t y0, y1;
    double fy;
    axis(y, y0, y1, fy);
    for (std::size_t x = 0; x < size; ++x) {
      std::size_t x0, x1;
      double fx;
      axis(x, x0, x1, fx);
      const double top = img.at(y0, x0) * (1.0 - fx) + img.at(y0, x1) * fx;
      const double bottom = img.at(y1, x0) * (1.0 - fx) + img.at(y1, x1) * fx;
      out.at(y, x) = static_cast<std::uint8_t>(std::lround(top * (1.0 - fy) + bottom * fy));
    }
  }
  return out;
}

GrayImage resize_nearest(const GrayImage& img, std::size_t size) {
  GrayImage out(size, size);
  const double scale = static_cast<double>(img.width) / static_cast<double>(size);
  for (std::size_t y = 0; y < size; ++y) {
    const std::size_t sy = std::min(static_cast<std::size_t>((static_cast<double>(y) + 0.5) * scale), img.height - 1);
    for (std::size_t x = 0; x < size; ++x) {
      const std::size_t sx = std::min(static_cast<std::size_t>((static_cast<double>(x) + 0.5) * scale), img.width - 1);
      out.at(y, x) = img.at(sy, sx);
    }
  }
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r\"");
    const auto e = field.find_last_not_of(" \t\r\"");
    fields.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

Sample pad_to_square(const Sample& sample) {
  const std::size_t side = std::max(sample.image.width, sample.image.height);
  if (sample.image.width == sample.image.height) return sample;
  return {pad_image(sample.image, side), pad_image(sample.mask, side), sample.label};
}

Sample resize_to(const Sample& sample, std::size_t size) {
  if (sample.image.width != sample.image.height || sample.mask.width != sample.mask.height) {
    throw ShapeError("resize_to: input is " + std::to_string(sample.image.height) + "x" +
                     std::to_string(sample.image.width) + ", pad to square first");
  }
  if (size == 0) throw ShapeError("resize_to: target size must be positive");
  if (sample.image.width == size) return sample;
  return {resize_bilinear(sample.image, size), resize_nearest(sample.mask, size), sample.label};
}

Tensor normalize(const GrayImage& image) {
  Tensor out({1, image.height, image.width});
  for (std::size_t i = 0; i < image.pixels.size(); ++i) out[i] = static_cast<float>(image.pixels[i] / 255.0);
  return out;
}

PreparedSample prepare(const Sample& sample, std::size_t size) {
  const Sample s = resize_to(pad_to_square(sample), size);
  const Tensor gray = normalize(s.image);
  PreparedSample out{Tensor({3, size, size}), std::vector<double>(size * size), s.label};
  const std::size_t plane = size * size;
  for (std::size_t c = 0; c < 3; ++c) std::copy_n(gray.data(), plane, out.image.data() + c * plane);
  for (std::size_t i = 0; i < plane; ++i) out.mask[i] = s.mask.pixels[i] != 0 ? 1.0 : 0.0;
  return out;
}

SplitSpec SplitSpec::kfold(std::size_t k, std::uint64_t seed) {
  SplitSpec s;
  s.kind = Kind::kfold;
  s.k = k;
  s.train_pct = 100.0 * static_cast<double>(k - 1) / static_cast<double>(k);
  s.val_pct = s.test_pct = (100.0 - s.train_pct) / 2.0;
  s.seed = seed;
  return s;
}

SplitSpec SplitSpec::holdout(double train_pct, double val_pct, double test_pct, std::uint64_t seed) {
  SplitSpec s;
  s.kind = Kind::holdout;
  s.train_pct = train_pct;
  s.val_pct = val_pct;
  s.test_pct = test_pct;
  s.seed = seed;
  return s;
}

void SplitSpec::validate() const {
  if (kind == Kind::kfold) {
    if (k < 2) throw std::invalid_argument("kfold needs K >= 2, got " + std::to_string(k));
    return;
  }
  if (train_pct < 0 || val_pct < 0 || test_pct < 0 || std::abs(train_pct + val_pct + test_pct - 100.0) > 1e-9) {
    throw std::invalid_argument("holdout percentages must be non-negative and sum to 100");
  }
}

std::vector<Fold> split(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  if (n == 0) throw std::invalid_argument("split: empty dataset");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 engine(spec.seed);
  shuffle(order, engine);

  const auto take = [&](std::size_t from, std::size_t to) {
    return std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(from),
                                    order.begin() + static_cast<std::ptrdiff_t>(to));
  };
  if (spec.kind == SplitSpec::Kind::holdout) {
    const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.train_pct / 100.0));
    const auto n_val = std::min(
        n - n_train, static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.val_pct / 100.0)));
    return {Fold{take(0, n_train), take(n_train, n_train + n_val), take(n_train + n_val, n)}};
  }
  if (spec.k > n) {
    throw std::invalid_argument("split: K = " + std::to_string(spec.k) + " exceeds " + std::to_string(n) +
                                " samples");
  }
  std::vector<std::size_t> bounds(spec.k + 1, 0);
  for (std::size_t f = 0; f < spec.k; ++f) bounds[f + 1] = bounds[f] + n / spec.k + (f < n % spec.k ? 1 : 0);
  std::vector<Fold> folds(spec.k);
  for (std::size_t f = 0; f < spec.k; ++f) {
    const std::size_t mid = bounds[f] + (bounds[f + 1] - bounds[f]) / 2;
    folds[f].val = take(bounds[f], mid);
    folds[f].test = take(mid, bounds[f + 1]);
    for (std::size_t g = 0; g < spec.k; ++g) {
      if (g == f) continue;
      const auto part = take(bounds[g], bounds[g + 1]);
      folds[f].train.insert(folds[f].train.end(), part.begin(), part.end());
    }
  }
  return folds;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest '" + path.string() + "'");
  DatasetManifest m;
  m.directory = path.parent_path();
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string key = "# provenance:";
      if (line.rfind(key, 0) == 0) {
        const auto v = line.substr(key.size());
        m.provenance = v.substr(std::min(v.find_first_not_of(' '), v.size()));
      }
      continue;
    }
    const auto fields = split_csv(line);
    if (!header_seen) {
      if (fields != std::vector<std::string>{"image", "mask", "label"}) {
        throw ManifestError(path.string() + ":" + std::to_string(line_no) + ": expected header 'image,mask,label'");
      }
      header_seen = true;
      continue;
    }
    const std::string where = path.string() + ":" + std::to_string(line_no) + " (record " +
                              std::to_string(m.records.size() + 1) + ")";
    if (fields.size() != 3) throw ManifestError(where + ": expected 3 fields, got " + std::to_string(fields.size()));
    if (fields[2] != "0" && fields[2] != "1") {
      throw ManifestError(where + ": label '" + fields[2] + "' is not 0 or 1");
    }
    ManifestRecord rec{fields[0], fields[1], fields[2] == "1" ? 1 : 0};
    Sample s;
    s.label = rec.label;
    try {
      s.image = read_image(m.directory / rec.image);
      s.mask = read_image(m.directory / rec.mask);
    } catch (const ImageIoError& e) {
      throw ManifestError(where + ": " + e.what());
    }
    if (s.image.width != s.mask.width || s.image.height != s.mask.height) {
      throw ManifestError(where + ": mask '" + rec.mask.string() + "' is " + std::to_string(s.mask.width) + "x" +
                          std::to_string(s.mask.height) + " but image '" + rec.image.string() + "' is " +
                          std::to_string(s.image.width) + "x" + std::to_string(s.image.height));
    }
    for (auto& p : s.mask.pixels) p = p >= 128 ? 1 : 0;
    m.records.push_back(std::move(rec));
    m.samples.push_back(std::move(s));
  }
  if (!header_seen) throw ManifestError("manifest '" + path.string() + "' has no header");
  return m;
}

std::filesystem::path write_manifest(const DatasetManifest& manifest) {
  const auto path = manifest.directory / "manifest.csv";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ManifestError("cannot write '" + path.string() + "'");
  out << "# provenance: " << manifest.provenance << "\nimage,mask,label\n";
  for (const auto& r : manifest.records) out << r.image.generic_string() << ',' << r.mask.generic_string() << ',' << r.label << '\n';
  if (!out) throw ManifestError("failed writing '" + path.string() + "'");
  return path;
}

GrayImage mask_to_file(const GrayImage& mask) {
  GrayImage out = mask;
  for (auto& p : out.pixels) p = p != 0 ? 255 : 0;
  return out;
}

std::vector<Sample> synth_samples(const SynthOptions& options) {
  if (options.n < 2) throw std::invalid_argument("synth: need at least 2 samples");
  if (options.image_size < 16) throw std::invalid_argument("synth: image size must be at least 16");
  if (!(options.malignant_fraction >= 0.0 && options.malignant_fraction <= 1.0)) {
    throw std::invalid_argument("synth: malignant fraction must lie in [0, 1]");
  }
  const std::size_t n = options.n;
  const std::size_t S = options.image_size;
  const auto n_malignant =
      static_cast<std::size_t>(std::llround(options.malignant_fraction * static_cast<double>(n)));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 label_engine(sample_seed(options.seed, 0x1abe1ULL << 32));
  shuffle(order, label_engine);
  std::vector<int> labels(n, 0);
  for (std::size_t i = 0; i < n_malignant; ++i) labels[order[i]] = 1;

  const double size = static_cast<double>(S);
  std::vector<Sample> out(n);
  std::vector<double> noise(S * S), level(S * S);
  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(sample_seed(options.seed, i));
    const bool malignant = labels[i] == 1;

    const double cx = uniform(rng, 0.3, 0.7) * size;
    const double cy = uniform(rng, 0.3, 0.7) * size;
    const double a = uniform(rng, 0.18, 0.25) * size;
    const double b = a * uniform(rng, 0.7, 0.95);
    const double theta = uniform(rng, 0.0, std::numbers::pi);
    const double background = uniform(rng, 135.0, 150.0);
    const double tumor = background * (malignant ? uniform(rng, 0.6, 0.7) : uniform(rng, 0.08, 0.16));
    const double halo = malignant ? uniform(rng, 0.35, 0.5) : 0.0;  // echogenic rim, relative brightening
    const int k1 = 5 + static_cast<int>(uniform01(rng) * 5.0);
    const int k2 = 11 + static_cast<int>(uniform01(rng) * 7.0);
    const double amp1 = uniform(rng, 0.13, 0.20), amp2 = uniform(rng, 0.05, 0.08);
    const double ph1 = uniform(rng, 0.0, 2.0 * std::numbers::pi), ph2 = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double ct = std::cos(theta), st = std::sin(theta);

    Sample& s = out[i];
    s.label = labels[i];
    s.image = GrayImage(S, S);
    s.mask = GrayImage(S, S);
    for (std::size_t y = 0; y < S; ++y) {
      for (std::size_t x = 0; x < S; ++x) {
        const double dx = static_cast<double>(x) + 0.5 - cx;
        const double dy = static_cast<double>(y) + 0.5 - cy;
        const double u = (dx * ct + dy * st) / a;
        const double v = (-dx * st + dy * ct) / b;
        const double rho = std::hypot(u, v);
        double radius = 1.0;
        if (malignant) {
          const double phi = std::atan2(v, u);
          radius += amp1 * std::sin(k1 * phi + ph1) + amp2 * std::sin(k2 * phi + ph2);
        }
        const bool inside = rho <= radius;
        s.mask.at(y, x) = inside ? 1 : 0;
        // Depth attenuation: deeper rows are slightly darker.
        const double depth = 1.0 - 0.1 * static_cast<double>(y) / size;
        double tone = inside ? tumor : background;
        if (!inside && rho <= radius * 1.3) tone *= 1.0 + halo;
        level[y * S + x] = tone * depth;
        noise[y * S + x] = -std::log1p(-uniform01(rng));  // exponential speckle intensity
      }
    }
    for (std::size_t y = 0; y < S; ++y) {
      for (std::size_t x = 0; x < S; ++x) {
        double sum = 0.0;
        int count = 0;
        for (std::size_t yy = y > 0 ? y - 1 : 0; yy <= std::min(y + 1, S - 1); ++yy) {
          for (std::size_t xx = x > 0 ? x - 1 : 0; xx <= std::min(x + 1, S - 1); ++xx) {
            sum += noise[yy * S + xx];
            ++count;
          }
        }
        const double speckle = 0.9 + 0.1 * sum / count;
        s.image.at(y, x) = static_cast<std::uint8_t>(std::clamp(std::lround(level[y * S + x] * speckle), 0L, 255L));
      }
    }
  }
  return out;
}

DatasetManifest synth_generate(const SynthOptions& options, const std::filesystem::path& out_dir) {
  auto samples = synth_samples(options);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  std::filesystem::create_directories(out_dir / "masks", ec);
  if (ec) throw ManifestError("cannot create '" + out_dir.string() + "': " + ec.message());
  DatasetManifest m;
  m.provenance = "synthetic";
  m.directory = out_dir;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%05zu.png", i);
    ManifestRecord rec{std::filesystem::path("images") / name, std::filesystem::path("masks") / name,
                       samples[i].label};
    write_png(samples[i].image, out_dir / rec.image);
    write_png(mask_to_file(samples[i].mask), out_dir / rec.mask);
    m.records.push_back(std::move(rec));
  }
  m.samples = std::move(samples);
  write_manifest(m);
  return m;
}

}  // namespace emtnet
