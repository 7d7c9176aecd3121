// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "emtnet/data.hpp"
#include "emtnet/image.hpp"

using namespace emtnet;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("emtnet_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Sample rect_sample(std::size_t w, std::size_t h, std::size_t x0, std::size_t y0, std::size_t rw, std::size_t rh) {
  Sample s{GrayImage(w, h, 90), GrayImage(w, h), 1};
  for (std::size_t y = y0; y < y0 + rh; ++y)
    for (std::size_t x = x0; x < x0 + rw; ++x) {
      s.mask.at(y, x) = 1;
      s.image.at(y, x) = 20;
    }
  return s;
}

struct Box {
  std::size_t x0 = SIZE_MAX, y0 = SIZE_MAX, x1 = 0, y1 = 0;
};

Box bounding_box(const GrayImage& mask) {
  Box b;
  for (std::size_t y = 0; y < mask.height; ++y)
    for (std::size_t x = 0; x < mask.width; ++x)
      if (mask.at(y, x)) {
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x);
        b.y1 = std::max(b.y1, y);
      }
  return b;
}

std::size_t count_on(const GrayImage& mask) {
  return static_cast<std::size_t>(std::count_if(mask.pixels.begin(), mask.pixels.end(), [](auto v) { return v != 0; }));
}

void write_fixture(const fs::path& dir, const std::string& manifest_body) {
  write_png(GrayImage(8, 8, 100), dir / "a.png");
  GrayImage mask(8, 8);
  mask.at(3, 3) = 255;
  write_png(mask, dir / "a_mask.png");
  write_pgm(GrayImage(8, 6, 50), dir / "b.pgm");
  write_pgm(GrayImage(8, 6), dir / "b_mask.pgm");
  write_png(GrayImage(5, 5), dir / "small_mask.png");
  std::ofstream(dir / "manifest.csv") << manifest_body;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("padding centers the shorter axis") {
    Sample s = rect_sample(60, 100, 10, 30, 5, 7);
    const Sample p = pad_to_square(s);
    CHECK(p.image.width == 100);
    CHECK(p.image.height == 100);
    for (std::size_t y = 0; y < 100; ++y) {
      for (std::size_t x = 0; x < 20; ++x) REQUIRE(p.image.at(y, x) == 0);
      for (std::size_t x = 80; x < 100; ++x) REQUIRE(p.image.at(y, x) == 0);
    }
    CHECK(p.image.at(50, 20) == 90);
    CHECK(count_on(p.mask) == count_on(s.mask));
    CHECK(p.mask.at(30, 30) == 1);

    const Sample odd = pad_to_square(rect_sample(10, 7, 0, 0, 1, 1));
    CHECK(odd.image.height == 10);
    CHECK(odd.image.at(0, 5) == 0);  // one band row on top
    CHECK(odd.image.at(1, 5) == 90);
    CHECK(odd.image.at(8, 5) == 0);  // two on the bottom
    CHECK(odd.image.at(9, 5) == 0);

    const Sample sq = rect_sample(9, 9, 1, 1, 2, 2);
    CHECK(pad_to_square(sq) == sq);
  }

  TEST_CASE("resize") {
    const Sample id = rect_sample(224, 224, 50, 60, 30, 40);
    CHECK(resize_to(id, 224) == id);
    Sample flat{GrayImage(100, 100, 77), GrayImage(100, 100), 0};
    const Sample r = resize_to(flat, 224);
    for (auto v : r.image.pixels) REQUIRE(v == 77);
    CHECK_THROWS_AS(resize_to(rect_sample(10, 12, 0, 0, 1, 1), 8), ShapeError);

    Sample board{GrayImage(448, 448), GrayImage(448, 448), 0};
    for (std::size_t y = 0; y < 448; ++y)
      for (std::size_t x = 0; x < 448; ++x) board.mask.at(y, x) = ((x / 3 + y / 5) % 2) ? 1 : 0;
    for (auto v : resize_to(board, 224).mask.pixels) REQUIRE((v == 0 || v == 1));
  }

  TEST_CASE("pad then resize keeps the tumor aspect ratio") {
    const Sample s = rect_sample(300, 180, 40, 50, 90, 30);
    const Sample out = resize_to(pad_to_square(s), 224);
    const Box b = bounding_box(out.mask);
    const double scale = 224.0 / 300.0;
    CHECK(std::abs(static_cast<double>(b.x1 - b.x0 + 1) - 90 * scale) <= 2.0);
    CHECK(std::abs(static_cast<double>(b.y1 - b.y0 + 1) - 30 * scale) <= 2.0);
  }

  TEST_CASE("normalize") {
    GrayImage img(3, 1);
    img.pixels = {0, 255, 128};
    const Tensor t = normalize(img);
    CHECK(t.shape() == Shape{1, 1, 3});
    CHECK(t[0] == 0.0f);
    CHECK(t[1] == 1.0f);
    CHECK(t[2] == doctest::Approx(128.0 / 255.0));
    for (int v = 0; v < 256; ++v) {
      GrayImage one(1, 1, static_cast<std::uint8_t>(v));
      REQUIRE(std::abs(std::round(normalize(one)[0] * 255.0) - v) <= 255.0 / 510.0);
    }
    const PreparedSample p = prepare(rect_sample(40, 30, 5, 5, 4, 4), 64);
    CHECK(p.image.shape() == Shape{3, 64, 64});
    CHECK(p.mask.size() == 64 * 64);
    CHECK(p.image[100] == p.image[64 * 64 + 100]);
  }

  TEST_CASE("k-fold splits partition the samples") {
    const auto folds = split(8, SplitSpec::kfold(4));
    REQUIRE(folds.size() == 4);
    std::set<std::size_t> held;
    for (const auto& f : folds) {
      CHECK(f.val.size() + f.test.size() == 2);
      CHECK(f.train.size() == 6);
      std::set<std::size_t> all(f.train.begin(), f.train.end());
      all.insert(f.val.begin(), f.val.end());
      all.insert(f.test.begin(), f.test.end());
      CHECK(all.size() == 8);
      held.insert(f.val.begin(), f.val.end());
      held.insert(f.test.begin(), f.test.end());
    }
    CHECK(held.size() == 8);
    CHECK(split(8, SplitSpec::kfold(4)) == folds);
    CHECK(!(split(8, SplitSpec::kfold(4, 7)) == folds));
    CHECK_THROWS(split(3, SplitSpec::kfold(4)));
    CHECK_THROWS(split(0, SplitSpec::holdout()));
  }

  TEST_CASE("holdout sizes") {
    const auto f = split(100, SplitSpec::holdout()).front();
    CHECK(f.train.size() == 70);
    CHECK(f.val.size() == 15);
    CHECK(f.test.size() == 15);
    CHECK_THROWS_AS(SplitSpec::holdout(60, 15, 15).validate(), std::invalid_argument);
  }

  TEST_CASE("image readers") {
    const fs::path dir = fresh_dir("images");
    GrayImage img(5, 3);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(i * 17);
    write_png(img, dir / "x.png");
    write_pgm(img, dir / "x.pgm");
    CHECK(read_image(dir / "x.png") == img);
    CHECK(read_image(dir / "x.pgm") == img);
    std::ofstream(dir / "ascii.pgm") << "P2\n# comment\n2 1\n15\n0 15\n";
    const GrayImage a = read_image(dir / "ascii.pgm");
    CHECK(a.pixels == std::vector<std::uint8_t>{0, 255});
    std::ofstream(dir / "junk.png") << "hello";
    CHECK_THROWS_AS(read_image(dir / "junk.png"), ImageIoError);
    CHECK_THROWS_AS(read_image(dir / "missing.png"), ImageIoError);
    fs::remove_all(dir);
  }

  TEST_CASE("manifest loading") {
    const fs::path dir = fresh_dir("manifest");
    write_fixture(dir, "# provenance: synthetic\nimage,mask,label\na.png,a_mask.png,1\nb.pgm,b_mask.pgm,0\na.png,a_mask.png,0\n");
    const DatasetManifest m = load_manifest(dir / "manifest.csv");
    CHECK(m.size() == 3);
    CHECK(m.provenance == "synthetic");
    CHECK(m.samples[0].label == 1);
    CHECK(m.samples[0].mask.at(3, 3) == 1);
    CHECK(count_on(m.samples[1].mask) == 0);
    CHECK(m.samples[1].image.height == 6);
    fs::remove_all(dir);
  }

  TEST_CASE("manifest errors name the record") {
    const fs::path dir = fresh_dir("bad");
    write_fixture(dir, "image,mask,label\na.png,a_mask.png,1\nb.pgm,b_mask.pgm,2\n");
    try {
      load_manifest(dir / "manifest.csv");
      FAIL("expected ManifestError");
    } catch (const ManifestError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("record 2") != std::string::npos);
      CHECK(msg.find('2') != std::string::npos);
    }
    std::ofstream(dir / "manifest.csv", std::ios::trunc) << "image,mask,label\na.png,small_mask.png,1\n";
    try {
      load_manifest(dir / "manifest.csv");
      FAIL("expected ManifestError");
    } catch (const ManifestError& e) {
      CHECK(std::string(e.what()).find("small_mask.png") != std::string::npos);
    }
    std::ofstream(dir / "manifest.csv", std::ios::trunc) << "image,mask,label\nnope.png,a_mask.png,1\n";
    CHECK_THROWS_WITH_AS(load_manifest(dir / "manifest.csv"), doctest::Contains("nope.png"), ManifestError);
    CHECK_THROWS(load_manifest(dir / "absent.csv"));
    fs::remove_all(dir);
  }

  TEST_CASE("synthetic generation") {
    SynthOptions o;
    o.n = 40;
    o.image_size = 64;
    o.seed = 3;
    const auto a = synth_samples(o);
    CHECK(a == synth_samples(o));
    o.seed = 4;
    CHECK(!(a == synth_samples(o)));
    std::size_t malignant = 0;
    for (const auto& s : a) {
      CHECK(s.image.width == 64);
      CHECK(s.mask.height == 64);
      CHECK(count_on(s.mask) > 0);
      malignant += static_cast<std::size_t>(s.label);
    }
    CHECK(std::abs(static_cast<double>(malignant) - 0.4 * 40) <= 2.0);
    o.n = 1;
    CHECK_THROWS_AS(synth_samples(o), std::invalid_argument);
  }

  TEST_CASE("synthetic files round-trip through the manifest") {
    const fs::path dir = fresh_dir("synth");
    SynthOptions o;
    o.n = 6;
    o.image_size = 32;
    const DatasetManifest written = synth_generate(o, dir);
    const DatasetManifest back = load_manifest(dir / "manifest.csv");
    CHECK(back.provenance == "synthetic");
    REQUIRE(back.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(back.samples[i] == written.samples[i]);
    fs::remove_all(dir);
  }
}
