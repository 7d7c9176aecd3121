// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "emtnet/data.hpp"
#include "emtnet/weights.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "emtnet_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run run(const std::string& args) {
  const fs::path err = work_dir() / "stderr.txt";
  const std::string cmd = std::string("\"") + EMTNET_CLI + "\" " + args + " 2>\"" + err.string() + "\"";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

std::string path(const std::string& name) { return (work_dir() / name).string(); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("synth is deterministic") {
    const Run a = run("synth --n 64 --seed 7 --toy --out " + path("s7a"));
    REQUIRE(a.code == 0);
    CHECK(a.out.find("manifest.csv") != std::string::npos);
    const Run b = run("synth --n 64 --seed 7 --toy --out " + path("s7b"));
    REQUIRE(b.code == 0);
    const auto ma = emtnet::load_manifest(path("s7a") + "/manifest.csv");
    const auto mb = emtnet::load_manifest(path("s7b") + "/manifest.csv");
    CHECK(ma.size() == 64);
    CHECK(ma.samples == mb.samples);
    CHECK(ma.provenance == "synthetic");
  }

  TEST_CASE("usage errors exit 1") {
    CHECK(run("synth --n 1 --out " + path("bad")).code == 1);
    CHECK(run("train --epochs 0 --toy").code == 1);
    CHECK(run("train --wp 0.5 --toy").code == 1);
    CHECK(run("frobnicate").code == 1);
    CHECK(run("train --variant bogus").code == 1);
    CHECK(run("--help").code == 0);
  }

  TEST_CASE("runtime errors exit 2") {
    const Run r = run("infer --image " + path("missing.png") + " --weights " + path("missing.emtw"));
    CHECK(r.code == 2);
    CHECK(!r.err.empty());
    CHECK(run("eval --weights " + path("missing.emtw") + " --manifest " + path("missing.csv")).code == 2);
  }

  TEST_CASE("params reports the three variants") {
    const Run r = run("params");
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("variant,width,parameters", 0) == 0);
    CHECK(r.out.find("emt-net,full,5125538") != std::string::npos);
    CHECK(r.out.find("single-clf,full,3797569") != std::string::npos);
    CHECK(r.out.find("single-sgm,full,4534945") != std::string::npos);
  }

  TEST_CASE("w_clf on a single-task variant warns") {
    const Run r = run("train --variant single-sgm --wclf 2 --toy --manifest " + path("absent.csv"));
    CHECK(r.code == 2);
    CHECK(r.err.find("wclf") != std::string::npos);
  }

  TEST_CASE("train, eval and infer round-trip") {
    REQUIRE(run("synth --n 32 --seed 3 --toy --out " + path("data")).code == 0);
    const std::string manifest = path("data") + "/manifest.csv";
    const Run t = run("train --toy --epochs 2 --manifest " + manifest + " --out " + path("run"));
    REQUIRE(t.code == 0);
    CHECK(t.out.find("epoch") != std::string::npos);
    CHECK(fs::exists(path("run") + "/checkpoint.emtw"));
    CHECK(fs::exists(path("run") + "/run.csv"));
    CHECK(fs::exists(path("run") + "/report.txt"));
    CHECK(t.err.find("epoch") != std::string::npos);

    const std::string weights = path("run") + "/checkpoint.emtw";
    const Run e = run("eval --weights " + weights + " --manifest " + manifest + " --subset test");
    REQUIRE(e.code == 0);
    CHECK(e.out.find("acc=") != std::string::npos);
    CHECK(e.out.find("dsc=") != std::string::npos);
    CHECK(run("eval --weights " + weights + " --manifest " + manifest + " --subset test").out == e.out);

    const Run i = run("infer --weights " + weights + " --image " + path("data") + "/images/00000.png --out " + path("pred"));
    REQUIRE(i.code == 0);
    CHECK(i.out.find("class_prob=") != std::string::npos);
    CHECK(i.out.find("label=") != std::string::npos);
    CHECK(i.out.find("mask=") != std::string::npos);
    CHECK(fs::exists(path("pred") + ".png"));
    CHECK(fs::file_size(path("pred") + ".npy") > 64 * 64 * 4);
  }

  TEST_CASE("bench reports a positive latency") {
    const Run r = run("bench --toy --runs 20 --warmup 1");
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string header, row;
    std::getline(lines, header);
    CHECK(header == "variant,width,input,threads,warmup,runs,mean_ms,median_ms,min_ms");
    REQUIRE(std::getline(lines, row));
    std::vector<std::string> cells;
    std::istringstream cs(row);
    for (std::string c; std::getline(cs, c, ',');) cells.push_back(c);
    REQUIRE(cells.size() == 9);
    CHECK(std::stod(cells[6]) > 0.0);
    CHECK(std::stod(cells[7]) > 0.0);
  }
}
