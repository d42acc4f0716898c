#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "generators.hpp"
#include "phagoq/ingest/dataset.hpp"
#include "phagoq/ingest/fidelity.hpp"
#include "phagoq/ingest/image_io.hpp"
#include "phagoq/ingest/scheduler.hpp"
#include "tempdir.hpp"

using namespace phagoq;
namespace fs = std::filesystem;

namespace {

// Straight per-window SSIM with two-pass moments.
double ssim_oracle(const Raster<float>& a, const Raster<float>& b) {
  const int k = 7;
  double total = 0;
  int count = 0;
  for (int y0 = 0; y0 + k <= a.height(); ++y0) {
    for (int x0 = 0; x0 + k <= a.width(); ++x0) {
      double ma = 0, mb = 0;
      for (int y = y0; y < y0 + k; ++y)
        for (int x = x0; x < x0 + k; ++x) {
          ma += a.at(x, y);
          mb += b.at(x, y);
        }
      ma /= k * k;
      mb /= k * k;
      double va = 0, vb = 0, cab = 0;
      for (int y = y0; y < y0 + k; ++y)
        for (int x = x0; x < x0 + k; ++x) {
          const double da = a.at(x, y) - ma;
          const double db = b.at(x, y) - mb;
          va += da * da;
          vb += db * db;
          cab += da * db;
        }
      va /= k * k - 1;
      vb /= k * k - 1;
      cab /= k * k - 1;
      const double c1 = 1e-4, c2 = 9e-4;
      total += (2 * ma * mb + c1) * (2 * cab + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / count;
}

Frame quantized_frame(int w, int h, std::uint64_t seed, double levels) {
  Frame f = testing::random_frame(w, h, seed);
  for (float& v : f.pixels()) v = static_cast<float>(std::round(v * levels) / levels);
  return f;
}

void write_scene(const fs::path& scene, int agg_frames, int cell_frames, std::uint64_t seed) {
  fs::create_directories(scene / "aggregates");
  fs::create_directories(scene / "cells");
  for (int t = 0; t < agg_frames; ++t) {
    char name[16];
    std::snprintf(name, sizeof name, "t%04d.tif", t);
    io::write_tiff(scene / "aggregates" / name, quantized_frame(8, 8, seed + t, 65535), io::SampleFormat::U16);
  }
  for (int t = 0; t < cell_frames; ++t) {
    char name[16];
    std::snprintf(name, sizeof name, "t%04d.tif", t);
    io::write_tiff(scene / "cells" / name, quantized_frame(8, 8, seed + 100 + t, 65535), io::SampleFormat::U16);
  }
}

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("TIFF round trips are pixel exact for every sample format") {
    testing::TempDir dir("io");
    const Frame f8 = quantized_frame(37, 23, 1, 255);
    const Frame f16 = quantized_frame(37, 23, 2, 65535);
    const Frame ff = testing::random_frame(37, 23, 3);
    for (auto comp : {io::Compression::None, io::Compression::Deflate}) {
      io::write_tiff(dir / "a.tif", f8, io::SampleFormat::U8, comp);
      io::write_tiff(dir / "b.tif", f16, io::SampleFormat::U16, comp);
      io::write_tiff(dir / "c.tif", ff, io::SampleFormat::F32, comp);
      const Frame r8 = io::read_frame(dir / "a.tif");
      const Frame r16 = io::read_frame(dir / "b.tif");
      const Frame rf = io::read_frame(dir / "c.tif");
      CHECK(static_cast<const Raster<float>&>(r8) == f8);
      CHECK(static_cast<const Raster<float>&>(r16) == f16);
      CHECK(static_cast<const Raster<float>&>(rf) == ff);
      CHECK(r8.bit_depth_origin == BitDepth::U8);
      CHECK(r16.bit_depth_origin == BitDepth::U16);
    }
  }

  TEST_CASE("16-bit samples scale by 65535") {
    testing::TempDir dir("io");
    Frame f(4, 1);
    f.at(0, 0) = 0.0f;
    f.at(1, 0) = 1.0f / 65535.0f;
    f.at(2, 0) = 32768.0f / 65535.0f;
    f.at(3, 0) = 1.0f;
    io::write_tiff(dir / "x.tif", f, io::SampleFormat::U16);
    const Frame r = io::read_frame(dir / "x.tif");
    CHECK(r.at(1, 0) == static_cast<float>(1.0 / 65535.0));
    CHECK(r.at(2, 0) == static_cast<float>(32768.0 / 65535.0));
    CHECK(r.at(3, 0) == 1.0f);
  }

  TEST_CASE("PNG round trip and label images") {
    testing::TempDir dir("io");
    const Frame f8 = quantized_frame(19, 11, 4, 255);
    io::write_png(dir / "a.png", f8);
    const Frame r = io::read_frame(dir / "a.png");
    CHECK(static_cast<const Raster<float>&>(r) == f8);
    CHECK(r.bit_depth_origin == BitDepth::U8);

    Raster<std::int32_t> labels(9, 7);
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 9; ++x) labels.at(x, y) = (x * 7 + y * 1000) % 40000;
    io::write_labels(dir / "l.tif", labels);
    CHECK(io::read_labels(dir / "l.tif") == labels);
    labels.at(0, 0) = 70000;
    CHECK_THROWS_AS(io::write_labels(dir / "m.tif", labels), InvalidArgument);
  }

  TEST_CASE("corrupt and missing files raise IoError") {
    testing::TempDir dir("io");
    {
      std::ofstream(dir / "bad.tif") << "definitely not a tiff";
    }
    CHECK_THROWS_AS(io::read_frame(dir / "bad.tif"), IoError);
    CHECK_THROWS_AS(io::read_frame(dir / "none.tif"), IoError);
    {
      std::ofstream out(dir / "bad.png", std::ios::binary);
      const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
      out.write(reinterpret_cast<const char*>(sig), 8);
      out << "truncated";
    }
    CHECK_THROWS_AS(io::read_frame(dir / "bad.png"), IoError);
  }

  TEST_CASE("scan_dataset") {
    testing::TempDir root("ds");
    SUBCASE("empty root") { CHECK(ingest::scan_dataset(root.path(), {"A", "B"}).empty()); }
    SUBCASE("two scenes with ten frames each") {
      write_scene(root / "A/s02", 10, 10, 7);
      write_scene(root / "A/s01", 10, 10, 9);
      const auto ms = ingest::scan_dataset(root.path(), {"A"});
      REQUIRE(ms.size() == 2);
      CHECK(ms[0].scene_id == "s01");
      CHECK(ms[1].scene_id == "s02");
      for (const auto& m : ms) {
        CHECK(m.valid);
        CHECK(m.frame_count == 10);
        CHECK(m.aggregates[3].filename() == "t0003.tif");
      }
    }
    SUBCASE("channel length mismatch") {
      write_scene(root / "A/s01", 10, 9, 1);
      const auto ms = ingest::scan_dataset(root.path(), {"A"});
      REQUIRE(ms.size() == 1);
      CHECK_FALSE(ms[0].valid);
      CHECK(ms[0].reason == "channel length mismatch");
    }
    SUBCASE("missing channel directory") {
      fs::create_directories(root / "A/s01/aggregates");
      const auto ms = ingest::scan_dataset(root.path(), {"A"});
      REQUIRE(ms.size() == 1);
      CHECK_FALSE(ms[0].valid);
      CHECK(ms[0].reason.find("cells") != std::string::npos);
    }
    SUBCASE("frames ordered numerically, not lexically") {
      write_scene(root / "A/s01", 0, 0, 1);
      for (int t : {0, 2, 10, 1}) {
        const std::string name = "t" + std::to_string(t) + ".tif";
        io::write_tiff(root / ("A/s01/aggregates/" + name), Frame(8, 8, t / 20.0f), io::SampleFormat::U16);
        io::write_tiff(root / ("A/s01/cells/" + name), Frame(8, 8), io::SampleFormat::U16);
      }
      const auto ms = ingest::scan_dataset(root.path(), {"A"});
      REQUIRE(ms.size() == 1);
      CHECK(ms[0].aggregates[2].filename() == "t2.tif");
      CHECK(ms[0].aggregates[3].filename() == "t10.tif");
    }
    CHECK_THROWS_AS(ingest::scan_dataset(root / "nope", {"A"}), IoError);
  }

  TEST_CASE("load_frame") {
    testing::TempDir root("ds");
    write_scene(root / "A/s01", 3, 3, 11);
    const auto m = ingest::scan_dataset(root.path(), {"A"}).at(0);
    const Frame f = ingest::load_frame(m, ingest::Channel::Aggregates, 1);
    CHECK(static_cast<const Raster<float>&>(f) == quantized_frame(8, 8, 12, 65535));
    CHECK(f.t_index == 1);
    CHECK(f.bit_depth_origin == BitDepth::U16);
    CHECK_THROWS_AS(ingest::load_frame(m, ingest::Channel::Cells, 3), InvalidArgument);
    CHECK_THROWS_AS(ingest::load_frame(m, ingest::Channel::Probability, 0), InvalidArgument);

    { std::ofstream(m.cells[2], std::ios::trunc) << "garbage"; }
    try {
      (void)ingest::load_frame(m, ingest::Channel::Cells, 2);
      FAIL("expected IoError");
    } catch (const IoError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("A/s01") != std::string::npos);
      CHECK(msg.find("cells") != std::string::npos);
      CHECK(msg.find("t=2") != std::string::npos);
    }
  }

  TEST_CASE("to_u8 rounding, idempotence and identity on 8-bit input") {
    const Frame half(5, 5, 0.5f);
    const Frame q = ingest::to_u8(half);
    for (float v : q.pixels()) CHECK(v == static_cast<float>(128.0 / 255.0));
    CHECK(q.bit_depth_origin == BitDepth::U8);

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Frame f = testing::random_frame(31, 17, seed);
      const Frame once = ingest::to_u8(f);
      const Frame twice = ingest::to_u8(once);
      CHECK(static_cast<const Raster<float>&>(once) == twice);
    }
    const Frame f8 = quantized_frame(20, 20, 5, 255);
    CHECK(static_cast<const Raster<float>&>(ingest::to_u8(f8)) == f8);
    CHECK(io::quantize_u8(0.5f / 255.0f) == 1);
    CHECK(io::quantize_u8(-0.2f) == 0);
    CHECK(io::quantize_u8(1.7f) == 255);
  }

  TEST_CASE("full 16-bit ramp converts with high fidelity") {
    Frame ramp(256, 256);
    for (int i = 0; i < 65536; ++i) ramp.pixels()[i] = static_cast<float>(i / 65535.0);
    const auto c = ingest::to_u8_checked(ramp);
    // Uniform quantization error: mse = (1/255)^2 / 12, psnr = 10 log10(12 * 255^2).
    const double expected_psnr = 10.0 * std::log10(12.0 * 255.0 * 255.0);
    CHECK(c.fidelity.psnr_db == doctest::Approx(expected_psnr).epsilon(1e-3));
    CHECK(c.fidelity.psnr_db > 55.0);
    CHECK(c.fidelity.ssim > 0.999);
  }

  TEST_CASE("assess_fidelity") {
    const Frame a = testing::random_frame(64, 64, 21);
    SUBCASE("identical images") {
      const auto r = ingest::assess_fidelity(a, a);
      CHECK(r.mse == 0.0);
      CHECK(r.perfect);
      CHECK(r.psnr_text() == "inf");
      CHECK(r.ssim == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("constant offset") {
      const Frame base = testing::random_frame(32, 32, 22, 0.1f, 0.8f);
      Frame b = base;
      for (float& v : b.pixels()) v += 0.1f;
      const auto r = ingest::assess_fidelity(base, b);
      CHECK(r.mse == doctest::Approx(0.01).epsilon(1e-5));
      CHECK(r.psnr_db == doctest::Approx(20.0).epsilon(1e-4));
      CHECK(r.psnr_text() == "20");
    }
    SUBCASE("matches a direct double loop") {
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Frame x = testing::random_frame(64, 64, 100 + seed);
        const Frame y = testing::random_frame(64, 64, 200 + seed);
        CHECK(std::abs(ingest::assess_fidelity(x, y).ssim - ssim_oracle(x, y)) < 1e-9);
        Frame z = x;
        for (float& v : z.pixels()) v = 0.7f * v + 0.1f;
        CHECK(std::abs(ingest::assess_fidelity(x, z).ssim - ssim_oracle(x, z)) < 1e-9);
      }
    }
    SUBCASE("shape errors") {
      CHECK_THROWS_AS(ingest::assess_fidelity(a, Frame(64, 63)), InvalidArgument);
      CHECK_THROWS_AS(ingest::assess_fidelity(Frame(6, 6), Frame(6, 6)), InvalidArgument);
    }
  }

  TEST_CASE("run_scenes ordering, determinism and isolation") {
    std::vector<ingest::SceneManifest> ms(20);
    for (int i = 0; i < 20; ++i) {
      ms[i].condition = "A";
      ms[i].scene_id = "s" + std::to_string(100 + i);
      ms[i].frame_count = static_cast<std::size_t>(i);
    }
    std::atomic<int> live{0};
    std::atomic<int> peak{0};
    std::function<double(const ingest::SceneManifest&)> work = [&](const ingest::SceneManifest& m) {
      const int now = ++live;
      int p = peak.load();
      while (now > p && !peak.compare_exchange_weak(p, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
      --live;
      if (m.frame_count == 3) throw IoError("scene 3 unreadable");
      return std::sqrt(static_cast<double>(m.frame_count));
    };
    const auto seq = ingest::run_scenes(ms, work, 1);
    const auto par = ingest::run_scenes(ms, work, 20);
    REQUIRE(par.size() == 20);
    int ok = 0;
    for (std::size_t i = 0; i < 20; ++i) {
      CHECK(par[i].scene_id == ms[i].scene_id);
      CHECK(par[i].status == seq[i].status);
      CHECK(par[i].value == seq[i].value);
      ok += par[i].status == ingest::SceneStatus::Ok;
    }
    CHECK(ok == 19);
    CHECK(par[3].status == ingest::SceneStatus::Failed);
    CHECK(par[3].error == "scene 3 unreadable");

    peak = 0;
    (void)ingest::run_scenes(ms, work, 3);
    CHECK(peak.load() <= 3);

    ms[5].valid = false;
    ms[5].reason = "channel length mismatch";
    const auto inv = ingest::run_scenes(ms, work, 2);
    CHECK(inv[5].status == ingest::SceneStatus::Failed);
    CHECK(inv[5].error.find("channel length mismatch") != std::string::npos);

    std::atomic<bool> stop{true};
    const auto stopped = ingest::run_scenes(ms, work, 4, &stop);
    for (const auto& r : stopped) CHECK(r.status == ingest::SceneStatus::Skipped);

    CHECK_THROWS_AS(ingest::run_scenes(ms, work, 0), InvalidArgument);
  }
}
