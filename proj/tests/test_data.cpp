// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <jpeglib.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "paanet/dataset.hpp"
#include "paanet/image_io.hpp"
#include "paanet/synth.hpp"
#include "test_util.hpp"

using namespace paanet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() /
             (tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& rel) const { return (path / rel).string(); }
};

ImageU8 random_image(int h, int w, int c, Rng& rng) {
  ImageU8 img;
  img.height = h;
  img.width = w;
  img.channels = c;
  img.pixels.resize(static_cast<std::size_t>(h) * w * c);
  for (auto& p : img.pixels)
    p = static_cast<std::uint8_t>(rng.uniform_int(256));
  return img;
}

void write_jpeg(const std::string& path, const ImageU8& img, int quality) {
  jpeg_compress_struct cinfo;
  jpeg_error_mgr jerr;
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_compress(&cinfo);
  FILE* f = std::fopen(path.c_str(), "wb");
  REQUIRE(f != nullptr);
  jpeg_stdio_dest(&cinfo, f);
  cinfo.image_width = static_cast<JDIMENSION>(img.width);
  cinfo.image_height = static_cast<JDIMENSION>(img.height);
  cinfo.input_components = img.channels;
  cinfo.in_color_space = img.channels == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  while (cinfo.next_scanline < cinfo.image_height) {
    const JSAMPLE* row = img.pixels.data() + cinfo.next_scanline * stride;
    JSAMPROW rows[1] = {const_cast<JSAMPROW>(row)};
    jpeg_write_scanlines(&cinfo, rows, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::fclose(f);
}

std::vector<char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
}

bool tensors_equal(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) return false;
  for (std::int64_t i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("png round trip is byte exact for gray and rgb") {
  TempDir dir("paanet_png");
  Rng rng(21);
  for (int c : {1, 3}) {
    ImageU8 img = random_image(13, 17, c, rng);
    const std::string path = dir.str("img" + std::to_string(c) + ".png");
    write_png(path, img);
    ImageU8 back = read_image(path);
    CHECK(back.height == img.height);
    CHECK(back.width == img.width);
    CHECK(back.channels == img.channels);
    CHECK(back.pixels == img.pixels);
  }
}

TEST_CASE("tensor to u8 and back stays within half a level") {
  Rng rng(22);
  Tensor t = paatest::random_tensor(Shape(1, 3, 6, 5), rng, 0.0, 1.0);
  Tensor back = image_to_tensor(tensor_to_rgb_u8(t));
  for (std::int64_t i = 0; i < t.numel(); ++i)
    CHECK(std::abs(back[i] - t[i]) <= 0.5 / 255.0 + 1e-12);

  // already-quantized values survive exactly
  Tensor q(Shape(1, 1, 4, 4));
  for (int i = 0; i < 16; ++i) q[i] = double(i * 17 % 256) / 255.0;
  CHECK(tensors_equal(image_to_tensor(tensor_to_gray_u8(q)), q));
}

TEST_CASE("jpeg decode recovers a flat image and survives resizing") {
  TempDir dir("paanet_jpeg");
  ImageU8 flat;
  flat.height = 16;
  flat.width = 16;
  flat.channels = 3;
  flat.pixels.assign(16 * 16 * 3, 128);
  write_jpeg(dir.str("flat.jpg"), flat, 95);
  ImageU8 back = read_image(dir.str("flat.jpg"));
  CHECK(back.channels == 3);
  CHECK(back.height == 16);
  for (std::uint8_t p : back.pixels)
    CHECK(std::abs(int(p) - 128) <= 2);

  ImageU8 gray;
  gray.height = 8;
  gray.width = 8;
  gray.channels = 1;
  gray.pixels.assign(64, 200);
  write_jpeg(dir.str("gray.jpg"), gray, 95);
  ImageU8 gback = read_image(dir.str("gray.jpg"));
  CHECK(gback.channels == 1);

  Tensor pre = preprocess_image(dir.str("flat.jpg"), 8, 8);
  CHECK(pre.shape() == Shape(1, 3, 8, 8));
  for (std::int64_t i = 0; i < pre.numel(); ++i)
    CHECK(pre[i] == doctest::Approx(128.0 / 255.0).epsilon(0.02));
}

TEST_CASE("read_image rejects non-image bytes") {
  TempDir dir("paanet_badimg");
  std::ofstream(dir.str("junk.png")) << "definitely not a png";
  CHECK_THROWS_AS(read_image(dir.str("junk.png")), FormatError);
  CHECK_THROWS_AS(read_image(dir.str("missing.png")), IoError);
}

TEST_CASE("nearest resize follows the pixel-center rule") {
  Tensor t(Shape(1, 1, 2, 2));
  t[0] = 1.0; t[1] = 2.0; t[2] = 3.0; t[3] = 4.0;

  Tensor up = nearest_resize(t, 4, 4);
  const double want[16] = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  for (int i = 0; i < 16; ++i) CHECK(up[i] == want[i]);

  // downsample picks source pixels 1 and 3 along each axis
  Tensor big(Shape(1, 1, 4, 4));
  for (int i = 0; i < 16; ++i) big[i] = double(i);
  Tensor down = nearest_resize(big, 2, 2);
  CHECK(down[0] == 5.0);
  CHECK(down[1] == 7.0);
  CHECK(down[2] == 13.0);
  CHECK(down[3] == 15.0);

  CHECK(tensors_equal(nearest_resize(t, 2, 2), t));
}

TEST_CASE("preprocess resizes bilinearly with corner alignment") {
  TempDir dir("paanet_pre");
  ImageU8 img;
  img.height = 2;
  img.width = 2;
  img.channels = 1;
  img.pixels = {0, 30, 60, 90};
  write_png(dir.str("ramp.png"), img);

  // corners pinned, interior linear: v(y,x) = (20·y + 10·x)/255 on a 4×4 grid
  Tensor t = preprocess_image(dir.str("ramp.png"), 4, 4);
  CHECK(t.shape() == Shape(1, 3, 4, 4));
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x)
        CHECK(t.at(0, c, y, x) ==
              doctest::Approx((20.0 * y + 10.0 * x) / 255.0).epsilon(1e-12));

  // same-size resize is the identity
  Tensor same = preprocess_image(dir.str("ramp.png"), 2, 2);
  CHECK(same.at(0, 0, 0, 0) == 0.0);
  CHECK(same.at(0, 0, 0, 1) == 30.0 / 255.0);
  CHECK(same.at(0, 0, 1, 1) == 90.0 / 255.0);
}

TEST_CASE("hflip mirrors columns and is an involution") {
  Rng rng(23);
  Tensor t = paatest::random_tensor(Shape(2, 3, 4, 5), rng);
  Tensor f = hflip(t);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x)
          CHECK(f.at(n, c, y, x) == t.at(n, c, y, 4 - x));
  CHECK(tensors_equal(hflip(f), t));
}

TEST_CASE("load_dataset pairs by stem, sorts, resizes, and binarizes") {
  TempDir dir("paanet_ds");
  fs::create_directories(dir.path / "images");
  fs::create_directories(dir.path / "masks");
  Rng rng(24);

  // write out of stem order to check sorting
  for (const char* stem : {"walrus", "apple", "mango"}) {
    write_png((dir.path / "images" / (std::string(stem) + ".png")).string(),
              random_image(128, 128, 3, rng));
    ImageU8 m = random_image(128, 128, 1, rng);
    for (auto& p : m.pixels) p = p < 128 ? 0 : 255;
    m.pixels[0] = 255;  // ensure at least one positive
    write_png((dir.path / "masks" / (std::string(stem) + ".png")).string(), m);
  }

  Dataset ds = load_dataset(dir.str("images"), dir.str("masks"), 64, 64);
  REQUIRE(ds.size() == 3);
  CHECK(ds[0].name == "apple");
  CHECK(ds[1].name == "mango");
  CHECK(ds[2].name == "walrus");
  for (const Sample& s : ds) {
    CHECK(s.image.shape() == Shape(1, 3, 64, 64));
    CHECK(s.mask.shape() == Shape(1, 1, 64, 64));
    for (std::int64_t i = 0; i < s.image.numel(); ++i) {
      CHECK(s.image[i] >= 0.0);
      CHECK(s.image[i] <= 1.0);
    }
    for (std::int64_t i = 0; i < s.mask.numel(); ++i)
      CHECK((s.mask[i] == 0.0 || s.mask[i] == 1.0));
  }

  // root-layout overload sees the same data
  Dataset via_root = load_dataset(dir.path.string(), 64, 64);
  REQUIRE(via_root.size() == 3);
  CHECK(tensors_equal(via_root[1].image, ds[1].image));

  // 127 stays background, 128 becomes foreground
  ImageU8 edge;
  edge.height = 2;
  edge.width = 2;
  edge.channels = 1;
  edge.pixels = {127, 128, 0, 255};
  write_png((dir.path / "masks" / "edge.png").string(), edge);
  write_png((dir.path / "images" / "edge.png").string(),
            random_image(2, 2, 3, rng));
  Dataset with_edge = load_dataset(dir.str("images"), dir.str("masks"), 2, 2);
  const Tensor& em = with_edge[1].mask;  // apple < edge < mango < walrus
  CHECK(em[0] == 0.0);
  CHECK(em[1] == 1.0);
  CHECK(em[2] == 0.0);
  CHECK(em[3] == 1.0);
}

TEST_CASE("load_dataset reports unmatched stems and handles empty dirs") {
  TempDir dir("paanet_dsbad");
  fs::create_directories(dir.path / "images");
  fs::create_directories(dir.path / "masks");
  CHECK(load_dataset(dir.str("images"), dir.str("masks"), 8, 8).empty());

  Rng rng(25);
  write_png((dir.path / "images" / "lonely.png").string(),
            random_image(8, 8, 3, rng));
  CHECK_THROWS_WITH_AS(load_dataset(dir.str("images"), dir.str("masks"), 8, 8),
                       doctest::Contains("image without mask"), ArgumentError);

  write_png((dir.path / "masks" / "lonely.png").string(),
            random_image(8, 8, 1, rng));
  write_png((dir.path / "masks" / "orphan.png").string(),
            random_image(8, 8, 1, rng));
  CHECK_THROWS_WITH_AS(load_dataset(dir.str("images"), dir.str("masks"), 8, 8),
                       doctest::Contains("mask without image"), ArgumentError);
}

TEST_CASE("grayscale images are replicated across channels") {
  TempDir dir("paanet_gray3");
  fs::create_directories(dir.path / "images");
  fs::create_directories(dir.path / "masks");
  Rng rng(26);
  write_png((dir.path / "images" / "g.png").string(),
            random_image(16, 16, 1, rng));
  ImageU8 m = random_image(16, 16, 1, rng);
  for (auto& p : m.pixels) p = p < 128 ? 0 : 255;
  write_png((dir.path / "masks" / "g.png").string(), m);
  Dataset ds = load_dataset(dir.str("images"), dir.str("masks"), 16, 16);
  REQUIRE(ds.size() == 1);
  const Tensor& img = ds[0].image;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      CHECK(img.at(0, 0, y, x) == img.at(0, 1, y, x));
      CHECK(img.at(0, 1, y, x) == img.at(0, 2, y, x));
    }
}

TEST_CASE("synthetic samples are deterministic and 8-bit clean") {
  SynthConfig cfg;
  cfg.count = 4;
  cfg.size = 32;
  cfg.seed = 77;
  Dataset a = synth_dataset(cfg);
  Dataset b = synth_dataset(cfg);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(tensors_equal(a[i].image, b[i].image));
    CHECK(tensors_equal(a[i].mask, b[i].mask));
    CHECK(a[i].name == b[i].name);
  }

  // changing the seed changes the data
  SynthConfig other = cfg;
  other.seed = 78;
  CHECK_FALSE(tensors_equal(synth_sample(other, 0).image, a[0].image));

  for (const Sample& s : a) {
    std::int64_t pos = 0, neg = 0;
    for (std::int64_t i = 0; i < s.mask.numel(); ++i) {
      CHECK((s.mask[i] == 0.0 || s.mask[i] == 1.0));
      (s.mask[i] == 1.0 ? pos : neg) += 1;
    }
    CHECK(pos > 0);
    CHECK(neg > 0);
    // every pixel sits exactly on an 8-bit level
    for (std::int64_t i = 0; i < s.image.numel(); ++i) {
      const double lv = s.image[i] * 255.0;
      CHECK(std::abs(lv - std::nearbyint(lv)) < 1e-9);
      CHECK(s.image[i] >= 0.0);
      CHECK(s.image[i] <= 1.0);
    }
  }
}

TEST_CASE("synthetic salient region carries the configured contrast") {
  SynthConfig cfg;
  cfg.count = 6;
  cfg.size = 48;
  cfg.seed = 5;
  Dataset ds = synth_dataset(cfg);
  for (const Sample& s : ds) {
    for (int c = 0; c < 3; ++c) {
      double in_sum = 0, out_sum = 0;
      std::int64_t in_n = 0, out_n = 0;
      for (int y = 0; y < cfg.size; ++y)
        for (int x = 0; x < cfg.size; ++x) {
          const double v = s.image.at(0, c, y, x);
          if (s.mask.at(0, 0, y, x) == 1.0) {
            in_sum += v;
            ++in_n;
          } else {
            out_sum += v;
            ++out_n;
          }
        }
      const double contrast = in_sum / double(in_n) - out_sum / double(out_n);
      CHECK(contrast >= cfg.contrast_lo - 2.0 / 255.0);
      CHECK(contrast <= cfg.contrast_hi + 2.0 / 255.0);
    }
  }
}

TEST_CASE("generated files reload bit-identically to the in-memory set") {
  TempDir dir("paanet_synthio");
  SynthConfig cfg;
  cfg.count = 3;
  cfg.size = 32;
  cfg.seed = 99;
  synth_generate(dir.path.string(), cfg);

  // same seed, same bytes on disk
  TempDir dir2("paanet_synthio2");
  synth_generate(dir2.path.string(), cfg);
  for (int i = 0; i < cfg.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "synth_%04d.png", i);
    CHECK(file_bytes(dir.path / "images" / name) ==
          file_bytes(dir2.path / "images" / name));
    CHECK(file_bytes(dir.path / "masks" / name) ==
          file_bytes(dir2.path / "masks" / name));
  }

  Dataset from_disk = load_dataset(dir.path.string(), cfg.size, cfg.size);
  Dataset in_memory = synth_dataset(cfg);
  REQUIRE(from_disk.size() == in_memory.size());
  for (std::size_t i = 0; i < from_disk.size(); ++i) {
    CHECK(from_disk[i].name == in_memory[i].name);
    CHECK(tensors_equal(from_disk[i].image, in_memory[i].image));
    CHECK(tensors_equal(from_disk[i].mask, in_memory[i].mask));
  }
}

TEST_CASE("challenge preset is harder on both axes") {
  SynthConfig base;
  SynthConfig hard = SynthConfig::challenge();
  CHECK(hard.contrast_hi < base.contrast_lo);
  CHECK(hard.min_distractors > base.max_distractors);
  CHECK(hard.noise > base.noise);

  hard.count = 2;
  hard.size = 32;
  hard.seed = 3;
  Dataset ds = synth_dataset(hard);
  REQUIRE(ds.size() == 2);
  for (const Sample& s : ds) {
    std::int64_t pos = 0;
    for (std::int64_t i = 0; i < s.mask.numel(); ++i) pos += s.mask[i] == 1.0;
    CHECK(pos >= (32 * 32) / 96);

    // salient interior carries pixel noise: not a flat fill
    double mn = 2.0, mx = -1.0;
    for (int h = 0; h < 32; ++h)
      for (int w = 0; w < 32; ++w)
        if (s.mask.at(0, 0, h, w) == 1.0) {
          mn = std::min(mn, s.image.at(0, 0, h, w));
          mx = std::max(mx, s.image.at(0, 0, h, w));
        }
    CHECK(mx - mn > 1.5 / 255.0);
  }
}
