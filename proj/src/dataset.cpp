// SPDX-License-Identifier: Apache-2.0

#include "paanet/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

#include "paanet/image_io.hpp"
#include "paanet/ops.hpp"

namespace fs = std::filesystem;

namespace paanet {
namespace {

bool has_ext(const fs::path& p, std::initializer_list<const char*> exts) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  for (const char* want : exts)
    if (e == want) return true;
  return false;
}

// stem → path, sorted by stem via the map; duplicate stems are ambiguous
std::map<std::string, fs::path> index_dir(
    const std::string& dir, std::initializer_list<const char*> exts) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !has_ext(entry.path(), exts)) continue;
    auto [it, fresh] = out.emplace(entry.path().stem().string(), entry.path());
    if (!fresh)
      throw ArgumentError("duplicate stem '" + it->first + "' in " + dir);
  }
  return out;
}

Tensor to_three_channels(const Tensor& t) {
  if (t.shape().c == 3) return t;
  return concat_channels(std::vector<Tensor>{t, t, t});
}

}  // namespace

Tensor nearest_resize(const Tensor& t, int out_h, int out_w) {
  require(out_h > 0 && out_w > 0, "nearest_resize: bad target size");
  const Shape& s = t.shape();
  Tensor out(Shape(s.n, s.c, out_h, out_w));
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t c = 0; c < s.c; ++c)
      for (int h = 0; h < out_h; ++h) {
        const auto sh = std::min<std::int64_t>(
            s.h - 1, static_cast<std::int64_t>((h + 0.5) * s.h / out_h));
        for (int w = 0; w < out_w; ++w) {
          const auto sw = std::min<std::int64_t>(
              s.w - 1, static_cast<std::int64_t>((w + 0.5) * s.w / out_w));
          out.at(n, c, h, w) = t.at(n, c, sh, sw);
        }
      }
  return out;
}

Tensor preprocess_image(const std::string& path, int height, int width) {
  Tensor raw = to_three_channels(image_to_tensor(read_image(path)));
  if (raw.shape().h == height && raw.shape().w == width) return raw;
  NoGradScope no_grad;
  return bilinear_resize(raw, height, width);
}

Dataset load_dataset(const std::string& image_dir, const std::string& mask_dir,
                     int height, int width) {
  auto images = index_dir(image_dir, {".png", ".jpg", ".jpeg"});
  auto masks = index_dir(mask_dir, {".png"});
  for (const auto& [stem, path] : masks)
    if (!images.count(stem))
      throw ArgumentError("mask without image: " + path.string());

  Dataset data;
  for (const auto& [stem, path] : images) {
    auto mit = masks.find(stem);
    if (mit == masks.end())
      throw ArgumentError("image without mask: " + path.string());
    Sample s;
    s.name = stem;
    s.image = preprocess_image(path.string(), height, width);
    ImageU8 mask_img = read_image(mit->second.string());
    require(mask_img.channels == 1,
            "mask must be grayscale: " + mit->second.string());
    Tensor m = image_to_tensor(mask_img);
    if (m.shape().h != height || m.shape().w != width)
      m = nearest_resize(m, height, width);
    // binarize at the 128 midpoint: u8 ≥ 128 ⇔ [0,1] value ≥ 128/255
    for (std::int64_t i = 0; i < m.numel(); ++i)
      m[i] = m[i] >= 128.0 / 255.0 ? 1.0 : 0.0;
    s.mask = m;
    data.push_back(std::move(s));
  }
  return data;
}

Dataset load_dataset(const std::string& root, int height, int width) {
  return load_dataset(root + "/images", root + "/masks", height, width);
}

Tensor hflip(const Tensor& t) {
  const Shape& s = t.shape();
  Tensor out(s);
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t c = 0; c < s.c; ++c)
      for (std::int64_t h = 0; h < s.h; ++h)
        for (std::int64_t w = 0; w < s.w; ++w)
          out.at(n, c, h, w) = t.at(n, c, h, s.w - 1 - w);
  return out;
}

}  // namespace paanet
