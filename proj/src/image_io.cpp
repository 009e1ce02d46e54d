// SPDX-License-Identifier: Apache-2.0

#include "paanet/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

namespace paanet {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path);
  return f;
}

// libpng reports errors through longjmp; keep the reader state in one
// place so the cleanup path stays trivial.
ImageU8 read_png_file(const std::string& path, std::FILE* fp) {
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png: out of memory reading " + path);
  }
  std::vector<png_bytep> rows;
  ImageU8 img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png: failed to decode " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  const bool trns = png_get_valid(png, info, PNG_INFO_tRNS) != 0;
  if (trns) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_strip_16(png);
  // update_info may only run once, so decide up front whether the
  // transformed stream will carry alpha (native or expanded from tRNS).
  if ((color & PNG_COLOR_MASK_ALPHA) || trns) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  img.height = static_cast<int>(png_get_image_height(png, info));
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.channels = png_get_channels(png, info);
  if (img.channels != 1 && img.channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png: unsupported channel count in " + path);
  }
  img.pixels.resize(static_cast<std::size_t>(img.height) * img.width *
                    img.channels);
  rows.resize(img.height);
  for (int h = 0; h < img.height; ++h)
    rows[h] = img.pixels.data() +
              static_cast<std::size_t>(h) * img.width * img.channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

struct JpegErr {
  jpeg_error_mgr mgr;
  std::jmp_buf jb;
};

void jpeg_throw(j_common_ptr cinfo) {
  JpegErr* err = reinterpret_cast<JpegErr*>(cinfo->err);
  std::longjmp(err->jb, 1);
}

ImageU8 read_jpeg_file(const std::string& path, std::FILE* fp) {
  jpeg_decompress_struct cinfo;
  JpegErr err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_throw;
  if (setjmp(err.jb)) {
    jpeg_destroy_decompress(&cinfo);
    throw FormatError("jpeg: failed to decode " + path);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, fp);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space =
      cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);

  ImageU8 img;
  img.height = static_cast<int>(cinfo.output_height);
  img.width = static_cast<int>(cinfo.output_width);
  img.channels = cinfo.output_components;
  img.pixels.resize(static_cast<std::size_t>(img.height) * img.width *
                    img.channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.pixels.data() +
                   static_cast<std::size_t>(cinfo.output_scanline) *
                       img.width * img.channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

}  // namespace

ImageU8 read_image(const std::string& path) {
  FilePtr fp = open_file(path, "rb");
  unsigned char sig[8] = {0};
  const std::size_t got = std::fread(sig, 1, 8, fp.get());
  std::rewind(fp.get());
  if (got >= 8 && png_sig_cmp(sig, 0, 8) == 0)
    return read_png_file(path, fp.get());
  if (got >= 2 && sig[0] == 0xff && sig[1] == 0xd8)
    return read_jpeg_file(path, fp.get());
  throw FormatError("unrecognized image format: " + path);
}

void write_png(const std::string& path, const ImageU8& img) {
  require(img.channels == 1 || img.channels == 3,
          "write_png: image must be gray or RGB");
  require(img.height > 0 && img.width > 0 &&
              img.pixels.size() == static_cast<std::size_t>(img.height) *
                                       img.width * img.channels,
          "write_png: inconsistent image buffer");
  FilePtr fp = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png: out of memory writing " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png: failed to write " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(img.height);
  for (int h = 0; h < img.height; ++h)
    rows[h] = const_cast<png_bytep>(img.pixels.data()) +
              static_cast<std::size_t>(h) * img.width * img.channels;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor image_to_tensor(const ImageU8& img) {
  Tensor t(Shape(1, img.channels, img.height, img.width));
  for (int c = 0; c < img.channels; ++c)
    for (int h = 0; h < img.height; ++h)
      for (int w = 0; w < img.width; ++w)
        t.at(0, c, h, w) = img.at(h, w, c) / 255.0;
  return t;
}

namespace {

std::uint8_t to_u8(double v) {
  const double scaled = std::nearbyint(v * 255.0);
  return static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, scaled)));
}

}  // namespace

ImageU8 tensor_to_gray_u8(const Tensor& t) {
  const Shape& s = t.shape();
  require(s.n == 1 && s.c == 1, "tensor_to_gray_u8: want (1,1,H,W), got " +
                                    s.str());
  ImageU8 img;
  img.height = static_cast<int>(s.h);
  img.width = static_cast<int>(s.w);
  img.channels = 1;
  img.pixels.resize(static_cast<std::size_t>(s.h) * s.w);
  for (int h = 0; h < img.height; ++h)
    for (int w = 0; w < img.width; ++w)
      img.at(h, w, 0) = to_u8(t.at(0, 0, h, w));
  return img;
}

ImageU8 tensor_to_rgb_u8(const Tensor& t) {
  const Shape& s = t.shape();
  require(s.n == 1 && s.c == 3, "tensor_to_rgb_u8: want (1,3,H,W), got " +
                                    s.str());
  ImageU8 img;
  img.height = static_cast<int>(s.h);
  img.width = static_cast<int>(s.w);
  img.channels = 3;
  img.pixels.resize(static_cast<std::size_t>(s.h) * s.w * 3);
  for (int c = 0; c < 3; ++c)
    for (int h = 0; h < img.height; ++h)
      for (int w = 0; w < img.width; ++w)
        img.at(h, w, c) = to_u8(t.at(0, c, h, w));
  return img;
}

}  // namespace paanet
