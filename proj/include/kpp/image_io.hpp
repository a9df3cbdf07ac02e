// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef KPP_IMAGE_IO_HPP_
#define KPP_IMAGE_IO_HPP_

#include <png.h>
#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "kpp/error.hpp"
#include "kpp/patch_grid.hpp"

namespace kpp {

// Decoded 8-bit image, always RGB (grayscale is replicated).
struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3
};

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

inline RgbImage decode_png(const std::vector<std::uint8_t>& bytes,
                           const std::string& name) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError("cannot decode PNG " + name + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  RgbImage out;
  out.height = image.height;
  out.width = image.width;
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG " + name + ": " + image.message);
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

inline RgbImage decode_jpeg(const std::vector<std::uint8_t>& bytes,
                            const std::string& name) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  RgbImage out;
  // Only trivially destructible locals may be created after this point.
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError("cannot decode JPEG " + name + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out.height = cinfo.output_height;
  out.width = cinfo.output_width;
  out.pixels.resize(out.height * out.width * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.pixels.data() + cinfo.output_scanline * out.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

}  // namespace detail

// PNG or JPEG, detected by magic bytes.
inline RgbImage decode_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw IoError("image file does not exist: " + path.string());
  }
  const auto bytes = detail::read_file_bytes(path);
  static constexpr std::uint8_t kPngMagic[] = {0x89, 'P', 'N', 'G'};
  RgbImage img;
  if (bytes.size() >= 4 && std::equal(std::begin(kPngMagic), std::end(kPngMagic),
                                      bytes.begin())) {
    img = detail::decode_png(bytes, path.string());
  } else if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 &&
             bytes[2] == 0xFF) {
    img = detail::decode_jpeg(bytes, path.string());
  } else {
    throw IoError("unsupported or unrecognised image format: " + path.string());
  }
  if (img.height == 0 || img.width == 0) {
    throw IoError("zero-dimension image: " + path.string());
  }
  return img;
}

inline ImageTensor load_and_resize(const std::filesystem::path& path,
                                   const GridSpec& spec) {
  const RgbImage img = decode_image(path);
  return resize_bilinear_u8(img.pixels, img.height, img.width, 3,
                            spec.image_side(), spec.image_side());
}

// 8-bit RGB PNG writer; used for fixtures and debugging dumps.
inline void write_png(const std::filesystem::path& path, const RgbImage& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0,
                               img.pixels.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

inline RgbImage to_rgb8(const ImageTensor& img) {
  if (img.channels() != 3 && img.channels() != 1) {
    throw std::invalid_argument("to_rgb8: expected 1 or 3 channels");
  }
  RgbImage out;
  out.height = img.height();
  out.width = img.width();
  out.pixels.resize(out.height * out.width * 3);
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = img.at(y, x, img.channels() == 3 ? c : 0);
        out.pixels[(y * out.width + x) * 3 + c] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  return out;
}

}  // namespace kpp

#endif  // KPP_IMAGE_IO_HPP_
