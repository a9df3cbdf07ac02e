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

// Patch-grid geometry: images, their decomposition into a row-major grid of
// square patches, and the inverse reassembly.

#ifndef KPP_PATCH_GRID_HPP_
#define KPP_PATCH_GRID_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace kpp {

using PatchIndex = std::size_t;

// H x W x C pixel intensities in [0,1], row-major, channel-interleaved.
class ImageTensor {
 public:
  ImageTensor() = default;

  ImageTensor(std::size_t height, std::size_t width, std::size_t channels)
      : height_(height), width_(width), channels_(channels),
        data_(height * width * channels, 0.0) {}

  ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
              std::vector<double> data)
      : height_(height), width_(width), channels_(channels),
        data_(std::move(data)) {
    if (data_.size() != height_ * width_ * channels_) {
      throw std::invalid_argument("ImageTensor: data length " +
                                  std::to_string(data_.size()) +
                                  " does not match " + shape_string());
    }
    for (double v : data_) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("ImageTensor: value outside [0,1]");
      }
    }
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return data_[(y * width_ + x) * channels_ + c];
  }
  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return data_[(y * width_ + x) * channels_ + c];
  }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  std::string shape_string() const {
    return std::to_string(height_) + "x" + std::to_string(width_) + "x" +
           std::to_string(channels_);
  }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

// Square image of image_side pixels cut into grid_side x grid_side patches.
class GridSpec {
 public:
  GridSpec(std::size_t image_side, std::size_t patch_side)
      : image_side_(image_side), patch_side_(patch_side) {
    if (patch_side == 0 || image_side == 0 || image_side % patch_side != 0) {
      throw std::invalid_argument(
          "GridSpec: patch_side " + std::to_string(patch_side) +
          " must divide image_side " + std::to_string(image_side));
    }
  }

  std::size_t image_side() const { return image_side_; }
  std::size_t patch_side() const { return patch_side_; }
  std::size_t grid_side() const { return image_side_ / patch_side_; }
  std::size_t n_patches() const { return grid_side() * grid_side(); }

  std::size_t row(PatchIndex idx) const { return idx / grid_side(); }
  std::size_t col(PatchIndex idx) const { return idx % grid_side(); }
  PatchIndex index(std::size_t row, std::size_t col) const {
    return row * grid_side() + col;
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  std::size_t image_side_;
  std::size_t patch_side_;
};

// ViT-B/16 geometry.
inline GridSpec default_grid() { return GridSpec(224, 16); }

// All patches of one image, each patch_side x patch_side x channels, stored
// contiguously in row-major grid order. In grid order this is the positional
// sort of the ground set.
class PatchArray {
 public:
  PatchArray() = default;

  PatchArray(std::size_t n_patches, std::size_t patch_side,
             std::size_t channels)
      : n_patches_(n_patches), patch_side_(patch_side), channels_(channels),
        data_(n_patches * patch_side * patch_side * channels, 0.0) {}

  std::size_t n_patches() const { return n_patches_; }
  std::size_t patch_side() const { return patch_side_; }
  std::size_t channels() const { return channels_; }
  // Values per patch (pixels x channels).
  std::size_t patch_size() const { return patch_side_ * patch_side_ * channels_; }

  std::span<const double> patch(PatchIndex k) const {
    return std::span<const double>(data_).subspan(k * patch_size(),
                                                  patch_size());
  }
  std::span<double> patch(PatchIndex k) {
    return std::span<double>(data_).subspan(k * patch_size(), patch_size());
  }

  std::span<const double> data() const { return data_; }

  bool same_shape(const PatchArray& other) const {
    return n_patches_ == other.n_patches_ && patch_side_ == other.patch_side_ &&
           channels_ == other.channels_;
  }

  friend bool operator==(const PatchArray&, const PatchArray&) = default;

 private:
  std::size_t n_patches_ = 0;
  std::size_t patch_side_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

inline PatchArray split(const ImageTensor& img, const GridSpec& spec) {
  if (img.height() != spec.image_side() || img.width() != spec.image_side()) {
    throw std::invalid_argument("split: image " + img.shape_string() +
                                " does not match grid image_side " +
                                std::to_string(spec.image_side()));
  }
  const std::size_t ps = spec.patch_side();
  const std::size_t ch = img.channels();
  PatchArray out(spec.n_patches(), ps, ch);
  for (PatchIndex k = 0; k < spec.n_patches(); ++k) {
    const std::size_t y0 = spec.row(k) * ps;
    const std::size_t x0 = spec.col(k) * ps;
    auto dst = out.patch(k);
    std::size_t o = 0;
    for (std::size_t i = 0; i < ps; ++i) {
      for (std::size_t j = 0; j < ps; ++j) {
        for (std::size_t c = 0; c < ch; ++c) dst[o++] = img.at(y0 + i, x0 + j, c);
      }
    }
  }
  return out;
}

inline ImageTensor assemble(const PatchArray& patches, const GridSpec& spec) {
  if (patches.n_patches() != spec.n_patches() ||
      patches.patch_side() != spec.patch_side()) {
    throw std::invalid_argument(
        "assemble: " + std::to_string(patches.n_patches()) + " patches of side " +
        std::to_string(patches.patch_side()) + " do not fit grid with " +
        std::to_string(spec.n_patches()) + " patches");
  }
  const std::size_t ps = spec.patch_side();
  const std::size_t ch = patches.channels();
  ImageTensor img(spec.image_side(), spec.image_side(), ch);
  for (PatchIndex k = 0; k < spec.n_patches(); ++k) {
    const std::size_t y0 = spec.row(k) * ps;
    const std::size_t x0 = spec.col(k) * ps;
    auto src = patches.patch(k);
    std::size_t o = 0;
    for (std::size_t i = 0; i < ps; ++i) {
      for (std::size_t j = 0; j < ps; ++j) {
        for (std::size_t c = 0; c < ch; ++c) img.at(y0 + i, x0 + j, c) = src[o++];
      }
    }
  }
  return img;
}

// Even grids have four middle cells; the lower-right one, (g/2, g/2), is used.
inline PatchIndex central_index(const GridSpec& spec) {
  const std::size_t mid = spec.grid_side() / 2;
  return spec.index(mid, mid);
}

// Bilinear resize of 8-bit samples with half-pixel centres, mapped to [0,1]
// by v/255. Aspect ratio is not preserved. Same-size input is copied exactly.
inline ImageTensor resize_bilinear_u8(std::span<const std::uint8_t> pixels,
                                      std::size_t height, std::size_t width,
                                      std::size_t channels, std::size_t out_h,
                                      std::size_t out_w) {
  if (height == 0 || width == 0 || channels == 0) {
    throw std::invalid_argument("resize: zero-dimension image");
  }
  if (pixels.size() != height * width * channels) {
    throw std::invalid_argument("resize: pixel buffer size mismatch");
  }
  ImageTensor out(out_h, out_w, channels);
  auto dst = out.data();
  if (out_h == height && out_w == width) {
    for (std::size_t i = 0; i < pixels.size(); ++i) dst[i] = pixels[i] / 255.0;
    return out;
  }
  auto sample = [&](std::size_t y, std::size_t x, std::size_t c) {
    return static_cast<double>(pixels[(y * width + x) * channels + c]);
  };
  auto source_coord = [](std::size_t dst_pos, std::size_t src_len,
                         std::size_t dst_len, std::size_t& lo, std::size_t& hi,
                         double& t) {
    const double scale = static_cast<double>(src_len) / dst_len;
    double s = (dst_pos + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src_len - 1));
    lo = static_cast<std::size_t>(std::floor(s));
    hi = std::min(lo + 1, src_len - 1);
    t = s - lo;
  };
  for (std::size_t y = 0; y < out_h; ++y) {
    std::size_t y0, y1;
    double ty;
    source_coord(y, height, out_h, y0, y1, ty);
    for (std::size_t x = 0; x < out_w; ++x) {
      std::size_t x0, x1;
      double tx;
      source_coord(x, width, out_w, x0, x1, tx);
      for (std::size_t c = 0; c < channels; ++c) {
        // lerp form keeps flat regions exact
        const double a = sample(y0, x0, c);
        const double b = sample(y0, x1, c);
        const double d = sample(y1, x0, c);
        const double e = sample(y1, x1, c);
        const double top = a + (b - a) * tx;
        const double bottom = d + (e - d) * tx;
        const double v = top + (bottom - top) * ty;
        out.at(y, x, c) = std::clamp(v, 0.0, 255.0) / 255.0;
      }
    }
  }
  return out;
}

}  // namespace kpp

#endif  // KPP_PATCH_GRID_HPP_
