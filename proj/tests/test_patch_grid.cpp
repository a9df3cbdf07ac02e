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

#include <png.h>

#include <algorithm>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>

#include "kpp/error.hpp"
#include "kpp/image_io.hpp"
#include "kpp/patch_grid.hpp"
#include "test_util.hpp"

namespace kpp {
namespace {

using testing::random_image;
using testing::TempDir;

TEST(GridSpec, DerivedCounts) {
  const GridSpec g(224, 16);
  EXPECT_EQ(g.grid_side(), 14u);
  EXPECT_EQ(g.n_patches(), 196u);
  EXPECT_EQ(g.row(105), 7u);
  EXPECT_EQ(g.col(105), 7u);
}

TEST(GridSpec, RejectsNonDividingPatch) {
  EXPECT_THROW(GridSpec(224, 15), std::invalid_argument);
  EXPECT_THROW(GridSpec(224, 0), std::invalid_argument);
}

TEST(ImageTensor, ValidatesLengthAndRange) {
  EXPECT_THROW(ImageTensor(2, 2, 1, {0.0, 0.1, 0.2}), std::invalid_argument);
  EXPECT_THROW(ImageTensor(1, 1, 1, {1.5}), std::invalid_argument);
  EXPECT_NO_THROW(ImageTensor(1, 2, 1, {0.0, 1.0}));
}

TEST(Split, ViTGeometryGives196Patches) {
  const GridSpec g(224, 16);
  const PatchArray p = split(random_image(224, 3, 1), g);
  EXPECT_EQ(p.n_patches(), 196u);
  EXPECT_EQ(p.patch_size(), 16u * 16u * 3u);
}

TEST(Split, RowMajorIndexing) {
  const GridSpec g(32, 16);
  const ImageTensor img = random_image(32, 3, 2);
  const PatchArray p = split(img, g);
  ASSERT_EQ(p.n_patches(), 4u);
  // Patch 3 is the block at rows 16-31, cols 16-31.
  auto patch3 = p.patch(3);
  for (std::size_t i = 0; i < 16; ++i) {
    for (std::size_t j = 0; j < 16; ++j) {
      for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_EQ(patch3[(i * 16 + j) * 3 + c], img.at(16 + i, 16 + j, c));
      }
    }
  }
}

TEST(Split, PixelIdentityPropertyOnRandomImages) {
  const GridSpec g(64, 16);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ImageTensor img = random_image(64, 3, seed);
    const PatchArray p = split(img, g);
    for (PatchIndex k = 0; k < g.n_patches(); ++k) {
      const auto patch = p.patch(k);
      for (std::size_t i = 0; i < 16; ++i) {
        for (std::size_t j = 0; j < 16; ++j) {
          for (std::size_t c = 0; c < 3; ++c) {
            ASSERT_EQ(patch[(i * 16 + j) * 3 + c],
                      img.at(16 * g.row(k) + i, 16 * g.col(k) + j, c));
          }
        }
      }
    }
  }
}

TEST(Split, RejectsDimensionMismatch) {
  EXPECT_THROW(split(random_image(48, 3, 0), GridSpec(32, 16)), std::invalid_argument);
}

TEST(Assemble, RoundTripIsBitExact) {
  const std::pair<std::size_t, std::size_t> shapes[] = {{224, 16}, {48, 16}, {30, 5}, {8, 8}};
  std::uint64_t seed = 0;
  for (auto [side, ps] : shapes) {
    for (std::size_t ch : {1u, 3u}) {
      const GridSpec g(side, ps);
      const ImageTensor img = random_image(side, ch, ++seed);
      EXPECT_EQ(assemble(split(img, g), g), img) << side << "/" << ps << "/" << ch;
    }
  }
}

TEST(Assemble, AllZeroPatchesGiveZeroImage) {
  const GridSpec g(32, 16);
  const ImageTensor img = assemble(PatchArray(4, 16, 3), g);
  EXPECT_TRUE(std::all_of(img.data().begin(), img.data().end(),
                          [](double v) { return v == 0.0; }));
}

TEST(Assemble, PermutedPatchesDifferForTwoToneImage) {
  const GridSpec g(32, 16);
  ImageTensor img(32, 32, 1);
  for (std::size_t y = 0; y < 32; ++y) {
    for (std::size_t x = 0; x < 32; ++x) img.at(y, x, 0) = x < 16 ? 0.0 : 1.0;
  }
  const PatchArray p = split(img, g);
  PatchArray swapped = p;
  auto a = swapped.patch(0);
  auto b = swapped.patch(1);
  std::swap_ranges(a.begin(), a.end(), b.begin());
  EXPECT_NE(assemble(swapped, g), img);
}

TEST(Assemble, RejectsCountMismatch) {
  EXPECT_THROW(assemble(PatchArray(3, 16, 3), GridSpec(32, 16)), std::invalid_argument);
}

TEST(CentralIndex, FloorRule) {
  EXPECT_EQ(central_index(GridSpec(224, 16)), 105u);  // 14x14
  EXPECT_EQ(central_index(GridSpec(3, 1)), 4u);
  EXPECT_EQ(central_index(GridSpec(2, 1)), 3u);
  EXPECT_EQ(central_index(GridSpec(1, 1)), 0u);
}

TEST(CentralIndex, InBoundsForAllSmallGrids) {
  for (std::size_t g = 1; g <= 40; ++g) {
    const GridSpec spec(g, 1);
    const PatchIndex c = central_index(spec);
    EXPECT_LT(c, spec.n_patches());
    EXPECT_EQ(c, central_index(spec));
  }
}

RgbImage solid(std::size_t h, std::size_t w, std::uint8_t v) {
  RgbImage img;
  img.height = h;
  img.width = w;
  img.pixels.assign(h * w * 3, v);
  return img;
}

RgbImage noise(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RgbImage img = solid(h, w, 0);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xFF);
  return img;
}

TEST(LoadAndResize, LargeInputResizedTo224) {
  TempDir dir("resize");
  const auto path = dir.path() / "big.png";
  write_png(path, noise(448, 448, 3));
  const ImageTensor t = load_and_resize(path, GridSpec(224, 16));
  EXPECT_EQ(t.height(), 224u);
  EXPECT_EQ(t.width(), 224u);
  EXPECT_EQ(t.channels(), 3u);
  for (double v : t.data()) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST(LoadAndResize, SameSizeIsExactDivisionBy255) {
  TempDir dir("identity");
  const auto path = dir.path() / "same.png";
  const RgbImage src = noise(224, 224, 4);
  write_png(path, src);
  const ImageTensor t = load_and_resize(path, GridSpec(224, 16));
  for (std::size_t i = 0; i < src.pixels.size(); ++i) {
    ASSERT_EQ(t.data()[i], src.pixels[i] / 255.0);
  }
}

TEST(LoadAndResize, SolidGrayIsResizeInvariant) {
  TempDir dir("gray");
  const auto path = dir.path() / "gray.png";
  write_png(path, solid(64, 64, 128));
  const ImageTensor t = load_and_resize(path, GridSpec(224, 16));
  for (double v : t.data()) ASSERT_EQ(v, 128.0 / 255.0);
}

TEST(LoadAndResize, GrayscalePngReplicatedToThreeChannels) {
  TempDir dir("grayscale");
  const auto path = dir.path() / "g.png";
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = 16;
  image.height = 16;
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> px(256);
  std::iota(px.begin(), px.end(), 0);
  ASSERT_TRUE(png_image_write_to_file(&image, path.c_str(), 0, px.data(), 0, nullptr));
  const ImageTensor t = load_and_resize(path, GridSpec(16, 16));
  for (std::size_t i = 0; i < 256; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      ASSERT_EQ(t.at(i / 16, i % 16, c), px[i] / 255.0);
    }
  }
}

TEST(LoadAndResize, DecodesJpeg) {
  TempDir dir("jpeg");
  const auto path = dir.path() / "img.jpg";
  // Minimal baseline JPEG is awkward to hand-write; encode one with libjpeg.
  {
    jpeg_compress_struct cinfo{};
    jpeg_error_mgr jerr{};
    cinfo.err = jpeg_std_error(&jerr);
    jpeg_create_compress(&cinfo);
    FILE* f = std::fopen(path.c_str(), "wb");
    ASSERT_NE(f, nullptr);
    jpeg_stdio_dest(&cinfo, f);
    cinfo.image_width = 40;
    cinfo.image_height = 30;
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_start_compress(&cinfo, TRUE);
    const RgbImage src = solid(30, 40, 200);
    while (cinfo.next_scanline < cinfo.image_height) {
      JSAMPROW row = const_cast<JSAMPROW>(src.pixels.data() + cinfo.next_scanline * 40 * 3);
      jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    std::fclose(f);
  }
  const ImageTensor t = load_and_resize(path, GridSpec(32, 16));
  EXPECT_EQ(t.height(), 32u);
  for (double v : t.data()) ASSERT_NEAR(v, 200.0 / 255.0, 3.0 / 255.0);
}

TEST(LoadAndResize, ErrorPaths) {
  TempDir dir("errors");
  EXPECT_THROW(load_and_resize(dir.path() / "missing.png", GridSpec(32, 16)), IoError);
  const auto junk = dir.path() / "junk.png";
  std::ofstream(junk) << "definitely not an image";
  EXPECT_THROW(load_and_resize(junk, GridSpec(32, 16)), IoError);
  const auto truncated = dir.path() / "trunc.png";
  std::ofstream(truncated, std::ios::binary) << "\x89PNG\r\n\x1a\n";
  EXPECT_THROW(load_and_resize(truncated, GridSpec(32, 16)), IoError);
}

TEST(ResizeBilinear, RejectsZeroDimension) {
  std::vector<std::uint8_t> none;
  EXPECT_THROW(resize_bilinear_u8(none, 0, 4, 3, 8, 8), std::invalid_argument);
}

}  // namespace
}  // namespace kpp
