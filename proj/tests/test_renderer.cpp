#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace desens;

namespace {

Image noise_image(int w, int h, std::uint64_t seed) {
  Image img(w, h);
  std::mt19937_64 rng(seed);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  return img;
}

DesensRegion region_of(PixelMask m) {
  const BBox b = min_bbox(m);
  return {Category::Face, std::move(m), b, 1.0, RegionOrigin::Segmentation, std::nullopt};
}

void expect_untouched_outside(const Image& before, const Image& after, const PixelMask& changed) {
  for (int y = 0; y < before.height; ++y) {
    for (int x = 0; x < before.width; ++x) {
      if (changed.get(x, y)) continue;
      for (int k = 0; k < 3; ++k) ASSERT_EQ(before.at(x, y)[k], after.at(x, y)[k]) << x << "," << y;
    }
  }
}

}  // namespace

TEST(Renderer, SolidFillsMaskOnly) {
  const auto img = noise_image(30, 20, 1);
  const auto r = region_of(PixelMask::from_rect(30, 20, 3, 4, 12, 9));
  const auto out = apply(img, r, Solid{10, 20, 30});
  expect_untouched_outside(img, out, r.mask);
  for (const auto& s : row_spans(r.mask)) {
    for (int x = s.x0; x < s.x1; ++x) {
      EXPECT_EQ(out.at(x, s.y)[0], 10);
      EXPECT_EQ(out.at(x, s.y)[2], 30);
    }
  }
}

TEST(Renderer, MosaicUsesGridCellMeans) {
  Image img(4, 2);
  // One 2x2 cell holding 0, 10, 20, 31 in channel 0.
  img.at(0, 0)[0] = 0;
  img.at(1, 0)[0] = 10;
  img.at(0, 1)[0] = 20;
  img.at(1, 1)[0] = 31;
  const auto r = region_of(PixelMask::from_rect(4, 2, 0, 0, 2, 2));
  const auto out = apply(img, r, Mosaic{2});
  // (61 + 2) / 4 = 15.
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) EXPECT_EQ(out.at(x, y)[0], 15);
  }
}

TEST(Renderer, MosaicIgnoresPixelsOutsideMask) {
  auto img = noise_image(16, 16, 2);
  std::mt19937_64 rng(3);
  const auto g = oracle::random_grid(rng, 16, 16, 2, 5);
  const auto r = region_of(g.mask());
  const auto out = apply(img, r, Mosaic{4});
  expect_untouched_outside(img, out, r.mask);
  // Each masked pixel holds the rounded mean of the masked pixels in its cell.
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      if (!g.at(x, y)) continue;
      long sum = 0, n = 0;
      for (int yy = y / 4 * 4; yy < y / 4 * 4 + 4; ++yy) {
        for (int xx = x / 4 * 4; xx < x / 4 * 4 + 4; ++xx) {
          if (g.at(xx, yy)) {
            sum += img.at(xx, yy)[1];
            ++n;
          }
        }
      }
      EXPECT_EQ(out.at(x, y)[1], (sum + n / 2) / n);
    }
  }
}

TEST(Renderer, IconStretchedOverBox) {
  Icon ic{Image(2, 2, 200), {}, IconAnchor::Center, false};
  const auto img = noise_image(20, 20, 4);
  const auto r = region_of(PixelMask::from_rect(20, 20, 5, 5, 11, 9));
  EXPECT_EQ(applied_mask(r, ic), r.mask);
  const auto out = apply(img, r, ic);
  expect_untouched_outside(img, out, r.mask);
  EXPECT_EQ(out.at(5, 5)[0], 200);
}

TEST(Renderer, IconKeepAspectCoverage) {
  // A wide icon fitted into a square box covers half of it.
  Icon ic{Image(4, 2, 50), {}, IconAnchor::TopLeft, true};
  const auto r = region_of(PixelMask::from_rect(20, 20, 0, 0, 8, 8));
  const auto applied = applied_mask(r, ic);
  EXPECT_DOUBLE_EQ(coverage_ratio(applied, r.mask), 0.5);
  EXPECT_NO_THROW(apply(noise_image(20, 20, 5), r, ic));
  // A thinner icon falls below the minimum and is refused.
  Icon thin{Image(8, 2, 50), {}, IconAnchor::Center, true};
  EXPECT_THROW(apply(noise_image(20, 20, 5), r, thin), InvariantError);
}

TEST(Renderer, IconAlphaBlends) {
  Icon ic{Image(1, 1, 255), {128}, IconAnchor::Center, false};
  Image img(4, 4, 0);
  const auto out = apply(img, region_of(PixelMask::from_rect(4, 4, 0, 0, 2, 2)), ic);
  EXPECT_EQ(out.at(0, 0)[0], (255 * 128 + 127) / 255);
  EXPECT_EQ(out.at(3, 3)[0], 0);
}

TEST(Renderer, RejectsMismatchedMask) {
  EXPECT_THROW(apply(Image(4, 4), region_of(PixelMask::from_rect(5, 4, 0, 0, 1, 1)), Solid{}), DimensionError);
  EXPECT_THROW(apply(Image(4, 4), region_of(PixelMask::from_rect(4, 4, 0, 0, 1, 1)), Mosaic{1}), InvariantError);
}

TEST(Ppm, RoundTrip) {
  const auto img = noise_image(7, 5, 6);
  const auto bytes = write_ppm(img);
  const std::string header(bytes.begin(), bytes.begin() + 11);
  EXPECT_EQ(header, "P6\n7 5\n255\n");
  EXPECT_EQ(read_ppm(bytes), img);
}

TEST(Ppm, AcceptsComments) {
  std::string s = "P6\n# made by hand\n1 1\n255\n";
  s += "abc";
  std::vector<std::uint8_t> b(s.begin(), s.end());
  EXPECT_EQ(read_ppm(b).at(0, 0)[1], 'b');
}

TEST(Ppm, RejectsMalformed) {
  auto bad = [](std::string s) {
    std::vector<std::uint8_t> b(s.begin(), s.end());
    return read_ppm(b);
  };
  EXPECT_THROW(bad("P3\n1 1\n255\nabc"), DataError);
  EXPECT_THROW(bad("P6\n1 1\n65535\nabc"), DataError);
  EXPECT_THROW(bad("P6\n1 1\n255\nab"), DataError);
  EXPECT_THROW(bad("P6\n1 1\n255\nabcd"), DataError);
  EXPECT_THROW(bad("P6\n0 1\n255\n"), DataError);
}
