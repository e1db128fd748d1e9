#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace desens;

TEST(BoxIou, KnownValues) {
  EXPECT_DOUBLE_EQ(box_iou({0, 0, 2, 2}, {1, 1, 3, 3}), 1.0 / 7.0);
  EXPECT_DOUBLE_EQ(box_iou({0, 0, 2, 2}, {0, 0, 2, 2}), 1.0);
  EXPECT_EQ(box_iou({0, 0, 1, 1}, {1, 0, 2, 1}), 0.0);
  EXPECT_EQ(box_iou({0, 0, 0, 0}, {0, 0, 0, 0}), 0.0);
}

TEST(BoxIou, SymmetricAndBounded) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 500; ++t) {
    const auto a = oracle::random_box(rng, 30, 30).bbox(), b = oracle::random_box(rng, 30, 30).bbox();
    const double ab = box_iou(a, b);
    EXPECT_EQ(ab, box_iou(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(BoxIou, MatchesPixelCount) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 300; ++t) {
    const auto a = oracle::random_box(rng, 25, 20), b = oracle::random_box(rng, 25, 20);
    EXPECT_NEAR(box_iou(a.bbox(), b.bbox()), oracle::box_iou(a, b), 1e-12);
    EXPECT_NEAR(containment(a.bbox(), b.bbox()), oracle::containment(a, b), 1e-12);
  }
}

TEST(Containment, Asymmetric) {
  const BBox small{2, 2, 4, 4}, big{0, 0, 10, 10};
  EXPECT_EQ(containment(small, big), 1.0);
  EXPECT_DOUBLE_EQ(containment(big, small), 0.04);
}

TEST(MaskIou, BothEmptyThrows) {
  EXPECT_THROW(mask_iou(PixelMask(4, 4), PixelMask(4, 4)), EmptyError);
  EXPECT_EQ(mask_iou(PixelMask(4, 4), PixelMask::from_rect(4, 4, 0, 0, 1, 1)), 0.0);
}

TEST(MinBBox, MatchesScan) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 300; ++t) {
    auto g = oracle::random_grid(rng, 1 + int(rng() % 20), 1 + int(rng() % 20), 1, 3);
    const auto b = oracle::bounds(g);
    EXPECT_EQ(min_bbox(g.mask()), b.bbox());
  }
  EXPECT_THROW(min_bbox(PixelMask(3, 3)), EmptyError);
}

TEST(MinBBox, RunWrappingRows) {
  // Run from the last column of row 0 into the first column of row 1.
  std::vector<std::uint8_t> bits = {0, 0, 1, 1, 0, 0};
  EXPECT_EQ(min_bbox(PixelMask::from_dense(3, 2, bits)), (BBox{0, 0, 3, 2}));
}

TEST(Translate, MatchesShiftedGrid) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 200; ++t) {
    auto g = oracle::random_grid(rng, 15, 11, 2, 4);
    const int dx = int(rng() % 21) - 10, dy = int(rng() % 15) - 7;
    EXPECT_EQ(oracle::grid_of(translate(g.mask(), dx, dy)).v, oracle::shifted(g, dx, dy).v);
  }
}

TEST(Components, MatchBfs) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 300; ++t) {
    auto g = oracle::random_grid(rng, 2 + int(rng() % 25), 2 + int(rng() % 25), 3, 12);
    const auto got = connected_components(g.mask());
    const auto want = oracle::components(g);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(oracle::grid_of(got[i]).v, want[i].v);
  }
}

TEST(Components, DiagonalPixelsAreSeparate) {
  std::vector<std::uint8_t> bits = {1, 0, 0, 1};
  EXPECT_EQ(connected_components(PixelMask::from_dense(2, 2, bits)).size(), 2u);
}

TEST(Components, UShapeJoinsThroughBottom) {
  std::vector<std::uint8_t> bits = {1, 0, 1,
                                    1, 0, 1,
                                    1, 1, 1};
  EXPECT_EQ(connected_components(PixelMask::from_dense(3, 3, bits)).size(), 1u);
}

TEST(Rasterize, PixelCentersInsideBox) {
  const auto m = rasterize({0.4, 0.6, 2.5, 2.4}, 5, 5);
  // Centers x+0.5 in [0.4, 2.5): x = 0, 1. y+0.5 in [0.6, 2.4): y = 1.
  EXPECT_EQ(min_bbox(m), (BBox{0, 1, 2, 2}));
}
