#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "desens/desens.hpp"

using namespace desens;

namespace {

Tensor3<double> single(double v) { return Tensor3<double>(1, 1, 1, v); }

ObjectInstance sensitive(Category c, BBox b) {
  ObjectInstance o;
  o.category = c;
  o.bbox = b;
  return o;
}

}  // namespace

TEST(FocalLoss, ScalarPositive) {
  const auto v = focal_keypoint_loss(single(0.5), single(1.0), LossConfig{});
  EXPECT_NEAR(v.value, 0.25 * std::log(2.0), 1e-12);
  // d/dp of -(1-p)^2 log p at 0.5: 2(0.5)log(0.5) - 0.25/0.5.
  EXPECT_NEAR(v.grad.data[0], std::log(0.5) - 0.5, 1e-12);
}

TEST(FocalLoss, ZeroAtBinaryTargets) {
  Tensor3<double> y(2, 4, 4);
  y(0, 1, 1) = 1;
  y(1, 2, 3) = 1;
  EXPECT_LT(focal_keypoint_loss(y, y, LossConfig{}).value, 1e-5);
}

TEST(FocalLoss, NeedsPositives) {
  EXPECT_THROW(focal_keypoint_loss(single(0.5), single(0.5), LossConfig{}), EmptyError);
}

TEST(FocalLoss, ClampedGradientIsZero) {
  Tensor3<double> y(1, 1, 2);
  y.data = {1.0, 0.0};
  Tensor3<double> p(1, 1, 2);
  p.data = {0.0, 1.0};
  const auto v = focal_keypoint_loss(p, y, LossConfig{});
  EXPECT_TRUE(std::isfinite(v.value));
  EXPECT_EQ(v.grad.data[0], 0.0);
  EXPECT_EQ(v.grad.data[1], 0.0);
}

TEST(FocalLoss, PenaltyReducedNearPeaks) {
  // Same prediction, target closer to 1 costs less.
  Tensor3<double> p(1, 1, 2, 0.6), near(1, 1, 2), far(1, 1, 2);
  near.data = {1.0, 0.9};
  far.data = {1.0, 0.1};
  EXPECT_LT(focal_keypoint_loss(p, near, LossConfig{}).value, focal_keypoint_loss(p, far, LossConfig{}).value);
}

TEST(FocalLoss, GradientMatchesFiniteDifference) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Tensor3<long double> y(2, 5, 5), p(2, 5, 5);
  for (auto& v : y.data) v = u(rng);
  y(0, 2, 2) = 1;
  for (auto& v : p.data) v = u(rng);
  const LossConfig cfg;
  const auto g = focal_keypoint_loss(p, y, cfg).grad;
  const auto err = max_gradient_error<long double>(
      [&](const Tensor3<long double>& x) { return focal_keypoint_loss(x, y, cfg).value; }, p, g, 1e-6L);
  EXPECT_LT(err, 1e-6L);
}

TEST(SegLoss, NeedsThreeChannels) {
  Tensor3<double> t(2, 2, 2);
  EXPECT_THROW(seg_focal_loss(t, t, LossConfig{}), DimensionError);
}

TEST(L1Loss, MeanAbsoluteAndSubgradient) {
  KeypointTarget a, b;
  a.ix = 0, a.iy = 0, a.off_x = 0.25, a.off_y = 0.5, a.w = 10, a.h = 20;
  b.ix = 2, b.iy = 1, b.off_x = 0.75, b.off_y = 0.0, b.w = 4, b.h = 6;
  Tensor3<double> p(2, 3, 3);
  p(0, 0, 0) = 0.25;  // exact: subgradient 0
  p(1, 0, 0) = 1.0;
  p(0, 1, 2) = 0.5;
  p(1, 1, 2) = 0.0;
  const auto v = offset_loss(p, {a, b});
  EXPECT_DOUBLE_EQ(v.value, (0.0 + 0.5 + 0.25 + 0.0) / 2);
  EXPECT_EQ(v.grad(0, 0, 0), 0.0);
  EXPECT_EQ(v.grad(1, 0, 0), 0.5);
  EXPECT_EQ(v.grad(0, 1, 2), -0.5);
  const auto [off, size] = target_tensors({a, b}, 3, 3);
  EXPECT_EQ(offset_loss(off, {a, b}).value, 0.0);
  EXPECT_EQ(size_loss(size, {a, b}).value, 0.0);
  EXPECT_THROW(size_loss(size, {}), EmptyError);
}

TEST(TotalLoss, ExactWeightedSum) {
  EXPECT_EQ(total_loss({1, 2, 3, 4}, LossConfig{}), 5.3);
  LossComponents bad{1, std::nan(""), 0, 0};
  EXPECT_THROW(total_loss(bad, LossConfig{}), InvariantError);
}

TEST(Targets, PeakIsOneAndOffsetsDecode) {
  FrameAnnotation f;
  f.objects = {sensitive(Category::Face, {10, 10, 30, 34}), sensitive(Category::Plate, {50.5, 40, 70.5, 47}),
               sensitive(Category::Pedestrian, {0, 0, 40, 60})};
  const LossConfig cfg;
  const auto t = render_targets(f, 80, 64, cfg);
  ASSERT_EQ(t.keypoints.size(), 2u);
  const auto& k = t.keypoints[0];
  EXPECT_EQ(k.ix, 5);
  EXPECT_EQ(k.iy, 5);
  EXPECT_EQ(t.heatmap(0, 5, 5), 1.0);
  EXPECT_LT(t.heatmap(0, 5, 6), 1.0);
  EXPECT_DOUBLE_EQ(t.keypoints[1].off_x, 60.5 / 4 - 15);
  const auto [off, size] = target_tensors(t.keypoints, 16, 20);
  const auto dets = decode_detections(t.heatmap, size, off, 2, cfg);
  ASSERT_EQ(dets.size(), 2u);
  EXPECT_EQ(dets[0].category, Category::Face);
  EXPECT_NEAR(dets[0].cx, 20.0, 1e-12);
  EXPECT_EQ(dets[1].bbox.width(), 20.0);
  EXPECT_NEAR(dets[1].cx, 60.5, 1e-12);
}

TEST(Targets, SegOneHot) {
  FrameAnnotation f;
  f.objects = {sensitive(Category::Face, {0, 0, 8, 8})};
  const auto t = render_targets(f, 16, 16, LossConfig{});
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      EXPECT_EQ(t.seg(0, y, x) + t.seg(1, y, x) + t.seg(2, y, x), 1.0);
    }
  }
  EXPECT_EQ(t.seg(0, 1, 1), 1.0);
  EXPECT_EQ(t.seg(2, 2, 2), 1.0);
}

TEST(Targets, CenterOutsideThrows) {
  FrameAnnotation f;
  f.objects = {sensitive(Category::Face, {70, 0, 100, 8})};
  EXPECT_THROW(render_targets(f, 80, 64, LossConfig{}), DataError);
  EXPECT_THROW(render_targets(FrameAnnotation{}, 81, 64, LossConfig{}), DimensionError);
}

TEST(Decode, TiesBrokenByChannelThenPosition) {
  Tensor3<double> heat(2, 4, 4), size(2, 4, 4), off(2, 4, 4);
  heat(1, 0, 0) = 0.5;
  heat(0, 3, 3) = 0.5;
  heat(0, 0, 3) = 0.5;
  const auto d = decode_detections(heat, size, off, 2, LossConfig{});
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].channel, 0);
  EXPECT_EQ(d[0].iy, 0);
  EXPECT_EQ(d[1].iy, 3);
}

TEST(LossCheck, PassesForDefaultConfig) {
  const auto r = run_losses_check(0);
  EXPECT_TRUE(r.passed()) << r.max_fd_error;
  EXPECT_NEAR(r.total, total_loss(r.components, LossConfig{}), 0.0);
}
