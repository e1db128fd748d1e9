#include <gtest/gtest.h>

#include <random>

#include "desens/desens.hpp"

using namespace desens;

namespace {

constexpr int W = 200, H = 200;

DesensRegion face_at(double cx, double cy, double size = 10.0, double conf = 0.9) {
  const auto b = BBox::from_center(cx, cy, size, size);
  return {Category::Face, rasterize(b, W, H), b, conf, RegionOrigin::Detection, std::nullopt};
}

/// Feeds one face moving +2 px/frame along x; frames in `gaps` have no detection.
std::vector<StepResult> run(const TrackerConfig& cfg, int frames, const std::vector<int>& gaps) {
  Tracker tr(cfg);
  std::vector<StepResult> out;
  for (int f = 0; f < frames; ++f) {
    std::vector<DesensRegion> dets;
    if (std::find(gaps.begin(), gaps.end(), f) == gaps.end()) dets.push_back(face_at(40 + 2.0 * f, 50));
    out.push_back(tr.step_frame(f, dets));
  }
  return out;
}

}  // namespace

TEST(Kalman, PredictsConstantVelocity) {
  TrackerConfig cfg;
  auto t = spawn_track({0, 0}, {10, 10}, Category::Face, 0, cfg);
  for (int k = 1; k < 4; ++k) t = update(predict(t, cfg), {2.0 * k, -1.0 * k}, {10, 10}, cfg);
  const auto p = predict(t, cfg);
  EXPECT_NEAR(p.state(0), 8.0, 0.5);
  EXPECT_NEAR(p.state(1), -4.0, 0.5);
  EXPECT_NEAR(p.state(2), 2.0, 0.5);
}

TEST(Kalman, CovarianceStaysSymmetricPositive) {
  TrackerConfig cfg;
  auto t = spawn_track({5, 5}, {10, 10}, Category::Face, 0, cfg);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 3);
  for (int k = 0; k < 200; ++k) {
    t = update(predict(t, cfg), {5 + n(rng), 5 + n(rng)}, {10, 10}, cfg);
    EXPECT_LT((t.covariance - t.covariance.transpose()).norm(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(t.covariance);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Kalman, SizeFollowsEma) {
  TrackerConfig cfg;
  auto t = spawn_track({0, 0}, {10, 20}, Category::Face, 0, cfg);
  t = update(predict(t, cfg), {0, 0}, {20, 40}, cfg);
  EXPECT_DOUBLE_EQ(t.smoothed_size(0), 15.0);
  EXPECT_DOUBLE_EQ(t.smoothed_size(1), 30.0);
}

TEST(Kalman, NonFiniteMeasurementThrows) {
  TrackerConfig cfg;
  auto t = spawn_track({0, 0}, {10, 10}, Category::Face, 0, cfg);
  EXPECT_THROW(update(t, {std::nan(""), 0}, {10, 10}, cfg), DataError);
}

TEST(Tracker, CoastsShortGap) {
  TrackerConfig cfg;
  cfg.window = 4;
  const auto out = run(cfg, 12, {6, 7, 8});
  for (int f = 6; f <= 8; ++f) {
    ASSERT_EQ(out[f].emitted.size(), 1u) << "frame " << f;
    const auto& r = out[f].emitted[0];
    EXPECT_EQ(r.origin, RegionOrigin::Coasted);
    EXPECT_NEAR(r.source_box.center_x(), 40 + 2.0 * f, 0.5);
    // The mask is the last one shifted along with the prediction.
    EXPECT_NEAR(min_bbox(r.mask).center_x(), 40 + 2.0 * f, 1.0);
  }
  // The same track resumes.
  EXPECT_EQ(out[9].emitted[0].track_id, out[5].emitted[0].track_id);
}

TEST(Tracker, DropsLongGap) {
  TrackerConfig cfg;
  cfg.window = 4;
  const auto out = run(cfg, 12, {6, 7, 8, 9});
  for (int f = 6; f <= 8; ++f) EXPECT_EQ(out[f].emitted.size(), 1u);
  EXPECT_TRUE(out[9].emitted.empty());
  // A new track starts after the drop.
  EXPECT_NE(out[10].emitted[0].track_id, out[5].emitted[0].track_id);
}

TEST(Tracker, YoungTrackDoesNotCoast) {
  TrackerConfig cfg;
  cfg.window = 4;
  // Three updates only; maturity needs age >= 4.
  const auto out = run(cfg, 6, {3, 4});
  EXPECT_TRUE(out[3].emitted.empty());
  EXPECT_TRUE(out[4].emitted.empty());
}

TEST(Tracker, WindowOneNeverCoasts) {
  TrackerConfig cfg;
  cfg.window = 1;
  const auto out = run(cfg, 10, {7});
  EXPECT_TRUE(out[7].emitted.empty());
}

TEST(Tracker, FramesMustAscend) {
  Tracker tr;
  tr.step_frame(3, {});
  EXPECT_THROW(tr.step_frame(3, {}), DataError);
}

TEST(Tracker, CategoriesNotAssociated) {
  Tracker tr;
  auto plate = face_at(50, 50);
  plate.category = Category::Plate;
  tr.step_frame(0, std::vector<DesensRegion>{face_at(50, 50)});
  tr.step_frame(1, std::vector<DesensRegion>{plate});
  EXPECT_EQ(tr.tracks().size(), 2u);
}

TEST(Tracker, GateRejectsFarDetection) {
  TrackerConfig cfg;
  cfg.gate_distance = 5.0;
  Tracker tr(cfg);
  tr.step_frame(0, std::vector<DesensRegion>{face_at(50, 50)});
  tr.step_frame(1, std::vector<DesensRegion>{face_at(60, 50)});
  EXPECT_EQ(tr.tracks().size(), 2u);
}

TEST(Tracker, CoastConflictAudited) {
  TrackerConfig cfg;
  Tracker tr(cfg);
  for (int f = 0; f < 5; ++f) tr.step_frame(f, std::vector<DesensRegion>{face_at(40 + 2.0 * f, 50)});
  const AuditEntry rejected{5, Category::Face, BBox::from_center(50, 50, 10, 10), 0.3, RejectReason::NoCarrier,
                            std::nullopt};
  const auto r = tr.step_frame(5, {}, std::span<const AuditEntry>(&rejected, 1));
  ASSERT_EQ(r.emitted.size(), 1u);
  ASSERT_EQ(r.conflicts.size(), 1u);
  EXPECT_EQ(r.conflicts[0].reason, RejectReason::CoastConflict);
}

TEST(Tracker, SmoothingReducesJitter) {
  double raw = 0, smooth = 0;
  for (int s = 0; s < 20; ++s) {
    std::mt19937_64 rng(s);
    std::normal_distribution<double> n(0, 2);
    Tracker tr;
    for (int f = 0; f < 40; ++f) {
      const double gx = 30 + 3.0 * f, gy = 100 + 0.5 * f;
      const double mx = gx + n(rng), my = gy + n(rng);
      const auto out = tr.step_frame(f, std::vector<DesensRegion>{face_at(mx, my, 12)});
      ASSERT_EQ(out.emitted.size(), 1u);
      const auto& b = out.emitted[0].source_box;
      raw += (mx - gx) * (mx - gx) + (my - gy) * (my - gy);
      smooth += (b.center_x() - gx) * (b.center_x() - gx) + (b.center_y() - gy) * (b.center_y() - gy);
    }
  }
  EXPECT_LT(smooth, raw);
}

TEST(TrackerConfig, Validation) {
  TrackerConfig c;
  c.window = 0;
  EXPECT_THROW(c.validate(), InvariantError);
  c = {};
  c.size_alpha = 0;
  EXPECT_THROW(c.validate(), InvariantError);
  c = {};
  EXPECT_EQ(c.coast_maturity(), 4);
  c.window = 1;
  EXPECT_EQ(c.coast_maturity(), 2);
}
