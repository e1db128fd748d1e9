#include <gtest/gtest.h>

#include "desens/desens.hpp"

using namespace desens;

TEST(Harness, GeneratedSceneValidates) {
  SceneSpec spec;
  spec.length = 10;
  const auto scene = generate(spec);
  EXPECT_NO_THROW(validate(scene.gt, DocumentKind::GroundTruth));
  EXPECT_EQ(scene.frames.size(), 10u);
  EXPECT_EQ(scene.frames[0].width, spec.width);
  // A carrier and its sensitive object per lane, every frame.
  for (const auto& f : scene.gt.frames) {
    EXPECT_EQ(f.objects.size(), std::size_t(2 * (spec.n_pedestrians + spec.n_vehicles)));
  }
}

TEST(Harness, Deterministic) {
  SceneSpec spec;
  spec.length = 5;
  EXPECT_EQ(generate_annotations(spec), generate_annotations(spec));
  EXPECT_EQ(corrupt(generate_annotations(spec), NoiseSpec{}), corrupt(generate_annotations(spec), NoiseSpec{}));
  auto other = spec;
  other.seed = 2;
  EXPECT_NE(generate_annotations(spec), generate_annotations(other));
}

TEST(Harness, FaceTriSplitsByRows) {
  SceneSpec spec;
  spec.length = 1;
  const auto gt = generate_annotations(spec);
  for (const auto& o : gt.frames[0].objects) {
    if (o.category != Category::Face) continue;
    const auto& t = *o.tri;
    EXPECT_EQ(min_bbox(t.above).y_max, min_bbox(t.mid).y_min);
    EXPECT_EQ(min_bbox(t.mid).y_max, min_bbox(t.below).y_min);
    EXPECT_EQ(min_bbox(*o.mask), o.bbox);
  }
}

TEST(Harness, NoiselessPredictionsScorePerfect) {
  SceneSpec spec;
  spec.length = 8;
  const auto gt = generate_annotations(spec);
  const auto preds = corrupt(gt, NoiseSpec::noiseless());
  for (const auto& f : preds.sequence.frames) ASSERT_TRUE(f.seg);
  const auto s = desens_scores(preds.sequence, gt);
  EXPECT_EQ(s.mioff, 1.0);
  EXPECT_EQ(s.ioff50, 1.0);
  EXPECT_EQ(s.ioff75, 1.0);
  const auto piped = run_pipeline(preds, full_pipeline());
  EXPECT_EQ(desens_scores(piped.output.sequence, gt).mioff, 1.0);
}

TEST(Harness, NoiseLowersScore) {
  SceneSpec spec;
  const auto gt = generate_annotations(spec);
  EXPECT_LT(desens_scores(corrupt(gt, NoiseSpec{}).sequence, gt).mioff, 1.0);
}

TEST(Harness, InfeasibleSceneThrows) {
  SceneSpec spec;
  spec.height = 40;
  EXPECT_THROW(generate_annotations(spec), InvariantError);
}

TEST(Ablation, ParallelMatchesSerial) {
  SceneSpec spec;
  spec.length = 12;
  auto plan = default_plan(full_pipeline(), 3, {2, 4});
  const auto serial = run_ablation(spec, NoiseSpec{}, plan);
  plan.jobs = 3;
  const auto parallel = run_ablation(spec, NoiseSpec{}, plan);
  EXPECT_EQ(to_json(serial).dump(), to_json(parallel).dump());
  EXPECT_EQ(serial.aggregates.size(), 8u);
  EXPECT_EQ(serial.find("window-sweep", "DSJ&KFJ", 2).n, 3);
}
