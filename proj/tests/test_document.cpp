#include <gtest/gtest.h>

#include "desens/desens.hpp"

using namespace desens;

namespace {

const char* kGt = R"({
  "sequence_id": "s",
  "width": 4,
  "height": 4,
  "frames": [
    {"frame_index": 0, "image_path": "a.ppm", "objects": [
      {"category": "pedestrian", "bbox": [0, 0, 4, 4], "track_id": 0},
      {"category": "face", "bbox": [0, 0, 2, 3], "track_id": 1,
       "tri": {"above": [0, 2, 14], "mid": [4, 2, 10], "below": [8, 2, 6]}},
      {"category": "plate", "bbox": [2, 2, 4, 4], "mask_bits": "0000000000110011"}
    ]}
  ]
})";

}  // namespace

TEST(Document, ParsesGroundTruth) {
  const auto seq = parse_sequence(kGt);
  ASSERT_EQ(seq.frames.size(), 1u);
  const auto& objs = seq.frames[0].objects;
  ASSERT_EQ(objs.size(), 3u);
  EXPECT_EQ(objs[1].category, Category::Face);
  // A face without an explicit mask gets the tri-region union.
  ASSERT_TRUE(objs[1].mask);
  EXPECT_EQ(objs[1].mask->area(), 6u);
  EXPECT_EQ(objs[2].mask->area(), 4u);
  EXPECT_EQ(*seq.frames[0].image_path, "a.ppm");
}

TEST(Document, RoundTripIsByteStable) {
  const auto seq = parse_sequence(kGt);
  const auto text = serialize_sequence(seq);
  EXPECT_EQ(parse_sequence(text), seq);
  EXPECT_EQ(serialize_sequence(parse_sequence(text)), text);
}

TEST(Document, RejectsUnknownKeys) {
  auto j = detail::parse_json_text(kGt);
  j["frames"][0]["objects"][0]["colour"] = "red";
  EXPECT_THROW(parse_sequence(j.dump()), ParseError);
}

TEST(Document, RejectsMalformedJson) { EXPECT_THROW(parse_sequence("{"), ParseError); }

TEST(Document, RejectsBadRle) {
  auto j = detail::parse_json_text(kGt);
  j["frames"][0]["objects"][2].erase("mask_bits");
  j["frames"][0]["objects"][2]["mask_rle"] = {3, 3};
  EXPECT_THROW(parse_sequence(j.dump()), InvariantError);
}

TEST(Document, RejectsOverlappingTriRegions) {
  auto j = detail::parse_json_text(kGt);
  j["frames"][0]["objects"][1]["tri"]["mid"] = {0, 2, 14};
  EXPECT_THROW(parse_sequence(j.dump()), InvariantError);
}

TEST(Document, GroundTruthFaceNeedsTri) {
  auto j = detail::parse_json_text(kGt);
  j["frames"][0]["objects"][1].erase("tri");
  j["frames"][0]["objects"][1]["mask_bits"] = "1100110011000000";
  EXPECT_THROW(parse_sequence(j.dump()), InvariantError);
}

TEST(Document, FramesMustAscend) {
  auto j = detail::parse_json_text(kGt);
  j["frames"].push_back(j["frames"][0]);
  EXPECT_THROW(parse_sequence(j.dump()), InvariantError);
}

TEST(Document, DuplicateTrackIdRejected) {
  auto j = detail::parse_json_text(kGt);
  j["frames"][0]["objects"][2]["track_id"] = 0;
  EXPECT_THROW(parse_sequence(j.dump()), InvariantError);
}

TEST(Document, PredictionsNeedConfidence) {
  auto j = detail::parse_json_text(kGt);
  EXPECT_THROW(parse_predictions(j.dump()), InvariantError);
  for (auto& o : j["frames"][0]["objects"]) o["confidence"] = 0.9;
  j["frames"][0]["seg"] = {{"face", {16}}, {"plate", {0, 16}}};
  const auto p = parse_predictions(j.dump());
  ASSERT_TRUE(p.sequence.frames[0].seg);
  EXPECT_EQ(p.sequence.frames[0].seg->plate.area(), 16u);
  EXPECT_EQ(parse_predictions(serialize_predictions(p)), p);
}

TEST(Document, MaskDimensionsChecked) {
  auto j = detail::parse_json_text(kGt);
  j["frames"][0]["objects"][2]["mask_bits"] = "00000000001100110";
  EXPECT_THROW(parse_sequence(j.dump()), InvariantError);
}

TEST(Document, ConfidenceRange) {
  auto j = detail::parse_json_text(kGt);
  j["frames"][0]["objects"][0]["confidence"] = 1.5;
  EXPECT_THROW(parse_sequence(j.dump()), InvariantError);
}
