#include <gtest/gtest.h>

#include "desens/desens.hpp"

using namespace desens;

TEST(Config, DefaultsValidate) {
  RunConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.pipeline.name(), "DSJ&KFJ");
  EXPECT_EQ(cfg.pipeline.tracker.window, 4);
  EXPECT_EQ(cfg.seeds, 20);
}

TEST(Config, MergeOverridesOnlyGivenKeys) {
  RunConfig cfg;
  merge_config(cfg, detail::parse_json_text(R"({
    "tracker": {"window": 6},
    "joint": {"dsj_method": "dual-confidence"},
    "weights": [0.2, 0.6, 0.2],
    "style": {"mode": "solid", "color": [1, 2, 3]},
    "seeds": 5
  })"));
  EXPECT_EQ(cfg.pipeline.tracker.window, 6);
  EXPECT_EQ(cfg.pipeline.tracker.process_noise, 1e-2);
  EXPECT_EQ(cfg.pipeline.joint.dsj_method, DsjMethod::DualConfidence);
  EXPECT_EQ(cfg.weights.mid, 0.6);
  EXPECT_EQ(cfg.style.color[2], 3);
  EXPECT_EQ(cfg.seeds, 5);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, RoundTripsThroughJson) {
  RunConfig cfg;
  cfg.pipeline.tracker.window = 3;
  cfg.noise.drop_prob = 0.25;
  RunConfig back;
  merge_config(back, to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
}

TEST(Config, RejectsUnknownKeys) {
  RunConfig cfg;
  EXPECT_THROW(merge_config(cfg, detail::parse_json_text(R"({"trackr": {}})")), ParseError);
  EXPECT_THROW(merge_config(cfg, detail::parse_json_text(R"({"tracker": {"windw": 3}})")), ParseError);
}

TEST(Config, RejectsWrongTypes) {
  RunConfig cfg;
  EXPECT_THROW(merge_config(cfg, detail::parse_json_text(R"({"tracker": {"window": "4"}})")), ParseError);
  EXPECT_THROW(merge_config(cfg, detail::parse_json_text(R"({"weights": [1, 2]})")), ParseError);
  EXPECT_THROW(merge_config(cfg, detail::parse_json_text(R"({"joint": {"dsj_method": "magic"}})")), ParseError);
}

TEST(Config, ValidationCatchesBadValues) {
  RunConfig cfg;
  cfg.weights = {0.5, 0.5, 0.5};
  EXPECT_THROW(cfg.validate(), InvariantError);
  cfg = {};
  cfg.pipeline.joint.dsj_iou_threshold = 1.5;
  EXPECT_THROW(cfg.validate(), InvariantError);
  cfg = {};
  cfg.style.mode = "blur";
  EXPECT_THROW(cfg.validate(), InvariantError);
}

TEST(Config, MakeStyle) {
  StyleConfig s;
  auto none = [](const std::string&) -> Image { throw DataError("no icon"); };
  EXPECT_EQ(std::get<Mosaic>(make_style(s, none)).block, 8);
  s.mode = "solid";
  EXPECT_TRUE(std::holds_alternative<Solid>(make_style(s, none)));
  s.mode = "icon";
  EXPECT_THROW(make_style(s, none), InvariantError);
  s.icon_path = "x.ppm";
  EXPECT_EQ(std::get<Icon>(make_style(s, [](const std::string&) { return Image(2, 2); })).image.width, 2);
}
