#pragma once

// Domain types shared by every module: categories, boxes, annotated object
// instances and frame/sequence containers.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "desens/error.hpp"
#include "desens/mask.hpp"

namespace desens {

enum class Category { Pedestrian, Car, Face, Plate };

inline constexpr std::array<Category, 4> kAllCategories = {Category::Pedestrian, Category::Car,
                                                           Category::Face, Category::Plate};
inline constexpr std::array<Category, 2> kSensitiveCategories = {Category::Face, Category::Plate};

constexpr bool is_sensitive(Category c) noexcept {
  return c == Category::Face || c == Category::Plate;
}

/// Pedestrians carry faces, cars carry plates.
constexpr Category carrier_of(Category sensitive) noexcept {
  return sensitive == Category::Face ? Category::Pedestrian : Category::Car;
}

constexpr std::string_view to_string(Category c) noexcept {
  switch (c) {
    case Category::Pedestrian: return "pedestrian";
    case Category::Car: return "car";
    case Category::Face: return "face";
    case Category::Plate: return "plate";
  }
  return "?";
}

inline Category category_from_string(std::string_view s) {
  for (Category c : kAllCategories) {
    if (to_string(c) == s) return c;
  }
  throw ParseError("unknown category \"" + std::string(s) + "\"");
}

/// Axis-aligned box in continuous pixel coordinates, origin top-left.
struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return std::max(0.0, width()) * std::max(0.0, height()); }
  double center_x() const noexcept { return 0.5 * (x_min + x_max); }
  double center_y() const noexcept { return 0.5 * (y_min + y_max); }
  bool valid() const noexcept {
    return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
           std::isfinite(y_max) && x_min < x_max && y_min < y_max;
  }

  static BBox from_center(double cx, double cy, double w, double h) noexcept {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  BBox clamped(int width, int height) const noexcept {
    return {std::clamp(x_min, 0.0, double(width)), std::clamp(y_min, 0.0, double(height)),
            std::clamp(x_max, 0.0, double(width)), std::clamp(y_max, 0.0, double(height))};
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Pixels whose centers fall inside the box.
inline PixelMask rasterize(const BBox& b, int width, int height) {
  const auto lo = [](double v) { return static_cast<int>(std::ceil(v - 0.5)); };
  return PixelMask::from_rect(width, height, lo(b.x_min), lo(b.y_min), lo(b.x_max), lo(b.y_max));
}

/// Face split into above-the-eyes / eyes-to-nose / below-the-nose regions.
struct FaceTriMask {
  PixelMask above;
  PixelMask mid;
  PixelMask below;
  bool occluded = false;

  const PixelMask& region(int i) const { return i == 0 ? above : (i == 1 ? mid : below); }
  PixelMask union_mask() const { return mask_or(mask_or(above, mid), below); }

  friend bool operator==(const FaceTriMask&, const FaceTriMask&) = default;
};

struct ObjectInstance {
  Category category = Category::Pedestrian;
  BBox bbox;
  std::optional<PixelMask> mask;
  std::optional<FaceTriMask> tri;
  std::optional<int> track_id;
  std::optional<double> confidence;
  /// Emitted by the tracker while coasting over a missed detection.
  bool coasted = false;

  friend bool operator==(const ObjectInstance&, const ObjectInstance&) = default;
};

/// Per-category output of a segmentation network for one frame.
struct SegLabelMap {
  PixelMask face;
  PixelMask plate;

  const PixelMask& of(Category c) const { return c == Category::Face ? face : plate; }
  friend bool operator==(const SegLabelMap&, const SegLabelMap&) = default;
};

struct FrameAnnotation {
  int frame_index = 0;
  std::optional<std::string> image_path;
  std::vector<ObjectInstance> objects;
  /// Only present in prediction documents.
  std::optional<SegLabelMap> seg;

  friend bool operator==(const FrameAnnotation&, const FrameAnnotation&) = default;
};

struct SequenceAnnotation {
  std::string sequence_id;
  int width = 0;
  int height = 0;
  std::vector<FrameAnnotation> frames;

  friend bool operator==(const SequenceAnnotation&, const SequenceAnnotation&) = default;
};

/// Model-output analogue of a SequenceAnnotation: every object has a
/// confidence and frames may carry segmentation label maps.
struct PredictionSet {
  SequenceAnnotation sequence;

  friend bool operator==(const PredictionSet&, const PredictionSet&) = default;
};

enum class DocumentKind { GroundTruth, Predictions };

}  // namespace desens
