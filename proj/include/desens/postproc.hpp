#pragma once

// Joint desensitization of one frame:
//   DJ  keeps a face/plate detection when it is confident on its own, or
//       when it sits inside a detected pedestrian/car.
//   DSJ pairs segmentation blobs with detections and accepts a pair only
//       when the blob's minimum bounding box overlaps the detection box with
//       IoU strictly above the threshold.
// Everything that is dropped lands in an audit list with a reason code.

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "desens/core.hpp"
#include "desens/error.hpp"
#include "desens/geometry.hpp"

namespace desens {

enum class DsjMethod { MinBBoxIoU, DualConfidence };

/// How DJ scores a sensitive box against a carrier box.
enum class DjMeasure { Containment, SymmetricIoU };

struct JointConfig {
  double dj_containment_threshold = 0.5;
  double dj_high_confidence = 0.7;
  DjMeasure dj_measure = DjMeasure::Containment;
  DsjMethod dsj_method = DsjMethod::MinBBoxIoU;
  /// Strict: a pair needs IoU > threshold.
  double dsj_iou_threshold = 0.5;
  double dual_det_conf = 0.7;
  double dual_seg_iou = 0.7;

  void validate() const {
    for (double v : {dj_containment_threshold, dj_high_confidence, dsj_iou_threshold, dual_det_conf,
                     dual_seg_iou}) {
      if (!(v >= 0.0 && v <= 1.0)) throw InvariantError("joint thresholds must lie in [0,1]");
    }
  }
  friend bool operator==(const JointConfig&, const JointConfig&) = default;
};

/// Where a region's mask came from.
enum class RegionOrigin { Detection, Segmentation, Coasted };

struct DesensRegion {
  Category category = Category::Face;
  PixelMask mask;
  BBox source_box;
  double confidence = 0.0;
  RegionOrigin origin = RegionOrigin::Detection;
  std::optional<int> track_id;
};

enum class RejectReason { NoCarrier, LowIou, UnpairedComponent, LowConfidence, CoastConflict };

constexpr std::string_view to_string(RejectReason r) noexcept {
  switch (r) {
    case RejectReason::NoCarrier: return "no-carrier";
    case RejectReason::LowIou: return "low-iou";
    case RejectReason::UnpairedComponent: return "unpaired-component";
    case RejectReason::LowConfidence: return "low-confidence";
    case RejectReason::CoastConflict: return "coast-conflict";
  }
  return "?";
}

struct AuditEntry {
  int frame_index = 0;
  Category category = Category::Face;
  BBox box;
  double confidence = 0.0;
  RejectReason reason = RejectReason::NoCarrier;
  /// Best containment / IoU seen for the rejected item, when one applies.
  std::optional<double> score;
};

struct DjResult {
  std::vector<ObjectInstance> kept;
  std::vector<ObjectInstance> carriers;
  std::vector<AuditEntry> rejected;
};

namespace detail {

inline double dj_score(const BBox& sensitive, const BBox& carrier, DjMeasure m) {
  return m == DjMeasure::Containment ? containment(sensitive, carrier) : box_iou(sensitive, carrier);
}

inline void dj_category(std::span<const ObjectInstance> sensitive,
                        std::span<const ObjectInstance> carriers, const JointConfig& cfg,
                        int frame_index, DjResult& out) {
  for (const auto& s : sensitive) {
    const double conf = s.confidence.value_or(0.0);
    if (conf >= cfg.dj_high_confidence) {
      out.kept.push_back(s);
      continue;
    }
    double best = 0.0;
    for (const auto& c : carriers) best = std::max(best, dj_score(s.bbox, c.bbox, cfg.dj_measure));
    if (best > cfg.dj_containment_threshold) {
      out.kept.push_back(s);
    } else {
      out.rejected.push_back({frame_index, s.category, s.bbox, conf, RejectReason::NoCarrier, best});
    }
  }
}

}  // namespace detail

/// Local/global detection pairing. Carriers pass through untouched.
inline DjResult dj_filter(std::span<const ObjectInstance> faces,
                          std::span<const ObjectInstance> persons,
                          std::span<const ObjectInstance> plates,
                          std::span<const ObjectInstance> vehicles, const JointConfig& cfg,
                          int frame_index = 0) {
  DjResult out;
  detail::dj_category(faces, persons, cfg, frame_index, out);
  detail::dj_category(plates, vehicles, cfg, frame_index, out);
  out.carriers.assign(persons.begin(), persons.end());
  out.carriers.insert(out.carriers.end(), vehicles.begin(), vehicles.end());
  return out;
}

/// Same as above on a mixed per-frame object list.
inline DjResult dj_filter(std::span<const ObjectInstance> objects, const JointConfig& cfg,
                          int frame_index = 0) {
  std::vector<ObjectInstance> by_cat[4];
  for (const auto& o : objects) by_cat[static_cast<int>(o.category)].push_back(o);
  auto get = [&](Category c) { return std::span<const ObjectInstance>(by_cat[static_cast<int>(c)]); };
  return dj_filter(get(Category::Face), get(Category::Pedestrian), get(Category::Plate),
                   get(Category::Car), cfg, frame_index);
}

struct DsjResult {
  std::vector<DesensRegion> regions;
  std::vector<AuditEntry> rejected;
};

namespace detail {

inline void dsj_min_bbox(std::span<const ObjectInstance> dets, const PixelMask& label_map,
                         Category category, const JointConfig& cfg, int frame_index,
                         DsjResult& out) {
  const auto comps = connected_components(label_map);
  std::vector<BBox> comp_boxes;
  comp_boxes.reserve(comps.size());
  for (const auto& c : comps) comp_boxes.push_back(min_bbox(c));

  std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
  std::vector<double> det_best(dets.size(), 0.0);
  for (std::size_t ci = 0; ci < comps.size(); ++ci) {
    for (std::size_t di = 0; di < dets.size(); ++di) {
      const double iou = box_iou(comp_boxes[ci], dets[di].bbox);
      det_best[di] = std::max(det_best[di], iou);
      if (iou > cfg.dsj_iou_threshold) candidates.emplace_back(iou, ci, di);
    }
  }
  // Highest IoU first; ties resolved by component then detection index.
  std::stable_sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    return std::tie(std::get<1>(a), std::get<2>(a)) < std::tie(std::get<1>(b), std::get<2>(b));
  });
  std::vector<bool> comp_used(comps.size(), false), det_used(dets.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> accepted;
  for (const auto& [iou, ci, di] : candidates) {
    if (comp_used[ci] || det_used[di]) continue;
    comp_used[ci] = det_used[di] = true;
    accepted.emplace_back(ci, di);
  }
  // Emit in detection order so output order does not depend on IoU ties.
  std::sort(accepted.begin(), accepted.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  for (const auto& [ci, di] : accepted) {
    out.regions.push_back({category, comps[ci], dets[di].bbox, dets[di].confidence.value_or(0.0),
                           RegionOrigin::Segmentation, dets[di].track_id});
  }
  for (std::size_t di = 0; di < dets.size(); ++di) {
    if (det_used[di]) continue;
    out.rejected.push_back({frame_index, category, dets[di].bbox, dets[di].confidence.value_or(0.0),
                            RejectReason::LowIou, det_best[di]});
  }
  for (std::size_t ci = 0; ci < comps.size(); ++ci) {
    if (comp_used[ci]) continue;
    out.rejected.push_back(
        {frame_index, category, comp_boxes[ci], 0.0, RejectReason::UnpairedComponent, std::nullopt});
  }
}

inline void dsj_dual(std::span<const ObjectInstance> dets, const PixelMask& label_map,
                     Category category, const JointConfig& cfg, int frame_index, DsjResult& out) {
  for (const auto& d : dets) {
    const double conf = d.confidence.value_or(0.0);
    const PixelMask box = rasterize(d.bbox, label_map.width(), label_map.height());
    const PixelMask inside = mask_and(label_map, box);
    // inside is a subset of box, so their IoU reduces to an area ratio.
    const double seg_iou =
        box.empty() ? 0.0 : static_cast<double>(inside.area()) / static_cast<double>(box.area());
    if (!(conf > cfg.dual_det_conf)) {
      out.rejected.push_back({frame_index, category, d.bbox, conf, RejectReason::LowConfidence, seg_iou});
    } else if (!(seg_iou > cfg.dual_seg_iou)) {
      out.rejected.push_back({frame_index, category, d.bbox, conf, RejectReason::LowIou, seg_iou});
    } else {
      out.regions.push_back({category, inside, d.bbox, conf, RegionOrigin::Segmentation, d.track_id});
    }
  }
}

}  // namespace detail

/// Detection/segmentation fusion over the sensitive detections of one frame.
inline DsjResult dsj_fuse(std::span<const ObjectInstance> dets, const SegLabelMap& seg,
                          const JointConfig& cfg, int frame_index = 0) {
  if (!seg.face.same_dims(seg.plate)) throw DimensionError("dsj_fuse: label maps differ in size");
  DsjResult out;
  for (Category c : kSensitiveCategories) {
    std::vector<ObjectInstance> of_c;
    for (const auto& d : dets) {
      if (d.category == c) of_c.push_back(d);
    }
    if (cfg.dsj_method == DsjMethod::MinBBoxIoU) {
      detail::dsj_min_bbox(of_c, seg.of(c), c, cfg, frame_index, out);
    } else {
      detail::dsj_dual(of_c, seg.of(c), c, cfg, frame_index, out);
    }
  }
  return out;
}

struct FrameDesensResult {
  std::vector<DesensRegion> accepted;
  std::vector<AuditEntry> rejected;
};

/// DJ followed by DSJ on one frame of predictions.
inline FrameDesensResult desensitize_frame(const FrameAnnotation& frame, const SegLabelMap& seg,
                                           const JointConfig& cfg) {
  auto dj = dj_filter(frame.objects, cfg, frame.frame_index);
  auto dsj = dsj_fuse(dj.kept, seg, cfg, frame.frame_index);
  FrameDesensResult out{std::move(dsj.regions), std::move(dj.rejected)};
  out.rejected.insert(out.rejected.end(), dsj.rejected.begin(), dsj.rejected.end());
  return out;
}

}  // namespace desens
