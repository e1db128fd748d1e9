#pragma once

// Detection AP and the desensitization IoFF / mIOFF metric family.
//
// Face IoFF is a weighted sum of per-region IoUs over the three tri-regions.
// A predicted face mask is not split into regions by the model, so region i
// is scored against the horizontal band that GT region i spans across the
// face box:
//
//   F_IoU_i = |pred & gt_i| / |(pred & band_i) | gt_i|
//
// Plates are scored with plain mask IoU.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "desens/core.hpp"
#include "desens/error.hpp"
#include "desens/geometry.hpp"

namespace desens {

/// Weights of the above-eyes / eyes-to-nose / below-nose regions.
struct RegionWeights {
  double above = 0.25;
  double mid = 0.50;
  double below = 0.25;

  double operator[](int i) const { return i == 0 ? above : (i == 1 ? mid : below); }

  void validate() const {
    if (above < 0.0 || mid < 0.0 || below < 0.0) throw InvariantError("region weights must be >= 0");
    if (std::abs(above + mid + below - 1.0) > 1e-9) throw InvariantError("region weights must sum to 1");
  }
  friend bool operator==(const RegionWeights&, const RegionWeights&) = default;
};

/// Mask used to score a prediction: its own mask, or its box rasterized.
inline PixelMask prediction_mask(const ObjectInstance& o, int width, int height) {
  return o.mask ? *o.mask : rasterize(o.bbox, width, height);
}

/// Per-region F_IoU for a face; regions that are empty in the GT are nullopt.
inline std::array<std::optional<double>, 3> face_region_ious(const PixelMask& pred,
                                                             const FaceTriMask& tri,
                                                             const BBox& face_box) {
  detail::require_same_dims(pred, tri.above, "ioff");
  const PixelMask face_cols = rasterize(face_box, pred.width(), pred.height());
  std::array<std::optional<double>, 3> out;
  int col0 = 0, col1 = 0;
  if (!face_cols.empty()) {
    const BBox fc = min_bbox(face_cols);
    col0 = int(fc.x_min);
    col1 = int(fc.x_max);
  }
  for (int i = 0; i < 3; ++i) {
    const PixelMask& gt = tri.region(i);
    if (gt.empty()) continue;
    const BBox rows = min_bbox(gt);
    const PixelMask band =
        PixelMask::from_rect(pred.width(), pred.height(), col0, int(rows.y_min), col1, int(rows.y_max));
    const auto inter = intersection_area(pred, gt);
    const auto denom = union_area(mask_and(pred, band), gt);
    out[i] = static_cast<double>(inter) / static_cast<double>(denom);
  }
  return out;
}

/// IoFF of a predicted mask against one sensitive GT instance.
inline Ratio ioff(const PixelMask& pred, const ObjectInstance& gt, const RegionWeights& w) {
  if (gt.category == Category::Plate) {
    if (!gt.mask) throw InvariantError("ioff: plate ground truth has no mask");
    detail::require_same_dims(pred, *gt.mask, "ioff");
    if (gt.mask->empty()) throw EmptyError("ioff: plate ground truth mask is empty");
    return mask_iou(pred, *gt.mask);
  }
  if (gt.category != Category::Face) {
    throw InvariantError("ioff: category " + std::string(to_string(gt.category)) +
                         " is not sensitive");
  }
  if (!gt.tri) throw InvariantError("ioff: face ground truth has no tri-region masks");
  const auto f = face_region_ious(pred, *gt.tri, gt.bbox);
  double num = 0.0, wsum = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (!f[i]) continue;
    num += w[i] * *f[i];
    wsum += w[i];
  }
  if (wsum <= 0.0) throw EmptyError("ioff: face has no visible weighted region");
  // Occluded faces renormalize over the visible regions; otherwise wsum == 1.
  return std::clamp(num / wsum, 0.0, 1.0);
}

/// Fraction of a GT region covered by the applied redaction.
inline Ratio coverage_ratio(const PixelMask& applied, const PixelMask& gt_region) {
  detail::require_same_dims(applied, gt_region, "coverage_ratio");
  const auto total = gt_region.area();
  if (total == 0) throw EmptyError("coverage_ratio: ground-truth region is empty");
  return static_cast<double>(intersection_area(applied, gt_region)) / static_cast<double>(total);
}

enum class MatchMeasure { BoxIoU, IoFF };

struct MatchPair {
  std::size_t pred = 0;
  std::size_t gt = 0;
  Ratio score = 0.0;
  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<std::size_t> unmatched_preds;
  std::vector<std::size_t> unmatched_gts;
};

struct MatchOptions {
  MatchMeasure measure = MatchMeasure::BoxIoU;
  /// A pair needs score >= threshold and score > 0.
  double threshold = 0.5;
  RegionWeights weights;
};

namespace detail {

inline double measure(const ObjectInstance& pred, const PixelMask* pred_mask,
                      const ObjectInstance& gt, const MatchOptions& opt) {
  if (opt.measure == MatchMeasure::BoxIoU) return box_iou(pred.bbox, gt.bbox);
  return ioff(*pred_mask, gt, opt.weights);
}

/// Prediction indices sorted by descending confidence, ties by index.
inline std::vector<std::size_t> confidence_order(std::span<const ObjectInstance> preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].confidence.value_or(0.0) > preds[b].confidence.value_or(0.0);
  });
  return order;
}

}  // namespace detail

/// Greedy one-to-one matching of same-category objects, visiting predictions
/// by descending confidence and pairing each with its best unused GT.
inline MatchResult match_frame(std::span<const ObjectInstance> preds,
                               std::span<const ObjectInstance> gts, const MatchOptions& opt,
                               int width, int height) {
  MatchResult r;
  std::vector<bool> gt_used(gts.size(), false);
  std::vector<bool> pred_used(preds.size(), false);
  for (std::size_t p : detail::confidence_order(preds)) {
    std::optional<PixelMask> pmask;
    if (opt.measure == MatchMeasure::IoFF && is_sensitive(preds[p].category)) {
      pmask = prediction_mask(preds[p], width, height);
    }
    double best = -1.0;
    std::size_t best_gt = 0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_used[g] || gts[g].category != preds[p].category) continue;
      if (opt.measure == MatchMeasure::IoFF && !pmask) continue;
      const double s = detail::measure(preds[p], pmask ? &*pmask : nullptr, gts[g], opt);
      if (s > best) {
        best = s;
        best_gt = g;
      }
    }
    if (best > 0.0 && best >= opt.threshold) {
      gt_used[best_gt] = true;
      pred_used[p] = true;
      r.pairs.push_back({p, best_gt, best});
    }
  }
  for (std::size_t p = 0; p < preds.size(); ++p) {
    if (!pred_used[p]) r.unmatched_preds.push_back(p);
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (!gt_used[g]) r.unmatched_gts.push_back(g);
  }
  return r;
}

/// Per-instance IoFF of every sensitive GT object; unmatched instances score 0.
struct SensitiveScores {
  std::vector<double> face;
  std::vector<double> plate;

  void append(const SensitiveScores& o) {
    face.insert(face.end(), o.face.begin(), o.face.end());
    plate.insert(plate.end(), o.plate.begin(), o.plate.end());
  }
};

inline SensitiveScores sensitive_scores(const MatchResult& m, std::span<const ObjectInstance> gts) {
  std::vector<double> per_gt(gts.size(), 0.0);
  for (const auto& p : m.pairs) per_gt[p.gt] = p.score;
  SensitiveScores s;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (gts[g].category == Category::Face) s.face.push_back(per_gt[g]);
    if (gts[g].category == Category::Plate) s.plate.push_back(per_gt[g]);
  }
  return s;
}

/// Matches one frame's predictions against its GT with the IoFF measure.
inline SensitiveScores score_frame(std::span<const ObjectInstance> preds,
                                   std::span<const ObjectInstance> gts, const RegionWeights& w,
                                   int width, int height) {
  MatchOptions opt{MatchMeasure::IoFF, 0.0, w};
  return sensitive_scores(match_frame(preds, gts, opt, width, height), gts);
}

struct MioffSummary {
  double value = 0.0;
  std::optional<double> face;
  std::optional<double> plate;
};

/// Faces and plates are averaged per category, then the present category
/// means are averaged with equal weight.
inline MioffSummary mioff(const SensitiveScores& s) {
  if (s.face.empty() && s.plate.empty()) throw EmptyError("mioff: no sensitive ground-truth instances");
  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  MioffSummary out;
  double sum = 0.0;
  int n = 0;
  if (!s.face.empty()) {
    out.face = mean(s.face);
    sum += *out.face;
    ++n;
  }
  if (!s.plate.empty()) {
    out.plate = mean(s.plate);
    sum += *out.plate;
    ++n;
  }
  out.value = sum / n;
  return out;
}

namespace detail {

/// Pairs frames of two sequences by frame_index; frames absent from the
/// prediction side map to an empty object list.
inline std::vector<std::pair<std::span<const ObjectInstance>, std::span<const ObjectInstance>>>
align_frames(std::span<const FrameAnnotation> preds, std::span<const FrameAnnotation> gts) {
  std::map<int, const FrameAnnotation*> by_index;
  for (const auto& f : preds) by_index[f.frame_index] = &f;
  std::vector<std::pair<std::span<const ObjectInstance>, std::span<const ObjectInstance>>> out;
  for (const auto& g : gts) {
    auto it = by_index.find(g.frame_index);
    std::span<const ObjectInstance> p;
    if (it != by_index.end()) p = it->second->objects;
    out.emplace_back(p, std::span<const ObjectInstance>(g.objects));
  }
  return out;
}

inline std::vector<ObjectInstance> of_category(std::span<const ObjectInstance> objs, Category c) {
  std::vector<ObjectInstance> out;
  for (const auto& o : objs) {
    if (o.category == c) out.push_back(o);
  }
  return out;
}

}  // namespace detail

/// A ranked detection after matching: its confidence and whether it was a TP.
struct RankedHit {
  double confidence = 0.0;
  bool true_positive = false;
};

/// All-point interpolated AP over hits already sorted by descending confidence.
inline Ratio ap_from_ranked(std::span<const RankedHit> hits, std::size_t n_gt) {
  if (n_gt == 0) throw EmptyError("average_precision: no ground-truth instances");
  std::vector<double> precision(hits.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    tp += hits[i].true_positive ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  // Precision envelope: best precision at this recall or beyond.
  for (std::size_t i = hits.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits[i].true_positive) ap += precision[i];
  }
  return ap / static_cast<double>(n_gt);
}

/// AP of one category over a frame set. Frames are matched independently and
/// hits pooled across frames before ranking.
inline Ratio average_precision(std::span<const FrameAnnotation> preds,
                               std::span<const FrameAnnotation> gts, Category category,
                               const MatchOptions& opt, int width, int height) {
  struct Hit {
    double conf;
    bool tp;
    std::size_t order;
  };
  std::vector<Hit> hits;
  std::size_t n_gt = 0;
  for (const auto& [pf, gf] : detail::align_frames(preds, gts)) {
    const auto p = detail::of_category(pf, category);
    const auto g = detail::of_category(gf, category);
    n_gt += g.size();
    for (const auto& o : p) {
      if (!o.confidence) throw InvariantError("average_precision: prediction lacks a confidence");
    }
    const auto m = match_frame(p, g, opt, width, height);
    std::vector<bool> tp(p.size(), false);
    for (const auto& pair : m.pairs) tp[pair.pred] = true;
    for (std::size_t i : detail::confidence_order(p)) {
      hits.push_back({*p[i].confidence, tp[i], hits.size()});
    }
  }
  if (n_gt == 0) {
    throw EmptyError("average_precision: no ground-truth " + std::string(to_string(category)));
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const Hit& a, const Hit& b) { return a.conf > b.conf; });
  std::vector<RankedHit> ranked;
  ranked.reserve(hits.size());
  for (const auto& h : hits) ranked.push_back({h.conf, h.tp});
  return ap_from_ranked(ranked, n_gt);
}

/// COCO-style AP averaged over IoU thresholds 0.50:0.05:0.95.
inline Ratio coco_ap(std::span<const FrameAnnotation> preds, std::span<const FrameAnnotation> gts,
                     Category category, int width, int height) {
  double sum = 0.0;
  for (int k = 0; k < 10; ++k) {
    MatchOptions opt{MatchMeasure::BoxIoU, 0.5 + 0.05 * k, {}};
    sum += average_precision(preds, gts, category, opt, width, height);
  }
  return sum / 10.0;
}

/// IoFF-thresholded AP (IOFF_50 with tau = 0.5, IOFF_75 with tau = 0.75),
/// averaged over the sensitive categories present in the GT.
inline Ratio ioff_at(std::span<const FrameAnnotation> preds, std::span<const FrameAnnotation> gts,
                     double tau, const RegionWeights& w, int width, int height) {
  double sum = 0.0;
  int n = 0;
  for (Category c : kSensitiveCategories) {
    try {
      sum += average_precision(preds, gts, c, {MatchMeasure::IoFF, tau, w}, width, height);
      ++n;
    } catch (const EmptyError&) {
    }
  }
  if (n == 0) throw EmptyError("ioff_at: no sensitive ground-truth instances");
  return sum / n;
}

/// Per-instance IoFF scores over a whole sequence.
inline SensitiveScores sequence_scores(std::span<const FrameAnnotation> preds,
                                       std::span<const FrameAnnotation> gts,
                                       const RegionWeights& w, int width, int height) {
  SensitiveScores all;
  for (const auto& [pf, gf] : detail::align_frames(preds, gts)) {
    all.append(score_frame(pf, gf, w, width, height));
  }
  return all;
}

struct CategoryAp {
  Category category = Category::Pedestrian;
  double ap = 0.0;
  double ap50 = 0.0;
  double ap75 = 0.0;
  std::size_t n_gt = 0;
  std::size_t n_pred = 0;
};

struct FrameBreakdown {
  int frame_index = 0;
  std::size_t n_sensitive_gt = 0;
  std::size_t n_matched = 0;
  std::optional<double> mioff;
};

struct EvalReport {
  std::vector<CategoryAp> categories;
  std::optional<double> mioff;
  std::optional<double> mioff_face;
  std::optional<double> mioff_plate;
  std::optional<double> ioff50;
  std::optional<double> ioff75;
  std::vector<FrameBreakdown> frames;
};

inline EvalReport evaluate(const SequenceAnnotation& preds, const SequenceAnnotation& gt,
                           const RegionWeights& w) {
  w.validate();
  if (preds.width != gt.width || preds.height != gt.height) {
    throw DimensionError("evaluate: prediction and ground-truth frame sizes differ");
  }
  EvalReport r;
  for (Category c : kAllCategories) {
    CategoryAp ca{c};
    for (const auto& f : gt.frames) {
      for (const auto& o : f.objects) ca.n_gt += o.category == c;
    }
    for (const auto& f : preds.frames) {
      for (const auto& o : f.objects) ca.n_pred += o.category == c;
    }
    if (ca.n_gt == 0) continue;
    ca.ap = coco_ap(preds.frames, gt.frames, c, gt.width, gt.height);
    ca.ap50 = average_precision(preds.frames, gt.frames, c, {MatchMeasure::BoxIoU, 0.5, w},
                                gt.width, gt.height);
    ca.ap75 = average_precision(preds.frames, gt.frames, c, {MatchMeasure::BoxIoU, 0.75, w},
                                gt.width, gt.height);
    r.categories.push_back(ca);
  }
  SensitiveScores all;
  const auto aligned = detail::align_frames(preds.frames, gt.frames);
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    const auto& [pf, gf] = aligned[i];
    const auto s = score_frame(pf, gf, w, gt.width, gt.height);
    FrameBreakdown fb{gt.frames[i].frame_index, s.face.size() + s.plate.size(), 0, std::nullopt};
    for (double v : s.face) fb.n_matched += v > 0.0;
    for (double v : s.plate) fb.n_matched += v > 0.0;
    if (fb.n_sensitive_gt > 0) fb.mioff = mioff(s).value;
    r.frames.push_back(fb);
    all.append(s);
  }
  if (!all.face.empty() || !all.plate.empty()) {
    const auto m = mioff(all);
    r.mioff = m.value;
    r.mioff_face = m.face;
    r.mioff_plate = m.plate;
    r.ioff50 = ioff_at(preds.frames, gt.frames, 0.5, w, gt.width, gt.height);
    r.ioff75 = ioff_at(preds.frames, gt.frames, 0.75, w, gt.width, gt.height);
  }
  return r;
}

inline nlohmann::json to_json(const EvalReport& r) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json cats = json::object();
  for (const auto& c : r.categories) {
    cats[std::string(to_string(c.category))] = {{"ap", c.ap},       {"ap50", c.ap50},
                                                {"ap75", c.ap75},   {"n_gt", c.n_gt},
                                                {"n_pred", c.n_pred}};
  }
  json frames = json::array();
  for (const auto& f : r.frames) {
    frames.push_back({{"frame_index", f.frame_index},
                      {"n_sensitive_gt", f.n_sensitive_gt},
                      {"n_matched", f.n_matched},
                      {"mioff", opt(f.mioff)}});
  }
  return {{"detection", cats},
          {"desensitization",
           {{"mioff", opt(r.mioff)},
            {"mioff_face", opt(r.mioff_face)},
            {"mioff_plate", opt(r.mioff_plate)},
            {"ioff50", opt(r.ioff50)},
            {"ioff75", opt(r.ioff75)}}},
          {"frames", frames}};
}

}  // namespace desens
