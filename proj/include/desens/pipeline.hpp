#pragma once

// Sequence-level desensitization: optional DJ / DSJ / KFJ stages over a
// prediction document. The output is again a prediction document whose
// sensitive objects carry the masks that will be redacted.

#include <string>
#include <vector>

#include "desens/core.hpp"
#include "desens/error.hpp"
#include "desens/metrics.hpp"
#include "desens/postproc.hpp"
#include "desens/tracker.hpp"

namespace desens {

struct PipelineConfig {
  bool dj = false;
  /// DSJ runs on the DJ-filtered detections, so it implies DJ.
  bool dsj = false;
  bool kfj = false;
  JointConfig joint;
  TrackerConfig tracker;
  /// Without DJ, sensitive detections below this confidence are dropped.
  double base_confidence = 0.7;

  std::string name() const {
    std::string n = dsj ? "DSJ" : (dj ? "DJ" : "");
    if (kfj) n += n.empty() ? "KFJ" : "&KFJ";
    return n.empty() ? "baseline" : n;
  }
  void validate() const {
    joint.validate();
    tracker.validate();
    if (!(base_confidence >= 0.0 && base_confidence <= 1.0)) {
      throw InvariantError("base_confidence must lie in [0,1]");
    }
  }
};

/// DJ, DSJ and KFJ all enabled.
inline PipelineConfig full_pipeline() {
  PipelineConfig c;
  c.dj = c.dsj = c.kfj = true;
  return c;
}

struct PipelineResult {
  PredictionSet output;
  std::vector<AuditEntry> audit;
};

namespace detail {

inline ObjectInstance region_object(const DesensRegion& r) {
  ObjectInstance o;
  o.category = r.category;
  o.bbox = r.source_box;
  o.mask = r.mask;
  o.confidence = r.confidence;
  o.track_id = r.track_id;
  o.coasted = r.origin == RegionOrigin::Coasted;
  return o;
}

inline FrameDesensResult detection_stage(const FrameAnnotation& f, int width, int height,
                                         const PipelineConfig& cfg) {
  if (cfg.dsj) {
    if (!f.seg) {
      throw DataError("frame " + std::to_string(f.frame_index) + ": DSJ needs segmentation label maps");
    }
    return desensitize_frame(f, *f.seg, cfg.joint);
  }
  FrameDesensResult out;
  std::vector<ObjectInstance> kept;
  if (cfg.dj) {
    auto dj = dj_filter(f.objects, cfg.joint, f.frame_index);
    kept = std::move(dj.kept);
    out.rejected = std::move(dj.rejected);
  } else {
    for (const auto& o : f.objects) {
      if (!is_sensitive(o.category)) continue;
      const double conf = o.confidence.value_or(0.0);
      if (conf >= cfg.base_confidence) {
        kept.push_back(o);
      } else {
        out.rejected.push_back({f.frame_index, o.category, o.bbox, conf, RejectReason::LowConfidence,
                                std::nullopt});
      }
    }
  }
  for (const auto& o : kept) {
    PixelMask m = prediction_mask(o, width, height);
    if (m.empty()) continue;
    out.accepted.push_back({o.category, std::move(m), o.bbox, o.confidence.value_or(0.0),
                            RegionOrigin::Detection, o.track_id});
  }
  return out;
}

}  // namespace detail

inline PipelineResult run_pipeline(const PredictionSet& preds, const PipelineConfig& cfg) {
  cfg.validate();
  const auto& seq = preds.sequence;
  PipelineResult res;
  res.output.sequence.sequence_id = seq.sequence_id;
  res.output.sequence.width = seq.width;
  res.output.sequence.height = seq.height;
  Tracker tracker(cfg.tracker);
  for (const auto& f : seq.frames) {
    auto stage = detail::detection_stage(f, seq.width, seq.height, cfg);
    std::vector<DesensRegion> regions = std::move(stage.accepted);
    if (cfg.kfj) {
      auto step = tracker.step_frame(f.frame_index, regions, stage.rejected);
      regions = std::move(step.emitted);
      stage.rejected.insert(stage.rejected.end(), step.conflicts.begin(), step.conflicts.end());
    }
    FrameAnnotation out;
    out.frame_index = f.frame_index;
    out.image_path = f.image_path;
    for (const auto& o : f.objects) {
      if (!is_sensitive(o.category)) out.objects.push_back(o);
    }
    for (const auto& r : regions) out.objects.push_back(detail::region_object(r));
    res.output.sequence.frames.push_back(std::move(out));
    res.audit.insert(res.audit.end(), stage.rejected.begin(), stage.rejected.end());
  }
  return res;
}

inline nlohmann::json to_json(const AuditEntry& a) {
  nlohmann::json j = {{"frame_index", a.frame_index},
                      {"category", std::string(to_string(a.category))},
                      {"bbox", {a.box.x_min, a.box.y_min, a.box.x_max, a.box.y_max}},
                      {"confidence", a.confidence},
                      {"reason", std::string(to_string(a.reason))}};
  if (a.score) j["score"] = *a.score;
  return j;
}

inline nlohmann::json audit_json(const std::vector<AuditEntry>& audit) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : audit) arr.push_back(to_json(a));
  return arr;
}

}  // namespace desens
