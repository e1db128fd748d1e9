#pragma once

// Run configuration shared by the command-line tool. Read from and written
// to the same JSON dialect as the annotation documents; every key is
// optional and unknown keys are rejected.
//
// {
//   "pipeline": {"dj": true, "dsj": true, "kfj": true, "base_confidence": 0.7},
//   "joint":    {"dj_containment_threshold": 0.5, "dj_high_confidence": 0.7,
//                "dj_measure": "containment", "dsj_method": "min-bbox-iou",
//                "dsj_iou_threshold": 0.5, "dual_det_conf": 0.7, "dual_seg_iou": 0.7},
//   "tracker":  {"window": 4, "process_noise": 0.01, ...},
//   "loss":     {"alpha": 2, "beta": 4, "lambda_off": 1, ...},
//   "weights":  [0.25, 0.5, 0.25],
//   "style":    {"mode": "mosaic", "block": 8},
//   "scene":    {...}, "noise": {...}, "seeds": 20, "jobs": 1
// }

#include <array>
#include <exception>
#include <set>
#include <string>
#include <type_traits>
#include <variant>

#include <json.hpp>

#include "desens/document.hpp"
#include "desens/error.hpp"
#include "desens/harness.hpp"
#include "desens/losses.hpp"
#include "desens/metrics.hpp"
#include "desens/pipeline.hpp"
#include "desens/renderer.hpp"

namespace desens {

struct StyleConfig {
  std::string mode = "mosaic";
  int block = 8;
  std::array<int, 3> color = {128, 128, 128};
  /// PPM file for the icon mode.
  std::string icon_path;
  std::string anchor = "center";
  bool keep_aspect = false;
};

struct RunConfig {
  PipelineConfig pipeline = full_pipeline();
  LossConfig loss;
  RegionWeights weights;
  StyleConfig style;
  SceneSpec scene;
  NoiseSpec noise;
  int seeds = 20;
  int jobs = 1;

  void validate() const {
    pipeline.validate();
    loss.validate();
    weights.validate();
    scene.validate();
    noise.validate();
    if (seeds < 1) throw InvariantError("seeds must be >= 1");
    if (jobs < 1) throw InvariantError("jobs must be >= 1");
    if (style.mode != "mosaic" && style.mode != "solid" && style.mode != "icon") {
      throw InvariantError("style mode must be mosaic, solid or icon");
    }
    if (style.anchor != "center" && style.anchor != "top-left") {
      throw InvariantError("icon anchor must be center or top-left");
    }
    for (int c : style.color) {
      if (c < 0 || c > 255) throw InvariantError("style color channels must lie in [0,255]");
    }
  }
};

namespace detail {

/// Reads every known key present in `j` into the bound fields.
class Reader {
 public:
  Reader(const Json& j, std::string ctx) : j_(j), ctx_(std::move(ctx)) {
    if (!j_.is_object()) throw ParseError(ctx_ + ": expected an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [k, v] : j_.items()) {
      if (seen_.find(k) == seen_.end()) throw ParseError(ctx_ + ": unknown key \"" + k + "\"");
    }
  }

  template <class T>
  Reader& get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return *this;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ParseError("expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ParseError("expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ParseError("expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ParseError("expected a string");
      }
      out = it->get<T>();
    } catch (const std::exception& e) {
      throw ParseError(ctx_ + "." + key + ": " + e.what());
    }
    return *this;
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

 private:
  const Json& j_;
  std::string ctx_;
  std::set<std::string> seen_;
};

inline std::string dsj_method_name(DsjMethod m) {
  return m == DsjMethod::MinBBoxIoU ? "min-bbox-iou" : "dual-confidence";
}

inline DsjMethod dsj_method_from(const std::string& s) {
  if (s == "min-bbox-iou") return DsjMethod::MinBBoxIoU;
  if (s == "dual-confidence") return DsjMethod::DualConfidence;
  throw ParseError("dsj method must be min-bbox-iou or dual-confidence, got \"" + s + "\"");
}

inline std::string dj_measure_name(DjMeasure m) { return m == DjMeasure::Containment ? "containment" : "iou"; }

inline DjMeasure dj_measure_from(const std::string& s) {
  if (s == "containment") return DjMeasure::Containment;
  if (s == "iou") return DjMeasure::SymmetricIoU;
  throw ParseError("dj measure must be containment or iou, got \"" + s + "\"");
}

}  // namespace detail

/// Applies a JSON config on top of `cfg`.
inline void merge_config(RunConfig& cfg, const Json& j) {
  detail::Reader root(j, "config");
  if (const Json* p = root.child("pipeline")) {
    detail::Reader r(*p, "config.pipeline");
    r.get("dj", cfg.pipeline.dj).get("dsj", cfg.pipeline.dsj).get("kfj", cfg.pipeline.kfj);
    r.get("base_confidence", cfg.pipeline.base_confidence);
  }
  if (const Json* p = root.child("joint")) {
    auto& c = cfg.pipeline.joint;
    detail::Reader r(*p, "config.joint");
    std::string measure = detail::dj_measure_name(c.dj_measure), method = detail::dsj_method_name(c.dsj_method);
    r.get("dj_containment_threshold", c.dj_containment_threshold)
        .get("dj_high_confidence", c.dj_high_confidence)
        .get("dj_measure", measure)
        .get("dsj_method", method)
        .get("dsj_iou_threshold", c.dsj_iou_threshold)
        .get("dual_det_conf", c.dual_det_conf)
        .get("dual_seg_iou", c.dual_seg_iou);
    c.dj_measure = detail::dj_measure_from(measure);
    c.dsj_method = detail::dsj_method_from(method);
  }
  if (const Json* p = root.child("tracker")) {
    auto& c = cfg.pipeline.tracker;
    detail::Reader r(*p, "config.tracker");
    r.get("window", c.window)
        .get("process_noise", c.process_noise)
        .get("measurement_noise", c.measurement_noise)
        .get("init_covariance", c.init_covariance)
        .get("gate_distance", c.gate_distance)
        .get("gate_diagonals", c.gate_diagonals)
        .get("size_alpha", c.size_alpha)
        .get("min_hits_to_coast", c.min_hits_to_coast);
  }
  if (const Json* p = root.child("loss")) {
    auto& c = cfg.loss;
    detail::Reader r(*p, "config.loss");
    r.get("alpha", c.alpha)
        .get("beta", c.beta)
        .get("lambda_off", c.lambda_off)
        .get("lambda_size", c.lambda_size)
        .get("lambda_seg", c.lambda_seg)
        .get("stride", c.stride)
        .get("heatmap_channels", c.heatmap_channels)
        .get("epsilon", c.epsilon)
        .get("min_overlap", c.min_overlap);
  }
  if (const Json* p = root.child("weights")) {
    if (!p->is_array() || p->size() != 3 || !(*p)[0].is_number() || !(*p)[1].is_number() ||
        !(*p)[2].is_number()) {
      throw ParseError("config.weights: expected [above, mid, below]");
    }
    cfg.weights = {(*p)[0].get<double>(), (*p)[1].get<double>(), (*p)[2].get<double>()};
  }
  if (const Json* p = root.child("style")) {
    auto& c = cfg.style;
    detail::Reader r(*p, "config.style");
    r.get("mode", c.mode).get("block", c.block).get("icon_path", c.icon_path).get("anchor", c.anchor);
    r.get("keep_aspect", c.keep_aspect);
    if (const Json* col = r.child("color")) {
      if (!col->is_array() || col->size() != 3) throw ParseError("config.style.color: expected [r, g, b]");
      for (int k = 0; k < 3; ++k) {
        if (!(*col)[k].is_number_integer()) throw ParseError("config.style.color: expected integers");
        c.color[k] = (*col)[k].get<int>();
      }
    }
  }
  if (const Json* p = root.child("scene")) {
    auto& c = cfg.scene;
    detail::Reader r(*p, "config.scene");
    r.get("width", c.width)
        .get("height", c.height)
        .get("n_pedestrians", c.n_pedestrians)
        .get("n_vehicles", c.n_vehicles)
        .get("min_speed", c.min_speed)
        .get("max_speed", c.max_speed)
        .get("length", c.length)
        .get("seed", c.seed);
  }
  if (const Json* p = root.child("noise")) {
    auto& c = cfg.noise;
    detail::Reader r(*p, "config.noise");
    r.get("drop_prob", c.drop_prob)
        .get("center_jitter_sigma", c.center_jitter_sigma)
        .get("size_jitter_sigma", c.size_jitter_sigma)
        .get("false_positive_rate", c.false_positive_rate)
        .get("tp_conf_min", c.tp_conf_min)
        .get("tp_conf_max", c.tp_conf_max)
        .get("fp_conf_min", c.fp_conf_min)
        .get("fp_conf_max", c.fp_conf_max)
        .get("mask_radius", c.mask_radius)
        .get("seg_drop_prob", c.seg_drop_prob)
        .get("burst_prob", c.burst_prob)
        .get("burst_min", c.burst_min)
        .get("burst_max", c.burst_max)
        .get("seed", c.seed);
  }
  root.get("seeds", cfg.seeds).get("jobs", cfg.jobs);
}

inline Json to_json(const RunConfig& cfg) {
  const auto& p = cfg.pipeline;
  const auto& jc = p.joint;
  const auto& t = p.tracker;
  const auto& l = cfg.loss;
  const auto& s = cfg.scene;
  const auto& n = cfg.noise;
  return {
      {"pipeline", {{"dj", p.dj}, {"dsj", p.dsj}, {"kfj", p.kfj}, {"base_confidence", p.base_confidence}}},
      {"joint",
       {{"dj_containment_threshold", jc.dj_containment_threshold},
        {"dj_high_confidence", jc.dj_high_confidence},
        {"dj_measure", detail::dj_measure_name(jc.dj_measure)},
        {"dsj_method", detail::dsj_method_name(jc.dsj_method)},
        {"dsj_iou_threshold", jc.dsj_iou_threshold},
        {"dual_det_conf", jc.dual_det_conf},
        {"dual_seg_iou", jc.dual_seg_iou}}},
      {"tracker",
       {{"window", t.window},
        {"process_noise", t.process_noise},
        {"measurement_noise", t.measurement_noise},
        {"init_covariance", t.init_covariance},
        {"gate_distance", t.gate_distance},
        {"gate_diagonals", t.gate_diagonals},
        {"size_alpha", t.size_alpha},
        {"min_hits_to_coast", t.min_hits_to_coast}}},
      {"loss",
       {{"alpha", l.alpha},
        {"beta", l.beta},
        {"lambda_off", l.lambda_off},
        {"lambda_size", l.lambda_size},
        {"lambda_seg", l.lambda_seg},
        {"stride", l.stride},
        {"heatmap_channels", l.heatmap_channels},
        {"epsilon", l.epsilon},
        {"min_overlap", l.min_overlap}}},
      {"weights", {cfg.weights.above, cfg.weights.mid, cfg.weights.below}},
      {"style",
       {{"mode", cfg.style.mode},
        {"block", cfg.style.block},
        {"color", cfg.style.color},
        {"icon_path", cfg.style.icon_path},
        {"anchor", cfg.style.anchor},
        {"keep_aspect", cfg.style.keep_aspect}}},
      {"scene",
       {{"width", s.width},
        {"height", s.height},
        {"n_pedestrians", s.n_pedestrians},
        {"n_vehicles", s.n_vehicles},
        {"min_speed", s.min_speed},
        {"max_speed", s.max_speed},
        {"length", s.length},
        {"seed", s.seed}}},
      {"noise",
       {{"drop_prob", n.drop_prob},
        {"center_jitter_sigma", n.center_jitter_sigma},
        {"size_jitter_sigma", n.size_jitter_sigma},
        {"false_positive_rate", n.false_positive_rate},
        {"tp_conf_min", n.tp_conf_min},
        {"tp_conf_max", n.tp_conf_max},
        {"fp_conf_min", n.fp_conf_min},
        {"fp_conf_max", n.fp_conf_max},
        {"mask_radius", n.mask_radius},
        {"seg_drop_prob", n.seg_drop_prob},
        {"burst_prob", n.burst_prob},
        {"burst_min", n.burst_min},
        {"burst_max", n.burst_max},
        {"seed", n.seed}}},
      {"seeds", cfg.seeds},
      {"jobs", cfg.jobs},
  };
}

/// Builds the redaction style; icon mode reads its image through `load`.
template <class LoadIcon>
RedactStyle make_style(const StyleConfig& s, LoadIcon&& load) {
  if (s.mode == "solid") {
    return Solid{static_cast<std::uint8_t>(s.color[0]), static_cast<std::uint8_t>(s.color[1]),
                 static_cast<std::uint8_t>(s.color[2])};
  }
  if (s.mode == "icon") {
    if (s.icon_path.empty()) throw InvariantError("icon style needs style.icon_path");
    return Icon{load(s.icon_path), {}, s.anchor == "top-left" ? IconAnchor::TopLeft : IconAnchor::Center,
                s.keep_aspect};
  }
  return Mosaic{s.block};
}

}  // namespace desens
