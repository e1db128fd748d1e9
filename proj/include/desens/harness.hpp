#pragma once

// Synthetic scenes and a noisy detector/segmenter stand-in.
//
// Scenes put every carrier in its own horizontal lane: pedestrians walk and
// cars drive left/right, bouncing at the frame border. Each pedestrian
// carries a face near the top of its box, each car a plate near the bottom.
// All boxes sit on integer pixel coordinates, so GT masks are exact
// rectangles and a perfect detector reproduces them exactly.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "desens/core.hpp"
#include "desens/error.hpp"
#include "desens/losses.hpp"
#include "desens/metrics.hpp"
#include "desens/pipeline.hpp"
#include "desens/renderer.hpp"

namespace desens {

struct SceneSpec {
  int width = 640;
  int height = 480;
  int n_pedestrians = 4;
  int n_vehicles = 3;
  double min_speed = 1.0;
  double max_speed = 4.0;
  int length = 40;
  std::uint64_t seed = 1;

  void validate() const {
    if (width <= 0 || height <= 0) throw InvariantError("scene: dimensions must be positive");
    if (n_pedestrians < 0 || n_vehicles < 0) throw InvariantError("scene: counts must be >= 0");
    if (length < 1) throw InvariantError("scene: length must be >= 1");
    if (!(min_speed >= 0.0 && max_speed >= min_speed)) throw InvariantError("scene: bad speed range");
  }
};

struct NoiseSpec {
  double drop_prob = 0.1;
  double center_jitter_sigma = 2.0;
  double size_jitter_sigma = 2.0;
  /// Expected false-positive sensitive detections per frame.
  double false_positive_rate = 0.05;
  double tp_conf_min = 0.6, tp_conf_max = 1.0;
  double fp_conf_min = 0.1, fp_conf_max = 0.7;
  /// Each edge of a segmentation mask moves by up to this many pixels.
  int mask_radius = 1;
  double seg_drop_prob = 0.02;
  /// Per-frame chance that a visible sensitive object starts an occlusion
  /// that hides it from both detector and segmenter for burst_min..burst_max
  /// frames.
  double burst_prob = 0.03;
  int burst_min = 2;
  int burst_max = 3;
  std::uint64_t seed = 7;

  /// Perfect detector and segmenter, every confidence 1.
  static NoiseSpec noiseless() {
    NoiseSpec n;
    n.drop_prob = 0.0;
    n.center_jitter_sigma = 0.0;
    n.size_jitter_sigma = 0.0;
    n.false_positive_rate = 0.0;
    n.tp_conf_min = n.tp_conf_max = 1.0;
    n.mask_radius = 0;
    n.seg_drop_prob = 0.0;
    n.burst_prob = 0.0;
    return n;
  }

  void validate() const {
    for (double p : {drop_prob, false_positive_rate, seg_drop_prob, burst_prob, tp_conf_min, tp_conf_max,
                     fp_conf_min, fp_conf_max}) {
      if (!(p >= 0.0 && p <= 1.0)) throw InvariantError("noise: probabilities must lie in [0,1]");
    }
    if (tp_conf_min > tp_conf_max || fp_conf_min > fp_conf_max) throw InvariantError("noise: bad confidence range");
    if (center_jitter_sigma < 0 || size_jitter_sigma < 0 || mask_radius < 0) {
      throw InvariantError("noise: jitter terms must be >= 0");
    }
    if (burst_min < 1 || burst_max < burst_min) throw InvariantError("noise: bad burst length range");
  }
};

struct Scene {
  SequenceAnnotation gt;
  std::vector<Image> frames;
};

namespace detail {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline double normal(Rng& rng, double sigma) {
  if (sigma == 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

inline bool bernoulli(Rng& rng, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return std::bernoulli_distribution(p)(rng);
}

struct Mover {
  Category category;
  int w, h;
  int y;
  double x, vx;
  /// Sensitive sub-box relative to the carrier's top-left corner.
  int sx, sy, sw, sh;
};

inline PixelMask rect_mask(int width, int height, int x0, int y0, int x1, int y1) {
  return PixelMask::from_rect(width, height, x0, y0, x1, y1);
}

/// Horizontal 1:2:1 split of a face rectangle.
inline FaceTriMask face_tri(int width, int height, int x0, int y0, int x1, int y1) {
  const int fh = y1 - y0;
  const int q = std::max(1, static_cast<int>(std::lround(fh * 0.25)));
  return {rect_mask(width, height, x0, y0, x1, y0 + q), rect_mask(width, height, x0, y0 + q, x1, y1 - q),
          rect_mask(width, height, x0, y1 - q, x1, y1), false};
}

inline std::array<std::uint8_t, 3> color_of(int id, std::uint64_t salt) {
  std::uint64_t v = (static_cast<std::uint64_t>(id) + 1) * 0x9E3779B97F4A7C15ULL ^ salt;
  v ^= v >> 29;
  v *= 0xBF58476D1CE4E5B9ULL;
  v ^= v >> 32;
  return {static_cast<std::uint8_t>(40 + v % 180), static_cast<std::uint8_t>(40 + (v >> 8) % 180),
          static_cast<std::uint8_t>(40 + (v >> 16) % 180)};
}

}  // namespace detail

/// Deterministic GT sequence for a scene spec.
inline SequenceAnnotation generate_annotations(const SceneSpec& spec) {
  spec.validate();
  detail::Rng rng(spec.seed);
  const int n = spec.n_pedestrians + spec.n_vehicles;
  std::vector<detail::Mover> movers;
  if (n > 0) {
    const int lane = spec.height / n;
    // Interleave carriers over lanes so both kinds spread over the frame.
    std::vector<Category> order;
    for (int i = 0, p = 0, v = 0; i < n; ++i) {
      const bool ped = v >= spec.n_vehicles || (p < spec.n_pedestrians && p * spec.n_vehicles <= v * spec.n_pedestrians);
      order.push_back(ped ? Category::Pedestrian : Category::Car);
      (ped ? p : v)++;
    }
    for (int i = 0; i < n; ++i) {
      detail::Mover m{};
      m.category = order[static_cast<std::size_t>(i)];
      if (m.category == Category::Pedestrian) {
        m.w = detail::uniform_int(rng, 26, 36);
        m.h = std::min(static_cast<int>(std::lround(m.w * 2.2)), lane - 4);
        m.sw = std::max(4, static_cast<int>(std::lround(m.w * 0.55)));
        m.sh = std::max(4, static_cast<int>(std::lround(m.h * 0.3)));
        m.sx = (m.w - m.sw) / 2;
        m.sy = 3;
      } else {
        m.w = detail::uniform_int(rng, 80, 120);
        m.h = std::min(static_cast<int>(std::lround(m.w * 0.5)), lane - 4);
        m.sw = std::max(4, static_cast<int>(std::lround(m.w * 0.3)));
        m.sh = std::max(6, static_cast<int>(std::lround(m.h * 0.2)));
        m.sx = (m.w - m.sw) / 2;
        m.sy = m.h - m.sh - 3;
      }
      if (m.h < 16 || m.w + 2 > spec.width || m.sy < 0 || m.sy + m.sh > m.h) {
        throw InvariantError("scene spec infeasible: objects do not fit in their lanes");
      }
      m.y = i * lane + (lane - m.h) / 2;
      m.x = detail::uniform(rng, 0.0, static_cast<double>(spec.width - m.w));
      const double speed = detail::uniform(rng, spec.min_speed, spec.max_speed);
      m.vx = detail::bernoulli(rng, 0.5) ? speed : -speed;
      movers.push_back(m);
    }
  }

  SequenceAnnotation seq;
  seq.sequence_id = "synthetic-" + std::to_string(spec.seed);
  seq.width = spec.width;
  seq.height = spec.height;
  for (int t = 0; t < spec.length; ++t) {
    FrameAnnotation f;
    f.frame_index = t;
    char name[32];
    std::snprintf(name, sizeof name, "%06d.ppm", t);
    f.image_path = name;
    for (std::size_t i = 0; i < movers.size(); ++i) {
      auto& m = movers[i];
      const int x0 = static_cast<int>(std::lround(m.x));
      ObjectInstance carrier;
      carrier.category = m.category;
      carrier.bbox = {double(x0), double(m.y), double(x0 + m.w), double(m.y + m.h)};
      carrier.track_id = static_cast<int>(2 * i);
      f.objects.push_back(carrier);

      const int sx0 = x0 + m.sx, sy0 = m.y + m.sy, sx1 = sx0 + m.sw, sy1 = sy0 + m.sh;
      ObjectInstance s;
      s.category = m.category == Category::Pedestrian ? Category::Face : Category::Plate;
      s.bbox = {double(sx0), double(sy0), double(sx1), double(sy1)};
      s.track_id = static_cast<int>(2 * i + 1);
      s.mask = detail::rect_mask(spec.width, spec.height, sx0, sy0, sx1, sy1);
      if (s.category == Category::Face) s.tri = detail::face_tri(spec.width, spec.height, sx0, sy0, sx1, sy1);
      f.objects.push_back(std::move(s));

      m.x += m.vx;
      if (m.x < 0.0) {
        m.x = -m.x;
        m.vx = -m.vx;
      } else if (m.x > spec.width - m.w) {
        m.x = 2.0 * (spec.width - m.w) - m.x;
        m.vx = -m.vx;
      }
    }
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

/// Draws one GT frame: a gradient background with flat-colored carriers and
/// sensitive regions.
inline Image render_frame(const FrameAnnotation& f, int width, int height, std::uint64_t salt = 0) {
  Image img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      img.set(x, y, static_cast<std::uint8_t>(x * 255 / std::max(1, width - 1)),
              static_cast<std::uint8_t>(y * 255 / std::max(1, height - 1)),
              static_cast<std::uint8_t>(((x / 8 + y / 8) % 2) ? 96 : 112));
    }
  }
  for (const auto& o : f.objects) {
    const PixelMask m = o.mask ? *o.mask : rasterize(o.bbox, width, height);
    auto c = detail::color_of(o.track_id.value_or(0), salt);
    if (o.category == Category::Face) c = {224, 172, 105};
    if (o.category == Category::Plate) c = {240, 240, 240};
    for (const auto& s : row_spans(m)) {
      for (int x = s.x0; x < s.x1; ++x) {
        // A darker stripe every third column gives plates and faces texture.
        const bool stripe = is_sensitive(o.category) && (x - s.x0) % 3 == 1;
        img.set(x, s.y, stripe ? c[0] / 2 : c[0], stripe ? c[1] / 2 : c[1], stripe ? c[2] / 2 : c[2]);
      }
    }
  }
  return img;
}

inline Scene generate(const SceneSpec& spec) {
  Scene s{generate_annotations(spec), {}};
  for (const auto& f : s.gt.frames) s.frames.push_back(render_frame(f, spec.width, spec.height, spec.seed));
  return s;
}

/// Noisy predictions derived from GT. Detections carry boxes and
/// confidences only; masks come from the per-frame segmentation maps.
inline PredictionSet corrupt(const SequenceAnnotation& gt, const NoiseSpec& noise) {
  noise.validate();
  detail::Rng rng(noise.seed);
  const int w = gt.width, h = gt.height;
  PredictionSet out;
  out.sequence.sequence_id = gt.sequence_id;
  out.sequence.width = w;
  out.sequence.height = h;
  std::map<int, int> occluded;  // track id -> frames of occlusion left

  auto jitter_box = [&](const BBox& b) {
    const double cx = b.center_x() + detail::normal(rng, noise.center_jitter_sigma);
    const double cy = b.center_y() + detail::normal(rng, noise.center_jitter_sigma);
    const double bw = std::max(2.0, b.width() + detail::normal(rng, noise.size_jitter_sigma));
    const double bh = std::max(2.0, b.height() + detail::normal(rng, noise.size_jitter_sigma));
    BBox j = BBox::from_center(cx, cy, bw, bh).clamped(w, h);
    if (j.width() < 1.0 || j.height() < 1.0) return b;
    return j;
  };

  for (const auto& gf : gt.frames) {
    FrameAnnotation f;
    f.frame_index = gf.frame_index;
    f.image_path = gf.image_path;
    SegLabelMap seg{PixelMask(w, h), PixelMask(w, h)};
    for (const auto& o : gf.objects) {
      bool hidden = false;
      if (is_sensitive(o.category) && o.track_id) {
        auto& left = occluded[*o.track_id];
        if (left > 0) {
          --left;
          hidden = true;
        } else if (detail::bernoulli(rng, noise.burst_prob)) {
          left = detail::uniform_int(rng, noise.burst_min, noise.burst_max) - 1;
          hidden = true;
        }
      }
      if (hidden) continue;
      if (!detail::bernoulli(rng, noise.drop_prob)) {
        ObjectInstance p;
        p.category = o.category;
        p.bbox = jitter_box(o.bbox);
        p.confidence = detail::uniform(rng, noise.tp_conf_min, noise.tp_conf_max);
        f.objects.push_back(p);
      }
      if (is_sensitive(o.category) && !detail::bernoulli(rng, noise.seg_drop_prob)) {
        const PixelMask gm = o.mask ? *o.mask : rasterize(o.bbox, w, h);
        if (gm.empty()) continue;
        // Each edge moves independently by up to mask_radius pixels.
        const BBox mb = min_bbox(gm);
        auto shift = [&] { return noise.mask_radius > 0 ? detail::uniform_int(rng, -noise.mask_radius, noise.mask_radius) : 0; };
        const int l = shift(), t = shift(), r = shift(), b = shift();
        BBox moved{mb.x_min + l, mb.y_min + t, mb.x_max + r, mb.y_max + b};
        if (moved.width() < 1 || moved.height() < 1) moved = mb;
        PixelMask pm = (l | t | r | b) == 0 ? gm : rasterize(moved, w, h);
        auto& dst = o.category == Category::Face ? seg.face : seg.plate;
        dst = mask_or(dst, pm);
      }
    }
    if (detail::bernoulli(rng, noise.false_positive_rate)) {
      ObjectInstance fp;
      fp.category = detail::bernoulli(rng, 0.5) ? Category::Face : Category::Plate;
      const double bw = fp.category == Category::Face ? 12.0 : 30.0;
      const double bh = fp.category == Category::Face ? 10.0 : 6.0;
      const double x = detail::uniform(rng, 0.0, std::max(0.0, w - bw));
      const double y = detail::uniform(rng, 0.0, std::max(0.0, h - bh));
      fp.bbox = BBox{x, y, x + bw, y + bh}.clamped(w, h);
      fp.confidence = detail::uniform(rng, noise.fp_conf_min, noise.fp_conf_max);
      if (fp.bbox.valid()) f.objects.push_back(fp);
    }
    f.seg = std::move(seg);
    out.sequence.frames.push_back(std::move(f));
  }
  validate(out.sequence, DocumentKind::Predictions);
  return out;
}

struct DesensScores {
  double mioff = 0.0;
  double ioff50 = 0.0;
  double ioff75 = 0.0;
};

inline DesensScores desens_scores(const SequenceAnnotation& preds, const SequenceAnnotation& gt,
                                  const RegionWeights& w = {}) {
  const auto s = sequence_scores(preds.frames, gt.frames, w, gt.width, gt.height);
  return {mioff(s).value, ioff_at(preds.frames, gt.frames, 0.5, w, gt.width, gt.height),
          ioff_at(preds.frames, gt.frames, 0.75, w, gt.width, gt.height)};
}

struct AblationVariant {
  std::string group;
  PipelineConfig config;
};

struct AblationPlan {
  std::vector<AblationVariant> variants;
  int seeds = 20;
  int jobs = 1;
  RegionWeights weights;
};

/// Table-style configs at the default window followed by a window sweep of
/// the full pipeline.
inline AblationPlan default_plan(const PipelineConfig& base = {}, int seeds = 20,
                                 std::vector<int> windows = {2, 3, 4, 5, 6, 7}) {
  AblationPlan plan;
  plan.seeds = seeds;
  auto with = [&](bool dj, bool dsj, bool kfj) {
    PipelineConfig c = base;
    c.dj = dj;
    c.dsj = dsj;
    c.kfj = kfj;
    return c;
  };
  for (auto [dj, dsj, kfj] : {std::tuple{false, false, false}, {true, false, false}, {false, true, false},
                              {false, false, true}, {true, false, true}, {false, true, true}}) {
    plan.variants.push_back({"table", with(dj, dsj, kfj)});
  }
  for (int win : windows) {
    auto c = with(false, true, true);
    c.tracker.window = win;
    plan.variants.push_back({"window-sweep", c});
  }
  return plan;
}

struct AblationRow {
  std::string group;
  std::string config;
  int window = 0;
  int seed = 0;
  DesensScores scores;
};

struct AblationAggregate {
  std::string group;
  std::string config;
  int window = 0;
  int n = 0;
  double mioff_mean = 0.0, mioff_std = 0.0, mioff_sem = 0.0;
  double ioff50_mean = 0.0, ioff75_mean = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::vector<AblationAggregate> aggregates;

  const AblationAggregate& find(const std::string& group, const std::string& config, int window) const {
    for (const auto& a : aggregates) {
      if (a.group == group && a.config == config && a.window == window) return a;
    }
    throw InvariantError("ablation: no aggregate for " + group + "/" + config);
  }
};

/// Seed i uses scene seed spec.seed + i and noise seed noise.seed + i. Seeds
/// run in parallel; results are reduced in seed order.
inline AblationReport run_ablation(const SceneSpec& spec, const NoiseSpec& noise, const AblationPlan& plan) {
  spec.validate();
  noise.validate();
  if (plan.seeds < 1) throw InvariantError("ablation: need at least one seed");
  for (const auto& v : plan.variants) v.config.validate();
  std::vector<std::vector<DesensScores>> per_seed(static_cast<std::size_t>(plan.seeds));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (int s; (s = next++) < plan.seeds;) {
      try {
        SceneSpec ss = spec;
        ss.seed = spec.seed + static_cast<std::uint64_t>(s);
        NoiseSpec ns = noise;
        ns.seed = noise.seed + static_cast<std::uint64_t>(s);
        const auto gt = generate_annotations(ss);
        const auto preds = corrupt(gt, ns);
        auto& out = per_seed[static_cast<std::size_t>(s)];
        for (const auto& v : plan.variants) {
          out.push_back(desens_scores(run_pipeline(preds, v.config).output.sequence, gt, plan.weights));
        }
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int jobs = std::clamp(plan.jobs, 1, plan.seeds);
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  AblationReport rep;
  for (std::size_t vi = 0; vi < plan.variants.size(); ++vi) {
    const auto& v = plan.variants[vi];
    AblationAggregate agg{v.group, v.config.name(), v.config.tracker.window, plan.seeds};
    std::vector<double> m;
    for (int s = 0; s < plan.seeds; ++s) {
      const auto& sc = per_seed[static_cast<std::size_t>(s)][vi];
      rep.rows.push_back({v.group, agg.config, agg.window, s, sc});
      m.push_back(sc.mioff);
      agg.ioff50_mean += sc.ioff50 / plan.seeds;
      agg.ioff75_mean += sc.ioff75 / plan.seeds;
    }
    agg.mioff_mean = std::accumulate(m.begin(), m.end(), 0.0) / plan.seeds;
    double ss = 0.0;
    for (double x : m) ss += (x - agg.mioff_mean) * (x - agg.mioff_mean);
    agg.mioff_std = plan.seeds > 1 ? std::sqrt(ss / (plan.seeds - 1)) : 0.0;
    agg.mioff_sem = agg.mioff_std / std::sqrt(static_cast<double>(plan.seeds));
    rep.aggregates.push_back(agg);
  }
  return rep;
}

inline nlohmann::json to_json(const AblationReport& r) {
  using nlohmann::json;
  json rows = json::array(), aggs = json::array();
  for (const auto& x : r.rows) {
    rows.push_back({{"group", x.group},
                    {"config", x.config},
                    {"window", x.window},
                    {"seed", x.seed},
                    {"mioff", x.scores.mioff},
                    {"ioff50", x.scores.ioff50},
                    {"ioff75", x.scores.ioff75}});
  }
  for (const auto& a : r.aggregates) {
    aggs.push_back({{"group", a.group},
                    {"config", a.config},
                    {"window", a.window},
                    {"n", a.n},
                    {"mioff_mean", a.mioff_mean},
                    {"mioff_std", a.mioff_std},
                    {"mioff_sem", a.mioff_sem},
                    {"ioff50_mean", a.ioff50_mean},
                    {"ioff75_mean", a.ioff75_mean}});
  }
  return {{"rows", rows}, {"aggregates", aggs}};
}

struct LossCheckReport {
  LossComponents components;
  double total = 0.0;
  double fd_keypoint = 0.0, fd_offset = 0.0, fd_size = 0.0, fd_seg = 0.0;
  double max_fd_error = 0.0;
  static constexpr double kTolerance = 1e-4;
  bool passed() const { return max_fd_error < kTolerance; }
};

namespace detail {

template <class T>
Tensor3<T> random_tensor(Rng& rng, int c, int h, int w, double lo, double hi) {
  Tensor3<T> t(c, h, w);
  for (auto& v : t.data) v = static_cast<T>(uniform(rng, lo, hi));
  return t;
}

/// Random L1 prediction at least `margin` away from every target value so
/// central differences never straddle a kink.
template <class T>
Tensor3<T> l1_prediction(Rng& rng, const std::vector<KeypointTarget>& ks, int h, int w, bool sizes,
                         double margin) {
  Tensor3<T> p = random_tensor<T>(rng, 2, h, w, -1.0, 1.0);
  for (const auto& k : ks) {
    const double t[2] = {sizes ? k.w : k.off_x, sizes ? k.h : k.off_y};
    for (int c = 0; c < 2; ++c) {
      const double d = uniform(rng, margin, 1.0) * (bernoulli(rng, 0.5) ? 1 : -1);
      p(c, k.iy, k.ix) = static_cast<T>(t[c] + d);
    }
  }
  return p;
}

}  // namespace detail

/// Loss components on a harness-rendered frame and the worst finite
/// difference disagreement of every analytic gradient on random 8x8 heads.
inline LossCheckReport run_losses_check(std::uint64_t seed, const LossConfig& cfg = {}) {
  using LD = long double;
  detail::Rng rng(seed);
  LossCheckReport rep;

  SceneSpec spec;
  spec.seed = seed;
  spec.length = 1;
  const auto gt = generate_annotations(spec);
  const auto tg = render_targets(gt.frames.front(), spec.width, spec.height, cfg);
  const int oh = tg.heatmap.height, ow = tg.heatmap.width;
  // Predictions are the targets pulled toward 0.5 plus noise.
  auto near = [&](const Tensor3<double>& t) {
    Tensor3<double> p = t;
    for (auto& v : p.data) v = std::clamp(0.8 * v + 0.1 + detail::normal(rng, 0.02), 0.01, 0.99);
    return p;
  };
  rep.components.keypoint = focal_keypoint_loss(near(tg.heatmap), tg.heatmap, cfg).value;
  rep.components.seg = seg_focal_loss(near(tg.seg), tg.seg, cfg).value;
  rep.components.offset =
      offset_loss(detail::l1_prediction<double>(rng, tg.keypoints, oh, ow, false, 0.01), tg.keypoints).value;
  rep.components.size =
      size_loss(detail::l1_prediction<double>(rng, tg.keypoints, oh, ow, true, 0.01), tg.keypoints).value;
  rep.total = total_loss(rep.components, cfg);

  const LD h = 1e-5L;
  const int n = 8;
  Tensor3<LD> y = detail::random_tensor<LD>(rng, 2, n, n, 0.0, 0.95);
  for (int k = 0; k < 3; ++k) y(k % 2, detail::uniform_int(rng, 0, n - 1), detail::uniform_int(rng, 0, n - 1)) = 1;
  const auto yhat = detail::random_tensor<LD>(rng, 2, n, n, 0.05, 0.95);
  rep.fd_keypoint = static_cast<double>(max_gradient_error<LD>(
      [&](const Tensor3<LD>& p) { return focal_keypoint_loss(p, y, cfg).value; }, yhat,
      focal_keypoint_loss(yhat, y, cfg).grad, h));

  Tensor3<LD> seg(3, n, n);
  for (int yy = 0; yy < n; ++yy) {
    for (int xx = 0; xx < n; ++xx) seg(detail::uniform_int(rng, 0, 2), yy, xx) = 1;
  }
  const auto seg_hat = detail::random_tensor<LD>(rng, 3, n, n, 0.05, 0.95);
  rep.fd_seg = static_cast<double>(max_gradient_error<LD>(
      [&](const Tensor3<LD>& p) { return seg_focal_loss(p, seg, cfg).value; }, seg_hat,
      seg_focal_loss(seg_hat, seg, cfg).grad, h));

  std::vector<KeypointTarget> ks;
  for (int k = 0; k < 3; ++k) {
    KeypointTarget t;
    t.ix = detail::uniform_int(rng, 0, n - 1);
    t.iy = detail::uniform_int(rng, 0, n - 1);
    t.off_x = detail::uniform(rng, 0.0, 1.0);
    t.off_y = detail::uniform(rng, 0.0, 1.0);
    t.w = detail::uniform(rng, 4.0, 40.0);
    t.h = detail::uniform(rng, 4.0, 40.0);
    ks.push_back(t);
  }
  // Targets may share a cell; keep one per cell so the kink margin holds.
  std::sort(ks.begin(), ks.end(), [](const auto& a, const auto& b) { return std::tie(a.iy, a.ix) < std::tie(b.iy, b.ix); });
  ks.erase(std::unique(ks.begin(), ks.end(), [](const auto& a, const auto& b) { return a.iy == b.iy && a.ix == b.ix; }),
           ks.end());
  const auto off_hat = detail::l1_prediction<LD>(rng, ks, n, n, false, 1e-3);
  rep.fd_offset = static_cast<double>(max_gradient_error<LD>(
      [&](const Tensor3<LD>& p) { return offset_loss(p, ks).value; }, off_hat, offset_loss(off_hat, ks).grad, h));
  const auto size_hat = detail::l1_prediction<LD>(rng, ks, n, n, true, 1e-3);
  rep.fd_size = static_cast<double>(max_gradient_error<LD>(
      [&](const Tensor3<LD>& p) { return size_loss(p, ks).value; }, size_hat, size_loss(size_hat, ks).grad, h));

  rep.max_fd_error = std::max({rep.fd_keypoint, rep.fd_offset, rep.fd_size, rep.fd_seg});
  return rep;
}

inline nlohmann::json to_json(const LossCheckReport& r) {
  return {{"components",
           {{"keypoint", r.components.keypoint},
            {"offset", r.components.offset},
            {"size", r.components.size},
            {"seg", r.components.seg}}},
          {"total", r.total},
          {"fd_error",
           {{"keypoint", r.fd_keypoint}, {"offset", r.fd_offset}, {"size", r.fd_size}, {"seg", r.fd_seg}}},
          {"max_fd_error", r.max_fd_error},
          {"tolerance", LossCheckReport::kTolerance},
          {"passed", r.passed()}};
}

}  // namespace desens
