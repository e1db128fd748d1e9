#pragma once

// KFJ: constant-velocity Kalman smoothing of sensitive-object centers with
// bounded coasting over missed detections.
//
// State is (cx, cy, vx, vy) in pixels and pixels/frame. Box size is not part
// of the filter; it is smoothed separately with an exponential moving average.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "desens/core.hpp"
#include "desens/error.hpp"
#include "desens/geometry.hpp"
#include "desens/postproc.hpp"

namespace desens {

struct TrackerConfig {
  /// Longest run of misses a track survives; a track is dropped on the
  /// window-th consecutive miss.
  int window = 4;
  double process_noise = 1e-2;
  double measurement_noise = 1e-1;
  double init_covariance = 10.0;
  /// Fixed association gate in pixels. 0 selects the adaptive gate
  /// gate_diagonals * (diagonal of the track's smoothed size).
  double gate_distance = 0.0;
  double gate_diagonals = 2.0;
  double size_alpha = 0.5;
  /// Updates a track needs before it may coast. 0 means max(2, window).
  int min_hits_to_coast = 0;

  int coast_maturity() const { return min_hits_to_coast > 0 ? min_hits_to_coast : std::max(2, window); }

  void validate() const {
    if (window < 1) throw InvariantError("tracker window must be >= 1");
    if (!(process_noise > 0.0) || !(measurement_noise > 0.0) || !(init_covariance > 0.0)) {
      throw InvariantError("tracker noise terms must be positive");
    }
    if (!(gate_distance >= 0.0) || !(gate_diagonals > 0.0)) throw InvariantError("tracker gate must be positive");
    if (!(size_alpha > 0.0 && size_alpha <= 1.0)) throw InvariantError("size_alpha must lie in (0,1]");
    if (min_hits_to_coast < 0) throw InvariantError("min_hits_to_coast must be >= 0");
  }
  friend bool operator==(const TrackerConfig&, const TrackerConfig&) = default;
};

struct KalmanTrack {
  Eigen::Vector4d state = Eigen::Vector4d::Zero();
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Identity();
  Eigen::Vector2d smoothed_size = Eigen::Vector2d::Zero();
  int age = 1;
  int misses = 0;
  bool may_coast = false;
  Category category = Category::Face;
  int track_id = 0;
  double confidence = 0.0;
  /// Last observed mask and the center it was observed at; coasted output
  /// shifts this mask to the predicted center.
  PixelMask last_mask;
  Eigen::Vector2d last_center = Eigen::Vector2d::Zero();

  Eigen::Vector2d center() const { return state.head<2>(); }
  BBox box() const {
    return BBox::from_center(state(0), state(1), smoothed_size(0), smoothed_size(1));
  }
};

namespace detail {

inline Eigen::Matrix4d transition() {
  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(0, 2) = 1.0;
  f(1, 3) = 1.0;
  return f;
}

inline bool finite(double v) { return std::isfinite(v); }

}  // namespace detail

inline KalmanTrack spawn_track(const Eigen::Vector2d& center, const Eigen::Vector2d& size,
                               Category category, int track_id, const TrackerConfig& cfg) {
  KalmanTrack t;
  t.state << center(0), center(1), 0.0, 0.0;
  t.covariance = Eigen::Matrix4d::Identity() * cfg.init_covariance;
  t.smoothed_size = size;
  t.category = category;
  t.track_id = track_id;
  t.last_center = center;
  return t;
}

/// x' = F x, P' = F P F^T + Q.
inline KalmanTrack predict(KalmanTrack t, const TrackerConfig& cfg) {
  const Eigen::Matrix4d f = detail::transition();
  t.state = f * t.state;
  Eigen::Matrix4d p = f * t.covariance * f.transpose();
  p += Eigen::Matrix4d::Identity() * cfg.process_noise;
  t.covariance = 0.5 * (p + p.transpose());
  return t;
}

/// Kalman correction of the center; the size follows an EMA.
inline KalmanTrack update(KalmanTrack t, const Eigen::Vector2d& center, const Eigen::Vector2d& size,
                          const TrackerConfig& cfg) {
  if (!detail::finite(center(0)) || !detail::finite(center(1)) || !detail::finite(size(0)) ||
      !detail::finite(size(1))) {
    throw DataError("tracker update: non-finite measurement");
  }
  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  const Eigen::Matrix2d r = Eigen::Matrix2d::Identity() * cfg.measurement_noise;
  const Eigen::Matrix2d s = h * t.covariance * h.transpose() + r;
  const Eigen::Matrix<double, 4, 2> k = t.covariance * h.transpose() * s.inverse();
  t.state += k * (center - h * t.state);
  // Joseph form keeps the covariance symmetric positive definite.
  const Eigen::Matrix4d ikh = Eigen::Matrix4d::Identity() - k * h;
  Eigen::Matrix4d p = ikh * t.covariance * ikh.transpose() + k * r * k.transpose();
  t.covariance = 0.5 * (p + p.transpose());
  t.smoothed_size = cfg.size_alpha * size + (1.0 - cfg.size_alpha) * t.smoothed_size;
  t.misses = 0;
  t.may_coast = false;
  ++t.age;
  return t;
}

struct StepResult {
  std::vector<DesensRegion> emitted;
  std::vector<AuditEntry> conflicts;
};

/// Stateful KFJ over one sequence. Frames must arrive in ascending order.
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  const TrackerConfig& config() const { return cfg_; }
  const std::vector<KalmanTrack>& tracks() const { return tracks_; }

  /// `rejected` is the frame's audit list; coasted output overlapping a
  /// rejected detection of the same category is reported as a conflict.
  StepResult step_frame(int frame_index, std::span<const DesensRegion> detections,
                        std::span<const AuditEntry> rejected = {}) {
    if (last_frame_ && frame_index <= *last_frame_) {
      throw DataError("tracker: frame " + std::to_string(frame_index) + " is not after frame " +
                      std::to_string(*last_frame_));
    }
    last_frame_ = frame_index;
    for (auto& t : tracks_) t = predict(std::move(t), cfg_);

    std::vector<Eigen::Vector2d> centers, sizes;
    for (const auto& d : detections) {
      centers.emplace_back(d.source_box.center_x(), d.source_box.center_y());
      sizes.emplace_back(d.source_box.width(), d.source_box.height());
    }

    // Greedy nearest-center association, same category, inside the gate.
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t ti = 0; ti < tracks_.size(); ++ti) {
      const auto& t = tracks_[ti];
      const double gate = cfg_.gate_distance > 0.0 ? cfg_.gate_distance
                                                   : cfg_.gate_diagonals * t.smoothed_size.norm();
      for (std::size_t di = 0; di < detections.size(); ++di) {
        if (detections[di].category != t.category) continue;
        const double dist = (centers[di] - t.center()).norm();
        if (dist <= gate) pairs.emplace_back(dist, ti, di);
      }
    }
    std::sort(pairs.begin(), pairs.end());
    std::vector<int> det_track(detections.size(), -1);
    std::vector<bool> track_hit(tracks_.size(), false);
    for (const auto& [dist, ti, di] : pairs) {
      if (track_hit[ti] || det_track[di] >= 0) continue;
      track_hit[ti] = true;
      det_track[di] = static_cast<int>(ti);
    }

    StepResult out;
    for (std::size_t di = 0; di < detections.size(); ++di) {
      const auto& d = detections[di];
      KalmanTrack* t;
      if (det_track[di] >= 0) {
        t = &tracks_[static_cast<std::size_t>(det_track[di])];
        *t = update(std::move(*t), centers[di], sizes[di], cfg_);
      } else {
        tracks_.push_back(spawn_track(centers[di], sizes[di], d.category, next_id_++, cfg_));
        track_hit.push_back(true);
        t = &tracks_.back();
      }
      t->confidence = d.confidence;
      t->last_mask = d.mask;
      t->last_center = centers[di];
      DesensRegion r = d;
      r.source_box = t->box();
      r.track_id = t->track_id;
      out.emitted.push_back(std::move(r));
    }

    std::vector<KalmanTrack> kept;
    kept.reserve(tracks_.size());
    for (std::size_t ti = 0; ti < tracks_.size(); ++ti) {
      auto& t = tracks_[ti];
      if (track_hit[ti]) {
        kept.push_back(std::move(t));
        continue;
      }
      if (t.misses == 0) t.may_coast = t.age >= cfg_.coast_maturity();
      ++t.misses;
      if (t.misses >= cfg_.window) continue;
      if (t.may_coast) {
        auto region = coast(t);
        if (region) {
          for (const auto& a : rejected) {
            if (a.category == t.category && box_iou(a.box, region->source_box) > 0.0) {
              out.conflicts.push_back({frame_index, t.category, region->source_box, t.confidence,
                                       RejectReason::CoastConflict, box_iou(a.box, region->source_box)});
              break;
            }
          }
          out.emitted.push_back(std::move(*region));
        }
      }
      kept.push_back(std::move(t));
    }
    tracks_ = std::move(kept);
    return out;
  }

 private:
  std::optional<DesensRegion> coast(const KalmanTrack& t) const {
    const Eigen::Vector2d shift = t.center() - t.last_center;
    PixelMask m = translate(t.last_mask, static_cast<int>(std::lround(shift(0))),
                            static_cast<int>(std::lround(shift(1))));
    if (m.empty()) return std::nullopt;
    return DesensRegion{t.category, std::move(m), t.box(), t.confidence, RegionOrigin::Coasted,
                        t.track_id};
  }

  TrackerConfig cfg_;
  std::vector<KalmanTrack> tracks_;
  std::optional<int> last_frame_;
  int next_id_ = 0;
};

}  // namespace desens
