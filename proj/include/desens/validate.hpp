#pragma once

// Invariant checks for annotation and prediction documents. Every error
// names the offending frame and object.

#include <set>
#include <string>

#include "desens/core.hpp"
#include "desens/error.hpp"
#include "desens/geometry.hpp"

namespace desens {

namespace detail {

inline std::string where(const FrameAnnotation& f, std::size_t obj) {
  return "frame " + std::to_string(f.frame_index) + ", object " + std::to_string(obj);
}

inline void check_mask_dims(const PixelMask& m, int w, int h, const std::string& what) {
  if (m.width() != w || m.height() != h) {
    throw InvariantError(what + ": mask is " + std::to_string(m.width()) + "x" +
                         std::to_string(m.height()) + ", sequence is " + std::to_string(w) + "x" +
                         std::to_string(h));
  }
}

}  // namespace detail

/// Checks the tri-region invariants: same dimensions, pairwise disjoint,
/// non-empty unless occluded, and (when given) union equal to the face mask.
inline void validate_tri(const FaceTriMask& tri, const PixelMask* face_mask,
                         const std::string& what) {
  if (!tri.above.same_dims(tri.mid) || !tri.above.same_dims(tri.below)) {
    throw InvariantError(what + ": tri-region masks differ in size");
  }
  static constexpr const char* names[3] = {"above", "mid", "below"};
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      const auto overlap = intersection_area(tri.region(i), tri.region(j));
      if (overlap > 0) {
        throw InvariantError(what + ": tri-regions " + names[i] + " and " + names[j] +
                             " overlap by " + std::to_string(overlap) + " px");
      }
    }
    if (!tri.occluded && tri.region(i).empty()) {
      throw InvariantError(what + ": tri-region " + names[i] + " is empty but face is not occluded");
    }
  }
  if (face_mask != nullptr && tri.union_mask() != *face_mask) {
    throw InvariantError(what + ": tri-region union differs from the face mask");
  }
}

inline void validate_object(const ObjectInstance& o, int width, int height, DocumentKind kind,
                            const std::string& what) {
  if (!o.bbox.valid()) throw InvariantError(what + ": degenerate or non-finite bbox");
  if (o.bbox.clamped(width, height).area() <= 0.0) {
    throw InvariantError(what + ": bbox lies outside the image");
  }
  if (o.confidence) {
    if (!(*o.confidence >= 0.0 && *o.confidence <= 1.0)) {
      throw InvariantError(what + ": confidence outside [0,1]");
    }
  } else if (kind == DocumentKind::Predictions) {
    throw InvariantError(what + ": prediction lacks a confidence");
  }
  if (o.track_id && *o.track_id < 0) throw InvariantError(what + ": negative track_id");
  if (o.mask) detail::check_mask_dims(*o.mask, width, height, what);
  if (o.tri) {
    if (o.category != Category::Face) throw InvariantError(what + ": tri-regions on a non-face");
    detail::check_mask_dims(o.tri->above, width, height, what);
    validate_tri(*o.tri, o.mask ? &*o.mask : nullptr, what);
  }
  if (kind == DocumentKind::GroundTruth) {
    if (o.mask && !o.mask->empty()) {
      const BBox mb = min_bbox(*o.mask);
      constexpr double tol = 0.5;
      if (mb.x_min < o.bbox.x_min - tol || mb.y_min < o.bbox.y_min - tol ||
          mb.x_max > o.bbox.x_max + tol || mb.y_max > o.bbox.y_max + tol) {
        throw InvariantError(what + ": bbox does not enclose the mask");
      }
    }
    if (o.category == Category::Face && !o.tri) {
      throw InvariantError(what + ": ground-truth face lacks tri-region masks");
    }
    if (o.category == Category::Plate && !o.mask) {
      throw InvariantError(what + ": ground-truth plate lacks a mask");
    }
  }
}

/// Throws InvariantError naming the offending frame/object on the first violation.
inline void validate(const SequenceAnnotation& seq, DocumentKind kind) {
  if (seq.width <= 0 || seq.height <= 0) throw InvariantError("sequence dimensions must be positive");
  int prev = -1;
  for (const auto& f : seq.frames) {
    if (f.frame_index < 0) throw InvariantError("negative frame_index");
    if (f.frame_index <= prev) {
      throw InvariantError("frame " + std::to_string(f.frame_index) +
                           ": frames not strictly ascending by frame_index");
    }
    prev = f.frame_index;
    std::set<int> ids;
    for (std::size_t i = 0; i < f.objects.size(); ++i) {
      const auto& o = f.objects[i];
      const auto what = detail::where(f, i);
      validate_object(o, seq.width, seq.height, kind, what);
      if (o.track_id && !ids.insert(*o.track_id).second) {
        throw InvariantError(what + ": duplicate track_id " + std::to_string(*o.track_id));
      }
    }
    if (f.seg) {
      const auto what = "frame " + std::to_string(f.frame_index) + " seg";
      detail::check_mask_dims(f.seg->face, seq.width, seq.height, what);
      detail::check_mask_dims(f.seg->plate, seq.width, seq.height, what);
    }
  }
}

inline void validate(const PredictionSet& p) { validate(p.sequence, DocumentKind::Predictions); }

}  // namespace desens
