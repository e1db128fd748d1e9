#pragma once

// Annotation / prediction documents.
//
// {
//   "sequence_id": "seq-0", "width": 640, "height": 480,
//   "frames": [{
//     "frame_index": 0, "image_path": "000000.ppm",
//     "objects": [{
//       "category": "face",              // pedestrian | car | face | plate
//       "bbox": [x_min, y_min, x_max, y_max],
//       "confidence": 0.93,              // predictions only
//       "track_id": 7,
//       "mask_rle": [n0, n1, ...],       // row-major runs, starting with a 0-run
//       "mask_bits": "0011...",          // input only; normalized to mask_rle
//       "tri": {"above": [...], "mid": [...], "below": [...], "occluded": false},
//       "coasted": true                  // written only when set
//     }],
//     "seg": {"face": [...], "plate": [...]}   // prediction label maps
//   }]
// }
//
// serialize_* emits sorted keys, two-space indentation and shortest
// round-trip number formatting, so equal values give identical bytes.

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "desens/core.hpp"
#include "desens/error.hpp"
#include "desens/validate.hpp"

namespace desens {

using Json = nlohmann::json;

namespace detail {

inline const Json& require(const Json& obj, const char* key, const std::string& ctx) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(ctx + ": missing field \"" + key + "\"");
  return *it;
}

inline void reject_unknown(const Json& obj, std::initializer_list<std::string_view> allowed,
                           const std::string& ctx) {
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == k;
    if (!ok) throw ParseError(ctx + ": unknown field \"" + k + "\"");
  }
}

inline int get_int(const Json& j, const std::string& ctx) {
  if (!j.is_number_integer()) throw ParseError(ctx + ": expected an integer");
  return j.get<int>();
}

inline double get_number(const Json& j, const std::string& ctx) {
  if (!j.is_number()) throw ParseError(ctx + ": expected a number");
  return j.get<double>();
}

inline PixelMask parse_rle(const Json& j, int w, int h, const std::string& ctx) {
  if (!j.is_array()) throw ParseError(ctx + ": RLE must be an array of run lengths");
  std::vector<PixelMask::Run> runs;
  runs.reserve(j.size());
  for (const auto& r : j) {
    if (!r.is_number_unsigned()) throw ParseError(ctx + ": run lengths must be non-negative integers");
    runs.push_back(r.get<PixelMask::Run>());
  }
  try {
    return PixelMask::from_runs(w, h, runs);
  } catch (const Error& e) {
    throw InvariantError(ctx + ": " + e.what());
  }
}

inline PixelMask parse_bits(const Json& j, int w, int h, const std::string& ctx) {
  if (!j.is_string()) throw ParseError(ctx + ": mask_bits must be a string of 0/1");
  const auto& s = j.get_ref<const std::string&>();
  std::vector<std::uint8_t> bits;
  bits.reserve(s.size());
  for (char c : s) {
    if (c != '0' && c != '1') throw ParseError(ctx + ": mask_bits may contain only 0 and 1");
    bits.push_back(c == '1');
  }
  try {
    return PixelMask::from_dense(w, h, bits);
  } catch (const Error& e) {
    throw InvariantError(ctx + ": " + e.what());
  }
}

inline Json rle_json(const PixelMask& m) { return Json(m.runs()); }

inline ObjectInstance parse_object(const Json& j, int w, int h, const std::string& ctx) {
  if (!j.is_object()) throw ParseError(ctx + ": object must be a JSON object");
  reject_unknown(j, {"category", "bbox", "confidence", "track_id", "mask_rle", "mask_bits", "tri",
                     "coasted"},
                 ctx);
  ObjectInstance o;
  const auto& cat = require(j, "category", ctx);
  if (!cat.is_string()) throw ParseError(ctx + ": category must be a string");
  try {
    o.category = category_from_string(cat.get<std::string>());
  } catch (const ParseError& e) {
    throw ParseError(ctx + ": " + e.what());
  }
  const auto& bb = require(j, "bbox", ctx);
  if (!bb.is_array() || bb.size() != 4) throw ParseError(ctx + ": bbox must be [x0, y0, x1, y1]");
  o.bbox = {get_number(bb[0], ctx + " bbox"), get_number(bb[1], ctx + " bbox"),
            get_number(bb[2], ctx + " bbox"), get_number(bb[3], ctx + " bbox")};
  if (auto it = j.find("confidence"); it != j.end()) o.confidence = get_number(*it, ctx + " confidence");
  if (auto it = j.find("track_id"); it != j.end()) o.track_id = get_int(*it, ctx + " track_id");
  if (j.contains("mask_rle") && j.contains("mask_bits")) {
    throw ParseError(ctx + ": give either mask_rle or mask_bits, not both");
  }
  if (auto it = j.find("mask_rle"); it != j.end()) o.mask = parse_rle(*it, w, h, ctx + " mask_rle");
  if (auto it = j.find("mask_bits"); it != j.end()) o.mask = parse_bits(*it, w, h, ctx + " mask_bits");
  if (auto it = j.find("tri"); it != j.end()) {
    const auto& t = *it;
    if (!t.is_object()) throw ParseError(ctx + ": tri must be an object");
    reject_unknown(t, {"above", "mid", "below", "occluded"}, ctx + " tri");
    FaceTriMask tri{parse_rle(require(t, "above", ctx + " tri"), w, h, ctx + " tri.above"),
                    parse_rle(require(t, "mid", ctx + " tri"), w, h, ctx + " tri.mid"),
                    parse_rle(require(t, "below", ctx + " tri"), w, h, ctx + " tri.below")};
    if (auto oc = t.find("occluded"); oc != t.end()) {
      if (!oc->is_boolean()) throw ParseError(ctx + ": tri.occluded must be a boolean");
      tri.occluded = oc->get<bool>();
    }
    o.tri = std::move(tri);
  }
  if (auto it = j.find("coasted"); it != j.end()) {
    if (!it->is_boolean()) throw ParseError(ctx + ": coasted must be a boolean");
    o.coasted = it->get<bool>();
  }
  return o;
}

inline Json object_json(const ObjectInstance& o) {
  Json j = Json::object();
  j["category"] = std::string(to_string(o.category));
  j["bbox"] = {o.bbox.x_min, o.bbox.y_min, o.bbox.x_max, o.bbox.y_max};
  if (o.confidence) j["confidence"] = *o.confidence;
  if (o.track_id) j["track_id"] = *o.track_id;
  if (o.mask) j["mask_rle"] = rle_json(*o.mask);
  if (o.tri) {
    j["tri"] = {{"above", rle_json(o.tri->above)},
                {"mid", rle_json(o.tri->mid)},
                {"below", rle_json(o.tri->below)},
                {"occluded", o.tri->occluded}};
  }
  if (o.coasted) j["coasted"] = true;
  return j;
}

inline SequenceAnnotation sequence_from_json(const Json& doc, DocumentKind kind) {
  if (!doc.is_object()) throw ParseError("document root must be an object");
  reject_unknown(doc, {"sequence_id", "width", "height", "frames"}, "document");
  SequenceAnnotation seq;
  const auto& id = require(doc, "sequence_id", "document");
  if (!id.is_string()) throw ParseError("document: sequence_id must be a string");
  seq.sequence_id = id.get<std::string>();
  seq.width = get_int(require(doc, "width", "document"), "document width");
  seq.height = get_int(require(doc, "height", "document"), "document height");
  if (seq.width <= 0 || seq.height <= 0) throw InvariantError("document: width/height must be positive");
  const auto& frames = require(doc, "frames", "document");
  if (!frames.is_array()) throw ParseError("document: frames must be an array");
  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const auto& fj = frames[fi];
    std::string ctx = "frames[" + std::to_string(fi) + "]";
    if (!fj.is_object()) throw ParseError(ctx + ": frame must be an object");
    reject_unknown(fj, {"frame_index", "image_path", "objects", "seg"}, ctx);
    FrameAnnotation f;
    f.frame_index = get_int(require(fj, "frame_index", ctx), ctx + " frame_index");
    ctx = "frame " + std::to_string(f.frame_index);
    if (auto it = fj.find("image_path"); it != fj.end()) {
      if (!it->is_string()) throw ParseError(ctx + ": image_path must be a string");
      f.image_path = it->get<std::string>();
    }
    const auto& objs = require(fj, "objects", ctx);
    if (!objs.is_array()) throw ParseError(ctx + ": objects must be an array");
    for (std::size_t oi = 0; oi < objs.size(); ++oi) {
      auto o = parse_object(objs[oi], seq.width, seq.height, where(f, oi));
      if (o.tri && !o.mask) o.mask = o.tri->union_mask();
      f.objects.push_back(std::move(o));
    }
    if (auto it = fj.find("seg"); it != fj.end()) {
      if (!it->is_object()) throw ParseError(ctx + ": seg must be an object");
      reject_unknown(*it, {"face", "plate"}, ctx + " seg");
      f.seg = SegLabelMap{parse_rle(require(*it, "face", ctx + " seg"), seq.width, seq.height,
                                    ctx + " seg.face"),
                          parse_rle(require(*it, "plate", ctx + " seg"), seq.width, seq.height,
                                    ctx + " seg.plate")};
    }
    seq.frames.push_back(std::move(f));
  }
  validate(seq, kind);
  return seq;
}

inline Json sequence_to_json(const SequenceAnnotation& seq) {
  Json frames = Json::array();
  for (const auto& f : seq.frames) {
    Json fj = Json::object();
    fj["frame_index"] = f.frame_index;
    if (f.image_path) fj["image_path"] = *f.image_path;
    Json objs = Json::array();
    for (const auto& o : f.objects) objs.push_back(object_json(o));
    fj["objects"] = std::move(objs);
    if (f.seg) fj["seg"] = {{"face", rle_json(f.seg->face)}, {"plate", rle_json(f.seg->plate)}};
    frames.push_back(std::move(fj));
  }
  return {{"sequence_id", seq.sequence_id},
          {"width", seq.width},
          {"height", seq.height},
          {"frames", std::move(frames)}};
}

inline Json parse_json_text(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("malformed document: ") + e.what());
  }
}

}  // namespace detail

/// Canonical text for any JSON value produced by this library.
inline std::string canonical_text(const Json& j) { return j.dump(2) + "\n"; }

inline SequenceAnnotation parse_sequence(std::string_view text) {
  return detail::sequence_from_json(detail::parse_json_text(text), DocumentKind::GroundTruth);
}

inline std::string serialize_sequence(const SequenceAnnotation& seq) {
  return canonical_text(detail::sequence_to_json(seq));
}

inline PredictionSet parse_predictions(std::string_view text) {
  return {detail::sequence_from_json(detail::parse_json_text(text), DocumentKind::Predictions)};
}

inline std::string serialize_predictions(const PredictionSet& p) {
  return canonical_text(detail::sequence_to_json(p.sequence));
}

}  // namespace desens
