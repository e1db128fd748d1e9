#pragma once

// Multitask desensitization loss: keypoint focal loss on center heatmaps,
// L1 offset and size regression, focal segmentation loss, their weighted
// sum, target rendering at output stride R and center decoding.
//
// Every loss returns its value and the analytic gradient with respect to
// the prediction tensor. Scalar type is a template parameter so the same
// code can be checked in long double against finite differences.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <tuple>
#include <vector>

#include "desens/core.hpp"
#include "desens/error.hpp"

namespace desens {

/// Dense (channel, y, x) tensor, channel-major.
template <class T>
struct Tensor3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Tensor3() = default;
  Tensor3(int c, int h, int w, T fill = T(0))
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height + y) * width + x;
  }
  T& operator()(int c, int y, int x) { return data[index(c, y, x)]; }
  const T& operator()(int c, int y, int x) const { return data[index(c, y, x)]; }
  bool same_shape(const Tensor3& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  template <class U>
  Tensor3<U> cast() const {
    Tensor3<U> out(channels, height, width);
    std::transform(data.begin(), data.end(), out.data.begin(), [](T v) { return static_cast<U>(v); });
    return out;
  }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;
};

struct LossConfig {
  double alpha = 2.0;
  double beta = 4.0;
  double lambda_off = 1.0;
  double lambda_size = 0.1;
  double lambda_seg = 0.5;
  int stride = 4;
  /// Face and plate.
  int heatmap_channels = 2;
  double epsilon = 1e-6;
  /// Overlap used to size the Gaussian splat radius.
  double min_overlap = 0.7;

  void validate() const {
    if (lambda_off < 0 || lambda_size < 0 || lambda_seg < 0) throw InvariantError("loss weights must be >= 0");
    if (stride < 1) throw InvariantError("stride must be >= 1");
    if (heatmap_channels < 1) throw InvariantError("heatmap_channels must be >= 1");
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw InvariantError("epsilon must lie in (0, 0.5)");
  }
  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

struct KeypointTarget {
  double cx = 0.0, cy = 0.0;
  int channel = 0;
  double w = 0.0, h = 0.0;
  /// Down-sampled cell floor(p / R).
  int ix = 0, iy = 0;
  double off_x = 0.0, off_y = 0.0;
};

template <class T>
struct LossValue {
  T value = T(0);
  Tensor3<T> grad;
};

/// Heatmap channel of a sensitive category; segmentation adds background as 2.
constexpr int heatmap_channel(Category c) noexcept { return c == Category::Face ? 0 : 1; }
constexpr Category channel_category(int ch) noexcept { return ch == 0 ? Category::Face : Category::Plate; }

/// Smallest radius such that a box whose corners move by it keeps IoU >=
/// min_overlap with the original (the usual CenterNet convention).
inline double gaussian_radius(double height, double width, double min_overlap) {
  const double b1 = height + width;
  const double c1 = width * height * (1 - min_overlap) / (1 + min_overlap);
  const double r1 = (b1 + std::sqrt(b1 * b1 - 4 * c1)) / 2;
  const double a2 = 4, b2 = 2 * (height + width);
  const double c2 = (1 - min_overlap) * width * height;
  const double r2 = (b2 + std::sqrt(b2 * b2 - 4 * a2 * c2)) / 2;
  const double a3 = 4 * min_overlap, b3 = -2 * min_overlap * (height + width);
  const double c3 = (min_overlap - 1) * width * height;
  const double r3 = (b3 + std::sqrt(b3 * b3 - 4 * a3 * c3)) / 2;
  return std::min({r1, r2, r3});
}

struct RenderedTargets {
  Tensor3<double> heatmap;
  std::vector<KeypointTarget> keypoints;
  /// One-hot face / plate / background at output resolution.
  Tensor3<double> seg;
};

inline KeypointTarget make_keypoint(const ObjectInstance& o, const LossConfig& cfg, int width, int height) {
  KeypointTarget k;
  k.cx = o.bbox.center_x();
  k.cy = o.bbox.center_y();
  if (!(k.cx >= 0 && k.cy >= 0 && k.cx < width && k.cy < height)) {
    throw DataError("object center lies outside the image");
  }
  k.channel = heatmap_channel(o.category);
  k.w = o.bbox.width();
  k.h = o.bbox.height();
  const double r = cfg.stride;
  k.ix = static_cast<int>(std::floor(k.cx / r));
  k.iy = static_cast<int>(std::floor(k.cy / r));
  k.off_x = k.cx / r - k.ix;
  k.off_y = k.cy / r - k.iy;
  return k;
}

/// Ground-truth tensors for the sensitive objects of one frame.
inline RenderedTargets render_targets(const FrameAnnotation& frame, int width, int height,
                                      const LossConfig& cfg) {
  cfg.validate();
  if (width % cfg.stride != 0 || height % cfg.stride != 0) {
    throw DimensionError("image dimensions must be divisible by the stride");
  }
  const int ow = width / cfg.stride, oh = height / cfg.stride;
  RenderedTargets out{Tensor3<double>(cfg.heatmap_channels, oh, ow), {}, Tensor3<double>(3, oh, ow)};
  for (const auto& o : frame.objects) {
    if (!is_sensitive(o.category)) continue;
    const auto k = make_keypoint(o, cfg, width, height);
    if (k.channel >= cfg.heatmap_channels) throw DimensionError("heatmap has too few channels");
    out.keypoints.push_back(k);
    const double rad = gaussian_radius(k.h / cfg.stride, k.w / cfg.stride, cfg.min_overlap);
    const double sigma = std::max(1.0, rad / 3.0);
    const int reach = static_cast<int>(std::ceil(3.0 * sigma));
    for (int y = std::max(0, k.iy - reach); y <= std::min(oh - 1, k.iy + reach); ++y) {
      for (int x = std::max(0, k.ix - reach); x <= std::min(ow - 1, k.ix + reach); ++x) {
        const double dx = x - k.ix, dy = y - k.iy;
        const double g = (dx == 0 && dy == 0) ? 1.0 : std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
        auto& v = out.heatmap(k.channel, y, x);
        v = std::max(v, g);
      }
    }
  }
  // Nearest-sample down-sampling: each output cell reads the input pixel at
  // its center.
  std::vector<std::pair<int, PixelMask>> masks;
  for (const auto& o : frame.objects) {
    if (!is_sensitive(o.category)) continue;
    masks.emplace_back(heatmap_channel(o.category), o.mask ? *o.mask : rasterize(o.bbox, width, height));
  }
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const int px = x * cfg.stride + cfg.stride / 2, py = y * cfg.stride + cfg.stride / 2;
      int label = 2;
      for (const auto& [ch, m] : masks) {
        if (m.get(px, py)) {
          label = ch;
          break;
        }
      }
      out.seg(label, y, x) = 1.0;
    }
  }
  return out;
}

/// Penalty-reduced focal loss over a heatmap, normalized by the number of
/// positive (== 1) target cells.
template <class T>
LossValue<T> focal_keypoint_loss(const Tensor3<T>& pred, const Tensor3<T>& target, const LossConfig& cfg) {
  if (!pred.same_shape(target)) throw DimensionError("focal loss: shape mismatch");
  const T eps = static_cast<T>(cfg.epsilon);
  const T a = static_cast<T>(cfg.alpha), b = static_cast<T>(cfg.beta);
  LossValue<T> out{T(0), Tensor3<T>(pred.channels, pred.height, pred.width)};
  std::size_t n = 0;
  for (const auto& y : target.data) n += (y == T(1));
  if (n == 0) throw EmptyError("focal loss: no positive cells");
  const T inv_n = T(1) / static_cast<T>(n);
  using std::log;
  using std::pow;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const T raw = pred.data[i];
    const T p = std::clamp(raw, eps, T(1) - eps);
    const bool inside = raw > eps && raw < T(1) - eps;
    const T y = target.data[i];
    T v, g;
    if (y == T(1)) {
      v = -pow(T(1) - p, a) * log(p);
      g = a * pow(T(1) - p, a - T(1)) * log(p) - pow(T(1) - p, a) / p;
    } else {
      const T w = pow(T(1) - y, b);
      v = -w * pow(p, a) * log(T(1) - p);
      g = -w * (a * pow(p, a - T(1)) * log(T(1) - p) - pow(p, a) / (T(1) - p));
    }
    out.value += v * inv_n;
    out.grad.data[i] = inside ? g * inv_n : T(0);
  }
  return out;
}

/// Segmentation focal loss over the 3-class map; same form as the keypoint
/// loss, normalized by the number of positive pixels.
template <class T>
LossValue<T> seg_focal_loss(const Tensor3<T>& pred, const Tensor3<T>& target, const LossConfig& cfg) {
  if (pred.channels != 3 || target.channels != 3) throw DimensionError("seg loss: expected 3 channels");
  return focal_keypoint_loss(pred, target, cfg);
}

namespace detail {

template <class T>
LossValue<T> l1_at_keypoints(const Tensor3<T>& pred, const std::vector<KeypointTarget>& targets,
                             bool sizes, const char* name) {
  if (targets.empty()) throw EmptyError(std::string(name) + ": no targets");
  if (pred.channels != 2) throw DimensionError(std::string(name) + ": expected 2 channels");
  LossValue<T> out{T(0), Tensor3<T>(pred.channels, pred.height, pred.width)};
  const T inv_n = T(1) / static_cast<T>(targets.size());
  for (const auto& k : targets) {
    if (k.ix < 0 || k.iy < 0 || k.ix >= pred.width || k.iy >= pred.height) {
      throw DimensionError(std::string(name) + ": target outside the tensor");
    }
    const T t[2] = {static_cast<T>(sizes ? k.w : k.off_x), static_cast<T>(sizes ? k.h : k.off_y)};
    for (int c = 0; c < 2; ++c) {
      const T d = pred(c, k.iy, k.ix) - t[c];
      out.value += (d < T(0) ? -d : d) * inv_n;
      out.grad(c, k.iy, k.ix) += (d > T(0) ? inv_n : (d < T(0) ? -inv_n : T(0)));
    }
  }
  return out;
}

}  // namespace detail

/// Mean L1 offset error at the annotated cells (channels: x, y).
template <class T>
LossValue<T> offset_loss(const Tensor3<T>& pred, const std::vector<KeypointTarget>& targets) {
  return detail::l1_at_keypoints(pred, targets, false, "offset loss");
}

/// Mean L1 size error at the annotated cells (channels: w, h in input pixels).
template <class T>
LossValue<T> size_loss(const Tensor3<T>& pred, const std::vector<KeypointTarget>& targets) {
  return detail::l1_at_keypoints(pred, targets, true, "size loss");
}

struct LossComponents {
  double keypoint = 0.0;
  double offset = 0.0;
  double size = 0.0;
  double seg = 0.0;
};

inline double total_loss(const LossComponents& c, const LossConfig& cfg) {
  for (double v : {c.keypoint, c.offset, c.size, c.seg}) {
    if (!std::isfinite(v)) throw InvariantError("total_loss: non-finite component");
  }
  // Accumulate wide so the sum rounds once.
  const long double sum = static_cast<long double>(c.keypoint) +
                          static_cast<long double>(cfg.lambda_off) * c.offset +
                          static_cast<long double>(cfg.lambda_size) * c.size +
                          static_cast<long double>(cfg.lambda_seg) * c.seg;
  return static_cast<double>(sum);
}

/// Dense offset and size tensors holding the targets at their cells.
inline std::pair<Tensor3<double>, Tensor3<double>> target_tensors(const std::vector<KeypointTarget>& targets,
                                                                  int out_h, int out_w) {
  Tensor3<double> off(2, out_h, out_w), size(2, out_h, out_w);
  for (const auto& k : targets) {
    off(0, k.iy, k.ix) = k.off_x;
    off(1, k.iy, k.ix) = k.off_y;
    size(0, k.iy, k.ix) = k.w;
    size(1, k.iy, k.ix) = k.h;
  }
  return {std::move(off), std::move(size)};
}

struct DecodedDetection {
  Category category = Category::Face;
  double score = 0.0;
  double cx = 0.0, cy = 0.0;
  BBox bbox;
  int channel = 0, ix = 0, iy = 0;
};

/// Cells that are >= all 8 neighbours, best top_k by score; equal scores are
/// ordered by (channel, y, x).
inline std::vector<DecodedDetection> decode_detections(const Tensor3<double>& heat, const Tensor3<double>& size,
                                                       const Tensor3<double>& off, std::size_t top_k,
                                                       const LossConfig& cfg) {
  if (size.channels != 2 || off.channels != 2 || size.height != heat.height || size.width != heat.width ||
      !size.same_shape(off)) {
    throw DimensionError("decode: inconsistent head shapes");
  }
  std::vector<std::tuple<double, int, int, int>> peaks;
  for (int c = 0; c < heat.channels; ++c) {
    for (int y = 0; y < heat.height; ++y) {
      for (int x = 0; x < heat.width; ++x) {
        const double v = heat(c, y, x);
        bool peak = true;
        for (int dy = -1; dy <= 1 && peak; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = y + dy, nx = x + dx;
            if ((dx == 0 && dy == 0) || ny < 0 || nx < 0 || ny >= heat.height || nx >= heat.width) continue;
            if (heat(c, ny, nx) > v) {
              peak = false;
              break;
            }
          }
        }
        if (peak) peaks.emplace_back(v, c, y, x);
      }
    }
  }
  std::sort(peaks.begin(), peaks.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    return std::tie(std::get<1>(a), std::get<2>(a), std::get<3>(a)) <
           std::tie(std::get<1>(b), std::get<2>(b), std::get<3>(b));
  });
  if (peaks.size() > top_k) peaks.resize(top_k);
  std::vector<DecodedDetection> out;
  const double r = cfg.stride;
  for (const auto& [v, c, y, x] : peaks) {
    DecodedDetection d;
    d.category = channel_category(c);
    d.score = v;
    d.channel = c;
    d.ix = x;
    d.iy = y;
    d.cx = (x + off(0, y, x)) * r;
    d.cy = (y + off(1, y, x)) * r;
    d.bbox = BBox::from_center(d.cx, d.cy, size(0, y, x), size(1, y, x));
    out.push_back(d);
  }
  return out;
}

/// Largest relative error between an analytic gradient and central
/// differences of f, evaluated at every coordinate of x.
template <class T>
T max_gradient_error(const std::function<T(const Tensor3<T>&)>& f, const Tensor3<T>& x,
                     const Tensor3<T>& analytic, T h) {
  T worst = T(0);
  Tensor3<T> probe = x;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const T orig = probe.data[i];
    probe.data[i] = orig + h;
    const T fp = f(probe);
    probe.data[i] = orig - h;
    const T fm = f(probe);
    probe.data[i] = orig;
    const T numeric = (fp - fm) / (T(2) * h);
    const T a = analytic.data[i];
    const T scale = std::max(std::abs(a), std::abs(numeric));
    if (scale < T(1e-12)) continue;
    worst = std::max(worst, std::abs(a - numeric) / scale);
  }
  return worst;
}

}  // namespace desens
