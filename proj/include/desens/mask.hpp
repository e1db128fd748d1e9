#pragma once

// Binary pixel masks stored as row-major run-length encodings.
//
// Runs alternate background/foreground and always start with a (possibly
// empty) background run, the same layout COCO's RLE uses. All set algebra
// walks the run lists directly, so cost scales with the number of runs and
// not with the frame size.

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "desens/error.hpp"

namespace desens {

class PixelMask {
 public:
  using Run = std::uint32_t;

  PixelMask() = default;

  /// Empty (all-background) mask of the given size.
  PixelMask(int width, int height) : width_(width), height_(height) {
    check_dims(width, height);
    runs_[0] = static_cast<Run>(pixel_count());
  }

  /// Builds a mask from run lengths; zero-length interior runs are folded away.
  static PixelMask from_runs(int width, int height, std::span<const Run> runs) {
    check_dims(width, height);
    PixelMask m;
    m.width_ = width;
    m.height_ = height;
    std::uint64_t total = 0;
    bool value = false;
    for (Run r : runs) {
      total += r;
      m.push_run(value, r);
      value = !value;
    }
    if (total != m.pixel_count()) {
      throw InvariantError("RLE runs cover " + std::to_string(total) + " pixels, expected " +
                           std::to_string(m.pixel_count()));
    }
    return m;
  }

  static PixelMask from_dense(int width, int height, std::span<const std::uint8_t> bits) {
    check_dims(width, height);
    PixelMask m;
    m.width_ = width;
    m.height_ = height;
    if (bits.size() != m.pixel_count()) {
      throw DimensionError("dense mask has " + std::to_string(bits.size()) + " pixels, expected " +
                           std::to_string(m.pixel_count()));
    }
    bool value = false;
    Run len = 0;
    for (std::uint8_t b : bits) {
      bool v = b != 0;
      if (v != value) {
        m.push_run(value, len);
        value = v;
        len = 0;
      }
      ++len;
    }
    m.push_run(value, len);
    return m;
  }

  /// Pixels with x in [x0, x1) and y in [y0, y1), clipped to the frame.
  static PixelMask from_rect(int width, int height, int x0, int y0, int x1, int y1) {
    PixelMask m(width, height);
    x0 = std::clamp(x0, 0, width);
    x1 = std::clamp(x1, 0, width);
    y0 = std::clamp(y0, 0, height);
    y1 = std::clamp(y1, 0, height);
    if (x0 >= x1 || y0 >= y1) return m;
    m.runs_ = {0};
    const auto w = static_cast<std::uint64_t>(width);
    std::uint64_t cursor = 0;
    auto emit = [&](bool v, std::uint64_t until) {
      if (until > cursor) {
        m.push_run(v, static_cast<Run>(until - cursor));
        cursor = until;
      }
    };
    for (int y = y0; y < y1; ++y) {
      emit(false, y * w + x0);
      emit(true, y * w + x1);
    }
    emit(false, m.pixel_count());
    return m;
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::uint64_t pixel_count() const noexcept {
    return static_cast<std::uint64_t>(width_) * static_cast<std::uint64_t>(height_);
  }
  const std::vector<Run>& runs() const noexcept { return runs_; }

  std::uint64_t area() const noexcept {
    std::uint64_t a = 0;
    for (std::size_t i = 1; i < runs_.size(); i += 2) a += runs_[i];
    return a;
  }
  bool empty() const noexcept { return area() == 0; }

  bool get(int x, int y) const {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) return false;
    const std::uint64_t idx = static_cast<std::uint64_t>(y) * width_ + x;
    std::uint64_t pos = 0;
    for (std::size_t i = 0; i < runs_.size(); ++i) {
      pos += runs_[i];
      if (idx < pos) return (i % 2) == 1;
    }
    return false;
  }

  std::vector<std::uint8_t> to_dense() const {
    std::vector<std::uint8_t> out(pixel_count(), 0);
    std::uint64_t pos = 0;
    for (std::size_t i = 0; i < runs_.size(); ++i) {
      if (i % 2 == 1) std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(pos), runs_[i], 1);
      pos += runs_[i];
    }
    return out;
  }

  /// Calls fn(begin, end) for every foreground run, as linear pixel indices.
  template <typename Fn>
  void for_each_run(Fn&& fn) const {
    std::uint64_t pos = 0;
    for (std::size_t i = 0; i < runs_.size(); ++i) {
      if (i % 2 == 1) fn(pos, pos + runs_[i]);
      pos += runs_[i];
    }
  }

  bool same_dims(const PixelMask& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_;
  }

  friend bool operator==(const PixelMask&, const PixelMask&) = default;

 private:
  static void check_dims(int width, int height) {
    if (width < 0 || height < 0) throw DimensionError("negative mask dimensions");
  }

  // Appends a run of `value`, merging with the previous run when possible.
  // runs_ always holds the leading background run, which may be zero-length.
  void push_run(bool value, Run len) {
    if (len == 0) return;
    const bool last_is_fg = runs_.size() % 2 == 0;
    if (last_is_fg == value) {
      runs_.back() += len;
    } else {
      runs_.push_back(len);
    }
  }

  template <typename Op>
  friend PixelMask combine(const PixelMask& a, const PixelMask& b, Op op);

  int width_ = 0;
  int height_ = 0;
  std::vector<Run> runs_{0};
};

namespace detail {

// Walks two run lists in lockstep, calling visit(len, va, vb) per segment.
template <typename Visit>
void walk_runs(const PixelMask& a, const PixelMask& b, Visit&& visit) {
  const auto& ra = a.runs();
  const auto& rb = b.runs();
  std::size_t ia = 0, ib = 0;
  std::uint64_t la = ra[0];
  std::uint64_t lb = rb[0];
  auto advance = [](const std::vector<PixelMask::Run>& r, std::size_t& i, std::uint64_t& left) {
    while (left == 0 && i + 1 < r.size()) left = r[++i];
  };
  advance(ra, ia, la);
  advance(rb, ib, lb);
  while (la > 0 && lb > 0) {
    const std::uint64_t step = std::min(la, lb);
    visit(step, ia % 2 == 1, ib % 2 == 1);
    la -= step;
    lb -= step;
    advance(ra, ia, la);
    advance(rb, ib, lb);
  }
}

inline void require_same_dims(const PixelMask& a, const PixelMask& b, const char* what) {
  if (!a.same_dims(b)) {
    throw DimensionError(std::string(what) + ": mask dimensions differ (" +
                         std::to_string(a.width()) + "x" + std::to_string(a.height()) + " vs " +
                         std::to_string(b.width()) + "x" + std::to_string(b.height()) + ")");
  }
}

}  // namespace detail

template <typename Op>
PixelMask combine(const PixelMask& a, const PixelMask& b, Op op) {
  detail::require_same_dims(a, b, "combine");
  PixelMask out;
  out.width_ = a.width();
  out.height_ = a.height();
  detail::walk_runs(a, b, [&](std::uint64_t len, bool va, bool vb) {
    out.push_run(op(va, vb), static_cast<PixelMask::Run>(len));
  });
  return out;
}

inline PixelMask mask_and(const PixelMask& a, const PixelMask& b) {
  return combine(a, b, [](bool x, bool y) { return x && y; });
}
inline PixelMask mask_or(const PixelMask& a, const PixelMask& b) {
  return combine(a, b, [](bool x, bool y) { return x || y; });
}
inline PixelMask mask_andnot(const PixelMask& a, const PixelMask& b) {
  return combine(a, b, [](bool x, bool y) { return x && !y; });
}

inline std::uint64_t intersection_area(const PixelMask& a, const PixelMask& b) {
  detail::require_same_dims(a, b, "intersection_area");
  std::uint64_t n = 0;
  detail::walk_runs(a, b, [&](std::uint64_t len, bool va, bool vb) {
    if (va && vb) n += len;
  });
  return n;
}

inline std::uint64_t union_area(const PixelMask& a, const PixelMask& b) {
  return a.area() + b.area() - intersection_area(a, b);
}

/// Horizontal run of set pixels on one row: x in [x0, x1).
struct RowSpan {
  int y = 0;
  int x0 = 0;
  int x1 = 0;
  friend bool operator==(const RowSpan&, const RowSpan&) = default;
};

/// Foreground runs split at row boundaries, in raster order.
inline std::vector<RowSpan> row_spans(const PixelMask& m) {
  std::vector<RowSpan> out;
  const auto w = static_cast<std::uint64_t>(m.width());
  m.for_each_run([&](std::uint64_t begin, std::uint64_t end) {
    while (begin < end) {
      const std::uint64_t y = begin / w;
      const std::uint64_t stop = std::min(end, (y + 1) * w);
      out.push_back({static_cast<int>(y), static_cast<int>(begin - y * w),
                     static_cast<int>(stop - y * w)});
      begin = stop;
    }
  });
  return out;
}

/// Inverse of row_spans; spans must be in raster order and non-overlapping.
inline PixelMask from_row_spans(int width, int height, std::span<const RowSpan> spans) {
  std::vector<PixelMask::Run> runs;
  std::uint64_t cursor = 0;
  bool in_fg = false;
  const auto w = static_cast<std::uint64_t>(width);
  runs.push_back(0);
  for (const auto& s : spans) {
    const std::uint64_t b = s.y * w + s.x0;
    const std::uint64_t e = s.y * w + s.x1;
    if (e <= b) continue;
    if (b < cursor) throw InvariantError("row spans out of order or overlapping");
    if (b > cursor) {
      if (in_fg) runs.push_back(0);
      runs.back() += static_cast<PixelMask::Run>(b - cursor);
      in_fg = false;
    }
    if (!in_fg) {
      runs.push_back(0);
      in_fg = true;
    }
    runs.back() += static_cast<PixelMask::Run>(e - b);
    cursor = e;
  }
  const std::uint64_t total = w * static_cast<std::uint64_t>(height);
  if (cursor > total) throw DimensionError("row span outside mask");
  if (total > cursor) {
    if (in_fg) runs.push_back(0);
    runs.back() += static_cast<PixelMask::Run>(total - cursor);
  }
  return PixelMask::from_runs(width, height, runs);
}

}  // namespace desens
