#pragma once

// Box and mask geometry used by the metrics and post-processing stages.
// Boxes use continuous-area semantics; masks are pixel sets where pixel
// (x, y) covers [x, x+1] x [y, y+1].

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "desens/core.hpp"
#include "desens/error.hpp"
#include "desens/mask.hpp"

namespace desens {

using Ratio = double;

inline double intersection_area(const BBox& a, const BBox& b) noexcept {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

inline Ratio box_iou(const BBox& a, const BBox& b) noexcept {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

/// Fraction of `inner` that lies inside `outer`.
inline Ratio containment(const BBox& inner, const BBox& outer) noexcept {
  const double a = inner.area();
  if (a <= 0.0) return 0.0;
  return std::clamp(intersection_area(inner, outer) / a, 0.0, 1.0);
}

/// Throws EmptyError when both masks are empty.
inline Ratio mask_iou(const PixelMask& a, const PixelMask& b) {
  const auto inter = intersection_area(a, b);
  const auto uni = a.area() + b.area() - inter;
  if (uni == 0) throw EmptyError("mask_iou: both masks are empty");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Tightest box around every set pixel.
inline BBox min_bbox(const PixelMask& m) {
  if (m.empty()) throw EmptyError("min_bbox: mask is empty");
  int x0 = m.width(), y0 = m.height(), x1 = -1, y1 = -1;
  const auto w = static_cast<std::uint64_t>(m.width());
  m.for_each_run([&](std::uint64_t begin, std::uint64_t end) {
    const auto rb = static_cast<int>(begin / w);
    const auto re = static_cast<int>((end - 1) / w);
    y0 = std::min(y0, rb);
    y1 = std::max(y1, re);
    if (rb == re) {
      x0 = std::min(x0, static_cast<int>(begin % w));
      x1 = std::max(x1, static_cast<int>((end - 1) % w));
    } else {
      // A run crossing a row boundary touches both the last and first column.
      x0 = 0;
      x1 = m.width() - 1;
    }
  });
  return {double(x0), double(y0), double(x1 + 1), double(y1 + 1)};
}

/// Shifts a mask by whole pixels; pixels leaving the frame are dropped.
inline PixelMask translate(const PixelMask& m, int dx, int dy) {
  std::vector<RowSpan> out;
  for (auto s : row_spans(m)) {
    s.y += dy;
    s.x0 = std::max(0, s.x0 + dx);
    s.x1 = std::min(m.width(), s.x1 + dx);
    if (s.y < 0 || s.y >= m.height() || s.x0 >= s.x1) continue;
    out.push_back(s);
  }
  return from_row_spans(m.width(), m.height(), out);
}

namespace detail {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    // Keep the smaller index as root so roots follow raster order.
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace detail

/// 4-connected components, ordered by their first pixel in raster order.
inline std::vector<PixelMask> connected_components(const PixelMask& m) {
  const auto spans = row_spans(m);
  detail::DisjointSets sets(spans.size());
  // Two-pointer sweep between consecutive rows; spans are in raster order.
  std::size_t prev_begin = 0, prev_end = 0;
  for (std::size_t i = 0; i < spans.size();) {
    const int y = spans[i].y;
    std::size_t j = i;
    while (j < spans.size() && spans[j].y == y) ++j;
    if (prev_end > prev_begin && spans[prev_begin].y == y - 1) {
      std::size_t p = prev_begin;
      for (std::size_t c = i; c < j; ++c) {
        while (p < prev_end && spans[p].x1 <= spans[c].x0) ++p;
        for (std::size_t q = p; q < prev_end && spans[q].x0 < spans[c].x1; ++q) sets.unite(q, c);
      }
    }
    prev_begin = i;
    prev_end = j;
    i = j;
  }
  std::vector<std::vector<RowSpan>> groups;
  std::vector<std::size_t> slot(spans.size(), SIZE_MAX);
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto root = sets.find(i);
    if (slot[root] == SIZE_MAX) {
      slot[root] = groups.size();
      groups.emplace_back();
    }
    groups[slot[root]].push_back(spans[i]);
  }
  std::vector<PixelMask> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(from_row_spans(m.width(), m.height(), g));
  return out;
}

}  // namespace desens
