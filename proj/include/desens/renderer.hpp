#pragma once

// Redaction of frames (mosaic, solid fill, icon overlay) and binary PPM I/O.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "desens/core.hpp"
#include "desens/error.hpp"
#include "desens/geometry.hpp"
#include "desens/metrics.hpp"
#include "desens/postproc.hpp"

namespace desens {

/// Row-major RGB, 8 bits per channel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {
    if (w <= 0 || h <= 0) throw DimensionError("image dimensions must be positive");
  }

  std::uint8_t* at(int x, int y) { return &pixels[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
  }
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    auto* p = at(x, y);
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

struct Mosaic {
  int block = 8;
};

struct Solid {
  std::uint8_t r = 128, g = 128, b = 128;
};

enum class IconAnchor { Center, TopLeft };

/// Icon stretched (or fitted) onto the region's minimum bounding box.
struct Icon {
  Image image;
  /// One byte per icon pixel; empty means fully opaque.
  std::vector<std::uint8_t> alpha;
  IconAnchor anchor = IconAnchor::Center;
  /// Fit inside the box keeping the icon's aspect ratio instead of stretching.
  bool keep_aspect = false;
};

using RedactStyle = std::variant<Mosaic, Solid, Icon>;

/// Least share of a region an icon must cover.
inline constexpr double kMinIconCoverage = 0.5;

namespace detail {

inline void check_style(const RedactStyle& style) {
  if (const auto* m = std::get_if<Mosaic>(&style); m && m->block < 2) {
    throw InvariantError("mosaic block must be >= 2");
  }
  if (const auto* ic = std::get_if<Icon>(&style)) {
    if (ic->image.pixels.size() != static_cast<std::size_t>(ic->image.width) * ic->image.height * 3 ||
        ic->image.width <= 0) {
      throw InvariantError("icon image is empty or malformed");
    }
    if (!ic->alpha.empty() &&
        ic->alpha.size() != static_cast<std::size_t>(ic->image.width) * ic->image.height) {
      throw InvariantError("icon alpha size does not match the icon image");
    }
  }
}

/// Integer placement of the icon inside the box [x0,x1) x [y0,y1).
struct IconPlacement {
  int x0, y0, w, h;
};

inline IconPlacement place_icon(const Icon& ic, const BBox& box) {
  const int bx0 = static_cast<int>(box.x_min), by0 = static_cast<int>(box.y_min);
  const int bw = static_cast<int>(box.width()), bh = static_cast<int>(box.height());
  if (!ic.keep_aspect) return {bx0, by0, bw, bh};
  const double s = std::min(double(bw) / ic.image.width, double(bh) / ic.image.height);
  const int w = std::clamp(static_cast<int>(ic.image.width * s), 1, bw);
  const int h = std::clamp(static_cast<int>(ic.image.height * s), 1, bh);
  if (ic.anchor == IconAnchor::TopLeft) return {bx0, by0, w, h};
  return {bx0 + (bw - w) / 2, by0 + (bh - h) / 2, w, h};
}

template <class Fn>
void for_each_icon_pixel(const Icon& ic, const IconPlacement& pl, Fn&& fn) {
  for (int y = 0; y < pl.h; ++y) {
    const int sy = static_cast<int>(static_cast<long long>(y) * ic.image.height / pl.h);
    for (int x = 0; x < pl.w; ++x) {
      const int sx = static_cast<int>(static_cast<long long>(x) * ic.image.width / pl.w);
      const std::size_t si = static_cast<std::size_t>(sy) * ic.image.width + sx;
      const std::uint8_t a = ic.alpha.empty() ? 255 : ic.alpha[si];
      fn(pl.x0 + x, pl.y0 + y, &ic.image.pixels[si * 3], a);
    }
  }
}

inline void apply_mosaic(Image& img, const PixelMask& mask, int block) {
  const int cw = (img.width + block - 1) / block;
  const int ch = (img.height + block - 1) / block;
  std::vector<std::uint64_t> sum(static_cast<std::size_t>(cw) * ch * 3, 0);
  std::vector<std::uint64_t> count(static_cast<std::size_t>(cw) * ch, 0);
  const auto spans = row_spans(mask);
  for (const auto& s : spans) {
    for (int x = s.x0; x < s.x1; ++x) {
      const std::size_t c = static_cast<std::size_t>(s.y / block) * cw + x / block;
      const auto* p = img.at(x, s.y);
      for (int k = 0; k < 3; ++k) sum[c * 3 + k] += p[k];
      ++count[c];
    }
  }
  for (const auto& s : spans) {
    for (int x = s.x0; x < s.x1; ++x) {
      const std::size_t c = static_cast<std::size_t>(s.y / block) * cw + x / block;
      auto* p = img.at(x, s.y);
      for (int k = 0; k < 3; ++k) {
        p[k] = static_cast<std::uint8_t>((sum[c * 3 + k] + count[c] / 2) / count[c]);
      }
    }
  }
}

}  // namespace detail

/// Pixels actually changed-over by a style for a region.
inline PixelMask applied_mask(const DesensRegion& region, const RedactStyle& style) {
  const auto* ic = std::get_if<Icon>(&style);
  if (!ic) return region.mask;
  if (region.mask.empty()) return region.mask;
  const int w = region.mask.width(), h = region.mask.height();
  const auto pl = detail::place_icon(*ic, min_bbox(region.mask));
  std::vector<RowSpan> spans;
  detail::for_each_icon_pixel(*ic, pl, [&](int x, int y, const std::uint8_t*, std::uint8_t a) {
    if (a < 128 || x < 0 || y < 0 || x >= w || y >= h) return;
    if (!spans.empty() && spans.back().y == y && spans.back().x1 == x) {
      ++spans.back().x1;
    } else {
      spans.push_back({y, x, x + 1});
    }
  });
  return from_row_spans(w, h, spans);
}

/// Redacts one region. Pixels outside the mask (outside the icon for Icon)
/// are left untouched.
inline Image apply(Image img, const DesensRegion& region, const RedactStyle& style) {
  detail::check_style(style);
  if (region.mask.width() != img.width || region.mask.height() != img.height) {
    throw DimensionError("apply: region mask does not match the image");
  }
  if (region.mask.empty()) return img;
  if (const auto* m = std::get_if<Mosaic>(&style)) {
    detail::apply_mosaic(img, region.mask, m->block);
  } else if (const auto* s = std::get_if<Solid>(&style)) {
    for (const auto& sp : row_spans(region.mask)) {
      for (int x = sp.x0; x < sp.x1; ++x) img.set(x, sp.y, s->r, s->g, s->b);
    }
  } else {
    const auto& ic = std::get<Icon>(style);
    const double cov = coverage_ratio(applied_mask(region, style), region.mask);
    if (cov < kMinIconCoverage) {
      throw InvariantError("icon would cover only " + std::to_string(cov) + " of the region");
    }
    const auto pl = detail::place_icon(ic, min_bbox(region.mask));
    detail::for_each_icon_pixel(ic, pl, [&](int x, int y, const std::uint8_t* c, std::uint8_t a) {
      if (a == 0 || x < 0 || y < 0 || x >= img.width || y >= img.height) return;
      auto* p = img.at(x, y);
      for (int k = 0; k < 3; ++k) p[k] = static_cast<std::uint8_t>((c[k] * a + p[k] * (255 - a) + 127) / 255);
    });
  }
  return img;
}

inline Image apply_all(Image img, std::span<const DesensRegion> regions, const RedactStyle& style) {
  for (const auto& r : regions) img = apply(std::move(img), r, style);
  return img;
}

/// Parses a binary PPM (P6, maxval 255). Comments are accepted in the header.
inline Image read_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto fail = [](const std::string& what) -> Image { throw DataError("ppm: " + what); };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') return fail("missing P6 magic");
  pos = 2;
  auto token = [&]() -> long long {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw DataError("ppm: malformed header");
    long long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1LL << 30)) throw DataError("ppm: header value out of range");
    }
    return v;
  };
  const auto w = token(), h = token(), maxval = token();
  if (w <= 0 || h <= 0) return fail("dimensions must be positive");
  if (maxval != 255) return fail("maxval must be 255");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) return fail("malformed header");
  ++pos;
  const auto need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  if (bytes.size() - pos < need) return fail("truncated payload");
  if (bytes.size() - pos > need) return fail("trailing bytes after payload");
  Image img(static_cast<int>(w), static_cast<int>(h));
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), img.pixels.begin());
  return img;
}

inline std::vector<std::uint8_t> write_ppm(const Image& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

}  // namespace desens
