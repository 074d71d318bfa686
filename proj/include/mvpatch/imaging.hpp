// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvpatch/error.hpp"
#include "mvpatch/geometry.hpp"
#include "mvpatch/parallel.hpp"

namespace mvpatch {

using Rgb = std::array<double, 3>;

/// Row-major RGB raster with channel values in [0, 1].
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, Rgb fill = {0.0, 0.0, 0.0}) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
      fail(ErrorKind::InvalidArgument, "image dimensions must be positive, got " + std::to_string(width) + "x" +
                                           std::to_string(height));
    }
    data_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
    for (std::size_t i = 0; i < data_.size(); i += 3) {
      data_[i] = fill[0];
      data_[i + 1] = fill[1];
      data_[i + 2] = fill[2];
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const ImageBuffer& o) const { return width_ == o.width_ && height_ == o.height_; }

  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3;
  }
  double& at(int x, int y, int c) { return data_[index(x, y) + static_cast<std::size_t>(c)]; }
  double at(int x, int y, int c) const { return data_[index(x, y) + static_cast<std::size_t>(c)]; }
  Rgb pixel(int x, int y) const {
    const std::size_t i = index(x, y);
    return {data_[i], data_[i + 1], data_[i + 2]};
  }
  void set_pixel(int x, int y, const Rgb& v) {
    const std::size_t i = index(x, y);
    data_[i] = v[0];
    data_[i + 1] = v[1];
    data_[i + 2] = v[2];
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  /// True when every channel lies in [0, 1] (and so is not NaN).
  bool in_range() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
  }

  void clamp01() {
    for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Per-pixel coverage in [0, 1], paired with an ImageBuffer of equal size.
class AlphaMask {
 public:
  AlphaMask() = default;
  AlphaMask(int width, int height, double fill = 0.0)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  double& at(int x, int y) { return data_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)]; }
  double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)]; }
  std::span<const double> values() const { return data_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

struct BBox {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  bool valid() const {
    return std::isfinite(xmin) && std::isfinite(ymin) && std::isfinite(xmax) && std::isfinite(ymax) && xmin < xmax &&
           ymin < ymax;
  }
  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Corners in order top-left, top-right, bottom-right, bottom-left.
using Quad = std::array<Point2, 4>;

// ---------------------------------------------------------------------------
// Bilinear sampling
// ---------------------------------------------------------------------------

/// The four source pixels (flat pixel indices) and weights that bilinear
/// interpolation combines at a sample location.  Weights sum to 1.
struct BilinearTaps {
  std::array<std::size_t, 4> pixel{};
  std::array<double, 4> weight{};
};

/// Taps for (x, y), which must lie in [0, w-1] x [0, h-1].
inline BilinearTaps bilinear_taps(int width, int height, double x, double y) {
  const int x0 = std::min(static_cast<int>(std::floor(x)), width - 1);
  const int y0 = std::min(static_cast<int>(std::floor(y)), height - 1);
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const auto at = [width](int px, int py) {
    return static_cast<std::size_t>(py) * static_cast<std::size_t>(width) + static_cast<std::size_t>(px);
  };
  BilinearTaps t;
  t.pixel = {at(x0, y0), at(x1, y0), at(x0, y1), at(x1, y1)};
  t.weight = {(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy};
  return t;
}

inline Rgb apply_taps(const ImageBuffer& img, const BilinearTaps& t) {
  const auto v = img.values();
  Rgb out{0.0, 0.0, 0.0};
  for (int c = 0; c < 3; ++c) {
    double s = 0.0;
    for (std::size_t k = 0; k < 4; ++k) s += t.weight[k] * v[t.pixel[k] * 3 + static_cast<std::size_t>(c)];
    out[static_cast<std::size_t>(c)] = s;
  }
  return out;
}

/// Bilinear interpolation at (x, y); std::nullopt when the location falls
/// outside [0, width-1] x [0, height-1].
inline std::optional<Rgb> bilinear_sample(const ImageBuffer& img, double x, double y) {
  if (!(x >= 0.0 && y >= 0.0 && x <= img.width() - 1 && y <= img.height() - 1)) return std::nullopt;
  return apply_taps(img, bilinear_taps(img.width(), img.height(), x, y));
}

// ---------------------------------------------------------------------------
// Warping
// ---------------------------------------------------------------------------

struct WarpResult {
  ImageBuffer image;
  AlphaMask mask;
};

/// Inverse-mapped perspective warp: destination pixel (x, y) samples src at
/// h^-1(x, y).  Pixels whose source falls outside src are black with mask 0.
inline WarpResult warp_image(const ImageBuffer& src, const Homography& h, int out_w, int out_h, int jobs = 1) {
  const Homography inv = invert(h);
  WarpResult out{ImageBuffer(out_w, out_h), AlphaMask(out_w, out_h, 0.0)};
  parallel_for(static_cast<std::size_t>(out_h), jobs, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < out_w; ++x) {
      if (!(std::abs(inv.denominator(x, y)) > kAtInfinityThreshold)) continue;
      const Point2 s = apply_homography(inv, {static_cast<double>(x), static_cast<double>(y)});
      if (const auto v = bilinear_sample(src, s.x, s.y)) {
        out.image.set_pixel(x, y, *v);
        out.mask.at(x, y) = 1.0;
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Patch placement
// ---------------------------------------------------------------------------

/// Where a patch goes on a person.  `scale` is the patch width as a fraction
/// of the box width; the anchor is the patch center relative to the box.
struct PatchPlacement {
  BBox bbox;
  double scale = 0.5;
  double anchor_x = 0.5;
  double anchor_y = 0.5;
};

/// Resolved placement of a patch inside a frame.  Frame pixels in
/// [x_begin, x_end) x [y_begin, y_end) are covered; their centers lie in the
/// nominal rectangle [left, left + width) x [top, top + height).
struct PlacementGeometry {
  int frame_w = 0;
  int frame_h = 0;
  int patch_w = 0;
  int patch_h = 0;
  double left = 0.0;
  double top = 0.0;
  double width = 0.0;
  double height = 0.0;
  int x_begin = 0;
  int x_end = 0;
  int y_begin = 0;
  int y_end = 0;
  Quad quad{};  // nominal rectangle clipped to the frame

  /// Patch-space sample location for the frame pixel (x, y).
  Point2 patch_coord(int x, int y) const {
    const double u = (x - left + 0.5) * (patch_w / width) - 0.5;
    const double v = (y - top + 0.5) * (patch_h / height) - 0.5;
    return {std::clamp(u, 0.0, static_cast<double>(patch_w - 1)), std::clamp(v, 0.0, static_cast<double>(patch_h - 1))};
  }
};

inline PlacementGeometry resolve_placement(int frame_w, int frame_h, int patch_w, int patch_h,
                                           const PatchPlacement& placement) {
  if (!placement.bbox.valid()) fail(ErrorKind::InvalidBox, "placement box is invalid");
  if (!(placement.scale > 0.0 && placement.scale <= 1.0)) {
    fail(ErrorKind::InvalidArgument, "patch scale must lie in (0, 1]");
  }
  if (!(placement.anchor_x >= 0.0 && placement.anchor_x <= 1.0 && placement.anchor_y >= 0.0 &&
        placement.anchor_y <= 1.0)) {
    fail(ErrorKind::InvalidArgument, "patch anchor must lie in [0, 1]^2");
  }
  PlacementGeometry g;
  g.frame_w = frame_w;
  g.frame_h = frame_h;
  g.patch_w = patch_w;
  g.patch_h = patch_h;
  g.width = placement.scale * placement.bbox.width();
  g.height = g.width * patch_h / patch_w;
  const double cx = placement.bbox.xmin + placement.anchor_x * placement.bbox.width();
  const double cy = placement.bbox.ymin + placement.anchor_y * placement.bbox.height();
  g.left = cx - g.width / 2.0;
  g.top = cy - g.height / 2.0;

  const auto clip_begin = [](double v, int limit) {
    return static_cast<int>(std::clamp(std::ceil(v), 0.0, static_cast<double>(limit)));
  };
  g.x_begin = clip_begin(g.left, frame_w);
  g.x_end = clip_begin(g.left + g.width, frame_w);
  g.y_begin = clip_begin(g.top, frame_h);
  g.y_end = clip_begin(g.top + g.height, frame_h);
  if (g.x_begin >= g.x_end || g.y_begin >= g.y_end) {
    fail(ErrorKind::EmptyIntersection, "patch lies entirely outside the frame");
  }
  const double qx0 = std::max(g.left, 0.0);
  const double qy0 = std::max(g.top, 0.0);
  const double qx1 = std::min(g.left + g.width, static_cast<double>(frame_w));
  const double qy1 = std::min(g.top + g.height, static_cast<double>(frame_h));
  g.quad = {Point2{qx0, qy0}, Point2{qx1, qy0}, Point2{qx1, qy1}, Point2{qx0, qy1}};
  return g;
}

/// Forward record of one or more placements into a single frame: for every
/// frame pixel the patch taps that produced its final value.  Later
/// placements overwrite earlier ones, as in the composite itself.
class CompositeRecord {
 public:
  struct Entry {
    std::size_t frame_pixel = 0;
    BilinearTaps taps;
  };

  CompositeRecord() = default;
  CompositeRecord(int frame_w, int frame_h, int patch_w, int patch_h)
      : frame_w_(frame_w), frame_h_(frame_h), patch_w_(patch_w), patch_h_(patch_h),
        owner_(static_cast<std::size_t>(frame_w) * static_cast<std::size_t>(frame_h), -1) {}

  void write(std::size_t frame_pixel, const BilinearTaps& taps) {
    auto& o = owner_[frame_pixel];
    if (o >= 0) {
      entries_[static_cast<std::size_t>(o)].taps = taps;
    } else {
      o = static_cast<std::int64_t>(entries_.size());
      entries_.push_back({frame_pixel, taps});
    }
  }

  bool initialized() const { return !owner_.empty(); }
  int frame_w() const { return frame_w_; }
  int frame_h() const { return frame_h_; }
  int patch_w() const { return patch_w_; }
  int patch_h() const { return patch_h_; }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  int frame_w_ = 0;
  int frame_h_ = 0;
  int patch_w_ = 0;
  int patch_h_ = 0;
  std::vector<std::int64_t> owner_;
  std::vector<Entry> entries_;
};

struct PlacedPatch {
  ImageBuffer frame;
  Quad quad;
};

/// Composites the patch into `frame` in place, optionally recording taps.
/// Returns the covered quad.
inline Quad place_patch_into(ImageBuffer& frame, const ImageBuffer& patch, const PatchPlacement& placement,
                             CompositeRecord* record = nullptr) {
  const PlacementGeometry g = resolve_placement(frame.width(), frame.height(), patch.width(), patch.height(), placement);
  for (int y = g.y_begin; y < g.y_end; ++y) {
    for (int x = g.x_begin; x < g.x_end; ++x) {
      const Point2 uv = g.patch_coord(x, y);
      const BilinearTaps taps = bilinear_taps(patch.width(), patch.height(), uv.x, uv.y);
      frame.set_pixel(x, y, apply_taps(patch, taps));
      if (record) {
        record->write(static_cast<std::size_t>(y) * static_cast<std::size_t>(frame.width()) + static_cast<std::size_t>(x),
                      taps);
      }
    }
  }
  return g.quad;
}

/// Opaque overwrite of the (bilinearly resized) patch onto a copy of frame.
inline PlacedPatch place_patch(const ImageBuffer& frame, const ImageBuffer& patch, const PatchPlacement& placement) {
  PlacedPatch out{frame, {}};
  out.quad = place_patch_into(out.frame, patch, placement);
  return out;
}

// ---------------------------------------------------------------------------
// Projection into another view
// ---------------------------------------------------------------------------

namespace detail {

inline double cross(Point2 o, Point2 a, Point2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

inline double polygon_area(const Quad& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const Point2& a = q[i];
    const Point2& b = q[(i + 1) % 4];
    s += a.x * b.y - b.x * a.y;
  }
  return s / 2.0;
}

/// Even-odd crossing test.  Boundaries behave half-open: for an axis
/// aligned rectangle [a, b) x [c, d) is inside.
inline bool point_in_quad(const Quad& q, double x, double y) {
  bool inside = false;
  for (std::size_t i = 0, j = 3; i < 4; j = i++) {
    const Point2& pi = q[i];
    const Point2& pj = q[j];
    if ((pi.y > y) != (pj.y > y) && x < (pj.x - pi.x) * (y - pi.y) / (pj.y - pi.y) + pi.x) inside = !inside;
  }
  return inside;
}

}  // namespace detail

/// Maps a quad through h.  Throws DegenerateQuad when the image crosses the
/// horizon, self-intersects, or has area below 1 px^2.
inline Quad project_quad(const Quad& quad, const Homography& h) {
  Quad out{};
  int positive = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double w = h.denominator(quad[i].x, quad[i].y);
    if (!(std::abs(w) > kAtInfinityThreshold)) fail(ErrorKind::DegenerateQuad, "quad corner maps to infinity");
    positive += w > 0.0 ? 1 : 0;
    out[i] = apply_homography(h, quad[i]);
  }
  if (positive != 0 && positive != 4) fail(ErrorKind::DegenerateQuad, "projected quad crosses the horizon line");
  int sign = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double c = detail::cross(out[i], out[(i + 1) % 4], out[(i + 2) % 4]);
    const int s = c > 0.0 ? 1 : (c < 0.0 ? -1 : 0);
    if (s == 0 || (sign != 0 && s != sign)) fail(ErrorKind::DegenerateQuad, "projected quad is self-intersecting or degenerate");
    sign = s;
  }
  if (std::abs(detail::polygon_area(out)) < 1.0) fail(ErrorKind::DegenerateQuad, "projected quad area is below 1 px^2");
  return out;
}

/// Copies the patch region of the reference frame into `dst_frame` through
/// h_ref_to_dst.  Only pixels inside the projected quad change; each takes
/// the bilinear sample of the reference frame at h^-1(pixel).
inline ImageBuffer project_patch(const ImageBuffer& dst_frame, const ImageBuffer& ref_frame_with_patch,
                                 const Quad& patch_quad, const Homography& h_ref_to_dst) {
  const Homography inv = invert(h_ref_to_dst);
  const Quad q = project_quad(patch_quad, h_ref_to_dst);
  ImageBuffer out = dst_frame;
  double minx = q[0].x, maxx = q[0].x, miny = q[0].y, maxy = q[0].y;
  for (const auto& p : q) {
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  const int x0 = static_cast<int>(std::clamp(std::floor(minx), 0.0, static_cast<double>(out.width())));
  const int y0 = static_cast<int>(std::clamp(std::floor(miny), 0.0, static_cast<double>(out.height())));
  const int x1 = static_cast<int>(std::min(static_cast<double>(out.width() - 1), std::ceil(maxx)));
  const int y1 = static_cast<int>(std::min(static_cast<double>(out.height() - 1), std::ceil(maxy)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (!detail::point_in_quad(q, x, y)) continue;
      if (!(std::abs(inv.denominator(x, y)) > kAtInfinityThreshold)) continue;
      const Point2 s = apply_homography(inv, {static_cast<double>(x), static_cast<double>(y)});
      if (const auto v = bilinear_sample(ref_frame_with_patch, s.x, s.y)) out.set_pixel(x, y, *v);
    }
  }
  return out;
}

/// Per-channel partial derivatives of a scalar with respect to the pixels
/// of an image of the same shape.
struct GradientRaster {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  GradientRaster() = default;
  GradientRaster(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, 0.0) {}
  static GradientRaster like(const ImageBuffer& img) { return {img.width(), img.height()}; }

  bool same_shape(const ImageBuffer& img) const { return width == img.width() && height == img.height(); }
  bool same_shape(const GradientRaster& o) const { return width == o.width && height == o.height; }

  /// this += scale * other
  void add_scaled(const GradientRaster& other, double scale) {
    if (!same_shape(other)) fail(ErrorKind::ShapeMismatch, "gradient shapes differ");
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += scale * other.values[i];
  }
  bool all_finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
  }
};

/// Grayscale view (mean of RGB) as a flat row-major vector.
inline std::vector<double> to_gray(const ImageBuffer& img) {
  std::vector<double> g(img.pixel_count());
  const auto v = img.values();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = (v[3 * i] + v[3 * i + 1] + v[3 * i + 2]) / 3.0;
  return g;
}

}  // namespace mvpatch
