// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mvpatch/error.hpp"
#include "mvpatch/imaging.hpp"

namespace mvpatch {

/// Scaling factors of the three patch-loss terms.
struct LossWeights {
  double alpha = 0.01;  // non-printability
  double beta = 2.5;    // total variation (floored)
  double gamma = 1.0;   // objectness

  bool valid() const { return alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0; }
};

inline constexpr double kTvFloor = 0.1;
inline constexpr double kTvEpsilon = 1e-12;

struct LossBreakdown {
  double l_nps = 0.0;
  double l_tv = 0.0;
  double l_tv_effective = 0.0;
  double l_obj = 0.0;
  double total = 0.0;
};

class PrintableColorSet {
 public:
  PrintableColorSet() = default;
  explicit PrintableColorSet(std::vector<Rgb> colors) : colors_(std::move(colors)) {
    if (colors_.empty()) fail(ErrorKind::InvalidArgument, "printable color set is empty");
    for (const auto& c : colors_) {
      for (double v : c) {
        if (!(v >= 0.0 && v <= 1.0)) fail(ErrorKind::InvalidArgument, "printable color channel outside [0, 1]");
      }
    }
  }

  const std::vector<Rgb>& colors() const { return colors_; }
  std::size_t size() const { return colors_.size(); }

  /// 30 colors: the 3x3x3 grid on levels {0.1, 0.5, 0.9} plus three
  /// muted tones.  Same content as data/printable_colors.txt.
  static PrintableColorSet default_palette() {
    std::vector<Rgb> c;
    constexpr double levels[] = {0.1, 0.5, 0.9};
    for (double r : levels) {
      for (double g : levels) {
        for (double b : levels) c.push_back({r, g, b});
      }
    }
    c.push_back({0.75, 0.6, 0.5});
    c.push_back({0.35, 0.25, 0.2});
    c.push_back({0.6, 0.6, 0.65});
    return PrintableColorSet(std::move(c));
  }

 private:
  std::vector<Rgb> colors_;
};

/// Palette text: one "r g b" triple per line, '#' comments and blank lines
/// skipped.
inline PrintableColorSet parse_palette(std::istream& in, const std::string& name) {
  std::vector<Rgb> colors;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    Rgb c{};
    std::string extra;
    if (!(ls >> c[0] >> c[1] >> c[2]) || (ls >> extra)) {
      fail(ErrorKind::ParseError, name + ":" + std::to_string(lineno) + ": expected three floats");
    }
    for (double v : c) {
      if (!(v >= 0.0 && v <= 1.0)) {
        fail(ErrorKind::ParseError, name + ":" + std::to_string(lineno) + ": channel outside [0, 1]");
      }
    }
    colors.push_back(c);
  }
  if (colors.empty()) fail(ErrorKind::ParseError, name + ": palette has no colors");
  return PrintableColorSet(std::move(colors));
}

inline PrintableColorSet load_palette(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, path.string());
  return parse_palette(in, path.string());
}

struct TermValue {
  double value = 0.0;
  GradientRaster grad;
};

/// Non-printability: mean over pixels of the Euclidean RGB distance to the
/// nearest printable color (ties go to the first color in the set).
inline TermValue nps_score(const ImageBuffer& patch, const PrintableColorSet& set) {
  if (set.size() == 0) fail(ErrorKind::InvalidArgument, "printable color set is empty");
  TermValue out{0.0, GradientRaster::like(patch)};
  const auto v = patch.values();
  const double n = static_cast<double>(patch.pixel_count());
  double sum = 0.0;
  for (std::size_t i = 0; i < patch.pixel_count(); ++i) {
    const double r = v[3 * i], g = v[3 * i + 1], b = v[3 * i + 2];
    std::size_t best = 0;
    double best_d2 = 0.0;
    for (std::size_t k = 0; k < set.size(); ++k) {
      const auto& c = set.colors()[k];
      const double d2 = (r - c[0]) * (r - c[0]) + (g - c[1]) * (g - c[1]) + (b - c[2]) * (b - c[2]);
      if (k == 0 || d2 < best_d2) {
        best = k;
        best_d2 = d2;
      }
    }
    const double d = std::sqrt(best_d2);
    sum += d;
    if (d > 0.0) {
      const auto& c = set.colors()[best];
      out.grad.values[3 * i] = (r - c[0]) / (d * n);
      out.grad.values[3 * i + 1] = (g - c[1]) / (d * n);
      out.grad.values[3 * i + 2] = (b - c[2]) / (d * n);
    }
  }
  out.value = sum / n;
  return out;
}

struct TvValue {
  double raw = 0.0;
  double effective = 0.0;
  GradientRaster grad;  // derivative of `effective`
};

/// Total variation: (1/N) sum over pixels of
/// sqrt(|p(x+1,y) - p(x,y)|^2 + |p(x,y+1) - p(x,y)|^2 + eps), with the
/// differences past the right/bottom border taken as zero.  The effective
/// value is max(raw, 0.1); below the floor its gradient is zero.
inline TvValue tv_score(const ImageBuffer& patch) {
  const int w = patch.width();
  const int h = patch.height();
  if (w < 2 || h < 2) fail(ErrorKind::PatchTooSmall, "total variation needs a patch of at least 2x2");
  const double n = static_cast<double>(patch.pixel_count());

  // Per-pixel forward differences and term magnitudes.
  std::vector<double> dx(patch.pixel_count() * 3, 0.0);
  std::vector<double> dy(patch.pixel_count() * 3, 0.0);
  std::vector<double> mag(patch.pixel_count(), 0.0);
  double sum = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
      double s = kTvEpsilon;
      for (int c = 0; c < 3; ++c) {
        const std::size_t k = 3 * p + static_cast<std::size_t>(c);
        if (x + 1 < w) dx[k] = patch.at(x + 1, y, c) - patch.at(x, y, c);
        if (y + 1 < h) dy[k] = patch.at(x, y + 1, c) - patch.at(x, y, c);
        s += dx[k] * dx[k] + dy[k] * dy[k];
      }
      mag[p] = std::sqrt(s);
      sum += mag[p];
    }
  }

  TvValue out{sum / n, 0.0, GradientRaster::like(patch)};
  out.effective = std::max(out.raw, kTvFloor);
  if (out.raw < kTvFloor) return out;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
      for (int c = 0; c < 3; ++c) {
        const std::size_t k = 3 * p + static_cast<std::size_t>(c);
        double g = -(dx[k] + dy[k]) / mag[p];
        if (x > 0) g += dx[k - 3] / mag[p - 1];
        if (y > 0) {
          const std::size_t up = p - static_cast<std::size_t>(w);
          g += dy[3 * up + static_cast<std::size_t>(c)] / mag[up];
        }
        out.grad.values[k] = g / n;
      }
    }
  }
  return out;
}

inline double total_loss(double l_nps, double l_tv_effective, double l_obj, const LossWeights& w) {
  return w.alpha * l_nps + w.beta * l_tv_effective + w.gamma * l_obj;
}

/// The same linear combination applied to term gradients.
inline GradientRaster total_gradient(const GradientRaster& g_nps, const GradientRaster& g_tv,
                                     const GradientRaster& g_obj, const LossWeights& w) {
  GradientRaster out(g_nps.width, g_nps.height);
  out.add_scaled(g_nps, w.alpha);
  out.add_scaled(g_tv, w.beta);
  out.add_scaled(g_obj, w.gamma);
  return out;
}

inline LossBreakdown make_breakdown(double l_nps, double l_tv, double l_obj, const LossWeights& w) {
  LossBreakdown b;
  b.l_nps = l_nps;
  b.l_tv = l_tv;
  b.l_tv_effective = std::max(l_tv, kTvFloor);
  b.l_obj = l_obj;
  b.total = total_loss(b.l_nps, b.l_tv_effective, b.l_obj, w);
  return b;
}

}  // namespace mvpatch
