// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mvpatch/error.hpp"
#include "mvpatch/imaging.hpp"
#include "mvpatch/parallel.hpp"
#include "mvpatch/random.hpp"

namespace mvpatch {

struct Detection {
  BBox bbox;
  double objectness = 0.0;
  std::string class_label = "person";

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Scalar max objectness of an image and its gradient with respect to the
/// image pixels.
struct ObjectnessGrad {
  double value = 0.0;
  GradientRaster grad;
};

struct DetectorCapabilities {
  bool eval = false;
  bool grad = false;
};

/// What the pipeline needs from a detector.  `grad` is only used to train
/// patches; evaluation only calls `detect_batch`.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual DetectorCapabilities capabilities() const = 0;
  virtual std::string name() const = 0;

  /// One detection list per input image, in input order.
  virtual std::vector<std::vector<Detection>> detect_batch(std::span<const ImageBuffer* const> images) = 0;

  virtual ObjectnessGrad max_objectness_grad(const ImageBuffer& /*image*/) {
    fail(ErrorKind::CapabilityMismatch, name() + " detector has no gradient capability");
  }

  std::vector<Detection> detect(const ImageBuffer& image) {
    const ImageBuffer* one[] = {&image};
    return detect_batch(one).front();
  }
};

// ---------------------------------------------------------------------------
// Toy detector: normalized template correlation squashed through a sigmoid.
// ---------------------------------------------------------------------------

inline constexpr int kToyTemplateSize = 16;

struct ToyDetectorSpec {
  std::uint64_t template_seed = 7;
  double k = 10.0;
  double b = 0.6;
  int stride = 8;
  double emit_threshold = 0.5;
  std::vector<double> templ;  // 16x16 row-major gray, filled by make()

  static ToyDetectorSpec make(std::uint64_t template_seed = 7, double k = 10.0, double b = 0.6, int stride = 8);
};

/// Deterministic 16x16 "person" template: a Gaussian blob (sigma 2.5 px)
/// modulated by seeded noise, peak-normalized to [0, 1].
inline std::vector<double> make_toy_template(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> t(kToyTemplateSize * kToyTemplateSize);
  constexpr double c = (kToyTemplateSize - 1) / 2.0;
  constexpr double sigma = 2.5;
  double peak = 0.0;
  for (int y = 0; y < kToyTemplateSize; ++y) {
    for (int x = 0; x < kToyTemplateSize; ++x) {
      const double r2 = (x - c) * (x - c) + (y - c) * (y - c);
      const double v = std::exp(-r2 / (2 * sigma * sigma)) * (0.5 + 0.5 * uniform01(rng));
      t[static_cast<std::size_t>(y * kToyTemplateSize + x)] = v;
      peak = std::max(peak, v);
    }
  }
  for (double& v : t) v /= peak;
  return t;
}

inline ToyDetectorSpec ToyDetectorSpec::make(std::uint64_t template_seed, double k, double b, int stride) {
  if (stride < 1) fail(ErrorKind::InvalidArgument, "toy detector stride must be >= 1");
  ToyDetectorSpec s;
  s.template_seed = template_seed;
  s.k = k;
  s.b = b;
  s.stride = stride;
  s.templ = make_toy_template(template_seed);
  return s;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Window scores over the stride grid: window (i, j) has its top-left
/// corner at (i * stride, j * stride).
struct ToyScoreMap {
  int nx = 0;
  int ny = 0;
  std::vector<double> score;
  double at(int i, int j) const { return score[static_cast<std::size_t>(j * nx + i)]; }
};

namespace detail {

inline double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

struct WindowStats {
  double dot = 0.0;
  double wnorm = 0.0;
  double corr = 0.0;
  double score = 0.0;
};

inline WindowStats window_stats(const std::vector<double>& gray, int img_w, int x0, int y0, const ToyDetectorSpec& spec,
                                double tnorm) {
  WindowStats s;
  double nn = 0.0;
  for (int y = 0; y < kToyTemplateSize; ++y) {
    const std::size_t row = static_cast<std::size_t>(y0 + y) * static_cast<std::size_t>(img_w) + static_cast<std::size_t>(x0);
    for (int x = 0; x < kToyTemplateSize; ++x) {
      const double g = gray[row + static_cast<std::size_t>(x)];
      s.dot += g * spec.templ[static_cast<std::size_t>(y * kToyTemplateSize + x)];
      nn += g * g;
    }
  }
  s.wnorm = std::sqrt(nn);
  s.corr = s.dot / (s.wnorm * tnorm + 1e-9);
  s.score = sigmoid(spec.k * (s.corr - spec.b));
  return s;
}

inline void check_size(const ImageBuffer& image) {
  if (image.width() < kToyTemplateSize || image.height() < kToyTemplateSize) {
    fail(ErrorKind::ImageTooSmall, "image is smaller than the 16x16 detector template");
  }
}

}  // namespace detail

inline ToyScoreMap toy_score_map(const ImageBuffer& image, const ToyDetectorSpec& spec) {
  detail::check_size(image);
  const std::vector<double> gray = to_gray(image);
  const double tnorm = detail::norm(spec.templ);
  ToyScoreMap m;
  m.nx = (image.width() - kToyTemplateSize) / spec.stride + 1;
  m.ny = (image.height() - kToyTemplateSize) / spec.stride + 1;
  m.score.resize(static_cast<std::size_t>(m.nx * m.ny));
  for (int j = 0; j < m.ny; ++j) {
    for (int i = 0; i < m.nx; ++i) {
      m.score[static_cast<std::size_t>(j * m.nx + i)] =
          detail::window_stats(gray, image.width(), i * spec.stride, j * spec.stride, spec, tnorm).score;
    }
  }
  return m;
}

/// Local maxima of the score map (3x3 neighborhood on the stride grid) with
/// score >= the emit threshold.  On plateaus the first window in row-major
/// order wins.
inline std::vector<Detection> toy_detect(const ImageBuffer& image, const ToyDetectorSpec& spec) {
  const ToyScoreMap m = toy_score_map(image, spec);
  std::vector<Detection> out;
  for (int j = 0; j < m.ny; ++j) {
    for (int i = 0; i < m.nx; ++i) {
      const double s = m.at(i, j);
      if (s < spec.emit_threshold) continue;
      bool keep = true;
      for (int dj = -1; dj <= 1 && keep; ++dj) {
        for (int di = -1; di <= 1 && keep; ++di) {
          if (di == 0 && dj == 0) continue;
          const int ni = i + di, nj = j + dj;
          if (ni < 0 || nj < 0 || ni >= m.nx || nj >= m.ny) continue;
          const double o = m.at(ni, nj);
          const bool earlier = nj < j || (nj == j && ni < i);
          if (earlier ? o >= s : o > s) keep = false;
        }
      }
      if (!keep) continue;
      const double x0 = i * spec.stride, y0 = j * spec.stride;
      out.push_back({BBox{x0, y0, x0 + kToyTemplateSize, y0 + kToyTemplateSize}, s, "person"});
    }
  }
  return out;
}

/// Max window score and its gradient with respect to every pixel channel.
/// Only the argmax window (first in row-major order on ties) has support.
inline ObjectnessGrad toy_max_objectness_grad(const ImageBuffer& image, const ToyDetectorSpec& spec) {
  detail::check_size(image);
  const std::vector<double> gray = to_gray(image);
  const double tnorm = detail::norm(spec.templ);
  const int nx = (image.width() - kToyTemplateSize) / spec.stride + 1;
  const int ny = (image.height() - kToyTemplateSize) / spec.stride + 1;
  int best_x = 0, best_y = 0;
  detail::WindowStats best;
  bool first = true;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const auto s = detail::window_stats(gray, image.width(), i * spec.stride, j * spec.stride, spec, tnorm);
      if (first || s.score > best.score) {
        best = s;
        best_x = i * spec.stride;
        best_y = j * spec.stride;
        first = false;
      }
    }
  }

  ObjectnessGrad out{best.score, GradientRaster::like(image)};
  // d score / d corr, then d corr / d gray_i = t_i / D - dot * |t| * w_i / (|w| D^2).
  const double dscore = spec.k * best.score * (1.0 - best.score);
  const double denom = best.wnorm * tnorm + 1e-9;
  for (int y = 0; y < kToyTemplateSize; ++y) {
    for (int x = 0; x < kToyTemplateSize; ++x) {
      const int px = best_x + x, py = best_y + y;
      const double g = gray[static_cast<std::size_t>(py) * static_cast<std::size_t>(image.width()) + static_cast<std::size_t>(px)];
      double dcorr = spec.templ[static_cast<std::size_t>(y * kToyTemplateSize + x)] / denom;
      if (best.wnorm > 0.0) dcorr -= best.dot * tnorm * g / (best.wnorm * denom * denom);
      const double d = dscore * dcorr / 3.0;
      const std::size_t k = image.index(px, py);
      out.grad.values[k] = d;
      out.grad.values[k + 1] = d;
      out.grad.values[k + 2] = d;
    }
  }
  return out;
}

class ToyDetector final : public Detector {
 public:
  explicit ToyDetector(ToyDetectorSpec spec, int jobs = 1) : spec_(std::move(spec)), jobs_(jobs) {}

  DetectorCapabilities capabilities() const override { return {true, true}; }
  std::string name() const override { return "toy"; }
  const ToyDetectorSpec& spec() const { return spec_; }

  std::vector<std::vector<Detection>> detect_batch(std::span<const ImageBuffer* const> images) override {
    std::vector<std::vector<Detection>> out(images.size());
    parallel_for(images.size(), jobs_, [&](std::size_t i) { out[i] = toy_detect(*images[i], spec_); });
    return out;
  }

  ObjectnessGrad max_objectness_grad(const ImageBuffer& image) override { return toy_max_objectness_grad(image, spec_); }

 private:
  ToyDetectorSpec spec_;
  int jobs_;
};

}  // namespace mvpatch
