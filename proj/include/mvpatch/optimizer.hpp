// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mvpatch/detector.hpp"
#include "mvpatch/error.hpp"
#include "mvpatch/imaging.hpp"
#include "mvpatch/loss.hpp"
#include "mvpatch/parallel.hpp"
#include "mvpatch/random.hpp"

namespace mvpatch {

struct TrainConfig {
  int patch_w = 300;
  int patch_h = 300;
  int minibatch = 4;
  double lr = 0.03;
  LossWeights weights{};
  int iterations = 1000;
  std::uint64_t seed = 0;
  double patch_scale = 0.5;
  double anchor_x = 0.5;
  double anchor_y = 0.5;
  int jobs = 1;

  void validate() const {
    if (patch_w < 2 || patch_h < 2) fail(ErrorKind::InvalidArgument, "patch must be at least 2x2");
    if (minibatch < 1) fail(ErrorKind::InvalidArgument, "minibatch must be >= 1");
    if (!(lr > 0.0)) fail(ErrorKind::InvalidArgument, "learning rate must be > 0");
    if (iterations < 1) fail(ErrorKind::InvalidArgument, "iterations must be >= 1");
    if (!weights.valid()) fail(ErrorKind::InvalidArgument, "loss weights must be >= 0");
    if (!(patch_scale > 0.0 && patch_scale <= 1.0)) fail(ErrorKind::InvalidArgument, "patch scale must lie in (0, 1]");
  }
};

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  GradientRaster m;
  GradientRaster v;
  std::int64_t t = 0;

  static AdamState for_patch(const ImageBuffer& patch) {
    return {GradientRaster::like(patch), GradientRaster::like(patch), 0};
  }
};

struct TrainSample {
  ImageBuffer frame;
  std::vector<BBox> person_bboxes;
};

/// Uniform [0, 1) per channel from the seeded generator.
inline ImageBuffer init_patch(int w, int h, std::uint64_t seed) {
  if (w < 2 || h < 2) fail(ErrorKind::InvalidArgument, "patch must be at least 2x2");
  ImageBuffer p(w, h);
  Rng rng(derive_seed(seed, 1));
  for (double& v : p.values()) v = uniform01(rng);
  return p;
}

/// One bias-corrected Adam update followed by clamping to [0, 1].  Updates
/// `state` and `patch` in place.
inline void adam_step(AdamState& state, const GradientRaster& grad, ImageBuffer& patch, double lr) {
  if (!grad.same_shape(patch) || !state.m.same_shape(patch) || !state.v.same_shape(patch)) {
    fail(ErrorKind::ShapeMismatch, "gradient, optimizer state and patch shapes differ");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(AdamState::kBeta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(AdamState::kBeta2, static_cast<double>(state.t));
  auto p = patch.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double g = grad.values[i];
    double& m = state.m.values[i];
    double& v = state.v.values[i];
    m = AdamState::kBeta1 * m + (1.0 - AdamState::kBeta1) * g;
    v = AdamState::kBeta2 * v + (1.0 - AdamState::kBeta2) * g * g;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    p[i] = std::clamp(p[i] - lr * m_hat / (std::sqrt(v_hat) + AdamState::kEps), 0.0, 1.0);
  }
}

/// Adjoint of the placement operator: routes a gradient over frame pixels
/// back to the patch pixels through the recorded bilinear taps.
inline GradientRaster backprop_through_placement(const GradientRaster& frame_grad, const CompositeRecord& record) {
  if (!record.initialized()) fail(ErrorKind::MissingForwardRecord, "no forward placement was recorded");
  if (frame_grad.width != record.frame_w() || frame_grad.height != record.frame_h()) {
    fail(ErrorKind::MissingForwardRecord, "frame gradient does not match the recorded frame");
  }
  GradientRaster out(record.patch_w(), record.patch_h());
  for (const auto& e : record.entries()) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double g = frame_grad.values[3 * e.frame_pixel + c];
      if (g == 0.0) continue;
      for (std::size_t k = 0; k < 4; ++k) out.values[3 * e.taps.pixel[k] + c] += e.taps.weight[k] * g;
    }
  }
  return out;
}

/// Places the patch on every person of a frame, recording the taps.
inline ImageBuffer composite_sample(const TrainSample& sample, const ImageBuffer& patch, const TrainConfig& cfg,
                                    CompositeRecord* record) {
  ImageBuffer frame = sample.frame;
  for (const auto& box : sample.person_bboxes) {
    place_patch_into(frame, patch, {box, cfg.patch_scale, cfg.anchor_x, cfg.anchor_y}, record);
  }
  return frame;
}

/// Max objectness of one sample with the patch applied, and its gradient
/// with respect to the patch pixels.
inline ObjectnessGrad sample_objectness(const TrainSample& sample, const ImageBuffer& patch, Detector& detector,
                                        const TrainConfig& cfg) {
  CompositeRecord record(sample.frame.width(), sample.frame.height(), patch.width(), patch.height());
  const ImageBuffer frame = composite_sample(sample, patch, cfg, &record);
  const ObjectnessGrad on_frame = detector.max_objectness_grad(frame);
  return {on_frame.value, backprop_through_placement(on_frame.grad, record)};
}

struct TrainResult {
  ImageBuffer patch;
  std::vector<LossBreakdown> history;
};

/// Called after every iteration with (iteration index, loss before the
/// update, patch after the update).
using TrainObserver = std::function<void(int, const LossBreakdown&, const ImageBuffer&)>;

/// Adam descent on alpha*NPS + beta*max(TV, 0.1) + gamma*L_obj, where L_obj
/// is the mean over a seeded with-replacement minibatch of the detector's
/// per-frame max objectness with the patch placed on every person.
inline TrainResult train_patch(std::span<const TrainSample> samples, Detector& detector, const TrainConfig& cfg,
                               const PrintableColorSet& palette = PrintableColorSet::default_palette(),
                               const TrainObserver& observer = {}) {
  cfg.validate();
  if (!detector.capabilities().grad) {
    fail(ErrorKind::CapabilityMismatch, detector.name() + " detector cannot provide gradients for training");
  }
  if (samples.empty()) fail(ErrorKind::InvalidArgument, "no training samples");
  for (const auto& s : samples) {
    if (s.person_bboxes.empty()) fail(ErrorKind::InvalidArgument, "training sample without person boxes");
  }

  TrainResult result{init_patch(cfg.patch_w, cfg.patch_h, cfg.seed), {}};
  result.history.reserve(static_cast<std::size_t>(cfg.iterations));
  AdamState state = AdamState::for_patch(result.patch);
  Rng batch_rng(derive_seed(cfg.seed, 2));
  const std::size_t batch = static_cast<std::size_t>(cfg.minibatch);
  std::vector<std::size_t> picks(batch);
  std::vector<ObjectnessGrad> members(batch);

  for (int it = 0; it < cfg.iterations; ++it) {
    for (auto& p : picks) p = static_cast<std::size_t>(uniform_index(batch_rng, samples.size()));

    parallel_for(batch, cfg.jobs, [&](std::size_t i) {
      members[i] = sample_objectness(samples[picks[i]], result.patch, detector, cfg);
    });
    double l_obj = 0.0;
    GradientRaster g_obj = GradientRaster::like(result.patch);
    for (std::size_t i = 0; i < batch; ++i) {
      l_obj += members[i].value;
      g_obj.add_scaled(members[i].grad, 1.0 / static_cast<double>(batch));
    }
    l_obj /= static_cast<double>(batch);

    const TermValue nps = nps_score(result.patch, palette);
    const TvValue tv = tv_score(result.patch);
    const LossBreakdown loss = make_breakdown(nps.value, tv.raw, l_obj, cfg.weights);
    result.history.push_back(loss);

    const GradientRaster grad = total_gradient(nps.grad, tv.grad, g_obj, cfg.weights);
    adam_step(state, grad, result.patch, cfg.lr);
    if (observer) observer(it, loss, result.patch);
  }
  return result;
}

/// Mean over samples of the detector's max objectness with the patch placed.
inline double mean_max_objectness(std::span<const TrainSample> samples, const ImageBuffer& patch, Detector& detector,
                                  const TrainConfig& cfg) {
  double s = 0.0;
  for (const auto& sample : samples) {
    s += detector.max_objectness_grad(composite_sample(sample, patch, cfg, nullptr)).value;
  }
  return s / static_cast<double>(samples.size());
}

}  // namespace mvpatch
