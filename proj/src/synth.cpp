#include "densebox/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "densebox/rng.hpp"

namespace densebox {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

void validate(const SceneSpec& spec) {
  if (spec.rows < 1 || spec.cols < 1) {
    throw std::invalid_argument("scene grid needs rows >= 1 and cols >= 1");
  }
  if (!(spec.box_w > 0.0) || !(spec.box_h > 0.0)) {
    throw std::invalid_argument("scene boxes need positive dimensions");
  }
  if (spec.gap < 0.0 || spec.margin < 0.0) {
    throw std::invalid_argument("scene gap and margin must be nonnegative");
  }
  if (spec.duplicates_min < 1 || spec.duplicates_max < spec.duplicates_min) {
    throw std::invalid_argument(
        "duplicate range needs 1 <= duplicates_min <= duplicates_max");
  }
  if (spec.center_jitter_frac < 0.0 || spec.center_jitter_frac > 1.0 ||
      spec.dim_jitter_frac < 0.0 || spec.dim_jitter_frac > 1.0) {
    throw std::invalid_argument("jitter fractions must lie in [0, 1]");
  }
  if (spec.score_noise < 0.0) {
    throw std::invalid_argument("score_noise must be nonnegative");
  }
  if (spec.objectness_constant < 0.0 || spec.objectness_constant > 1.0) {
    throw std::invalid_argument("objectness_constant must lie in [0, 1]");
  }
  const double w = 2.0 * spec.margin + spec.cols * spec.box_w +
                   (spec.cols - 1) * spec.gap;
  const double h = 2.0 * spec.margin + spec.rows * spec.box_h +
                   (spec.rows - 1) * spec.gap;
  if (!(w <= 1e9) || !(h <= 1e9)) {
    throw std::invalid_argument("scene exceeds the addressable image size");
  }
}

Scene generate_scene(const SceneSpec& spec) {
  validate(spec);
  Scene scene;
  scene.image_w = 2.0 * spec.margin + spec.cols * spec.box_w +
                  (spec.cols - 1) * spec.gap;
  scene.image_h = 2.0 * spec.margin + spec.rows * spec.box_h +
                  (spec.rows - 1) * spec.gap;
  scene.boxes.reserve(static_cast<std::size_t>(spec.rows) *
                      static_cast<std::size_t>(spec.cols));
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      Box b;
      b.cx = spec.margin + 0.5 * spec.box_w + c * (spec.box_w + spec.gap);
      b.cy = spec.margin + 0.5 * spec.box_h + r * (spec.box_h + spec.gap);
      b.w = spec.box_w;
      b.h = spec.box_h;
      scene.boxes.push_back(b);
    }
  }
  return scene;
}

std::vector<Detection> simulate_detections(std::span<const Box> gt,
                                           const SceneSpec& spec,
                                           std::uint64_t seed) {
  validate(spec);
  Rng rng(seed);
  std::vector<Detection> dets;
  for (const Box& truth : gt) {
    const int duplicates =
        rng.uniform_int(spec.duplicates_min, spec.duplicates_max);
    for (int d = 0; d < duplicates; ++d) {
      Detection det;
      // All draws happen unconditionally; a zero-sigma normal returns the
      // mean exactly, which keeps both the stream layout and the zero-noise
      // scene exact.
      det.box.cx = truth.cx + rng.normal(0.0, spec.center_jitter_frac * truth.w);
      det.box.cy = truth.cy + rng.normal(0.0, spec.center_jitter_frac * truth.h);
      det.box.w =
          std::max(truth.w * (1.0 + rng.normal(0.0, spec.dim_jitter_frac)), 1e-3);
      det.box.h =
          std::max(truth.h * (1.0 + rng.normal(0.0, spec.dim_jitter_frac)), 1e-3);
      const double true_iou = iou(det.box, truth);
      det.soft_iou = clamp01(true_iou + rng.normal(0.0, spec.score_noise));
      det.objectness = spec.objectness_law == ObjectnessLaw::kConstant
                           ? spec.objectness_constant
                           : clamp01(0.5 + 0.5 * true_iou);
      dets.push_back(det);
    }
  }
  return dets;
}

}  // namespace densebox
