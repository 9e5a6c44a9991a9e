#include "densebox/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "densebox/rng.hpp"

namespace densebox {

DimStats dimension_stats(std::span<const Box> boxes) {
  if (boxes.empty()) {
    throw std::invalid_argument("dimension_stats needs at least one box");
  }
  const double n = static_cast<double>(boxes.size());
  double sw = 0.0, sh = 0.0, sw2 = 0.0, sh2 = 0.0;
  for (const Box& b : boxes) {
    sw += b.w;
    sh += b.h;
    sw2 += b.w * b.w;
    sh2 += b.h * b.h;
  }
  DimStats s;
  s.mean_w = sw / n;
  s.mean_h = sh / n;
  s.std_w = std::sqrt(std::max(sw2 / n - s.mean_w * s.mean_w, 0.0));
  s.std_h = std::sqrt(std::max(sh2 / n - s.mean_h * s.mean_h, 0.0));
  return s;
}

std::vector<Detection> greedy_nms(std::span<const Detection> dets,
                                  double iou_threshold,
                                  ScoreSource score_source) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return selected_score(dets[a], score_source) >
                            selected_score(dets[b], score_source);
                   });

  std::vector<Detection> kept;
  for (const std::size_t id : order) {
    bool keep = true;
    for (const Detection& k : kept) {
      if (iou(dets[id].box, k.box) > iou_threshold) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(dets[id]);
  }
  return kept;
}

namespace {

// One dimension for the random baseline: redraw until it fits, clamp as a
// last resort.
double sample_dim(Rng& rng, double mean, double stddev, double limit) {
  double value = 0.0;
  for (int attempt = 0; attempt < 100; ++attempt) {
    value = rng.normal(mean, stddev);
    if (value > 0.0 && value <= limit) return value;
  }
  return std::clamp(value, 1.0, limit);
}

}  // namespace

std::vector<Box> monkey(int count, const DimStats& stats, double image_w,
                        double image_h, std::uint64_t seed) {
  if (count < 0) {
    throw std::invalid_argument("monkey count must be nonnegative");
  }
  if (!(image_w >= 1.0) || !(image_h >= 1.0)) {
    throw std::invalid_argument("monkey needs image dimensions >= 1");
  }
  if (!(stats.mean_w > 0.0) || !(stats.mean_h > 0.0) || stats.std_w < 0.0 ||
      stats.std_h < 0.0) {
    throw std::invalid_argument("monkey needs positive mean dimensions");
  }
  Rng rng(seed);
  std::vector<Box> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double w = sample_dim(rng, stats.mean_w, stats.std_w, image_w);
    const double h = sample_dim(rng, stats.mean_h, stats.std_h, image_h);
    const double x1 = rng.uniform(0.0, image_w - w);
    const double y1 = rng.uniform(0.0, image_h - h);
    out.push_back({x1 + 0.5 * w, y1 + 0.5 * h, w, h});
  }
  return out;
}

}  // namespace densebox
