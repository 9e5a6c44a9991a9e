#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "densebox/em_merger.hpp"
#include "densebox/geometry.hpp"

namespace densebox {

// Mean and standard deviation of box dimensions, the shape prior the random
// baseline samples from.
struct DimStats {
  double mean_w = 0.0;
  double std_w = 0.0;
  double mean_h = 0.0;
  double std_h = 0.0;
};

// Population statistics of the given boxes' dimensions. Throws
// std::invalid_argument on empty input.
DimStats dimension_stats(std::span<const Box> boxes);

// Classic greedy non-maximum suppression: visit detections by descending
// selected score (ties keep the earlier input index) and keep one iff its
// IoU with every previously kept detection is <= iou_threshold. The result
// is a subset of the input in visit order.
std::vector<Detection> greedy_nms(std::span<const Detection> dets,
                                  double iou_threshold,
                                  ScoreSource score_source = ScoreSource::kObjectness);

// Chance-level baseline: `count` boxes with uniformly random positions and
// Gaussian-distributed dimensions. Each dimension is redrawn until it fits
// inside the image (at most 100 attempts, then clamped to [1, image dim]),
// and the box is placed so it stays fully inside the image. Deterministic
// in (count, stats, image size, seed).
std::vector<Box> monkey(int count, const DimStats& stats, double image_w,
                        double image_h, std::uint64_t seed);

}  // namespace densebox
