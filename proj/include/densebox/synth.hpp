#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "densebox/em_merger.hpp"
#include "densebox/geometry.hpp"

namespace densebox {

// How simulated objectness relates to detection quality.
enum class ObjectnessLaw {
  kConstant,       // every detection gets objectness_constant
  kIouCorrelated,  // objectness = 0.5 + 0.5 * true IoU, clamped to [0, 1]
};

// Grid scene: rows x cols identical boxes separated by `gap` pixels with a
// `margin` border, each observed by a uniform number of duplicate
// detections with Gaussian center/size jitter expressed as fractions of the
// box dimensions.
struct SceneSpec {
  int rows = 12;
  int cols = 12;
  double box_w = 40.0;
  double box_h = 40.0;
  double gap = 8.0;
  double margin = 16.0;
  int duplicates_min = 5;
  int duplicates_max = 15;
  double center_jitter_frac = 0.0;
  double dim_jitter_frac = 0.0;
  // Additive Gaussian noise on the simulated soft IoU, clipped to [0, 1].
  double score_noise = 0.0;
  ObjectnessLaw objectness_law = ObjectnessLaw::kIouCorrelated;
  double objectness_constant = 0.9;
};

struct Scene {
  std::vector<Box> boxes;  // row-major ground truth
  double image_w = 0.0;
  double image_h = 0.0;
};

// Throws std::invalid_argument on unusable parameters (non-positive grid
// or box dimensions, inverted duplicate range, negative noise, fractions
// outside [0, 1], or an image too large to address).
void validate(const SceneSpec& spec);

// Deterministic layout; the seed only matters for simulate_detections.
Scene generate_scene(const SceneSpec& spec);

// Duplicate detections for each ground-truth box. With zero jitter and
// noise every detection equals its source box with soft_iou exactly 1. The
// random stream consumes the same number of draws per detection regardless
// of noise settings, so differing specs stay comparable per seed.
std::vector<Detection> simulate_detections(std::span<const Box> gt,
                                           const SceneSpec& spec,
                                           std::uint64_t seed);

}  // namespace densebox
