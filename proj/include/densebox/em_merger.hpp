#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "densebox/gaussian.hpp"
#include "densebox/geometry.hpp"

namespace densebox {

// One raw detector output: a box plus an objectness score and a quality
// estimate of its overlap with the underlying object. Scores live in [0, 1].
struct Detection {
  Box box;
  double objectness = 0.0;
  double soft_iou = 0.0;
};

// Which score both weighs mixture components and ranks boxes in the greedy
// baseline.
enum class ScoreSource {
  kSoftIou,
  kObjectness,
};

struct MergeConfig {
  // Stop once the mixture-fit objective drops below this value.
  double epsilon_em = 1e-10;
  // Hard cap on E+M iterations; initialization is not counted.
  int max_iterations = 10;
  // Detections with objectness <= floor are dropped before merging.
  double objectness_floor = 0.1;
  // Pairwise overlap allowed between surviving clusters (2-sigma boxes).
  double suppression_iou = 0.3;
  ScoreSource score_source = ScoreSource::kSoftIou;
  // When set, overrides the area-derived cluster count (clamped to [1, N]).
  std::optional<int> k_override;
};

// Weighted set of diagonal Gaussians. Weights are nonnegative and, for
// mixtures built by build_mixture, sum to one.
struct Mixture {
  std::vector<BoxGaussian> components;
  std::vector<double> weights;

  std::size_t size() const { return components.size(); }
  bool empty() const { return components.empty(); }
};

// assignment[i] is the cluster index detection i currently belongs to.
using Assignment = std::vector<int>;

enum class EmStop {
  kEpsilon,       // objective fell below epsilon_em
  kFixedPoint,    // assignments stopped changing
  kIterationCap,  // max_iterations reached
};

struct EmResult {
  Mixture mixture;
  Assignment assignment;
  // Objective value after each M-step, in iteration order.
  std::vector<double> objective_trace;
  EmStop stop = EmStop::kIterationCap;
};

double selected_score(const Detection& d, ScoreSource source);

// Drops detections whose objectness is <= floor.
std::vector<Detection> apply_objectness_floor(std::span<const Detection> dets,
                                              double floor);

// One Gaussian per surviving detection, weighted by its selected score
// normalized over the survivors. All-zero scores yield an empty mixture
// (the caller treats that as "nothing to merge", not an error).
Mixture build_mixture(std::span<const Detection> dets,
                      const MergeConfig& config);

// Area-derived cluster count: floor(image area / mean detection box area),
// clamped to [1, N]. Throws std::invalid_argument on empty input or
// non-positive image dimensions.
int estimate_k(double image_w, double image_h,
               std::span<const Detection> dets);

// Reduces f to at most k clusters by greedy agglomeration: repeatedly
// moment-match the pair with the smallest symmetrized KL. k >= size(f)
// returns f unchanged. A spatial grid limits candidate pairs to near
// neighbors; an exact pairwise pass takes over if the grid runs dry.
Mixture init_clusters(const Mixture& f, int k);

// Assigns every source component to the cluster minimizing KL(f_i || g_j),
// lowest index on ties.
Assignment e_step(const Mixture& f, const Mixture& g);

// Per-cluster weighted moment matching over the assigned members, keeping
// covariance diagonal. Clusters with zero total weight are dropped, which
// shifts the indices of later clusters down.
Mixture m_step(const Mixture& f, const Assignment& assignment,
               int cluster_count);

// Weighted fit of g to f: sum_i alpha_i * min_j KL(f_i || g_j).
double objective(const Mixture& f, const Mixture& g);

// Alternates e_step and m_step starting from init_clusters(f, k) until the
// objective drops below config.epsilon_em, the assignment repeats, or
// config.max_iterations is exhausted. The objective trace is non-increasing.
EmResult em_reduce(const Mixture& f, int k, const MergeConfig& config);

// Greedy overlap pruning on the clusters' 2-sigma boxes: visit by
// descending weight and keep a cluster iff its IoU with every kept cluster
// is <= suppression_iou. Kept weights are renormalized.
Mixture suppress(const Mixture& g, double suppression_iou);

// Turns clusters back into scored boxes. Members are the detections whose
// centers fall inside a cluster's 2-sigma ellipse: the box takes the
// cluster mean as center and the member-median width/height, with
// confidence max member soft_iou. Memberless clusters fall back to the
// 2-sigma box with the cluster weight as confidence.
std::vector<ScoredBox> extract_boxes(const Mixture& g,
                                     std::span<const Detection> detections);

// Full pipeline: floor filter, mixture fit, EM reduction, overlap
// suppression, box extraction. Empty (or fully filtered) input yields an
// empty result.
std::vector<ScoredBox> merge(std::span<const Detection> detections,
                             double image_w, double image_h,
                             const MergeConfig& config = {});

}  // namespace densebox
