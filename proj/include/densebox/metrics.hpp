#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "densebox/geometry.hpp"

namespace densebox {

// Per-image collections keyed by image id. std::map keeps iteration (and
// therefore every pooled computation) in lexicographic image order.
using BoxList = std::vector<Box>;
using GroundTruth = std::map<std::string, BoxList>;
using Predictions = std::map<std::string, std::vector<ScoredBox>>;

struct EvalReport {
  double ap = 0.0;        // mean AP over IoU .50:.05:.95, 101-point sampling
  double ap75 = 0.0;      // AP at IoU .75
  double ar300 = 0.0;     // mean recall over the same IoUs, top 300 per image
  double p_at_r50 = 0.0;  // interpolated precision at recall 0.5, IoU .75
  double mae = 0.0;       // mean absolute per-image count error
  double rmse = 0.0;      // root mean squared per-image count error
};

// The ten thresholds .50, .55, ..., .95.
std::vector<double> default_iou_thresholds();

// Regression target per predicted box: IoU with the ground-truth box whose
// center is nearest to the prediction's center (lowest index on ties), 0
// when there is no overlap or no ground truth at all.
std::vector<double> soft_iou_targets(std::span<const Box> pred_boxes,
                                     std::span<const Box> gt_boxes);

// Mean binary cross-entropy between targets and predicted values, with
// predictions clamped to [1e-7, 1 - 1e-7]. Throws std::invalid_argument on
// length mismatch or empty input.
double soft_iou_loss(std::span<const double> targets,
                     std::span<const double> predictions);

// Greedy matching at one IoU threshold: predictions visit by descending
// confidence (earlier index on ties), each taking the unmatched ground
// truth with the highest IoU >= threshold (lowest gt index on ties).
// Returns, per prediction in input order, the matched gt index or -1.
std::vector<int> match_detections(std::span<const ScoredBox> preds,
                                  std::span<const Box> gt,
                                  double iou_threshold);

// Mean over `iou_thresholds` of 101-point interpolated average precision
// with the precision envelope, pooled over all images. With no ground truth
// anywhere the result is 1 if there are also no predictions, else 0.
double average_precision(const Predictions& preds, const GroundTruth& gt,
                         std::span<const double> iou_thresholds);

// Mean recall over `iou_thresholds` keeping at most `max_detections`
// top-confidence predictions per image. Vacuously 1 with no ground truth.
double average_recall(const Predictions& preds, const GroundTruth& gt,
                      int max_detections,
                      std::span<const double> iou_thresholds);

// Same with the default thresholds.
double average_recall(const Predictions& preds, const GroundTruth& gt,
                      int max_detections = 300);

// Interpolated (envelope) precision at the exact recall level, 0 when the
// curve never reaches it.
double precision_at_recall(const Predictions& preds, const GroundTruth& gt,
                           double recall_level = 0.5,
                           double iou_threshold = 0.75);

// (MAE, RMSE) between per-image predicted and true object counts. Throws
// std::invalid_argument on length mismatch or empty input.
std::pair<double, double> count_errors(std::span<const int> predicted,
                                       std::span<const int> truth);

// Full report; count errors pair images by id over the union of both maps,
// treating missing entries as zero.
EvalReport evaluate(const Predictions& preds, const GroundTruth& gt);

}  // namespace densebox
