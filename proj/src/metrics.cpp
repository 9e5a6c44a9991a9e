#include "densebox/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace densebox {

namespace {

// Prediction indices by descending confidence, earlier input index first on
// ties. Every ranked consumer shares this ordering.
std::vector<std::size_t> rank_by_confidence(std::span<const ScoredBox> preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return preds[a].confidence > preds[b].confidence;
                   });
  return order;
}

// Greedy matcher shared by match_detections and the pooled PR machinery.
// Visits `order` (already ranked, possibly truncated) and fills
// `matched_gt` per visited prediction; returns per-visit hit flags.
std::vector<char> greedy_match(std::span<const ScoredBox> preds,
                               std::span<const std::size_t> order,
                               std::span<const Box> gt, double iou_threshold,
                               std::vector<int>* pred_to_gt) {
  std::vector<char> gt_taken(gt.size(), 0);
  std::vector<char> hit(order.size(), 0);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const Box& p = preds[order[rank]].box;
    double best_iou = -1.0;
    int best_gt = -1;
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (gt_taken[j]) continue;
      const double v = iou(p, gt[j]);
      if (v >= iou_threshold && v > best_iou) {
        best_iou = v;
        best_gt = static_cast<int>(j);
      }
    }
    if (best_gt >= 0) {
      gt_taken[best_gt] = 1;
      hit[rank] = 1;
      if (pred_to_gt) (*pred_to_gt)[order[rank]] = best_gt;
    }
  }
  return hit;
}

struct PooledCurve {
  // Parallel arrays over pooled predictions in global confidence order.
  std::vector<double> recall;     // non-decreasing
  std::vector<double> precision;  // raw, pre-envelope
  int total_gt = 0;
  std::size_t pred_count = 0;
};

// Matches every image at `iou_threshold` (keeping at most max_detections
// top-confidence predictions per image when max_detections >= 0), pools the
// outcomes by global confidence, and accumulates the raw PR points.
PooledCurve pooled_curve(const Predictions& preds, const GroundTruth& gt,
                         double iou_threshold, int max_detections) {
  PooledCurve curve;
  for (const auto& [id, boxes] : gt) {
    curve.total_gt += static_cast<int>(boxes.size());
  }

  std::vector<std::pair<double, char>> pooled;  // (confidence, hit)
  for (const auto& [id, image_preds] : preds) {
    static const BoxList kNoBoxes;
    const auto it = gt.find(id);
    const BoxList& image_gt = it != gt.end() ? it->second : kNoBoxes;
    std::vector<std::size_t> order = rank_by_confidence(image_preds);
    if (max_detections >= 0 &&
        order.size() > static_cast<std::size_t>(max_detections)) {
      order.resize(static_cast<std::size_t>(max_detections));
    }
    const std::vector<char> hit =
        greedy_match(image_preds, order, image_gt, iou_threshold, nullptr);
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      pooled.emplace_back(image_preds[order[rank]].confidence, hit[rank]);
    }
  }
  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  curve.pred_count = pooled.size();
  if (curve.total_gt <= 0) return curve;
  double tp = 0.0;
  double fp = 0.0;
  curve.recall.reserve(pooled.size());
  curve.precision.reserve(pooled.size());
  for (const auto& [conf, is_tp] : pooled) {
    if (is_tp) {
      tp += 1.0;
    } else {
      fp += 1.0;
    }
    curve.recall.push_back(tp / static_cast<double>(curve.total_gt));
    curve.precision.push_back(tp / (tp + fp));
  }
  return curve;
}

// Envelope precision: for query recall t, the maximum raw precision over
// all points with recall >= t (0 when unreachable). Recall is already
// non-decreasing, so a suffix maximum plus lower_bound answers queries.
class PrecisionEnvelope {
 public:
  explicit PrecisionEnvelope(const PooledCurve& curve)
      : recall_(curve.recall), suffix_max_(curve.precision) {
    for (std::size_t i = suffix_max_.size(); i-- > 1;) {
      suffix_max_[i - 1] = std::max(suffix_max_[i - 1], suffix_max_[i]);
    }
  }

  double at(double t) const {
    const auto it = std::lower_bound(recall_.begin(), recall_.end(), t);
    if (it == recall_.end()) return 0.0;
    return suffix_max_[static_cast<std::size_t>(it - recall_.begin())];
  }

 private:
  std::vector<double> recall_;
  std::vector<double> suffix_max_;
};

// 101-point interpolated AP at one threshold, with the degenerate
// no-ground-truth rule applied.
double ap_at(const Predictions& preds, const GroundTruth& gt,
             double iou_threshold) {
  const PooledCurve curve = pooled_curve(preds, gt, iou_threshold, -1);
  if (curve.total_gt <= 0) return curve.pred_count == 0 ? 1.0 : 0.0;
  const PrecisionEnvelope envelope(curve);
  double sum = 0.0;
  for (int i = 0; i <= 100; ++i) {
    sum += envelope.at(static_cast<double>(i) / 100.0);
  }
  return sum / 101.0;
}

}  // namespace

std::vector<double> default_iou_thresholds() {
  std::vector<double> t;
  t.reserve(10);
  for (int i = 0; i < 10; ++i) {
    t.push_back(0.50 + 0.05 * static_cast<double>(i));
  }
  return t;
}

std::vector<double> soft_iou_targets(std::span<const Box> pred_boxes,
                                     std::span<const Box> gt_boxes) {
  std::vector<double> targets(pred_boxes.size(), 0.0);
  if (gt_boxes.empty()) return targets;
  for (std::size_t i = 0; i < pred_boxes.size(); ++i) {
    double best_d2 = std::numeric_limits<double>::infinity();
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < gt_boxes.size(); ++j) {
      const double dx = pred_boxes[i].cx - gt_boxes[j].cx;
      const double dy = pred_boxes[i].cy - gt_boxes[j].cy;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best_d2) {
        best_d2 = d2;
        best_j = j;
      }
    }
    targets[i] = iou(pred_boxes[i], gt_boxes[best_j]);
  }
  return targets;
}

double soft_iou_loss(std::span<const double> targets,
                     std::span<const double> predictions) {
  if (targets.size() != predictions.size()) {
    throw std::invalid_argument("soft_iou_loss needs equal-length inputs");
  }
  if (targets.empty()) {
    throw std::invalid_argument("soft_iou_loss needs at least one pair");
  }
  constexpr double kClamp = 1e-7;
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double p = std::clamp(predictions[i], kClamp, 1.0 - kClamp);
    sum += targets[i] * std::log(p) + (1.0 - targets[i]) * std::log(1.0 - p);
  }
  return -sum / static_cast<double>(targets.size());
}

std::vector<int> match_detections(std::span<const ScoredBox> preds,
                                  std::span<const Box> gt,
                                  double iou_threshold) {
  std::vector<int> pred_to_gt(preds.size(), -1);
  const std::vector<std::size_t> order = rank_by_confidence(preds);
  greedy_match(preds, order, gt, iou_threshold, &pred_to_gt);
  return pred_to_gt;
}

double average_precision(const Predictions& preds, const GroundTruth& gt,
                         std::span<const double> iou_thresholds) {
  if (iou_thresholds.empty()) {
    throw std::invalid_argument("average_precision needs thresholds");
  }
  double sum = 0.0;
  for (const double t : iou_thresholds) sum += ap_at(preds, gt, t);
  return sum / static_cast<double>(iou_thresholds.size());
}

double average_recall(const Predictions& preds, const GroundTruth& gt,
                      int max_detections,
                      std::span<const double> iou_thresholds) {
  if (iou_thresholds.empty()) {
    throw std::invalid_argument("average_recall needs thresholds");
  }
  double sum = 0.0;
  for (const double t : iou_thresholds) {
    const PooledCurve curve = pooled_curve(preds, gt, t, max_detections);
    if (curve.total_gt <= 0) {
      sum += 1.0;  // nothing to recall
      continue;
    }
    sum += curve.recall.empty() ? 0.0 : curve.recall.back();
  }
  return sum / static_cast<double>(iou_thresholds.size());
}

double average_recall(const Predictions& preds, const GroundTruth& gt,
                      int max_detections) {
  const std::vector<double> thresholds = default_iou_thresholds();
  return average_recall(preds, gt, max_detections, thresholds);
}

double precision_at_recall(const Predictions& preds, const GroundTruth& gt,
                           double recall_level, double iou_threshold) {
  const PooledCurve curve = pooled_curve(preds, gt, iou_threshold, -1);
  if (curve.total_gt <= 0) return curve.pred_count == 0 ? 1.0 : 0.0;
  return PrecisionEnvelope(curve).at(recall_level);
}

std::pair<double, double> count_errors(std::span<const int> predicted,
                                       std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument("count_errors needs equal-length inputs");
  }
  if (predicted.empty()) {
    throw std::invalid_argument("count_errors needs at least one image");
  }
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = static_cast<double>(predicted[i] - truth[i]);
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  const double n = static_cast<double>(predicted.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

EvalReport evaluate(const Predictions& preds, const GroundTruth& gt) {
  EvalReport report;
  const std::vector<double> thresholds = default_iou_thresholds();
  report.ap = average_precision(preds, gt, thresholds);
  const double t75[] = {0.75};
  report.ap75 = average_precision(preds, gt, t75);
  report.ar300 = average_recall(preds, gt, 300);
  report.p_at_r50 = precision_at_recall(preds, gt, 0.5, 0.75);

  std::set<std::string> ids;
  for (const auto& [id, v] : preds) ids.insert(id);
  for (const auto& [id, v] : gt) ids.insert(id);
  std::vector<int> predicted;
  std::vector<int> truth;
  for (const std::string& id : ids) {
    const auto pit = preds.find(id);
    const auto git = gt.find(id);
    predicted.push_back(
        pit != preds.end() ? static_cast<int>(pit->second.size()) : 0);
    truth.push_back(git != gt.end() ? static_cast<int>(git->second.size()) : 0);
  }
  if (!predicted.empty()) {
    const auto [mae, rmse] = count_errors(predicted, truth);
    report.mae = mae;
    report.rmse = rmse;
  }
  return report;
}

}  // namespace densebox
