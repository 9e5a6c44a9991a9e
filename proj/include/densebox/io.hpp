#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "densebox/em_merger.hpp"
#include "densebox/metrics.hpp"

namespace densebox {

// Malformed or invariant-violating content; messages carry file and line.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable or unwritable paths.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Detections grouped by image id, file order preserved within an image.
using DetectionSet = std::map<std::string, std::vector<Detection>>;

// Per-image (width, height).
using ImageDims = std::map<std::string, std::pair<double, double>>;

// Detection CSV: header "image_id,x1,y1,x2,y2,objectness,soft_iou". The
// soft_iou column may be omitted row-wise, in which case it defaults to the
// objectness value. Rows must carry finite corners with x1 < x2, y1 < y2
// and scores in [0, 1]; violations raise DataError naming the line.
DetectionSet load_detections(const std::string& path);

// Writes the same format with image ids sorted lexicographically and rows
// within an image ordered by descending objectness (stable), six decimals
// per numeric field. An empty set writes just the header.
void write_detections(const std::string& path, const DetectionSet& dets);

// Merged results: the merge confidence lands in both score columns.
void write_merged(const std::string& path,
                  const std::map<std::string, std::vector<ScoredBox>>& merged);

// Ground truth written as detections with both scores fixed to 1.
void write_ground_truth(const std::string& path, const GroundTruth& gt);

// Boxes only, for evaluation against ground truth.
GroundTruth to_ground_truth(const DetectionSet& dets);

// Ranked predictions for evaluation; confidence is the objectness column
// (merged files carry the merge confidence there).
Predictions to_predictions(const DetectionSet& dets);

// Dims CSV: header "image_id,width,height" with positive dimensions.
ImageDims load_image_dims(const std::string& path);

// Plain "key = value" configuration; '#' starts a comment, blank lines are
// ignored, later duplicates win.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  explicit KeyValueConfig(std::map<std::string, std::string> values)
      : values_(std::move(values)) {}

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  // Typed getters return `fallback` for absent keys and raise DataError for
  // unparseable values.
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;

  // Raises DataError when a stored key is not in `allowed` (typo guard).
  void require_known_keys(const std::vector<std::string>& allowed) const;

 private:
  std::map<std::string, std::string> values_;
};

KeyValueConfig load_key_value_config(const std::string& path);

}  // namespace densebox
