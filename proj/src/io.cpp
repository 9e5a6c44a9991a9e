#include "densebox/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace densebox {

namespace {

constexpr const char* kDetectionHeader =
    "image_id,x1,y1,x2,y2,objectness,soft_iou";
constexpr const char* kDimsHeader = "image_id,width,height";

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

[[noreturn]] void fail_line(const std::string& path, std::size_t line,
                            const std::string& what) {
  throw DataError(path + ":" + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& path, std::size_t line,
                    const std::string& field, const std::string& name) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    fail_line(path, line, "cannot parse " + name + " from '" + field + "'");
  }
  return value;
}

double parse_score(const std::string& path, std::size_t line,
                   const std::string& field, const std::string& name) {
  const double v = parse_double(path, line, field, name);
  if (v < 0.0 || v > 1.0) {
    fail_line(path, line, name + " must lie in [0, 1], got '" + field + "'");
  }
  return v;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

class OutputFile {
 public:
  explicit OutputFile(const std::string& path) : path_(path), out_(path) {
    if (!out_) throw IoError("cannot open '" + path + "' for writing");
  }

  template <typename... Args>
  void row(const char* fmt, Args... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, fmt, args...);
    out_ << buf << '\n';
  }

  void line(const std::string& s) { out_ << s << '\n'; }

  void close() {
    out_.flush();
    if (!out_) throw IoError("failed writing '" + path_ + "'");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

void check_image_id(const std::string& id) {
  if (id.empty() || id.find(',') != std::string::npos) {
    throw DataError("image id '" + id + "' must be nonempty and comma-free");
  }
}

// Rows sorted by descending objectness (stable) within each image.
std::vector<std::size_t> objectness_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return dets[a].objectness > dets[b].objectness;
                   });
  return order;
}

}  // namespace

DetectionSet load_detections(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  DetectionSet out;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (line_no == 1) {
      if (stripped != kDetectionHeader) {
        fail_line(path, line_no,
                  std::string("expected header '") + kDetectionHeader + "'");
      }
      continue;
    }
    if (stripped.empty()) continue;
    const std::vector<std::string> f = split_csv(stripped);
    if (f.size() != 6 && f.size() != 7) {
      fail_line(path, line_no, "expected 6 or 7 fields, got " +
                                   std::to_string(f.size()));
    }
    check_image_id(f[0]);
    Corners c;
    c.x1 = parse_double(path, line_no, f[1], "x1");
    c.y1 = parse_double(path, line_no, f[2], "y1");
    c.x2 = parse_double(path, line_no, f[3], "x2");
    c.y2 = parse_double(path, line_no, f[4], "y2");
    Detection det;
    try {
      det.box = from_corners(c);
    } catch (const std::invalid_argument& e) {
      fail_line(path, line_no, e.what());
    }
    det.objectness = parse_score(path, line_no, f[5], "objectness");
    det.soft_iou = f.size() == 7
                       ? parse_score(path, line_no, f[6], "soft_iou")
                       : det.objectness;
    out[f[0]].push_back(det);
  }
  return out;
}

void write_detections(const std::string& path, const DetectionSet& dets) {
  OutputFile out(path);
  out.line(kDetectionHeader);
  for (const auto& [id, image_dets] : dets) {
    check_image_id(id);
    for (const std::size_t i : objectness_order(image_dets)) {
      const Corners c = to_corners(image_dets[i].box);
      out.row("%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", id.c_str(), c.x1, c.y1,
              c.x2, c.y2, image_dets[i].objectness, image_dets[i].soft_iou);
    }
  }
  out.close();
}

void write_merged(const std::string& path,
                  const std::map<std::string, std::vector<ScoredBox>>& merged) {
  DetectionSet as_dets;
  for (const auto& [id, boxes] : merged) {
    auto& v = as_dets[id];
    v.reserve(boxes.size());
    for (const ScoredBox& sb : boxes) {
      v.push_back({sb.box, sb.confidence, sb.confidence});
    }
  }
  write_detections(path, as_dets);
}

void write_ground_truth(const std::string& path, const GroundTruth& gt) {
  DetectionSet as_dets;
  for (const auto& [id, boxes] : gt) {
    auto& v = as_dets[id];
    v.reserve(boxes.size());
    for (const Box& b : boxes) v.push_back({b, 1.0, 1.0});
  }
  write_detections(path, as_dets);
}

GroundTruth to_ground_truth(const DetectionSet& dets) {
  GroundTruth gt;
  for (const auto& [id, image_dets] : dets) {
    auto& v = gt[id];
    v.reserve(image_dets.size());
    for (const Detection& d : image_dets) v.push_back(d.box);
  }
  return gt;
}

Predictions to_predictions(const DetectionSet& dets) {
  Predictions preds;
  for (const auto& [id, image_dets] : dets) {
    auto& v = preds[id];
    v.reserve(image_dets.size());
    for (const Detection& d : image_dets) v.push_back({d.box, d.objectness});
  }
  return preds;
}

ImageDims load_image_dims(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  ImageDims out;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (line_no == 1) {
      if (stripped != kDimsHeader) {
        fail_line(path, line_no,
                  std::string("expected header '") + kDimsHeader + "'");
      }
      continue;
    }
    if (stripped.empty()) continue;
    const std::vector<std::string> f = split_csv(stripped);
    if (f.size() != 3) {
      fail_line(path, line_no,
                "expected 3 fields, got " + std::to_string(f.size()));
    }
    check_image_id(f[0]);
    const double w = parse_double(path, line_no, f[1], "width");
    const double h = parse_double(path, line_no, f[2], "height");
    if (!(w > 0.0) || !(h > 0.0)) {
      fail_line(path, line_no, "image dimensions must be positive");
    }
    out[f[0]] = {w, h};
  }
  return out;
}

double KeyValueConfig::get_double(const std::string& key,
                                  double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw DataError("config key '" + key + "' has non-numeric value '" +
                    it->second + "'");
  }
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  int value = 0;
  const char* begin = it->second.data();
  const char* end = begin + it->second.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError("config key '" + key + "' has non-integer value '" +
                    it->second + "'");
  }
  return value;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

void KeyValueConfig::require_known_keys(
    const std::vector<std::string>& allowed) const {
  for (const auto& [key, value] : values_) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw DataError("unknown config key '" + key + "'");
    }
  }
}

KeyValueConfig load_key_value_config(const std::string& path) {
  std::ifstream in = open_input(path);
  std::map<std::string, std::string> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string stripped =
        trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      fail_line(path, line_no, "expected 'key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) fail_line(path, line_no, "empty config key");
    values[key] = value;  // later duplicates win
  }
  return KeyValueConfig(std::move(values));
}

}  // namespace densebox
