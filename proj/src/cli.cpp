#include "densebox/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "densebox/baselines.hpp"
#include "densebox/em_merger.hpp"
#include "densebox/io.hpp"
#include "densebox/metrics.hpp"
#include "densebox/synth.hpp"

namespace densebox {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitIo = 3;

// Flag values that should override the config file only when given.
struct MergeFlags {
  std::optional<double> epsilon;
  std::optional<int> max_iter;
  std::optional<double> objectness_floor;
  std::optional<double> suppression_iou;
  std::optional<std::string> score_source;
  std::optional<int> k;
};

ScoreSource parse_score_source(const std::string& name) {
  if (name == "soft_iou") return ScoreSource::kSoftIou;
  if (name == "objectness") return ScoreSource::kObjectness;
  throw DataError("score source must be 'soft_iou' or 'objectness', got '" +
                  name + "'");
}

ObjectnessLaw parse_objectness_law(const std::string& name) {
  if (name == "constant") return ObjectnessLaw::kConstant;
  if (name == "iou_correlated") return ObjectnessLaw::kIouCorrelated;
  throw DataError(
      "objectness_law must be 'constant' or 'iou_correlated', got '" + name +
      "'");
}

const std::vector<std::string> kMergeKeys = {
    "epsilon", "max_iter", "objectness_floor", "suppression_iou",
    "score_source", "k"};

const std::vector<std::string> kSceneKeys = {
    "rows", "cols", "box_w", "box_h", "gap", "margin",
    "duplicates_min", "duplicates_max", "center_jitter_frac",
    "dim_jitter_frac", "score_noise", "objectness_law",
    "objectness_constant"};

void apply_merge_config(MergeConfig& cfg, const KeyValueConfig& file) {
  cfg.epsilon_em = file.get_double("epsilon", cfg.epsilon_em);
  cfg.max_iterations = file.get_int("max_iter", cfg.max_iterations);
  cfg.objectness_floor =
      file.get_double("objectness_floor", cfg.objectness_floor);
  cfg.suppression_iou =
      file.get_double("suppression_iou", cfg.suppression_iou);
  if (file.has("score_source")) {
    cfg.score_source = parse_score_source(file.get_string("score_source", ""));
  }
  if (file.has("k")) cfg.k_override = file.get_int("k", 0);
}

void apply_merge_flags(MergeConfig& cfg, const MergeFlags& flags) {
  if (flags.epsilon) cfg.epsilon_em = *flags.epsilon;
  if (flags.max_iter) cfg.max_iterations = *flags.max_iter;
  if (flags.objectness_floor) cfg.objectness_floor = *flags.objectness_floor;
  if (flags.suppression_iou) cfg.suppression_iou = *flags.suppression_iou;
  if (flags.score_source) {
    cfg.score_source = parse_score_source(*flags.score_source);
  }
  if (flags.k) cfg.k_override = *flags.k;
}

void apply_scene_config(SceneSpec& spec, const KeyValueConfig& file) {
  spec.rows = file.get_int("rows", spec.rows);
  spec.cols = file.get_int("cols", spec.cols);
  spec.box_w = file.get_double("box_w", spec.box_w);
  spec.box_h = file.get_double("box_h", spec.box_h);
  spec.gap = file.get_double("gap", spec.gap);
  spec.margin = file.get_double("margin", spec.margin);
  spec.duplicates_min = file.get_int("duplicates_min", spec.duplicates_min);
  spec.duplicates_max = file.get_int("duplicates_max", spec.duplicates_max);
  spec.center_jitter_frac =
      file.get_double("center_jitter_frac", spec.center_jitter_frac);
  spec.dim_jitter_frac =
      file.get_double("dim_jitter_frac", spec.dim_jitter_frac);
  spec.score_noise = file.get_double("score_noise", spec.score_noise);
  if (file.has("objectness_law")) {
    spec.objectness_law =
        parse_objectness_law(file.get_string("objectness_law", ""));
  }
  spec.objectness_constant =
      file.get_double("objectness_constant", spec.objectness_constant);
}

// Runs fn(0..n-1) on up to `workers` threads; output slots keep results in
// input order so parallel runs stay byte-identical to sequential ones. The
// first exception thrown by any worker is rethrown on the caller.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  const int usable =
      std::clamp<int>(workers, 1, static_cast<int>(std::max<std::size_t>(n, 1)));
  if (usable <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(usable));
  for (int t = 0; t < usable; ++t) {
    pool.emplace_back([&] {
      std::size_t i;
      while ((i = next.fetch_add(1)) < n) {
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

int default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void print_report(const EvalReport& report) {
  std::printf("%-22s %10s\n", "metric", "value");
  std::printf("%-22s %10.6f\n", "AP@[.50:.05:.95]", report.ap);
  std::printf("%-22s %10.6f\n", "AP@.75", report.ap75);
  std::printf("%-22s %10.6f\n", "AR@300", report.ar300);
  std::printf("%-22s %10.6f\n", "P@(R=.50,IoU=.75)", report.p_at_r50);
  std::printf("%-22s %10.6f\n", "count MAE", report.mae);
  std::printf("%-22s %10.6f\n", "count RMSE", report.rmse);
  std::printf("\n");
  std::printf("ap=%.6f\n", report.ap);
  std::printf("ap75=%.6f\n", report.ap75);
  std::printf("ar300=%.6f\n", report.ar300);
  std::printf("p_at_r50=%.6f\n", report.p_at_r50);
  std::printf("mae=%.6f\n", report.mae);
  std::printf("rmse=%.6f\n", report.rmse);
}

struct MergeArgs {
  std::string input;
  std::string output;
  std::optional<double> width;
  std::optional<double> height;
  std::string dims_path;
  std::string config_path;
  MergeFlags flags;
  int workers = default_workers();
};

int run_merge(const MergeArgs& args) {
  MergeConfig cfg;
  if (!args.config_path.empty()) {
    const KeyValueConfig file = load_key_value_config(args.config_path);
    file.require_known_keys(kMergeKeys);
    apply_merge_config(cfg, file);
  }
  apply_merge_flags(cfg, args.flags);

  const DetectionSet dets = load_detections(args.input);
  ImageDims dims;
  if (!args.dims_path.empty()) dims = load_image_dims(args.dims_path);

  std::vector<const DetectionSet::value_type*> images;
  images.reserve(dets.size());
  for (const auto& entry : dets) images.push_back(&entry);

  std::vector<std::vector<ScoredBox>> merged(images.size());
  std::size_t total_in = 0;
  parallel_for(images.size(), args.workers, [&](std::size_t i) {
    const auto& [id, image_dets] = *images[i];
    double w = 0.0;
    double h = 0.0;
    if (!args.dims_path.empty()) {
      const auto it = dims.find(id);
      if (it == dims.end()) {
        throw DataError("dims file has no entry for image '" + id + "'");
      }
      w = it->second.first;
      h = it->second.second;
    } else {
      w = *args.width;
      h = *args.height;
    }
    merged[i] = merge(image_dets, w, h, cfg);
  });

  std::map<std::string, std::vector<ScoredBox>> out;
  std::size_t total_out = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    total_in += images[i]->second.size();
    total_out += merged[i].size();
    out[images[i]->first] = std::move(merged[i]);
  }
  write_merged(args.output, out);
  std::printf("merged %zu image(s): %zu detections -> %zu boxes\n",
              images.size(), total_in, total_out);
  return kExitOk;
}

struct NmsArgs {
  std::string input;
  std::string output;
  double iou_thresh = 0.5;
  std::string score_source = "objectness";
  int workers = default_workers();
};

int run_nms(const NmsArgs& args) {
  const ScoreSource source = parse_score_source(args.score_source);
  const DetectionSet dets = load_detections(args.input);

  std::vector<const DetectionSet::value_type*> images;
  images.reserve(dets.size());
  for (const auto& entry : dets) images.push_back(&entry);

  std::vector<std::vector<Detection>> kept(images.size());
  parallel_for(images.size(), args.workers, [&](std::size_t i) {
    kept[i] = greedy_nms(images[i]->second, args.iou_thresh, source);
  });

  DetectionSet out;
  std::size_t total_in = 0;
  std::size_t total_out = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    total_in += images[i]->second.size();
    total_out += kept[i].size();
    out[images[i]->first] = std::move(kept[i]);
  }
  write_detections(args.output, out);
  std::printf("kept %zu of %zu detections over %zu image(s)\n", total_out,
              total_in, images.size());
  return kExitOk;
}

struct EvalArgs {
  std::string pred_path;
  std::string gt_path;
};

int run_eval(const EvalArgs& args) {
  const Predictions preds = to_predictions(load_detections(args.pred_path));
  const GroundTruth gt = to_ground_truth(load_detections(args.gt_path));
  print_report(evaluate(preds, gt));
  return kExitOk;
}

struct SynthArgs {
  std::string gt_path;
  std::string det_path;
  std::string config_path;
  std::string image_id = "synth";
  std::uint64_t seed = 1;
};

int run_synth(const SynthArgs& args) {
  SceneSpec spec;
  if (!args.config_path.empty()) {
    const KeyValueConfig file = load_key_value_config(args.config_path);
    file.require_known_keys(kSceneKeys);
    apply_scene_config(spec, file);
  }
  const Scene scene = generate_scene(spec);
  const std::vector<Detection> dets =
      simulate_detections(scene.boxes, spec, args.seed);

  GroundTruth gt;
  gt[args.image_id] = scene.boxes;
  write_ground_truth(args.gt_path, gt);
  DetectionSet det_set;
  det_set[args.image_id] = dets;
  write_detections(args.det_path, det_set);
  std::printf(
      "scene %dx%d (%.0fx%.0f px): %zu objects, %zu detections (seed %llu)\n",
      spec.rows, spec.cols, scene.image_w, scene.image_h, scene.boxes.size(),
      dets.size(), static_cast<unsigned long long>(args.seed));
  return kExitOk;
}

struct BenchArgs {
  std::string config_path;
  std::uint64_t seed = 1;
  int repeat = 3;
};

int run_bench(const BenchArgs& args) {
  // Bench default scene: denser duplicates and mild jitter, landing near
  // 2000 detections over 144 objects.
  SceneSpec spec;
  spec.duplicates_min = 10;
  spec.duplicates_max = 18;
  spec.center_jitter_frac = 0.05;
  spec.dim_jitter_frac = 0.05;
  MergeConfig cfg;
  if (!args.config_path.empty()) {
    const KeyValueConfig file = load_key_value_config(args.config_path);
    std::vector<std::string> allowed = kSceneKeys;
    allowed.insert(allowed.end(), kMergeKeys.begin(), kMergeKeys.end());
    file.require_known_keys(allowed);
    apply_scene_config(spec, file);
    apply_merge_config(cfg, file);
  }
  if (args.repeat < 1) throw DataError("bench repeat must be >= 1");

  const Scene scene = generate_scene(spec);
  const std::vector<Detection> dets =
      simulate_detections(scene.boxes, spec, args.seed);

  std::vector<ScoredBox> merged;
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < args.repeat; ++r) {
    merged = merge(dets, scene.image_w, scene.image_h, cfg);
  }
  const auto stop = std::chrono::steady_clock::now();
  const double seconds =
      std::chrono::duration<double>(stop - start).count() /
      static_cast<double>(args.repeat);
  const double dps =
      seconds > 0.0 ? static_cast<double>(dets.size()) / seconds : 0.0;

  std::printf("detections=%zu\n", dets.size());
  std::printf("objects=%zu\n", scene.boxes.size());
  std::printf("merged=%zu\n", merged.size());
  std::printf("seconds_per_merge=%.6f\n", seconds);
  std::printf("detections_per_second=%.1f\n", dps);
  return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"Box-merging toolkit for densely packed detection scenes"};
  app.name("densebox");
  app.require_subcommand(1);

  MergeArgs merge_args;
  CLI::App* merge_cmd = app.add_subcommand(
      "merge", "Cluster duplicate detections into one box per object");
  merge_cmd->add_option("--input", merge_args.input, "Detection CSV")
      ->required();
  merge_cmd->add_option("--output", merge_args.output, "Merged CSV")
      ->required();
  merge_cmd->add_option("--width", merge_args.width,
                        "Image width for every image (px)");
  merge_cmd->add_option("--height", merge_args.height,
                        "Image height for every image (px)");
  merge_cmd->add_option("--dims", merge_args.dims_path,
                        "Per-image dimension CSV (image_id,width,height)");
  merge_cmd->add_option("--config", merge_args.config_path,
                        "key = value config file");
  merge_cmd->add_option("--score-source", merge_args.flags.score_source,
                        "Mixture weight source: soft_iou | objectness");
  merge_cmd->add_option("--suppression-iou", merge_args.flags.suppression_iou,
                        "Max pairwise overlap between merged boxes");
  merge_cmd->add_option("--objectness-floor",
                        merge_args.flags.objectness_floor,
                        "Drop detections with objectness <= floor");
  merge_cmd->add_option("--max-iter", merge_args.flags.max_iter,
                        "Iteration cap for the mixture reduction");
  merge_cmd->add_option("--epsilon", merge_args.flags.epsilon,
                        "Objective threshold for early stopping");
  merge_cmd->add_option("--k", merge_args.flags.k,
                        "Override the per-image cluster count");
  merge_cmd->add_option("--workers", merge_args.workers,
                        "Worker threads across images");

  NmsArgs nms_args;
  CLI::App* nms_cmd = app.add_subcommand(
      "nms", "Greedy non-maximum suppression baseline");
  nms_cmd->add_option("--input", nms_args.input, "Detection CSV")->required();
  nms_cmd->add_option("--output", nms_args.output, "Kept detection CSV")
      ->required();
  nms_cmd->add_option("--iou-thresh", nms_args.iou_thresh,
                      "Suppress overlaps above this IoU");
  nms_cmd->add_option("--score-source", nms_args.score_source,
                      "Ranking score: soft_iou | objectness");
  nms_cmd->add_option("--workers", nms_args.workers,
                      "Worker threads across images");

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand(
      "eval", "Score predictions against ground truth");
  eval_cmd->add_option("--pred", eval_args.pred_path, "Prediction CSV")
      ->required();
  eval_cmd->add_option("--gt", eval_args.gt_path, "Ground-truth CSV")
      ->required();

  SynthArgs synth_args;
  CLI::App* synth_cmd = app.add_subcommand(
      "synth", "Generate a synthetic scene and its noisy detections");
  synth_cmd->add_option("--out-gt", synth_args.gt_path, "Ground-truth CSV")
      ->required();
  synth_cmd->add_option("--out-det", synth_args.det_path, "Detection CSV")
      ->required();
  synth_cmd->add_option("--config", synth_args.config_path,
                        "key = value scene config");
  synth_cmd->add_option("--seed", synth_args.seed, "Random seed");
  synth_cmd->add_option("--image-id", synth_args.image_id,
                        "Image id used in the output files");

  BenchArgs bench_args;
  CLI::App* bench_cmd = app.add_subcommand(
      "bench", "Time the merger on a synthetic scene");
  bench_cmd->add_option("--config", bench_args.config_path,
                        "key = value scene/merge config");
  bench_cmd->add_option("--seed", bench_args.seed, "Random seed");
  bench_cmd->add_option("--repeat", bench_args.repeat,
                        "Number of timed merge runs");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (merge_cmd->parsed()) {
      if (merge_args.dims_path.empty() &&
          (!merge_args.width || !merge_args.height)) {
        std::fprintf(stderr,
                     "merge needs either --dims or both --width/--height\n");
        return kExitUsage;
      }
      if (merge_args.width && !(*merge_args.width > 0.0)) {
        std::fprintf(stderr, "--width must be positive\n");
        return kExitUsage;
      }
      if (merge_args.height && !(*merge_args.height > 0.0)) {
        std::fprintf(stderr, "--height must be positive\n");
        return kExitUsage;
      }
      return run_merge(merge_args);
    }
    if (nms_cmd->parsed()) return run_nms(nms_args);
    if (eval_cmd->parsed()) return run_eval(eval_args);
    if (synth_cmd->parsed()) return run_synth(synth_args);
    if (bench_cmd->parsed()) return run_bench(bench_args);
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace densebox
