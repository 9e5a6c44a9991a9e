#include "densebox/em_merger.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <unordered_map>

namespace densebox {

namespace {

// Weighted moment match of two components; total weight is wa + wb. A
// zero-weight pair averages evenly so weightless components still merge.
BoxGaussian merge_pair(const BoxGaussian& a, double wa, const BoxGaussian& b,
                       double wb) {
  const double total = wa + wb;
  const double la = total > 0.0 ? wa / total : 0.5;
  const double lb = 1.0 - la;
  BoxGaussian m;
  m.mean_x = la * a.mean_x + lb * b.mean_x;
  m.mean_y = la * a.mean_y + lb * b.mean_y;
  const double dax = a.mean_x - m.mean_x;
  const double dbx = b.mean_x - m.mean_x;
  const double day = a.mean_y - m.mean_y;
  const double dby = b.mean_y - m.mean_y;
  m.var_x = la * (a.var_x + dax * dax) + lb * (b.var_x + dbx * dbx);
  m.var_y = la * (a.var_y + day * day) + lb * (b.var_y + dby * dby);
  return m;
}

double symmetric_kl(const BoxGaussian& a, const BoxGaussian& b) {
  return kl_divergence(a, b) + kl_divergence(b, a);
}

struct PairCandidate {
  double cost;
  int a;
  int b;
};

struct PairCandidateGreater {
  bool operator()(const PairCandidate& x, const PairCandidate& y) const {
    if (x.cost != y.cost) return x.cost > y.cost;
    if (x.a != y.a) return x.a > y.a;
    return x.b > y.b;
  }
};

using PairHeap = std::priority_queue<PairCandidate, std::vector<PairCandidate>,
                                     PairCandidateGreater>;

// Uniform grid over cluster means. Cells hold cluster ids; stale ids from
// merged-away clusters stay behind and are skipped by the caller's alive
// check. Lookups never iterate the map itself, so results do not depend on
// hash order.
class ClusterGrid {
 public:
  ClusterGrid(double cell_w, double cell_h) : cell_w_(cell_w), cell_h_(cell_h) {}

  void insert(int id, double x, double y) {
    cells_[key(cell_x(x), cell_y(y))].push_back(id);
  }

  // Ids in the 3x3 cell block around (x, y), in deterministic cell order.
  void neighbors(double x, double y, std::vector<int>& out) const {
    out.clear();
    const std::int64_t ix = cell_x(x);
    const std::int64_t iy = cell_y(y);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        const auto it = cells_.find(key(ix + dx, iy + dy));
        if (it == cells_.end()) continue;
        out.insert(out.end(), it->second.begin(), it->second.end());
      }
    }
  }

 private:
  std::int64_t cell_x(double x) const {
    return static_cast<std::int64_t>(std::floor(x / cell_w_));
  }
  std::int64_t cell_y(double y) const {
    return static_cast<std::int64_t>(std::floor(y / cell_h_));
  }
  static std::int64_t key(std::int64_t ix, std::int64_t iy) {
    return (ix << 32) ^ (iy & 0xffffffff);
  }

  double cell_w_;
  double cell_h_;
  std::unordered_map<std::int64_t, std::vector<int>> cells_;
};

// Shared M-step body. When remap is non-null it receives, for every input
// cluster index, the output index or -1 for dropped (zero-weight) clusters.
Mixture m_step_impl(const Mixture& f, const Assignment& assignment,
                    int cluster_count, std::vector<int>* remap) {
  const std::size_t n = f.size();
  if (assignment.size() != n) {
    throw std::invalid_argument("assignment length must match mixture size");
  }
  if (cluster_count < 0) {
    throw std::invalid_argument("cluster_count must be nonnegative");
  }
  std::vector<double> beta(cluster_count, 0.0);
  std::vector<double> mean_x(cluster_count, 0.0);
  std::vector<double> mean_y(cluster_count, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const int j = assignment[i];
    if (j < 0 || j >= cluster_count) {
      throw std::invalid_argument("assignment index out of range");
    }
    const double w = f.weights[i];
    beta[j] += w;
    mean_x[j] += w * f.components[i].mean_x;
    mean_y[j] += w * f.components[i].mean_y;
  }
  for (int j = 0; j < cluster_count; ++j) {
    if (beta[j] > 0.0) {
      mean_x[j] /= beta[j];
      mean_y[j] /= beta[j];
    }
  }
  // Second pass: weighted spread around the new means, diagonal only.
  std::vector<double> var_x(cluster_count, 0.0);
  std::vector<double> var_y(cluster_count, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const int j = assignment[i];
    const double w = f.weights[i];
    if (w <= 0.0 || beta[j] <= 0.0) continue;
    const double dx = f.components[i].mean_x - mean_x[j];
    const double dy = f.components[i].mean_y - mean_y[j];
    var_x[j] += w * (f.components[i].var_x + dx * dx);
    var_y[j] += w * (f.components[i].var_y + dy * dy);
  }
  Mixture out;
  if (remap) remap->assign(cluster_count, -1);
  for (int j = 0; j < cluster_count; ++j) {
    if (beta[j] <= 0.0) continue;  // empty cluster, dropped
    if (remap) (*remap)[j] = static_cast<int>(out.size());
    out.components.push_back(
        {mean_x[j], mean_y[j], var_x[j] / beta[j], var_y[j] / beta[j]});
    out.weights.push_back(beta[j]);
  }
  return out;
}

}  // namespace

double selected_score(const Detection& d, ScoreSource source) {
  return source == ScoreSource::kSoftIou ? d.soft_iou : d.objectness;
}

std::vector<Detection> apply_objectness_floor(std::span<const Detection> dets,
                                              double floor) {
  std::vector<Detection> kept;
  kept.reserve(dets.size());
  for (const Detection& d : dets) {
    if (d.objectness > floor) kept.push_back(d);
  }
  return kept;
}

Mixture build_mixture(std::span<const Detection> dets,
                      const MergeConfig& config) {
  const std::vector<Detection> kept =
      apply_objectness_floor(dets, config.objectness_floor);
  double total = 0.0;
  for (const Detection& d : kept) total += selected_score(d, config.score_source);
  Mixture f;
  if (total <= 0.0) return f;
  f.components.reserve(kept.size());
  f.weights.reserve(kept.size());
  for (const Detection& d : kept) {
    f.components.push_back(box_to_gaussian(d.box));
    f.weights.push_back(selected_score(d, config.score_source) / total);
  }
  return f;
}

int estimate_k(double image_w, double image_h,
               std::span<const Detection> dets) {
  if (dets.empty()) {
    throw std::invalid_argument("estimate_k needs at least one detection");
  }
  if (!(image_w > 0.0) || !(image_h > 0.0)) {
    throw std::invalid_argument("image dimensions must be positive");
  }
  double mean_w = 0.0;
  double mean_h = 0.0;
  for (const Detection& d : dets) {
    mean_w += d.box.w;
    mean_h += d.box.h;
  }
  mean_w /= static_cast<double>(dets.size());
  mean_h /= static_cast<double>(dets.size());
  const int n = static_cast<int>(dets.size());
  if (mean_w <= 0.0 || mean_h <= 0.0) return 1;
  const double raw = std::floor(image_w * image_h / (mean_w * mean_h));
  const int k = raw >= static_cast<double>(n) ? n : static_cast<int>(raw);
  return std::clamp(k, 1, n);
}

Mixture init_clusters(const Mixture& f, int k) {
  const int n = static_cast<int>(f.size());
  if (n == 0) return {};
  if (f.weights.size() != f.components.size()) {
    throw std::invalid_argument("mixture weights/components length mismatch");
  }
  k = std::clamp(k, 1, n);
  if (k == n) return f;

  std::vector<BoxGaussian> nodes = f.components;
  std::vector<double> node_w = f.weights;
  std::vector<char> alive(n, 1);
  int remaining = n;

  // Cell extent: the mean box footprint, so near-duplicates of one object
  // land in the same or adjacent cells.
  double cell_w = 0.0;
  double cell_h = 0.0;
  for (const BoxGaussian& g : f.components) {
    cell_w += 4.0 * std::sqrt(std::max(g.var_x, kVarianceFloor));
    cell_h += 4.0 * std::sqrt(std::max(g.var_y, kVarianceFloor));
  }
  cell_w = std::max(cell_w / n, 1e-3);
  cell_h = std::max(cell_h / n, 1e-3);

  ClusterGrid grid(cell_w, cell_h);
  for (int i = 0; i < n; ++i) {
    grid.insert(i, nodes[i].mean_x, nodes[i].mean_y);
  }

  PairHeap heap;
  std::vector<int> scratch;
  // Neighborhoods are symmetric, so seeding with j > i covers each local
  // pair exactly once.
  for (int i = 0; i < n; ++i) {
    grid.neighbors(nodes[i].mean_x, nodes[i].mean_y, scratch);
    for (int j : scratch) {
      if (j <= i) continue;
      heap.push({symmetric_kl(nodes[i], nodes[j]), i, j});
    }
  }

  auto merge_top = [&](PairHeap& h, bool use_grid) {
    while (remaining > k && !h.empty()) {
      const PairCandidate c = h.top();
      h.pop();
      if (!alive[c.a] || !alive[c.b]) continue;
      const int id = static_cast<int>(nodes.size());
      nodes.push_back(merge_pair(nodes[c.a], node_w[c.a], nodes[c.b],
                                 node_w[c.b]));
      node_w.push_back(node_w[c.a] + node_w[c.b]);
      alive[c.a] = 0;
      alive[c.b] = 0;
      alive.push_back(1);
      --remaining;
      if (use_grid) {
        grid.insert(id, nodes[id].mean_x, nodes[id].mean_y);
        grid.neighbors(nodes[id].mean_x, nodes[id].mean_y, scratch);
        for (int j : scratch) {
          if (j == id || !alive[j]) continue;
          heap.push({symmetric_kl(nodes[j], nodes[id]), std::min(j, id),
                     std::max(j, id)});
        }
      } else {
        for (int j = 0; j < id; ++j) {
          if (!alive[j]) continue;
          heap.push({symmetric_kl(nodes[j], nodes[id]), j, id});
        }
      }
    }
  };

  merge_top(heap, /*use_grid=*/true);

  if (remaining > k) {
    // Grid starved before reaching k (survivors too spread out). Finish
    // with an exact pairwise pass over what is left.
    heap = PairHeap();
    std::vector<int> ids;
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
      if (alive[i]) ids.push_back(i);
    }
    for (std::size_t p = 0; p < ids.size(); ++p) {
      for (std::size_t q = p + 1; q < ids.size(); ++q) {
        heap.push({symmetric_kl(nodes[ids[p]], nodes[ids[q]]), ids[p], ids[q]});
      }
    }
    merge_top(heap, /*use_grid=*/false);
  }

  Mixture out;
  out.components.reserve(k);
  out.weights.reserve(k);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!alive[i]) continue;
    out.components.push_back(nodes[i]);
    out.weights.push_back(node_w[i]);
  }
  return out;
}

Assignment e_step(const Mixture& f, const Mixture& g) {
  if (g.empty()) {
    throw std::invalid_argument("e_step needs a nonempty cluster mixture");
  }
  Assignment assignment(f.size(), 0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_j = 0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double d = kl_divergence(f.components[i], g.components[j]);
      if (d < best) {
        best = d;
        best_j = static_cast<int>(j);
      }
    }
    assignment[i] = best_j;
  }
  return assignment;
}

Mixture m_step(const Mixture& f, const Assignment& assignment,
               int cluster_count) {
  return m_step_impl(f, assignment, cluster_count, nullptr);
}

double objective(const Mixture& f, const Mixture& g) {
  if (g.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < g.size(); ++j) {
      best = std::min(best, kl_divergence(f.components[i], g.components[j]));
    }
    total += f.weights[i] * best;
  }
  return total;
}

EmResult em_reduce(const Mixture& f, int k, const MergeConfig& config) {
  EmResult result;
  const int n = static_cast<int>(f.size());
  if (n == 0) return result;
  k = std::clamp(k, 1, n);

  Mixture g = init_clusters(f, k);
  Assignment prev;
  std::vector<int> remap;
  result.stop = EmStop::kIterationCap;
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    Assignment current = e_step(f, g);
    if (!prev.empty() && current == prev) {
      result.stop = EmStop::kFixedPoint;
      break;
    }
    g = m_step_impl(f, current, static_cast<int>(g.size()), &remap);
    // Dropped clusters shift later indices; keep the assignment aligned
    // with the compacted mixture.
    for (int& j : current) j = remap[j];
    result.objective_trace.push_back(objective(f, g));
    prev = std::move(current);
    if (result.objective_trace.back() < config.epsilon_em) {
      result.stop = EmStop::kEpsilon;
      break;
    }
  }
  result.mixture = std::move(g);
  result.assignment = std::move(prev);
  return result;
}

Mixture suppress(const Mixture& g, double suppression_iou) {
  const std::size_t n = g.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return g.weights[a] > g.weights[b];
  });

  Mixture kept;
  std::vector<Box> kept_boxes;
  for (const std::size_t id : order) {
    const Box candidate = gaussian_to_box(g.components[id]);
    bool keep = true;
    for (const Box& other : kept_boxes) {
      if (iou(candidate, other) > suppression_iou) {
        keep = false;
        break;
      }
    }
    if (!keep) continue;
    kept_boxes.push_back(candidate);
    kept.components.push_back(g.components[id]);
    kept.weights.push_back(g.weights[id]);
  }

  double total = std::accumulate(kept.weights.begin(), kept.weights.end(), 0.0);
  if (total > 0.0) {
    for (double& w : kept.weights) w /= total;
  } else if (!kept.weights.empty()) {
    const double uniform = 1.0 / static_cast<double>(kept.weights.size());
    for (double& w : kept.weights) w = uniform;
  }
  return kept;
}

std::vector<ScoredBox> extract_boxes(const Mixture& g,
                                     std::span<const Detection> detections) {
  // Median with the even case averaged; the scratch vector is reused.
  std::vector<double> values;
  auto median = [&values]() {
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size();
    return m % 2 == 1 ? values[m / 2]
                      : 0.5 * (values[m / 2 - 1] + values[m / 2]);
  };

  std::vector<ScoredBox> out;
  out.reserve(g.size());
  std::vector<std::size_t> members;
  for (std::size_t j = 0; j < g.size(); ++j) {
    members.clear();
    for (std::size_t i = 0; i < detections.size(); ++i) {
      const Box& b = detections[i].box;
      if (mahalanobis_sq(g.components[j], b.cx, b.cy) <= 4.0) {
        members.push_back(i);
      }
    }
    if (members.empty()) {
      // No detection center inside the 2-sigma ellipse; fall back to the
      // cluster footprint itself.
      out.push_back({gaussian_to_box(g.components[j]), g.weights[j]});
      continue;
    }
    ScoredBox sb;
    sb.box.cx = g.components[j].mean_x;
    sb.box.cy = g.components[j].mean_y;
    values.clear();
    for (const std::size_t i : members) values.push_back(detections[i].box.w);
    sb.box.w = median();
    values.clear();
    for (const std::size_t i : members) values.push_back(detections[i].box.h);
    sb.box.h = median();
    double conf = 0.0;
    for (const std::size_t i : members) {
      conf = std::max(conf, detections[i].soft_iou);
    }
    sb.confidence = conf;
    out.push_back(sb);
  }
  return out;
}

std::vector<ScoredBox> merge(std::span<const Detection> detections,
                             double image_w, double image_h,
                             const MergeConfig& config) {
  const std::vector<Detection> kept =
      apply_objectness_floor(detections, config.objectness_floor);
  if (kept.empty()) return {};
  const Mixture f = build_mixture(kept, config);
  if (f.empty()) return {};
  const int n = static_cast<int>(f.size());
  const int k = config.k_override
                    ? std::clamp(*config.k_override, 1, n)
                    : estimate_k(image_w, image_h, kept);
  const EmResult em = em_reduce(f, k, config);
  const Mixture pruned = suppress(em.mixture, config.suppression_iou);
  return extract_boxes(pruned, kept);
}

}  // namespace densebox
