#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "densebox/baselines.hpp"
#include "densebox/rng.hpp"
#include "test_util.hpp"

using namespace densebox;

namespace {

// Naive quadratic reference: mark each detection suppressed if any
// higher-ranked unsuppressed detection overlaps it beyond the threshold.
std::vector<Detection> naive_nms(const std::vector<Detection>& dets,
                                 double threshold, ScoreSource source) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return selected_score(dets[a], source) >
                            selected_score(dets[b], source);
                   });
  std::vector<char> suppressed(dets.size(), 0);
  for (std::size_t a = 0; a < order.size(); ++a) {
    if (suppressed[order[a]]) continue;
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      if (suppressed[order[b]]) continue;
      if (iou(dets[order[a]].box, dets[order[b]].box) > threshold) {
        suppressed[order[b]] = 1;
      }
    }
  }
  std::vector<Detection> kept;
  for (const std::size_t id : order) {
    if (!suppressed[id]) kept.push_back(dets[id]);
  }
  return kept;
}

bool same_detections(const std::vector<Detection>& a,
                     const std::vector<Detection>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].box.cx != b[i].box.cx || a[i].box.cy != b[i].box.cy ||
        a[i].box.w != b[i].box.w || a[i].box.h != b[i].box.h ||
        a[i].objectness != b[i].objectness || a[i].soft_iou != b[i].soft_iou) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("dimension_stats computes population moments") {
  const std::vector<Box> boxes = {{0, 0, 10, 20}, {0, 0, 20, 40}};
  const DimStats s = dimension_stats(boxes);
  CHECK(s.mean_w == doctest::Approx(15.0));
  CHECK(s.mean_h == doctest::Approx(30.0));
  CHECK(s.std_w == doctest::Approx(5.0));
  CHECK(s.std_h == doctest::Approx(10.0));
  CHECK_THROWS_AS(dimension_stats(std::vector<Box>{}), std::invalid_argument);
}

TEST_CASE("greedy_nms keeps a single detection") {
  const std::vector<Detection> one = {{{5, 5, 10, 10}, 0.9, 0.9}};
  const std::vector<Detection> kept = greedy_nms(one, 0.5);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].objectness == 0.9);
}

TEST_CASE("greedy_nms suppresses the lower-scored duplicate") {
  const std::vector<Detection> dets = {{{5, 5, 10, 10}, 0.8, 0.8},
                                       {{5, 5, 10, 10}, 0.9, 0.9}};
  const std::vector<Detection> kept = greedy_nms(dets, 0.5);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].objectness == 0.9);
}

TEST_CASE("greedy_nms worked example keeps non-overlapping survivors") {
  // B overlaps A at IoU 2/3 and falls; C is disjoint and survives.
  const std::vector<Detection> dets = {
      {{5, 5, 10, 10}, 0.9, 0.9},   // A
      {{7, 5, 10, 10}, 0.8, 0.8},   // B, IoU(A,B) = 8*10 / (200-80) = 2/3
      {{25, 5, 10, 10}, 0.7, 0.7},  // C
  };
  const std::vector<Detection> kept = greedy_nms(dets, 0.5);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].objectness == 0.9);
  CHECK(kept[1].objectness == 0.7);
}

TEST_CASE("greedy_nms tie-break keeps the earliest input index") {
  const std::vector<Detection> dets = {{{5, 5, 10, 10}, 0.8, 0.3},
                                       {{6, 5, 10, 10}, 0.8, 0.9}};
  const std::vector<Detection> kept = greedy_nms(dets, 0.5);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].soft_iou == 0.3);
}

TEST_CASE("greedy_nms ranks by the selected score source") {
  const std::vector<Detection> dets = {{{5, 5, 10, 10}, 0.9, 0.2},
                                       {{5, 5, 10, 10}, 0.5, 0.8}};
  const std::vector<Detection> by_obj =
      greedy_nms(dets, 0.5, ScoreSource::kObjectness);
  REQUIRE(by_obj.size() == 1);
  CHECK(by_obj[0].objectness == 0.9);
  const std::vector<Detection> by_siou =
      greedy_nms(dets, 0.5, ScoreSource::kSoftIou);
  REQUIRE(by_siou.size() == 1);
  CHECK(by_siou[0].soft_iou == 0.8);
}

TEST_CASE("greedy_nms threshold extremes") {
  Rng rng(19);
  std::vector<Detection> dets;
  for (int i = 0; i < 40; ++i) {
    dets.push_back(testutil::random_detection(rng, 60.0));
  }
  CHECK(greedy_nms(dets, 1.0).size() == dets.size());
  const std::vector<Detection> disjoint = greedy_nms(dets, 0.0);
  for (std::size_t a = 0; a < disjoint.size(); ++a) {
    for (std::size_t b = a + 1; b < disjoint.size(); ++b) {
      CHECK(iou(disjoint[a].box, disjoint[b].box) == 0.0);
    }
  }
}

TEST_CASE("greedy_nms matches the naive quadratic reference") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Detection> dets;
    const int n = 1 + static_cast<int>(rng.uniform() * 50);
    for (int i = 0; i < n; ++i) {
      dets.push_back(testutil::random_detection(rng, 80.0));
    }
    for (const double threshold : {0.3, 0.5, 0.7}) {
      CHECK(same_detections(greedy_nms(dets, threshold),
                            naive_nms(dets, threshold,
                                      ScoreSource::kObjectness)));
    }
  }
}

TEST_CASE("greedy_nms survivors are a subset with bounded pairwise overlap") {
  Rng rng(29);
  std::vector<Detection> dets;
  for (int i = 0; i < 60; ++i) {
    dets.push_back(testutil::random_detection(rng, 50.0));
  }
  const double threshold = 0.4;
  const std::vector<Detection> kept = greedy_nms(dets, threshold);
  for (const Detection& k : kept) {
    bool present = false;
    for (const Detection& d : dets) {
      if (d.box.cx == k.box.cx && d.box.cy == k.box.cy &&
          d.objectness == k.objectness) {
        present = true;
      }
    }
    CHECK(present);
  }
  for (std::size_t a = 0; a < kept.size(); ++a) {
    for (std::size_t b = a + 1; b < kept.size(); ++b) {
      CHECK(iou(kept[a].box, kept[b].box) <= threshold);
    }
  }
}

TEST_CASE("monkey respects count, bounds, and the seed") {
  const DimStats stats{20, 5, 30, 8};
  CHECK(monkey(0, stats, 200, 200, 5).empty());

  const std::vector<Box> a = monkey(50, stats, 200, 150, 42);
  const std::vector<Box> b = monkey(50, stats, 200, 150, 42);
  const std::vector<Box> c = monkey(50, stats, 200, 150, 43);
  REQUIRE(a.size() == 50);
  bool identical = true;
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    identical = identical && a[i].cx == b[i].cx && a[i].w == b[i].w;
    differs = differs || a[i].cx != c[i].cx || a[i].w != c[i].w;
  }
  CHECK(identical);
  CHECK(differs);

  for (const Box& box : a) {
    const Corners corners = to_corners(box);
    CHECK(corners.x1 >= 0.0);
    CHECK(corners.y1 >= 0.0);
    CHECK(corners.x2 <= 200.0 + 1e-9);
    CHECK(corners.y2 <= 150.0 + 1e-9);
    CHECK(box.w > 0.0);
    CHECK(box.h > 0.0);
  }
}

TEST_CASE("monkey clamps impossible dimension draws") {
  // Mean far above the image edge forces the rejection cap, after which
  // dimensions clamp into [1, image dim].
  const DimStats stats{500, 1, 500, 1};
  const std::vector<Box> boxes = monkey(10, stats, 50, 50, 7);
  for (const Box& b : boxes) {
    CHECK(b.w >= 1.0);
    CHECK(b.w <= 50.0);
    CHECK(b.h >= 1.0);
    CHECK(b.h <= 50.0);
    const Corners c = to_corners(b);
    CHECK(c.x1 >= 0.0);
    CHECK(c.x2 <= 50.0 + 1e-9);
  }
}

TEST_CASE("monkey with zero sigma produces constant dimensions") {
  const DimStats stats{20, 0, 10, 0};
  for (const Box& b : monkey(20, stats, 100, 100, 11)) {
    CHECK(b.w == doctest::Approx(20.0));
    CHECK(b.h == doctest::Approx(10.0));
  }
}

TEST_CASE("monkey rejects invalid parameters") {
  const DimStats good{20, 5, 20, 5};
  CHECK_THROWS_AS(monkey(-1, good, 100, 100, 1), std::invalid_argument);
  CHECK_THROWS_AS(monkey(5, {0, 1, 20, 1}, 100, 100, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(monkey(5, good, 0, 100, 1), std::invalid_argument);
}

}  // TEST_SUITE
