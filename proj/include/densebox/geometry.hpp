#pragma once

namespace densebox {

// Axis-aligned box in center form: (cx, cy) is the box center, w and h the
// full extents in pixels. Corner form only appears at I/O boundaries.
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
};

struct Corners {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
};

// A box paired with a confidence in [0, 1], the unit the merger emits and
// the evaluator ranks by.
struct ScoredBox {
  Box box;
  double confidence = 0.0;
};

// Finite values with strictly positive extents.
bool is_valid(const Box& b);

Corners to_corners(const Box& b);

// Throws std::invalid_argument when the corners are degenerate
// (x1 >= x2 or y1 >= y2) or not finite.
Box from_corners(const Corners& c);

double area(const Box& b);

double intersection_area(const Box& a, const Box& b);

// Intersection over union on continuous areas. Returns 0 for disjoint
// boxes, 1 for identical ones, and is symmetric in its arguments.
double iou(const Box& a, const Box& b);

}  // namespace densebox
