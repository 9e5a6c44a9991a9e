#include "densebox/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace densebox {

bool is_valid(const Box& b) {
  return std::isfinite(b.cx) && std::isfinite(b.cy) && std::isfinite(b.w) &&
         std::isfinite(b.h) && b.w > 0.0 && b.h > 0.0;
}

Corners to_corners(const Box& b) {
  return {b.cx - 0.5 * b.w, b.cy - 0.5 * b.h, b.cx + 0.5 * b.w,
          b.cy + 0.5 * b.h};
}

Box from_corners(const Corners& c) {
  if (!std::isfinite(c.x1) || !std::isfinite(c.y1) || !std::isfinite(c.x2) ||
      !std::isfinite(c.y2)) {
    throw std::invalid_argument("box corners must be finite");
  }
  if (c.x1 >= c.x2 || c.y1 >= c.y2) {
    throw std::invalid_argument("degenerate box: need x1 < x2 and y1 < y2");
  }
  return {0.5 * (c.x1 + c.x2), 0.5 * (c.y1 + c.y2), c.x2 - c.x1, c.y2 - c.y1};
}

double area(const Box& b) { return b.w * b.h; }

double intersection_area(const Box& a, const Box& b) {
  const double ix = std::min(a.cx + 0.5 * a.w, b.cx + 0.5 * b.w) -
                    std::max(a.cx - 0.5 * a.w, b.cx - 0.5 * b.w);
  if (ix <= 0.0) return 0.0;
  const double iy = std::min(a.cy + 0.5 * a.h, b.cy + 0.5 * b.h) -
                    std::max(a.cy - 0.5 * a.h, b.cy - 0.5 * b.h);
  if (iy <= 0.0) return 0.0;
  return ix * iy;
}

double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = area(a) + area(b) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace densebox
