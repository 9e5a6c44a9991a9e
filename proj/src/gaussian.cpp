#include "densebox/gaussian.hpp"

#include <algorithm>
#include <cmath>

namespace densebox {

namespace {

double floored(double var) { return std::max(var, kVarianceFloor); }

// One axis of the diagonal KL divergence.
double kl_axis(double mean_f, double var_f, double mean_g, double var_g) {
  var_f = floored(var_f);
  var_g = floored(var_g);
  const double d = mean_g - mean_f;
  return 0.5 * (var_f / var_g + d * d / var_g - 1.0 + std::log(var_g / var_f));
}

}  // namespace

BoxGaussian box_to_gaussian(const Box& b) {
  const double sx = 0.25 * b.w;
  const double sy = 0.25 * b.h;
  return {b.cx, b.cy, floored(sx * sx), floored(sy * sy)};
}

Box gaussian_to_box(const BoxGaussian& g) {
  return {g.mean_x, g.mean_y, 4.0 * std::sqrt(floored(g.var_x)),
          4.0 * std::sqrt(floored(g.var_y))};
}

double kl_divergence(const BoxGaussian& f, const BoxGaussian& g) {
  return kl_axis(f.mean_x, f.var_x, g.mean_x, g.var_x) +
         kl_axis(f.mean_y, f.var_y, g.mean_y, g.var_y);
}

double mahalanobis_sq(const BoxGaussian& g, double px, double py) {
  const double dx = px - g.mean_x;
  const double dy = py - g.mean_y;
  return dx * dx / floored(g.var_x) + dy * dy / floored(g.var_y);
}

}  // namespace densebox
