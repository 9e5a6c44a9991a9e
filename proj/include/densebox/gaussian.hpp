#pragma once

#include "densebox/geometry.hpp"

namespace densebox {

// Variances are clamped to this floor (in px^2) before any division so
// degenerate boxes cannot blow up KL or Mahalanobis terms.
inline constexpr double kVarianceFloor = 1e-6;

// 2D Gaussian with diagonal covariance, the spatial footprint of one
// detection box: mean at the box center, one standard deviation equal to a
// quarter dimension per axis (so the 2-sigma ellipse spans the box).
struct BoxGaussian {
  double mean_x = 0.0;
  double mean_y = 0.0;
  double var_x = 0.0;
  double var_y = 0.0;
};

BoxGaussian box_to_gaussian(const Box& b);

// Inverse of box_to_gaussian up to the variance floor: w = 4*sqrt(var_x),
// h = 4*sqrt(var_y).
Box gaussian_to_box(const BoxGaussian& g);

// KL(f || g) in closed form for diagonal Gaussians. Nonnegative, zero iff
// the parameters match, and not symmetric.
double kl_divergence(const BoxGaussian& f, const BoxGaussian& g);

// Squared Mahalanobis distance of point (px, py) under g; values <= 4 lie
// inside the 2-sigma ellipse.
double mahalanobis_sq(const BoxGaussian& g, double px, double py);

}  // namespace densebox
