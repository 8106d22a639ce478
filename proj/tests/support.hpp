#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "pupillo/geometry.hpp"
#include "pupillo/rng.hpp"

namespace testing {

inline double angle_diff_deg(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 180.0);
  return std::min(d, 180.0 - d);
}

// Boundary points from the parametric form, written out independently of
// the library: major axis along (cos t, -sin t) in pixel coordinates.
inline std::vector<pupillo::Point2> parametric_points(double xc, double yc, double a,
                                                      double b, double theta_deg,
                                                      int count) {
  const double t = theta_deg * std::numbers::pi / 180.0;
  const pupillo::Point2 u(std::cos(t), -std::sin(t));
  const pupillo::Point2 v(std::sin(t), std::cos(t));
  std::vector<pupillo::Point2> pts;
  for (int k = 0; k < count; ++k) {
    const double phi = 2.0 * std::numbers::pi * k / count;
    pts.push_back(pupillo::Point2(xc, yc) + a * std::cos(phi) * u + b * std::sin(phi) * v);
  }
  return pts;
}

// Random ellipse fully inside a size x size image with a 2 px margin:
// b ~ U[bmin, bmax], b/a ~ U[0.5, 1], theta ~ U[0, 180).
inline pupillo::Ellipse random_interior_ellipse(pupillo::Rng& rng, int width, int height,
                                                double bmin, double bmax) {
  for (;;) {
    const double b = rng.uniform(bmin, bmax);
    const double a = b / rng.uniform(0.5, 1.0);
    const double theta = rng.uniform(0.0, 180.0);
    const double t = theta * std::numbers::pi / 180.0;
    // Half extents of the rotated ellipse's bounding box.
    const double hx = std::sqrt(a * a * std::cos(t) * std::cos(t) + b * b * std::sin(t) * std::sin(t));
    const double hy = std::sqrt(a * a * std::sin(t) * std::sin(t) + b * b * std::cos(t) * std::cos(t));
    const double margin = 2.0;
    if (2 * (hx + margin) >= width || 2 * (hy + margin) >= height) continue;
    const double xc = rng.uniform(hx + margin, width - hx - margin);
    const double yc = rng.uniform(hy + margin, height - hy - margin);
    return pupillo::Ellipse::canonical(xc, yc, a, b, theta);
  }
}

}  // namespace testing
