#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>
#include <opencv2/core.hpp>

namespace pupillo {

// Image coordinates are continuous with the origin at the top-left pixel
// corner: pixel (col i, row j) covers [i, i+1) x [j, j+1) and its centre is
// (i + 0.5, j + 0.5). x grows right, y grows down.

using Point2 = Eigen::Vector2d;

/// Wraps an angle in degrees into [0, 180).
double canonical_angle(double degrees);

/// Pupil boundary (xc, yc, a, b, theta). a and b are semi-axes in pixels,
/// theta is the major-axis angle in degrees measured counterclockwise from
/// the horizontal as seen on screen. Invariants: a >= b > 0,
/// theta in [0, 180), theta == 0 for circles.
struct Ellipse {
  double xc = 0.0;
  double yc = 0.0;
  double a = 1.0;
  double b = 1.0;
  double theta_deg = 0.0;

  /// Builds a canonical ellipse: swaps axes (rotating by 90 degrees) when
  /// b > a and wraps the angle. Throws InvariantViolation for non-positive or
  /// non-finite values.
  static Ellipse canonical(double xc, double yc, double a, double b,
                           double theta_deg);

  /// Like canonical() but reports minor > major as InvariantViolation instead
  /// of repairing it.
  static Ellipse checked(double xc, double yc, double a, double b,
                         double theta_deg);

  /// Unit vector along the major axis in pixel coordinates (y down).
  Point2 major_direction() const;
  bool contains(const Point2& p) const;

  friend bool operator==(const Ellipse&, const Ellipse&) = default;
};

/// Regression target: centre divided by the image width/height, full axes
/// divided by the image width, angle divided by 180.
struct NormalizedEllipse {
  double nxc = 0.5;
  double nyc = 0.5;
  double nd_major = 0.5;
  double nd_minor = 0.5;
  double ntheta = 0.0;

  std::array<double, 5> values() const {
    return {nxc, nyc, nd_major, nd_minor, ntheta};
  }
  static NormalizedEllipse from_values(std::span<const double, 5> v) {
    return {v[0], v[1], v[2], v[3], v[4]};
  }
};

/// p' = m p + t, acting on continuous image coordinates.
struct AffineTransform2D {
  Eigen::Matrix2d m = Eigen::Matrix2d::Identity();
  Eigen::Vector2d t = Eigen::Vector2d::Zero();

  Point2 apply(const Point2& p) const { return m * p + t; }
  double det() const { return m.determinant(); }
  AffineTransform2D inverse() const;
  Eigen::Matrix3d homogeneous() const;

  static AffineTransform2D identity() { return {}; }
  static AffineTransform2D scale(double sx, double sy);
  static AffineTransform2D translation(double tx, double ty);
  /// Rotation by `degrees` counterclockwise on screen about `center`.
  static AffineTransform2D rotation(double degrees, const Point2& center);
  /// Maps a width x height image onto out_width x out_height (resize).
  static AffineTransform2D resize(int width, int height, int out_width,
                                  int out_height);
  static AffineTransform2D horizontal_flip(int width);
  static AffineTransform2D vertical_flip(int height);
  /// Lossless quarter turns counterclockwise on screen for a width x height
  /// image; the output image is height x width for 90 and 270.
  static AffineTransform2D rotate90(int width, int height);
  static AffineTransform2D rotate180(int width, int height);
  static AffineTransform2D rotate270(int width, int height);
};

/// second ∘ first (apply `first`, then `second`).
AffineTransform2D compose(const AffineTransform2D& second,
                          const AffineTransform2D& first);

/// Symmetric 3x3 conic matrix C with [x y 1] C [x y 1]^T = 0 on the boundary
/// and negative inside.
Eigen::Matrix3d to_conic(const Ellipse& e);

/// Extracts the quintuple from an ellipse conic. Throws DegenerateInput when
/// the conic is not a real ellipse.
Ellipse from_conic(const Eigen::Matrix3d& conic);

/// Direct least-squares ellipse fit (ellipse-specific constraint 4AC - B^2 =
/// 1), solved with the numerically stable block decomposition on centred and
/// scaled points. Throws DegenerateInput for fewer than 6 points, collinear
/// points or when no eigenvector satisfies the constraint.
Ellipse fit_ellipse_lsq(std::span<const Point2> points);

struct FitFilter {
  double min_solidity = 0.5;
  double min_aspect = 0.5;
};

/// Two-step baseline: largest 8-connected foreground component, its boundary
/// (pixel-edge midpoints), direct least-squares fit, then the solidity /
/// aspect outlier filter. Throws EmptyMask, RejectedBySolidity,
/// RejectedByAspect (carrying the offending value) or DegenerateInput.
Ellipse mask_to_ellipse(const cv::Mat& mask, const FitFilter& filter = {});

/// Foreground area of the largest component over the area of its convex
/// hull, both counted in pixels. Throws EmptyMask.
double solidity(const cv::Mat& mask);

NormalizedEllipse normalize_params(const Ellipse& e, int width, int height);

/// Exact inverse of normalize_params. Throws InvariantViolation if the
/// normalized minor axis exceeds the major axis.
Ellipse denormalize_params(const NormalizedEllipse& n, int width);

/// Lenient variant for raw network output: clamps into the valid ranges and
/// repairs minor > major by swapping axes and rotating 90 degrees.
Ellipse denormalize_prediction(const NormalizedEllipse& n, int width);

/// Exact image of `e` under `t` via C' = T^-T C T^-1. Throws
/// SingularTransform when det(m) == 0.
Ellipse transform_ellipse(const Ellipse& e, const AffineTransform2D& t);

/// PD = a + b.
inline double pupil_diameter(const Ellipse& e) { return e.a + e.b; }

/// `count` points evenly spaced in the parametric angle.
std::vector<Point2> sample_boundary(const Ellipse& e, int count);

void to_json(nlohmann::json& j, const Ellipse& e);
void from_json(const nlohmann::json& j, Ellipse& e);
void to_json(nlohmann::json& j, const NormalizedEllipse& n);

}  // namespace pupillo
