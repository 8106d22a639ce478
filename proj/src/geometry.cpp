#include "pupillo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <opencv2/imgproc.hpp>

#include "pupillo/error.hpp"
#include "pupillo/mask.hpp"

namespace pupillo {

namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::InvariantViolation,
                std::string("ellipse field ") + name + " is not finite");
  }
}

Ellipse make_ellipse(double xc, double yc, double a, double b, double theta,
                     bool repair_order) {
  require_finite(xc, "xc");
  require_finite(yc, "yc");
  require_finite(a, "a");
  require_finite(b, "b");
  require_finite(theta, "theta");
  if (a <= 0.0 || b <= 0.0) {
    throw Error(ErrorCode::InvariantViolation,
                "ellipse semi-axes must be positive", std::min(a, b));
  }
  if (b > a) {
    if (!repair_order) {
      throw Error(ErrorCode::InvariantViolation,
                  "minor axis exceeds major axis", b / a);
    }
    std::swap(a, b);
    theta += 90.0;
  }
  Ellipse e{xc, yc, a, b, canonical_angle(theta)};
  if (e.a == e.b) e.theta_deg = 0.0;
  return e;
}

}  // namespace

double canonical_angle(double degrees) {
  double t = std::fmod(degrees, 180.0);
  if (t < 0.0) t += 180.0;
  if (t >= 180.0) t -= 180.0;
  return t;
}

Ellipse Ellipse::canonical(double xc, double yc, double a, double b,
                           double theta_deg) {
  return make_ellipse(xc, yc, a, b, theta_deg, true);
}

Ellipse Ellipse::checked(double xc, double yc, double a, double b,
                         double theta_deg) {
  return make_ellipse(xc, yc, a, b, theta_deg, false);
}

Point2 Ellipse::major_direction() const {
  const double t = theta_deg / kDegPerRad;
  return {std::cos(t), -std::sin(t)};
}

bool Ellipse::contains(const Point2& p) const {
  const Point2 u = major_direction();
  const Point2 d = p - Point2(xc, yc);
  const double along = d.dot(u);
  const double across = d.x() * -u.y() + d.y() * u.x();
  return (along * along) / (a * a) + (across * across) / (b * b) <= 1.0;
}

// --- AffineTransform2D ------------------------------------------------------

AffineTransform2D AffineTransform2D::inverse() const {
  if (det() == 0.0 || !std::isfinite(det())) {
    throw Error(ErrorCode::SingularTransform, "transform is not invertible");
  }
  AffineTransform2D inv;
  inv.m = m.inverse();
  inv.t = -inv.m * t;
  return inv;
}

Eigen::Matrix3d AffineTransform2D::homogeneous() const {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
  h.topLeftCorner<2, 2>() = m;
  h.topRightCorner<2, 1>() = t;
  return h;
}

AffineTransform2D AffineTransform2D::scale(double sx, double sy) {
  AffineTransform2D out;
  out.m << sx, 0.0, 0.0, sy;
  return out;
}

AffineTransform2D AffineTransform2D::translation(double tx, double ty) {
  AffineTransform2D out;
  out.t << tx, ty;
  return out;
}

AffineTransform2D AffineTransform2D::rotation(double degrees,
                                              const Point2& center) {
  // Counterclockwise on screen is clockwise in the y-down pixel frame.
  const double r = degrees / kDegPerRad;
  AffineTransform2D out;
  out.m << std::cos(r), std::sin(r), -std::sin(r), std::cos(r);
  out.t = center - out.m * center;
  return out;
}

AffineTransform2D AffineTransform2D::resize(int width, int height,
                                            int out_width, int out_height) {
  return scale(static_cast<double>(out_width) / width,
               static_cast<double>(out_height) / height);
}

AffineTransform2D AffineTransform2D::horizontal_flip(int width) {
  AffineTransform2D out;
  out.m << -1.0, 0.0, 0.0, 1.0;
  out.t << width, 0.0;
  return out;
}

AffineTransform2D AffineTransform2D::vertical_flip(int height) {
  AffineTransform2D out;
  out.m << 1.0, 0.0, 0.0, -1.0;
  out.t << 0.0, height;
  return out;
}

AffineTransform2D AffineTransform2D::rotate90(int width, int /*height*/) {
  AffineTransform2D out;
  out.m << 0.0, 1.0, -1.0, 0.0;
  out.t << 0.0, width;
  return out;
}

AffineTransform2D AffineTransform2D::rotate180(int width, int height) {
  AffineTransform2D out;
  out.m << -1.0, 0.0, 0.0, -1.0;
  out.t << width, height;
  return out;
}

AffineTransform2D AffineTransform2D::rotate270(int /*width*/, int height) {
  AffineTransform2D out;
  out.m << 0.0, -1.0, 1.0, 0.0;
  out.t << height, 0.0;
  return out;
}

AffineTransform2D compose(const AffineTransform2D& second,
                          const AffineTransform2D& first) {
  AffineTransform2D out;
  out.m = second.m * first.m;
  out.t = second.m * first.t + second.t;
  return out;
}

// --- Conics -----------------------------------------------------------------

Eigen::Matrix3d to_conic(const Ellipse& e) {
  const Point2 u = e.major_direction();
  Eigen::Matrix2d r;
  r.col(0) = u;
  r.col(1) = Point2(-u.y(), u.x());
  const Eigen::Matrix2d q =
      r * Eigen::Vector2d(1.0 / (e.a * e.a), 1.0 / (e.b * e.b)).asDiagonal() *
      r.transpose();
  const Point2 c(e.xc, e.yc);
  Eigen::Matrix3d conic;
  conic.topLeftCorner<2, 2>() = q;
  conic.topRightCorner<2, 1>() = -q * c;
  conic.bottomLeftCorner<1, 2>() = (-q * c).transpose();
  conic(2, 2) = c.dot(q * c) - 1.0;
  return conic;
}

Ellipse from_conic(const Eigen::Matrix3d& conic_in) {
  Eigen::Matrix3d conic = 0.5 * (conic_in + conic_in.transpose());
  Eigen::Matrix2d q = conic.topLeftCorner<2, 2>();
  const Eigen::Vector2d g = conic.topRightCorner<2, 1>();
  if (!(q.determinant() > 0.0)) {
    throw Error(ErrorCode::DegenerateInput, "conic is not an ellipse");
  }
  const Point2 center = -q.ldlt().solve(g);
  double f0 = conic(2, 2) + g.dot(center);
  if (q.trace() < 0.0) {
    q = -q;
    f0 = -f0;
  }
  if (!(f0 < 0.0)) {
    throw Error(ErrorCode::DegenerateInput, "conic has no real points");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(q);
  const Eigen::Vector2d lambda = eig.eigenvalues();  // ascending
  double a = std::sqrt(-f0 / lambda(0));
  double b = std::sqrt(-f0 / lambda(1));
  if (a - b <= 1e-12 * a) b = a;
  const Eigen::Vector2d v = eig.eigenvectors().col(0);
  const double theta = std::atan2(-v.y(), v.x()) * kDegPerRad;
  return Ellipse::canonical(center.x(), center.y(), a, b, theta);
}

Ellipse fit_ellipse_lsq(std::span<const Point2> points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n < 6) {
    throw Error(ErrorCode::DegenerateInput,
                "at least 6 points are required for an ellipse fit",
                static_cast<double>(n));
  }

  // Centre and scale so the scatter matrices are well conditioned.
  Point2 mean = Point2::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(n);
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : points) cov += (p - mean) * (p - mean).transpose();
  cov /= static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> spread(cov);
  if (!(spread.eigenvalues()(1) > 0.0) ||
      spread.eigenvalues()(0) <= 1e-10 * spread.eigenvalues()(1)) {
    throw Error(ErrorCode::DegenerateInput, "points are collinear");
  }
  const double scale = std::sqrt(cov.trace() / 2.0);

  Eigen::MatrixXd d1(n, 3);
  Eigen::MatrixXd d2(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Point2 q = (points[static_cast<std::size_t>(i)] - mean) / scale;
    d1.row(i) << q.x() * q.x(), q.x() * q.y(), q.y() * q.y();
    d2.row(i) << q.x(), q.y(), 1.0;
  }
  const Eigen::Matrix3d s1 = d1.transpose() * d1;
  const Eigen::Matrix3d s2 = d1.transpose() * d2;
  const Eigen::Matrix3d s3 = d2.transpose() * d2;
  Eigen::FullPivLU<Eigen::Matrix3d> s3_lu(s3);
  if (!s3_lu.isInvertible()) {
    throw Error(ErrorCode::DegenerateInput, "linear scatter matrix singular");
  }
  const Eigen::Matrix3d t = -s3_lu.solve(s2.transpose());
  const Eigen::Matrix3d m = s1 + s2 * t;
  // Premultiply by the inverse of the constraint block [[0,0,2],[0,-1,0],[2,0,0]].
  Eigen::Matrix3d reduced;
  reduced.row(0) = m.row(2) / 2.0;
  reduced.row(1) = -m.row(1);
  reduced.row(2) = m.row(0) / 2.0;

  Eigen::EigenSolver<Eigen::Matrix3d> eig(reduced);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::DegenerateInput, "eigen decomposition failed");
  }
  int best = -1;
  double best_lambda = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector3cd vc = eig.eigenvectors().col(k);
    if (vc.imag().norm() > 1e-9 * vc.real().norm()) continue;
    const Eigen::Vector3d v = vc.real();
    const double constraint = 4.0 * v(0) * v(2) - v(1) * v(1);
    if (!(constraint > 0.0)) continue;
    const double lambda = eig.eigenvalues()(k).real();
    if (best < 0 || std::abs(lambda) < std::abs(best_lambda)) {
      best = k;
      best_lambda = lambda;
    }
  }
  if (best < 0) {
    throw Error(ErrorCode::DegenerateInput,
                "no eigenvector satisfies the ellipse constraint");
  }
  const Eigen::Vector3d quad = eig.eigenvectors().col(best).real();
  const Eigen::Vector3d lin = t * quad;

  Eigen::Matrix3d normalized;
  normalized << quad(0), quad(1) / 2.0, lin(0) / 2.0,  //
      quad(1) / 2.0, quad(2), lin(1) / 2.0,            //
      lin(0) / 2.0, lin(1) / 2.0, lin(2);
  Eigen::Matrix3d to_normalized = Eigen::Matrix3d::Identity();
  to_normalized(0, 0) = to_normalized(1, 1) = 1.0 / scale;
  to_normalized(0, 2) = -mean.x() / scale;
  to_normalized(1, 2) = -mean.y() / scale;
  return from_conic(to_normalized.transpose() * normalized * to_normalized);
}

Ellipse transform_ellipse(const Ellipse& e, const AffineTransform2D& t) {
  const double det = t.det();
  if (det == 0.0 || !std::isfinite(det)) {
    throw Error(ErrorCode::SingularTransform, "transform is not invertible",
                det);
  }
  // The conic round trip would add rounding noise to an exact identity.
  if (t.m.isIdentity(0.0) && t.t.isZero(0.0)) return e;
  const Eigen::Matrix3d inv = t.homogeneous().inverse();
  return from_conic(inv.transpose() * to_conic(e) * inv);
}

// --- Masks ------------------------------------------------------------------

namespace {

double component_solidity(const cv::Mat& component) {
  std::vector<cv::Point> pixels;
  cv::findNonZero(component, pixels);
  std::vector<cv::Point> hull;
  cv::convexHull(pixels, hull);
  cv::Mat hull_mask = cv::Mat::zeros(component.size(), CV_8UC1);
  cv::fillConvexPoly(hull_mask, hull, cv::Scalar(kForeground));
  hull_mask |= component;
  return static_cast<double>(pixels.size()) /
         static_cast<double>(cv::countNonZero(hull_mask));
}

}  // namespace

double solidity(const cv::Mat& mask) {
  const cv::Mat component = largest_component(mask);
  if (component.empty() || cv::countNonZero(component) == 0) {
    throw Error(ErrorCode::EmptyMask, "mask has no foreground pixels");
  }
  return component_solidity(component);
}

Ellipse mask_to_ellipse(const cv::Mat& mask, const FitFilter& filter) {
  const cv::Mat component = largest_component(mask);
  if (component.empty() || cv::countNonZero(component) == 0) {
    throw Error(ErrorCode::EmptyMask, "mask has no foreground pixels");
  }
  const std::vector<Point2> boundary = boundary_points(component);
  const Ellipse e = fit_ellipse_lsq(boundary);

  const double s = component_solidity(component);
  if (s < filter.min_solidity) {
    throw Error(ErrorCode::RejectedBySolidity,
                "solidity " + std::to_string(s) + " below threshold", s);
  }
  const double aspect = e.b / e.a;
  if (aspect < filter.min_aspect) {
    throw Error(ErrorCode::RejectedByAspect,
                "aspect ratio " + std::to_string(aspect) + " below threshold",
                aspect);
  }
  return e;
}

// --- Normalization ----------------------------------------------------------

NormalizedEllipse normalize_params(const Ellipse& e, int width, int height) {
  if (width != height) {
    throw Error(ErrorCode::NonSquareInput,
                "normalization requires a square image", width - height);
  }
  const double w = width;
  double theta = canonical_angle(e.theta_deg);
  if (theta > 180.0) theta -= 360.0;
  NormalizedEllipse n{e.xc / w, e.yc / w, 2.0 * e.a / w, 2.0 * e.b / w,
                      theta / 180.0};
  auto check_open = [](double v, const char* name) {
    if (!(v > 0.0 && v < 1.0)) {
      throw Error(ErrorCode::OutOfRange,
                  std::string("normalized ") + name + " outside (0, 1)", v);
    }
  };
  check_open(n.nxc, "xc");
  check_open(n.nyc, "yc");
  check_open(n.nd_major, "major axis");
  check_open(n.nd_minor, "minor axis");
  if (n.nd_minor > n.nd_major) {
    throw Error(ErrorCode::OutOfRange, "normalized minor exceeds major",
                n.nd_minor);
  }
  if (!(n.ntheta >= -1.0 && n.ntheta <= 1.0)) {
    throw Error(ErrorCode::OutOfRange, "normalized angle outside [-1, 1]",
                n.ntheta);
  }
  return n;
}

Ellipse denormalize_params(const NormalizedEllipse& n, int width) {
  const double w = width;
  return Ellipse::checked(n.nxc * w, n.nyc * w, n.nd_major * w / 2.0,
                          n.nd_minor * w / 2.0, n.ntheta * 180.0);
}

Ellipse denormalize_prediction(const NormalizedEllipse& n, int width) {
  const double w = width;
  constexpr double kMinAxis = 1e-3;
  auto finite_or = [](double v, double fallback) {
    return std::isfinite(v) ? v : fallback;
  };
  return Ellipse::canonical(
      finite_or(n.nxc, 0.5) * w, finite_or(n.nyc, 0.5) * w,
      std::max(finite_or(n.nd_major, 0.0) * w / 2.0, kMinAxis),
      std::max(finite_or(n.nd_minor, 0.0) * w / 2.0, kMinAxis),
      finite_or(n.ntheta, 0.0) * 180.0);
}

std::vector<Point2> sample_boundary(const Ellipse& e, int count) {
  const Point2 u = e.major_direction();
  const Point2 v(-u.y(), u.x());
  const Point2 c(e.xc, e.yc);
  std::vector<Point2> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double t = 2.0 * std::numbers::pi * i / count;
    out.push_back(c + e.a * std::cos(t) * u + e.b * std::sin(t) * v);
  }
  return out;
}

void to_json(nlohmann::json& j, const Ellipse& e) {
  j = nlohmann::json{{"xc", e.xc},
                     {"yc", e.yc},
                     {"a", e.a},
                     {"b", e.b},
                     {"theta_deg", e.theta_deg}};
}

void from_json(const nlohmann::json& j, Ellipse& e) {
  e = Ellipse::checked(j.at("xc").get<double>(), j.at("yc").get<double>(),
                       j.at("a").get<double>(), j.at("b").get<double>(),
                       j.at("theta_deg").get<double>());
}

void to_json(nlohmann::json& j, const NormalizedEllipse& n) {
  j = nlohmann::json{{"nxc", n.nxc},
                     {"nyc", n.nyc},
                     {"nd_major", n.nd_major},
                     {"nd_minor", n.nd_minor},
                     {"ntheta", n.ntheta}};
}

}  // namespace pupillo
