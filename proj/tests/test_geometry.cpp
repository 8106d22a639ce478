#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pupillo/error.hpp"
#include "pupillo/geometry.hpp"
#include "pupillo/mask.hpp"
#include "support.hpp"

using namespace pupillo;
using testing::angle_diff_deg;
using testing::parametric_points;

namespace {

void check_same(const Ellipse& got, const Ellipse& want, double tol, double angle_tol) {
  CHECK(std::abs(got.xc - want.xc) <= tol);
  CHECK(std::abs(got.yc - want.yc) <= tol);
  CHECK(std::abs(got.a - want.a) <= tol);
  CHECK(std::abs(got.b - want.b) <= tol);
  if (want.a - want.b > 1e-6) CHECK(angle_diff_deg(got.theta_deg, want.theta_deg) <= angle_tol);
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("canonical form swaps axes and wraps the angle") {
  const Ellipse e = Ellipse::canonical(10, 20, 5, 8, 30);
  CHECK(e.a == 8);
  CHECK(e.b == 5);
  CHECK(e.theta_deg == doctest::Approx(120));
  CHECK(Ellipse::canonical(0, 0, 4, 4, 77).theta_deg == 0.0);
  CHECK(Ellipse::canonical(0, 0, 4, 2, -30).theta_deg == doctest::Approx(150));
  CHECK(Ellipse::canonical(0, 0, 4, 2, 180).theta_deg == doctest::Approx(0));
  CHECK(code_of([] { Ellipse::checked(0, 0, 2, 4, 0); }) == ErrorCode::InvariantViolation);
  CHECK(code_of([] { Ellipse::canonical(0, 0, -1, 4, 0); }) == ErrorCode::InvariantViolation);
}

TEST_CASE("fit recovers a circle from 64 points") {
  const auto pts = parametric_points(50, 50, 20, 20, 0, 64);
  const Ellipse e = fit_ellipse_lsq(pts);
  CHECK(std::abs(e.xc - 50) < 1e-6);
  CHECK(std::abs(e.yc - 50) < 1e-6);
  CHECK(std::abs(e.a - 20) < 1e-6);
  CHECK(std::abs(e.b - 20) < 1e-6);
}

TEST_CASE("fit recovers an axis-aligned ellipse") {
  const auto pts = parametric_points(112, 112, 40, 20, 0, 64);
  const Ellipse e = fit_ellipse_lsq(pts);
  check_same(e, {112, 112, 40, 20, 0}, 1e-6, 1e-6);
}

TEST_CASE("fit recovers rotated ellipses") {
  Rng rng(11);
  for (int k = 0; k < 50; ++k) {
    const double xc = rng.uniform(20, 200), yc = rng.uniform(20, 200);
    const double b = rng.uniform(3, 40), a = b * rng.uniform(1.05, 3.0);
    const double th = rng.uniform(0, 180);
    const Ellipse e = fit_ellipse_lsq(parametric_points(xc, yc, a, b, th, 40));
    check_same(e, Ellipse::canonical(xc, yc, a, b, th), 1e-6 * a, 1e-6);
  }
}

TEST_CASE("fit rejects degenerate inputs") {
  const auto five = parametric_points(0, 0, 5, 3, 10, 5);
  CHECK(code_of([&] { fit_ellipse_lsq(five); }) == ErrorCode::DegenerateInput);
  std::vector<Point2> line;
  for (int k = 0; k < 20; ++k) line.emplace_back(k, 2.0 * k + 1);
  CHECK(code_of([&] { fit_ellipse_lsq(line); }) == ErrorCode::DegenerateInput);
  // Points on a hyperbola admit no ellipse solution close to them, but the
  // ellipse-specific constraint still returns an ellipse or a clean error.
  std::vector<Point2> hyper;
  for (int k = 1; k <= 12; ++k) {
    hyper.emplace_back(k, 10.0 / k);
    hyper.emplace_back(-k, -10.0 / k);
  }
  try {
    const Ellipse e = fit_ellipse_lsq(hyper);
    CHECK(e.a >= e.b);
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::DegenerateInput);
  }
}

TEST_CASE("fit commutes with translation and rotation of the points") {
  Rng rng(5);
  for (int k = 0; k < 20; ++k) {
    const double b = rng.uniform(5, 30), a = b * rng.uniform(1.1, 2.5);
    auto pts = parametric_points(rng.uniform(40, 80), rng.uniform(40, 80), a, b,
                                 rng.uniform(0, 180), 30);
    // Perturb so the fit is a genuine least-squares compromise.
    for (auto& p : pts) p += Point2(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3));
    const Ellipse base = fit_ellipse_lsq(pts);
    const double phi = rng.uniform(0, 360);
    const auto t = compose(AffineTransform2D::translation(rng.uniform(-20, 20), rng.uniform(-20, 20)),
                           AffineTransform2D::rotation(phi, {60, 60}));
    std::vector<Point2> moved;
    for (const auto& p : pts) moved.push_back(t.apply(p));
    const Ellipse refit = fit_ellipse_lsq(moved);
    const Ellipse mapped = transform_ellipse(base, t);
    check_same(refit, mapped, 1e-6 * base.a, 1e-5);
  }
}

TEST_CASE("conic round trip") {
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const Ellipse e = Ellipse::canonical(rng.uniform(0, 300), rng.uniform(0, 300),
                                         rng.uniform(1, 80), rng.uniform(1, 80), rng.uniform(0, 180));
    check_same(from_conic(to_conic(e)), e, 1e-9 * std::max(1.0, e.xc), 1e-7);
  }
  // x^2 - y^2 = 1 is a hyperbola.
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  h(0, 0) = 1;
  h(1, 1) = -1;
  h(2, 2) = -1;
  CHECK(code_of([&] { from_conic(h); }) == ErrorCode::DegenerateInput);
}

TEST_CASE("mask_to_ellipse on a rasterized disk") {
  const cv::Mat disk = rasterize_disk({112, 112}, 30, 224, 224);
  const Ellipse e = mask_to_ellipse(disk);
  CHECK(std::abs(e.xc - 112) < 0.5);
  CHECK(std::abs(e.yc - 112) < 0.5);
  CHECK(std::abs(e.a - 30) / 30 < 0.02);
  CHECK(std::abs(e.b - 30) / 30 < 0.02);
}

TEST_CASE("mask_to_ellipse errors") {
  CHECK(code_of([] { mask_to_ellipse(cv::Mat::zeros(64, 64, CV_8UC1)); }) == ErrorCode::EmptyMask);
  const cv::Mat thin = rasterize({112, 112, 60, 10, 0}, 224, 224);
  try {
    mask_to_ellipse(thin);
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RejectedByAspect);
    REQUIRE(e.value().has_value());
    CHECK(*e.value() == doctest::Approx(10.0 / 60.0).epsilon(0.05));
    CHECK(*e.value() < 0.5);
  }
}

TEST_CASE("mask_to_ellipse uses the largest component") {
  cv::Mat m = rasterize({60, 60, 20, 15, 30}, 200, 200);
  cv::bitwise_or(m, rasterize_disk({160, 160}, 5, 200, 200), m);
  const Ellipse e = mask_to_ellipse(m);
  CHECK(std::abs(e.xc - 60) < 0.5);
  CHECK(std::abs(e.yc - 60) < 0.5);
}

TEST_CASE("solidity") {
  CHECK(solidity(rasterize_disk({112, 112}, 40, 224, 224)) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(code_of([] { solidity(cv::Mat::zeros(8, 8, CV_8UC1)); }) == ErrorCode::EmptyMask);

  // A 100 x 100 square with a 50 x 80 bite out of the top: the hull is the
  // full square (10000 px) and the shape keeps 6000 px.
  cv::Mat u = cv::Mat::zeros(200, 200, CV_8UC1);
  u(cv::Rect(50, 50, 100, 100)).setTo(255);
  u(cv::Rect(75, 50, 50, 80)).setTo(0);
  REQUIRE(cv::countNonZero(u) == 6000);
  CHECK(solidity(u) == doctest::Approx(0.6).epsilon(1e-12));

  // A deeper bite drops below the filter threshold.
  cv::Mat v = cv::Mat::zeros(200, 200, CV_8UC1);
  v(cv::Rect(50, 50, 100, 100)).setTo(255);
  v(cv::Rect(70, 50, 60, 90)).setTo(0);
  REQUIRE(cv::countNonZero(v) == 4600);
  try {
    mask_to_ellipse(v);
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RejectedBySolidity);
    CHECK(*e.value() == doctest::Approx(0.46).epsilon(1e-9));
  }
}

TEST_CASE("normalize examples") {
  const auto n = normalize_params({112, 112, 56, 28, 90}, 224, 224);
  CHECK(n.nxc == 0.5);
  CHECK(n.nyc == 0.5);
  CHECK(n.nd_major == 0.5);
  CHECK(n.nd_minor == 0.25);
  CHECK(n.ntheta == 0.5);
  CHECK(normalize_params({112, 112, 56, 28, 0}, 224, 224).ntheta == 0.0);
  CHECK(code_of([] { normalize_params({300, 150, 40, 20, 45}, 224, 224); }) == ErrorCode::OutOfRange);
  CHECK(code_of([] { normalize_params({100, 100, 40, 20, 45}, 224, 200); }) == ErrorCode::NonSquareInput);

  const Ellipse d = denormalize_params({0.5, 0.5, 0.5, 0.25, 0.5}, 224);
  CHECK(d == Ellipse{112, 112, 56, 28, 90});
  CHECK(code_of([] { denormalize_params({0.5, 0.5, 0.25, 0.5, 0.0}, 224); }) ==
        ErrorCode::InvariantViolation);
  // The lenient decoder repairs the same tuple by swapping axes.
  const Ellipse fixed = denormalize_prediction({0.5, 0.5, 0.25, 0.5, 0.0}, 224);
  CHECK(fixed.a == doctest::Approx(56));
  CHECK(fixed.b == doctest::Approx(28));
  CHECK(fixed.theta_deg == doctest::Approx(90));
}

TEST_CASE("normalize round trip on random ellipses") {
  Rng rng(17);
  for (int k = 0; k < 1000; ++k) {
    const Ellipse e = testing::random_interior_ellipse(rng, 224, 224, 1, 50);
    const Ellipse r = denormalize_params(normalize_params(e, 224, 224), 224);
    CHECK(std::abs(r.xc - e.xc) <= 1e-12 * 224);
    CHECK(std::abs(r.yc - e.yc) <= 1e-12 * 224);
    CHECK(std::abs(r.a - e.a) <= 1e-12 * 224);
    CHECK(std::abs(r.b - e.b) <= 1e-12 * 224);
    CHECK(std::abs(r.theta_deg - e.theta_deg) <= 1e-12 * 180);
  }
}

TEST_CASE("transform_ellipse examples") {
  const Ellipse e{60, 100, 30, 15, 40};
  CHECK(transform_ellipse(e, AffineTransform2D::identity()) == e);

  // Horizontal flip against an independent refit of flipped boundary points.
  const auto flip = AffineTransform2D::horizontal_flip(224);
  const Ellipse flipped = transform_ellipse(e, flip);
  std::vector<Point2> pts;
  for (const auto& p : parametric_points(60, 100, 30, 15, 40, 64)) pts.emplace_back(224 - p.x(), p.y());
  check_same(flipped, fit_ellipse_lsq(pts), 1e-6, 1e-6);
  check_same(flipped, {164, 100, 30, 15, 140}, 1e-9, 1e-9);

  AffineTransform2D singular;
  singular.m << 1, 2, 2, 4;
  CHECK(code_of([&] { transform_ellipse(e, singular); }) == ErrorCode::SingularTransform);
}

TEST_CASE("anisotropic resize matches a raster refit") {
  const Ellipse e{200, 150, 50, 30, 30};
  const Ellipse mapped = transform_ellipse(e, AffineTransform2D::resize(400, 300, 224, 224));
  const cv::Mat resized = resize_nearest(rasterize(e, 400, 300), {224, 224});
  const Ellipse refit = mask_to_ellipse(resized);
  CHECK(std::abs(mapped.xc - refit.xc) < 1.0);
  CHECK(std::abs(mapped.yc - refit.yc) < 1.0);
  CHECK(std::abs(mapped.a - refit.a) < 1.0);
  CHECK(std::abs(mapped.b - refit.b) < 1.0);
  CHECK(angle_diff_deg(mapped.theta_deg, refit.theta_deg) < 2.0);
}

TEST_CASE("transform composes") {
  Rng rng(23);
  for (int k = 0; k < 100; ++k) {
    const Ellipse e = Ellipse::canonical(rng.uniform(50, 150), rng.uniform(50, 150),
                                         rng.uniform(5, 40), rng.uniform(5, 40), rng.uniform(0, 180));
    AffineTransform2D t1, t2;
    t1.m << rng.uniform(0.5, 2), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(0.5, 2);
    t1.t << rng.uniform(-10, 10), rng.uniform(-10, 10);
    t2 = AffineTransform2D::rotation(rng.uniform(0, 360), {rng.uniform(0, 100), rng.uniform(0, 100)});
    const Ellipse stepwise = transform_ellipse(transform_ellipse(e, t1), t2);
    const Ellipse direct = transform_ellipse(e, compose(t2, t1));
    check_same(stepwise, direct, 1e-9 * 200, 1e-7);
  }
}

TEST_CASE("pupil diameter") {
  CHECK(pupil_diameter({0, 0, 30, 20, 0}) == 50);
  CHECK(pupil_diameter({0, 0, 7, 7, 0}) == 14);
  CHECK(pupil_diameter({0, 0, 56, 28, 0}) == 84);
  Rng rng(2);
  for (int k = 0; k < 50; ++k) {
    const Ellipse e = Ellipse::canonical(50, 50, rng.uniform(5, 30), rng.uniform(5, 30), rng.uniform(0, 180));
    const double rotated = pupil_diameter(transform_ellipse(e, AffineTransform2D::rotation(rng.uniform(0, 360), {10, 20})));
    CHECK(rotated == doctest::Approx(pupil_diameter(e)).epsilon(1e-12));
    const double s = rng.uniform(0.2, 5);
    CHECK(pupil_diameter(transform_ellipse(e, AffineTransform2D::scale(s, s))) ==
          doctest::Approx(s * pupil_diameter(e)).epsilon(1e-12));
  }
}

TEST_CASE("affine factories match pixel permutations") {
  // Pixel (i, j) of a W x H image lands at the pixel OpenCV moves it to.
  const int w = 7, h = 5;
  cv::Mat idx(h, w, CV_32SC1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) idx.at<int>(y, x) = y * w + x;
  struct Case { int code; AffineTransform2D t; };
  const Case cases[] = {{cv::ROTATE_90_COUNTERCLOCKWISE, AffineTransform2D::rotate90(w, h)},
                        {cv::ROTATE_180, AffineTransform2D::rotate180(w, h)},
                        {cv::ROTATE_90_CLOCKWISE, AffineTransform2D::rotate270(w, h)}};
  for (const auto& c : cases) {
    cv::Mat out;
    cv::rotate(idx, out, c.code);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const Point2 p = c.t.apply({x + 0.5, y + 0.5});
        const int nx = static_cast<int>(std::floor(p.x()));
        const int ny = static_cast<int>(std::floor(p.y()));
        REQUIRE(nx >= 0);
        REQUIRE(ny >= 0);
        REQUIRE(nx < out.cols);
        REQUIRE(ny < out.rows);
        CHECK(out.at<int>(ny, nx) == y * w + x);
      }
  }
}

TEST_CASE("ellipse JSON") {
  const Ellipse e{1.5, 2.5, 4, 3, 12};
  const nlohmann::json j = e;
  CHECK(j.at("theta_deg") == 12);
  CHECK(j.get<Ellipse>() == e);
  CHECK_THROWS_AS((nlohmann::json{{"xc", 0}, {"yc", 0}, {"a", 1}, {"b", 2}, {"theta_deg", 0}}.get<Ellipse>()),
                  Error);
}

}  // TEST_SUITE
