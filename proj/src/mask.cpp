#include "pupillo/mask.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgproc.hpp>

#include "pupillo/error.hpp"

namespace pupillo {

namespace {

void require_mask(const cv::Mat& mask) {
  if (mask.type() != CV_8UC1) {
    throw Error(ErrorCode::DimensionMismatch,
                "masks must be single-channel 8-bit images");
  }
}

}  // namespace

bool is_binary(const cv::Mat& mask) {
  require_mask(mask);
  for (int y = 0; y < mask.rows; ++y) {
    const auto* row = mask.ptr<unsigned char>(y);
    for (int x = 0; x < mask.cols; ++x) {
      if (row[x] != 0 && row[x] != kForeground) return false;
    }
  }
  return true;
}

int foreground_count(const cv::Mat& mask) {
  require_mask(mask);
  return cv::countNonZero(mask);
}

cv::Mat largest_component(const cv::Mat& mask) {
  require_mask(mask);
  cv::Mat labels;
  cv::Mat stats;
  cv::Mat centroids;
  const cv::Mat binary = mask != 0;
  const int count =
      cv::connectedComponentsWithStats(binary, labels, stats, centroids, 8);
  cv::Mat out = cv::Mat::zeros(mask.size(), CV_8UC1);
  if (count <= 1) return out;
  int best = 1;
  for (int k = 2; k < count; ++k) {
    if (stats.at<int>(k, cv::CC_STAT_AREA) >
        stats.at<int>(best, cv::CC_STAT_AREA)) {
      best = k;
    }
  }
  out.setTo(kForeground, labels == best);
  return out;
}

std::vector<Point2> boundary_points(const cv::Mat& mask) {
  require_mask(mask);
  std::vector<Point2> points;
  const int w = mask.cols;
  const int h = mask.rows;
  auto background = [&](int x, int y) {
    return x < 0 || y < 0 || x >= w || y >= h || mask.at<unsigned char>(y, x) == 0;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask.at<unsigned char>(y, x) == 0) continue;
      if (background(x + 1, y)) points.emplace_back(x + 1.0, y + 0.5);
      if (background(x - 1, y)) points.emplace_back(x, y + 0.5);
      if (background(x, y + 1)) points.emplace_back(x + 0.5, y + 1.0);
      if (background(x, y - 1)) points.emplace_back(x + 0.5, y);
    }
  }
  return points;
}

cv::Mat rasterize(const Ellipse& e, int width, int height) {
  cv::Mat out = cv::Mat::zeros(height, width, CV_8UC1);
  const int x0 = std::max(0, static_cast<int>(std::floor(e.xc - e.a - 1)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(e.xc + e.a + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(e.yc - e.a - 1)));
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(e.yc + e.a + 1)));
  for (int y = y0; y <= y1; ++y) {
    auto* row = out.ptr<unsigned char>(y);
    for (int x = x0; x <= x1; ++x) {
      if (e.contains({x + 0.5, y + 0.5})) row[x] = kForeground;
    }
  }
  return out;
}

cv::Mat rasterize_disk(const Point2& center, double radius, int width,
                       int height) {
  return rasterize(Ellipse::canonical(center.x(), center.y(), radius, radius, 0.0),
                   width, height);
}

cv::Mat resize_nearest(const cv::Mat& mask, cv::Size size) {
  cv::Mat out(size, mask.type());
  const double sx = static_cast<double>(mask.cols) / size.width;
  const double sy = static_cast<double>(mask.rows) / size.height;
  std::vector<int> src_x(static_cast<std::size_t>(size.width));
  for (int x = 0; x < size.width; ++x) {
    src_x[static_cast<std::size_t>(x)] =
        std::min(mask.cols - 1, static_cast<int>(std::floor((x + 0.5) * sx)));
  }
  const std::size_t elem = mask.elemSize();
  for (int y = 0; y < size.height; ++y) {
    const int sy_idx =
        std::min(mask.rows - 1, static_cast<int>(std::floor((y + 0.5) * sy)));
    const auto* src = mask.ptr<unsigned char>(sy_idx);
    auto* dst = out.ptr<unsigned char>(y);
    for (int x = 0; x < size.width; ++x) {
      std::copy_n(src + src_x[static_cast<std::size_t>(x)] * elem, elem,
                  dst + static_cast<std::size_t>(x) * elem);
    }
  }
  return out;
}

double binary_dice(const cv::Mat& x, const cv::Mat& y) {
  require_mask(x);
  require_mask(y);
  if (x.size() != y.size()) {
    throw Error(ErrorCode::ShapeMismatch, "mask sizes differ");
  }
  const int nx = cv::countNonZero(x);
  const int ny = cv::countNonZero(y);
  if (nx + ny == 0) return 1.0;
  const int both = cv::countNonZero((x != 0) & (y != 0));
  return 2.0 * both / static_cast<double>(nx + ny);
}

}  // namespace pupillo
