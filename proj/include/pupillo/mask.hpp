#pragma once

#include <vector>

#include <opencv2/core.hpp>

#include "pupillo/geometry.hpp"

namespace pupillo {

// Binary masks are single-channel 8-bit images. Any non-zero value counts as
// foreground on input; functions that produce masks write 0 and 255.

constexpr unsigned char kForeground = 255;

bool is_binary(const cv::Mat& mask);
int foreground_count(const cv::Mat& mask);

/// Largest 8-connected foreground component as a 0/255 mask (empty mask in,
/// empty mask out).
cv::Mat largest_component(const cv::Mat& mask);

/// Midpoints of every edge shared by a foreground pixel and a background (or
/// out-of-image) 4-neighbour.
std::vector<Point2> boundary_points(const cv::Mat& mask);

/// Pixels whose centres lie inside `e`.
cv::Mat rasterize(const Ellipse& e, int width, int height);

/// Rasterizes a filled disk.
cv::Mat rasterize_disk(const Point2& center, double radius, int width,
                       int height);

/// Centre-aligned nearest neighbour resize; preserves binarity.
cv::Mat resize_nearest(const cv::Mat& mask, cv::Size size);

/// 2|X ∩ Y| / (|X| + |Y|); 1 when both masks are empty.
double binary_dice(const cv::Mat& x, const cv::Mat& y);

}  // namespace pupillo
