#pragma once

#include <string>

#include <opencv2/core.hpp>

#include "pupillo/geometry.hpp"

namespace pupillo {

/// One annotated eye image. `image` is 8-bit RGB (channel order R, G, B);
/// the masks are 0/255 single-channel images of the same size.
struct Sample {
  std::string id;
  cv::Mat image;
  cv::Mat pupil_mask;
  cv::Mat iris_mask;
  Ellipse ellipse;

  int width() const { return image.cols; }
  int height() const { return image.rows; }
};

/// Deep copy (cv::Mat copies share pixel buffers).
inline Sample clone(const Sample& s) {
  return {s.id, s.image.clone(), s.pupil_mask.clone(), s.iris_mask.clone(),
          s.ellipse};
}

}  // namespace pupillo
