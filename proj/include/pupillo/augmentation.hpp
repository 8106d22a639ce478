#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>
#include <opencv2/core.hpp>

#include "pupillo/rng.hpp"
#include "pupillo/sample.hpp"

namespace pupillo {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

enum class FlipRotateOp {
  HorizontalFlip,
  VerticalFlip,
  Rotate90,
  Rotate180,
  Rotate270,
};

std::string to_string(FlipRotateOp op);
/// Accepts "horizontal-flip", "vertical-flip", "rotate-90", "rotate-180",
/// "rotate-270"; anything else (e.g. "rotate-45") is UnsupportedOp.
FlipRotateOp parse_flip_rotate(const std::string& name);

struct AugmentationConfig {
  // Colour augmentation: one (dL, da, db) shift per image.
  Range ca_L{-50.0, 10.0};
  Range ca_a{-20.0, 20.0};
  Range ca_b{-20.0, 20.0};
  // Corneal reflection: output = alpha * I + (1 - alpha) * M_iris * I_scene.
  Range cra_alpha{0.98, 1.0};
  // Scene images for reflections. Empty means the procedural set. The
  // images are loaded from scene_dir by load_scene_images and are not part
  // of the serialized config.
  std::vector<cv::Mat> scene_images;
  std::string scene_dir;
  std::vector<FlipRotateOp> fr_ops{
      FlipRotateOp::HorizontalFlip, FlipRotateOp::VerticalFlip,
      FlipRotateOp::Rotate90, FlipRotateOp::Rotate180, FlipRotateOp::Rotate270};
  // Probability that each augmentation is applied to a sample.
  double p_ca = 0.5;
  double p_cra = 0.5;
  double p_fr = 0.5;
  std::uint64_t seed = 0;

  /// Throws ConfigError on unordered ranges or alpha outside (0, 1].
  void validate() const;
};

void to_json(nlohmann::json& j, const AugmentationConfig& c);
void from_json(const nlohmann::json& j, AugmentationConfig& c);

/// Reads every PNG/JPEG in cfg.scene_dir (sorted by name) into
/// cfg.scene_images. No-op when scene_dir is empty. Throws IoError.
void load_scene_images(AugmentationConfig& cfg);

/// CIE L*a*b* (D65, sRGB transfer curve) of one 8-bit RGB pixel.
std::array<double, 3> rgb_to_lab(std::array<std::uint8_t, 3> rgb);
/// Inverse of rgb_to_lab with per-channel clamping to [0, 255].
std::array<std::uint8_t, 3> lab_to_rgb(std::array<double, 3> lab);

/// Whole-image conversions: CV_8UC3 RGB <-> CV_64FC3 Lab.
cv::Mat rgb_to_lab(const cv::Mat& rgb);
cv::Mat lab_to_rgb(const cv::Mat& lab);

struct ColorShift {
  double dL = 0.0;
  double da = 0.0;
  double db = 0.0;
};

ColorShift draw_color_shift(const AugmentationConfig& cfg, Rng& rng);
/// Adds the shift to every pixel in Lab and converts back.
cv::Mat apply_color_shift(const cv::Mat& rgb, const ColorShift& shift);
cv::Mat color_augment(const cv::Mat& rgb, const AugmentationConfig& cfg,
                      Rng& rng);

/// Per-pixel blend alpha * I + (1 - alpha) * M_iris * scene, rounded and
/// clamped. Throws DimensionMismatch when sizes differ.
cv::Mat corneal_reflection_augment(const cv::Mat& rgb, const cv::Mat& iris_mask,
                                   const cv::Mat& scene, double alpha);
/// Same, additionally checking alpha against cfg.cra_alpha (ConfigError).
cv::Mat corneal_reflection_augment(const cv::Mat& rgb, const cv::Mat& iris_mask,
                                   const cv::Mat& scene, double alpha,
                                   const AugmentationConfig& cfg);

/// Lossless flip/rotation of image, both masks and the ellipse.
Sample flip_rotate_augment(const Sample& sample, FlipRotateOp op);
/// Chooses an op uniformly from cfg.fr_ops (identity when empty).
Sample flip_rotate_augment(const Sample& sample, const AugmentationConfig& cfg,
                           Rng& rng);

/// Bilinear resize of a scene to the given size.
cv::Mat fit_scene(const cv::Mat& scene, cv::Size size);

/// Procedural stand-ins for photographed light sources: a bright window, a
/// ring light and a point flash.
std::vector<cv::Mat> procedural_scenes(cv::Size size);

/// CA, CRA and FR, each applied with its configured probability, in that
/// order. Scenes are drawn from cfg.scene_images, or the procedural set when
/// none are given.
Sample augment_sample(const Sample& sample, const AugmentationConfig& cfg,
                      Rng& rng);

}  // namespace pupillo
