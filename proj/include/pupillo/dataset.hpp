#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>
#include <opencv2/core.hpp>
#include <torch/types.h>

#include "pupillo/augmentation.hpp"
#include "pupillo/geometry.hpp"
#include "pupillo/rng.hpp"
#include "pupillo/sample.hpp"

namespace pupillo {

// ---------------------------------------------------------------------------
// Annotation ingestion

enum class Label { Background, Iris, Pupil };

/// Annotation palette: raw 8-bit value -> class. Default {0: background,
/// 1: iris, 2: pupil}.
struct LabelMap {
  std::map<int, Label> entries{
      {0, Label::Background}, {1, Label::Iris}, {2, Label::Pupil}};
};

struct AnnotationMasks {
  cv::Mat pupil_mask;
  cv::Mat iris_mask;
};

/// Splits an indexed annotation into pupil and iris masks. The iris mask is
/// iris ∪ pupil with interior holes filled. Throws UnknownLabel for values
/// outside the palette and MissingRegion when no pupil pixels exist.
AnnotationMasks load_annotation(const cv::Mat& annotation,
                                const LabelMap& labels = {});

struct PrepareOptions {
  int size = 224;
  LabelMap labels;
  FitFilter filter;
  /// Minimum DSC between the rasterized ground-truth ellipse and the resized
  /// pupil mask for a sample to be accepted.
  double min_consistency_dice = 0.9;
};

/// Resizes a raw eye image and its annotation to the square working size.
/// The ellipse is fitted on the original-resolution pupil mask and mapped
/// through the exact resize transform. Throws the fit-filter rejections,
/// InvariantViolation (ellipse/mask disagreement) or OutOfRange.
Sample prepare_sample(const std::string& id, const cv::Mat& raw_rgb,
                      const cv::Mat& annotation,
                      const PrepareOptions& options = {});

struct PrepareReport {
  int total = 0;
  int accepted = 0;
  std::map<std::string, int> rejections_by_reason;
  std::vector<std::pair<std::string, std::string>> dropped;  // id, reason

  void record_drop(const std::string& id, const std::string& reason);
  nlohmann::json to_json() const;
};

struct ManifestEntry {
  std::string id;
  std::filesystem::path image_path;
  std::filesystem::path annotation_path;
};

/// CSV with columns id,image_path,annotation_path (optional header row).
/// Relative paths are resolved against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

/// Prepares every manifest entry; rejected samples are logged and counted.
std::vector<Sample> prepare_manifest(const std::vector<ManifestEntry>& entries,
                                     const PrepareOptions& options,
                                     PrepareReport& report);

// ---------------------------------------------------------------------------
// Prepared dataset directory: images/, pupil_masks/, iris_masks/ (PNG),
// ellipses.json and prepare_report.json.

void write_prepared(const std::filesystem::path& dir,
                    const std::vector<Sample>& samples,
                    const PrepareReport& report);
std::vector<Sample> read_prepared(const std::filesystem::path& dir);

/// 8-bit RGB image I/O (files are stored in the usual BGR channel order).
cv::Mat read_rgb(const std::filesystem::path& path);
void write_rgb(const std::filesystem::path& path, const cv::Mat& rgb);
cv::Mat read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const cv::Mat& mask);

// ---------------------------------------------------------------------------
// Split and batching

struct Split {
  std::vector<Sample> train;
  std::vector<Sample> validation;
};

/// Seeded shuffle, then |train| = floor(train_fraction * n). Throws
/// TooFewSamples for n < 2.
Split split(const std::vector<Sample>& samples, double train_fraction,
            std::uint64_t seed);

/// Images N x 3 x S x S in [0, 1], masks N x 1 x S x S in {0, 1}, targets
/// N x 5 normalized ellipse parameters. All float32.
struct Batch {
  torch::Tensor images;
  torch::Tensor masks;
  torch::Tensor targets;
  std::vector<std::string> ids;

  std::int64_t size() const { return images.size(0); }
};

torch::Tensor images_to_tensor(const std::vector<cv::Mat>& rgb_images);
Batch make_batch(const std::vector<Sample>& samples);

/// Ordered stream of batches. Epoch orderings and per-sample augmentation
/// are pure functions of (seed, epoch, position), so any batch can be
/// rebuilt independently and the stream is reproducible.
class BatchGenerator {
 public:
  BatchGenerator(const std::vector<Sample>& samples, int batch_size,
                 bool shuffle,
                 std::optional<AugmentationConfig> augmentation,
                 std::uint64_t seed);

  std::size_t sample_count() const { return samples_->size(); }
  std::size_t batches_per_epoch() const;
  std::vector<std::size_t> epoch_order(int epoch) const;
  Batch batch(int epoch, std::size_t index) const;
  std::vector<Batch> epoch(int epoch) const;

 private:
  const std::vector<Sample>* samples_;
  int batch_size_;
  bool shuffle_;
  std::optional<AugmentationConfig> augmentation_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Synthetic eyes

struct ReflectionSpot {
  Point2 center;
  double radius = 3.0;
};

struct EyeSpec {
  int width = 224;
  int height = 224;
  Point2 iris_center{112.0, 112.0};
  double iris_radius = 60.0;
  Ellipse pupil = Ellipse::canonical(112.0, 112.0, 25.0, 25.0, 0.0);
  cv::Vec3b skin_color{190, 140, 120};
  cv::Vec3b sclera_color{235, 230, 225};
  cv::Vec3b iris_color{110, 70, 40};
  cv::Vec3b pupil_color{15, 12, 12};
  std::vector<ReflectionSpot> reflections;
  double noise_sigma = 3.0;
};

/// Draws a plausible eye: iris near the centre, a slightly elliptical pupil,
/// varied colours and up to three specular spots.
EyeSpec random_eye_spec(int size, Rng& rng);

/// Renders concentric skin/sclera/iris/pupil with specular spots. The pupil
/// mask is the rasterized spec ellipse and the returned ellipse equals the
/// spec exactly. Throws GeometryViolation unless pupil ⊂ iris ⊂ image.
Sample synth_eye(const EyeSpec& spec, Rng& rng, const std::string& id = "synth");

/// `count` synthetic eyes; sample i uses a stream derived from (seed, i).
std::vector<Sample> synth_dataset(int count, int size, std::uint64_t seed);

}  // namespace pupillo
