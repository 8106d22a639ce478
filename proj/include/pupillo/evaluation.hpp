#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>
#include <opencv2/core.hpp>

#include "pupillo/geometry.hpp"
#include "pupillo/model.hpp"
#include "pupillo/sample.hpp"

namespace pupillo {

inline constexpr double kBinarizeThreshold = 0.5;

/// (TP + TN) / (P + N) over all pixels of two binary masks.
double pixel_accuracy(const cv::Mat& pred_binary, const cv::Mat& gt_binary);

/// Soft [S, S] probabilities -> 0/255 mask, foreground where p >= 0.5.
cv::Mat binarize(const torch::Tensor& probabilities,
                 double threshold = kBinarizeThreshold);

/// Exact DSC of two binary masks computed through losses::dice_score.
double mask_dice(const cv::Mat& pred_binary, const cv::Mat& gt_binary);

enum class PipelineMode { TwoStep, Joint };
std::string to_string(PipelineMode mode);
PipelineMode parse_pipeline_mode(const std::string& name);

/// Source of mask + parameter predictions. Samples are passed whole so test
/// and oracle predictors can see ground truth; the network predictor only
/// reads the images.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::vector<PredictionPair> predict(const std::vector<Sample>& batch) = 0;
  virtual bool has_params() const = 0;
};

class NetworkPredictor : public Predictor {
 public:
  explicit NetworkPredictor(UNet model) : model_(std::move(model)) {}
  std::vector<PredictionPair> predict(const std::vector<Sample>& batch) override;
  bool has_params() const override { return model_->has_head(); }

 private:
  UNet model_;
};

/// Returns each sample's own ground truth: the perfect model.
class OraclePredictor : public Predictor {
 public:
  std::vector<PredictionPair> predict(const std::vector<Sample>& batch) override;
  bool has_params() const override { return true; }
};

struct ImageMetrics {
  std::string id;
  double dsc = 0.0;
  double accuracy = 0.0;
  bool fit_ok = true;
  std::string failure;  // error code name when fit_ok is false
  double diameter_error = 0.0;  // |PD_gt - PD_pred|, px
  double position_error_x = 0.0;
  double position_error_y = 0.0;
  std::optional<Ellipse> predicted;
};

struct Aggregate {
  double mean = 0.0;
  double sd = 0.0;  // sample SD (n - 1); 0 for n < 2
  int n = 0;
};

Aggregate aggregate(const std::vector<double>& values);

/// DSC and accuracy aggregate over every image. The geometric errors
/// aggregate over the n_effective images whose ellipse could be obtained.
struct MetricsReport {
  PipelineMode pipeline = PipelineMode::Joint;
  std::vector<ImageMetrics> images;
  int n = 0;
  int n_effective = 0;
  int n_failures = 0;
  Aggregate dsc, accuracy, diameter_error, position_error_x, position_error_y;

  nlohmann::json to_json() const;
  void write_csv(const std::filesystem::path& path) const;
};

/// Recomputes the aggregate block from the per-image rows.
void recompute_aggregates(MetricsReport& report);

/// Two-step: binarized mask -> mask_to_ellipse. Joint: regression output
/// denormalized (axes swapped if needed). Errors are in pixels at the
/// samples' resolution. Throws ConfigError when Joint is requested from a
/// predictor without parameters.
MetricsReport evaluate_pipeline(Predictor& predictor,
                                const std::vector<Sample>& samples,
                                PipelineMode mode, int batch_size = 16,
                                const FitFilter& filter = {});

struct TimingReport {
  int frames = 0;
  int repetitions = 0;
  double joint_ms_per_frame = 0.0;
  double twostep_nn_ms = 0.0;
  double twostep_fit_ms = 0.0;
  double twostep_total_ms = 0.0;  // twostep_nn_ms + twostep_fit_ms
  int fit_failures = 0;           // per pass over the frames
  std::string hardware;

  nlohmann::json to_json() const;
};

/// Per-frame wall-clock medians over `repetitions` passes (a warm-up pass is
/// excluded). Joint: full forward + denormalize. Two-step: mask-branch
/// forward + binarize (nn) then mask_to_ellipse (fit). The two pipelines are
/// interleaved frame by frame so drift affects both equally. Needs a model
/// with a regression head and at least 10 frames.
TimingReport time_pipelines(UNet& model, const std::vector<cv::Mat>& frames,
                            int repetitions, const FitFilter& filter = {});

}  // namespace pupillo
