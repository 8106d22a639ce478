#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

#include "pupillo/dataset.hpp"
#include "pupillo/error.hpp"
#include "pupillo/evaluation.hpp"
#include "pupillo/losses.hpp"
#include "pupillo/mask.hpp"

using namespace pupillo;

namespace {

torch::Tensor to_prob(const cv::Mat& mask) {
  cv::Mat f;
  mask.convertTo(f, CV_32F, 1.0 / 255.0);
  return torch::from_blob(f.data, {f.rows, f.cols}, torch::kFloat).clone();
}

// A sample whose ground-truth ellipse is the fit of its own raster, so
// fit noise cancels out of the comparisons.
Sample consistent_sample(const std::string& id, const Ellipse& e, int size = 224) {
  Sample s;
  s.id = id;
  s.image = cv::Mat(size, size, CV_8UC3, cv::Scalar(128, 128, 128));
  s.pupil_mask = rasterize(e, size, size);
  s.iris_mask = s.pupil_mask.clone();
  s.ellipse = mask_to_ellipse(s.pupil_mask);
  return s;
}

cv::Mat shift_right(const cv::Mat& m, int dx) {
  cv::Mat out = cv::Mat::zeros(m.size(), m.type());
  m(cv::Rect(0, 0, m.cols - dx, m.rows)).copyTo(out(cv::Rect(dx, 0, m.cols - dx, m.rows)));
  return out;
}

class ShiftPredictor : public Predictor {
 public:
  explicit ShiftPredictor(int dx) : dx_(dx) {}
  std::vector<PredictionPair> predict(const std::vector<Sample>& batch) override {
    std::vector<PredictionPair> out;
    for (const auto& s : batch) {
      Ellipse e = s.ellipse;
      e.xc += dx_;
      out.push_back({to_prob(shift_right(s.pupil_mask, dx_)), normalize_params(e, s.width(), s.height())});
    }
    return out;
  }
  bool has_params() const override { return true; }

 private:
  int dx_;
};

class EmptyPredictor : public Predictor {
 public:
  std::vector<PredictionPair> predict(const std::vector<Sample>& batch) override {
    std::vector<PredictionPair> out;
    for (const auto& s : batch) out.push_back({torch::zeros({s.height(), s.width()}), std::nullopt});
    return out;
  }
  bool has_params() const override { return false; }
};

std::vector<Sample> ring_of_samples() {
  std::vector<Sample> v;
  for (int i = 0; i < 6; ++i)
    v.push_back(consistent_sample("s" + std::to_string(i),
                                  {100.0 + 3 * i, 110.0 - 2 * i, 30.0 + i, 22.0 + 0.5 * i, 20.0 * i}));
  return v;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("pixel accuracy examples") {
  cv::Mat a = cv::Mat::zeros(224, 224, CV_8UC1);
  cv::circle(a, {112, 112}, 40, cv::Scalar(255), -1);
  CHECK(pixel_accuracy(a, a) == 1.0);
  cv::Mat complement = 255 - a;
  CHECK(pixel_accuracy(a, complement) == 0.0);

  // Flip exactly 224 * 224 / 100 pixels.
  const int flips = 224 * 224 / 100;
  REQUIRE(flips * 100 == 224 * 224 - 76);
  cv::Mat b = a.clone();
  for (int k = 0; k < flips; ++k) {
    auto& p = b.at<std::uint8_t>(k / 224, k % 224);
    p = 255 - p;
  }
  CHECK(pixel_accuracy(b, a) == doctest::Approx(1.0 - static_cast<double>(flips) / (224 * 224)));
  CHECK(pixel_accuracy(b, a) == doctest::Approx(0.99).epsilon(1e-4));
  CHECK_THROWS_AS(pixel_accuracy(a, cv::Mat::zeros(10, 10, CV_8UC1)), Error);
}

TEST_CASE("mask DSC agrees with the loss") {
  torch::manual_seed(0);
  for (int k = 0; k < 50; ++k) {
    const auto p = torch::rand({16, 16}) < 0.4;
    const auto g = torch::rand({16, 16}) < 0.4;
    const cv::Mat pm = binarize(p.to(torch::kFloat));
    const cv::Mat gm = binarize(g.to(torch::kFloat));
    const double direct =
        losses::dice_score(p.to(torch::kDouble).unsqueeze(0), g.to(torch::kDouble).unsqueeze(0)).item<double>();
    CHECK(mask_dice(pm, gm) == direct);
  }
}

TEST_CASE("binarize threshold") {
  const auto t = torch::tensor({0.49f, 0.5f, 0.51f, 0.0f}).view({2, 2});
  const cv::Mat m = binarize(t);
  CHECK(m.at<std::uint8_t>(0, 0) == 0);
  CHECK(m.at<std::uint8_t>(0, 1) == 255);
  CHECK(m.at<std::uint8_t>(1, 0) == 255);
  CHECK(m.at<std::uint8_t>(1, 1) == 0);
}

TEST_CASE("oracle predictor is perfect") {
  const auto samples = ring_of_samples();
  OraclePredictor oracle;
  for (auto mode : {PipelineMode::Joint, PipelineMode::TwoStep}) {
    const auto r = evaluate_pipeline(oracle, samples, mode);
    CHECK(r.n == 6);
    CHECK(r.n_effective == 6);
    CHECK(r.n_failures == 0);
    CHECK(r.dsc.mean == 1.0);
    CHECK(r.accuracy.mean == 1.0);
    CHECK(r.diameter_error.mean < 1e-9);
    CHECK(r.position_error_x.mean < 1e-9);
    CHECK(r.position_error_y.mean < 1e-9);
  }
}

TEST_CASE("a three pixel shift shows up as position error") {
  const auto samples = ring_of_samples();
  ShiftPredictor shifted(3);
  for (auto mode : {PipelineMode::Joint, PipelineMode::TwoStep}) {
    const auto r = evaluate_pipeline(shifted, samples, mode);
    CHECK(r.n_effective == 6);
    CHECK(r.position_error_x.mean == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(r.position_error_y.mean < 1e-6);
    CHECK(r.diameter_error.mean < 1e-6);
    CHECK(r.dsc.mean < 1.0);
  }
}

TEST_CASE("empty masks count as failures") {
  const auto samples = ring_of_samples();
  EmptyPredictor empty;
  const auto r = evaluate_pipeline(empty, samples, PipelineMode::TwoStep);
  CHECK(r.n == 6);
  CHECK(r.n_effective == 0);
  CHECK(r.n_failures == 6);
  for (const auto& im : r.images) {
    CHECK_FALSE(im.fit_ok);
    CHECK(im.failure == "EmptyMask");
  }
  CHECK(r.dsc.mean < 1e-6);
  const auto j = r.to_json();
  CHECK(j["n_effective"] == 0);
  CHECK_THROWS_AS(evaluate_pipeline(empty, samples, PipelineMode::Joint), Error);
}

TEST_CASE("aggregates are recomputable from rows") {
  const auto samples = ring_of_samples();
  UNet model = build_model([] {
    ModelConfig c;
    c.input_size = 224;
    c.encoder_depth = 2;
    c.base_channels = 4;
    c.head_hidden = {8};
    return c;
  }(), 3);
  NetworkPredictor net(model);
  auto r = evaluate_pipeline(net, samples, PipelineMode::Joint, 4);
  std::vector<double> dsc;
  for (const auto& im : r.images) dsc.push_back(im.dsc);
  const auto agg = aggregate(dsc);
  CHECK(std::abs(agg.mean - r.dsc.mean) < 1e-9);
  CHECK(std::abs(agg.sd - r.dsc.sd) < 1e-9);
  const auto before = r.to_json();
  recompute_aggregates(r);
  CHECK(r.to_json() == before);

  const auto a = aggregate({1.0, 2.0, 3.0, 4.0});
  CHECK(a.mean == 2.5);
  CHECK(a.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(aggregate({7.0}).sd == 0.0);

  const auto dir = std::filesystem::temp_directory_path() / "pupillo_test_metrics";
  std::filesystem::create_directories(dir);
  r.write_csv(dir / "per_image.csv");
  std::ifstream in(dir / "per_image.csv");
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 7);
  CHECK(r.to_json().contains("schema_version"));
}

TEST_CASE("diameter error ignores translation and position error ignores dilation") {
  const Ellipse gt{112, 112, 40, 30, 25};
  Sample s = consistent_sample("x", gt);
  class Fixed : public Predictor {
   public:
    explicit Fixed(Ellipse e) : e_(e) {}
    std::vector<PredictionPair> predict(const std::vector<Sample>& batch) override {
      std::vector<PredictionPair> out;
      for (const auto& b : batch)
        out.push_back({to_prob(rasterize(e_, b.width(), b.height())), normalize_params(e_, b.width(), b.height())});
      return out;
    }
    bool has_params() const override { return true; }
    Ellipse e_;
  };
  Fixed moved({s.ellipse.xc + 5, s.ellipse.yc - 4, s.ellipse.a, s.ellipse.b, s.ellipse.theta_deg});
  auto r = evaluate_pipeline(moved, {s}, PipelineMode::Joint);
  CHECK(r.diameter_error.mean < 1e-9);
  Fixed grown({s.ellipse.xc, s.ellipse.yc, s.ellipse.a * 1.2, s.ellipse.b * 1.2, s.ellipse.theta_deg});
  r = evaluate_pipeline(grown, {s}, PipelineMode::Joint);
  CHECK(r.position_error_x.mean < 1e-9);
  CHECK(r.position_error_y.mean < 1e-9);
  CHECK(r.diameter_error.mean == doctest::Approx(0.2 * pupil_diameter(s.ellipse)));
}

TEST_CASE("pipeline timing") {
  ModelConfig c;
  c.input_size = 64;
  c.encoder_depth = 3;
  c.base_channels = 8;
  c.head_hidden = {16};
  UNet model = build_model(c, 1);
  const auto samples = synth_dataset(12, 64, 2);
  std::vector<cv::Mat> frames;
  for (const auto& s : samples) frames.push_back(s.image);

  const auto t = time_pipelines(model, frames, 3);
  CHECK(t.frames == 12);
  CHECK(t.repetitions == 3);
  CHECK(t.joint_ms_per_frame > 0.0);
  CHECK(t.twostep_nn_ms > 0.0);
  CHECK(t.twostep_fit_ms > 0.0);
  CHECK(t.twostep_total_ms == t.twostep_nn_ms + t.twostep_fit_ms);
  // Stability sanity band between one and five passes.
  const auto once = time_pipelines(model, frames, 1);
  const auto five = time_pipelines(model, frames, 5);
  CHECK(once.joint_ms_per_frame < 1.5 * five.joint_ms_per_frame);
  CHECK(once.joint_ms_per_frame > 0.5 * five.joint_ms_per_frame);
  const auto j = t.to_json();
  CHECK(j.contains("schema_version"));

  CHECK_THROWS_AS(time_pipelines(model, std::vector<cv::Mat>(frames.begin(), frames.begin() + 9), 1), Error);
  ModelConfig seg = c;
  seg.regression_head = false;
  UNet no_head = build_model(seg, 1);
  CHECK_THROWS_AS(time_pipelines(no_head, frames, 1), Error);
}

TEST_CASE("pipeline mode names") {
  CHECK(parse_pipeline_mode("two-step") == PipelineMode::TwoStep);
  CHECK(parse_pipeline_mode("joint") == PipelineMode::Joint);
  CHECK(to_string(PipelineMode::TwoStep) == "two-step");
  CHECK_THROWS_AS(parse_pipeline_mode("three-step"), Error);
}

}  // TEST_SUITE
