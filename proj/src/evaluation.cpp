#include "pupillo/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <utility>

#include <torch/torch.h>

#include "pupillo/dataset.hpp"
#include "pupillo/error.hpp"
#include "pupillo/losses.hpp"
#include "pupillo/mask.hpp"

namespace pupillo {

namespace {

void require_same(const cv::Mat& a, const cv::Mat& b, const char* what) {
  if (a.size() != b.size() || a.type() != CV_8UC1 || b.type() != CV_8UC1) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(what) + ": masks must be single-channel and equal in size");
  }
}

torch::Tensor mask_to_tensor(const cv::Mat& m) {
  cv::Mat d;
  cv::Mat(m != 0).convertTo(d, CV_64F, 1.0 / 255.0);
  return torch::from_blob(d.data, {1, d.rows, d.cols}, torch::kDouble).clone();
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

nlohmann::json aggregate_json(const Aggregate& a) {
  return {{"mean", a.mean}, {"sd", a.sd}, {"n", a.n}};
}

}  // namespace

double pixel_accuracy(const cv::Mat& pred_binary, const cv::Mat& gt_binary) {
  require_same(pred_binary, gt_binary, "pixel_accuracy");
  const double total = static_cast<double>(pred_binary.total());
  if (total == 0) throw Error(ErrorCode::ShapeMismatch, "pixel_accuracy: empty masks");
  const cv::Mat differ = (pred_binary != 0) != (gt_binary != 0);
  return (total - cv::countNonZero(differ)) / total;
}

cv::Mat binarize(const torch::Tensor& probabilities, double threshold) {
  const auto p = probabilities.detach().to(torch::kCPU, torch::kFloat).contiguous();
  if (p.dim() != 2) throw Error(ErrorCode::ShapeMismatch, "binarize expects [H, W]");
  const cv::Mat view(static_cast<int>(p.size(0)), static_cast<int>(p.size(1)), CV_32F,
                     p.data_ptr<float>());
  cv::Mat out = cv::Mat::zeros(view.size(), CV_8UC1);
  out.setTo(kForeground, view >= threshold);
  return out;
}

double mask_dice(const cv::Mat& pred_binary, const cv::Mat& gt_binary) {
  require_same(pred_binary, gt_binary, "mask_dice");
  return losses::dice_score(mask_to_tensor(pred_binary), mask_to_tensor(gt_binary))
      .item<double>();
}

std::string to_string(PipelineMode mode) {
  return mode == PipelineMode::Joint ? "joint" : "two-step";
}

PipelineMode parse_pipeline_mode(const std::string& name) {
  if (name == "joint") return PipelineMode::Joint;
  if (name == "two-step" || name == "twostep") return PipelineMode::TwoStep;
  throw Error(ErrorCode::ConfigError, "unknown pipeline mode '" + name + "'");
}

std::vector<PredictionPair> NetworkPredictor::predict(const std::vector<Sample>& batch) {
  std::vector<cv::Mat> images;
  for (const auto& s : batch) images.push_back(s.image);
  return split_output(infer(model_, images_to_tensor(images)));
}

std::vector<PredictionPair> OraclePredictor::predict(const std::vector<Sample>& batch) {
  std::vector<PredictionPair> out;
  for (const auto& s : batch) {
    PredictionPair p;
    cv::Mat f;
    s.pupil_mask.convertTo(f, CV_32F, 1.0 / 255.0);
    p.mask = torch::from_blob(f.data, {f.rows, f.cols}, torch::kFloat).clone();
    p.params = normalize_params(s.ellipse, s.width(), s.height());
    out.push_back(std::move(p));
  }
  return out;
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  a.n = static_cast<int>(values.size());
  if (values.empty()) return a;
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / a.n;
  if (a.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.sd = std::sqrt(ss / (a.n - 1));
  }
  return a;
}

void recompute_aggregates(MetricsReport& r) {
  std::vector<double> dsc, acc, diam, px, py;
  r.n = static_cast<int>(r.images.size());
  r.n_effective = 0;
  for (const auto& m : r.images) {
    dsc.push_back(m.dsc);
    acc.push_back(m.accuracy);
    if (!m.fit_ok) continue;
    ++r.n_effective;
    diam.push_back(m.diameter_error);
    px.push_back(m.position_error_x);
    py.push_back(m.position_error_y);
  }
  r.n_failures = r.n - r.n_effective;
  r.dsc = aggregate(dsc);
  r.accuracy = aggregate(acc);
  r.diameter_error = aggregate(diam);
  r.position_error_x = aggregate(px);
  r.position_error_y = aggregate(py);
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& m : images) {
    nlohmann::json row = {{"id", m.id}, {"dsc", m.dsc}, {"accuracy", m.accuracy},
                          {"fit_ok", m.fit_ok}};
    if (m.fit_ok) {
      row["diameter_error_px"] = m.diameter_error;
      row["position_error_x_px"] = m.position_error_x;
      row["position_error_y_px"] = m.position_error_y;
      row["predicted"] = *m.predicted;
    } else {
      row["failure"] = m.failure;
    }
    rows.push_back(row);
  }
  return {{"schema_version", 1},
          {"pipeline", to_string(pipeline)},
          {"sd_convention", "sample (n-1)"},
          {"units", "pixels at working resolution"},
          {"binarize_threshold", kBinarizeThreshold},
          {"n", n},
          {"n_effective", n_effective},
          {"n_failures", n_failures},
          {"aggregate",
           {{"dsc", aggregate_json(dsc)},
            {"accuracy", aggregate_json(accuracy)},
            {"diameter_error_px", aggregate_json(diameter_error)},
            {"position_error_x_px", aggregate_json(position_error_x)},
            {"position_error_y_px", aggregate_json(position_error_y)}}},
          {"images", rows}};
}

void MetricsReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << std::setprecision(10);
  out << "id,dsc,accuracy,fit_ok,diameter_error_px,position_error_x_px,position_error_y_px,failure\n";
  for (const auto& m : images) {
    out << m.id << ',' << m.dsc << ',' << m.accuracy << ',' << (m.fit_ok ? 1 : 0) << ',';
    if (m.fit_ok) {
      out << m.diameter_error << ',' << m.position_error_x << ',' << m.position_error_y << ",\n";
    } else {
      out << ",,," << m.failure << '\n';
    }
  }
}

MetricsReport evaluate_pipeline(Predictor& predictor,
                                const std::vector<Sample>& samples,
                                PipelineMode mode, int batch_size,
                                const FitFilter& filter) {
  if (mode == PipelineMode::Joint && !predictor.has_params()) {
    throw Error(ErrorCode::ConfigError,
                "joint evaluation needs a model with a regression head");
  }
  if (batch_size < 1) throw Error(ErrorCode::ConfigError, "batch_size must be positive");
  MetricsReport report;
  report.pipeline = mode;
  for (std::size_t begin = 0; begin < samples.size(); begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(samples.size(), begin + static_cast<std::size_t>(batch_size));
    const std::vector<Sample> batch(samples.begin() + static_cast<std::ptrdiff_t>(begin),
                                    samples.begin() + static_cast<std::ptrdiff_t>(end));
    const auto preds = predictor.predict(batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Sample& s = batch[i];
      ImageMetrics m;
      m.id = s.id;
      const cv::Mat pred_mask = binarize(preds[i].mask);
      m.dsc = mask_dice(pred_mask, s.pupil_mask);
      m.accuracy = pixel_accuracy(pred_mask, s.pupil_mask);
      try {
        m.predicted = mode == PipelineMode::Joint
                          ? denormalize_prediction(*preds[i].params, s.width())
                          : mask_to_ellipse(pred_mask, filter);
      } catch (const Error& e) {
        m.fit_ok = false;
        m.failure = std::string(pupillo::to_string(e.code()));
      }
      if (m.fit_ok) {
        m.diameter_error = std::abs(pupil_diameter(s.ellipse) - pupil_diameter(*m.predicted));
        m.position_error_x = std::abs(s.ellipse.xc - m.predicted->xc);
        m.position_error_y = std::abs(s.ellipse.yc - m.predicted->yc);
      }
      report.images.push_back(std::move(m));
    }
  }
  recompute_aggregates(report);
  return report;
}

nlohmann::json TimingReport::to_json() const {
  return {{"schema_version", 1},
          {"frames", frames},
          {"repetitions", repetitions},
          {"statistic", "median per-frame wall time"},
          {"joint_ms_per_frame", joint_ms_per_frame},
          {"twostep_nn_ms", twostep_nn_ms},
          {"twostep_fit_ms", twostep_fit_ms},
          {"twostep_total_ms", twostep_total_ms},
          {"fit_failures", fit_failures},
          {"hardware", hardware}};
}

TimingReport time_pipelines(UNet& model, const std::vector<cv::Mat>& frames,
                            int repetitions, const FitFilter& filter) {
  if (frames.size() < 10) {
    throw Error(ErrorCode::TooFewSamples, "timing needs at least 10 frames",
                static_cast<double>(frames.size()));
  }
  if (repetitions < 1) throw Error(ErrorCode::ConfigError, "repetitions must be positive");
  if (!model->has_head()) {
    throw Error(ErrorCode::ConfigError, "timing the joint pipeline needs a regression head");
  }
  using clock = std::chrono::steady_clock;
  auto ms = [](clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); };

  std::vector<torch::Tensor> inputs;
  for (const auto& f : frames) inputs.push_back(images_to_tensor({f}));
  const int size = model->config().input_size;

  model->eval();
  torch::NoGradGuard no_grad;
  std::vector<double> joint, nn, fit;
  TimingReport r;
  r.frames = static_cast<int>(frames.size());
  r.repetitions = repetitions;
  for (int rep = 0; rep <= repetitions; ++rep) {
    const bool warmup = rep == 0;
    int failures = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const auto& x = inputs[i];
      auto run_joint = [&] {
        const auto t0 = clock::now();
        const ModelOutput out = model->forward(x);
        const auto params = split_output(out).front().params;
        const Ellipse direct = denormalize_prediction(*params, size);
        (void)direct;
        return ms(clock::now() - t0);
      };
      auto run_twostep = [&] {
        const auto t0 = clock::now();
        const cv::Mat mask = binarize(model->forward_mask(x)[0][0]);
        const auto t1 = clock::now();
        try {
          (void)mask_to_ellipse(mask, filter);
        } catch (const Error&) {
          ++failures;
        }
        return std::pair{ms(t1 - t0), ms(clock::now() - t1)};
      };
      // Whichever pipeline runs second sees warm caches for this frame, so alternate.
      double j = 0.0;
      std::pair<double, double> two;
      if (i % 2 == 0) {
        j = run_joint();
        two = run_twostep();
      } else {
        two = run_twostep();
        j = run_joint();
      }
      if (warmup) continue;
      joint.push_back(j);
      nn.push_back(two.first);
      fit.push_back(two.second);
    }
    if (!warmup) r.fit_failures = failures;
  }
  r.joint_ms_per_frame = median(joint);
  r.twostep_nn_ms = median(nn);
  r.twostep_fit_ms = median(fit);
  r.twostep_total_ms = r.twostep_nn_ms + r.twostep_fit_ms;
  return r;
}

}  // namespace pupillo
