#include "pupillo/pupillogram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "pupillo/error.hpp"

namespace pupillo {

void PupillogramTrace::validate() const {
  if (t.size() != d.size()) {
    throw Error(ErrorCode::DimensionMismatch, "t and d differ in length");
  }
  if (t.size() < 3) {
    throw Error(ErrorCode::TooFewSamples, "a trace needs at least 3 samples",
                static_cast<double>(t.size()));
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i])) throw Error(ErrorCode::NonMonotoneTime, "non-finite timestamp");
    if (i > 0 && !(t[i] > t[i - 1])) {
      throw Error(ErrorCode::NonMonotoneTime,
                  "timestamps must strictly increase (sample " + std::to_string(i) + ")", t[i]);
    }
    if (!(d[i] > 0.0) || !std::isfinite(d[i])) {
      throw Error(ErrorCode::InvariantViolation, "diameters must be positive", d[i]);
    }
  }
  if (!(stimulus_onset >= t.front() && stimulus_onset <= t.back())) {
    throw Error(ErrorCode::OutOfRange, "stimulus onset lies outside the trace", stimulus_onset);
  }
}

std::vector<double> median_filter(const std::vector<double>& values, int window) {
  if (window < 1 || window % 2 == 0) {
    throw Error(ErrorCode::ConfigError, "median window must be odd and >= 1", window);
  }
  if (window == 1 || values.empty()) return values;
  const auto n = static_cast<std::ptrdiff_t>(values.size());
  const std::ptrdiff_t half = window / 2;
  std::vector<double> out(values.size());
  std::vector<double> buf(static_cast<std::size_t>(window));
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::ptrdiff_t k = -half; k <= half; ++k) {
      buf[static_cast<std::size_t>(k + half)] =
          values[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i + k, 0, n - 1))];
    }
    std::nth_element(buf.begin(), buf.begin() + half, buf.end());
    out[static_cast<std::size_t>(i)] = buf[static_cast<std::size_t>(half)];
  }
  return out;
}

PupillogramTrace trace_from_predictions(
    const std::vector<std::pair<double, Ellipse>>& predictions,
    double stimulus_onset, const TraceOptions& options,
    std::optional<double> stimulus_offset) {
  if (predictions.size() < 3) {
    throw Error(ErrorCode::TooFewSamples, "a trace needs at least 3 predictions",
                static_cast<double>(predictions.size()));
  }
  if (options.mm_per_pixel && !(*options.mm_per_pixel > 0.0)) {
    throw Error(ErrorCode::ConfigError, "mm_per_pixel must be positive", *options.mm_per_pixel);
  }
  PupillogramTrace trace;
  const double scale = options.mm_per_pixel.value_or(1.0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& [t, e] = predictions[i];
    if (i > 0 && !(t > predictions[i - 1].first)) {
      throw Error(ErrorCode::NonMonotoneTime,
                  "timestamps must strictly increase (prediction " + std::to_string(i) + ")", t);
    }
    trace.t.push_back(t);
    trace.d.push_back(pupil_diameter(e) * scale);
  }
  trace.d = median_filter(trace.d, options.median_window);
  trace.median_window = options.median_window;
  trace.unit = options.mm_per_pixel ? "mm" : "px";
  trace.stimulus_onset = stimulus_onset;
  trace.stimulus_offset = stimulus_offset;
  trace.validate();
  return trace;
}

std::vector<double> velocity(const std::vector<double>& t, const std::vector<double>& d) {
  const std::size_t n = t.size();
  std::vector<double> v(n, 0.0);
  if (n < 2) return v;
  v.front() = (d[1] - d[0]) / (t[1] - t[0]);
  v.back() = (d[n - 1] - d[n - 2]) / (t[n - 1] - t[n - 2]);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    v[i] = (d[i + 1] - d[i - 1]) / (t[i + 1] - t[i - 1]);
  }
  return v;
}

PLRMetrics compute_plr_metrics(const PupillogramTrace& trace, const PLROptions& options) {
  trace.validate();
  if (!(options.velocity_threshold > 0.0)) {
    throw Error(ErrorCode::ConfigError, "velocity threshold must be positive",
                options.velocity_threshold);
  }
  const auto& t = trace.t;
  const auto& d = trace.d;
  const std::size_t n = t.size();
  const auto first_post = static_cast<std::size_t>(
      std::lower_bound(t.begin(), t.end(), trace.stimulus_onset) - t.begin());
  if (first_post < 2) {
    throw Error(ErrorCode::NoBaseline,
                "need at least 2 samples before the stimulus onset",
                static_cast<double>(first_post));
  }

  PLRMetrics m;
  m.D0 = std::accumulate(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(first_post), 0.0) /
         static_cast<double>(first_post);
  const double post_min = *std::min_element(d.begin() + static_cast<std::ptrdiff_t>(first_post), d.end());
  m.Dmin = std::min(m.D0, post_min);
  m.MCA = m.D0 - m.Dmin;

  const auto v = velocity(t, d);
  const double limit = -options.velocity_threshold * m.D0;
  std::size_t onset = n;
  for (std::size_t i = first_post; i < n; ++i) {
    if (v[i] < limit) {
      onset = i;
      break;
    }
  }
  if (onset == n) return m;

  std::size_t argmin = onset;
  for (std::size_t i = onset; i < n; ++i) {
    if (d[i] < d[argmin]) argmin = i;
  }
  double mcv = 0.0;
  for (std::size_t i = onset; i <= argmin; ++i) mcv = std::max(mcv, -v[i]);

  m.constriction_detected = true;
  m.constriction_onset = t[onset];
  m.t_min = t[argmin];
  m.tL = t[onset] - trace.stimulus_onset;
  m.MCV = mcv;
  m.tC = t[argmin] - t[onset];
  return m;
}

nlohmann::json PLRMetrics::to_json(const std::string& unit) const {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json();
  };
  return {{"schema_version", 1},
          {"unit", unit},
          {"D0", D0},
          {"Dmin", Dmin},
          {"MCA", MCA},
          {"constriction_detected", constriction_detected},
          {"tL_s", opt(tL)},
          {"MCV_per_s", opt(MCV)},
          {"tC_s", opt(tC)},
          {"constriction_onset_s", opt(constriction_onset)},
          {"t_min_s", opt(t_min)}};
}

void write_trace_csv(const std::filesystem::path& path, const PupillogramTrace& trace) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "t_seconds,diameter_" << trace.unit << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < trace.t.size(); ++i) out << trace.t[i] << ',' << trace.d[i] << '\n';
}

PupillogramTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  PupillogramTrace trace;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::IoError, "empty trace file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::string prefix = "t_seconds,diameter_";
  if (line.rfind(prefix, 0) != 0) {
    throw Error(ErrorCode::IoError, "trace header must be t_seconds,diameter_<unit>");
  }
  trace.unit = line.substr(prefix.size());
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::istringstream ss(line);
    double t = 0.0, d = 0.0;
    char comma = 0;
    if (!(ss >> t >> comma >> d) || comma != ',') {
      throw Error(ErrorCode::IoError, "malformed trace row: " + line);
    }
    trace.t.push_back(t);
    trace.d.push_back(d);
  }
  if (!trace.t.empty()) trace.stimulus_onset = trace.t.front();
  return trace;
}

nlohmann::json trace_sidecar(const PupillogramTrace& trace, const PLROptions& options) {
  return {{"schema_version", 1},
          {"stimulus_onset_s", trace.stimulus_onset},
          {"stimulus_offset_s", trace.stimulus_offset ? nlohmann::json(*trace.stimulus_offset)
                                                      : nlohmann::json()},
          {"unit", trace.unit},
          {"median_window", trace.median_window},
          {"velocity_threshold", options.velocity_threshold},
          {"samples", trace.t.size()}};
}

void apply_sidecar(PupillogramTrace& trace, const nlohmann::json& sidecar) {
  trace.stimulus_onset = sidecar.at("stimulus_onset_s").get<double>();
  const auto off = sidecar.value("stimulus_offset_s", nlohmann::json());
  trace.stimulus_offset = off.is_null() ? std::nullopt : std::optional<double>(off.get<double>());
  trace.median_window = sidecar.value("median_window", trace.median_window);
}

void render_pupillogram(const std::filesystem::path& path, const PupillogramTrace& trace,
                        const PLRMetrics& metrics, int width, int height) {
  trace.validate();
  const int left = 70, right = 20, top = 30, bottom = 50;
  cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  const double t0 = trace.t.front();
  const double t1 = trace.t.back();
  const auto [lo_it, hi_it] = std::minmax_element(trace.d.begin(), trace.d.end());
  const double pad = std::max(1e-9, 0.1 * (*hi_it - *lo_it));
  const double d0 = *lo_it - pad;
  const double d1 = *hi_it + pad;
  auto px = [&](double t, double d) {
    return cv::Point(
        left + static_cast<int>(std::lround((t - t0) / (t1 - t0) * (width - left - right))),
        top + static_cast<int>(std::lround((d1 - d) / (d1 - d0) * (height - top - bottom))));
  };
  const cv::Scalar black(0, 0, 0), grey(150, 150, 150), blue(200, 80, 20), red(30, 30, 220);
  cv::rectangle(img, {left, top}, {width - right, height - bottom}, black, 1);
  auto vline = [&](double t, const cv::Scalar& colour) {
    cv::line(img, px(t, d0), px(t, d1), colour, 1, cv::LINE_AA);
  };
  vline(trace.stimulus_onset, red);
  if (trace.stimulus_offset && *trace.stimulus_offset <= t1) vline(*trace.stimulus_offset, red);
  if (metrics.constriction_onset) vline(*metrics.constriction_onset, grey);
  if (metrics.t_min) vline(*metrics.t_min, grey);
  cv::line(img, px(t0, metrics.D0), px(t1, metrics.D0), grey, 1, cv::LINE_AA);

  std::vector<cv::Point> pts;
  for (std::size_t i = 0; i < trace.t.size(); ++i) pts.push_back(px(trace.t[i], trace.d[i]));
  cv::polylines(img, pts, false, blue, 2, cv::LINE_AA);

  auto label = [&](const std::string& s, cv::Point at) {
    cv::putText(img, s, at, cv::FONT_HERSHEY_SIMPLEX, 0.45, black, 1, cv::LINE_AA);
  };
  std::ostringstream ss;
  ss << std::setprecision(3);
  ss << t0;
  label(ss.str(), {left - 10, height - bottom + 20});
  ss.str("");
  ss << t1;
  label(ss.str(), {width - right - 30, height - bottom + 20});
  label("time (s)", {width / 2 - 30, height - 12});
  ss.str("");
  ss << d1;
  label(ss.str(), {5, top + 5});
  ss.str("");
  ss << d0;
  label(ss.str(), {5, height - bottom});
  label("diameter (" + trace.unit + ")", {left, top - 10});
  if (!cv::imwrite(path.string(), img)) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
}

}  // namespace pupillo
