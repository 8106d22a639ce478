#include "pupillo/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "pupillo/error.hpp"
#include "pupillo/mask.hpp"

namespace pupillo {

namespace {

// sRGB primaries, D65 white.
constexpr double kRgbToXyz[3][3] = {{0.412453, 0.357580, 0.180423},
                                    {0.212671, 0.715160, 0.072169},
                                    {0.019334, 0.119193, 0.950227}};
constexpr double kXyzToRgb[3][3] = {
    {3.240479, -1.537150, -0.498535},
    {-0.969256, 1.875992, 0.041556},
    {0.055648, -0.204043, 1.057311}};
constexpr double kWhite[3] = {0.95047, 1.0, 1.08883};
constexpr double kDelta = 6.0 / 29.0;

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double c) {
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) {
  return t > kDelta * kDelta * kDelta ? std::cbrt(t)
                                      : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

double lab_f_inv(double f) {
  return f > kDelta ? f * f * f : 3.0 * kDelta * kDelta * (f - 4.0 / 29.0);
}

const std::array<double, 256>& linear_lut() {
  static const std::array<double, 256> lut = [] {
    std::array<double, 256> out{};
    for (int i = 0; i < 256; ++i) out[static_cast<std::size_t>(i)] = srgb_to_linear(i / 255.0);
    return out;
  }();
  return lut;
}

std::array<double, 3> linear_to_lab(double r, double g, double b) {
  double xyz[3];
  for (int i = 0; i < 3; ++i) {
    xyz[i] = (kRgbToXyz[i][0] * r + kRgbToXyz[i][1] * g + kRgbToXyz[i][2] * b) /
             kWhite[i];
  }
  const double fx = lab_f(xyz[0]);
  const double fy = lab_f(xyz[1]);
  const double fz = lab_f(xyz[2]);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

void require_rgb(const cv::Mat& image) {
  if (image.type() != CV_8UC3) {
    throw Error(ErrorCode::DimensionMismatch, "expected an 8-bit RGB image");
  }
}

cv::Mat procedural_scene(std::size_t which, cv::Size size) {
  cv::Mat scene(size, CV_8UC3, cv::Scalar(18, 18, 22));
  const double w = size.width;
  const double h = size.height;
  switch (which % 3) {
    case 0: {  // bright window with mullions
      const cv::Rect pane(static_cast<int>(0.25 * w), static_cast<int>(0.2 * h),
                          static_cast<int>(0.5 * w), static_cast<int>(0.45 * h));
      cv::rectangle(scene, pane, cv::Scalar(250, 248, 240), cv::FILLED);
      cv::line(scene, {pane.x + pane.width / 2, pane.y},
               {pane.x + pane.width / 2, pane.y + pane.height},
               cv::Scalar(40, 38, 35), std::max(1, size.width / 60));
      cv::line(scene, {pane.x, pane.y + pane.height / 2},
               {pane.x + pane.width, pane.y + pane.height / 2},
               cv::Scalar(40, 38, 35), std::max(1, size.width / 60));
      cv::GaussianBlur(scene, scene, {0, 0}, std::max(1.0, w / 100.0));
      break;
    }
    case 1: {  // ring light
      const cv::Point c(size.width / 2, size.height / 2);
      const int r = static_cast<int>(0.3 * std::min(w, h));
      cv::circle(scene, c, r, cv::Scalar(255, 255, 255),
                 std::max(2, static_cast<int>(0.06 * std::min(w, h))));
      cv::GaussianBlur(scene, scene, {0, 0}, std::max(1.0, w / 120.0));
      break;
    }
    default: {  // point flash: saturated core with a gaussian falloff
      const double sigma = 0.12 * std::min(w, h);
      for (int y = 0; y < size.height; ++y) {
        auto* row = scene.ptr<cv::Vec3b>(y);
        for (int x = 0; x < size.width; ++x) {
          const double dx = x + 0.5 - 0.45 * w;
          const double dy = y + 0.5 - 0.4 * h;
          const double g = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
          const double v = std::min(255.0, 18.0 + 400.0 * g);
          row[x] = cv::Vec3b(to_byte(v), to_byte(v * 0.97), to_byte(v * 0.9));
        }
      }
      break;
    }
  }
  return scene;
}

}  // namespace

std::string to_string(FlipRotateOp op) {
  switch (op) {
    case FlipRotateOp::HorizontalFlip: return "horizontal-flip";
    case FlipRotateOp::VerticalFlip: return "vertical-flip";
    case FlipRotateOp::Rotate90: return "rotate-90";
    case FlipRotateOp::Rotate180: return "rotate-180";
    case FlipRotateOp::Rotate270: return "rotate-270";
  }
  return "unknown";
}

FlipRotateOp parse_flip_rotate(const std::string& name) {
  for (auto op : {FlipRotateOp::HorizontalFlip, FlipRotateOp::VerticalFlip,
                  FlipRotateOp::Rotate90, FlipRotateOp::Rotate180,
                  FlipRotateOp::Rotate270}) {
    if (to_string(op) == name) return op;
  }
  throw Error(ErrorCode::UnsupportedOp,
              "'" + name + "' is not a lossless flip/rotate operation");
}

void AugmentationConfig::validate() const {
  for (const auto* r : {&ca_L, &ca_a, &ca_b, &cra_alpha}) {
    if (!(r->lo <= r->hi)) {
      throw Error(ErrorCode::ConfigError, "augmentation range is not ordered");
    }
  }
  if (!(cra_alpha.lo > 0.0 && cra_alpha.hi <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "alpha range must lie in (0, 1]");
  }
  for (double p : {p_ca, p_cra, p_fr}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::ConfigError, "probability outside [0, 1]", p);
    }
  }
}

std::array<double, 3> rgb_to_lab(std::array<std::uint8_t, 3> rgb) {
  const auto& lut = linear_lut();
  return linear_to_lab(lut[rgb[0]], lut[rgb[1]], lut[rgb[2]]);
}

std::array<std::uint8_t, 3> lab_to_rgb(std::array<double, 3> lab) {
  const double fy = (lab[0] + 16.0) / 116.0;
  const double fx = fy + lab[1] / 500.0;
  const double fz = fy - lab[2] / 200.0;
  const double xyz[3] = {kWhite[0] * lab_f_inv(fx), kWhite[1] * lab_f_inv(fy),
                         kWhite[2] * lab_f_inv(fz)};
  std::array<std::uint8_t, 3> out{};
  for (int i = 0; i < 3; ++i) {
    double lin = kXyzToRgb[i][0] * xyz[0] + kXyzToRgb[i][1] * xyz[1] +
                 kXyzToRgb[i][2] * xyz[2];
    lin = std::clamp(lin, 0.0, 1.0);
    out[static_cast<std::size_t>(i)] = to_byte(255.0 * linear_to_srgb(lin));
  }
  return out;
}

cv::Mat rgb_to_lab(const cv::Mat& rgb) {
  require_rgb(rgb);
  cv::Mat lab(rgb.size(), CV_64FC3);
  for (int y = 0; y < rgb.rows; ++y) {
    const auto* src = rgb.ptr<cv::Vec3b>(y);
    auto* dst = lab.ptr<cv::Vec3d>(y);
    for (int x = 0; x < rgb.cols; ++x) {
      const auto v = rgb_to_lab(std::array<std::uint8_t, 3>{src[x][0], src[x][1], src[x][2]});
      dst[x] = cv::Vec3d(v[0], v[1], v[2]);
    }
  }
  return lab;
}

cv::Mat lab_to_rgb(const cv::Mat& lab) {
  if (lab.type() != CV_64FC3) {
    throw Error(ErrorCode::DimensionMismatch, "expected a CV_64FC3 Lab image");
  }
  cv::Mat rgb(lab.size(), CV_8UC3);
  for (int y = 0; y < lab.rows; ++y) {
    const auto* src = lab.ptr<cv::Vec3d>(y);
    auto* dst = rgb.ptr<cv::Vec3b>(y);
    for (int x = 0; x < lab.cols; ++x) {
      const auto v = lab_to_rgb(std::array<double, 3>{src[x][0], src[x][1], src[x][2]});
      dst[x] = cv::Vec3b(v[0], v[1], v[2]);
    }
  }
  return rgb;
}

ColorShift draw_color_shift(const AugmentationConfig& cfg, Rng& rng) {
  ColorShift s;
  s.dL = rng.uniform(cfg.ca_L.lo, cfg.ca_L.hi);
  s.da = rng.uniform(cfg.ca_a.lo, cfg.ca_a.hi);
  s.db = rng.uniform(cfg.ca_b.lo, cfg.ca_b.hi);
  return s;
}

cv::Mat apply_color_shift(const cv::Mat& rgb, const ColorShift& shift) {
  require_rgb(rgb);
  if (shift.dL == 0.0 && shift.da == 0.0 && shift.db == 0.0) return rgb.clone();
  cv::Mat lab = rgb_to_lab(rgb);
  lab += cv::Scalar(shift.dL, shift.da, shift.db);
  return lab_to_rgb(lab);
}

cv::Mat color_augment(const cv::Mat& rgb, const AugmentationConfig& cfg,
                      Rng& rng) {
  return apply_color_shift(rgb, draw_color_shift(cfg, rng));
}

cv::Mat corneal_reflection_augment(const cv::Mat& rgb, const cv::Mat& iris_mask,
                                   const cv::Mat& scene, double alpha) {
  require_rgb(rgb);
  require_rgb(scene);
  if (iris_mask.type() != CV_8UC1 || iris_mask.size() != rgb.size() ||
      scene.size() != rgb.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "image, iris mask and scene must share dimensions");
  }
  cv::Mat out(rgb.size(), CV_8UC3);
  const double beta = 1.0 - alpha;
  for (int y = 0; y < rgb.rows; ++y) {
    const auto* src = rgb.ptr<cv::Vec3b>(y);
    const auto* sc = scene.ptr<cv::Vec3b>(y);
    const auto* m = iris_mask.ptr<unsigned char>(y);
    auto* dst = out.ptr<cv::Vec3b>(y);
    for (int x = 0; x < rgb.cols; ++x) {
      const double in_iris = m[x] != 0 ? 1.0 : 0.0;
      for (int c = 0; c < 3; ++c) {
        dst[x][c] = to_byte(alpha * src[x][c] + beta * in_iris * sc[x][c]);
      }
    }
  }
  return out;
}

cv::Mat corneal_reflection_augment(const cv::Mat& rgb, const cv::Mat& iris_mask,
                                   const cv::Mat& scene, double alpha,
                                   const AugmentationConfig& cfg) {
  if (!(alpha >= cfg.cra_alpha.lo && alpha <= cfg.cra_alpha.hi)) {
    throw Error(ErrorCode::ConfigError, "alpha outside configured range", alpha);
  }
  return corneal_reflection_augment(rgb, iris_mask, scene, alpha);
}

Sample flip_rotate_augment(const Sample& sample, FlipRotateOp op) {
  const int w = sample.width();
  const int h = sample.height();
  AffineTransform2D t;
  auto apply = [op](const cv::Mat& m) {
    cv::Mat out;
    switch (op) {
      case FlipRotateOp::HorizontalFlip: cv::flip(m, out, 1); break;
      case FlipRotateOp::VerticalFlip: cv::flip(m, out, 0); break;
      case FlipRotateOp::Rotate90: cv::rotate(m, out, cv::ROTATE_90_COUNTERCLOCKWISE); break;
      case FlipRotateOp::Rotate180: cv::rotate(m, out, cv::ROTATE_180); break;
      case FlipRotateOp::Rotate270: cv::rotate(m, out, cv::ROTATE_90_CLOCKWISE); break;
    }
    return out;
  };
  switch (op) {
    case FlipRotateOp::HorizontalFlip: t = AffineTransform2D::horizontal_flip(w); break;
    case FlipRotateOp::VerticalFlip: t = AffineTransform2D::vertical_flip(h); break;
    case FlipRotateOp::Rotate90: t = AffineTransform2D::rotate90(w, h); break;
    case FlipRotateOp::Rotate180: t = AffineTransform2D::rotate180(w, h); break;
    case FlipRotateOp::Rotate270: t = AffineTransform2D::rotate270(w, h); break;
  }
  Sample out;
  out.id = sample.id;
  out.image = apply(sample.image);
  out.pupil_mask = apply(sample.pupil_mask);
  out.iris_mask = apply(sample.iris_mask);
  out.ellipse = transform_ellipse(sample.ellipse, t);
  // Quarter turns and flips are isometries; keep the axes bit-exact.
  out.ellipse.a = sample.ellipse.a;
  out.ellipse.b = sample.ellipse.b;
  return out;
}

Sample flip_rotate_augment(const Sample& sample, const AugmentationConfig& cfg,
                           Rng& rng) {
  if (cfg.fr_ops.empty()) return clone(sample);
  return flip_rotate_augment(sample, cfg.fr_ops[rng.index(cfg.fr_ops.size())]);
}

cv::Mat fit_scene(const cv::Mat& scene, cv::Size size) {
  if (scene.size() == size) return scene;
  cv::Mat out;
  cv::resize(scene, out, size, 0, 0, cv::INTER_LINEAR);
  return out;
}

std::vector<cv::Mat> procedural_scenes(cv::Size size) {
  return {procedural_scene(0, size), procedural_scene(1, size),
          procedural_scene(2, size)};
}

Sample augment_sample(const Sample& sample, const AugmentationConfig& cfg,
                      Rng& rng) {
  // Draw every random quantity up front so the stream layout does not depend
  // on which augmentations fire.
  const bool do_ca = rng.bernoulli(cfg.p_ca);
  const ColorShift shift = draw_color_shift(cfg, rng);
  const bool do_cra = rng.bernoulli(cfg.p_cra);
  const double alpha = rng.uniform(cfg.cra_alpha.lo, cfg.cra_alpha.hi);
  const std::size_t n_scenes =
      cfg.scene_images.empty() ? 3 : cfg.scene_images.size();
  const std::size_t scene_index = rng.index(n_scenes);
  const bool do_fr = rng.bernoulli(cfg.p_fr);
  const std::size_t op_index = rng.index(std::max<std::size_t>(1, cfg.fr_ops.size()));

  Sample out = clone(sample);
  if (do_ca) out.image = apply_color_shift(out.image, shift);
  if (do_cra && alpha < 1.0) {
    const cv::Mat scene =
        cfg.scene_images.empty()
            ? procedural_scene(scene_index, out.image.size())
            : fit_scene(cfg.scene_images[scene_index], out.image.size());
    out.image = corneal_reflection_augment(out.image, out.iris_mask, scene, alpha);
  }
  if (do_fr && !cfg.fr_ops.empty()) {
    out = flip_rotate_augment(out, cfg.fr_ops[op_index]);
  }
  return out;
}

void to_json(nlohmann::json& j, const AugmentationConfig& c) {
  auto range = [](const Range& r) { return nlohmann::json::array({r.lo, r.hi}); };
  std::vector<std::string> ops;
  for (auto op : c.fr_ops) ops.push_back(to_string(op));
  j = {{"ca_L", range(c.ca_L)},
       {"ca_a", range(c.ca_a)},
       {"ca_b", range(c.ca_b)},
       {"cra_alpha", range(c.cra_alpha)},
       {"scene_dir", c.scene_dir},
       {"fr_ops", ops},
       {"p_ca", c.p_ca},
       {"p_cra", c.p_cra},
       {"p_fr", c.p_fr},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, AugmentationConfig& c) {
  const AugmentationConfig d;
  auto range = [&](const char* key, const Range& def) {
    if (!j.contains(key)) return def;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2) {
      throw Error(ErrorCode::ConfigError, std::string(key) + " must be [lo, hi]");
    }
    return Range{v[0].get<double>(), v[1].get<double>()};
  };
  c.ca_L = range("ca_L", d.ca_L);
  c.ca_a = range("ca_a", d.ca_a);
  c.ca_b = range("ca_b", d.ca_b);
  c.cra_alpha = range("cra_alpha", d.cra_alpha);
  c.scene_dir = j.value("scene_dir", d.scene_dir);
  if (j.contains("fr_ops")) {
    c.fr_ops.clear();
    for (const auto& name : j.at("fr_ops")) c.fr_ops.push_back(parse_flip_rotate(name.get<std::string>()));
  } else {
    c.fr_ops = d.fr_ops;
  }
  c.p_ca = j.value("p_ca", d.p_ca);
  c.p_cra = j.value("p_cra", d.p_cra);
  c.p_fr = j.value("p_fr", d.p_fr);
  c.seed = j.value("seed", d.seed);
  c.scene_images.clear();
}

void load_scene_images(AugmentationConfig& cfg) {
  if (cfg.scene_dir.empty()) return;
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(cfg.scene_dir, ec)) {
    const auto ext = entry.path().extension().string();
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(entry.path());
  }
  if (ec) throw Error(ErrorCode::IoError, "cannot list scene_dir " + cfg.scene_dir);
  std::sort(files.begin(), files.end());
  cfg.scene_images.clear();
  for (const auto& f : files) {
    cv::Mat bgr = cv::imread(f.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) throw Error(ErrorCode::IoError, "cannot read scene " + f.string());
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    cfg.scene_images.push_back(rgb);
  }
  if (cfg.scene_images.empty()) {
    throw Error(ErrorCode::IoError, "scene_dir " + cfg.scene_dir + " holds no images");
  }
}

}  // namespace pupillo
