#include "pupillo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

#include "pupillo/error.hpp"
#include "pupillo/log.hpp"
#include "pupillo/mask.hpp"

namespace fs = std::filesystem;

namespace pupillo {

// --- Annotations ------------------------------------------------------------

namespace {

cv::Mat fill_holes(const cv::Mat& mask) {
  // Flood the background from a one-pixel frame; anything unreached is a hole.
  cv::Mat padded;
  cv::copyMakeBorder(mask, padded, 1, 1, 1, 1, cv::BORDER_CONSTANT, 0);
  cv::Mat flooded = padded.clone();
  cv::floodFill(flooded, cv::Point(0, 0), cv::Scalar(128));
  cv::Mat out = mask.clone();
  const cv::Mat interior = flooded(cv::Rect(1, 1, mask.cols, mask.rows));
  out.setTo(kForeground, interior == 0);
  return out;
}

}  // namespace

AnnotationMasks load_annotation(const cv::Mat& annotation,
                                const LabelMap& labels) {
  cv::Mat indexed;
  if (annotation.type() == CV_8UC1) {
    indexed = annotation;
  } else if (annotation.type() == CV_8UC3) {
    std::vector<cv::Mat> ch;
    cv::split(annotation, ch);
    if (cv::countNonZero(ch[0] != ch[1]) || cv::countNonZero(ch[0] != ch[2])) {
      throw Error(ErrorCode::UnknownLabel,
                  "colour annotations must encode labels as equal channels");
    }
    indexed = ch[0];
  } else {
    throw Error(ErrorCode::UnknownLabel, "annotation must be an 8-bit image");
  }

  std::array<int, 256> lut;
  lut.fill(-1);
  for (const auto& [value, label] : labels.entries) {
    if (value >= 0 && value < 256) lut[static_cast<std::size_t>(value)] = static_cast<int>(label);
  }
  AnnotationMasks out{cv::Mat::zeros(indexed.size(), CV_8UC1),
                      cv::Mat::zeros(indexed.size(), CV_8UC1)};
  for (int y = 0; y < indexed.rows; ++y) {
    const auto* src = indexed.ptr<unsigned char>(y);
    auto* pupil = out.pupil_mask.ptr<unsigned char>(y);
    auto* iris = out.iris_mask.ptr<unsigned char>(y);
    for (int x = 0; x < indexed.cols; ++x) {
      const int label = lut[src[x]];
      if (label < 0) {
        throw Error(ErrorCode::UnknownLabel,
                    "annotation value " + std::to_string(src[x]) +
                        " is not in the palette",
                    src[x]);
      }
      if (label == static_cast<int>(Label::Pupil)) {
        pupil[x] = kForeground;
        iris[x] = kForeground;
      } else if (label == static_cast<int>(Label::Iris)) {
        iris[x] = kForeground;
      }
    }
  }
  if (cv::countNonZero(out.pupil_mask) == 0) {
    throw Error(ErrorCode::MissingRegion, "annotation has no pupil region");
  }
  out.iris_mask = fill_holes(out.iris_mask);
  return out;
}

// --- Preparation ------------------------------------------------------------

Sample prepare_sample(const std::string& id, const cv::Mat& raw_rgb,
                      const cv::Mat& annotation,
                      const PrepareOptions& options) {
  if (raw_rgb.type() != CV_8UC3) {
    throw Error(ErrorCode::DimensionMismatch, "raw image must be 8-bit RGB");
  }
  if (raw_rgb.size() != annotation.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "image and annotation sizes differ");
  }
  const AnnotationMasks masks = load_annotation(annotation, options.labels);
  const Ellipse original = mask_to_ellipse(masks.pupil_mask, options.filter);

  const int s = options.size;
  const cv::Size out_size(s, s);
  Sample sample;
  sample.id = id;
  sample.ellipse = transform_ellipse(
      original,
      AffineTransform2D::resize(raw_rgb.cols, raw_rgb.rows, s, s));
  cv::resize(raw_rgb, sample.image, out_size, 0, 0, cv::INTER_LINEAR);
  sample.pupil_mask = resize_nearest(masks.pupil_mask, out_size);
  sample.iris_mask = resize_nearest(masks.iris_mask, out_size);

  const double agreement =
      binary_dice(rasterize(sample.ellipse, s, s), sample.pupil_mask);
  if (agreement < options.min_consistency_dice) {
    throw Error(ErrorCode::InvariantViolation,
                "fitted ellipse disagrees with the pupil mask (DSC " +
                    std::to_string(agreement) + ")",
                agreement);
  }
  normalize_params(sample.ellipse, s, s);  // throws OutOfRange
  return sample;
}

void PrepareReport::record_drop(const std::string& id,
                                const std::string& reason) {
  ++rejections_by_reason[reason];
  dropped.emplace_back(id, reason);
}

nlohmann::json PrepareReport::to_json() const {
  nlohmann::json drops = nlohmann::json::array();
  for (const auto& [id, reason] : dropped) {
    drops.push_back({{"id", id}, {"reason", reason}});
  }
  return {{"schema_version", 1},
          {"total", total},
          {"accepted", accepted},
          {"rejected", total - accepted},
          {"rejections_by_reason", rejections_by_reason},
          {"dropped", drops}};
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  std::vector<ManifestEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (line_no == 1 && !fields.empty() && fields[0] == "id") continue;
    if (fields.size() != 3) {
      throw Error(ErrorCode::ConfigError,
                  "manifest line " + std::to_string(line_no) +
                      " must have 3 fields (id,image_path,annotation_path)");
    }
    auto resolve = [&](const std::string& p) {
      const fs::path q(p);
      return q.is_absolute() ? q : base / q;
    };
    out.push_back({fields[0], resolve(fields[1]), resolve(fields[2])});
  }
  return out;
}

std::vector<Sample> prepare_manifest(const std::vector<ManifestEntry>& entries,
                                     const PrepareOptions& options,
                                     PrepareReport& report) {
  std::vector<Sample> out;
  for (const auto& entry : entries) {
    ++report.total;
    try {
      const cv::Mat image = read_rgb(entry.image_path);
      const cv::Mat annotation =
          cv::imread(entry.annotation_path.string(), cv::IMREAD_UNCHANGED);
      if (annotation.empty()) {
        throw Error(ErrorCode::IoError,
                    "cannot read " + entry.annotation_path.string());
      }
      out.push_back(prepare_sample(entry.id, image, annotation, options));
      ++report.accepted;
    } catch (const Error& e) {
      log::warn("dropping " + entry.id + ": " + e.what());
      report.record_drop(entry.id, std::string(to_string(e.code())));
    }
  }
  return out;
}

// --- Prepared directory -----------------------------------------------------

cv::Mat read_rgb(const fs::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

void write_rgb(const fs::path& path, const cv::Mat& rgb) {
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), bgr)) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
}

cv::Mat read_mask(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  cv::Mat out = cv::Mat::zeros(m.size(), CV_8UC1);
  out.setTo(kForeground, m >= 128);
  return out;
}

void write_mask(const fs::path& path, const cv::Mat& mask) {
  cv::Mat out = cv::Mat::zeros(mask.size(), CV_8UC1);
  out.setTo(kForeground, mask != 0);
  if (!cv::imwrite(path.string(), out)) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
}

void write_prepared(const fs::path& dir, const std::vector<Sample>& samples,
                    const PrepareReport& report) {
  for (const char* sub : {"images", "pupil_masks", "iris_masks"}) {
    fs::create_directories(dir / sub);
  }
  nlohmann::json ellipses = nlohmann::json::object();
  for (const auto& s : samples) {
    const std::string file = s.id + ".png";
    write_rgb(dir / "images" / file, s.image);
    write_mask(dir / "pupil_masks" / file, s.pupil_mask);
    write_mask(dir / "iris_masks" / file, s.iris_mask);
    ellipses[s.id] = s.ellipse;
  }
  std::ofstream(dir / "ellipses.json")
      << nlohmann::json{{"schema_version", 1}, {"ellipses", ellipses}}.dump(2)
      << '\n';
  std::ofstream(dir / "prepare_report.json") << report.to_json().dump(2) << '\n';
}

std::vector<Sample> read_prepared(const fs::path& dir) {
  std::ifstream in(dir / "ellipses.json");
  if (!in) {
    throw Error(ErrorCode::IoError,
                "no ellipses.json in " + dir.string());
  }
  const nlohmann::json doc = nlohmann::json::parse(in);
  std::vector<Sample> out;
  for (const auto& [id, e] : doc.at("ellipses").items()) {
    Sample s;
    s.id = id;
    s.ellipse = e.get<Ellipse>();
    const std::string file = id + ".png";
    s.image = read_rgb(dir / "images" / file);
    s.pupil_mask = read_mask(dir / "pupil_masks" / file);
    s.iris_mask = read_mask(dir / "iris_masks" / file);
    out.push_back(std::move(s));
  }
  return out;
}

// --- Split and batching -----------------------------------------------------

Split split(const std::vector<Sample>& samples, double train_fraction,
            std::uint64_t seed) {
  if (samples.size() < 2) {
    throw Error(ErrorCode::TooFewSamples, "split needs at least 2 samples",
                static_cast<double>(samples.size()));
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::ConfigError, "train fraction must lie in (0, 1)",
                train_fraction);
  }
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, {0x5b17}));
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(samples.size())));
  Split out;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_train ? out.train : out.validation).push_back(samples[order[k]]);
  }
  return out;
}

torch::Tensor images_to_tensor(const std::vector<cv::Mat>& rgb_images) {
  if (rgb_images.empty()) return torch::empty({0, 3, 0, 0});
  const int h = rgb_images.front().rows;
  const int w = rgb_images.front().cols;
  auto out = torch::empty({static_cast<std::int64_t>(rgb_images.size()), 3, h, w});
  auto acc = out.accessor<float, 4>();
  for (std::size_t n = 0; n < rgb_images.size(); ++n) {
    const cv::Mat& img = rgb_images[n];
    if (img.type() != CV_8UC3 || img.rows != h || img.cols != w) {
      throw Error(ErrorCode::ShapeMismatch, "batch images must share shape");
    }
    const auto i = static_cast<std::int64_t>(n);
    for (int y = 0; y < h; ++y) {
      const auto* row = img.ptr<cv::Vec3b>(y);
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) acc[i][c][y][x] = row[x][c] / 255.0f;
      }
    }
  }
  return out;
}

Batch make_batch(const std::vector<Sample>& samples) {
  Batch b;
  std::vector<cv::Mat> images;
  for (const auto& s : samples) images.push_back(s.image);
  b.images = images_to_tensor(images);
  const auto n = static_cast<std::int64_t>(samples.size());
  const int h = samples.empty() ? 0 : samples.front().height();
  const int w = samples.empty() ? 0 : samples.front().width();
  b.masks = torch::zeros({n, 1, h, w});
  b.targets = torch::zeros({n, 5});
  auto macc = b.masks.accessor<float, 4>();
  auto tacc = b.targets.accessor<float, 2>();
  for (std::int64_t i = 0; i < n; ++i) {
    const Sample& s = samples[static_cast<std::size_t>(i)];
    for (int y = 0; y < h; ++y) {
      const auto* row = s.pupil_mask.ptr<unsigned char>(y);
      for (int x = 0; x < w; ++x) macc[i][0][y][x] = row[x] != 0 ? 1.0f : 0.0f;
    }
    const auto v = normalize_params(s.ellipse, w, h).values();
    for (int k = 0; k < 5; ++k) tacc[i][k] = static_cast<float>(v[static_cast<std::size_t>(k)]);
    b.ids.push_back(s.id);
  }
  return b;
}

BatchGenerator::BatchGenerator(const std::vector<Sample>& samples,
                               int batch_size, bool shuffle,
                               std::optional<AugmentationConfig> augmentation,
                               std::uint64_t seed)
    : samples_(&samples),
      batch_size_(batch_size),
      shuffle_(shuffle),
      augmentation_(std::move(augmentation)),
      seed_(seed) {
  if (samples.empty()) {
    throw Error(ErrorCode::TooFewSamples, "batch generator needs samples");
  }
  if (batch_size < 1) {
    throw Error(ErrorCode::ConfigError, "batch size must be positive",
                batch_size);
  }
  if (augmentation_) augmentation_->validate();
}

std::size_t BatchGenerator::batches_per_epoch() const {
  const auto b = static_cast<std::size_t>(batch_size_);
  return (samples_->size() + b - 1) / b;
}

std::vector<std::size_t> BatchGenerator::epoch_order(int epoch) const {
  std::vector<std::size_t> order(samples_->size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (shuffle_) {
    Rng rng(derive_seed(seed_, {0xba7c, static_cast<std::uint64_t>(epoch)}));
    rng.shuffle(order);
  }
  return order;
}

Batch BatchGenerator::batch(int epoch, std::size_t index) const {
  const auto order = epoch_order(epoch);
  const auto b = static_cast<std::size_t>(batch_size_);
  const std::size_t begin = index * b;
  const std::size_t end = std::min(order.size(), begin + b);
  if (begin >= end) throw Error(ErrorCode::OutOfRange, "batch index past epoch end");
  std::vector<Sample> items;
  items.reserve(end - begin);
  for (std::size_t k = begin; k < end; ++k) {
    const Sample& s = (*samples_)[order[k]];
    if (augmentation_) {
      Rng rng(derive_seed(augmentation_->seed ^ seed_,
                          {0xa06, static_cast<std::uint64_t>(epoch), order[k]}));
      items.push_back(augment_sample(s, *augmentation_, rng));
    } else {
      items.push_back(s);
    }
  }
  return make_batch(items);
}

std::vector<Batch> BatchGenerator::epoch(int epoch) const {
  std::vector<Batch> out;
  for (std::size_t k = 0; k < batches_per_epoch(); ++k) out.push_back(batch(epoch, k));
  return out;
}

// --- Synthetic eyes ---------------------------------------------------------

namespace {

cv::Vec3b jitter(const cv::Vec3b& base, double amount, Rng& rng) {
  cv::Vec3b out;
  const double common = rng.uniform(-amount, amount);
  for (int c = 0; c < 3; ++c) {
    out[c] = cv::saturate_cast<unsigned char>(
        base[c] + common + rng.uniform(-amount / 3, amount / 3));
  }
  return out;
}

double max_distance_to_boundary(const Ellipse& e, const Point2& from) {
  double best = 0.0;
  for (const auto& p : sample_boundary(e, 720)) best = std::max(best, (p - from).norm());
  return best;
}

}  // namespace

EyeSpec random_eye_spec(int size, Rng& rng) {
  static const cv::Vec3b kIrisPalette[] = {
      {100, 60, 30}, {70, 42, 25}, {130, 100, 55},
      {90, 120, 70}, {85, 115, 150}, {120, 122, 128}};
  static const cv::Vec3b kSkinLight{225, 185, 160};
  static const cv::Vec3b kSkinDark{105, 70, 50};

  EyeSpec s;
  s.width = s.height = size;
  const double sz = size;
  s.iris_radius = rng.uniform(0.22, 0.32) * sz;
  s.iris_center = Point2(sz / 2 + rng.uniform(-0.12, 0.12) * sz,
                         sz / 2 + rng.uniform(-0.12, 0.12) * sz);
  const double a = rng.uniform(0.3, 0.6) * s.iris_radius;
  const double b = a * rng.uniform(0.8, 1.0);
  const double offset_r = rng.uniform(0.0, 0.1) * s.iris_radius;
  const double offset_t = rng.uniform(0.0, 2.0 * std::numbers::pi);
  s.pupil = Ellipse::canonical(s.iris_center.x() + offset_r * std::cos(offset_t),
                               s.iris_center.y() + offset_r * std::sin(offset_t),
                               a, b, rng.uniform(0.0, 180.0));
  const double t = rng.uniform(0.0, 1.0);
  for (int c = 0; c < 3; ++c) {
    s.skin_color[c] = cv::saturate_cast<unsigned char>(
        kSkinLight[c] * (1 - t) + kSkinDark[c] * t);
  }
  s.sclera_color = jitter({232, 226, 220}, 12.0, rng);
  s.iris_color = jitter(kIrisPalette[rng.index(std::size(kIrisPalette))], 20.0, rng);
  const auto p = static_cast<unsigned char>(rng.uniform(5.0, 30.0));
  s.pupil_color = {p, p, static_cast<unsigned char>(p + 2)};
  const std::size_t spots = rng.index(4);
  for (std::size_t k = 0; k < spots; ++k) {
    const double rr = std::sqrt(rng.uniform(0.0, 1.0)) * s.iris_radius * 0.9;
    const double tt = rng.uniform(0.0, 2.0 * std::numbers::pi);
    s.reflections.push_back(
        {s.iris_center + rr * Point2(std::cos(tt), std::sin(tt)),
         rng.uniform(0.015, 0.05) * sz});
  }
  s.noise_sigma = rng.uniform(1.0, 5.0);
  return s;
}

Sample synth_eye(const EyeSpec& spec, Rng& rng, const std::string& id) {
  const double r = spec.iris_radius;
  const Point2 c = spec.iris_center;
  if (!(r > 0.0) || c.x() - r <= 0.0 || c.y() - r <= 0.0 ||
      c.x() + r >= spec.width || c.y() + r >= spec.height) {
    throw Error(ErrorCode::GeometryViolation, "iris must lie inside the image");
  }
  if (max_distance_to_boundary(spec.pupil, c) >= r) {
    throw Error(ErrorCode::GeometryViolation,
                "pupil must lie strictly inside the iris");
  }

  const int w = spec.width;
  const int h = spec.height;
  const Ellipse opening = Ellipse::canonical(c.x(), c.y(), 2.2 * r, 1.2 * r, 0.0);
  // Iris texture: a few angular harmonics with random phases.
  const int k1 = 5 + static_cast<int>(rng.index(8));
  const int k2 = 13 + static_cast<int>(rng.index(12));
  const double ph1 = rng.uniform(0.0, 6.3);
  const double ph2 = rng.uniform(0.0, 6.3);
  const double texture = rng.uniform(0.05, 0.18);

  Sample out;
  out.id = id;
  out.ellipse = spec.pupil;
  out.image = cv::Mat(h, w, CV_8UC3);
  out.pupil_mask = rasterize(spec.pupil, w, h);
  out.iris_mask = rasterize_disk(c, r, w, h);

  for (int y = 0; y < h; ++y) {
    auto* row = out.image.ptr<cv::Vec3b>(y);
    const auto* pm = out.pupil_mask.ptr<unsigned char>(y);
    const auto* im = out.iris_mask.ptr<unsigned char>(y);
    for (int x = 0; x < w; ++x) {
      const Point2 p(x + 0.5, y + 0.5);
      double col[3];
      const double shade = 0.9 + 0.2 * (1.0 - p.y() / h);
      for (int k = 0; k < 3; ++k) col[k] = spec.skin_color[k] * shade;
      if (opening.contains(p)) {
        for (int k = 0; k < 3; ++k) col[k] = spec.sclera_color[k];
      }
      if (im[x]) {
        const Point2 d = p - c;
        const double rho = d.norm() / r;
        const double phi = std::atan2(d.y(), d.x());
        double f = 1.0 + texture * (std::sin(k1 * phi + ph1) +
                                    0.5 * std::sin(k2 * phi + ph2 + 3 * rho));
        if (rho > 0.85) f *= 1.0 - 1.5 * (rho - 0.85);  // limbal ring
        for (int k = 0; k < 3; ++k) col[k] = spec.iris_color[k] * f;
      }
      if (pm[x]) {
        for (int k = 0; k < 3; ++k) col[k] = spec.pupil_color[k];
      }
      for (const auto& spot : spec.reflections) {
        const double q = (p - spot.center).norm() / spot.radius;
        const double wgt = std::exp(-q * q * q * q);
        for (int k = 0; k < 3; ++k) col[k] = col[k] * (1.0 - wgt) + 252.0 * wgt;
      }
      const double noise = spec.noise_sigma * rng.normal();
      for (int k = 0; k < 3; ++k) {
        row[x][k] = cv::saturate_cast<unsigned char>(std::lround(col[k] + noise));
      }
    }
  }
  return out;
}

std::vector<Sample> synth_dataset(int count, int size, std::uint64_t seed) {
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(std::max(0, count)));
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, {0x5e7, static_cast<std::uint64_t>(i)}));
    char id[32];
    std::snprintf(id, sizeof(id), "synth_%05d", i);
    out.push_back(synth_eye(random_eye_spec(size, rng), rng, id));
  }
  return out;
}

}  // namespace pupillo
