// pupillo: command-line front end for the pupillometry toolkit.
//
// Exit status: 0 success, 1 validation error (bad flags, config or inputs;
// nothing is written), 2 runtime failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

#include "pupillo/augmentation.hpp"
#include "pupillo/config.hpp"
#include "pupillo/dataset.hpp"
#include "pupillo/error.hpp"
#include "pupillo/evaluation.hpp"
#include "pupillo/log.hpp"
#include "pupillo/model.hpp"
#include "pupillo/pupillogram.hpp"
#include "pupillo/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pupillo;

namespace {

// Thrown for problems found before any output is written.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

void require_dir(const std::string& path, const std::string& flag) {
  require(!path.empty(), flag + " is required");
  require(fs::is_directory(path), flag + ": no such directory '" + path + "'");
}

void require_file(const std::string& path, const std::string& flag) {
  require(!path.empty(), flag + " is required");
  require(fs::is_regular_file(path), flag + ": no such file '" + path + "'");
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

cv::Mat to_working_size(const cv::Mat& rgb, int size) {
  if (rgb.rows == size && rgb.cols == size) return rgb;
  cv::Mat out;
  cv::resize(rgb, out, cv::Size(size, size), 0, 0, cv::INTER_LINEAR);
  return out;
}

// Options shared by every command.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;

  RunConfig load() const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (seed) c.seed = *seed;
    if (!out.empty()) c.output_dir = out;
    return c;
  }
};

void add_common(CLI::App* cmd, Common& c, bool needs_out = true) {
  cmd->add_option("--config", c.config_path, "JSON run config (flags override it)");
  cmd->add_option("--seed", c.seed, "Global seed");
  auto* o = cmd->add_option("--out", c.out, "Output directory");
  if (needs_out) o->required();
  cmd->add_flag("--quiet", c.quiet, "Only log warnings and errors");
}

void write_manifest(const std::string& command, const RunConfig& c, const json& inputs) {
  write_json(fs::path(c.output_dir) / "run_manifest.json", run_manifest(command, c, inputs));
}

// --- commands ---------------------------------------------------------------

int cmd_synth(const Common& common, int count, int size) {
  RunConfig cfg = common.load();
  require(count >= 1, "--count must be at least 1");
  require(size >= 32, "--size must be at least 32");
  cfg.dataset.prepare.size = size;
  const auto samples = synth_dataset(count, size, cfg.seed);
  PrepareReport report;
  report.total = report.accepted = count;
  write_prepared(cfg.output_dir, samples, report);
  write_manifest("synth", cfg, {{"count", count}, {"size", size}});
  log::info("wrote " + std::to_string(count) + " synthetic eyes to " + cfg.output_dir);
  return 0;
}

int cmd_prepare(const Common& common, const std::string& manifest, std::optional<int> size) {
  RunConfig cfg = common.load();
  if (size) cfg.dataset.prepare.size = *size;
  require_file(manifest, "--manifest");
  require(cfg.dataset.prepare.size >= 8, "--size must be at least 8");
  const auto entries = read_manifest(manifest);
  PrepareReport report;
  const auto samples = prepare_manifest(entries, cfg.dataset.prepare, report);
  write_prepared(cfg.output_dir, samples, report);
  write_manifest("prepare", cfg, {{"manifest", manifest}});
  log::info("prepared " + std::to_string(report.accepted) + "/" + std::to_string(report.total) +
            " samples");
  return 0;
}

int cmd_augment(const Common& common, const std::string& data, int copies, bool keep_originals) {
  RunConfig cfg = common.load();
  require_dir(data, "--data");
  require(copies >= 1, "--copies must be at least 1");
  cfg.augmentation.validate();
  load_scene_images(cfg.augmentation);
  const auto samples = read_prepared(data);
  std::vector<Sample> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (keep_originals) out.push_back(samples[i]);
    for (int k = 0; k < copies; ++k) {
      Rng rng(derive_seed(cfg.seed, {0xa06, i, static_cast<std::uint64_t>(k)}));
      Sample s = augment_sample(samples[i], cfg.augmentation, rng);
      s.id = samples[i].id + "_aug" + std::to_string(k);
      out.push_back(std::move(s));
    }
  }
  PrepareReport report;
  report.total = report.accepted = static_cast<int>(out.size());
  write_prepared(cfg.output_dir, out, report);
  write_manifest("augment", cfg,
                 {{"data", data}, {"copies", copies}, {"keep_originals", keep_originals}});
  return 0;
}

struct TrainFlags {
  std::string data, val;
  std::optional<int> epochs, batch_size;
  std::optional<double> lr;
  std::optional<std::string> optimizer;
  std::optional<bool> cyclic;
  std::optional<bool> augment;
};

int cmd_train(const Common& common, const TrainFlags& f) {
  RunConfig cfg = common.load();
  if (f.epochs) cfg.train.epochs = *f.epochs;
  if (f.batch_size) cfg.train.batch_size = *f.batch_size;
  if (f.lr) cfg.train.lr = *f.lr;
  if (f.optimizer) cfg.train.optimizer = parse_optimizer(*f.optimizer);
  if (f.cyclic) cfg.train.cyclic_enabled = *f.cyclic;
  if (f.augment) cfg.augmentation_enabled = *f.augment;
  if (!f.data.empty()) cfg.dataset.path = f.data;
  if (!f.val.empty()) cfg.dataset.val_path = f.val;
  cfg.dataset.prepare.size = cfg.model.input_size;
  cfg.validate();
  require_dir(cfg.dataset.path, "--data");
  if (!cfg.dataset.val_path.empty()) require_dir(cfg.dataset.val_path, "--val");

  auto samples = read_prepared(cfg.dataset.path);
  for (const auto& s : samples) {
    require(s.width() == cfg.model.input_size && s.height() == cfg.model.input_size,
            "sample " + s.id + " is not " + std::to_string(cfg.model.input_size) + " px square");
  }
  std::vector<Sample> train_set, val_set;
  if (cfg.dataset.val_path.empty()) {
    auto sp = split(samples, cfg.dataset.train_fraction, cfg.seed);
    train_set = std::move(sp.train);
    val_set = std::move(sp.validation);
  } else {
    train_set = std::move(samples);
    val_set = read_prepared(cfg.dataset.val_path);
  }
  require(!train_set.empty(), "training split is empty");
  TrainConfig tc = cfg.resolved_train();
  if (tc.augmentation) load_scene_images(*tc.augmentation);

  torch::set_num_threads(1);
  UNet model = build_model(cfg.model, derive_seed(cfg.seed, {0x30de1}));
  fs::create_directories(cfg.output_dir);
  write_manifest("train", cfg, {{"train_samples", train_set.size()}, {"val_samples", val_set.size()}});
  TrainOptions opts;
  opts.output_dir = fs::path(cfg.output_dir);
  opts.verbose = !common.quiet;
  const auto history = train(model, train_set, val_set, tc, opts);
  log::info("best epoch " + std::to_string(history.best_epoch) + " val DSC " +
            std::to_string(history.best_val_dsc));
  return 0;
}

std::unique_ptr<Predictor> make_predictor(bool oracle, const std::string& checkpoint) {
  if (oracle) return std::make_unique<OraclePredictor>();
  require_file(checkpoint, "--checkpoint");
  return std::make_unique<NetworkPredictor>(load_checkpoint(checkpoint));
}

int cmd_predict(const Common& common, const std::string& checkpoint, const std::string& input,
                std::optional<std::string> mode_flag, std::optional<double> fps) {
  RunConfig cfg = common.load();
  if (mode_flag) cfg.evaluation.mode = parse_pipeline_mode(*mode_flag);
  require_file(checkpoint, "--checkpoint");
  require(!input.empty() && fs::exists(input), "--input: no such file or directory '" + input + "'");
  require(!fps || *fps > 0.0, "--fps must be positive");
  UNet model = load_checkpoint(checkpoint);
  require(cfg.evaluation.mode == PipelineMode::TwoStep || model->has_head(),
          "--mode joint needs a checkpoint with a regression head");
  const int size = model->config().input_size;
  const auto files = fs::is_directory(input) ? list_images(input) : std::vector<fs::path>{input};
  require(!files.empty(), "--input holds no images");

  fs::create_directories(fs::path(cfg.output_dir) / "masks");
  json items = json::array();
  for (std::size_t i = 0; i < files.size(); ++i) {
    const cv::Mat raw = read_rgb(files[i]);
    const cv::Mat img = to_working_size(raw, size);
    const auto pair = split_output(infer(model, images_to_tensor({img}))).front();
    const cv::Mat mask = binarize(pair.mask);
    const std::string id = files[i].stem().string();
    write_mask(fs::path(cfg.output_dir) / "masks" / (id + ".png"), mask);
    json item = {{"id", id}, {"file", files[i].filename().string()}};
    if (fps) item["t"] = static_cast<double>(i) / *fps;
    try {
      const Ellipse e = cfg.evaluation.mode == PipelineMode::Joint
                            ? denormalize_prediction(*pair.params, size)
                            : mask_to_ellipse(mask, cfg.dataset.prepare.filter);
      item["ellipse"] = e;
      item["ellipse_original"] = transform_ellipse(
          e, AffineTransform2D::resize(size, size, raw.cols, raw.rows));
      if (pair.params) item["normalized"] = *pair.params;
    } catch (const Error& err) {
      item["ellipse"] = nullptr;
      item["failure"] = std::string(to_string(err.code()));
    }
    items.push_back(item);
  }
  write_json(fs::path(cfg.output_dir) / "predictions.json",
             {{"schema_version", kSchemaVersion},
              {"mode", to_string(cfg.evaluation.mode)},
              {"working_size", size},
              {"predictions", items}});
  write_manifest("predict", cfg, {{"checkpoint", checkpoint}, {"input", input}});
  return 0;
}

int cmd_evaluate(const Common& common, const std::string& checkpoint, bool oracle,
                 const std::string& data, std::optional<std::string> mode_flag) {
  RunConfig cfg = common.load();
  if (mode_flag) cfg.evaluation.mode = parse_pipeline_mode(*mode_flag);
  require(oracle || !checkpoint.empty(), "one of --checkpoint or --oracle is required");
  require(!(oracle && !checkpoint.empty()), "--checkpoint and --oracle are exclusive");
  if (!data.empty()) cfg.dataset.path = data;
  require_dir(cfg.dataset.path, "--data");
  auto predictor = make_predictor(oracle, checkpoint);
  require(cfg.evaluation.mode == PipelineMode::TwoStep || predictor->has_params(),
          "--mode joint needs a checkpoint with a regression head");
  const auto samples = read_prepared(cfg.dataset.path);
  const auto report = evaluate_pipeline(*predictor, samples, cfg.evaluation.mode,
                                        cfg.evaluation.batch_size, cfg.dataset.prepare.filter);
  fs::create_directories(cfg.output_dir);
  write_json(fs::path(cfg.output_dir) / "metrics.json", report.to_json());
  report.write_csv(fs::path(cfg.output_dir) / "per_image.csv");
  write_manifest("evaluate", cfg,
                 {{"checkpoint", oracle ? "oracle" : checkpoint}, {"data", cfg.dataset.path}});
  log::info(to_string(report.pipeline) + ": DSC " + std::to_string(report.dsc.mean) +
            ", diameter error " + std::to_string(report.diameter_error.mean) + " px (n_eff " +
            std::to_string(report.n_effective) + "/" + std::to_string(report.n) + ")");
  return 0;
}

int cmd_bench(const Common& common, const std::string& checkpoint, const std::string& frames_dir,
              std::optional<int> repetitions, std::optional<std::string> hardware) {
  RunConfig cfg = common.load();
  if (repetitions) cfg.evaluation.repetitions = *repetitions;
  if (hardware) cfg.evaluation.hardware = *hardware;
  require_file(checkpoint, "--checkpoint");
  require_dir(frames_dir, "--frames");
  require(cfg.evaluation.repetitions >= 1, "--repetitions must be positive");
  UNet model = load_checkpoint(checkpoint);
  require(model->has_head(), "bench needs a checkpoint with a regression head");
  const int size = model->config().input_size;
  // A prepared dataset directory keeps its frames under images/.
  const fs::path dir = fs::is_directory(fs::path(frames_dir) / "images")
                           ? fs::path(frames_dir) / "images"
                           : fs::path(frames_dir);
  std::vector<cv::Mat> frames;
  for (const auto& f : list_images(dir)) frames.push_back(to_working_size(read_rgb(f), size));
  require(frames.size() >= 10, "--frames must hold at least 10 images");
  torch::set_num_threads(1);
  TimingReport r = time_pipelines(model, frames, cfg.evaluation.repetitions,
                                  cfg.dataset.prepare.filter);
  r.hardware = cfg.evaluation.hardware;
  fs::create_directories(cfg.output_dir);
  write_json(fs::path(cfg.output_dir) / "timing.json", r.to_json());
  write_manifest("bench", cfg, {{"checkpoint", checkpoint}, {"frames", frames_dir}});
  return 0;
}

struct PupillogramFlags {
  std::string predictions, trace, sidecar, frames, checkpoint;
  std::optional<double> onset, offset, fps, mm_per_pixel;
  std::optional<int> window;
  std::optional<std::string> mode;
};

int cmd_pupillogram(const Common& common, const PupillogramFlags& f) {
  RunConfig cfg = common.load();
  if (f.fps) cfg.pupillogram.fps = *f.fps;
  if (f.mm_per_pixel) cfg.pupillogram.mm_per_pixel = *f.mm_per_pixel;
  if (f.window) cfg.pupillogram.median_window = *f.window;
  if (f.mode) cfg.evaluation.mode = parse_pipeline_mode(*f.mode);
  const int sources = !f.predictions.empty() + !f.trace.empty() + !f.frames.empty();
  require(sources == 1, "exactly one of --predictions, --trace or --frames is required");
  require(cfg.pupillogram.fps > 0.0, "--fps must be positive");
  require(cfg.pupillogram.median_window >= 1 && cfg.pupillogram.median_window % 2 == 1,
          "--median-window must be odd and >= 1");
  const PLROptions plr{cfg.pupillogram.velocity_threshold};
  const TraceOptions topt{cfg.pupillogram.median_window, cfg.pupillogram.mm_per_pixel};

  PupillogramTrace trace;
  if (!f.trace.empty()) {
    require_file(f.trace, "--trace");
    trace = read_trace_csv(f.trace);
    if (!f.sidecar.empty()) {
      require_file(f.sidecar, "--sidecar");
      std::ifstream in(f.sidecar);
      apply_sidecar(trace, json::parse(in));
    }
    if (f.onset) trace.stimulus_onset = *f.onset;
    if (f.offset) trace.stimulus_offset = *f.offset;
    require(f.onset || !f.sidecar.empty(), "--stimulus-onset (or --sidecar) is required");
    if (cfg.pupillogram.median_window > 1) {
      trace.d = median_filter(trace.d, cfg.pupillogram.median_window);
      trace.median_window = cfg.pupillogram.median_window;
    }
  } else {
    require(f.onset.has_value(), "--stimulus-onset is required");
    std::vector<std::pair<double, Ellipse>> preds;
    if (!f.predictions.empty()) {
      require_file(f.predictions, "--predictions");
      std::ifstream in(f.predictions);
      const json doc = json::parse(in);
      const auto& list = doc.at("predictions");
      for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& item = list[i];
        if (item.at("ellipse").is_null()) {
          log::warn("skipping frame without an ellipse: " + item.value("id", std::to_string(i)));
          continue;
        }
        const double t = item.contains("t") ? item.at("t").get<double>()
                                            : static_cast<double>(i) / cfg.pupillogram.fps;
        preds.emplace_back(t, item.at("ellipse").get<Ellipse>());
      }
    } else {
      require_dir(f.frames, "--frames");
      require_file(f.checkpoint, "--checkpoint");
      UNet model = load_checkpoint(f.checkpoint);
      require(cfg.evaluation.mode == PipelineMode::TwoStep || model->has_head(),
              "--mode joint needs a checkpoint with a regression head");
      const int size = model->config().input_size;
      const auto files = list_images(f.frames);
      for (std::size_t i = 0; i < files.size(); ++i) {
        const auto pair =
            split_output(infer(model, images_to_tensor({to_working_size(read_rgb(files[i]), size)})))
                .front();
        try {
          const Ellipse e = cfg.evaluation.mode == PipelineMode::Joint
                                ? denormalize_prediction(*pair.params, size)
                                : mask_to_ellipse(binarize(pair.mask), cfg.dataset.prepare.filter);
          preds.emplace_back(static_cast<double>(i) / cfg.pupillogram.fps, e);
        } catch (const Error& e) {
          log::warn("skipping " + files[i].filename().string() + ": " + e.what());
        }
      }
    }
    trace = trace_from_predictions(preds, *f.onset, topt, f.offset);
  }
  const PLRMetrics metrics = compute_plr_metrics(trace, plr);

  fs::create_directories(cfg.output_dir);
  const fs::path out = cfg.output_dir;
  write_trace_csv(out / "trace.csv", trace);
  write_json(out / "trace.json", trace_sidecar(trace, plr));
  write_json(out / "metrics.json", metrics.to_json(trace.unit));
  render_pupillogram(out / "pupillogram.png", trace, metrics);
  write_manifest("pupillogram", cfg,
                 {{"predictions", f.predictions}, {"trace", f.trace}, {"frames", f.frames},
                  {"checkpoint", f.checkpoint}, {"stimulus_onset", trace.stimulus_onset}});
  return 0;
}

bool is_validation_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::ConfigError:
    case ErrorCode::UnsupportedOp:
    case ErrorCode::NonMonotoneTime:
    case ErrorCode::NoBaseline:
    case ErrorCode::TooFewSamples:
      return true;
    default:
      return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pupil segmentation, ellipse regression and pupillogram toolkit"};
  app.set_version_flag("--version", toolkit_version());
  app.require_subcommand(1);

  Common common;
  int count = 8, synth_size = 224;
  auto* synth = app.add_subcommand("synth", "Generate synthetic eyes as a prepared dataset");
  add_common(synth, common);
  synth->add_option("--count", count, "Number of eyes");
  synth->add_option("--size", synth_size, "Square image size");

  std::string manifest;
  std::optional<int> prep_size;
  auto* prepare = app.add_subcommand("prepare", "Manifest of raw images + annotations -> prepared dataset");
  add_common(prepare, common);
  prepare->add_option("--manifest", manifest, "CSV id,image_path,annotation_path")->required();
  prepare->add_option("--size", prep_size, "Working size (default from config, 224)");

  std::string data;
  int copies = 1;
  bool keep_originals = true;
  auto* augment = app.add_subcommand("augment", "Prepared dataset -> augmented dataset");
  add_common(augment, common);
  augment->add_option("--data", data, "Prepared dataset directory")->required();
  augment->add_option("--copies", copies, "Augmented copies per original");
  augment->add_flag("!--no-originals", keep_originals, "Omit the originals from the output");

  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "Train on a prepared dataset");
  add_common(train_cmd, common);
  train_cmd->add_option("--data", tf.data, "Prepared dataset directory");
  train_cmd->add_option("--val", tf.val, "Separate validation set (default: split --data)");
  train_cmd->add_option("--epochs", tf.epochs);
  train_cmd->add_option("--batch-size", tf.batch_size);
  train_cmd->add_option("--lr", tf.lr);
  train_cmd->add_option("--optimizer", tf.optimizer, "rmsprop | adam");
  train_cmd->add_option("--cyclic-lr", tf.cyclic, "true | false");
  train_cmd->add_option("--augment", tf.augment, "true | false");

  std::string checkpoint, input;
  std::optional<std::string> mode;
  std::optional<double> fps;
  auto* predict = app.add_subcommand("predict", "Checkpoint + images -> masks and ellipses");
  add_common(predict, common);
  predict->add_option("--checkpoint", checkpoint)->required();
  predict->add_option("--input", input, "Image file or directory")->required();
  predict->add_option("--mode", mode, "joint | two-step");
  predict->add_option("--fps", fps, "Stamp predictions with t = index / fps");

  bool oracle = false;
  auto* evaluate = app.add_subcommand("evaluate", "Checkpoint + prepared dataset -> metrics");
  add_common(evaluate, common);
  evaluate->add_option("--checkpoint", checkpoint);
  evaluate->add_flag("--oracle", oracle, "Score the ground truth itself (perfect model)");
  evaluate->add_option("--data", data, "Prepared dataset directory");
  evaluate->add_option("--mode", mode, "joint | two-step");

  std::string frames_dir;
  std::optional<int> repetitions;
  std::optional<std::string> hardware;
  auto* bench = app.add_subcommand("bench", "Joint vs two-step timing");
  add_common(bench, common);
  bench->add_option("--checkpoint", checkpoint)->required();
  bench->add_option("--frames", frames_dir, "Image directory or prepared dataset")->required();
  bench->add_option("--repetitions", repetitions);
  bench->add_option("--hardware", hardware, "Free-text hardware description");

  PupillogramFlags pf;
  auto* plr = app.add_subcommand("pupillogram", "Predictions or trace -> PLR metrics and plot");
  add_common(plr, common);
  plr->add_option("--predictions", pf.predictions, "predictions.json from predict");
  plr->add_option("--trace", pf.trace, "Trace CSV");
  plr->add_option("--sidecar", pf.sidecar, "Trace JSON sidecar");
  plr->add_option("--frames", pf.frames, "Ordered frame directory (needs --checkpoint)");
  plr->add_option("--checkpoint", pf.checkpoint);
  plr->add_option("--mode", pf.mode, "joint | two-step");
  plr->add_option("--stimulus-onset", pf.onset, "Seconds");
  plr->add_option("--stimulus-offset", pf.offset, "Seconds");
  plr->add_option("--fps", pf.fps);
  plr->add_option("--median-window", pf.window);
  plr->add_option("--mm-per-pixel", pf.mm_per_pixel);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  if (common.quiet) log::set_level(log::Level::Warn);

  try {
    // Each command validates first; anything thrown before its first write
    // is reported as a validation error.
    if (!common.out.empty() && fs::exists(common.out) && !fs::is_directory(common.out)) {
      throw UsageError("--out exists and is not a directory");
    }
    const auto run = [&]() -> int {
      if (synth->parsed()) return cmd_synth(common, count, synth_size);
      if (prepare->parsed()) return cmd_prepare(common, manifest, prep_size);
      if (augment->parsed()) return cmd_augment(common, data, copies, keep_originals);
      if (train_cmd->parsed()) return cmd_train(common, tf);
      if (predict->parsed()) return cmd_predict(common, checkpoint, input, mode, fps);
      if (evaluate->parsed()) return cmd_evaluate(common, checkpoint, oracle, data, mode);
      if (bench->parsed()) return cmd_bench(common, checkpoint, frames_dir, repetitions, hardware);
      return cmd_pupillogram(common, pf);
    };
    return run();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_validation_code(e.code()) ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
