#include "pupillo/config.hpp"

#include <fstream>
#include <set>

#include "pupillo/error.hpp"

#ifndef PUPILLO_VERSION
#define PUPILLO_VERSION "0.0.0"
#endif

namespace pupillo {

std::string toolkit_version() { return PUPILLO_VERSION; }

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                    const std::string& section) {
  if (!j.is_object()) {
    throw Error(ErrorCode::ConfigError, "section '" + section + "' must be an object");
  }
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) {
      throw Error(ErrorCode::ConfigError,
                  "unknown key '" + key + "' in " + (section.empty() ? "config" : section));
    }
  }
}

nlohmann::json labels_json(const LabelMap& m) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [value, label] : m.entries) {
    const char* name = label == Label::Pupil ? "pupil" : label == Label::Iris ? "iris" : "background";
    j[std::to_string(value)] = name;
  }
  return j;
}

LabelMap labels_from_json(const nlohmann::json& j) {
  LabelMap m;
  m.entries.clear();
  for (const auto& [key, value] : j.items()) {
    const std::string name = value.get<std::string>();
    Label label;
    if (name == "pupil") label = Label::Pupil;
    else if (name == "iris") label = Label::Iris;
    else if (name == "background") label = Label::Background;
    else throw Error(ErrorCode::ConfigError, "unknown label class '" + name + "'");
    m.entries[std::stoi(key)] = label;
  }
  return m;
}

}  // namespace

TrainConfig RunConfig::resolved_train() const {
  TrainConfig t = train;
  t.seed = seed;
  if (augmentation_enabled) {
    t.augmentation = augmentation;
    t.augmentation->seed = derive_seed(seed, {0xa06});
  } else {
    t.augmentation.reset();
  }
  return t;
}

void RunConfig::validate() const {
  model.validate();
  resolved_train().validate();
  if (!(dataset.train_fraction > 0.0 && dataset.train_fraction < 1.0)) {
    throw Error(ErrorCode::ConfigError, "train_fraction must lie in (0, 1)",
                dataset.train_fraction);
  }
  if (dataset.prepare.size != model.input_size) {
    throw Error(ErrorCode::ConfigError,
                "dataset.size must equal model.input_size", dataset.prepare.size);
  }
  if (evaluation.batch_size < 1 || evaluation.repetitions < 1) {
    throw Error(ErrorCode::ConfigError, "evaluation batch_size and repetitions must be positive");
  }
  if (pupillogram.median_window < 1 || pupillogram.median_window % 2 == 0) {
    throw Error(ErrorCode::ConfigError, "median_window must be odd and >= 1",
                pupillogram.median_window);
  }
  if (!(pupillogram.fps > 0.0)) throw Error(ErrorCode::ConfigError, "fps must be positive");
}

nlohmann::json to_json(const RunConfig& c) {
  const auto& p = c.dataset.prepare;
  return {
      {"schema_version", kSchemaVersion},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"dataset",
       {{"path", c.dataset.path},
        {"val_path", c.dataset.val_path},
        {"train_fraction", c.dataset.train_fraction},
        {"size", p.size},
        {"labels", labels_json(p.labels)},
        {"min_solidity", p.filter.min_solidity},
        {"min_aspect", p.filter.min_aspect},
        {"min_consistency_dice", p.min_consistency_dice}}},
      {"augmentation", [&] {
         nlohmann::json a = c.augmentation;
         a.erase("seed");
         a["enabled"] = c.augmentation_enabled;
         return a;
       }()},
      {"model", c.model},
      {"train", c.train},
      {"evaluation",
       {{"mode", to_string(c.evaluation.mode)},
        {"batch_size", c.evaluation.batch_size},
        {"repetitions", c.evaluation.repetitions},
        {"hardware", c.evaluation.hardware}}},
      {"pupillogram",
       {{"median_window", c.pupillogram.median_window},
        {"velocity_threshold", c.pupillogram.velocity_threshold},
        {"mm_per_pixel", c.pupillogram.mm_per_pixel ? nlohmann::json(*c.pupillogram.mm_per_pixel)
                                                    : nlohmann::json()},
        {"fps", c.pupillogram.fps}}}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    reject_unknown(j, {"schema_version", "seed", "output_dir", "dataset", "augmentation",
                       "model", "train", "evaluation", "pupillogram"}, "");
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir);
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      reject_unknown(d, {"path", "val_path", "train_fraction", "size", "labels", "min_solidity",
                         "min_aspect", "min_consistency_dice"}, "dataset");
      auto& p = c.dataset.prepare;
      c.dataset.path = d.value("path", c.dataset.path);
      c.dataset.val_path = d.value("val_path", c.dataset.val_path);
      c.dataset.train_fraction = d.value("train_fraction", c.dataset.train_fraction);
      p.size = d.value("size", p.size);
      if (d.contains("labels")) p.labels = labels_from_json(d.at("labels"));
      p.filter.min_solidity = d.value("min_solidity", p.filter.min_solidity);
      p.filter.min_aspect = d.value("min_aspect", p.filter.min_aspect);
      p.min_consistency_dice = d.value("min_consistency_dice", p.min_consistency_dice);
    }
    if (j.contains("augmentation")) {
      auto a = j.at("augmentation");
      reject_unknown(a, {"enabled", "ca_L", "ca_a", "ca_b", "cra_alpha", "scene_dir", "fr_ops",
                         "p_ca", "p_cra", "p_fr"}, "augmentation");
      c.augmentation_enabled = a.value("enabled", c.augmentation_enabled);
      a.erase("enabled");
      c.augmentation = a.get<AugmentationConfig>();
    }
    if (j.contains("model")) {
      reject_unknown(j.at("model"), {"input_size", "encoder_depth", "base_channels",
                                     "regression_head", "head_hidden", "batch_norm"}, "model");
      c.model = j.at("model").get<ModelConfig>();
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      reject_unknown(t, {"epochs", "optimizer", "lr", "rmsprop", "adam", "cyclic_lr",
                         "batch_size", "checkpoint_every", "l1_weight"}, "train");
      c.train = t.get<TrainConfig>();
    }
    if (j.contains("evaluation")) {
      const auto& e = j.at("evaluation");
      reject_unknown(e, {"mode", "batch_size", "repetitions", "hardware"}, "evaluation");
      c.evaluation.mode = parse_pipeline_mode(e.value("mode", to_string(c.evaluation.mode)));
      c.evaluation.batch_size = e.value("batch_size", c.evaluation.batch_size);
      c.evaluation.repetitions = e.value("repetitions", c.evaluation.repetitions);
      c.evaluation.hardware = e.value("hardware", c.evaluation.hardware);
    }
    if (j.contains("pupillogram")) {
      const auto& p = j.at("pupillogram");
      reject_unknown(p, {"median_window", "velocity_threshold", "mm_per_pixel", "fps"}, "pupillogram");
      c.pupillogram.median_window = p.value("median_window", c.pupillogram.median_window);
      c.pupillogram.velocity_threshold =
          p.value("velocity_threshold", c.pupillogram.velocity_threshold);
      if (p.contains("mm_per_pixel") && !p.at("mm_per_pixel").is_null()) {
        c.pupillogram.mm_per_pixel = p.at("mm_per_pixel").get<double>();
      }
      c.pupillogram.fps = p.value("fps", c.pupillogram.fps);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("bad config value: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, "config is not valid JSON: " + std::string(e.what()));
  }
  return run_config_from_json(j);
}

nlohmann::json run_manifest(const std::string& command, const RunConfig& c,
                            const nlohmann::json& extra) {
  // Without the output directory, identical runs into different directories
  // produce identical manifests.
  RunConfig resolved = c;
  resolved.output_dir.clear();
  return {{"schema_version", kSchemaVersion},
          {"command", command},
          {"toolkit_version", toolkit_version()},
          {"seed", c.seed},
          {"config", to_json(resolved)},
          {"inputs", extra}};
}

}  // namespace pupillo
