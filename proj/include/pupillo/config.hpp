#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "pupillo/augmentation.hpp"
#include "pupillo/dataset.hpp"
#include "pupillo/evaluation.hpp"
#include "pupillo/model.hpp"
#include "pupillo/pupillogram.hpp"
#include "pupillo/training.hpp"

namespace pupillo {

inline constexpr int kSchemaVersion = 1;

struct DatasetOptions {
  std::string path;      // prepared dataset directory
  std::string val_path;  // optional separate validation set
  double train_fraction = 0.9;
  PrepareOptions prepare;
};

struct EvaluationOptions {
  PipelineMode mode = PipelineMode::Joint;
  int batch_size = 16;
  int repetitions = 5;
  std::string hardware;
};

struct PupillogramOptions {
  int median_window = 3;
  double velocity_threshold = 0.05;
  std::optional<double> mm_per_pixel;
  double fps = 30.0;
};

/// Everything a command needs. Every field has a default, and
/// from_json(to_json(c)) == c for the serialized fields.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir;
  DatasetOptions dataset;
  bool augmentation_enabled = false;
  AugmentationConfig augmentation;
  ModelConfig model;
  TrainConfig train;
  EvaluationOptions evaluation;
  PupillogramOptions pupillogram;

  /// Train config with the global seed and augmentation filled in.
  TrainConfig resolved_train() const;
  /// Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Unknown top-level or section keys are ConfigError so typos surface.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Deterministic manifest: resolved config (minus output_dir), toolkit
/// version, seed, command.
nlohmann::json run_manifest(const std::string& command, const RunConfig& c,
                            const nlohmann::json& extra = nlohmann::json::object());

std::string toolkit_version();

}  // namespace pupillo
