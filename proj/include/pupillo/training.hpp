#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pupillo/augmentation.hpp"
#include "pupillo/model.hpp"
#include "pupillo/sample.hpp"

namespace pupillo {

enum class OptimizerKind { RMSprop, Adam };

struct TrainConfig {
  int epochs = 100;
  OptimizerKind optimizer = OptimizerKind::RMSprop;
  double lr = 1e-4;
  double rmsprop_weight_decay = 1e-8;
  double rmsprop_momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.99;
  bool cyclic_enabled = true;
  double cyclic_min = 1e-4;
  double cyclic_max = 1e-3;
  /// 0 selects two epochs' worth of batches.
  int steps_per_cycle = 0;
  int batch_size = 64;
  std::uint64_t seed = 0;
  /// Also write epoch_NNN.pt every this many epochs; 0 disables.
  int checkpoint_every = 0;
  double l1_weight = 1.0;
  std::optional<AugmentationConfig> augmentation;

  /// Throws ConfigError. lr = 0 is accepted (frozen-weight runs).
  void validate() const;
};

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& name);

/// The seed and augmentation are not serialized here; the run config owns
/// them and fills them in.
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Triangular wave: lr_min at step 0, lr_max at steps_per_cycle / 2, back to
/// lr_min at steps_per_cycle, periodic thereafter.
double cyclic_lr(std::int64_t step, std::int64_t steps_per_cycle,
                 double lr_min, double lr_max);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_total = 0.0;
  double train_dice = 0.0;
  double train_l1 = 0.0;
  double val_dsc = 0.0;  // NaN without a validation set
  double val_l1 = 0.0;   // NaN without a validation set or head
  double lr = 0.0;       // learning rate of the epoch's first step
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_dsc = 0.0;
};

/// Columns epoch,train_total,train_dice,train_l1,val_dsc,val_l1,lr,seconds.
void write_history_csv(const std::filesystem::path& path,
                       const TrainHistory& history, bool include_seconds = true);

struct ValidationResult {
  double dsc = 0.0;  // mean DSC of masks binarized at 0.5
  double l1 = 0.0;
};

/// Inference-mode pass; never touches weights, buffers or RNG state.
ValidationResult validate(UNet& model, const std::vector<Sample>& samples,
                          int batch_size);

struct TrainOptions {
  /// When set: best.pt (by validation DSC, or the last epoch without a
  /// validation set), last.pt, optional periodic checkpoints, history.csv.
  std::optional<std::filesystem::path> output_dir;
  bool verbose = false;
};

/// Trains in place. Uses the combined loss when the model has a regression
/// head and the Dice loss otherwise. Throws DivergenceDetected (value = the
/// epoch) on a non-finite loss, TooFewSamples on an empty training set.
TrainHistory train(UNet& model, const std::vector<Sample>& train_set,
                   const std::vector<Sample>& val_set, const TrainConfig& cfg,
                   const TrainOptions& options = {});

}  // namespace pupillo
