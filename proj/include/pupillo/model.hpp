#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>
#include <torch/nn/module.h>
#include <torch/nn/modules/batchnorm.h>
#include <torch/nn/modules/container/sequential.h>
#include <torch/nn/modules/container/modulelist.h>
#include <torch/nn/modules/conv.h>
#include <torch/nn/modules/linear.h>
#include <torch/nn/pimpl.h>

#include "pupillo/geometry.hpp"

namespace pupillo {

struct ModelConfig {
  int input_size = 224;
  int encoder_depth = 4;
  int base_channels = 32;
  bool regression_head = true;
  std::vector<int> head_hidden{192, 64};
  bool batch_norm = true;

  /// Throws ConfigError.
  void validate() const;
  /// Channels at encoder stage k (k = encoder_depth is the bottleneck).
  int channels(int stage) const { return base_channels << stage; }
  /// Feature width fed to the regression head.
  int head_input_features() const { return 3 * channels(encoder_depth); }
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Raw network outputs. `params` is [N, 5] normalized ellipse parameters and
/// is undefined when the regression head is disabled.
struct ModelOutput {
  torch::Tensor mask;    // [N, 1, S, S] probabilities
  torch::Tensor params;  // [N, 5]
};

class UNetImpl : public torch::nn::Module {
 public:
  explicit UNetImpl(const ModelConfig& cfg);

  /// images: [N, 3, S, S] in [0, 1]. Throws ShapeMismatch.
  ModelOutput forward(const torch::Tensor& images);
  /// Mask branch only; the regression head is not evaluated.
  torch::Tensor forward_mask(const torch::Tensor& images);

  const ModelConfig& config() const { return cfg_; }
  bool has_head() const { return cfg_.regression_head; }

 private:
  torch::Tensor encode(const torch::Tensor& images,
                       std::vector<torch::Tensor>& skips);
  torch::Tensor decode(torch::Tensor z, const std::vector<torch::Tensor>& skips);
  torch::Tensor regress(const torch::Tensor& z);

  ModelConfig cfg_;
  torch::nn::ModuleList down_{nullptr};
  torch::nn::Sequential bottleneck_{nullptr};
  torch::nn::ModuleList up_{nullptr};
  torch::nn::ModuleList up_blocks_{nullptr};
  torch::nn::Conv2d out_{nullptr};
  torch::nn::Sequential head_{nullptr};
};
TORCH_MODULE(UNet);

/// Builds a model with weights initialized from `seed`. The backbone is
/// created before the head, so a mask-only model built with the same seed
/// has exactly the joint model's backbone weights.
UNet build_model(const ModelConfig& cfg, std::uint64_t seed = 0);

std::int64_t count_parameters(const torch::nn::Module& module);

/// Per-item view of a forward pass.
struct PredictionPair {
  torch::Tensor mask;  // [S, S] probabilities
  std::optional<NormalizedEllipse> params;
};

std::vector<PredictionPair> split_output(const ModelOutput& out);

/// Inference-mode forward (eval mode, no autograd), restoring the previous
/// training flag afterwards.
ModelOutput infer(UNet& model, const torch::Tensor& images);

/// Single archive holding the weights and the config as embedded JSON.
void save_checkpoint(UNet& model, const std::filesystem::path& path);
/// Throws IoError when unreadable, ConfigError when the stored config does
/// not match the stored tensors.
UNet load_checkpoint(const std::filesystem::path& path);

}  // namespace pupillo
