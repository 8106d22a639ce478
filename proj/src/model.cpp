#include "pupillo/model.hpp"

#include <torch/torch.h>

#include "pupillo/error.hpp"

namespace pupillo {

void ModelConfig::validate() const {
  if (encoder_depth < 1 || encoder_depth > 8) {
    throw Error(ErrorCode::ConfigError, "encoder_depth must lie in [1, 8]",
                encoder_depth);
  }
  if (base_channels < 1) {
    throw Error(ErrorCode::ConfigError, "base_channels must be positive",
                base_channels);
  }
  const int factor = 1 << encoder_depth;
  if (input_size < factor || input_size % factor != 0) {
    throw Error(ErrorCode::ConfigError,
                "input_size " + std::to_string(input_size) +
                    " is not divisible by 2^encoder_depth = " +
                    std::to_string(factor),
                input_size);
  }
  for (int w : head_hidden) {
    if (w < 1) throw Error(ErrorCode::ConfigError, "head_hidden widths must be positive", w);
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"input_size", c.input_size},
       {"encoder_depth", c.encoder_depth},
       {"base_channels", c.base_channels},
       {"regression_head", c.regression_head},
       {"head_hidden", c.head_hidden},
       {"batch_norm", c.batch_norm}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.input_size = j.value("input_size", d.input_size);
  c.encoder_depth = j.value("encoder_depth", d.encoder_depth);
  c.base_channels = j.value("base_channels", d.base_channels);
  c.regression_head = j.value("regression_head", d.regression_head);
  c.head_hidden = j.value("head_hidden", d.head_hidden);
  c.batch_norm = j.value("batch_norm", d.batch_norm);
}

namespace {

torch::nn::Sequential double_conv(int in, int out, bool batch_norm) {
  torch::nn::Sequential seq;
  for (int k = 0; k < 2; ++k) {
    seq->push_back(torch::nn::Conv2d(
        torch::nn::Conv2dOptions(k == 0 ? in : out, out, 3).padding(1).bias(!batch_norm)));
    if (batch_norm) seq->push_back(torch::nn::BatchNorm2d(out));
    seq->push_back(torch::nn::ReLU());
  }
  return seq;
}

// Per-channel spatial expectation of a softmax over positions, in [-1, 1].
// Global average pooling alone discards where activations sit, and the head
// has to regress a position.
torch::Tensor soft_argmax(const torch::Tensor& z) {
  const auto n = z.size(0);
  const auto c = z.size(1);
  const auto h = z.size(2);
  const auto w = z.size(3);
  const auto weights = torch::softmax(z.reshape({n, c, h * w}), -1).reshape({n, c, h, w});
  const auto opts = z.options();
  const auto xs = (torch::arange(w, opts) + 0.5) * (2.0 / static_cast<double>(w)) - 1.0;
  const auto ys = (torch::arange(h, opts) + 0.5) * (2.0 / static_cast<double>(h)) - 1.0;
  const auto ex = (weights.sum(2) * xs).sum(-1);
  const auto ey = (weights.sum(3) * ys).sum(-1);
  return torch::cat({ex, ey}, 1);
}

}  // namespace

UNetImpl::UNetImpl(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int depth = cfg_.encoder_depth;
  const bool bn = cfg_.batch_norm;

  down_ = register_module("down", torch::nn::ModuleList());
  for (int k = 0; k < depth; ++k) {
    down_->push_back(double_conv(k == 0 ? 3 : cfg_.channels(k - 1), cfg_.channels(k), bn));
  }
  bottleneck_ = register_module(
      "bottleneck", double_conv(cfg_.channels(depth - 1), cfg_.channels(depth), bn));
  up_ = register_module("up", torch::nn::ModuleList());
  up_blocks_ = register_module("up_blocks", torch::nn::ModuleList());
  for (int k = depth - 1; k >= 0; --k) {
    up_->push_back(torch::nn::ConvTranspose2d(
        torch::nn::ConvTranspose2dOptions(cfg_.channels(k + 1), cfg_.channels(k), 2).stride(2)));
    up_blocks_->push_back(double_conv(2 * cfg_.channels(k), cfg_.channels(k), bn));
  }
  out_ = register_module("out", torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg_.channels(0), 1, 1)));

  if (cfg_.regression_head) {
    head_ = torch::nn::Sequential();
    int width = cfg_.head_input_features();
    for (int hidden : cfg_.head_hidden) {
      head_->push_back(torch::nn::Linear(width, hidden));
      head_->push_back(torch::nn::ReLU());
      width = hidden;
    }
    head_->push_back(torch::nn::Linear(width, 5));
    head_ = register_module("head", head_);
  }
}

torch::Tensor UNetImpl::encode(const torch::Tensor& images,
                               std::vector<torch::Tensor>& skips) {
  const auto s = cfg_.input_size;
  if (images.dim() != 4 || images.size(1) != 3 || images.size(2) != s ||
      images.size(3) != s) {
    throw Error(ErrorCode::ShapeMismatch,
                "expected images of shape [N, 3, " + std::to_string(s) + ", " +
                    std::to_string(s) + "]");
  }
  auto x = images;
  for (auto& block : *down_) {
    x = block->as<torch::nn::Sequential>()->forward(x);
    skips.push_back(x);
    x = torch::max_pool2d(x, 2);
  }
  return bottleneck_->forward(x);
}

torch::Tensor UNetImpl::decode(torch::Tensor z,
                               const std::vector<torch::Tensor>& skips) {
  auto x = std::move(z);
  for (std::size_t i = 0; i < up_->size(); ++i) {
    x = up_[i]->as<torch::nn::ConvTranspose2d>()->forward(x);
    x = torch::cat({skips[skips.size() - 1 - i], x}, 1);
    x = up_blocks_[i]->as<torch::nn::Sequential>()->forward(x);
  }
  return torch::sigmoid(out_->forward(x));
}

torch::Tensor UNetImpl::regress(const torch::Tensor& z) {
  const auto pooled = torch::cat({z.mean({2, 3}), soft_argmax(z)}, 1);
  const auto raw = head_->forward(pooled);
  // Sigmoid keeps centre and axes in (0, 1); the angle lives in [-1, 1].
  return torch::cat({torch::sigmoid(raw.narrow(1, 0, 4)), torch::tanh(raw.narrow(1, 4, 1))}, 1);
}

ModelOutput UNetImpl::forward(const torch::Tensor& images) {
  std::vector<torch::Tensor> skips;
  auto z = encode(images, skips);
  ModelOutput out;
  if (cfg_.regression_head) out.params = regress(z);
  out.mask = decode(std::move(z), skips);
  return out;
}

torch::Tensor UNetImpl::forward_mask(const torch::Tensor& images) {
  std::vector<torch::Tensor> skips;
  auto z = encode(images, skips);
  return decode(std::move(z), skips);
}

UNet build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  torch::manual_seed(seed);
  return UNet(cfg);
}

std::int64_t count_parameters(const torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) {
    if (p.requires_grad()) n += p.numel();
  }
  return n;
}

std::vector<PredictionPair> split_output(const ModelOutput& out) {
  std::vector<PredictionPair> items;
  const auto mask = out.mask.detach().to(torch::kCPU);
  const auto params = out.params.defined()
                          ? out.params.detach().to(torch::kCPU, torch::kDouble)
                          : torch::Tensor();
  for (std::int64_t i = 0; i < mask.size(0); ++i) {
    PredictionPair p;
    p.mask = mask[i][0];
    if (params.defined()) {
      const auto row = params[i].contiguous();
      p.params = NormalizedEllipse::from_values(
          std::span<const double, 5>(row.data_ptr<double>(), 5));
    }
    items.push_back(std::move(p));
  }
  return items;
}

ModelOutput infer(UNet& model, const torch::Tensor& images) {
  const bool was_training = model->is_training();
  model->eval();
  ModelOutput out;
  {
    torch::NoGradGuard no_grad;
    out = model->forward(images);
  }
  model->train(was_training);
  return out;
}

void save_checkpoint(UNet& model, const std::filesystem::path& path) {
  torch::serialize::OutputArchive archive;
  archive.write("config", c10::IValue(nlohmann::json(model->config()).dump()));
  model->save(archive);
  try {
    archive.save_to(path.string());
  } catch (const c10::Error& e) {
    throw Error(ErrorCode::IoError, "cannot write checkpoint " + path.string());
  }
}

UNet load_checkpoint(const std::filesystem::path& path) {
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error&) {
    throw Error(ErrorCode::IoError, "cannot read checkpoint " + path.string());
  }
  c10::IValue config;
  if (!archive.try_read("config", config) || !config.isString()) {
    throw Error(ErrorCode::ConfigError, "checkpoint has no embedded config");
  }
  ModelConfig cfg;
  try {
    cfg = nlohmann::json::parse(config.toStringRef()).get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("bad embedded config: ") + e.what());
  }
  UNet model(cfg);
  // The archive reader replaces tensors wholesale, so shapes are compared
  // against the freshly built model explicitly.
  std::vector<std::vector<std::int64_t>> expected;
  for (const auto& t : model->named_parameters(true)) expected.push_back(t.value().sizes().vec());
  for (const auto& t : model->named_buffers(true)) expected.push_back(t.value().sizes().vec());
  const auto mismatch = [&] {
    return Error(ErrorCode::ConfigError,
                 "checkpoint weights do not match the embedded config");
  };
  try {
    model->load(archive);
  } catch (const c10::Error&) {
    throw mismatch();
  }
  std::size_t k = 0;
  for (const auto& t : model->named_parameters(true)) {
    if (t.value().sizes().vec() != expected[k++]) throw mismatch();
  }
  for (const auto& t : model->named_buffers(true)) {
    if (t.value().sizes().vec() != expected[k++]) throw mismatch();
  }
  model->eval();
  return model;
}

}  // namespace pupillo
