#include "pupillo/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <torch/torch.h>

#include "pupillo/dataset.hpp"
#include "pupillo/error.hpp"
#include "pupillo/log.hpp"
#include "pupillo/losses.hpp"

namespace pupillo {

void TrainConfig::validate() const {
  auto fail = [](const std::string& m, double v) {
    throw Error(ErrorCode::ConfigError, m, v);
  };
  if (epochs < 1) fail("epochs must be at least 1", epochs);
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail("lr must be finite and non-negative", lr);
  if (batch_size < 1) fail("batch_size must be positive", batch_size);
  if (cyclic_enabled && !(cyclic_min >= 0.0 && cyclic_min <= cyclic_max)) {
    fail("cyclic bounds must satisfy 0 <= min <= max", cyclic_min);
  }
  if (steps_per_cycle != 0 && steps_per_cycle < 2) {
    fail("steps_per_cycle must be 0 (auto) or at least 2", steps_per_cycle);
  }
  if (checkpoint_every < 0) fail("checkpoint_every must be non-negative", checkpoint_every);
  if (!(l1_weight >= 0.0)) fail("l1_weight must be non-negative", l1_weight);
  if (augmentation) augmentation->validate();
}

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Adam ? "adam" : "rmsprop";
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "rmsprop") return OptimizerKind::RMSprop;
  if (name == "adam") return OptimizerKind::Adam;
  throw Error(ErrorCode::ConfigError, "unknown optimizer '" + name + "'");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"optimizer", to_string(c.optimizer)},
       {"lr", c.lr},
       {"rmsprop", {{"weight_decay", c.rmsprop_weight_decay}, {"momentum", c.rmsprop_momentum}}},
       {"adam", {{"beta1", c.adam_beta1}, {"beta2", c.adam_beta2}}},
       {"cyclic_lr", {{"enabled", c.cyclic_enabled},
                      {"min", c.cyclic_min},
                      {"max", c.cyclic_max},
                      {"steps_per_cycle", c.steps_per_cycle}}},
       {"batch_size", c.batch_size},
       {"checkpoint_every", c.checkpoint_every},
       {"l1_weight", c.l1_weight}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d;
  c.epochs = j.value("epochs", d.epochs);
  c.optimizer = parse_optimizer(j.value("optimizer", to_string(d.optimizer)));
  c.lr = j.value("lr", d.lr);
  const auto rms = j.value("rmsprop", nlohmann::json::object());
  c.rmsprop_weight_decay = rms.value("weight_decay", d.rmsprop_weight_decay);
  c.rmsprop_momentum = rms.value("momentum", d.rmsprop_momentum);
  const auto adam = j.value("adam", nlohmann::json::object());
  c.adam_beta1 = adam.value("beta1", d.adam_beta1);
  c.adam_beta2 = adam.value("beta2", d.adam_beta2);
  const auto cyc = j.value("cyclic_lr", nlohmann::json::object());
  c.cyclic_enabled = cyc.value("enabled", d.cyclic_enabled);
  c.cyclic_min = cyc.value("min", d.cyclic_min);
  c.cyclic_max = cyc.value("max", d.cyclic_max);
  c.steps_per_cycle = cyc.value("steps_per_cycle", d.steps_per_cycle);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
  c.l1_weight = j.value("l1_weight", d.l1_weight);
}

double cyclic_lr(std::int64_t step, std::int64_t steps_per_cycle,
                 double lr_min, double lr_max) {
  if (steps_per_cycle < 2) {
    throw Error(ErrorCode::ConfigError, "steps_per_cycle must be at least 2",
                static_cast<double>(steps_per_cycle));
  }
  if (!(lr_min >= 0.0 && lr_min <= lr_max)) {
    throw Error(ErrorCode::ConfigError, "cyclic bounds must satisfy 0 <= min <= max", lr_min);
  }
  if (step < 0) throw Error(ErrorCode::ConfigError, "negative step", static_cast<double>(step));
  const double phase = static_cast<double>(step % steps_per_cycle) /
                       static_cast<double>(steps_per_cycle);
  const double tri = 1.0 - std::abs(2.0 * phase - 1.0);
  return lr_min + (lr_max - lr_min) * tri;
}

namespace {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::unique_ptr<torch::optim::Optimizer> make_optimizer(UNet& model,
                                                        const TrainConfig& cfg,
                                                        double lr) {
  if (cfg.optimizer == OptimizerKind::Adam) {
    return std::make_unique<torch::optim::Adam>(
        model->parameters(),
        torch::optim::AdamOptions(lr).betas({cfg.adam_beta1, cfg.adam_beta2}));
  }
  return std::make_unique<torch::optim::RMSprop>(
      model->parameters(), torch::optim::RMSpropOptions(lr)
                               .weight_decay(cfg.rmsprop_weight_decay)
                               .momentum(cfg.rmsprop_momentum));
}

void set_lr(torch::optim::Optimizer& opt, double lr) {
  for (auto& group : opt.param_groups()) group.options().set_lr(lr);
}

}  // namespace

void write_history_csv(const std::filesystem::path& path,
                       const TrainHistory& history, bool include_seconds) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "epoch,train_total,train_dice,train_l1,val_dsc,val_l1,lr";
  if (include_seconds) out << ",seconds";
  out << '\n';
  for (const auto& r : history.epochs) {
    out << r.epoch << ',' << format_double(r.train_total) << ','
        << format_double(r.train_dice) << ',' << format_double(r.train_l1)
        << ',' << format_double(r.val_dsc) << ',' << format_double(r.val_l1)
        << ',' << format_double(r.lr);
    if (include_seconds) out << ',' << format_double(r.seconds);
    out << '\n';
  }
}

ValidationResult validate(UNet& model, const std::vector<Sample>& samples,
                          int batch_size) {
  ValidationResult r;
  if (samples.empty()) return r;
  double dsc_sum = 0.0;
  double l1_sum = 0.0;
  BatchGenerator gen(samples, batch_size, false, std::nullopt, 0);
  for (std::size_t k = 0; k < gen.batches_per_epoch(); ++k) {
    const Batch b = gen.batch(0, k);
    const ModelOutput out = infer(model, b.images);
    const auto binary = (out.mask >= 0.5).to(torch::kDouble);
    dsc_sum += losses::dice_score_per_sample(binary, b.masks.to(torch::kDouble))
                   .sum()
                   .item<double>();
    if (out.params.defined()) {
      l1_sum += (out.params - b.targets).abs().sum().item<double>();
    }
  }
  const auto n = static_cast<double>(samples.size());
  r.dsc = dsc_sum / n;
  r.l1 = model->has_head() ? l1_sum / n : std::numeric_limits<double>::quiet_NaN();
  return r;
}

TrainHistory train(UNet& model, const std::vector<Sample>& train_set,
                   const std::vector<Sample>& val_set, const TrainConfig& cfg,
                   const TrainOptions& options) {
  cfg.validate();
  if (train_set.empty()) throw Error(ErrorCode::TooFewSamples, "empty training set");
  for (const auto& s : train_set) {
    if (s.width() != model->config().input_size || s.height() != model->config().input_size) {
      throw Error(ErrorCode::ShapeMismatch,
                  "sample " + s.id + " does not match the model input size");
    }
  }
  if (options.output_dir) std::filesystem::create_directories(*options.output_dir);

  torch::manual_seed(derive_seed(cfg.seed, {0x7a1}));
  const BatchGenerator gen(train_set, cfg.batch_size, true, cfg.augmentation, cfg.seed);
  const auto steps_per_epoch = static_cast<std::int64_t>(gen.batches_per_epoch());
  const std::int64_t steps_per_cycle =
      cfg.steps_per_cycle > 0 ? cfg.steps_per_cycle : std::max<std::int64_t>(2, 2 * steps_per_epoch);
  auto lr_at = [&](std::int64_t step) {
    return cfg.cyclic_enabled ? cyclic_lr(step, steps_per_cycle, cfg.cyclic_min, cfg.cyclic_max)
                              : cfg.lr;
  };

  auto optimizer = make_optimizer(model, cfg, lr_at(0));
  TrainHistory history;
  history.best_val_dsc = -1.0;
  std::int64_t step = 0;
  const auto nan = std::numeric_limits<double>::quiet_NaN();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    model->train();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr_at(step);
    double total = 0.0, dice = 0.0, l1 = 0.0;
    for (std::int64_t k = 0; k < steps_per_epoch; ++k, ++step) {
      const Batch b = gen.batch(epoch - 1, static_cast<std::size_t>(k));
      set_lr(*optimizer, lr_at(step));
      optimizer->zero_grad();
      const ModelOutput out = model->forward(b.images);
      losses::LossValue loss;
      if (model->has_head()) {
        loss = losses::combined_loss(out.mask, b.masks, out.params, b.targets, cfg.l1_weight);
      } else {
        loss.dice_component = losses::dice_loss(out.mask, b.masks);
        loss.l1_component = torch::zeros({});
        loss.total = loss.dice_component;
      }
      const double value = loss.total.item<double>();
      if (!std::isfinite(value)) {
        throw Error(ErrorCode::DivergenceDetected,
                    "non-finite loss in epoch " + std::to_string(epoch), epoch);
      }
      loss.total.backward();
      optimizer->step();
      const auto w = static_cast<double>(b.size());
      total += value * w;
      dice += loss.dice_component.item<double>() * w;
      l1 += loss.l1_component.item<double>() * w;
    }
    const auto n = static_cast<double>(train_set.size());
    rec.train_total = total / n;
    rec.train_dice = dice / n;
    rec.train_l1 = l1 / n;
    if (!val_set.empty()) {
      const ValidationResult v = validate(model, val_set, cfg.batch_size);
      rec.val_dsc = v.dsc;
      rec.val_l1 = v.l1;
    } else {
      rec.val_dsc = nan;
      rec.val_l1 = nan;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.epochs.push_back(rec);

    const bool improved = val_set.empty() || rec.val_dsc > history.best_val_dsc;
    if (improved) {
      history.best_epoch = epoch;
      history.best_val_dsc = val_set.empty() ? nan : rec.val_dsc;
    }
    if (options.output_dir) {
      const auto& dir = *options.output_dir;
      if (improved) save_checkpoint(model, dir / "best.pt");
      if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
        char name[32];
        std::snprintf(name, sizeof(name), "epoch_%03d.pt", epoch);
        save_checkpoint(model, dir / name);
      }
      write_history_csv(dir / "history.csv", history);
    }
    if (options.verbose) {
      std::ostringstream os;
      os << "epoch " << epoch << "/" << cfg.epochs << " loss " << rec.train_total
         << " dice " << rec.train_dice << " l1 " << rec.train_l1 << " val_dsc "
         << rec.val_dsc << " lr " << rec.lr << " (" << std::fixed
         << std::setprecision(1) << rec.seconds << " s)";
      log::info(os.str());
    }
  }
  if (options.output_dir) save_checkpoint(model, *options.output_dir / "last.pt");
  model->eval();
  return history;
}

}  // namespace pupillo
