#pragma once

#include <torch/types.h>

namespace pupillo::losses {

inline constexpr double kDiceSmoothing = 1e-7;

/// Soft Dice per sample: (2 sum(p g) + eps) / (sum p + sum g + eps), where
/// the sums run over every dimension but the first. Result shape [N].
torch::Tensor dice_score_per_sample(const torch::Tensor& pred,
                                    const torch::Tensor& gt,
                                    double eps = kDiceSmoothing);

/// Batch mean of dice_score_per_sample. Both empty gives 1.
torch::Tensor dice_score(const torch::Tensor& pred, const torch::Tensor& gt,
                         double eps = kDiceSmoothing);

torch::Tensor dice_loss(const torch::Tensor& pred, const torch::Tensor& gt,
                        double eps = kDiceSmoothing);

/// Sum of absolute differences over the 5 normalized parameters, averaged
/// over the batch. Accepts [5] or [N, 5].
torch::Tensor l1_params(const torch::Tensor& pred, const torch::Tensor& gt);

struct LossValue {
  torch::Tensor total;
  torch::Tensor dice_component;
  torch::Tensor l1_component;
};

/// total = dice_loss + l1_weight * l1_params. The weight defaults to the
/// unweighted sum.
LossValue combined_loss(const torch::Tensor& pred_mask,
                        const torch::Tensor& gt_mask,
                        const torch::Tensor& pred_params,
                        const torch::Tensor& gt_params,
                        double l1_weight = 1.0);

}  // namespace pupillo::losses
