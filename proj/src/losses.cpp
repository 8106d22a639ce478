#include "pupillo/losses.hpp"

#include <torch/torch.h>

#include "pupillo/error.hpp"

namespace pupillo::losses {

namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b,
                        const char* what) {
  if (a.sizes() != b.sizes()) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(what) + ": shapes differ");
  }
}

}  // namespace

torch::Tensor dice_score_per_sample(const torch::Tensor& pred,
                                    const torch::Tensor& gt, double eps) {
  require_same_shape(pred, gt, "dice_score");
  if (pred.dim() < 1) throw Error(ErrorCode::ShapeMismatch, "dice_score: scalar input");
  const auto n = pred.size(0);
  const auto p = pred.reshape({n, -1});
  const auto g = gt.reshape({n, -1}).to(p.scalar_type());
  const auto inter = (p * g).sum(1);
  return (2.0 * inter + eps) / (p.sum(1) + g.sum(1) + eps);
}

torch::Tensor dice_score(const torch::Tensor& pred, const torch::Tensor& gt,
                         double eps) {
  return dice_score_per_sample(pred, gt, eps).mean();
}

torch::Tensor dice_loss(const torch::Tensor& pred, const torch::Tensor& gt,
                        double eps) {
  return 1.0 - dice_score(pred, gt, eps);
}

torch::Tensor l1_params(const torch::Tensor& pred, const torch::Tensor& gt) {
  require_same_shape(pred, gt, "l1_params");
  if (pred.size(-1) != 5) {
    throw Error(ErrorCode::ShapeMismatch, "l1_params: expected 5 parameters");
  }
  const auto p = pred.reshape({-1, 5});
  return (p - gt.reshape({-1, 5}).to(p.scalar_type())).abs().sum(1).mean();
}

LossValue combined_loss(const torch::Tensor& pred_mask,
                        const torch::Tensor& gt_mask,
                        const torch::Tensor& pred_params,
                        const torch::Tensor& gt_params, double l1_weight) {
  LossValue v;
  v.dice_component = dice_loss(pred_mask, gt_mask);
  v.l1_component = l1_params(pred_params, gt_params);
  v.total = v.dice_component + l1_weight * v.l1_component;
  return v;
}

}  // namespace pupillo::losses
