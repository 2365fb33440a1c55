#pragma once

#include <torch/torch.h>

namespace space {

// Mean absolute error over (..., D) tensors whose last dimension holds
// interleaved 3D (x, y, z) or 2D (x, y) points; y terms are scaled by
// lambda_y. With point_dims 0 every column is weighted 1.
torch::Tensor weighted_l1(const torch::Tensor& pred, const torch::Tensor& gt, double lambda_y,
                          int point_dims = 3);

// Landmark frames (..., 308): 68 3D face points then 52 2D eye points, with
// the y weight applied to both blocks.
torch::Tensor weighted_l1_frames(const torch::Tensor& pred, const torch::Tensor& gt,
                                 double lambda_y);

// Mean |(pred_t - pred_{t-1}) - (gt_t - gt_{t-1})| over (B, T, D) sequences.
torch::Tensor velocity_loss(const torch::Tensor& pred, const torch::Tensor& gt);

// sum_d 0.5 (mu^2 + sigma^2 - 1 - ln sigma^2), averaged over the batch.
torch::Tensor kl_loss(const torch::Tensor& mu, const torch::Tensor& sigma);

struct LrSchedule {
  double start_lr = 1e-5;
  double peak_lr = 5e-4;
  long warmup_steps = 500;
  long total_steps = 20000;

  void validate() const;
};

// Linear warmup from start_lr to peak_lr, then cosine decay to 0 at
// total_steps. Steps past total give 0.
double lr_schedule(long step, const LrSchedule& s);

}  // namespace space
