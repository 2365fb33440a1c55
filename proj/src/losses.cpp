#include "space/losses.hpp"

#include "space/errors.hpp"
#include "space/geometry.hpp"

#include <cmath>
#include <numbers>

namespace space {

namespace {

void check_same(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) throw ContractError(std::string(what) + ": shape mismatch");
}

torch::Tensor y_weights(int64_t dims, int point_dims, double lambda_y,
                        const torch::TensorOptions& opts) {
  torch::Tensor w = torch::ones({dims}, opts);
  if (point_dims > 0) w.slice(0, 1, dims, point_dims).fill_(lambda_y);
  return w;
}

}  // namespace

torch::Tensor weighted_l1(const torch::Tensor& pred, const torch::Tensor& gt, double lambda_y,
                          int point_dims) {
  check_same(pred, gt, "weighted_l1");
  if (lambda_y < 0.0) throw InvalidArgument("weighted_l1: lambda_y must be nonnegative");
  const auto d = pred.size(-1);
  if (point_dims > 0 && d % point_dims != 0) {
    throw ContractError("weighted_l1: last dimension is not a whole number of points");
  }
  return ((pred - gt).abs() * y_weights(d, point_dims, lambda_y, pred.options())).mean();
}

torch::Tensor weighted_l1_frames(const torch::Tensor& pred, const torch::Tensor& gt,
                                 double lambda_y) {
  check_same(pred, gt, "weighted_l1_frames");
  if (pred.size(-1) != kFrameDims) throw ContractError("weighted_l1_frames expects 308 columns");
  const torch::Tensor w = torch::cat({y_weights(kFaceDims, 3, lambda_y, pred.options()),
                                      y_weights(kEyeDims, 2, lambda_y, pred.options())});
  return ((pred - gt).abs() * w).mean();
}

torch::Tensor velocity_loss(const torch::Tensor& pred, const torch::Tensor& gt) {
  check_same(pred, gt, "velocity_loss");
  if (pred.dim() != 3) throw ContractError("velocity_loss expects (B, T, D)");
  const auto t = pred.size(1);
  if (t < 2) throw InvalidArgument("velocity_loss needs at least 2 frames");
  const torch::Tensor dp = pred.narrow(1, 1, t - 1) - pred.narrow(1, 0, t - 1);
  const torch::Tensor dg = gt.narrow(1, 1, t - 1) - gt.narrow(1, 0, t - 1);
  return (dp - dg).abs().mean();
}

torch::Tensor kl_loss(const torch::Tensor& mu, const torch::Tensor& sigma) {
  check_same(mu, sigma, "kl_loss");
  if (!(sigma > 0).all().item<bool>()) throw ContractError("kl_loss: sigma must be positive");
  const torch::Tensor var = sigma * sigma;
  const torch::Tensor kl = 0.5 * (mu * mu + var - 1.0 - torch::log(var));
  return mu.dim() == 1 ? kl.sum() : kl.sum(-1).mean();
}

void LrSchedule::validate() const {
  if (!(warmup_steps >= 0 && warmup_steps < total_steps)) {
    throw InvalidArgument("lr schedule needs 0 <= warmup < total steps");
  }
  if (!(start_lr >= 0.0 && peak_lr >= start_lr)) {
    throw InvalidArgument("lr schedule needs 0 <= start lr <= peak lr");
  }
}

double lr_schedule(long step, const LrSchedule& s) {
  if (step < 0) throw InvalidArgument("lr schedule step must be nonnegative");
  if (step >= s.total_steps) return 0.0;
  if (step < s.warmup_steps) {
    return s.start_lr + (s.peak_lr - s.start_lr) * static_cast<double>(step) /
                            static_cast<double>(s.warmup_steps);
  }
  const double progress = static_cast<double>(step - s.warmup_steps) /
                          static_cast<double>(s.total_steps - s.warmup_steps);
  return 0.5 * s.peak_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace space
