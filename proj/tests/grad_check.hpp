#pragma once

#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace space::testing {

struct GradCheck {
  int sampled = 0;
  double max_rel_error = 0.0;
  double worst_analytic = 0.0, worst_numeric = 0.0;
};

// Compares autograd gradients of loss() with central differences on randomly
// chosen parameter entries that have a nonzero analytic gradient. The module
// should already be in double precision.
inline GradCheck grad_check(torch::nn::Module& module, const std::function<torch::Tensor()>& loss,
                            int samples, std::uint64_t seed, double eps = 1e-6) {
  auto params = module.parameters();
  for (auto& p : params) p.mutable_grad() = torch::Tensor();
  loss().backward();

  struct Entry {
    std::size_t param;
    int64_t index;
    double grad;
  };
  std::vector<Entry> candidates;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].grad().defined()) continue;
    const torch::Tensor g = params[i].grad().reshape({-1});
    const auto* data = g.data_ptr<double>();
    for (int64_t k = 0; k < g.numel(); ++k) {
      if (data[k] != 0.0) candidates.push_back({i, k, data[k]});
    }
  }
  std::mt19937_64 rng(seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  candidates.resize(std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(samples)));

  GradCheck out;
  torch::NoGradGuard g;
  for (const Entry& e : candidates) {
    torch::Tensor flat = params[e.param].view({-1});
    const double original = flat[e.index].item<double>();
    flat[e.index] = original + eps;
    const double up = loss().item<double>();
    flat[e.index] = original - eps;
    const double down = loss().item<double>();
    flat[e.index] = original;
    const double numeric = (up - down) / (2.0 * eps);
    // Central differences of an O(1) loss resolve about 1e-10, so gradients
    // below 1e-6 are compared on an absolute scale.
    const double denom = std::max({std::abs(e.grad), std::abs(numeric), 1e-6});
    const double rel = std::abs(e.grad - numeric) / denom;
    if (rel > out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst_analytic = e.grad;
      out.worst_numeric = numeric;
    }
    ++out.sampled;
  }
  return out;
}

}  // namespace space::testing
