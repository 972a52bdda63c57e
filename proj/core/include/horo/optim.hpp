#pragma once

#include "horo/model.hpp"
#include "horo/tape.hpp"

namespace horo {

// Adam over the product manifold: ball rows get metric-rescaled gradients and
// exponential-map retraction, limit rows a clamp at zero, Euclidean tensors a
// plain update. Moment accumulators live in the flat representation (no
// parallel transport).
struct OptimState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step_count = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  void configure(const ParameterStore& store);
};

// Euclidean -> Riemannian gradient at x: g / lambda_x^2 = g (1 - |x|^2)^2 / 4.
void riemannian_scale(std::span<const double> g, std::span<const double> x,
                      std::span<double> out);

// One optimizer step. Post-conditions: every ball row has norm <= 1 - eps,
// every limit coordinate lies in [0, 1 - eps], curvature stays positive.
void optim_step(ParameterStore& store, const ad::GradientBuffer& grads, OptimState& state);

}  // namespace horo
